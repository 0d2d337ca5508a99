pub mod cli;
pub mod crypto;
pub mod gateway;
pub mod provider;

//! Command-line front end.
//!
//! [`run_command`] is the whole program minus process plumbing, so it can be
//! driven from tests with captured output. Standard output carries one
//! tab-separated record per line; diagnostics go to standard error.

mod config;
mod prompt;

pub use config::{
    config_candidates, load_config, parse_config, CliConfig, ConfigError, DEFAULT_CONFIG_FILE,
};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::gateway::{Gateway, GatewayError, Session};
use crate::provider::{CloudProvider, MockProvider, Permission};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_AUTH: i32 = 2;
pub const EXIT_INTEGRITY: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Process environment the CLI depends on.
#[derive(Clone, Debug, Default)]
pub struct CliEnv {
    /// `TWINCLOUD_CONFIG`
    pub config: Option<PathBuf>,
    /// Base for the default config location (`$XDG_CONFIG_HOME` or
    /// `$HOME/.config`).
    pub config_home: Option<PathBuf>,
    /// `TWINCLOUD_USER`
    pub user: Option<String>,
    /// `TWINCLOUD_PASSWORD`; when unset the password is prompted for.
    pub password: Option<String>,
}

impl CliEnv {
    pub fn from_process() -> Self {
        let var = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty());
        let config_home = var("XDG_CONFIG_HOME")
            .map(PathBuf::from)
            .or_else(|| var("HOME").map(|h| PathBuf::from(h).join(".config")));
        Self {
            config: var("TWINCLOUD_CONFIG").map(PathBuf::from),
            config_home,
            user: var("TWINCLOUD_USER").and_then(|v| v.into_string().ok()),
            password: var("TWINCLOUD_PASSWORD").and_then(|v| v.into_string().ok()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "twincloud",
    version,
    about = "Split-trust encrypted storage over two or more clouds"
)]
struct Args {
    /// Configuration file (overrides TWINCLOUD_CONFIG)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Account name (overrides TWINCLOUD_USER)
    #[arg(long = "user", short = 'u', global = true, value_name = "NAME")]
    account: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Create accounts on every configured provider
    Signup,
    /// Authenticate with every provider and cache the tokens
    Login,
    /// Encrypt and upload a local file
    Up {
        path: PathBuf,
        /// Replace an existing file of the same name
        #[arg(long)]
        force: bool,
    },
    /// Download and decrypt a file
    Down {
        name: String,
        /// Output file, or directory to place it in
        #[arg(long, value_name = "PATH")]
        dest: Option<PathBuf>,
    },
    /// List owned and shared files
    Ls,
    /// Delete an owned file everywhere
    Rm { name: String },
    /// Grant another user access to an owned file
    Share {
        name: String,
        #[arg(value_name = "USER")]
        grantee: String,
        /// Grant edit instead of read
        #[arg(long)]
        edit: bool,
    },
    /// Withdraw a user's access
    Unshare {
        name: String,
        #[arg(value_name = "USER")]
        grantee: String,
    },
    /// Download every listed file
    Sync {
        #[arg(long, value_name = "DIR")]
        dest: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Credentials(String),
    #[error("{0}")]
    Usage(String),
}

/// Exit status for a gateway error class.
pub fn exit_code(err: &GatewayError) -> i32 {
    match err {
        GatewayError::Auth(_) => EXIT_AUTH,
        GatewayError::Integrity(_) | GatewayError::Format(_) => EXIT_INTEGRITY,
        GatewayError::NotFound(_)
        | GatewayError::Conflict(_)
        | GatewayError::AccessDenied(_)
        | GatewayError::Capability(_)
        | GatewayError::Policy(_)
        | GatewayError::Unavailable(_)
        | GatewayError::Invalid(_)
        | GatewayError::Io(_) => EXIT_USER,
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Gateway(e) => exit_code(e),
            Failure::Credentials(_) => EXIT_AUTH,
            Failure::Usage(_) => EXIT_USER,
        }
    }
}

/// Runs one command. `argv[0]` is the program name.
pub fn run_command<I, S>(argv: I, env: &CliEnv, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USER
                }
            };
        }
    };
    match execute(args, env, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "twincloud: {f}");
            f.code()
        }
    }
}

fn open_gateway(config: &CliConfig) -> Result<Gateway, Failure> {
    let mut remotes: Vec<Arc<dyn CloudProvider>> = Vec::new();
    for id in config.placement.ring() {
        let pc = config
            .providers
            .iter()
            .find(|p| p.id == id)
            .expect("placement validated against providers");
        let provider = MockProvider::open(pc.clone()).map_err(|e| ConfigError::Invalid {
            field: format!("provider {id}"),
            message: e.to_string(),
        })?;
        remotes.push(Arc::new(provider));
    }
    Ok(
        Gateway::new(remotes, config.placement.clone(), &config.staging_dir)?
            .with_token_cache(&config.token_cache),
    )
}

fn credentials(args: &Args, env: &CliEnv) -> Result<(String, String), Failure> {
    let user = args
        .account
        .clone()
        .or_else(|| env.user.clone())
        .ok_or_else(|| Failure::Usage("no user given (use --user or TWINCLOUD_USER)".into()))?;
    let password = match &env.password {
        Some(p) => p.clone(),
        None => prompt::read_password(&format!("password for {user}: "))
            .map_err(|e| Failure::Credentials(format!("cannot read password: {e}")))?,
    };
    Ok((user, password))
}

fn execute(
    args: Args,
    env: &CliEnv,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let candidates = config_candidates(
        args.config.as_deref(),
        env.config.as_deref(),
        env.config_home.as_deref(),
    );
    let config = load_config(&candidates)?;
    let gateway = open_gateway(&config)?;
    let (user, password) = credentials(&args, env)?;

    if let Command::Signup = args.command {
        gateway.signup(&user, &password)?;
        let _ = writeln!(out, "signed_up\t{user}");
        return Ok(EXIT_OK);
    }
    let session = gateway.login(&user, &password)?;
    run_session_command(&args.command, &session, &config, out, err)
}

fn run_session_command(
    command: &Command,
    session: &Session,
    config: &CliConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    match command {
        Command::Signup => unreachable!("handled before login"),
        Command::Login => {
            let _ = writeln!(out, "logged_in\t{}", session.username());
        }
        Command::Up { path, force } => {
            let entry = session.upload_file(path, *force)?;
            let _ = writeln!(out, "{}\t{}", entry.logical_name, entry.size);
        }
        Command::Down { name, dest } => {
            let target = download_target(name, dest.as_deref(), &config.default_dest)?;
            session.download_file(name, &target)?;
            let _ = writeln!(out, "{}", target.display());
        }
        Command::Ls => {
            for e in session.list_files()? {
                let origin = match &e.shared_from {
                    Some(owner) => format!("from:{owner}"),
                    None => "owned".into(),
                };
                let _ = writeln!(out, "{}\t{origin}", e.logical_name);
                if let Some(problem) = &e.problem {
                    let _ = writeln!(err, "twincloud: {}: {problem}", e.logical_name);
                }
            }
        }
        Command::Rm { name } => {
            session.delete_file(name)?;
            let _ = writeln!(out, "deleted\t{name}");
        }
        Command::Share {
            name,
            grantee,
            edit,
        } => {
            let perm = if *edit {
                Permission::Edit
            } else {
                Permission::Read
            };
            session.share_file(name, grantee, perm)?;
            let _ = writeln!(out, "shared\t{name}\t{grantee}\t{}", perm.code());
        }
        Command::Unshare { name, grantee } => {
            session.unshare_file(name, grantee)?;
            let _ = writeln!(out, "unshared\t{name}\t{grantee}");
        }
        Command::Sync { dest } => {
            let dir = dest.clone().unwrap_or_else(|| config.default_dest.clone());
            let report = session.sync_all(&dir)?;
            for name in &report.written {
                let _ = writeln!(out, "{name}");
            }
            let mut code = EXIT_OK;
            for (name, e) in &report.failed {
                let _ = writeln!(err, "twincloud: skipped {name}: {e}");
                code = code.max(exit_code(e));
            }
            return Ok(code);
        }
    }
    Ok(EXIT_OK)
}

/// A directory destination receives the file under its logical name.
fn download_target(
    name: &str,
    dest: Option<&Path>,
    default_dest: &Path,
) -> Result<PathBuf, Failure> {
    match dest {
        Some(d) if d.is_dir() => Ok(d.join(name)),
        Some(d) => Ok(d.to_path_buf()),
        None => {
            std::fs::create_dir_all(default_dest).map_err(GatewayError::from)?;
            Ok(default_dest.join(name))
        }
    }
}

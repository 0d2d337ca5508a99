use crate::provider::{Permission, RemotePath};

/// Compensating action for one completed remote step.
#[derive(Debug)]
pub(super) enum Undo {
    Delete {
        provider: usize,
        path: RemotePath,
    },
    Restore {
        provider: usize,
        path: RemotePath,
        bytes: Vec<u8>,
    },
    Revoke {
        provider: usize,
        path: RemotePath,
        grantee: String,
    },
    Regrant {
        provider: usize,
        path: RemotePath,
        grantee: String,
        perm: Permission,
    },
}

/// Steps completed by one leg of an operation, newest last.
#[derive(Debug, Default)]
pub(super) struct UndoLog(Vec<Undo>);

impl UndoLog {
    pub fn push(&mut self, undo: Undo) {
        self.0.push(undo);
    }

    /// Newest first.
    pub fn drain_reversed(&mut self) -> impl Iterator<Item = Undo> + '_ {
        self.0.drain(..).rev()
    }
}

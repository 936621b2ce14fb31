//! File rewrites inside a project tree, each reversible through a
//! [`BackupToken`], plus the per-project lease.

use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use super::HarnessError;

static BACKUP_SEQ: AtomicU64 = AtomicU64::new(0);

/// Restores one file to the state it had before a rewrite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackupToken {
    /// Absolute path of the rewritten file.
    pub target: PathBuf,
    /// Copy of the original bytes; `None` when the file did not exist.
    pub backup: Option<PathBuf>,
    /// Directories created for the file, deepest first.
    pub created_dirs: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ProjectTree {
    root: PathBuf,
    backup_dir: PathBuf,
}

impl ProjectTree {
    /// `backup_dir` must lie outside `root`; it is created if missing.
    pub fn open(root: &Path, backup_dir: &Path) -> Result<Self, HarnessError> {
        let root = root
            .canonicalize()
            .map_err(|_| HarnessError::FileMissing(root.display().to_string()))?;
        fs::create_dir_all(backup_dir)?;
        Ok(Self {
            root,
            backup_dir: backup_dir.canonicalize()?,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Resolves an existing file and checks that it stays inside the root.
    pub fn resolve_existing(&self, unit_path: &Path) -> Result<PathBuf, HarnessError> {
        let missing = || HarnessError::FileMissing(unit_path.display().to_string());
        let joined = if unit_path.is_absolute() {
            unit_path.to_path_buf()
        } else {
            self.root.join(unit_path)
        };
        let resolved = joined.canonicalize().map_err(|_| missing())?;
        if !resolved.starts_with(&self.root) || !resolved.is_file() {
            return Err(missing());
        }
        Ok(resolved)
    }

    /// Replaces an existing file atomically, keeping a backup of the original.
    pub fn apply_update(&self, unit_path: &Path, updated_text: &str) -> Result<BackupToken, HarnessError> {
        let target = self.resolve_existing(unit_path)?;
        let backup = self.backup_copy(&target)?;
        if let Err(e) = atomic_write(&target, updated_text.as_bytes()) {
            let _ = fs::remove_file(&backup);
            return Err(HarnessError::WriteFailure {
                path: target.display().to_string(),
                reason: e.to_string(),
            });
        }
        Ok(BackupToken {
            target,
            backup: Some(backup),
            created_dirs: Vec::new(),
        })
    }

    /// Writes a file that may not exist yet (a generated test), creating
    /// parent directories. `rel_path` must be relative and free of `..`.
    pub fn install_file(&self, rel_path: &Path, text: &str) -> Result<BackupToken, HarnessError> {
        let escapes = rel_path.is_absolute()
            || rel_path
                .components()
                .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir));
        if escapes {
            return Err(HarnessError::FileMissing(rel_path.display().to_string()));
        }
        let target = self.root.join(rel_path);
        if target.exists() {
            let token = self.apply_update(rel_path, text)?;
            return Ok(token);
        }
        let mut created_dirs = Vec::new();
        let mut dir = target.parent().map(Path::to_path_buf);
        while let Some(d) = dir {
            if d.exists() {
                break;
            }
            created_dirs.push(d.clone());
            dir = d.parent().map(Path::to_path_buf);
        }
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        if let Err(e) = atomic_write(&target, text.as_bytes()) {
            remove_dirs(&created_dirs);
            return Err(HarnessError::WriteFailure {
                path: target.display().to_string(),
                reason: e.to_string(),
            });
        }
        Ok(BackupToken {
            target,
            backup: None,
            created_dirs,
        })
    }

    /// Puts the file back exactly as it was before the rewrite.
    pub fn restore(&self, token: &BackupToken) -> Result<(), HarnessError> {
        let fail = |e: std::io::Error| HarnessError::RestoreFailure {
            path: token.target.display().to_string(),
            reason: e.to_string(),
        };
        match &token.backup {
            Some(backup) => {
                let original = fs::read(backup).map_err(fail)?;
                atomic_write(&token.target, &original).map_err(fail)?;
                let _ = fs::remove_file(backup);
            }
            None => {
                match fs::remove_file(&token.target) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(fail(e)),
                }
                remove_dirs(&token.created_dirs);
            }
        }
        Ok(())
    }

    /// Restores tokens newest first.
    pub fn restore_all(&self, tokens: &[BackupToken]) -> Result<(), HarnessError> {
        let mut first_err = None;
        for token in tokens.iter().rev() {
            if let Err(e) = self.restore(token) {
                first_err.get_or_insert(e);
            }
        }
        first_err.map_or(Ok(()), Err)
    }

    /// Drops backup copies once changes are kept.
    pub fn discard(&self, tokens: &[BackupToken]) {
        for t in tokens {
            if let Some(b) = &t.backup {
                let _ = fs::remove_file(b);
            }
        }
    }

    /// Directory for generated tests: `app/src/test/java` or
    /// `src/test/java`, whichever the project already has.
    pub fn test_source_root(&self) -> PathBuf {
        for candidate in ["app/src/test/java", "src/test/java"] {
            if self.root.join(candidate).is_dir() {
                return PathBuf::from(candidate);
            }
        }
        if self.root.join("app").is_dir() {
            PathBuf::from("app/src/test/java")
        } else {
            PathBuf::from("src/test/java")
        }
    }

    fn backup_copy(&self, target: &Path) -> Result<PathBuf, HarnessError> {
        let seq = BACKUP_SEQ.fetch_add(1, Ordering::Relaxed);
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let backup = self
            .backup_dir
            .join(format!("{}-{seq}-{name}", std::process::id()));
        fs::copy(target, &backup)?;
        Ok(backup)
    }
}

fn remove_dirs(dirs: &[PathBuf]) {
    for d in dirs {
        // only succeeds when empty
        let _ = fs::remove_dir(d);
    }
}

fn atomic_write(target: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = target.parent().unwrap_or(Path::new("."));
    let name = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(
        ".{name}.evolve-tmp-{}-{}",
        std::process::id(),
        BACKUP_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        if let Ok(meta) = fs::metadata(target) {
            fs::set_permissions(&tmp, meta.permissions())?;
        }
        fs::rename(&tmp, target)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Exclusive claim on a project tree, held through a lock file at its root.
#[derive(Debug)]
pub struct ProjectLease {
    lock_path: PathBuf,
}

impl ProjectLease {
    pub const LOCK_FILE: &'static str = ".evolve.lock";

    /// Waits up to `wait` for the lease.
    pub fn acquire(root: &Path, wait: Duration) -> Result<Self, HarnessError> {
        let lock_path = root.join(Self::LOCK_FILE);
        let deadline = Instant::now() + wait;
        loop {
            match fs::OpenOptions::new().write(true).create_new(true).open(&lock_path) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(Self { lock_path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if Instant::now() >= deadline {
                        return Err(HarnessError::LeaseBusy(
                            root.display().to_string(),
                            lock_path.display().to_string(),
                        ));
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl Drop for ProjectLease {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock_path);
    }
}

//! Confines every write to the output directory.

use std::fs;
use std::path::{Component, Path, PathBuf};

use acousep_core::{Error, Result};

#[derive(Debug, Clone)]
pub struct OutputRoot {
    root: Option<PathBuf>,
}

impl OutputRoot {
    pub fn new(root: Option<PathBuf>) -> Self {
        OutputRoot { root }
    }

    /// Resolves a user-supplied output path. Relative paths are placed under
    /// `--out-dir` when one is given; paths that would leave it are rejected.
    pub fn resolve(&self, path: &Path) -> Result<PathBuf> {
        let Some(root) = &self.root else {
            return Ok(path.to_path_buf());
        };
        let root = normalize(&absolute(root)?);
        let full = if path.is_absolute() {
            normalize(path)
        } else {
            normalize(&root.join(path))
        };
        if !full.starts_with(&root) {
            return Err(Error::Parameter(format!(
                "output {} lies outside the output directory {}",
                path.display(),
                root.display()
            )));
        }
        Ok(full)
    }

    /// Resolves and creates an output directory.
    pub fn dir(&self, path: &Path) -> Result<PathBuf> {
        let dir = self.resolve(path)?;
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Resolves an output file and creates its parent directory.
    pub fn file(&self, path: &Path) -> Result<PathBuf> {
        let file = self.resolve(path)?;
        if let Some(parent) = file.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        Ok(file)
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    Ok(if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()?.join(p)
    })
}

/// Lexical normalisation: drops `.` and folds `..` into the preceding component.
fn normalize(p: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push(c);
                }
            }
            other => out.push(other),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_stay_inside() {
        let o = OutputRoot::new(Some(PathBuf::from("/data/out")));
        assert_eq!(
            o.resolve(Path::new("a/b.wav")).unwrap(),
            PathBuf::from("/data/out/a/b.wav")
        );
        assert_eq!(
            o.resolve(Path::new("./x/../y")).unwrap(),
            PathBuf::from("/data/out/y")
        );
        assert!(o.resolve(Path::new("../escape.wav")).is_err());
        assert!(o.resolve(Path::new("/tmp/elsewhere.wav")).is_err());
        assert!(o.resolve(Path::new("/data/out/inner.wav")).is_ok());
    }

    #[test]
    fn no_root_passes_through() {
        let o = OutputRoot::new(None);
        assert_eq!(o.resolve(Path::new("../x")).unwrap(), PathBuf::from("../x"));
    }
}

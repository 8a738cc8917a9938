use std::fs;
use std::path::Path;

use edoc_core::bundle::{DefinitionBundle, DefinitionSet};

use crate::error::CliError;

/// Loads every bundle under a platform data root or its `defs/` directory
/// (`<typeId>/<version>/`).
pub fn load_definitions(path: &Path) -> Result<DefinitionSet, CliError> {
    let root = if path.join("defs").is_dir() { path.join("defs") } else { path.to_path_buf() };
    let mut set = DefinitionSet::new();
    let entries = |p: &Path| fs::read_dir(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())));
    for ty in entries(&root)? {
        let ty = ty?.path();
        if !ty.is_dir() {
            continue;
        }
        for ver in entries(&ty)? {
            let ver = ver?.path();
            if ver.is_dir() {
                let b = DefinitionBundle::load_dir(&ver).map_err(|e| CliError::input(format!("{}: {e}", ver.display())))?;
                set.insert(b);
            }
        }
    }
    if set.iter().next().is_none() {
        return Err(CliError::input(format!("no definitions under {}", root.display())));
    }
    Ok(set)
}

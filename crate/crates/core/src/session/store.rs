//! One JSON file per session.

use std::fs;
use std::path::PathBuf;

use super::WorkingContext;
use crate::error::EngineError;

fn storage(e: impl std::fmt::Display) -> EngineError {
    EngineError::Storage(e.to_string())
}

#[derive(Clone, Debug)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn open(dir: PathBuf) -> Result<Self, EngineError> {
        fs::create_dir_all(&dir).map_err(storage)?;
        Ok(Self { dir })
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Writes through a temporary file so a crash never leaves half a session.
    pub fn save(&self, ctx: &WorkingContext) -> Result<(), EngineError> {
        let text = serde_json::to_string_pretty(ctx).map_err(storage)?;
        let tmp = self.dir.join(format!(".{}.json.tmp", ctx.id));
        fs::write(&tmp, text).map_err(storage)?;
        fs::rename(&tmp, self.path(&ctx.id)).map_err(storage)
    }

    pub fn load(&self, id: &str) -> Result<WorkingContext, EngineError> {
        let text = fs::read_to_string(self.path(id)).map_err(storage)?;
        serde_json::from_str(&text).map_err(|e| EngineError::Storage(format!("session '{id}': {e}")))
    }

    pub fn load_all(&self) -> Result<Vec<WorkingContext>, EngineError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)
            .map_err(storage)?
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let id = name.strip_suffix(".json")?;
                (!id.starts_with('.')).then(|| id.to_string())
            })
            .collect();
        ids.sort();
        ids.iter().map(|id| self.load(id)).collect()
    }
}

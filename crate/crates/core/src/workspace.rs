//! A directory holding the engine's inputs as plain files:
//!
//! ```text
//! <root>/workspace.json      loaded ontology files in order, classified flag
//! <root>/ontologies/NNNN-<name>
//! <root>/profiles/<id>.json
//! <root>/sessions/<id>.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::ontology::{ClassifyReport, LoadReport, OntologyFormat};
use crate::registry::{parse_profiles, Registered, ServiceProfile};
use crate::session::Engine;

pub const WORKSPACE_ENV: &str = "SEMCOMPOSE_WORKSPACE";
pub const DEFAULT_WORKSPACE: &str = ".semcompose";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    ontologies: Vec<String>,
    classified: bool,
}

fn storage(path: &Path, e: impl std::fmt::Display) -> EngineError {
    EngineError::Storage(format!("{}: {e}", path.display()))
}

pub fn read_file(path: &Path) -> Result<String, EngineError> {
    fs::read_to_string(path).map_err(|e| storage(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), EngineError> {
    fs::write(path, text).map_err(|e| storage(path, e))
}

pub struct Workspace {
    root: PathBuf,
    manifest: Manifest,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, EngineError> {
        let root = root.into();
        for sub in ["ontologies", "profiles", "sessions"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| storage(&dir, e))?;
        }
        let path = root.join("workspace.json");
        let manifest = if path.exists() {
            serde_json::from_str(&read_file(&path)?).map_err(|e| storage(&path, e))?
        } else {
            Manifest::default()
        };
        Ok(Self { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.root.join("sessions")
    }

    fn save_manifest(&self) -> Result<(), EngineError> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_file(&self.root.join("workspace.json"), &text)
    }

    /// An engine over the workspace contents; sessions persist to the
    /// workspace when `persist_sessions` is set.
    pub fn engine(&self, persist_sessions: bool) -> Result<Engine, EngineError> {
        let engine = if persist_sessions {
            Engine::with_store(self.sessions_dir())?
        } else {
            Engine::new()
        };
        for name in &self.manifest.ontologies {
            let doc = read_file(&self.root.join("ontologies").join(name))?;
            engine.load_ontology(&doc, None)?;
        }
        if self.manifest.classified {
            engine.classify()?;
        }
        engine.register(self.profiles()?)?;
        Ok(engine)
    }

    pub fn profiles(&self) -> Result<Vec<ServiceProfile>, EngineError> {
        let dir = self.root.join("profiles");
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| storage(&dir, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut out = Vec::new();
        for p in paths {
            let text = read_file(&p)?;
            out.extend(parse_profiles(&text).map_err(|e| storage(&p, e))?);
        }
        Ok(out)
    }

    /// Checks the document, then stores it; classification is reset.
    pub fn load_ontology(&mut self, path: &Path, format: Option<OntologyFormat>) -> Result<LoadReport, EngineError> {
        let doc = read_file(path)?;
        let engine = self.engine(false)?;
        let report = engine.load_ontology(&doc, format)?;
        let base = path.file_name().and_then(|n| n.to_str()).unwrap_or("ontology");
        let name = format!("{:04}-{base}", self.manifest.ontologies.len());
        write_file(&self.root.join("ontologies").join(&name), &doc)?;
        self.manifest.ontologies.push(name);
        self.manifest.classified = false;
        self.save_manifest()?;
        Ok(report)
    }

    pub fn classify(&mut self) -> Result<ClassifyReport, EngineError> {
        let report = self.engine(false)?.classify()?;
        self.manifest.classified = true;
        self.save_manifest()?;
        Ok(report)
    }

    /// Registers every profile in a file, or in every `.json` file of a
    /// directory, all or nothing.
    pub fn register(&mut self, path: &Path) -> Result<Vec<Registered>, EngineError> {
        let files: Vec<PathBuf> = if path.is_dir() {
            let mut v: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| storage(path, e))?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            v.sort();
            v
        } else {
            vec![path.to_path_buf()]
        };
        let mut profiles = Vec::new();
        for f in &files {
            let text = read_file(f)?;
            profiles.extend(parse_profiles(&text).map_err(|e| EngineError::Malformed(format!("{}: {e}", f.display())))?);
        }
        let engine = self.engine(false)?;
        let out = engine.register(profiles.clone())?;
        for p in profiles {
            let text = serde_json::to_string_pretty(&p).expect("profile serializes");
            write_file(&self.root.join("profiles").join(format!("{}.json", p.id)), &text)?;
        }
        Ok(out)
    }

    pub fn deregister(&mut self, id: &str) -> Result<ServiceProfile, EngineError> {
        let profile = self.engine(false)?.deregister(id)?;
        let path = self.root.join("profiles").join(format!("{id}.json"));
        fs::remove_file(&path).map_err(|e| storage(&path, e))?;
        Ok(profile)
    }
}

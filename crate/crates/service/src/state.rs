use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use gnnx_core::Session;

use crate::catalog::Catalog;
use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::jobs::Jobs;

/// Edits take the write lock, so they are serialized per session; reads
/// share the read lock and see the latest consistent version.
pub type SessionCell = Arc<RwLock<Session>>;

pub struct AppState {
    pub config: ServiceConfig,
    pub catalog: Catalog,
    pub jobs: Jobs,
    sessions: RwLock<HashMap<String, SessionCell>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            catalog: Catalog::new(config.data_dir.clone(), config.model_dir.clone()),
            jobs: Jobs::new(config.max_concurrent_jobs),
            sessions: RwLock::default(),
            config,
        })
    }

    pub fn insert_session(&self, session: Session) -> String {
        let id = session.id.clone();
        self.sessions.write().expect("session registry lock").insert(id.clone(), Arc::new(RwLock::new(session)));
        id
    }

    pub fn session(&self, id: &str) -> Result<SessionCell, ApiError> {
        self.sessions
            .read()
            .expect("session registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
    }

    pub fn remove_session(&self, id: &str) -> Result<(), ApiError> {
        self.sessions
            .write()
            .expect("session registry lock")
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
    }
}

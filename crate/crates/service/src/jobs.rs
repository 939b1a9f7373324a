//! Background jobs: a bounded pool of blocking workers with polling and
//! cooperative cancellation.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Semaphore;

use crate::error::{ApiError, ErrorBody};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Train,
    Explain,
    Tsne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Cancelled)
    }
}

/// Wire form of a job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    /// Fraction in `[0, 1]`, non-decreasing.
    pub progress: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

struct Job {
    view: Mutex<JobView>,
    cancel: AtomicBool,
}

impl Job {
    /// Moves to `next` unless the job already reached a terminal state.
    fn transition(&self, next: JobState, result: Option<Value>, error: Option<ErrorBody>) -> bool {
        let mut v = self.view.lock().expect("job lock");
        if v.state.is_terminal() || (next == JobState::Running && v.state != JobState::Queued) {
            return false;
        }
        v.state = next;
        if next == JobState::Done {
            v.progress = 1.0;
        }
        v.result = result;
        v.error = error;
        true
    }
}

/// Given to job bodies for progress reports and cancellation checks.
#[derive(Clone)]
pub struct JobHandle {
    job: Arc<Job>,
}

impl JobHandle {
    pub fn set_progress(&self, fraction: f64) {
        let mut v = self.job.view.lock().expect("job lock");
        v.progress = v.progress.max(fraction.clamp(0.0, 1.0));
    }

    pub fn is_cancelled(&self) -> bool {
        self.job.cancel.load(Ordering::Relaxed)
    }

    /// Observer for engine loops reporting `(step, total)`: records progress
    /// and returns `false` once cancellation was requested.
    pub fn observe(&self, step: usize, total: usize) -> bool {
        self.set_progress(step as f64 / total.max(1) as f64);
        !self.is_cancelled()
    }
}

pub struct Jobs {
    jobs: RwLock<HashMap<String, Arc<Job>>>,
    permits: Arc<Semaphore>,
    next_id: AtomicU64,
}

impl Jobs {
    pub fn new(max_concurrent: usize) -> Self {
        Self { jobs: RwLock::new(HashMap::new()), permits: Arc::new(Semaphore::new(max_concurrent.max(1))), next_id: AtomicU64::new(1) }
    }

    fn register(&self, kind: JobKind, state: JobState, result: Option<Value>) -> (String, Arc<Job>) {
        let id = format!("job-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let progress = if state == JobState::Done { 1.0 } else { 0.0 };
        let job = Arc::new(Job {
            view: Mutex::new(JobView { id: id.clone(), kind, state, progress, result, error: None }),
            cancel: AtomicBool::new(false),
        });
        self.jobs.write().expect("jobs lock").insert(id.clone(), Arc::clone(&job));
        (id, job)
    }

    /// Queues `work` on the blocking pool. Must be called inside a tokio
    /// runtime.
    pub fn submit<F>(&self, kind: JobKind, work: F) -> JobView
    where
        F: FnOnce(&JobHandle) -> Result<Value, ApiError> + Send + 'static,
    {
        let (id, job) = self.register(kind, JobState::Queued, None);
        let permits = Arc::clone(&self.permits);
        let handle = JobHandle { job: Arc::clone(&job) };
        tokio::spawn(async move {
            let Ok(_permit) = permits.acquire_owned().await else { return };
            if handle.is_cancelled() || !handle.job.transition(JobState::Running, None, None) {
                return;
            }
            let worker = handle.clone();
            let outcome = tokio::task::spawn_blocking(move || work(&worker))
                .await
                .unwrap_or_else(|e| Err(ApiError::internal(format!("job worker failed: {e}"))));
            match outcome {
                Ok(value) => handle.job.transition(JobState::Done, Some(value), None),
                Err(e) if e.code == "cancelled" => handle.job.transition(JobState::Cancelled, None, None),
                Err(e) => handle.job.transition(JobState::Failed, None, Some(e.body())),
            };
        });
        self.get(&id).expect("just registered")
    }

    /// Records an already-available result as a finished job.
    pub fn completed(&self, kind: JobKind, result: Value) -> JobView {
        let (id, _) = self.register(kind, JobState::Done, Some(result));
        self.get(&id).expect("just registered")
    }

    pub fn get(&self, id: &str) -> Option<JobView> {
        let jobs = self.jobs.read().expect("jobs lock");
        jobs.get(id).map(|j| j.view.lock().expect("job lock").clone())
    }

    /// Requests cancellation. A queued job is cancelled at once; a running
    /// one stops at its next progress check; a finished one is unchanged.
    pub fn cancel(&self, id: &str) -> Option<JobView> {
        let job = self.jobs.read().expect("jobs lock").get(id).cloned()?;
        job.cancel.store(true, Ordering::Relaxed);
        if job.view.lock().expect("job lock").state == JobState::Queued {
            job.transition(JobState::Cancelled, None, None);
        }
        self.get(id)
    }
}

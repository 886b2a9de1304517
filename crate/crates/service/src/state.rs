use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Mutex;

use lookalike_core::embedding::load_embeddings;
use lookalike_core::{jsonl, EmbeddingSet, Error, ProjectionHead, RankingTask, Result, WorkerRanking};

pub const DEFAULT_QUOTA: usize = 10;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub embeddings: PathBuf,
    pub normalize: bool,
    pub head: Option<PathBuf>,
    pub tasks: PathBuf,
    pub rankings: PathBuf,
    pub static_dir: Option<PathBuf>,
    /// Most tasks any single worker is ever handed.
    pub quota: usize,
}

impl ServiceConfig {
    pub fn new(embeddings: PathBuf, tasks: PathBuf, rankings: PathBuf) -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            embeddings,
            normalize: true,
            head: None,
            tasks,
            rankings,
            static_dir: None,
            quota: DEFAULT_QUOTA,
        }
    }
}

#[derive(Debug, Default)]
pub(crate) struct Dispatch {
    /// Task indices already handed to (or completed by) each worker.
    pub seen: HashMap<String, HashSet<usize>>,
    /// Times each task has been handed out, for least-assigned selection.
    pub assigned: Vec<usize>,
}

impl Dispatch {
    /// Picks the least-assigned task this worker has not seen, lowest index on ties.
    pub fn next(&mut self, worker: &str, quota: usize) -> Option<usize> {
        let seen = self.seen.entry(worker.to_string()).or_default();
        if seen.len() >= quota {
            return None;
        }
        let pick = (0..self.assigned.len())
            .filter(|i| !seen.contains(i))
            .min_by_key(|&i| (self.assigned[i], i))?;
        seen.insert(pick);
        self.assigned[pick] += 1;
        Some(pick)
    }
}

#[derive(Debug)]
pub(crate) struct Appender {
    pub file: File,
    pub path: PathBuf,
    pub submitted: HashSet<(String, String)>,
}

#[derive(Debug)]
pub enum Submit {
    Accepted(WorkerRanking),
    UnknownTask,
    Invalid(String),
    Duplicate,
}

/// Everything the handlers share. Retrieval reads only immutable fields.
#[derive(Debug)]
pub struct AppState {
    pub(crate) set: EmbeddingSet,
    pub(crate) tasks: Vec<RankingTask>,
    pub(crate) task_index: HashMap<String, usize>,
    pub(crate) quota: usize,
    pub(crate) dispatch: Mutex<Dispatch>,
    pub(crate) appender: Mutex<Appender>,
}

impl AppState {
    /// Loads embeddings, the optional head and tasks, and replays any existing
    /// rankings so earlier submissions still count as duplicates.
    pub fn load(config: &ServiceConfig) -> Result<Self> {
        let base = load_embeddings(&config.embeddings, config.normalize)?;
        let set = match &config.head {
            Some(path) => ProjectionHead::load(path)?.project(&base)?,
            None => base,
        };
        let tasks: Vec<RankingTask> = jsonl::read(&config.tasks)?;
        let previous: Vec<WorkerRanking> = if config.rankings.exists() {
            jsonl::read(&config.rankings)?
        } else {
            Vec::new()
        };
        let file = jsonl::open_append(&config.rankings)?;
        Self::from_parts(set, tasks, previous, file, config.rankings.clone(), config.quota)
    }

    pub(crate) fn from_parts(
        set: EmbeddingSet,
        tasks: Vec<RankingTask>,
        previous: Vec<WorkerRanking>,
        file: File,
        path: PathBuf,
        quota: usize,
    ) -> Result<Self> {
        let mut task_index = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            t.validate()?;
            if task_index.insert(t.task_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("task `{}` listed twice", t.task_id)));
            }
        }
        let mut dispatch = Dispatch {
            seen: HashMap::new(),
            assigned: vec![0; tasks.len()],
        };
        let mut submitted = HashSet::new();
        for r in previous {
            if let Some(&i) = task_index.get(&r.task_id) {
                dispatch.seen.entry(r.worker_id.clone()).or_default().insert(i);
                dispatch.assigned[i] += 1;
            }
            submitted.insert((r.worker_id, r.task_id));
        }
        Ok(Self {
            set,
            tasks,
            task_index,
            quota,
            dispatch: Mutex::new(dispatch),
            appender: Mutex::new(Appender {
                file,
                path,
                submitted,
            }),
        })
    }

    pub fn embeddings(&self) -> &EmbeddingSet {
        &self.set
    }

    pub fn tasks(&self) -> &[RankingTask] {
        &self.tasks
    }

    pub fn next_task(&self, worker_id: &str) -> Option<&RankingTask> {
        let mut dispatch = self.dispatch.lock().expect("dispatch lock poisoned");
        dispatch.next(worker_id, self.quota).map(|i| &self.tasks[i])
    }

    /// Validates and durably appends a ranking. The line is fsynced before
    /// this returns `Accepted`.
    pub fn submit(&self, task_id: &str, worker_id: String, order: Vec<String>) -> Result<Submit> {
        let Some(&i) = self.task_index.get(task_id) else {
            return Ok(Submit::UnknownTask);
        };
        if worker_id.trim().is_empty() {
            return Ok(Submit::Invalid("worker_id must be non-empty".into()));
        }
        if !self.tasks[i].is_permutation(&order) {
            return Ok(Submit::Invalid(format!(
                "order must be a permutation of the {} candidates of task `{task_id}`",
                self.tasks[i].candidates.len()
            )));
        }
        let record = WorkerRanking {
            worker_id,
            task_id: task_id.to_string(),
            order,
        };
        let mut app = self.appender.lock().expect("appender lock poisoned");
        let key = (record.worker_id.clone(), record.task_id.clone());
        if app.submitted.contains(&key) {
            return Ok(Submit::Duplicate);
        }
        let Appender { file, path, .. } = &mut *app;
        jsonl::append(file, path, &record)?;
        app.submitted.insert(key);
        Ok(Submit::Accepted(record))
    }
}

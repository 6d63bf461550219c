//! The service core shared by the HTTP API and the CLI. Every method is
//! blocking; the HTTP layer moves calls onto the blocking pool.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use chrono::Utc;
use pragmachat_core::dialogue::Agent;
use pragmachat_core::experiment::{ExperimentConfig, RowScores, RunRecord, Runner};
use pragmachat_core::gateway::{Backend, Embedder, ModelSpec};
use pragmachat_core::knowledge::{DocFormat, DocumentMeta, KnowledgeDocument, KnowledgeStore};
use pragmachat_core::metrics::{EvalOptions, Evaluator};
use pragmachat_core::speechact::Classifier;
use uuid::Uuid;

use crate::config::AppConfig;
use crate::error::ServiceError;
use crate::jobs::{analyze_fixture, run_artifacts, Artifacts, ExperimentJob, JobSpec, JobStatus};
use crate::persist::{append_json_line, read_json_lines, write_atomic};
use crate::session::{ChatReply, ExchangeMeta, Session, SessionEvent, SessionView};

type Shared<T> = Arc<Mutex<T>>;

pub struct App {
    config: AppConfig,
    backend: Arc<dyn Backend>,
    classifier: Arc<dyn Classifier>,
    embedder: Arc<dyn Embedder>,
    store: KnowledgeStore,
    eval: EvalOptions,
    sessions: Mutex<HashMap<String, Shared<Session>>>,
    evaluators: Mutex<HashMap<String, Arc<Evaluator>>>,
    jobs: Mutex<HashMap<String, ExperimentJob>>,
    queue: Mutex<Option<mpsc::Sender<String>>>,
    /// Held while an experiment executes; one at a time.
    running: Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl App {
    /// Builds backend, classifier and embedder from the config.
    pub fn open(config: AppConfig) -> Result<Arc<App>, ServiceError> {
        let backend = config.build_backend();
        let classifier = config.build_classifier();
        Self::with_parts(config, backend, classifier)
    }

    pub fn with_parts(
        config: AppConfig,
        backend: Arc<dyn Backend>,
        classifier: Arc<dyn Classifier>,
    ) -> Result<Arc<App>, ServiceError> {
        let eval = config
            .eval_options()
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let embedder = config.build_embedder(backend.clone());
        let store = KnowledgeStore::open(&config.data_dir)?;
        let app = App {
            backend,
            classifier,
            embedder,
            store,
            eval,
            sessions: Mutex::new(HashMap::new()),
            evaluators: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
            queue: Mutex::new(None),
            running: Mutex::new(()),
            config,
        };
        fs::create_dir_all(app.sessions_dir())?;
        fs::create_dir_all(app.experiments_dir())?;
        app.load_sessions()?;
        app.load_jobs()?;
        Ok(Arc::new(app))
    }

    pub fn config(&self) -> &AppConfig {
        &self.config
    }

    pub fn store(&self) -> &KnowledgeStore {
        &self.store
    }

    fn sessions_dir(&self) -> PathBuf {
        self.config.data_dir.join("sessions")
    }

    fn experiments_dir(&self) -> PathBuf {
        self.config.data_dir.join("experiments")
    }

    fn job_dir(&self, id: &str) -> PathBuf {
        self.experiments_dir().join(id)
    }

    fn load_sessions(&self) -> Result<(), ServiceError> {
        let mut sessions = lock(&self.sessions);
        for entry in fs::read_dir(self.sessions_dir())? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let session = Session::replay(read_json_lines(&path)?).map_err(|e| {
                    ServiceError::Internal(format!("{}: {e}", path.display()))
                })?;
                sessions.insert(session.id.clone(), Arc::new(Mutex::new(session)));
            }
        }
        Ok(())
    }

    /// Jobs interrupted mid-run are marked failed; pending ones wait for
    /// the worker.
    fn load_jobs(&self) -> Result<(), ServiceError> {
        let mut jobs = lock(&self.jobs);
        for entry in fs::read_dir(self.experiments_dir())? {
            let path = entry?.path().join("job.json");
            if !path.exists() {
                continue;
            }
            let mut job: ExperimentJob = serde_json::from_slice(&fs::read(&path)?)?;
            if job.status == JobStatus::Running {
                job.advance(JobStatus::Failed);
                job.error = Some("interrupted by restart".into());
                write_atomic(&path, &serde_json::to_vec_pretty(&job)?)?;
            }
            jobs.insert(job.id.clone(), job);
        }
        Ok(())
    }

    // --- models and documents ---

    pub fn list_models(&self) -> Result<Vec<ModelSpec>, ServiceError> {
        Ok(self.backend.list_models()?)
    }

    pub fn ingest(
        &self,
        bytes: &[u8],
        format: DocFormat,
        title: &str,
    ) -> Result<KnowledgeDocument, ServiceError> {
        if title.trim().is_empty() {
            return Err(ServiceError::BadRequest("title must not be empty".into()));
        }
        Ok(self.store.ingest(bytes, format, title)?)
    }

    pub fn ingest_path(&self, path: &Path, title: Option<&str>) -> Result<KnowledgeDocument, ServiceError> {
        let format = DocFormat::from_path(path)?;
        let bytes = fs::read(path)
            .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.ingest(&bytes, format, title.unwrap_or(&stem))
    }

    pub fn list_documents(&self) -> Vec<DocumentMeta> {
        self.store.list_documents()
    }

    // --- sessions ---

    /// `doc` may be a document id or its exact title.
    pub fn create_session(
        &self,
        model: &str,
        doc: &str,
        include_illocutionary_force: bool,
    ) -> Result<SessionView, ServiceError> {
        if model.trim().is_empty() {
            return Err(ServiceError::BadRequest("model must not be empty".into()));
        }
        let doc = self.store.resolve(doc)?;
        let models = self.backend.list_models()?;
        if !models.iter().any(|m| m.name == model) {
            return Err(ServiceError::BadRequest(format!("unknown model: {model}")));
        }
        let id = Uuid::new_v4().to_string();
        let created = SessionEvent::Created {
            id: id.clone(),
            doc_id: doc.id.clone(),
            model: ModelSpec::named(model),
            include_illocutionary_force,
            created_at: Utc::now(),
        };
        append_json_line(&self.sessions_dir().join(format!("{id}.jsonl")), &created)?;
        let session = Session::replay(vec![created]).map_err(ServiceError::Internal)?;
        let view = session.view();
        lock(&self.sessions).insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    fn session(&self, id: &str) -> Result<Shared<Session>, ServiceError> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session: {id}")))
    }

    pub fn get_session(&self, id: &str) -> Result<SessionView, ServiceError> {
        let handle = self.session(id)?;
        let view = lock(&handle).view();
        Ok(view)
    }

    pub fn list_sessions(&self) -> Vec<SessionView> {
        let handles: Vec<_> = lock(&self.sessions).values().cloned().collect();
        let mut views: Vec<SessionView> = handles.iter().map(|s| lock(s).view()).collect();
        views.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.id.cmp(&b.id)));
        views
    }

    fn evaluator(&self, doc: &KnowledgeDocument) -> Result<Arc<Evaluator>, String> {
        if let Some(e) = lock(&self.evaluators).get(&doc.id) {
            return Ok(e.clone());
        }
        let e = Arc::new(Evaluator::new(doc, self.eval.clone()).map_err(|e| e.to_string())?);
        lock(&self.evaluators).insert(doc.id.clone(), e.clone());
        Ok(e)
    }

    /// One exchange followed by scoring. Calls on the same session are
    /// serialized by the session lock. `include` falls back to the
    /// session's toggle.
    pub fn chat(
        &self,
        session_id: &str,
        message: &str,
        include: Option<bool>,
    ) -> Result<ChatReply, ServiceError> {
        if message.trim().is_empty() {
            return Err(ServiceError::EmptyMessage);
        }
        let handle = self.session(session_id)?;
        let mut session = lock(&handle);
        let include = include.unwrap_or(session.include_illocutionary_force);
        let doc = self.store.get_document(&session.conversation.doc_id)?;

        let agent = Agent::new(self.backend.as_ref(), self.classifier.as_ref())
            .with_knowledge_budget(self.config.knowledge_budget);
        let mut conversation = session.conversation.clone();
        let exchange = agent.respond(
            &mut conversation,
            &doc,
            message,
            include,
            &self.config.params,
        )?;

        let scored = self
            .evaluator(&doc)
            .and_then(|ev| {
                ev.evaluate(&exchange.result, message, self.embedder.as_ref())
                    .map_err(|e| e.to_string())
            });
        let (metrics, metrics_error) = match scored {
            Ok(m) => (Some(m), None),
            Err(e) => {
                log::warn!("session {session_id}: scoring failed: {e}");
                (None, Some(e))
            }
        };
        let meta = ExchangeMeta {
            include_illocutionary_force: include,
            metrics,
            metrics_error: metrics_error.clone(),
        };
        append_json_line(
            &self.sessions_dir().join(format!("{session_id}.jsonl")),
            &SessionEvent::Exchange {
                user: exchange.user.clone(),
                assistant: exchange.assistant.clone(),
                meta: meta.clone(),
            },
        )?;
        session.conversation = conversation;
        session.include_illocutionary_force = include;
        session.exchanges.push(meta);

        Ok(ChatReply {
            session_id: session_id.to_string(),
            assistant_text: exchange.assistant.text.clone(),
            speech_act: exchange
                .speech_act()
                .filter(|_| include)
                .map(|l| l.category),
            include_illocutionary_force: include,
            response_time_s: exchange.result.response_time_s,
            metrics: metrics.as_ref().map(RowScores::from),
            metrics_detail: metrics,
            metrics_error,
        })
    }

    // --- experiments ---

    fn save_job(&self, job: &ExperimentJob) -> Result<(), ServiceError> {
        let dir = self.job_dir(&job.id);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("job.json"), &serde_json::to_vec_pretty(job)?)?;
        Ok(())
    }

    fn update_job(&self, job: ExperimentJob) -> Result<(), ServiceError> {
        self.save_job(&job)?;
        lock(&self.jobs).insert(job.id.clone(), job);
        Ok(())
    }

    /// Records a pending job and hands it to the worker, if one is running.
    pub fn submit(&self, spec: JobSpec) -> Result<ExperimentJob, ServiceError> {
        if let JobSpec::Config(config) = &spec {
            config.validate()?;
        }
        let job = ExperimentJob::new(Uuid::new_v4().to_string(), spec);
        self.update_job(job.clone())?;
        if let Some(tx) = lock(&self.queue).as_ref() {
            let _ = tx.send(job.id.clone());
        }
        Ok(job)
    }

    /// Starts the background thread that executes submitted jobs one by one,
    /// beginning with any left pending from a previous process.
    pub fn start_worker(self: &Arc<Self>) {
        let (tx, rx) = mpsc::channel::<String>();
        let mut pending: Vec<ExperimentJob> = lock(&self.jobs)
            .values()
            .filter(|j| j.status == JobStatus::Pending)
            .cloned()
            .collect();
        pending.sort_by_key(|j| j.created_at);
        for job in pending {
            let _ = tx.send(job.id);
        }
        *lock(&self.queue) = Some(tx);
        let app = Arc::downgrade(self);
        std::thread::Builder::new()
            .name("experiment-worker".into())
            .spawn(move || {
                while let Ok(id) = rx.recv() {
                    let Some(app) = app.upgrade() else { break };
                    if let Err(e) = app.execute(&id) {
                        log::error!("experiment {id}: {e}");
                    }
                }
            })
            .expect("spawning the experiment worker");
    }

    /// Runs a pending job to completion on the calling thread.
    pub fn execute(&self, id: &str) -> Result<ExperimentJob, ServiceError> {
        let _running = lock(&self.running);
        let mut job = self.get_job(id)?;
        if !job.advance(JobStatus::Running) {
            return Err(ServiceError::Conflict(format!("job {id} is not pending")));
        }
        self.update_job(job.clone())?;
        let outcome = self.produce(&job.spec).and_then(|artifacts| {
            let dir = self.job_dir(id);
            write_atomic(&dir.join("records.json"), &serde_json::to_vec(&artifacts.records)?)?;
            for (name, bytes) in artifacts.files() {
                write_atomic(&dir.join(name), &bytes)?;
            }
            Ok(())
        });
        match outcome {
            Ok(()) => {
                job.advance(JobStatus::Done);
            }
            Err(e) => {
                job.advance(JobStatus::Failed);
                job.error = Some(e.to_string());
            }
        }
        self.update_job(job.clone())?;
        Ok(job)
    }

    fn produce(&self, spec: &JobSpec) -> Result<Artifacts, ServiceError> {
        match spec {
            JobSpec::Fixture(f) => Ok(analyze_fixture(f)?),
            JobSpec::Config(config) => {
                let records = self.run_experiment(config)?;
                Ok(run_artifacts(config, records)?)
            }
        }
    }

    /// Runs a config directly, without recording a job.
    pub fn run_experiment(&self, config: &ExperimentConfig) -> Result<Vec<RunRecord>, ServiceError> {
        let embedder = match &config.embedding_model {
            Some(model) => self.config.build_embedder_for(self.backend.clone(), model),
            None => self.embedder.clone(),
        };
        let runner = Runner::new(
            self.backend.as_ref(),
            self.classifier.as_ref(),
            embedder.as_ref(),
            &self.store,
        )
        .with_eval_options(self.eval.clone())
        .with_knowledge_budget(self.config.knowledge_budget);
        Ok(runner.run(config)?)
    }

    pub fn get_job(&self, id: &str) -> Result<ExperimentJob, ServiceError> {
        lock(&self.jobs)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown experiment: {id}")))
    }

    pub fn list_jobs(&self) -> Vec<ExperimentJob> {
        let mut jobs: Vec<_> = lock(&self.jobs).values().cloned().collect();
        jobs.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.id.cmp(&b.id)));
        jobs
    }

    pub fn job_records(&self, id: &str) -> Result<Option<Vec<RunRecord>>, ServiceError> {
        if self.get_job(id)?.status != JobStatus::Done {
            return Ok(None);
        }
        let bytes = fs::read(self.job_dir(id).join("records.json"))?;
        Ok(Some(serde_json::from_slice(&bytes)?))
    }

    /// Bytes of a finished job's artifact, e.g. `results.csv`.
    pub fn artifact(&self, id: &str, name: &str) -> Result<Vec<u8>, ServiceError> {
        const NAMES: [&str; 4] = ["results.csv", "results.md", "comparison.md", "comparison.csv"];
        if !NAMES.contains(&name) {
            return Err(ServiceError::NotFound(format!("unknown artifact: {name}")));
        }
        let job = self.get_job(id)?;
        if job.status != JobStatus::Done {
            return Err(ServiceError::Conflict(format!(
                "experiment {id} is {:?}",
                job.status
            )));
        }
        fs::read(self.job_dir(id).join(name))
            .map_err(|_| ServiceError::NotFound(format!("experiment {id} has no {name}")))
    }
}

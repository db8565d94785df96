//! Stage runner, manifest and quarantine.

use serde::Serialize;
use serde_json::{json, Map, Value};
use std::io;
use std::path::PathBuf;
use std::time::Instant;

use xplab_core::device::protocol::{DECOUPLING_LIMIT, LEAKAGE_LIMIT};
use xplab_core::pme::LINEARITY_R2;
use xplab_core::topo::chern::RESOLUTION_DRIFT;
use xplab_core::topo::lattice::LINK_SIGMA_MIN;
use xplab_core::topo::winding::INTEGER_TOL;
use xplab_core::topo::DEFAULT_GAP_TOL;
use xplab_core::Exec;

use crate::config::{ConfigErrors, Loaded, RunConfig};
use crate::output::{FileEntry, RunDir, Table, SCHEMA_VERSION};
use crate::plot::Figure;

/// What a stage hands back for writing.
#[derive(Debug, Default)]
pub struct Products {
    pub tables: Vec<Table>,
    pub figures: Vec<Figure>,
    pub results: Map<String, Value>,
}

impl Products {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }

    pub fn figure(mut self, f: Figure) -> Self {
        self.figures.push(f);
        self
    }

    pub fn result(mut self, key: &str, v: impl Serialize) -> Self {
        self.results.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{0}")]
    Config(ConfigErrors),
    #[error("stage `{stage}`: {source}")]
    Numerical {
        stage: String,
        #[source]
        source: xplab_core::Error,
    },
    #[error("stage `{stage}`: {source}")]
    Io {
        stage: String,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    /// 2 for configuration and file-system problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 2,
            RunError::Numerical { .. } => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "configuration",
            RunError::Numerical { .. } => "numerical",
            RunError::Io { .. } => "io",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub error: RunError,
    /// Where partial outputs went.
    pub quarantine: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct StageRecord {
    name: String,
    seconds: f64,
    files: Vec<String>,
}

pub struct Runner<'a> {
    pub cfg: &'a RunConfig,
    pub exec: Exec,
    dir: RunDir,
    plots: bool,
    files: Vec<FileEntry>,
    stages: Vec<StageRecord>,
    results: Map<String, Value>,
}

impl Runner<'_> {
    /// Run one stage and write what it produced.
    pub fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&RunConfig, Exec) -> xplab_core::Result<(T, Products)>,
    ) -> Result<T, RunError> {
        let t0 = Instant::now();
        let (value, products) = f(self.cfg, self.exec).map_err(|source| RunError::Numerical { stage: name.into(), source })?;
        let io_err = |source| RunError::Io { stage: name.into(), source };
        let mut written = Vec::new();
        for t in &products.tables {
            let e = self.dir.write_table(t).map_err(io_err)?;
            written.push(e.path.clone());
            self.files.push(e);
        }
        if self.plots {
            std::fs::create_dir_all(self.dir.plots()).map_err(io_err)?;
            for fig in &products.figures {
                let rel = format!("plots/{}.svg", fig.name());
                fig.render(&self.dir.root.join(&rel)).map_err(io_err)?;
                written.push(rel.clone());
                self.files.push(FileEntry { path: rel, kind: "svg", schema: None, rows: None });
            }
        }
        if !products.results.is_empty() {
            self.results.insert(name.to_string(), Value::Object(products.results));
        }
        self.stages.push(StageRecord { name: name.into(), seconds: t0.elapsed().as_secs_f64(), files: written });
        Ok(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub plots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { plots: true }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub manifest: Value,
}

pub fn exec_for(cfg: &RunConfig) -> Exec {
    if cfg.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

/// Run `f` on a pool of `threads` workers (0: one per core).
#[cfg(feature = "parallel")]
pub fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_pool<R: Send>(_threads: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

fn tolerances(cfg: &RunConfig) -> Value {
    json!({
        "gap": DEFAULT_GAP_TOL,
        "link_sigma_min": LINK_SIGMA_MIN,
        "resolution_drift": RESOLUTION_DRIFT,
        "winding_integer": INTEGER_TOL,
        "gauge_linearity_r2": LINEARITY_R2,
        "ramp_leakage": LEAKAGE_LIMIT,
        "sector_decoupling": DECOUPLING_LIMIT,
        "integrator": cfg.protocol.tol,
    })
}

pub fn run_pipeline(loaded: &Loaded, opts: RunOptions) -> Result<Outcome, Failure> {
    let cfg = &loaded.config;
    with_pool(cfg.threads, || run_inner(loaded, opts))
}

fn run_inner(loaded: &Loaded, opts: RunOptions) -> Result<Outcome, Failure> {
    let cfg = &loaded.config;
    let t0 = Instant::now();
    let dir = RunDir::prepare(&cfg.output).map_err(|source| Failure {
        error: RunError::Io { stage: "prepare".into(), source },
        quarantine: None,
    })?;
    let mut r = Runner {
        cfg,
        exec: exec_for(cfg),
        dir: dir.clone(),
        plots: opts.plots,
        files: Vec::new(),
        stages: Vec::new(),
        results: Map::new(),
    };
    let status = crate::pipelines::run(&mut r);

    let exec = match r.exec {
        Exec::Sequential => "sequential",
        #[cfg(feature = "parallel")]
        Exec::Parallel => "parallel",
    };
    let mut manifest = json!({
        "tool": "xplab",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": xplab_core::VERSION,
        "schema_version": SCHEMA_VERSION,
        "pipeline": cfg.pipeline.name(),
        "status": if status.is_ok() { "ok" } else { "failed" },
        "seed": cfg.seed,
        "exec": { "strategy": exec, "threads": cfg.threads },
        "config": cfg,
        "defaults_applied": loaded.defaults_applied,
        "tolerances": tolerances(cfg),
        "stages": r.stages,
        "files": r.files,
        "results": r.results,
        "wall_time_seconds": t0.elapsed().as_secs_f64(),
    });
    match status {
        Ok(()) => {
            dir.write_json("manifest.json", &manifest).map_err(|source| Failure {
                error: RunError::Io { stage: "manifest".into(), source },
                quarantine: None,
            })?;
            Ok(Outcome { dir: dir.root, manifest })
        }
        Err(error) => {
            manifest["error"] = json!({ "kind": error.kind(), "message": error.to_string() });
            let quarantine = dir.quarantine().ok();
            if quarantine.is_some() {
                let _ = dir.write_json("quarantine/manifest.json", &manifest);
            }
            Err(Failure { error, quarantine })
        }
    }
}

//! Command-line surface.

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;
use toml::{Table, Value};

use xplab_core::acceptance::{acceptance_suite, Level};
use xplab_core::Exec;

use crate::config::{self, load, set_path, ConfigErrors, Pipeline};
use crate::output::RunDir;
use crate::run::{run_pipeline, with_pool, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CRITERION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "xplab", version, about = "Tensor-monopole laboratory: figure pipelines and acceptance suite")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band spectra over (k_w, k_x) and along k_w.
    #[command(visible_alias = "spectrum")]
    Fig2(RunArgs),
    /// Monopole shift against gauge potential, fitted field B^z.
    #[command(name = "fig3-gauge")]
    Fig3Gauge(RunArgs),
    /// Separation schedules b_w(τ) and the pseudo-electric field.
    #[command(name = "fig3-efield")]
    Fig3Efield(RunArgs),
    /// Chern-form field on the (q, θ) grid.
    #[command(name = "fig4-chernform", visible_alias = "chern-form")]
    Fig4Chernform(RunArgs),
    /// Second Chern number against mass.
    #[command(name = "fig4-c2sweep", visible_alias = "c2-sweep")]
    Fig4C2Sweep(RunArgs),
    /// Topological current against B^z and the Yang charge.
    #[command(name = "fig4-current", visible_alias = "pme")]
    Fig4Current(RunArgs),
    /// Symmetries, monopoles, winding and Chern numbers.
    #[command(visible_alias = "winding")]
    Invariants(RunArgs),
    /// Device calibration: couplers, Floquet extraction, Autler-Townes, protocol.
    Device(RunArgs),
    /// Run the pipeline named in the configuration file.
    Run(RunArgs),
    /// Check a configuration file and print it normalized.
    Validate(ValidateArgs),
    /// Run the acceptance criteria.
    Accept(AcceptArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Run directory.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Map grids sequentially.
    #[arg(long)]
    pub sequential: bool,
    /// Skip SVG rendering.
    #[arg(long)]
    pub no_plots: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Mass, MHz.
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Velocities vx,vy,vz,vw.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v: Option<Vec<f64>>,
    /// Radial cutoff, MHz.
    #[arg(long)]
    pub q_cut: Option<f64>,
    #[arg(long)]
    pub n_q: Option<usize>,
    #[arg(long)]
    pub n_theta: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub masses: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a_x: Option<Vec<f64>>,
    #[arg(long)]
    pub n_k: Option<usize>,
    /// effective or device.
    #[arg(long)]
    pub source: Option<String>,
    /// ideal, closed or open.
    #[arg(long)]
    pub mode: Option<String>,
    /// Protocol overlay subsample per axis.
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Any field as a dotted key, e.g. `--set device.decoherence.t2=[3,3,3,3]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl RunArgs {
    /// Flag overrides as a TOML table.
    pub fn overrides(&self) -> Result<Table, String> {
        let mut t = Table::new();
        let floats = |xs: &[f64]| Value::Array(xs.iter().map(|&x| Value::Float(x)).collect());
        let mut put = |k: &str, v: Value| set_path(&mut t, k, v);
        if let Some(x) = &self.out {
            put("output", Value::String(x.to_string_lossy().into_owned()))?;
        }
        if let Some(x) = self.seed {
            put("seed", Value::Integer(x as i64))?;
        }
        if let Some(x) = self.threads {
            put("threads", Value::Integer(x as i64))?;
        }
        if self.sequential {
            put("sequential", Value::Boolean(true))?;
        }
        for (k, x) in [("model.a", self.a), ("model.lambda", self.lambda), ("model.m", self.m), ("grid.q_cut", self.q_cut)] {
            if let Some(x) = x {
                put(k, Value::Float(x))?;
            }
        }
        for (k, x) in [("grid.n_q", self.n_q), ("grid.n_theta", self.n_theta), ("sweep.n_k", self.n_k), ("sweep.subsample", self.subsample)] {
            if let Some(x) = x {
                put(k, Value::Integer(x as i64))?;
            }
        }
        for (k, x) in [
            ("model.v", &self.v),
            ("sweep.masses", &self.masses),
            ("sweep.alphas", &self.alphas),
            ("sweep.a_values", &self.a_values),
            ("sweep.a_x", &self.a_x),
        ] {
            if let Some(x) = x {
                put(k, floats(x))?;
            }
        }
        for (k, x) in [("sweep.source", &self.source), ("sweep.mode", &self.mode)] {
            if let Some(x) = x {
                put(k, Value::String(x.clone()))?;
            }
        }
        for s in &self.set {
            let (k, v) = config::parse_assignment(s)?;
            put(&k, v)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    pub path: PathBuf,
    /// Pipeline to validate against when the file does not name one.
    #[arg(long)]
    pub pipeline: Option<Pipeline>,
}

#[derive(Debug, Clone, Args)]
pub struct AcceptArgs {
    #[arg(long, default_value = "quick")]
    pub level: Level,
    /// Directory for `acceptance.json`.
    #[arg(short, long, default_value = "runs/accept")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub sequential: bool,
}

fn report_config_errors(e: &ConfigErrors) -> i32 {
    eprintln!("invalid configuration:");
    for v in &e.0 {
        eprintln!("  {v}");
    }
    EXIT_CONFIG
}

fn run_command(pipeline: Option<Pipeline>, args: &RunArgs) -> i32 {
    let overrides = match args.overrides() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("invalid override: {e}");
            return EXIT_CONFIG;
        }
    };
    let loaded = match load(args.config.as_deref(), pipeline, &overrides) {
        Ok(l) => l,
        Err(e) => return report_config_errors(&e),
    };
    let name = loaded.config.pipeline;
    eprintln!("xplab {name}: writing to {}", loaded.config.output.display());
    match run_pipeline(&loaded, RunOptions { plots: !args.no_plots }) {
        Ok(out) => {
            if let Some(stages) = out.manifest["stages"].as_array() {
                for s in stages {
                    eprintln!("  {} ({:.2} s)", s["name"].as_str().unwrap_or("?"), s["seconds"].as_f64().unwrap_or(0.0));
                }
            }
            println!("{}", out.dir.join("manifest.json").display());
            EXIT_OK
        }
        Err(f) => {
            eprintln!("xplab {name} failed: {}", f.error);
            if let Some(q) = f.quarantine {
                eprintln!("partial outputs in {}", q.display());
            }
            f.error.exit_code()
        }
    }
}

fn validate_command(args: &ValidateArgs) -> i32 {
    match load(Some(&args.path), args.pipeline, &Table::new()) {
        Ok(l) => {
            match toml::to_string(&l.config) {
                Ok(text) => {
                    for k in &l.defaults_applied {
                        println!("# default: {k}");
                    }
                    print!("{text}");
                }
                Err(e) => {
                    eprintln!("cannot render configuration: {e}");
                    return EXIT_CONFIG;
                }
            }
            EXIT_OK
        }
        Err(e) => report_config_errors(&e),
    }
}

fn accept_command(args: &AcceptArgs) -> i32 {
    let exec = if args.sequential { Exec::Sequential } else { Exec::default() };
    let report = with_pool(args.threads, || acceptance_suite(args.level, exec));
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let n = report.criteria.iter().filter(|c| c.passed).count();
    println!("acceptance ({:?}): {n}/{} criteria passed", args.level, report.criteria.len());
    let dir = RunDir { root: args.out.clone() };
    if let Err(e) = std::fs::create_dir_all(&args.out).and_then(|_| dir.write_json("acceptance.json", &report)) {
        eprintln!("cannot write report: {e}");
        return EXIT_CONFIG;
    }
    println!("{}", args.out.join("acceptance.json").display());
    if report.passed {
        EXIT_OK
    } else {
        EXIT_CRITERION
    }
}

pub fn execute(cli: Cli) -> i32 {
    match &cli.command {
        Command::Fig2(a) => run_command(Some(Pipeline::Fig2), a),
        Command::Fig3Gauge(a) => run_command(Some(Pipeline::Fig3Gauge), a),
        Command::Fig3Efield(a) => run_command(Some(Pipeline::Fig3Efield), a),
        Command::Fig4Chernform(a) => run_command(Some(Pipeline::Fig4Chernform), a),
        Command::Fig4C2Sweep(a) => run_command(Some(Pipeline::Fig4C2Sweep), a),
        Command::Fig4Current(a) => run_command(Some(Pipeline::Fig4Current), a),
        Command::Invariants(a) => run_command(Some(Pipeline::Invariants), a),
        Command::Device(a) => run_command(Some(Pipeline::Device), a),
        Command::Run(a) => run_command(None, a),
        Command::Validate(a) => validate_command(a),
        Command::Accept(a) => accept_command(a),
    }
}

/// Parse and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}

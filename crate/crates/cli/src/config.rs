//! Run configuration.
//!
//! A run is one TOML document. Values are layered: pipeline defaults, then
//! the file, then command-line overrides. Numbers are MHz, µs and radians;
//! strings with a unit suffix (`"2.5 GHz"`, `"4000 ns"`, `"0.4 pi"`) are
//! converted on load.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use toml::{Table, Value};

use xplab_core::device::{DeviceConfig, ProbeSettings, ProtocolOptions};
use xplab_core::model::{monopole_positions, ModelParams};
use xplab_core::pme::GaugeProfile;
use xplab_core::topo::{HopfGrid, WindingGrid};
use xplab_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Fig2,
    Fig3Gauge,
    Fig3Efield,
    Fig4Chernform,
    #[serde(rename = "fig4-c2sweep")]
    Fig4C2Sweep,
    Fig4Current,
    Invariants,
    Device,
}

impl Pipeline {
    pub const ALL: [Pipeline; 8] = [
        Pipeline::Fig2,
        Pipeline::Fig3Gauge,
        Pipeline::Fig3Efield,
        Pipeline::Fig4Chernform,
        Pipeline::Fig4C2Sweep,
        Pipeline::Fig4Current,
        Pipeline::Invariants,
        Pipeline::Device,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Fig2 => "fig2",
            Pipeline::Fig3Gauge => "fig3-gauge",
            Pipeline::Fig3Efield => "fig3-efield",
            Pipeline::Fig4Chernform => "fig4-chernform",
            Pipeline::Fig4C2Sweep => "fig4-c2sweep",
            Pipeline::Fig4Current => "fig4-current",
            Pipeline::Invariants => "invariants",
            Pipeline::Device => "device",
        }
    }

    /// Pipelines that place the monopole pair and so need `|Λ| < 1`.
    fn needs_monopoles(self) -> bool {
        matches!(self, Pipeline::Fig3Gauge | Pipeline::Fig4Current | Pipeline::Invariants)
    }

    fn needs_mass(self) -> bool {
        matches!(
            self,
            Pipeline::Fig4Chernform | Pipeline::Fig4C2Sweep | Pipeline::Fig4Current | Pipeline::Invariants | Pipeline::Device
        )
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Pipeline::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Pipeline::ALL.iter().map(|p| p.name()).collect();
            format!("unknown pipeline `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Effective,
    Device,
}

/// How second Chern numbers are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Lattice curvature of the model.
    Ideal,
    /// Slow-ramp protocol on the closed device.
    Closed,
    /// Slow-ramp protocol with qubit decoherence.
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Radial cutoff, MHz.
    pub q_cut: f64,
    pub n_q: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_varphi: usize,
    /// Also report the cutoff-extrapolated value.
    pub extrapolate: bool,
    /// Grid of the full four-dimensional integration.
    pub full4d: HopfGrid,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = HopfGrid::default();
        Self {
            q_cut: 200.0,
            n_q: g.n_q,
            n_theta: g.n_theta,
            n_phi: g.n_phi,
            n_varphi: g.n_varphi,
            extrapolate: true,
            full4d: HopfGrid::full4d_default(),
        }
    }
}

impl GridSection {
    pub fn hopf(&self) -> HopfGrid {
        HopfGrid { n_q: self.n_q, n_theta: self.n_theta, n_phi: self.n_phi, n_varphi: self.n_varphi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindingSection {
    /// Sphere radius around the node, radians.
    pub radius: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_varphi: usize,
}

impl Default for WindingSection {
    fn default() -> Self {
        let g = WindingGrid::default();
        Self { radius: 0.5, n_theta: g.n_theta, n_phi: g.n_phi, n_varphi: g.n_varphi }
    }
}

impl WindingSection {
    pub fn grid(&self) -> WindingGrid {
        WindingGrid { n_theta: self.n_theta, n_phi: self.n_phi, n_varphi: self.n_varphi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Deformations scanned by `fig2`.
    pub a_values: Vec<f64>,
    /// Masses scanned by `fig4-c2sweep`, MHz.
    pub masses: Vec<f64>,
    /// Gauge-field strengths.
    pub alphas: Vec<f64>,
    /// Gauge potentials; empty selects the built-in sweep.
    pub a_x: Vec<f64>,
    /// Points per momentum axis of spectrum grids.
    pub n_k: usize,
    /// Points along spectroscopy paths.
    pub n_path: usize,
    /// Points along the Floquet calibration path of `device`.
    pub n_floquet: usize,
    pub source: Source,
    pub mode: Mode,
    /// (n_q, n_theta) of protocol-measured Chern numbers.
    pub protocol_grid: [usize; 2],
    /// Protocol overlay on the Chern-form field: an s×s subsample, 0 disables.
    pub subsample: usize,
    /// Pump strengths in the Autler–Townes table.
    pub rabi_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            a_values: vec![0.0, 0.5, 1.0],
            masses: vec![-20.0, -12.0, -8.0, -4.0, 4.0, 8.0, 12.0, 20.0],
            alphas: vec![1.0, 0.75, 0.5, 0.25],
            a_x: Vec::new(),
            n_k: 65,
            n_path: 101,
            n_floquet: 9,
            source: Source::Effective,
            mode: Mode::Ideal,
            protocol_grid: [8, 8],
            subsample: 0,
            rabi_points: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    /// Run directory.
    pub output: PathBuf,
    /// Recorded in the manifest; every pipeline is deterministic.
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
    pub sequential: bool,
    pub model: ModelParams,
    pub grid: GridSection,
    pub winding: WindingSection,
    pub sweep: SweepSection,
    pub protocol: ProtocolOptions,
    pub probe: ProbeSettings,
    pub device: DeviceConfig,
}

impl RunConfig {
    pub fn defaults(pipeline: Pipeline) -> Self {
        let m = if pipeline.needs_mass() { 8.0 } else { 0.0 };
        Self {
            pipeline,
            output: PathBuf::from("runs").join(pipeline.name()),
            seed: 0,
            threads: 0,
            sequential: false,
            model: ModelParams { m, ..ModelParams::default() },
            grid: GridSection::default(),
            winding: WindingSection::default(),
            sweep: SweepSection::default(),
            protocol: ProtocolOptions::default(),
            probe: ProbeSettings::default(),
            device: DeviceConfig::default(),
        }
    }
}

/// One violated precondition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub module: &'static str,
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(module: &'static str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { module, field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.module, self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<Violation>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub config: RunConfig,
    /// Dotted keys that came from the defaults.
    pub defaults_applied: Vec<String>,
}

/// Read, layer, convert and validate. `pipeline` comes from the subcommand;
/// the file may name it too, and the two must agree.
pub fn load(file: Option<&Path>, pipeline: Option<Pipeline>, overrides: &Table) -> Result<Loaded, ConfigErrors> {
    let doc = match file {
        Some(path) => read_table(path)?,
        None => Table::new(),
    };
    resolve(doc, pipeline, overrides)
}

pub fn read_table(path: &Path) -> Result<Table, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![Violation::new("xplab-cli", "config", format!("{}: {e}", path.display()))]))?;
    text.parse::<Table>()
        .map_err(|e| ConfigErrors(vec![Violation::new("xplab-cli", "config", format!("{}: {e}", path.display()))]))
}

pub fn resolve(mut doc: Table, pipeline: Option<Pipeline>, overrides: &Table) -> Result<Loaded, ConfigErrors> {
    let mut errs = Vec::new();
    let named = match doc.remove("pipeline") {
        Some(Value::String(s)) => match s.parse::<Pipeline>() {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(Violation::new("xplab-cli", "pipeline", e));
                None
            }
        },
        Some(other) => {
            errs.push(Violation::new("xplab-cli", "pipeline", format!("expected a string, got {other}")));
            None
        }
        None => None,
    };
    let pipeline = match (pipeline, named) {
        (Some(a), Some(b)) if a != b => {
            errs.push(Violation::new("xplab-cli", "pipeline", format!("file names `{b}` but the command runs `{a}`")));
            a
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => {
            if errs.is_empty() {
                errs.push(Violation::new("xplab-cli", "pipeline", "no pipeline given in the file or on the command line"));
            }
            return Err(ConfigErrors(errs));
        }
    };

    let mut overrides = overrides.clone();
    overrides.remove("pipeline");
    convert_units(&mut doc, "", &mut errs);
    convert_units(&mut overrides, "", &mut errs);

    let defaults = match Value::try_from(RunConfig::defaults(pipeline)) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("defaults serialize to a table"),
    };
    let mut given = Vec::new();
    leaf_paths(&doc, "", &mut given);
    leaf_paths(&overrides, "", &mut given);
    let mut defaults_applied = Vec::new();
    leaf_paths(&defaults, "", &mut defaults_applied);
    defaults_applied.retain(|k| k != "pipeline" && !given.iter().any(|g| g == k || g.starts_with(&format!("{k}.")) || k.starts_with(&format!("{g}."))));

    let mut merged = defaults;
    merge(&mut merged, doc);
    merge(&mut merged, overrides);

    let config = parse_sections(pipeline, merged, &mut errs);
    if let Some(cfg) = &config {
        errs.extend(validate(cfg));
    }
    match config {
        Some(config) if errs.is_empty() => Ok(Loaded { config, defaults_applied }),
        _ => Err(ConfigErrors(errs)),
    }
}

fn parse_sections(pipeline: Pipeline, mut t: Table, errs: &mut Vec<Violation>) -> Option<RunConfig> {
    fn take<T: DeserializeOwned>(t: &mut Table, key: &str, module: &'static str, errs: &mut Vec<Violation>) -> Option<T> {
        let v = t.remove(key)?;
        match v.try_into() {
            Ok(x) => Some(x),
            Err(e) => {
                let msg: toml::de::Error = e;
                errs.push(Violation::new(module, key, msg.message().trim().to_string()));
                None
            }
        }
    }
    t.remove("pipeline");
    let output = take::<PathBuf>(&mut t, "output", "xplab-cli", errs);
    let seed = take::<u64>(&mut t, "seed", "xplab-cli", errs);
    let threads = take::<usize>(&mut t, "threads", "xplab-cli", errs);
    let sequential = take::<bool>(&mut t, "sequential", "xplab-cli", errs);
    let model = take::<ModelParams>(&mut t, "model", "gamma-model", errs);
    let grid = take::<GridSection>(&mut t, "grid", "topo-invariants", errs);
    let winding = take::<WindingSection>(&mut t, "winding", "topo-invariants", errs);
    let sweep = take::<SweepSection>(&mut t, "sweep", "xplab-cli", errs);
    let protocol = take::<ProtocolOptions>(&mut t, "protocol", "device-emulator", errs);
    let probe = take::<ProbeSettings>(&mut t, "probe", "device-emulator", errs);
    let device = take::<DeviceConfig>(&mut t, "device", "device-emulator", errs);
    for key in t.keys() {
        errs.push(Violation::new("xplab-cli", key.clone(), "unknown field"));
    }
    Some(RunConfig {
        pipeline,
        output: output?,
        seed: seed?,
        threads: threads?,
        sequential: sequential?,
        model: model?,
        grid: grid?,
        winding: winding?,
        sweep: sweep?,
        protocol: protocol?,
        probe: probe?,
        device: device?,
    })
}

fn core_violation(module: &'static str, prefix: &str, e: Error) -> Violation {
    match e {
        Error::InvalidParameter { field, reason } => Violation::new(module, format!("{prefix}.{field}"), reason),
        other => Violation::new(module, prefix, other.to_string()),
    }
}

/// Every violated precondition of the selected pipeline.
pub fn validate(cfg: &RunConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = cfg.pipeline;
    let sw = &cfg.sweep;

    if cfg.output.as_os_str().is_empty() {
        out.push(Violation::new("xplab-cli", "output", "must not be empty"));
    }
    if let Err(e) = cfg.model.validate() {
        out.push(core_violation("gamma-model", "model", e));
    }
    if p.needs_monopoles() {
        match monopole_positions(cfg.model.lambda) {
            Err(e) => out.push(Violation::new("gamma-model", "model.lambda", format!("monopole_positions precondition: {e}"))),
            Ok(pair) if pair.merged => out.push(Violation::new(
                "gamma-model",
                "model.lambda",
                format!("monopole_positions precondition: |Λ| = 1 merges the nodes, {p} needs |Λ| < 1"),
            )),
            Ok(_) => {}
        }
    }
    if p.needs_mass() && cfg.model.m == 0.0 {
        out.push(Violation::new("gamma-model", "model.m", format!("{p} needs a gapped model (m ≠ 0)")));
    }

    let g = &cfg.grid;
    if !(g.q_cut > 0.0 && g.q_cut.is_finite()) {
        out.push(Violation::new("topo-invariants", "grid.q_cut", format!("must be positive, got {}", g.q_cut)));
    }
    if let Err(e) = g.hopf().validate() {
        out.push(core_violation("topo-invariants", "grid", e));
    }
    if p == Pipeline::Invariants {
        if let Err(e) = g.full4d.validate() {
            out.push(core_violation("topo-invariants", "grid.full4d", e));
        }
        let w = &cfg.winding;
        if !(w.radius > 0.0 && w.radius < PI) {
            out.push(Violation::new("topo-invariants", "winding.radius", format!("must lie in (0, π), got {}", w.radius)));
        }
        if w.n_theta < 4 || w.n_phi < 4 || w.n_varphi < 4 {
            out.push(Violation::new("topo-invariants", "winding", "each resolution must be at least 4"));
        }
    }

    if p == Pipeline::Fig2 {
        for (i, a) in sw.a_values.iter().enumerate() {
            if !(-1.0..=1.0).contains(a) {
                out.push(Violation::new("gamma-model", format!("sweep.a_values[{i}]"), format!("must lie in [−1, 1], got {a}")));
            }
        }
        if sw.a_values.is_empty() {
            out.push(Violation::new("xplab-cli", "sweep.a_values", "must not be empty"));
        }
        if sw.n_k < 2 {
            out.push(Violation::new("xplab-cli", "sweep.n_k", "need at least two points"));
        }
        if sw.source == Source::Device && cfg.model.m != 0.0 {
            out.push(Violation::new("device-emulator", "model.m", "device spectroscopy implements the massless model only"));
        }
    }
    if p == Pipeline::Fig2 && sw.n_path < 2 {
        out.push(Violation::new("xplab-cli", "sweep.n_path", "need at least two points"));
    }
    if p == Pipeline::Device && sw.n_floquet < 2 {
        out.push(Violation::new("xplab-cli", "sweep.n_floquet", "need at least two points"));
    }
    let reduced = matches!(p, Pipeline::Fig4C2Sweep | Pipeline::Fig4Current) && sw.mode == Mode::Ideal;
    if reduced && cfg.model.a != 0.0 {
        out.push(Violation::new("topo-invariants", "model.a", "the Chern-form reduction holds only for a = 0"));
    }
    if p == Pipeline::Fig4C2Sweep {
        if sw.masses.is_empty() {
            out.push(Violation::new("xplab-cli", "sweep.masses", "must not be empty"));
        }
        for (i, m) in sw.masses.iter().enumerate() {
            if *m == 0.0 || !m.is_finite() {
                out.push(Violation::new("topo-invariants", format!("sweep.masses[{i}]"), format!("must be finite and non-zero, got {m}")));
            }
        }
    }
    if matches!(p, Pipeline::Fig3Gauge | Pipeline::Fig4Current) {
        if sw.alphas.len() < 2 {
            out.push(Violation::new("xplab-cli", "sweep.alphas", "need at least two field strengths"));
        }
        for (i, a) in sw.alphas.iter().enumerate() {
            if let Err(e) = GaugeProfile::new(*a, 0.0).validate() {
                out.push(core_violation("pme-response", &format!("sweep.alphas[{i}]"), e));
            }
        }
        if !sw.a_x.is_empty() && sw.a_x.len() < 3 {
            out.push(Violation::new("pme-response", "sweep.a_x", "need at least three gauge potentials"));
        }
        if sw.a_x.iter().any(|x| !x.is_finite()) {
            out.push(Violation::new("pme-response", "sweep.a_x", "must be finite"));
        }
    }

    let uses_protocol = match p {
        Pipeline::Fig4Chernform => sw.subsample > 0,
        Pipeline::Fig4C2Sweep | Pipeline::Fig4Current => sw.mode != Mode::Ideal,
        Pipeline::Device => true,
        _ => false,
    };
    if uses_protocol {
        if cfg.model.a != 0.0 {
            out.push(Violation::new("device-emulator", "model.a", "the ramp protocol decouples the sectors only at a = 0"));
        }
        let o = &cfg.protocol;
        if !(o.adiabaticity > 0.0 && o.window_periods > 0.0 && o.turn_on_periods > 0.0) {
            out.push(Violation::new("device-emulator", "protocol", "adiabaticity and durations must be positive"));
        }
        if sw.protocol_grid.contains(&0) {
            out.push(Violation::new("device-emulator", "sweep.protocol_grid", "both resolutions must be at least 1"));
        }
        if p == Pipeline::Fig4Chernform && (sw.subsample > cfg.grid.n_q || sw.subsample > cfg.grid.n_theta) {
            out.push(Violation::new("xplab-cli", "sweep.subsample", "larger than the field grid"));
        }
    }

    if let Err(e) = cfg.device.validate() {
        out.push(core_violation("device-emulator", "device", e));
    }
    if let Err(e) = cfg.device.decoherence.validate() {
        let v = core_violation("device-emulator", "device", e);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    if p == Pipeline::Fig2 && sw.source == Source::Device || p == Pipeline::Device {
        let pr = &cfg.probe;
        if !(pr.scale > 0.0 && pr.linewidth > 0.0 && pr.resolution > 0.0) {
            out.push(Violation::new("device-emulator", "probe", "scale, linewidth and resolution must be positive"));
        }
    }
    if p == Pipeline::Device && sw.rabi_points < 2 {
        out.push(Violation::new("xplab-cli", "sweep.rabi_points", "need at least two points"));
    }
    out
}

/// Recursive merge; tables merge key by key, equal-length arrays of tables
/// element by element, anything else is replaced.
pub fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (Some(Value::Array(b)), Value::Array(o))
                if b.len() == o.len() && b.iter().chain(&o).all(|x| x.is_table()) =>
            {
                for (bi, oi) in b.iter_mut().zip(o) {
                    if let (Value::Table(bt), Value::Table(ot)) = (bi, oi) {
                        merge(bt, ot);
                    }
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn leaf_paths(t: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in t {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(sub) => leaf_paths(sub, &key, out),
            _ => out.push(key),
        }
    }
}

/// Set `a.b.c = value`, creating tables on the way.
pub fn set_path(t: &mut Table, dotted: &str, value: Value) -> Result<(), String> {
    let mut parts = dotted.split('.').peekable();
    let mut cur = t;
    while let Some(p) = parts.next() {
        if p.is_empty() {
            return Err(format!("bad key `{dotted}`"));
        }
        if parts.peek().is_none() {
            cur.insert(p.to_string(), value);
            return Ok(());
        }
        let next = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match next {
            Value::Table(sub) => sub,
            _ => return Err(format!("`{p}` in `{dotted}` is not a table")),
        };
    }
    Err(format!("bad key `{dotted}`"))
}

/// Parse `key=value`; the value is read as TOML, falling back to a string.
pub fn parse_assignment(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let v = v.trim();
    let value = match format!("x = {v}").parse::<Table>() {
        Ok(mut t) => t.remove("x").unwrap_or(Value::String(v.to_string())),
        Err(_) => Value::String(v.to_string()),
    };
    Ok((k.trim().to_string(), value))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dim {
    Frequency,
    Time,
    Angle,
}

fn dimension(key: &str) -> Option<Dim> {
    match key {
        "m" | "v" | "q_cut" | "masses" | "qubit_freqs" | "anharmonicity" | "omega_max" | "g_qc" | "g_direct" | "freq"
        | "rabi" | "coupling_scale" | "scale" | "linewidth" | "resolution" => Some(Dim::Frequency),
        "t1" | "t2" => Some(Dim::Time),
        "phase" | "radius" => Some(Dim::Angle),
        _ => None,
    }
}

/// `"<number> <unit>"` in MHz, µs or radians.
pub fn parse_quantity(s: &str) -> Result<(f64, Dim), String> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_alphabetic()).ok_or_else(|| format!("`{s}` has no unit"))?;
    let (num, unit) = (s[..split].trim(), s[split..].trim());
    let x = if num.is_empty() { 1.0 } else { num.parse::<f64>().map_err(|_| format!("bad number in `{s}`"))? };
    let (factor, dim) = match unit.to_lowercase().as_str() {
        "hz" => (1e-6, Dim::Frequency),
        "khz" => (1e-3, Dim::Frequency),
        "mhz" => (1.0, Dim::Frequency),
        "ghz" => (1e3, Dim::Frequency),
        "s" => (1e6, Dim::Time),
        "ms" => (1e3, Dim::Time),
        "us" | "µs" | "μs" => (1.0, Dim::Time),
        "ns" => (1e-3, Dim::Time),
        "rad" => (1.0, Dim::Angle),
        "deg" => (PI / 180.0, Dim::Angle),
        "pi" | "π" => (PI, Dim::Angle),
        other => return Err(format!("unknown unit `{other}` in `{s}`")),
    };
    Ok((x * factor, dim))
}

fn convert_units(t: &mut Table, prefix: &str, errs: &mut Vec<Violation>) {
    for (k, v) in t.iter_mut() {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        convert_value(v, k, &key, errs);
    }
}

fn convert_value(v: &mut Value, name: &str, key: &str, errs: &mut Vec<Violation>) {
    match v {
        Value::Table(sub) => convert_units(sub, key, errs),
        Value::Array(items) => {
            for (i, item) in items.iter_mut().enumerate() {
                convert_value(item, name, &format!("{key}[{i}]"), errs);
            }
        }
        Value::String(s) => {
            let Some(want) = dimension(name) else { return };
            match parse_quantity(s) {
                Ok((x, dim)) if dim == want => *v = Value::Float(x),
                Ok((_, dim)) => errs.push(Violation::new("xplab-cli", key, format!("expected a {want:?} but `{s}` is a {dim:?}").to_lowercase())),
                Err(e) => errs.push(Violation::new("xplab-cli", key, e)),
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> Table {
        s.parse().unwrap()
    }

    #[test]
    fn file_and_flags_layer_over_defaults() {
        let mut flags = Table::new();
        set_path(&mut flags, "model.m", Value::Float(-4.0)).unwrap();
        let l = resolve(doc("[model]\nm = 12.0\na = 0.0\n[grid]\nn_q = 40"), Some(Pipeline::Fig4Chernform), &flags).unwrap();
        assert_eq!(l.config.model.m, -4.0);
        assert_eq!(l.config.grid.n_q, 40);
        assert_eq!(l.config.grid.n_theta, 64);
        assert!(l.defaults_applied.contains(&"model.v".to_string()));
        assert!(!l.defaults_applied.contains(&"model.m".to_string()));
    }

    #[test]
    fn units_are_normalized() {
        let l = resolve(
            doc("[model]\nm = \"0.008 GHz\"\n[device.decoherence]\nt1 = [\"20 us\", \"20000 ns\", 20.0, 20.0]\nt2 = [4.0, 4.0, 4.0, 4.0]"),
            Some(Pipeline::Fig4Chernform),
            &Table::new(),
        )
        .unwrap();
        assert!((l.config.model.m - 8.0).abs() < 1e-12);
        assert_eq!(l.config.device.decoherence.t1[1], 20.0);
        assert_eq!(parse_quantity("0.4 pi").unwrap().0, 0.4 * PI);
        let e = resolve(doc("[model]\nm = \"3 us\""), Some(Pipeline::Fig4Chernform), &Table::new()).unwrap_err();
        assert_eq!(e.0[0].field, "model.m");
    }

    #[test]
    fn errors_are_enumerated() {
        let e = resolve(
            doc("[model]\nlambda = 1.5\nm = 0.0\n[device.decoherence]\nt1 = [1.0, 1.0, 1.0, 1.0]\nt2 = [3.0, 1.0, 1.0, 1.0]\n[grid]\nbogus = 1"),
            Some(Pipeline::Fig3Gauge),
            &Table::new(),
        )
        .unwrap_err();
        assert!(e.0.iter().any(|v| v.field == "grid" && v.message.contains("bogus")));
        let e = resolve(
            doc("[model]\nlambda = 1.5\n[device.decoherence]\nt1 = [1.0, 1.0, 1.0, 1.0]\nt2 = [3.0, 1.0, 1.0, 1.0]"),
            Some(Pipeline::Fig3Gauge),
            &Table::new(),
        )
        .unwrap_err();
        assert!(e.0.iter().any(|v| v.field == "model.lambda" && v.message.contains("monopole_positions")));
        assert!(e.0.iter().any(|v| v.module == "device-emulator" && v.message.contains("2·T1")));
    }

    #[test]
    fn pipeline_names_must_agree() {
        let e = resolve(doc("pipeline = \"fig2\""), Some(Pipeline::Invariants), &Table::new()).unwrap_err();
        assert_eq!(e.0[0].field, "pipeline");
        assert!(resolve(doc("pipeline = \"fig9\""), None, &Table::new()).is_err());
        assert_eq!(resolve(doc("pipeline = \"fig4-c2sweep\""), None, &Table::new()).unwrap().config.pipeline, Pipeline::Fig4C2Sweep);
    }

    #[test]
    fn assignments_parse_as_toml() {
        assert_eq!(parse_assignment("grid.n_q=12").unwrap().1, Value::Integer(12));
        assert_eq!(parse_assignment("sweep.mode=open").unwrap().1, Value::String("open".into()));
        assert!(parse_assignment("nonsense").is_err());
    }
}

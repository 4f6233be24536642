//! Command-line frontend: `validate`, `reach`, `metrics`, `simulate` and
//! `export`, all driven by a scenario file.
//!
//! Exit codes: 0 on success, 2 when the scenario or an input file is
//! invalid, 3 on numerical failure, 1 for other I/O errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use cpsafe_geometry::{EqualityMode, GeometryError, HPolytope, PolyUnion, Tolerances};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{impact, slice_union, write_sweep_csv, ImpactReport, MetricsError, SweepRow};
use crate::reach::{backward_sequence, IterationInfo, PsiMode, ReachError, ReachResult, ReachStatus, DEFAULT_LMAX};
use crate::scenario::{Scenario, ScenarioError};
use crate::sim::{falsify, grid_oracle, stealth_campaign, GridLabel, SimError};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CPSAFE_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        if e.is_validation() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

macro_rules! numerical {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numerical(e.to_string())
            }
        }
    )*};
}
numerical!(GeometryError, ReachError, MetricsError, SimError);

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "cpsafe", version, about = "Safe sets of control loops under stealthy, graph-constrained attacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct RunOpts {
    /// Iteration cap for the backward sequence.
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Representation of backward images.
    #[arg(long, value_parser = clap::value_parser!(PsiMode))]
    pub mode: Option<PsiMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
}

impl clap::ValueEnum for PsiMode {
    fn value_variants<'a>() -> &'a [Self] {
        &[PsiMode::Exact, PsiMode::ConvexInner]
    }
    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            PsiMode::Exact => "exact",
            PsiMode::ConvexInner => "convex-inner",
        }))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and print the modes and graph it defines.
    Validate { scenario: PathBuf },
    /// Compute the invariant multi-set and maximal safe set.
    Reach {
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Impact metrics over a sweep of maximum dwell times.
    Metrics {
        scenario: PathBuf,
        /// Comma-separated `n_max` values; defaults to the scenario sweep.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<usize>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Adversarial rollouts and falsification against a safe set.
    Simulate {
        scenario: PathBuf,
        /// `reach.json` to test; computed when absent.
        #[arg(long)]
        safe_set: Option<PathBuf>,
        /// Number of rollouts (and falsification trials).
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Also classify a grid with this many points per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Trajectories written to `trajectories.jsonl`.
        #[arg(long, default_value_t = 10)]
        keep: usize,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Write 2-D slices of a reach result as CSV vertex loops.
    Export {
        /// `reach.json` produced by `reach`.
        result: PathBuf,
        /// Fixed coordinates as `index=value` (0-based); by default every
        /// estimation-error coordinate is fixed to zero.
        #[arg(long = "fix", value_parser = parse_fix)]
        fix: Vec<(usize, f64)>,
        /// Node to export; the safe set when absent.
        #[arg(long)]
        node: Option<String>,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
}

fn parse_fix(s: &str) -> std::result::Result<(usize, f64), String> {
    let (i, v) = s.split_once('=').ok_or_else(|| format!("expected index=value, got {s:?}"))?;
    Ok((
        i.trim().parse().map_err(|e| format!("{i:?}: {e}"))?,
        v.trim().parse().map_err(|e| format!("{v:?}: {e}"))?,
    ))
}

/// Serialized form of a reach run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachFile {
    pub scenario: String,
    /// State dimension of the plant; the augmented dimension is twice this.
    pub nx: usize,
    pub status: ReachStatus,
    pub iterations: usize,
    pub psi_mode: PsiMode,
    pub equality_mode: EqualityMode,
    pub underapproximation: bool,
    pub nodes: BTreeMap<String, PolyUnion>,
    pub safe_set: PolyUnion,
    pub history: Vec<IterationInfo>,
    pub diagnostics: Vec<String>,
}

impl ReachFile {
    pub fn new(name: &str, nx: usize, res: &ReachResult, graph: &crate::attack_graph::AttackGraph) -> Self {
        Self {
            scenario: name.to_string(),
            nx,
            status: res.status,
            iterations: res.history.len(),
            psi_mode: res.psi_mode,
            equality_mode: res.equality_mode,
            underapproximation: res.underapproximation,
            nodes: res.multiset.named(graph),
            safe_set: res.safe_set.clone(),
            history: res.history.clone(),
            diagnostics: res.diagnostics.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }
}

fn out_dir(flag: &Option<PathBuf>, sc: Option<&Scenario>) -> PathBuf {
    flag.clone()
        .or_else(|| sc.and_then(|s| s.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("cpsafe-out"))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn write_timing(dir: &Path, stem: &str, started: Instant) -> Result<()> {
    let t = serde_json::json!({ "elapsed_seconds": started.elapsed().as_secs_f64() });
    write_file(dir, &format!("{stem}.timing.json"), &json_bytes(&t))?;
    Ok(())
}

fn apply_opts(sc: &mut Scenario, opts: &RunOpts) {
    if let Some(l) = opts.lmax {
        sc.lmax = Some(l);
    }
    if let Some(m) = opts.mode {
        sc.mode = Some(m);
    }
    if let Some(s) = opts.seed {
        sc.seed = s;
    }
}

/// Summary printed by `validate`.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub nodes: Vec<String>,
    pub edges: usize,
    pub modes: Vec<(String, usize)>,
    pub z_rows: usize,
    pub warnings: Vec<String>,
}

pub fn cmd_validate(path: &Path) -> Result<ValidationReport> {
    let sc = Scenario::from_path(path)?;
    let plant = sc.plant()?;
    let warnings = plant.check(&sc.tolerances)?;
    let sys = sc.build()?;
    Ok(ValidationReport {
        scenario: sc.name.clone(),
        nodes: sys.graph.nodes().to_vec(),
        edges: sys.graph.edges().len(),
        modes: sys.modes.iter().map(|(l, m)| (l.clone(), m.mode.n_attack())).collect(),
        z_rows: sys.z_set().n_rows(),
        warnings,
    })
}

impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub fn cmd_reach(path: &Path, opts: &RunOpts) -> Result<(ReachFile, PathBuf)> {
    let started = Instant::now();
    let mut sc = Scenario::from_path(path)?;
    apply_opts(&mut sc, opts);
    let sys = sc.build()?;
    let res = backward_sequence(&sys, sc.lmax.unwrap_or(DEFAULT_LMAX), sc.mode.unwrap_or_default())?;
    let file = ReachFile::new(&sc.name, sys.dim() / 2, &res, &sys.graph);
    let dir = out_dir(&opts.out, Some(&sc));
    let p = write_file(&dir, "reach.json", &json_bytes(&file))?;
    write_timing(&dir, "reach", started)?;
    Ok((file, p))
}

/// Metrics of one sweep point, on the full augmented set and on the
/// `e = 0` slice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n_max: usize,
    pub status: ReachStatus,
    pub full: ImpactReport,
    pub slice: ImpactReport,
}

fn status_word(s: &ReachStatus) -> String {
    match s {
        ReachStatus::Converged(_) => "converged".into(),
        ReachStatus::IterationCapReached(_) => "iteration-cap".into(),
        ReachStatus::Empty(_) => "empty".into(),
    }
}

fn error_slice(u: &PolyUnion, nx: usize, tol: &Tolerances) -> Result<PolyUnion> {
    let coords: Vec<usize> = (nx..2 * nx).collect();
    Ok(slice_union(u, &coords, &vec![0.0; nx], tol)?)
}

/// Nominal safe set and impact metrics for every `n_max`.
pub fn impact_sweep(sc: &Scenario, values: &[usize]) -> Result<Vec<SweepPoint>> {
    let lmax = sc.lmax.unwrap_or(DEFAULT_LMAX);
    let mode = sc.mode.unwrap_or_default();
    let nominal = sc.build_nominal()?;
    let tol = nominal.tol;
    let nx = nominal.dim() / 2;
    let s0 = backward_sequence(&nominal, lmax, mode)?.safe_set;
    let s0_slice = error_slice(&s0, nx, &tol)?;
    let mut out = Vec::new();
    for &n in values {
        let sys = sc.build_with_n_max(n)?;
        let res = backward_sequence(&sys, lmax, mode)?;
        let label = format!("{}:n_max={n}", sc.name);
        let full = impact(&s0, &res.safe_set, &tol, &label)?;
        let slice = impact(&s0_slice, &error_slice(&res.safe_set, nx, &tol)?, &tol, &label)?;
        out.push(SweepPoint {
            n_max: n,
            status: res.status,
            full,
            slice,
        });
    }
    Ok(out)
}

pub fn cmd_metrics(path: &Path, sweep: &[usize], opts: &RunOpts) -> Result<(Vec<SweepPoint>, PathBuf)> {
    let started = Instant::now();
    let mut sc = Scenario::from_path(path)?;
    apply_opts(&mut sc, opts);
    let values = if sweep.is_empty() { sc.sweep_values() } else { sweep.to_vec() };
    if values.is_empty() {
        return Err(CliError::Invalid("sweep: no n_max values given".into()));
    }
    let points = impact_sweep(&sc, &values)?;
    let dir = out_dir(&opts.out, Some(&sc));
    let mut paths = Vec::new();
    for (name, pick) in [
        ("metrics.csv", (|p: &SweepPoint| &p.full) as fn(&SweepPoint) -> &ImpactReport),
        ("metrics_slice_e0.csv", |p: &SweepPoint| &p.slice),
    ] {
        let rows: Vec<SweepRow> = points
            .iter()
            .map(|p| SweepRow::new(p.n_max, pick(p), status_word(&p.status)))
            .collect();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).map_err(|e| CliError::Numerical(e.to_string()))?;
        paths.push(write_file(&dir, name, &buf)?);
    }
    write_timing(&dir, "metrics", started)?;
    Ok((points, paths.remove(0)))
}

/// Result of `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateReport {
    pub scenario: String,
    pub stealth: crate::sim::StealthReport,
    pub falsify_trials: usize,
    pub counterexample_found: bool,
    pub outside_escapes: usize,
    pub grid_points: Option<usize>,
    pub grid_safe_misclassified: Option<usize>,
}

pub fn cmd_simulate(
    path: &Path,
    safe_file: Option<&Path>,
    budget: usize,
    steps: usize,
    grid: Option<usize>,
    keep: usize,
    opts: &RunOpts,
) -> Result<SimulateReport> {
    let started = Instant::now();
    let mut sc = Scenario::from_path(path)?;
    apply_opts(&mut sc, opts);
    let sys = sc.build()?;
    let safe = match safe_file {
        Some(p) => {
            let f = ReachFile::read(p)?;
            if f.safe_set.dim() != sys.dim() {
                return Err(CliError::Invalid(format!(
                    "{}: safe set has dimension {}, scenario has {}",
                    p.display(),
                    f.safe_set.dim(),
                    sys.dim()
                )));
            }
            f.safe_set
        }
        None => backward_sequence(&sys, sc.lmax.unwrap_or(DEFAULT_LMAX), sc.mode.unwrap_or_default())?.safe_set,
    };
    let tol = sys.tol;
    let stealth = stealth_campaign(&sys, &safe, budget, steps, sc.seed)?;
    let fal = falsify(&sys, &safe, budget, steps, sc.seed ^ 0x9e37_79b9)?;
    let dir = out_dir(&opts.out, Some(&sc));

    let mut lines = Vec::new();
    let mut rng_seed = sc.seed;
    let starts = {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(sc.seed.wrapping_add(17));
        crate::sim::sample_union(&safe, keep, &mut rng, &tol)?
    };
    for z0 in &starts {
        rng_seed = rng_seed.wrapping_add(1);
        let tr = crate::sim::rollout(
            &sys,
            z0,
            0,
            steps,
            crate::sim::AttackPolicy::Extreme,
            crate::sim::DisturbancePolicy::Vertex,
            rng_seed,
        )?;
        lines.extend(serde_json::to_vec(&tr).expect("serializable"));
        lines.push(b'\n');
    }
    if let Some(tr) = &fal.counterexample {
        write_file(&dir, "counterexample.json", &json_bytes(tr))?;
    }
    write_file(&dir, "trajectories.jsonl", &lines)?;

    let (mut grid_points, mut misclassified) = (None, None);
    if let Some(res) = grid {
        let pts = grid_oracle(&sys, res, steps.min(30))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let dim = sys.dim();
        let mut header: Vec<String> = (1..=dim).map(|k| format!("z{k}")).collect();
        header.extend(["label".into(), "first_violation".into(), "in_safe_set".into()]);
        w.write_record(&header).map_err(|e| CliError::Numerical(e.to_string()))?;
        let mut bad = 0;
        for p in &pts {
            let inside = safe.contains_point(&p.z, &tol);
            let (label, step) = match p.label {
                GridLabel::OutsideZ => ("outside", String::new()),
                GridLabel::Violates(t) => ("violates", t.to_string()),
                GridLabel::NoViolationFound => ("safe", String::new()),
            };
            if inside && label != "safe" {
                bad += 1;
            }
            let mut rec: Vec<String> = p.z.iter().map(|x| x.to_string()).collect();
            rec.extend([label.to_string(), step, inside.to_string()]);
            w.write_record(&rec).map_err(|e| CliError::Numerical(e.to_string()))?;
        }
        let buf = w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?;
        write_file(&dir, "grid.csv", &buf)?;
        grid_points = Some(pts.len());
        misclassified = Some(bad);
    }

    let report = SimulateReport {
        scenario: sc.name.clone(),
        stealth,
        falsify_trials: fal.trials,
        counterexample_found: fal.counterexample.is_some(),
        outside_escapes: fal.outside_escapes,
        grid_points,
        grid_safe_misclassified: misclassified,
    };
    write_file(&dir, "simulate.json", &json_bytes(&report))?;
    write_timing(&dir, "simulate", started)?;
    Ok(report)
}

/// Vertices of a 2-D polytope in counter-clockwise order.
pub fn vertex_loop(p: &HPolytope, tol: &Tolerances) -> Result<Vec<[f64; 2]>> {
    if p.dim() != 2 {
        return Err(CliError::Invalid(format!("slice has dimension {}, expected 2", p.dim())));
    }
    let v = p.vertices(tol)?;
    let pts: Vec<[f64; 2]> = v.points().iter().map(|q| [q[0], q[1]]).collect();
    if pts.is_empty() {
        return Ok(pts);
    }
    let cx = pts.iter().map(|q| q[0]).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|q| q[1]).sum::<f64>() / pts.len() as f64;
    let mut pts = pts;
    pts.sort_by(|a, b| {
        let ta = (a[1] - cy).atan2(a[0] - cx);
        let tb = (b[1] - cy).atan2(b[0] - cx);
        ta.total_cmp(&tb)
    });
    Ok(pts)
}

pub fn cmd_export(result: &Path, fix: &[(usize, f64)], node: Option<&str>, out: &Option<PathBuf>) -> Result<PathBuf> {
    let file = ReachFile::read(result)?;
    let tol = Tolerances::default();
    let set = match node {
        Some(n) => file
            .nodes
            .get(n)
            .cloned()
            .ok_or_else(|| CliError::Invalid(format!("no node {n:?} in {}", result.display())))?,
        None => file.safe_set.clone(),
    };
    let fix: Vec<(usize, f64)> = if fix.is_empty() {
        (file.nx..2 * file.nx).map(|i| (i, 0.0)).collect()
    } else {
        fix.to_vec()
    };
    let dim = set.dim();
    if let Some((i, _)) = fix.iter().find(|(i, _)| *i >= dim) {
        return Err(CliError::Invalid(format!("--fix index {i} out of range 0..{dim}")));
    }
    if dim.saturating_sub(fix.len()) != 2 {
        return Err(CliError::Invalid(format!(
            "fixing {} of {dim} coordinates does not leave a 2-D slice",
            fix.len()
        )));
    }
    let (coords, values): (Vec<usize>, Vec<f64>) = fix.iter().copied().unzip();
    let free: Vec<usize> = (0..dim).filter(|i| !coords.contains(i)).collect();
    let slice = slice_union(&set, &coords, &values, &tol)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Numerical(e.to_string());
    w.write_record(["piece", "vertex", &format!("z{}", free[0] + 1), &format!("z{}", free[1] + 1)])
        .map_err(err)?;
    for (k, p) in slice.pieces().iter().enumerate() {
        for (j, v) in vertex_loop(p, &tol)?.iter().enumerate() {
            w.write_record([k.to_string(), j.to_string(), v[0].to_string(), v[1].to_string()])
                .map_err(err)?;
        }
    }
    let buf = w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?;
    let name = match node {
        Some(n) => format!("slice_{n}.csv"),
        None => "slice_safe.csv".to_string(),
    };
    let dir = out.clone().unwrap_or_else(|| {
        result.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
    });
    write_file(&dir, &name, &buf)
}

/// Runs a parsed command, printing a summary to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match cli.command {
        Command::Validate { scenario } => {
            let r = cmd_validate(&scenario)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&r).expect("serializable")).map_err(io)?;
        }
        Command::Reach { scenario, opts } => {
            let (f, p) = cmd_reach(&scenario, &opts)?;
            writeln!(
                stdout,
                "{}: {:?}, {} iterations, safe set has {} pieces -> {}",
                f.scenario,
                f.status,
                f.iterations,
                f.safe_set.len(),
                p.display()
            )
            .map_err(io)?;
        }
        Command::Metrics { scenario, sweep, opts } => {
            let (pts, p) = cmd_metrics(&scenario, &sweep, &opts)?;
            for pt in &pts {
                writeln!(
                    stdout,
                    "n_max={:3}  I1={:.4}  I2={:.4}  (e=0 slice: I1={:.4} I2={:.4})  {}",
                    pt.n_max,
                    pt.full.i1,
                    pt.full.i2,
                    pt.slice.i1,
                    pt.slice.i2,
                    status_word(&pt.status)
                )
                .map_err(io)?;
            }
            writeln!(stdout, "-> {}", p.display()).map_err(io)?;
        }
        Command::Simulate {
            scenario,
            safe_set,
            budget,
            steps,
            grid,
            keep,
            opts,
        } => {
            let r = cmd_simulate(&scenario, safe_set.as_deref(), budget, steps, grid, keep, &opts)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&r).expect("serializable")).map_err(io)?;
            if r.counterexample_found || r.stealth.z_exits > 0 || r.stealth.attack_alarms > 0 {
                return Err(CliError::Numerical("safe set failed adversarial validation".into()));
            }
        }
        Command::Export { result, fix, node, out } => {
            let p = cmd_export(&result, &fix, node.as_deref(), &out)?;
            writeln!(stdout, "-> {}", p.display()).map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, &mut std::io::stdout()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

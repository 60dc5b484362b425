//! Command-line front end: configuration, subcommands and file outputs.
//!
//! Settings come from an optional `key = value` file (`--config`) and are
//! overridden by flags. Exit codes: 0 success, 1 numeric failure, 2 invalid
//! configuration, 3 refused because of a spectral collision.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bessel;
use crate::contour::{self, BranchResult, ContourError, SolverConfig, VStateSolution};
use crate::dynamics::{self, EvolutionState, PatchBoundary};
use crate::kernels::{self, LayerParams, PlanePoint};
use crate::quadrature;
use crate::spectrum::{self, Branch};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qs2l", version, about = "Two-layer quasi-geostrophic vortex patches: spectra, V-states and contour dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate A_n, B_n, γ_n and Ω_n^± for n = 1..nmax.
    Spectrum,
    /// Scan b2 for spectral collisions Ω_m^− = Ω_n^+.
    Collide,
    /// Continue an m-fold V-state branch over an amplitude grid.
    Vstate,
    /// Evolve two patches by contour dynamics.
    Evolve,
    /// Run the identity suites and print a pass/fail table.
    Verify,
}

#[derive(Debug, Default, clap::Args)]
struct Flags {
    #[arg(long, global = true)]
    b1: Option<String>,
    #[arg(long, global = true)]
    b2: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<String>,
    #[arg(long, global = true)]
    nmax: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    sign: Option<String>,
    /// Comma-separated amplitudes.
    #[arg(long = "s-grid", global = true)]
    s_grid: Option<String>,
    #[arg(long = "t-end", global = true)]
    t_end: Option<String>,
    #[arg(long, global = true)]
    dt: Option<String>,
    #[arg(long, global = true)]
    nodes: Option<String>,
    #[arg(long, global = true)]
    modes: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// bessel, quadrature, kernels, spectrum or all.
    #[arg(long, global = true)]
    suite: Option<String>,
    #[arg(long = "check-rotation", global = true)]
    check_rotation: bool,
    /// Initial data for evolve: discs, twin, a V-state JSON file or a boundary CSV.
    #[arg(long, global = true)]
    init: Option<String>,
    /// Report equal-radii collisions I_1K_1(x) = 1/(2n) instead of scanning b2.
    #[arg(long = "equal-radii", global = true)]
    equal_radii: bool,
    /// With spectrum: also report the first m from which no collision occurs up to nmax.
    #[arg(long = "collision-free", global = true)]
    collision_free: bool,
    #[arg(long = "snapshot-every", global = true)]
    snapshot_every: Option<String>,
    #[arg(long = "perturb-gamma", global = true, hide = true, allow_hyphen_values = true)]
    perturb_gamma: Option<String>,
}

const KEYS: [&str; 17] = [
    "b1",
    "b2",
    "delta",
    "lambda",
    "nmax",
    "m",
    "sign",
    "s-grid",
    "t-end",
    "dt",
    "nodes",
    "modes",
    "out",
    "suite",
    "check-rotation",
    "init",
    "snapshot-every",
];

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: LayerParams,
    pub n_max: u32,
    pub m: u32,
    pub sign: Branch,
    pub s_grid: Vec<f64>,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub n_nodes: Option<usize>,
    pub n_modes: Option<usize>,
    pub out: PathBuf,
    pub suite: String,
    pub check_rotation: bool,
    pub init: String,
    pub snapshot_every: usize,
    pub equal_radii: bool,
    pub collision_free: bool,
    pub perturb_gamma: f64,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }

    fn numeric(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_NUMERIC, message: e.to_string() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::numeric(format!("{e:#}"))
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn read_config_file(path: &Path) -> std::result::Result<BTreeMap<String, String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Failure::config(format!("{}:{}: unknown key '{}'", path.display(), i + 1, k.trim())));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e| Failure::config(format!("invalid value '{v}' for {key}: {e}")))
}

fn parse_bool(key: &str, v: &str) -> std::result::Result<bool, Failure> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Failure::config(format!("invalid value '{v}' for {key}: expected true or false"))),
    }
}

fn resolve(flags: &Flags) -> std::result::Result<RunConfig, Failure> {
    let mut map = match &flags.config {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    let overrides = [
        ("b1", &flags.b1),
        ("b2", &flags.b2),
        ("delta", &flags.delta),
        ("lambda", &flags.lambda),
        ("nmax", &flags.nmax),
        ("m", &flags.m),
        ("sign", &flags.sign),
        ("s-grid", &flags.s_grid),
        ("t-end", &flags.t_end),
        ("dt", &flags.dt),
        ("nodes", &flags.nodes),
        ("modes", &flags.modes),
        ("out", &flags.out),
        ("suite", &flags.suite),
        ("init", &flags.init),
        ("snapshot-every", &flags.snapshot_every),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            map.insert(k.to_string(), v.clone());
        }
    }
    if flags.check_rotation {
        map.insert("check-rotation".into(), "true".into());
    }
    let get = |k: &str| map.get(k).map(String::as_str);
    let f = |k: &str, default: f64| -> std::result::Result<f64, Failure> {
        let v = get(k).map(|v| parse::<f64>(k, v)).transpose()?.unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Failure::config(format!("{k} must be finite")))
        }
    };
    let params = LayerParams::new(f("delta", 1.0)?, f("lambda", 1.0)?, f("b1", 1.0)?, f("b2", 0.7)?)
        .map_err(|e| Failure::config(e.to_string()))?;
    let n_max = get("nmax").map(|v| parse::<u32>("nmax", v)).transpose()?.unwrap_or(16);
    let m = get("m").map(|v| parse::<u32>("m", v)).transpose()?.unwrap_or(2);
    if n_max == 0 || m == 0 {
        return Err(Failure::config("nmax and m must be at least 1"));
    }
    let sign = get("sign").map(|v| v.parse::<Branch>().map_err(Failure::config)).transpose()?.unwrap_or(Branch::Minus);
    let s_grid = match get("s-grid") {
        Some(v) => v.split(',').map(|s| parse::<f64>("s-grid", s)).collect::<std::result::Result<Vec<_>, _>>()?,
        None => vec![1e-3],
    };
    if s_grid.is_empty() || s_grid.iter().any(|s| !s.is_finite()) {
        return Err(Failure::config("s-grid must list finite amplitudes"));
    }
    let t_end = f("t-end", 1.0)?;
    if t_end <= 0.0 {
        return Err(Failure::config("t-end must be positive"));
    }
    let dt = get("dt").map(|v| parse::<f64>("dt", v)).transpose()?;
    if dt.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
        return Err(Failure::config("dt must be positive"));
    }
    let n_nodes = get("nodes").map(|v| parse::<usize>("nodes", v)).transpose()?;
    if n_nodes.is_some_and(|n| n < 64 || !n.is_power_of_two()) {
        return Err(Failure::config("nodes must be a power of two >= 64"));
    }
    let n_modes = get("modes").map(|v| parse::<usize>("modes", v)).transpose()?;
    if n_modes.is_some_and(|n| n < 8) {
        return Err(Failure::config("modes must be at least 8"));
    }
    let suite = get("suite").unwrap_or("all").to_string();
    if !["all", "bessel", "quadrature", "kernels", "spectrum"].contains(&suite.as_str()) {
        return Err(Failure::config(format!("unknown suite '{suite}'")));
    }
    let snapshot_every = get("snapshot-every").map(|v| parse::<usize>("snapshot-every", v)).transpose()?.unwrap_or(100);
    if snapshot_every == 0 {
        return Err(Failure::config("snapshot-every must be positive"));
    }
    let perturb_gamma = flags.perturb_gamma.as_deref().map(|v| parse::<f64>("perturb-gamma", v)).transpose()?.unwrap_or(0.0);
    Ok(RunConfig {
        params,
        n_max,
        m,
        sign,
        s_grid,
        t_end,
        dt,
        n_nodes,
        n_modes,
        out: PathBuf::from(get("out").unwrap_or("out")),
        suite,
        check_rotation: get("check-rotation").map(|v| parse_bool("check-rotation", v)).transpose()?.unwrap_or(false),
        init: get("init").unwrap_or("discs").to_string(),
        snapshot_every,
        equal_radii: flags.equal_radii,
        collision_free: flags.collision_free,
        perturb_gamma,
    })
}

/// Floats in output files: 17 significant digits.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn create_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_spectrum(cfg: &RunConfig) -> CmdResult {
    let p = &cfg.params;
    let rows = spectrum::spectrum_table(p, cfg.n_max).map_err(Failure::numeric)?;
    let p0 = spectrum::threshold_p0(p, 10_000).map_err(Failure::numeric)?;
    let limit = spectrum::omega_minus_infinity(p).map_err(Failure::numeric)?;
    let free_m = if cfg.collision_free {
        spectrum::first_collision_free_m(p, cfg.n_max, cfg.n_max + 1, 512).map_err(Failure::numeric)?
    } else {
        None
    };
    create_out(&cfg.out)?;
    write_csv(
        &cfg.out.join("spectrum.csv"),
        &["n", "a_n", "b_n", "gamma_n", "omega_minus", "omega_plus"],
        rows.iter().map(|r| vec![r.n.to_string(), fmt(r.a_n), fmt(r.b_n), fmt(r.gamma_n), fmt(r.omega_minus), fmt(r.omega_plus)]),
    )?;
    write_json(
        &cfg.out.join("spectrum.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "params": p,
            "proven_regime": p.proven_regime(),
            "omega_minus_infinity": limit,
            "threshold_p0": p0,
            "first_collision_free_m": free_m,
            "rows": rows,
        }),
    )?;
    println!("spectrum: {} rows written to {}", rows.len(), cfg.out.display());
    match p0 {
        Some(p0) => println!("Omega_n^+ > Omega_m^- for all n, m >= {p0}"),
        None => println!("no threshold p0 found: Omega_n^+ stays below Omega_inf^-"),
    }
    if cfg.collision_free {
        match free_m {
            Some(m) => println!("no collision for {m} <= m <= {}", cfg.n_max),
            None => println!("collisions persist up to m = {}", cfg.n_max),
        }
    }
    Ok(())
}

fn cmd_collide(cfg: &RunConfig) -> CmdResult {
    let p = &cfg.params;
    create_out(&cfg.out)?;
    if cfg.equal_radii {
        let mut reports = Vec::new();
        for n in 2..=cfg.n_max.max(2) {
            let (x0, residual) = spectrum::equal_radii_collision(n).map_err(Failure::numeric)?;
            let b = x0 / p.mu();
            let eq = LayerParams::new(p.delta, p.lambda, b, b).map_err(Failure::numeric)?;
            let o1 = spectrum::omega_pm(&eq, 1).map_err(Failure::numeric)?.1;
            let on = spectrum::omega_pm(&eq, n).map_err(Failure::numeric)?.0;
            reports.push(json!({
                "n": n,
                "x0": x0,
                "b": b,
                "residual": residual,
                "omega_1_plus": o1,
                "omega_n_minus": on,
                "gap": (o1 - on).abs(),
            }));
            println!("n = {n}: I_1K_1(x) = 1/(2n) at x = {}, b1 = b2 = {}", fmt(x0), fmt(b));
        }
        write_json(
            &cfg.out.join("collisions.json"),
            &json!({"schema_version": SCHEMA_VERSION, "mode": "equal-radii", "params": p, "roots": reports}),
        )?;
        return Ok(());
    }
    let n_max = cfg.n_max.max(cfg.m + 1);
    let records = spectrum::collision_scan(p, cfg.m, n_max, 512).map_err(Failure::numeric)?;
    let p0 = spectrum::threshold_p0(p, 10_000).map_err(Failure::numeric)?;
    write_json(
        &cfg.out.join("collisions.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "mode": "scan",
            "params": p,
            "m": cfg.m,
            "n_max": n_max,
            "proven_regime": p.proven_regime(),
            "threshold_p0": p0,
            "records": records,
        }),
    )?;
    println!("collide: {} collision(s) for m = {} in b2 in (0, {})", records.len(), cfg.m, p.b1);
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BranchFile {
    schema_version: u32,
    params: LayerParams,
    m: u32,
    sign: Branch,
    omega_bifurcation: f64,
    direction: [f64; 2],
    solutions: Vec<VStateSolution>,
    last_good_amplitude: Option<f64>,
    failure: Option<String>,
    boundary_files: Vec<String>,
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    let mut s = SolverConfig::default();
    if let Some(n) = cfg.n_nodes {
        s.n_nodes = n;
    }
    if let Some(n) = cfg.n_modes {
        s.n_modes = n;
    }
    if let Some(mx) = cfg.s_grid.iter().map(|s| s.abs()).reduce(f64::max) {
        s.s_max = s.s_max.max(mx);
    }
    s
}

fn cmd_vstate(cfg: &RunConfig) -> CmdResult {
    let p = &cfg.params;
    let scfg = solver_config(cfg);
    if 2 * scfg.n_modes * cfg.m as usize >= scfg.n_nodes {
        return Err(Failure::config(format!("{} nodes cannot resolve {} modes of symmetry {}", scfg.n_nodes, scfg.n_modes, cfg.m)));
    }
    match contour::check_collisions(p, cfg.m, cfg.sign, scfg.n_modes, scfg.collision_grid) {
        Err(ContourError::Collision { m, reason }) => {
            println!("{}", json!({"schema_version": SCHEMA_VERSION, "status": "refused", "m": m, "sign": cfg.sign, "reason": reason}));
            return Err(Failure { code: EXIT_REFUSED, message: format!("collision: {reason}") });
        }
        Err(e) => return Err(Failure::numeric(e)),
        Ok(()) => {}
    }
    let omega0 = spectrum::omega_branch(p, cfg.m, cfg.sign).map_err(Failure::numeric)?;
    let direction = contour::unit_kernel_vector(p, cfg.m, cfg.sign).map_err(Failure::numeric)?;
    let BranchResult { solutions, last_good_amplitude, failure } = contour::branch_continue(p, cfg.m, cfg.sign, &cfg.s_grid, &scfg);
    create_out(&cfg.out)?;
    let mut files = Vec::new();
    for (i, sol) in solutions.iter().enumerate() {
        let name = format!("boundary_{i:03}.csv");
        let table = sol.deformation.boundary_table(p, scfg.n_nodes).map_err(Failure::numeric)?;
        write_csv(&cfg.out.join(&name), &["theta", "R1", "R2", "x1", "y1", "x2", "y2"], table.iter().map(|r| r.iter().map(|&v| fmt(v)).collect()))?;
        files.push(name);
    }
    let file = BranchFile {
        schema_version: SCHEMA_VERSION,
        params: *p,
        m: cfg.m,
        sign: cfg.sign,
        omega_bifurcation: omega0,
        direction,
        solutions,
        last_good_amplitude,
        failure: failure.clone(),
        boundary_files: files,
    };
    write_json(&cfg.out.join("branch.json"), &serde_json::to_value(&file).map_err(Failure::numeric)?)?;
    for s in &file.solutions {
        println!("s = {}  omega = {}  residual = {:.3e}  iterations = {}", fmt(s.amplitude), fmt(s.omega), s.residual, s.iterations);
    }
    match failure {
        Some(f) => Err(Failure::numeric(format!("branch stopped: {f}"))),
        None => Ok(()),
    }
}

fn wavy_nodes(radius: f64, n: usize) -> Vec<PlanePoint> {
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            PlanePoint::polar(radius * (1.0 + 0.05 * (3.0 * t).cos()), t)
        })
        .collect()
}

fn read_boundary_csv(path: &Path) -> anyhow::Result<[Vec<PlanePoint>; 2]> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut layers: [Vec<(usize, PlanePoint)>; 2] = [Vec::new(), Vec::new()];
    for rec in rdr.deserialize() {
        let (layer, idx, x, y): (usize, usize, f64, f64) = rec?;
        if !(1..=2).contains(&layer) {
            return Err(anyhow!("layer {layer} in {} must be 1 or 2", path.display()));
        }
        layers[layer - 1].push((idx, PlanePoint::new(x, y)));
    }
    Ok(layers.map(|mut v| {
        v.sort_by_key(|e| e.0);
        v.into_iter().map(|e| e.1).collect()
    }))
}

/// Initial state and, for V-state input, its angular velocity.
fn initial_state(cfg: &RunConfig) -> std::result::Result<(LayerParams, EvolutionState, Option<f64>), Failure> {
    let n = cfg.n_nodes.unwrap_or(128);
    let p = cfg.params;
    let mk = |b1: PatchBoundary, b2: PatchBoundary| EvolutionState::new(b1, b2, 1.0).map_err(|e| Failure::config(e.to_string()));
    let boundary = |layer, nodes| PatchBoundary::new(layer, nodes).map_err(|e| Failure::config(e.to_string()));
    match cfg.init.as_str() {
        "discs" => Ok((p, EvolutionState::discs(&p, n, 1.0).map_err(|e| Failure::config(e.to_string()))?, Some(0.0))),
        "twin" => Ok((p, mk(boundary(1, wavy_nodes(p.b1, n))?, boundary(2, wavy_nodes(p.b1, n))?)?, None)),
        path if path.ends_with(".json") => {
            let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {path}: {e}")))?;
            let sol: VStateSolution = match serde_json::from_str::<VStateSolution>(&text) {
                Ok(s) => s,
                Err(_) => {
                    let branch: BranchFile = serde_json::from_str(&text).map_err(|e| Failure::config(format!("{path}: {e}")))?;
                    branch.solutions.into_iter().last().ok_or_else(|| Failure::config(format!("{path} holds no solutions")))?
                }
            };
            let sp = sol.params;
            let b1 = PatchBoundary::from_deformation(&sp, &sol.deformation, 1, n).map_err(|e| Failure::config(e.to_string()))?;
            let b2 = PatchBoundary::from_deformation(&sp, &sol.deformation, 2, n).map_err(|e| Failure::config(e.to_string()))?;
            Ok((sp, mk(b1, b2)?, Some(sol.omega)))
        }
        path if path.ends_with(".csv") => {
            let [a, b] = read_boundary_csv(Path::new(path)).map_err(|e| Failure::config(format!("{e:#}")))?;
            Ok((p, mk(boundary(1, a)?, boundary(2, b)?)?, None))
        }
        other => Err(Failure::config(format!("unknown init '{other}': expected discs, twin, a .json V-state or a .csv boundary"))),
    }
}

fn cmd_evolve(cfg: &RunConfig) -> CmdResult {
    let (p, mut state, rotation) = initial_state(cfg)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => dynamics::default_dt(&p, &state).map_err(Failure::numeric)?,
    };
    state.dt = dt;
    let ev = dynamics::evolve(&p, &state, cfg.t_end, dt, cfg.snapshot_every).map_err(Failure::numeric)?;
    create_out(&cfg.out)?;
    let mut files = Vec::new();
    for (i, s) in ev.snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:04}.csv");
        let rows = s.boundaries.iter().flat_map(|b| {
            b.nodes().iter().enumerate().map(move |(j, z)| vec![b.layer().to_string(), j.to_string(), fmt(z.x), fmt(z.y)])
        });
        write_csv(&cfg.out.join(&name), &["layer", "node_index", "x", "y"], rows)?;
        files.push(name);
    }
    let check = if cfg.check_rotation { rotation.or(Some(0.0)) } else { None };
    let diag = dynamics::diagnostics(&ev.snapshots, check).map_err(Failure::numeric)?;
    let times: Vec<f64> = ev.snapshots.iter().map(|s| s.time).collect();
    write_json(
        &cfg.out.join("manifest.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "params": p,
            "init": cfg.init,
            "dt": ev.snapshots[0].dt,
            "t_end": cfg.t_end,
            "steps": ev.steps,
            "n_nodes": state.n_nodes(),
            "rotation_omega": check,
            "times": times,
            "files": files,
            "diagnostics": diag,
            "failure": ev.failure.as_ref().map(|e| e.to_string()),
        }),
    )?;
    println!(
        "evolve: {} steps, area drift {:.3e}/{:.3e}, hausdorff drift {:.3e}, layer mismatch {:.3e}",
        ev.steps, diag.area_drift[0], diag.area_drift[1], diag.hausdorff_drift, diag.max_layer_mismatch
    );
    if let Some(r) = diag.rigid_rotation_residual {
        println!("rigid rotation residual {r:.6e}");
    }
    match ev.failure {
        Some(e) => Err(Failure::numeric(format!("evolution aborted: {e}"))),
        None => Ok(()),
    }
}

struct Check {
    suite: &'static str,
    name: &'static str,
    worst: f64,
    tol: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.worst <= self.tol
    }
}

fn verify_checks(suite: &str, perturb_gamma: f64) -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    let want = |s: &str| suite == "all" || suite == s;
    if want("bessel") {
        let mut w: f64 = 0.0;
        for &x in &[0.5, 2.0, 10.0] {
            for n in 0..=32 {
                w = w.max(bessel::wronskian_defect(n, x)?);
            }
        }
        out.push(Check { suite: "bessel", name: "wronskian I_nK_{n+1} + I_{n+1}K_n = 1/x", worst: w, tol: 1e-10 });
        let mut w: f64 = 0.0;
        for &x in &[0.3, 1.0, 4.0] {
            for n in 1..=20u32 {
                let lhs = bessel::bessel_i(n - 1, x)? - bessel::bessel_i(n + 1, x)?;
                let rhs = 2.0 * n as f64 / x * bessel::bessel_i(n, x)?;
                w = w.max((lhs - rhs).abs() / lhs.abs());
            }
        }
        out.push(Check { suite: "bessel", name: "recurrence I_{n-1} - I_{n+1} = (2n/x) I_n", worst: w, tol: 1e-12 });
    }
    if want("quadrature") {
        let mut w: f64 = 0.0;
        for &x in &[0.3, 0.7, 0.95] {
            for n in 1..=32u32 {
                w = w.max((quadrature::log_cosine_moment(x, n)? + x.powi(n as i32) / (2.0 * n as f64)).abs());
            }
        }
        out.push(Check { suite: "quadrature", name: "log moment = -x^n/(2n)", worst: w, tol: 1e-10 });
        let mut w: f64 = 0.0;
        for &(x, y) in &[(0.4, 1.0), (0.9, 1.1), (1.0, 1.0)] {
            for &l in &[0.5, 2.0] {
                for n in 1..=32u32 {
                    let exact = bessel::bessel_ik_product(n, l * x, l * y)?;
                    w = w.max(((quadrature::screened_cosine_moment(l, x, y, n)? - exact) / exact).abs());
                }
            }
        }
        out.push(Check { suite: "quadrature", name: "K0 moment = I_n(lx)K_n(ly)", worst: w, tol: 1e-8 });
    }
    if want("kernels") {
        let p = LayerParams::new(2.5, 0.8, 1.0, 0.6)?;
        let mut w: f64 = 0.0;
        for i in 1..100 {
            let z = PlanePoint::polar(0.03 * i as f64, 0.1 * i as f64);
            w = w.max((p.delta * kernels::kernel_g(&p, 1, 2, z)? - kernels::kernel_g(&p, 2, 1, z)?).abs());
        }
        out.push(Check { suite: "kernels", name: "delta G_12 = G_21", worst: w, tol: 1e-14 });
        let w = (kernels::kernel_q(&p, 1e-12) - kernels::kernel_q(&p, 1e-10)).abs();
        out.push(Check { suite: "kernels", name: "Q continuous at 0", worst: w, tol: 1e-8 });
    }
    if want("spectrum") {
        let (mut tr, mut det) = (0.0f64, 0.0f64);
        for &delta in &[0.5, 1.0, 3.0] {
            for &ratio in &[0.3, 0.6, 0.9] {
                let p = LayerParams::new(delta, 1.0, 1.0, ratio)?;
                for n in 1..=32u32 {
                    let (a, b) = spectrum::coeffs_ab(&p, n)?;
                    let g = spectrum::gamma_n(&p, n)?;
                    let (om, op) = spectrum::omega_pm_from(delta, a, b, g);
                    let (pm, pp) = spectrum::omega_pm_from(delta, a, b, g + perturb_gamma);
                    for (omega, s) in [(pm, -1.0), (pp, 1.0)] {
                        let mm = spectrum::matrix_from(delta, a, b, g + perturb_gamma, omega);
                        tr = tr.max((spectrum::trace(&mm) - s * (op - om)).abs());
                    }
                    for branch in [Branch::Minus, Branch::Plus] {
                        let (_, mm) = spectrum::matrix_at_branch(&p, n, branch)?;
                        let f = spectrum::frobenius(&mm);
                        det = det.max(spectrum::determinant(&mm).abs() / (f * f));
                    }
                }
            }
        }
        out.push(Check { suite: "spectrum", name: "trace M_n(Omega^±) = ±(Omega^+ - Omega^-)", worst: tr, tol: 1e-12 });
        out.push(Check { suite: "spectrum", name: "det M_n(Omega^±) / |M_n|^2", worst: det, tol: 1e-12 });
        let mut w: f64 = 0.0;
        for n in 2..=3u32 {
            let (x0, res) = spectrum::equal_radii_collision(n)?;
            w = w.max(res.abs());
            let mu = LayerParams::new(1.0, 1.0, 1.0, 1.0)?.mu();
            let eq = LayerParams::new(1.0, 1.0, x0 / mu, x0 / mu)?;
            w = w.max((spectrum::omega_pm(&eq, 1)?.1 - spectrum::omega_pm(&eq, n)?.0).abs() * 1e-2);
        }
        out.push(Check { suite: "spectrum", name: "equal-radii collisions", worst: w, tol: 1e-12 });
    }
    Ok(out)
}

fn cmd_verify(cfg: &RunConfig) -> CmdResult {
    let checks = verify_checks(&cfg.suite, cfg.perturb_gamma)?;
    let mut all = true;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for c in &checks {
        all &= c.passed();
        let _ = writeln!(lock, "{:<5} {:<11} {:<45} worst {:.3e} (tol {:.0e})", if c.passed() { "PASS" } else { "FAIL" }, c.suite, c.name, c.worst, c.tol);
    }
    if all {
        Ok(())
    } else {
        Err(Failure::numeric("verification failed"))
    }
}

/// Parses `args` (including the program name) and runs one subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let result = resolve(&cli.flags).and_then(|cfg| match cli.command {
        Command::Spectrum => cmd_spectrum(&cfg),
        Command::Collide => cmd_collide(&cfg),
        Command::Vstate => cmd_vstate(&cfg),
        Command::Evolve => cmd_evolve(&cfg),
        Command::Verify => cmd_verify(&cfg),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

//! Subcommand pipelines: each reads a validated [`RunConfig`] and writes its
//! artifacts plus a `manifest.json` into one directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::asymptotics::{CacheOptions, ResonantCache, ScatteringData, TailReport, TimeGrid};
use crate::bilinear::{Engine, ORACLE_MAX_N};
use crate::config::RunConfig;
use crate::constructor::{
    iterate_to_fixed_point_with, perturbation_rates, verify_scattering, ContractionLog, FixedPoint, ScatteringReport,
};
use crate::error::{Error, Result};
use crate::norms::{norm_x, norm_y, NormFamily, NormSnapshot, TimeSeries};
use crate::phase::fit_power_law;
use crate::snapshot;
use crate::solver::{diagnostics_csv, solve_forward_with};
use crate::spectral::SpectralField;
use crate::verify::{oracle_gap, run_suite, CheckResult, SuiteOptions, SuiteReport};

/// Start of the window for the `r_kg` monotonicity verdict.
pub const RESIDUAL_WINDOW_START: f64 = 10.0;

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, artifacts: &[String], extra: serde_json::Value) -> Result<()> {
    let m = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "threads": cfg.threads(),
        "artifacts": artifacts,
        "outcome": extra,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

fn prepare(cfg: &RunConfig, dir: &Path) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateSummary {
    pub snapshots: usize,
    pub steps: usize,
    pub t_end: f64,
}

/// Forward run from the recipe data at `t = 0`.
pub fn simulate(cfg: &RunConfig, dir: &Path) -> Result<SimulateSummary> {
    prepare(cfg, dir)?;
    let init = cfg.data.profile(cfg.grid()?, cfg.eps, cfg.seed, 0.0)?;
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    let mut last_good = None;
    let traj = match solve_forward_with(&init, &cfg.solver, &mut |s| last_good = Some(s.clone())) {
        Ok(t) => t,
        Err(e @ Error::BlowUp { .. }) => {
            let mut artifacts = Vec::new();
            if let Some(s) = last_good {
                snapshot::write(&snaps.join("wa_last_good.wkgs"), &s.wa, s.t)?;
                snapshot::write(&snaps.join("kg_last_good.wkgs"), &s.kg, s.t)?;
                artifacts = vec!["snapshots/wa_last_good.wkgs".into(), "snapshots/kg_last_good.wkgs".into()];
            }
            write_manifest(dir, "simulate", cfg, &artifacts, json!({"error": e.to_string()}))?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let mut artifacts = vec!["diagnostics.csv".to_string()];
    fs::write(dir.join("diagnostics.csv"), diagnostics_csv(&traj.diagnostics))?;
    for (i, s) in traj.snapshots.iter().enumerate() {
        for (name, f) in [("wa", &s.wa), ("kg", &s.kg)] {
            let rel = format!("snapshots/{name}_{i:04}.wkgs");
            snapshot::write(&dir.join(&rel), f, s.t)?;
            artifacts.push(rel);
        }
    }
    let summary = SimulateSummary { snapshots: traj.snapshots.len(), steps: traj.times.len() - 1, t_end: *traj.times.last().unwrap_or(&0.0) };
    write_manifest(dir, "simulate", cfg, &artifacts, serde_json::to_value(&summary)?)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct Ablation {
    pub t: f64,
    pub r_kg: f64,
    pub r_kg_uncorrected: f64,
    pub d_sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub data_y: [NormSnapshot; 2],
    pub perturbation_x: [NormSnapshot; 2],
    /// `sup_t X(G) / ε^{3/2}` for the wave and the KG component.
    pub constants: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstructReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_distance: f64,
    pub ratios: Vec<f64>,
    pub residuals: ScatteringReport,
    pub ablation: Ablation,
    pub x_constants: [f64; 2],
    pub tails: TailReport,
    pub quadrature_nodes: usize,
    pub cache_bytes: usize,
}

/// Everything a construction produces, kept in memory for callers that
/// continue with it.
pub struct Construction {
    pub data: ScatteringData,
    pub cache: ResonantCache,
    pub fixed_point: FixedPoint,
    pub report_nodes: Vec<usize>,
    pub report: ConstructReport,
    pub norms: NormReport,
}

fn geometric_nodes(cache: &ResonantCache) -> Result<Vec<usize>> {
    let geo = TimeGrid::geometric(cache.times.t_max())?;
    Ok(geo.times.iter().filter_map(|&t| cache.times.index_of(t)).collect())
}

fn nearest_node(cache: &ResonantCache, t: f64) -> usize {
    (0..cache.len()).min_by(|&a, &b| (cache.t(a) - t).abs().total_cmp(&(cache.t(b) - t).abs())).unwrap_or(0)
}

/// `X₁(G^wa)`, `X₂(G^kg)` over the report nodes and `Y` of the data.
pub fn construction_norms(c: &ConstructionParts, cfg: &RunConfig) -> Result<NormReport> {
    let ConstructionParts { data, cache, fixed_point, nodes } = *c;
    let engine = Engine::new(cache.grid, cfg.solver.dealiasing);
    let rates = perturbation_rates(&fixed_point.pair, data, cache, &engine, nodes)?;
    let times: Vec<f64> = nodes.iter().map(|&i| cache.t(i)).collect();
    let gw: Vec<SpectralField> = nodes.iter().map(|&i| fixed_point.pair.wa[i].clone()).collect();
    let gk: Vec<SpectralField> = nodes.iter().map(|&i| fixed_point.pair.kg[i].clone()).collect();
    let (dw, dk): (Vec<_>, Vec<_>) = rates.into_iter().unzip();
    let xw = norm_x(&TimeSeries { times: &times, values: &gw, dt_values: Some(&dw) }, NormFamily::X1, &cfg.norms)?;
    let xk = norm_x(&TimeSeries { times: &times, values: &gk, dt_values: Some(&dk) }, NormFamily::X2, &cfg.norms)?;
    let scale = data.eps.powf(1.5);
    let constants = if scale > 0.0 { [xw.value / scale, xk.value / scale] } else { [0.0, 0.0] };
    Ok(NormReport {
        data_y: [norm_y(&data.wa, NormFamily::Y1, &cfg.norms)?, norm_y(&data.kg, NormFamily::Y2, &cfg.norms)?],
        perturbation_x: [xw, xk],
        constants,
    })
}

/// Borrowed inputs of [`construction_norms`].
#[derive(Clone, Copy)]
pub struct ConstructionParts<'a> {
    pub data: &'a ScatteringData,
    pub cache: &'a ResonantCache,
    pub fixed_point: &'a FixedPoint,
    pub nodes: &'a [usize],
}

/// Cache, fixed point, residuals and norms, without touching the disk.
/// `on_log` receives the contraction log whether or not the iteration
/// succeeds.
pub fn build_construction(cfg: &RunConfig, on_log: &mut dyn FnMut(&ContractionLog)) -> Result<Construction> {
    cfg.validate()?;
    let (wa, kg) = cfg.data.build(cfg.grid()?, cfg.eps, cfg.seed)?;
    let data = ScatteringData::new(wa, kg, cfg.eps)?;
    let options = CacheOptions { nonresonant: cfg.cache.nonresonant, dealias: cfg.solver.dealiasing };
    let cache = ResonantCache::build(&data, TimeGrid::quadrature(cfg.t_max, cfg.cache.dt)?, options)?;
    let mut log = ContractionLog::default();
    let fp = iterate_to_fixed_point_with(&data, &cache, cfg.fixed_point_options(), &mut |r| log.rows.push(r.clone()));
    on_log(&log);
    let fp = fp?;
    let nodes = geometric_nodes(&cache)?;
    let residuals = verify_scattering(&fp.pair, &data, &cache, &nodes, RESIDUAL_WINDOW_START.min(cfg.t_max))?;
    let mid = nearest_node(&cache, 0.5 * cfg.t_max);
    let row = verify_scattering(&fp.pair, &data, &cache, &[mid], 0.0)?.rows.remove(0);
    let ablation = Ablation {
        t: row.t,
        r_kg: row.r_kg,
        r_kg_uncorrected: row.r_kg_uncorrected,
        d_sup: cache.d[mid].iter().fold(0.0, |m: f64, x| m.max(x.abs())),
    };
    let norms = construction_norms(&ConstructionParts { data: &data, cache: &cache, fixed_point: &fp, nodes: &nodes }, cfg)?;
    let report = ConstructReport {
        converged: fp.converged,
        iterations: fp.log.rows.len(),
        final_distance: fp.log.rows.last().map_or(0.0, |r| r.distance),
        ratios: fp.log.ratios(),
        residuals,
        ablation,
        x_constants: norms.constants,
        tails: cache.tails(),
        quadrature_nodes: cache.len(),
        cache_bytes: cache.stored_bytes(),
    };
    Ok(Construction { data, cache, fixed_point: fp, report_nodes: nodes, report, norms })
}

/// `construct`: a non-contracting or unconverged iteration still leaves
/// `contraction.csv` behind and is reported as [`Error::NonContraction`].
pub fn construct(cfg: &RunConfig, dir: &Path) -> Result<Construction> {
    prepare(cfg, dir)?;
    let log_path = dir.join("contraction.csv");
    let mut write_err = None;
    let built = build_construction(cfg, &mut |log| {
        if let Err(e) = fs::write(&log_path, log.to_csv()) {
            write_err = Some(e);
        }
    });
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let c = match built {
        Ok(c) => c,
        Err(Error::NonContraction(msg)) => {
            write_manifest(dir, "construct", cfg, &["contraction.csv".into()], json!({"error": msg}))?;
            return Err(Error::NonContraction(format!("{msg}; log at {}", log_path.display())));
        }
        Err(e) => return Err(e),
    };
    c.cache.export(&dir.join("cache"), &TimeGrid::geometric(cfg.t_max)?)?;
    fs::write(dir.join("residuals.csv"), c.report.residuals.to_csv())?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&c.report)? + "\n")?;
    fs::write(dir.join("norms.json"), serde_json::to_string_pretty(&c.norms)? + "\n")?;
    let artifacts: Vec<String> =
        ["contraction.csv", "residuals.csv", "report.json", "norms.json", "cache/cache_manifest.json"].map(String::from).to_vec();
    let outcome = json!({"converged": c.report.converged, "iterations": c.report.iterations, "final_distance": c.report.final_distance});
    write_manifest(dir, "construct", cfg, &artifacts, outcome)?;
    if !c.report.converged {
        return Err(Error::NonContraction(format!(
            "tolerance {:e} not reached in {} iterations (last distance {:e}); log at {}",
            cfg.fixed_point.tol,
            c.report.iterations,
            c.report.final_distance,
            log_path.display()
        )));
    }
    Ok(c)
}

pub fn verify(cfg: &RunConfig, dir: &Path, opts: SuiteOptions) -> Result<SuiteReport> {
    prepare(cfg, dir)?;
    let report = run_suite(cfg.grid()?, SuiteOptions { seed: cfg.seed, ..opts })?;
    fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(dir.join("verify.txt"), report.table())?;
    write_manifest(
        dir,
        "verify",
        cfg,
        &["verify.json".into(), "verify.txt".into()],
        json!({"all_pass": report.all_pass, "broken_bump": opts.broken_bump}),
    )?;
    Ok(report)
}

/// Seeds used by `oracle`.
pub const ORACLE_SEEDS: u64 = 20;

pub fn oracle(cfg: &RunConfig, dir: &Path) -> Result<CheckResult> {
    cfg.validate()?;
    let g = cfg.grid()?;
    if g.n() > ORACLE_MAX_N {
        return Err(Error::CostGuard(format!("{}³ exceeds {ORACLE_MAX_N}³", g.n())));
    }
    fs::create_dir_all(dir)?;
    let gap = oracle_gap(g, ORACLE_SEEDS, 0.7)?;
    let check = CheckResult {
        name: "oracle_equivalence".into(),
        pass: gap <= 1e-12,
        value: gap,
        threshold: 1e-12,
        detail: format!("{}³, 8 cases x {ORACLE_SEEDS} seeds", g.n()),
    };
    fs::write(dir.join("oracle.json"), serde_json::to_string_pretty(&check)? + "\n")?;
    write_manifest(dir, "oracle", cfg, &["oracle.json".into()], json!({"pass": check.pass}))?;
    Ok(check)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Decay,
    Residuals,
    Contraction,
    Shells,
}

fn read_artifact(dir: &Path, name: &str) -> Result<(PathBuf, String)> {
    let p = dir.join(name);
    let text = fs::read_to_string(&p).map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
    Ok((p, text))
}

fn parse_rows(path: &Path, text: &str, columns: usize) -> Result<Vec<Vec<String>>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cells: Vec<String> = l.split(',').map(str::to_string).collect();
            if cells.len() == columns {
                Ok(cells)
            } else {
                Err(Error::Format(format!("{}: expected {columns} columns in {l:?}", path.display())))
            }
        })
        .collect()
}

fn number(path: &Path, s: &str) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| Error::Format(format!("{}: {s:?} is not a number", path.display())))
}

/// Tidy `x,series,value` rows from diagnostics whose name satisfies `keep`.
fn diagnostics_series(dir: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<(f64, String, f64)>> {
    let (p, text) = read_artifact(dir, "diagnostics.csv")?;
    let mut out = Vec::new();
    for r in parse_rows(&p, &text, 3)? {
        if keep(&r[1]) {
            out.push((number(&p, &r[0])?, r[1].clone(), number(&p, &r[2])?));
        }
    }
    Ok(out)
}

/// Times used by the decay fit in `plotdata decay`.
pub const DECAY_FIT_FROM: f64 = 5.0;

pub fn plotdata(dir: &Path, which: PlotKind) -> Result<String> {
    let mut s = String::from("x,series,value\n");
    match which {
        PlotKind::Decay => {
            let rows = diagnostics_series(dir, |n| n == "sup_v" || n == "sup_u")?;
            for (t, name, v) in &rows {
                s += &format!("{t},{name},{v:e}\n");
            }
            for name in ["sup_v", "sup_u"] {
                let (ts, ys): (Vec<f64>, Vec<f64>) =
                    rows.iter().filter(|r| r.1 == name && r.0 >= DECAY_FIT_FROM && r.2 > 0.0).map(|r| (r.0, r.2)).unzip();
                let exponent = if ts.len() >= 2 { -fit_power_law(&ts, &ys).0 } else { f64::NAN };
                s += &format!("fit,exponent_{name},{exponent}\n");
            }
        }
        PlotKind::Shells => {
            for (t, name, v) in diagnostics_series(dir, |n| n.starts_with('P'))? {
                s += &format!("{t},{name},{v:e}\n");
            }
        }
        PlotKind::Residuals => {
            let (p, text) = read_artifact(dir, "residuals.csv")?;
            for r in parse_rows(&p, &text, 4)? {
                for (c, name) in ["r_wa", "r_kg", "r_kg_uncorrected"].iter().enumerate() {
                    s += &format!("{},{name},{:e}\n", r[0], number(&p, &r[c + 1])?);
                }
            }
        }
        PlotKind::Contraction => {
            let (p, text) = read_artifact(dir, "contraction.csv")?;
            for r in parse_rows(&p, &text, 7)? {
                s += &format!("{},distance,{:e}\n", r[0], number(&p, &r[1])?);
                if !r[4].is_empty() {
                    s += &format!("{},ratio,{:e}\n", r[0], number(&p, &r[4])?);
                }
            }
        }
    }
    Ok(s)
}

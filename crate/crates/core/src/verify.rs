//! Property suite behind `wkg verify` and `wkg oracle`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bilinear::{eval_bilinear_oracle, BilinearJob, Engine, ORACLE_MAX_N};
use crate::asymptotics::{ResonantCache, TimeGrid};
use crate::error::{Error, Result};
use crate::fields::ProfileState;
use crate::lp::{canonical_bump, resolvable_window, CutoffProfile, Projector};
use crate::phase::{check_phase_lower_bound, fit_power_law, ALL_CASES, STATIONARY_CASES};
use crate::solver::{solve_forward, SolverConfig};
use crate::spectral::{inverse_transform, make_grid, propagate, DispersionKind, FieldTag, FourierGrid, SpectralField, C64};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), pass: value <= threshold, value, threshold, detail }
    }

    fn at_least(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), pass: value >= threshold, value, threshold, detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl SuiteReport {
    fn new(checks: Vec<CheckResult>) -> Self {
        let all_pass = checks.iter().all(|c| c.pass);
        Self { checks, all_pass }
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<28} {:<5} {:>12} {:>12}  detail\n", "check", "", "value", "threshold");
        for c in &self.checks {
            s += &format!(
                "{:<28} {:<5} {:>12.4e} {:>12.4e}  {}\n",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.value,
                c.threshold,
                c.detail
            );
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    /// Replaces the canonical bump by one that breaks the partition of unity.
    pub broken_bump: bool,
    pub phase_samples: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { broken_bump: false, phase_samples: 100_000, seed: 7 }
    }
}

fn broken_bump(z: f64) -> f64 {
    0.9 * canonical_bump(z)
}

pub fn random_field(grid: FourierGrid, seed: u64, tag: FieldTag) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..grid.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    SpectralField::from_values(grid, tag, v).expect("length matches the grid")
}

/// `Σ_k P_k f = f` on the resolvable band and `Σ_j Q_jk f = P_k f`.
pub fn lp_partition_checks(profile: CutoffProfile, seed: u64) -> Result<Vec<CheckResult>> {
    let p = Projector::new(profile);
    let g = make_grid(32, 16.0 * std::f64::consts::PI)?;
    let (lo, hi) = resolvable_window(&g);
    let f = random_field(g, seed, FieldTag::Scalar);
    let (a, b) = ((lo as f64).exp2(), (hi as f64).exp2());
    let band = f.multiply_radial(|r| if r >= a && r <= b { 1.0 } else { 0.0 });
    let sum = p.sum_shells(&band, lo, hi);
    let e1 = sum.l2_dist(&band) / band.l2_norm();
    let mut e2: f64 = 0.0;
    for k in lo..=hi {
        let pk = p.shell(&f, k);
        let mut acc = SpectralField::zeros(g, FieldTag::Scalar);
        for j in p.j_indices(&g, k) {
            acc.add_assign(&p.project_q_jk(&f, j, k)?);
        }
        e2 = e2.max(acc.l2_dist(&pk) / pk.l2_norm());
    }
    Ok(vec![
        CheckResult::at_most("lp_shell_partition", e1, 1e-12, format!("k in [{lo}, {hi}], 32³")),
        CheckResult::at_most("lp_spatial_partition", e2, 1e-10, "Σ_j Q_jk = P_k".into()),
    ])
}

pub fn phase_checks(samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut worst = f64::INFINITY;
    let mut at = String::new();
    for (eq, i1, i2) in STATIONARY_CASES {
        for b in [1.0, 2.0, 4.0] {
            let r = check_phase_lower_bound(eq, i1, i2, b, samples, seed)?;
            if r.min_ratio < worst {
                worst = r.min_ratio;
                at = format!("{} b={b}", r.case);
            }
        }
    }
    Ok(vec![CheckResult::at_least("phase_lower_bound", worst, 1.0, format!("{samples} samples, min at {at}"))])
}

/// Largest relative `L²` gap between the fast and the literal bilinear sums.
pub fn oracle_gap(grid: FourierGrid, seeds: u64, t: f64) -> Result<f64> {
    let engine = Engine::new(grid, false);
    let mut worst: f64 = 0.0;
    for s in 0..seeds {
        let f = random_field(grid, 2 * s + 1, FieldTag::Kg);
        let h = random_field(grid, 2 * s + 2, FieldTag::Wa);
        for (eq, i1, i2) in ALL_CASES {
            let job = BilinearJob::new(eq, i1, i2, &f, &h, t);
            let fast = engine.eval_bilinear(&job)?;
            let slow = eval_bilinear_oracle(&job)?;
            worst = worst.max(fast.l2_dist(&slow) / slow.l2_norm());
        }
    }
    Ok(worst)
}

/// Gaussian profile `s³e^{-s²|ξ|²/2}`.
pub fn gaussian(grid: FourierGrid, width: f64, tag: FieldTag) -> SpectralField {
    SpectralField::from_fn(grid, tag, |x| C64::new(width.powi(3) * (-(width * width) * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp(), 0.0))
}

/// Fitted exponent `α` of `sup_x |e^{-itΛ}V| ~ c t^α` over the times `ts`.
pub fn free_decay_exponent(profile: &SpectralField, kind: DispersionKind, ts: &[f64]) -> f64 {
    let sups: Vec<f64> = ts
        .iter()
        .map(|&t| inverse_transform(&propagate(profile, kind, -t)).iter().fold(0.0, |m: f64, z| m.max(z.norm())))
        .collect();
    -fit_power_law(ts, &sups).0
}

pub fn log_times(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| a * (b / a).powf(i as f64 / (m - 1) as f64)).collect()
}

pub fn decay_checks() -> Result<Vec<CheckResult>> {
    let g = make_grid(64, 32.0 * std::f64::consts::PI)?;
    let ts = log_times(5.0, 50.0, 24);
    let kg = free_decay_exponent(&gaussian(g, 1.2, FieldTag::Kg), DispersionKind::KG, &ts);
    let wa = free_decay_exponent(&gaussian(g, 1.2, FieldTag::Wa), DispersionKind::WA, &ts);
    Ok(vec![
        CheckResult::at_most("decay_kg_exponent", (kg + 1.5).abs(), 0.15, format!("fitted {kg:.4}, target -1.5")),
        CheckResult::at_most("decay_wave_exponent", (wa + 1.0).abs(), 0.15, format!("fitted {wa:.4}, target -1.0")),
    ])
}

pub fn linear_constancy_check() -> Result<CheckResult> {
    let g = make_grid(16, 8.0 * std::f64::consts::PI)?;
    let init = ProfileState { t: 0.0, wa: gaussian(g, 1.5, FieldTag::Wa), kg: gaussian(g, 1.5, FieldTag::Kg) };
    let cfg = SolverConfig { dt: 0.1, t_end: 10.0, nonlinearity: 0.0, snapshot_stride: 10, ..Default::default() };
    let traj = solve_forward(&init, &cfg)?;
    let n0 = (init.wa.l2_norm().powi(2) + init.kg.l2_norm().powi(2)).sqrt();
    let worst = traj
        .snapshots
        .iter()
        .map(|s| (s.wa.l2_dist(&init.wa).powi(2) + s.kg.l2_dist(&init.kg).powi(2)).sqrt() / n0)
        .fold(0.0, f64::max);
    Ok(CheckResult::at_most("linear_profile_constancy", worst, 1e-10, "t in [0, 10]".into()))
}

/// Self-convergence order of the stepper on a nonlinear 16³ run to `t = 1`,
/// from the step sizes `0.1, 0.05, 0.025`.
pub fn stepper_order() -> Result<f64> {
    let g = make_grid(16, 4.0 * std::f64::consts::PI)?;
    let kg = gaussian(g, 1.2, FieldTag::Kg);
    let init = ProfileState { t: 0.0, wa: kg.scale(C64::new(0.5, 0.0)).with_tag(FieldTag::Wa), kg };
    let run = |dt: f64| -> Result<ProfileState> {
        let cfg = SolverConfig { t_end: 1.0, dt, snapshot_stride: 1000, ..Default::default() };
        Ok(solve_forward(&init, &cfg)?.snapshots.pop().expect("final snapshot"))
    };
    let (a, b, c) = (run(0.1)?, run(0.05)?, run(0.025)?);
    let dist = |x: &ProfileState, y: &ProfileState| (x.wa.l2_dist(&y.wa).powi(2) + x.kg.l2_dist(&y.kg).powi(2)).sqrt();
    Ok((dist(&a, &b) / dist(&b, &c)).log2())
}

/// `max_{ξ≠0} |D∞(t,ξ)| / (|ξ| ln²⟨t⟩)` at the cache nodes in `[t_lo, t_hi]`.
pub fn phase_envelope(cache: &ResonantCache, t_lo: f64, t_hi: f64) -> Vec<(f64, f64)> {
    let g = cache.grid;
    (0..cache.len())
        .filter(|&i| cache.t(i) >= t_lo && cache.t(i) <= t_hi)
        .map(|i| {
            let t = cache.t(i);
            let l = (1.0 + t * t).sqrt().ln().powi(2);
            let m = (1..g.len()).map(|k| cache.d[i][k].abs() / (g.xi_norm(k) * l)).fold(0.0, f64::max);
            (t, m)
        })
        .collect()
}

/// Fitted exponent of `‖𝔟∞(t)‖` over the geometric nodes in `[t_lo, t_hi]`.
pub fn nonresonant_decay_exponent(cache: &ResonantCache, t_lo: f64, t_hi: f64) -> Result<f64> {
    let geo = TimeGrid::geometric(cache.times.t_max())?;
    let (ts, ys): (Vec<f64>, Vec<f64>) = geo
        .times
        .iter()
        .filter(|&&t| t >= t_lo && t <= t_hi)
        .filter_map(|&t| cache.times.index_of(t).map(|i| (t, cache.b[i].l2_norm())))
        .filter(|&(_, y)| y > 0.0)
        .unzip();
    if ts.len() < 2 {
        return Err(Error::Input(format!("fewer than two nonzero samples of 𝔟∞ in [{t_lo}, {t_hi}]")));
    }
    Ok(-fit_power_law(&ts, &ys).0)
}

/// Largest relative shift `‖𝔅_{2T}(t) - 𝔅_T(t)‖ / ‖𝔅_{2T}(t)‖` over the nodes
/// `ts` shared by the two caches.
pub fn horizon_shift(short: &ResonantCache, long: &ResonantCache, ts: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in ts {
        let (Some(i), Some(j)) = (short.times.index_of(t), long.times.index_of(t)) else {
            return Err(Error::Domain(format!("t = {t} is not a node of both caches")));
        };
        let n = long.big_b[j].l2_norm();
        if n > 0.0 {
            worst = worst.max(long.big_b[j].l2_dist(&short.big_b[i]) / n);
        }
    }
    Ok(worst)
}

/// The full suite; the oracle section runs only for grids of at most
/// `ORACLE_MAX_N³` points.
pub fn run_suite(grid: FourierGrid, opts: SuiteOptions) -> Result<SuiteReport> {
    let profile = if opts.broken_bump { CutoffProfile::new(broken_bump) } else { CutoffProfile::default() };
    let mut checks = lp_partition_checks(profile, opts.seed)?;
    checks.extend(phase_checks(opts.phase_samples, opts.seed)?);
    if grid.n() <= ORACLE_MAX_N {
        let gap = oracle_gap(grid, 3, 0.7)?;
        checks.push(CheckResult::at_most("oracle_equivalence", gap, 1e-12, format!("{}³, 8 cases x 3 seeds", grid.n())));
    } else {
        log::info!("oracle section skipped on {}³", grid.n());
    }
    checks.push(linear_constancy_check()?);
    checks.push(CheckResult::at_least("stepper_order", stepper_order()?, 3.7, "16³ nonlinear, t in [0, 1]".into()));
    checks.extend(decay_checks()?);
    Ok(SuiteReport::new(checks))
}

//! Forward integration of the profile equations `∂_t V = rhs(V, t)` with
//! classical RK4. The linear flow is factored out of the unknowns, so the
//! step size is limited only by the oscillation of the nonlinear terms.

use serde::{Deserialize, Serialize};

use crate::bilinear::Engine;
use crate::error::{Error, Result};
use crate::fields::{from_profile, recover, ProfileState};
use crate::lp::{resolvable_window, Projector};
use crate::spectral::{FourierGrid, SpectralField, C64};

/// Any stored value above this halts the run.
pub const BLOWUP_THRESHOLD: f64 = 1e8;
pub const MAX_DT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rk4IntegratingFactor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub dealiasing: bool,
    pub scheme: Scheme,
    /// Multiplies both quadratic terms; 0 gives the free flow.
    pub nonlinearity: f64,
    /// Sobolev exponents reported by the diagnostics.
    pub sobolev: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            t_end: 50.0,
            snapshot_stride: 20,
            dealiasing: true,
            scheme: Scheme::Rk4IntegratingFactor,
            nonlinearity: 1.0,
            sobolev: vec![0.0, 1.0, 2.0],
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::Config(format!("dt = {} must lie in (0, {MAX_DT}]", self.dt)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::Config("t_end must be finite".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be positive".into()));
        }
        if !self.nonlinearity.is_finite() {
            return Err(Error::Config("nonlinearity scale must be finite".into()));
        }
        Ok(())
    }
}

/// Per-time diagnostics of a profile state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    /// `sup |U^wa|`, `sup |U^kg|` of the complex normalized fields.
    pub sup_uwa: f64,
    pub sup_ukg: f64,
    pub l2_wa: f64,
    pub l2_kg: f64,
    /// `(s, ‖U^wa‖_{H^s}, ‖U^kg‖_{H^s})`
    pub sobolev: Vec<(f64, f64, f64)>,
    /// `(k, ‖P_k V^wa‖, ‖P_k V^kg‖)` over the resolvable window.
    pub shells: Vec<(i32, f64, f64)>,
}

impl Diagnostics {
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut r = vec![
            ("sup_u".to_string(), self.sup_u),
            ("sup_v".to_string(), self.sup_v),
            ("sup_Uwa".to_string(), self.sup_uwa),
            ("sup_Ukg".to_string(), self.sup_ukg),
            ("l2_wa".to_string(), self.l2_wa),
            ("l2_kg".to_string(), self.l2_kg),
        ];
        for &(s, a, b) in &self.sobolev {
            r.push((format!("H{s}_wa"), a));
            r.push((format!("H{s}_kg"), b));
        }
        for &(k, a, b) in &self.shells {
            r.push((format!("P{k}_wa"), a));
            r.push((format!("P{k}_kg"), b));
        }
        r
    }
}

fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let g = f.grid;
    let sum: f64 = f.values.iter().enumerate().map(|(i, v)| (1.0 + g.xi_norm(i).powi(2)).powf(s) * v.norm_sqr()).sum();
    (sum * g.spectral_cell()).sqrt()
}

pub fn diagnostics(state: &ProfileState, sobolev: &[f64]) -> Result<Diagnostics> {
    let n = from_profile(state);
    let phys = recover(&n)?;
    let sup = |a: &[f64]| a.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let proj = Projector::default();
    let (lo, hi) = resolvable_window(&state.grid());
    let mut shells = Vec::new();
    for k in lo..=hi {
        shells.push((k, proj.project_p_k(&state.wa, k)?.l2_norm(), proj.project_p_k(&state.kg, k)?.l2_norm()));
    }
    Ok(Diagnostics {
        t: state.t,
        sup_u: sup(&phys.u),
        sup_v: sup(&phys.v),
        sup_uwa: crate::spectral::inverse_transform(&n.wa).iter().fold(0.0, |m: f64, z| m.max(z.norm())),
        sup_ukg: crate::spectral::inverse_transform(&n.kg).iter().fold(0.0, |m: f64, z| m.max(z.norm())),
        l2_wa: state.wa.l2_norm(),
        l2_kg: state.kg.l2_norm(),
        sobolev: sobolev.iter().map(|&s| (s, sobolev_norm(&n.wa, s), sobolev_norm(&n.kg, s))).collect(),
        shells,
    })
}

/// Long-format CSV `t,name,value`.
pub fn diagnostics_csv(diags: &[Diagnostics]) -> String {
    let mut out = String::from("t,name,value\n");
    for d in diags {
        for (name, v) in d.rows() {
            out.push_str(&format!("{},{},{:.12e}\n", d.t, name, v));
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Stepper {
    pub engine: Engine,
    pub nonlinearity: f64,
}

impl Stepper {
    pub fn new(grid: FourierGrid, dealias: bool, nonlinearity: f64) -> Self {
        Self { engine: Engine::new(grid, dealias), nonlinearity }
    }

    pub fn rhs(&self, wa: &SpectralField, kg: &SpectralField, t: f64) -> Result<(SpectralField, SpectralField)> {
        if self.nonlinearity == 0.0 {
            let g = wa.grid;
            return Ok((SpectralField::zeros(g, wa.tag), SpectralField::zeros(g, kg.tag)));
        }
        let (a, b) = self.engine.rhs_profiles(wa, kg, t)?;
        if self.nonlinearity == 1.0 {
            return Ok((a, b));
        }
        let c = C64::new(self.nonlinearity, 0.0);
        Ok((a.scale(c), b.scale(c)))
    }

    pub fn step(&self, s: &ProfileState, dt: f64) -> Result<ProfileState> {
        let t = s.t;
        let h = C64::new(dt, 0.0);
        let half = C64::new(dt / 2.0, 0.0);
        let shifted = |a: &SpectralField, c: C64, d: &SpectralField| {
            let mut r = a.clone();
            r.axpy(c, d);
            r
        };
        let (k1w, k1k) = self.rhs(&s.wa, &s.kg, t)?;
        let (k2w, k2k) = self.rhs(&shifted(&s.wa, half, &k1w), &shifted(&s.kg, half, &k1k), t + dt / 2.0)?;
        let (k3w, k3k) = self.rhs(&shifted(&s.wa, half, &k2w), &shifted(&s.kg, half, &k2k), t + dt / 2.0)?;
        let (k4w, k4k) = self.rhs(&shifted(&s.wa, h, &k3w), &shifted(&s.kg, h, &k3k), t + dt)?;
        let combine = |v: &SpectralField, a: &SpectralField, b: &SpectralField, c: &SpectralField, d: &SpectralField| {
            let mut r = v.clone();
            for i in 0..r.values.len() {
                r.values[i] += dt / 6.0 * (a.values[i] + 2.0 * b.values[i] + 2.0 * c.values[i] + d.values[i]);
            }
            r
        };
        Ok(ProfileState {
            t: t + dt,
            wa: combine(&s.wa, &k1w, &k2w, &k3w, &k4w),
            kg: combine(&s.kg, &k1k, &k2k, &k3k, &k4k),
        })
    }
}

fn blown_up(s: &ProfileState) -> bool {
    s.wa.values.iter().chain(&s.kg.values).any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() > BLOWUP_THRESHOLD)
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    pub snapshots: Vec<ProfileState>,
}

pub fn solve_forward(init: &ProfileState, cfg: &SolverConfig) -> Result<Trajectory> {
    solve_forward_with(init, cfg, &mut |_| {})
}

/// As [`solve_forward`]; `on_blowup` receives the last good state before the
/// blow-up error is returned.
pub fn solve_forward_with(init: &ProfileState, cfg: &SolverConfig, on_blowup: &mut dyn FnMut(&ProfileState)) -> Result<Trajectory> {
    cfg.validate()?;
    if !(cfg.t_end > init.t) {
        return Err(Error::Config(format!("t_end {} must exceed the initial time {}", cfg.t_end, init.t)));
    }
    if blown_up(init) {
        on_blowup(init);
        return Err(Error::BlowUp { t: init.t, last_good_t: init.t });
    }
    let stepper = Stepper::new(init.grid(), cfg.dealiasing, cfg.nonlinearity);
    let mut traj = Trajectory::default();
    let mut s = init.clone();
    traj.times.push(s.t);
    traj.diagnostics.push(diagnostics(&s, &cfg.sobolev)?);
    traj.snapshots.push(s.clone());
    let mut k = 0usize;
    // stop when the remaining interval is a rounding-level sliver
    while cfg.t_end - s.t > 1e-9 * cfg.dt {
        let dt = cfg.dt.min(cfg.t_end - s.t);
        let next = stepper.step(&s, dt)?;
        if blown_up(&next) {
            on_blowup(&s);
            return Err(Error::BlowUp { t: next.t, last_good_t: s.t });
        }
        s = next;
        k += 1;
        traj.times.push(s.t);
        traj.diagnostics.push(diagnostics(&s, &cfg.sobolev)?);
        let last = cfg.t_end - s.t <= 1e-9 * cfg.dt;
        if k % cfg.snapshot_stride == 0 || last {
            traj.snapshots.push(s.clone());
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, FieldTag};

    fn gaussian_state(g: FourierGrid, eps: f64, width: f64) -> ProfileState {
        let f = SpectralField::from_fn(g, FieldTag::Kg, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            C64::new(eps * width.powi(3) * (-width * width * r2 / 2.0).exp(), 0.0)
        });
        ProfileState { t: 0.0, wa: f.scale(C64::new(0.5, 0.0)).with_tag(FieldTag::Wa), kg: f }
    }

    #[test]
    fn config_guard() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.dt = 0.2;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.dt = 0.05;
        c.snapshot_stride = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = make_grid(8, 8.0).unwrap();
        let st = Stepper::new(g, true, 1.0);
        let mut s = ProfileState::zeros(g, 0.0);
        for _ in 0..3 {
            s = st.step(&s, 0.1).unwrap();
        }
        assert_eq!(s.wa.sup_norm() + s.kg.sup_norm(), 0.0);
        assert!((s.t - 0.3).abs() < 1e-15);
    }

    #[test]
    fn free_flow_keeps_profiles_and_diagnostics_constant() {
        let g = make_grid(16, 16.0).unwrap();
        let init = gaussian_state(g, 0.5, 1.0);
        let cfg = SolverConfig { t_end: 1.0, dt: 0.1, nonlinearity: 0.0, snapshot_stride: 5, ..Default::default() };
        let tr = solve_forward(&init, &cfg).unwrap();
        let last = tr.snapshots.last().unwrap();
        assert_eq!(last.wa, init.wa);
        assert_eq!(last.kg, init.kg);
        let d0 = &tr.diagnostics[0];
        for d in &tr.diagnostics {
            assert_eq!(d.l2_kg, d0.l2_kg);
            assert!((d.sobolev[2].2 - d0.sobolev[2].2).abs() < 1e-13 * d0.sobolev[2].2);
        }
        assert_eq!(tr.snapshots.len(), 3);
    }

    #[test]
    fn single_mode_l2_measure() {
        // one lattice value A has L² norm A·dξ^{3/2}
        let g = make_grid(8, 4.0).unwrap();
        let mut s = ProfileState::zeros(g, 0.0);
        s.kg.values[g.index_of([1, 0, 0])] = C64::new(0.0, 3.0);
        let d = diagnostics(&s, &[0.0]).unwrap();
        assert!((d.l2_kg - 3.0 * g.spectral_cell().sqrt()).abs() < 1e-14);
        let z = diagnostics(&ProfileState::zeros(g, 0.0), &[0.0, 1.0]).unwrap();
        assert!(z.rows().iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn rk4_self_convergence_order() {
        let g = make_grid(16, 4.0 * std::f64::consts::PI).unwrap();
        let init = gaussian_state(g, 1.0, 1.2);
        let run = |dt: f64| {
            let cfg = SolverConfig { t_end: 1.0, dt, snapshot_stride: 1000, ..Default::default() };
            let tr = solve_forward(&init, &cfg).unwrap();
            tr.snapshots.last().unwrap().clone()
        };
        let (a, b, c) = (run(0.1), run(0.05), run(0.025));
        let dist = |x: &ProfileState, y: &ProfileState| (x.wa.l2_dist(&y.wa).powi(2) + x.kg.l2_dist(&y.kg).powi(2)).sqrt();
        let order = (dist(&a, &b) / dist(&b, &c)).log2();
        assert!(dist(&b, &c) > 1e-12, "nonlinear effect too weak to measure");
        assert!(order >= 3.7, "observed order {order}");
    }

    #[test]
    fn restart_from_snapshot_is_bitwise() {
        let g = make_grid(8, 8.0).unwrap();
        let init = gaussian_state(g, 0.3, 1.0);
        let cfg = SolverConfig { t_end: 1.0, dt: 0.1, snapshot_stride: 4, ..Default::default() };
        let full = solve_forward(&init, &cfg).unwrap();
        let mid = full.snapshots[1].clone();
        let bytes = crate::snapshot::encode(&mid.kg, mid.t);
        let (kg, t) = crate::snapshot::decode(&bytes, FieldTag::Kg).unwrap();
        let (wa, _) = crate::snapshot::decode(&crate::snapshot::encode(&mid.wa, mid.t), FieldTag::Wa).unwrap();
        let rest = solve_forward(&ProfileState { t, wa, kg }, &cfg).unwrap();
        assert_eq!(rest.snapshots.last().unwrap(), full.snapshots.last().unwrap());
    }

    #[test]
    fn blow_up_is_reported_with_last_good_time() {
        let g = make_grid(8, 8.0).unwrap();
        let init = gaussian_state(g, 1e5, 1.0);
        let cfg = SolverConfig { t_end: 50.0, dt: 0.1, ..Default::default() };
        let mut dumped = None;
        let r = solve_forward_with(&init, &cfg, &mut |s| dumped = Some(s.t));
        match r {
            Err(Error::BlowUp { t, last_good_t }) => {
                assert!(t > last_good_t);
                assert_eq!(dumped, Some(last_good_t));
            }
            other => panic!("expected blow-up, got {:?}", other.map(|t| t.times.len())),
        }
    }

    #[test]
    fn recovered_fields_stay_real() {
        let g = make_grid(16, 12.0).unwrap();
        let init = gaussian_state(g, 0.5, 1.0);
        let st = Stepper::new(g, true, 1.0);
        let mut s = init;
        for _ in 0..10 {
            s = st.step(&s, 0.1).unwrap();
        }
        let (_, residue) = crate::fields::recover_checked(&from_profile(&s)).unwrap();
        assert!(residue < 1e-10);
    }
}

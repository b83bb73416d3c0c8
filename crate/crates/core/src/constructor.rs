//! Backward construction of the solution with prescribed asymptotics.
//!
//! The unknown is the perturbation `(G^wa, G^kg)` on the cache nodes, with
//!
//! ```text
//! V^wa = G^wa + V^wa_∞ + 𝓗∞,   V^kg = G^kg + e^{iD∞}V^kg_∞ + 𝔅∞
//! ```
//!
//! and the map `𝒯` integrates the profile equations backward from `T`,
//! where `G` vanishes.

use serde::Serialize;

use crate::asymptotics::{ResonantCache, ScatteringData};
use crate::bilinear::Engine;
use crate::error::{Error, Result};
use crate::fields::ProfileState;
use crate::spectral::{FieldTag, SpectralField, C64};

/// `Ĝ^wa`, `Ĝ^kg` at every cache node.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationPair {
    pub wa: Vec<SpectralField>,
    pub kg: Vec<SpectralField>,
}

impl PerturbationPair {
    pub fn zeros(cache: &ResonantCache) -> Self {
        let n = cache.len();
        Self {
            wa: vec![SpectralField::zeros(cache.grid, FieldTag::Wa); n],
            kg: vec![SpectralField::zeros(cache.grid, FieldTag::Kg); n],
        }
    }

    pub fn len(&self) -> usize {
        self.wa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wa.is_empty()
    }

    /// `(sup_t ‖G^wa‖, sup_t ‖G^kg‖)`
    pub fn sup_norms(&self) -> (f64, f64) {
        let sup = |v: &[SpectralField]| v.iter().map(|f| f.l2_norm()).fold(0.0, f64::max);
        (sup(&self.wa), sup(&self.kg))
    }

    /// Largest parity defect over both components and all nodes.
    pub fn parity_defect(&self) -> f64 {
        self.wa.iter().chain(&self.kg).map(|f| f.parity_defect()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionRow {
    pub iteration: usize,
    /// `max(sup_t ‖ΔG^wa‖, sup_t ‖ΔG^kg‖)` against the previous iterate.
    pub distance: f64,
    pub distance_wa: f64,
    pub distance_kg: f64,
    pub ratio: Option<f64>,
    pub norm_wa: f64,
    pub norm_kg: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ContractionLog {
    pub rows: Vec<ContractionRow>,
}

impl ContractionLog {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    /// `iter,distance,distance_wa,distance_kg,ratio,norm_wa,norm_kg`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,distance,distance_wa,distance_kg,ratio,norm_wa,norm_kg\n");
        for r in &self.rows {
            let ratio = r.ratio.map(|x| format!("{x:e}")).unwrap_or_default();
            s += &format!(
                "{},{:e},{:e},{:e},{},{:e},{:e}\n",
                r.iteration, r.distance, r.distance_wa, r.distance_kg, ratio, r.norm_wa, r.norm_kg
            );
        }
        s
    }
}

fn check_shapes(g: &PerturbationPair, data: &ScatteringData, cache: &ResonantCache) -> Result<()> {
    data.grid().check_same(&cache.grid)?;
    if g.wa.len() != cache.len() || g.kg.len() != cache.len() {
        return Err(Error::Config(format!("perturbation has {} nodes, cache has {}", g.wa.len(), cache.len())));
    }
    for f in g.wa.iter().chain(&g.kg) {
        f.grid.check_same(&cache.grid)?;
    }
    Ok(())
}

/// `V` at node `i` for the perturbation values `(gw, gk)`.
fn assemble(gw: &SpectralField, gk: &SpectralField, data: &ScatteringData, cache: &ResonantCache, i: usize) -> ProfileState {
    let mut wa = gw.add(&data.wa);
    wa.add_assign(&cache.hcal(i));
    let mut kg = gk.add(&cache.corrected_kg(data, i));
    kg.add_assign(&cache.big_b[i]);
    ProfileState { t: cache.t(i), wa: wa.with_tag(FieldTag::Wa), kg: kg.with_tag(FieldTag::Kg) }
}

/// Known part of `𝒯(G)` at node `i`: `(𝓗∞(T) - 𝓗∞(t), (e^{iD∞(T)} - e^{iD∞(t)})V^kg_∞ - 𝔅∞(t))`.
fn forcing(data: &ScatteringData, cache: &ResonantCache, i: usize) -> (SpectralField, SpectralField) {
    let last = cache.len() - 1;
    let wa = cache.hcal_final.sub(&cache.hcal(i));
    let (dt, di) = (&cache.d[last], &cache.d[i]);
    let mut kg = data.kg.map(|k, v| v * (C64::from_polar(1.0, dt[k]) - C64::from_polar(1.0, di[k])));
    kg.axpy(C64::new(-1.0, 0.0), &cache.big_b[i]);
    (wa, kg)
}

/// Replaces `g` by `𝒯(g)` node by node from `T` down, integrating the
/// right-hand sides by the trapezoid rule; returns the sup-in-time `L²`
/// change of each component.
pub fn apply_t(g: &mut PerturbationPair, data: &ScatteringData, cache: &ResonantCache, engine: &Engine) -> Result<(f64, f64)> {
    check_shapes(g, data, cache)?;
    engine.grid().check_same(&cache.grid)?;
    let n = cache.len();
    let mut acc_wa = SpectralField::zeros(cache.grid, FieldTag::Wa);
    let mut acc_kg = SpectralField::zeros(cache.grid, FieldTag::Kg);
    let mut prev: Option<(SpectralField, SpectralField)> = None;
    let (mut dw, mut dk) = (0.0f64, 0.0f64);
    for i in (0..n).rev() {
        let x = assemble(&g.wa[i], &g.kg[i], data, cache, i);
        let (rw, rk) = engine.rhs_profiles(&x.wa, &x.kg, x.t)?;
        if let Some((pw, pk)) = &prev {
            let c = C64::new(-0.5 * (cache.t(i + 1) - cache.t(i)), 0.0);
            acc_wa.axpy(c, pw);
            acc_wa.axpy(c, &rw);
            acc_kg.axpy(c, pk);
            acc_kg.axpy(c, &rk);
        }
        let (mut nw, mut nk) = if i == n - 1 {
            (SpectralField::zeros(cache.grid, FieldTag::Wa), SpectralField::zeros(cache.grid, FieldTag::Kg))
        } else {
            forcing(data, cache, i)
        };
        if i < n - 1 {
            nw.add_assign(&acc_wa);
            nk.add_assign(&acc_kg);
        }
        dw = dw.max(nw.l2_dist(&g.wa[i]));
        dk = dk.max(nk.l2_dist(&g.kg[i]));
        g.wa[i] = nw;
        g.kg[i] = nk;
        prev = Some((rw, rk));
    }
    Ok((dw, dk))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub dealias: bool,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 8, dealias: true }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub pair: PerturbationPair,
    pub log: ContractionLog,
    pub converged: bool,
}

pub fn iterate_to_fixed_point(data: &ScatteringData, cache: &ResonantCache, opts: FixedPointOptions) -> Result<FixedPoint> {
    iterate_to_fixed_point_with(data, cache, opts, &mut |_| {})
}

/// Picard iteration from `G = 0`. `on_row` sees every log row as it is
/// produced, including the rows before a non-contraction error.
pub fn iterate_to_fixed_point_with(
    data: &ScatteringData,
    cache: &ResonantCache,
    opts: FixedPointOptions,
    on_row: &mut dyn FnMut(&ContractionRow),
) -> Result<FixedPoint> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Config(format!("tol {} and max_iter {} must be positive", opts.tol, opts.max_iter)));
    }
    let engine = Engine::new(cache.grid, opts.dealias);
    let mut pair = PerturbationPair::zeros(cache);
    let mut log = ContractionLog::default();
    log::info!("fixed point: eps = {}, ‖V^wa‖ = {:e}, ‖V^kg‖ = {:e}", data.eps, data.wa.l2_norm(), data.kg.l2_norm());
    let mut expanding = 0;
    for it in 1..=opts.max_iter {
        let (dw, dk) = apply_t(&mut pair, data, cache, &engine)?;
        let distance = dw.max(dk);
        let ratio = log.rows.last().and_then(|r: &ContractionRow| (r.distance > 0.0).then(|| distance / r.distance));
        let (norm_wa, norm_kg) = pair.sup_norms();
        let row = ContractionRow { iteration: it, distance, distance_wa: dw, distance_kg: dk, ratio, norm_wa, norm_kg };
        log::info!("iteration {it}: distance {distance:e}, ratio {ratio:?}, sup ‖G^wa‖ {norm_wa:e}, sup ‖G^kg‖ {norm_kg:e}");
        on_row(&row);
        log.rows.push(row);
        if let Some(r) = ratio {
            if r > 0.5 {
                log::warn!("contraction ratio {r:.3} exceeds 0.5");
            }
            expanding = if r >= 1.0 { expanding + 1 } else { 0 };
            if expanding >= 2 {
                return Err(Error::NonContraction(format!("ratio ≥ 1 in iterations {} and {it}", it - 1)));
            }
        }
        if distance <= opts.tol {
            return Ok(FixedPoint { pair, log, converged: true });
        }
    }
    Ok(FixedPoint { pair, log, converged: false })
}

/// Profiles of the constructed solution at the requested nodes.
pub fn reconstruct_solution(pair: &PerturbationPair, data: &ScatteringData, cache: &ResonantCache, nodes: &[usize]) -> Result<Vec<ProfileState>> {
    check_shapes(pair, data, cache)?;
    nodes
        .iter()
        .map(|&i| {
            if i >= cache.len() {
                return Err(Error::Range(format!("node {i} outside the cache")));
            }
            Ok(assemble(&pair.wa[i], &pair.kg[i], data, cache, i))
        })
        .collect()
}

/// `(∂_t G^wa, ∂_t G^kg)` at `nodes`, from the profile equations:
/// `∂_t G^wa = ∂_t V^wa - h∞` and
/// `∂_t G^kg = ∂_t V^kg - iC∞e^{iD∞}V^kg_∞ - 𝔟∞ - iC∞𝔅∞`.
pub fn perturbation_rates(
    pair: &PerturbationPair,
    data: &ScatteringData,
    cache: &ResonantCache,
    engine: &Engine,
    nodes: &[usize],
) -> Result<Vec<(SpectralField, SpectralField)>> {
    check_shapes(pair, data, cache)?;
    engine.grid().check_same(&cache.grid)?;
    nodes
        .iter()
        .map(|&i| {
            if i >= cache.len() {
                return Err(Error::Range(format!("node {i} outside the cache")));
            }
            let x = assemble(&pair.wa[i], &pair.kg[i], data, cache, i);
            let (mut rw, mut rk) = engine.rhs_profiles(&x.wa, &x.kg, x.t)?;
            cache.h[i].add_into(&mut rw, C64::new(-1.0, 0.0));
            let c = &cache.c[i];
            let mut mod_kg = cache.corrected_kg(data, i);
            mod_kg.add_assign(&cache.big_b[i]);
            let phase = mod_kg.map(|k, v| v * C64::new(0.0, c[k]));
            rk.axpy(C64::new(-1.0, 0.0), &phase);
            rk.axpy(C64::new(-1.0, 0.0), &cache.b[i]);
            Ok((rw.with_tag(FieldTag::Wa), rk.with_tag(FieldTag::Kg)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRow {
    pub t: f64,
    pub r_wa: f64,
    pub r_kg: f64,
    pub r_kg_uncorrected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatteringReport {
    pub rows: Vec<ResidualRow>,
    /// Window of the monotonicity verdict.
    pub window: (f64, f64),
    pub r_kg_decreasing: bool,
    /// Rows in the window where `r_kg` fails to decrease.
    pub r_kg_increases: Vec<f64>,
    pub r_wa_final: f64,
    pub r_kg_final: f64,
    pub envelope_wa: f64,
    pub envelope_kg: f64,
}

impl ScatteringReport {
    /// `t,r_wa,r_kg,r_kg_uncorrected`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,r_wa,r_kg,r_kg_uncorrected\n");
        for r in &self.rows {
            s += &format!("{},{:e},{:e},{:e}\n", r.t, r.r_wa, r.r_kg, r.r_kg_uncorrected);
        }
        s
    }
}

/// Residuals `‖V^wa - V^wa_∞ - 𝓗∞‖`, `‖V^kg - e^{iD∞}V^kg_∞‖` and the
/// uncorrected `‖V^kg - V^kg_∞‖` at `nodes`; the verdict is taken over the
/// nodes with `t ≥ t_from`.
pub fn verify_scattering(
    pair: &PerturbationPair,
    data: &ScatteringData,
    cache: &ResonantCache,
    nodes: &[usize],
    t_from: f64,
) -> Result<ScatteringReport> {
    check_shapes(pair, data, cache)?;
    let mut rows = Vec::with_capacity(nodes.len());
    for &i in nodes {
        let r_wa = pair.wa[i].l2_norm();
        let kg_res = pair.kg[i].add(&cache.big_b[i]);
        let r_kg = kg_res.l2_norm();
        let full = kg_res.add(&cache.corrected_kg(data, i));
        rows.push(ResidualRow { t: cache.t(i), r_wa, r_kg, r_kg_uncorrected: full.l2_dist(&data.kg) });
    }
    let window: Vec<&ResidualRow> = rows.iter().filter(|r| r.t >= t_from).collect();
    let increases: Vec<f64> = window.windows(2).filter(|w| w[1].r_kg >= w[0].r_kg && w[0].r_kg > 0.0).map(|w| w[1].t).collect();
    let scale = data.eps.powf(1.5);
    let env = |f: fn(&ResidualRow) -> f64| if scale > 0.0 { rows.iter().map(f).fold(0.0, f64::max) / scale } else { 0.0 };
    let last = rows.last().cloned();
    Ok(ScatteringReport {
        window: (t_from, cache.times.t_max()),
        r_kg_decreasing: increases.is_empty() && window.len() >= 2,
        r_kg_increases: increases,
        r_wa_final: last.as_ref().map_or(0.0, |r| r.r_wa),
        r_kg_final: last.as_ref().map_or(0.0, |r| r.r_kg),
        envelope_wa: env(|r| r.r_wa),
        envelope_kg: env(|r| r.r_kg),
        rows,
    })
}

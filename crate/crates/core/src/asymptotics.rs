//! Asymptotic quantities built from scattering data `(V^wa_∞, V^kg_∞)`:
//!
//! ```text
//! h∞(t,ξ) = (2π)^{-3/2} φ≤0(ξ⟨t⟩^{7/8}) ∫ e^{it(|ξ| - ξ·η/⟨η⟩)} |V̂^kg_∞(η)|² dη
//! 𝓗∞(t) = ∫_0^t h∞,   H∞(t) = φ≤0(ξ⟨t⟩^{7/8}) (V̂^wa_∞ + 𝓗∞(t))
//! C∞(t,ξ) = ½(2π)^{-3/2} |ξ|²/⟨ξ⟩ Im ∫ e^{it(ξ·η/⟨ξ⟩ - |η|)} H∞(t,η)/|η| dη
//! D∞(t) = ∫_0^t C∞
//! 𝔟∞(t) = Σ_ι I_kg^{-,ι}[(e^{iD∞}V̂^kg_∞)^-, H∞^ι]
//! 𝔅∞(t) = -∫_t^T e^{i(D∞(t) - D∞(s))} 𝔟∞(s) ds
//! ```
//!
//! The improper integrals stop at the horizon `T`.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::bilinear::{BilinearJob, Engine};
use crate::error::{Error, Result};
use crate::fields::ProfileState;
use crate::lp::phi_leq;
use crate::phase::Equation;
use crate::spectral::{japanese, FieldTag, FourierGrid, Sign, SpectralField, C64};

const TWO_PI_M32: f64 = 0.063_493_635_934_240_97; // (2π)^{-3/2}

const GAUSS_LEGENDRE_5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn bracket(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// `φ≤0(|ξ|⟨t⟩^{7/8})`
pub fn low_cutoff(r: f64, t: f64) -> f64 {
    phi_leq(r * bracket(t).powf(0.875), 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringData {
    pub wa: SpectralField,
    pub kg: SpectralField,
    pub eps: f64,
}

impl ScatteringData {
    pub fn new(wa: SpectralField, kg: SpectralField, eps: f64) -> Result<Self> {
        wa.grid.check_same(&kg.grid)?;
        Ok(Self { wa, kg, eps })
    }

    pub fn grid(&self) -> FourierGrid {
        self.wa.grid
    }
}

/// Time nodes of the cache.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub times: Vec<f64>,
}

impl TimeGrid {
    /// `{0} ∪ {2^{i/4} : i ≥ 0} ∪ {T}` clipped to `[0, T]`.
    pub fn geometric(t_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Config(format!("horizon {t_max} must be positive")));
        }
        let mut times = vec![0.0];
        let mut i = 0;
        loop {
            let t = 2f64.powf(i as f64 / 4.0);
            if t >= t_max {
                break;
            }
            times.push(t);
            i += 1;
        }
        times.push(t_max);
        Ok(Self { times })
    }

    /// Uniform nodes `k·dt` refined by the geometric nodes, so every
    /// geometric time is a quadrature node.
    pub fn quadrature(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt <= t_max) {
            return Err(Error::Config(format!("quadrature step {dt} must lie in (0, {t_max}]")));
        }
        let geo = Self::geometric(t_max)?;
        let m = (t_max / dt).round() as usize;
        let mut times: Vec<f64> = (0..=m).map(|k| (k as f64 * dt).min(t_max)).collect();
        times.extend(&geo.times);
        times.push(t_max);
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tol = 1e-9 * dt;
        let mut out: Vec<f64> = Vec::with_capacity(times.len());
        for t in times {
            if t > t_max + tol {
                continue;
            }
            match out.last() {
                Some(&l) if (t - l).abs() <= tol => {
                    // prefer the geometric representative so lookups are exact
                    if geo.times.contains(&t) {
                        *out.last_mut().unwrap() = t;
                    }
                }
                _ => out.push(t),
            }
        }
        Ok(Self { times: out })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of a node within `1e-9` of `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t - 1e-9);
        (i < self.times.len() && (self.times[i] - t).abs() <= 1e-9).then_some(i)
    }
}

/// Values on a subset of lattice indices.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseField {
    pub idx: Vec<u32>,
    pub vals: Vec<C64>,
}

impl SparseField {
    pub fn to_dense(&self, grid: FourierGrid, tag: FieldTag) -> SpectralField {
        let mut f = SpectralField::zeros(grid, tag);
        self.add_into(&mut f, C64::new(1.0, 0.0));
        f
    }

    pub fn add_into(&self, f: &mut SpectralField, c: C64) {
        for (&i, &v) in self.idx.iter().zip(&self.vals) {
            f.values[i as usize] += c * v;
        }
    }

    pub fn l2_norm(&self, grid: FourierGrid) -> f64 {
        (self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.spectral_cell()).sqrt()
    }
}

/// Indices with `φ≤0(|ξ|⟨t⟩^{7/8}) > 0`, ascending.
pub fn cutoff_support(grid: FourierGrid, t: f64) -> Vec<u32> {
    let rmax = 2.0 / bracket(t).powf(0.875);
    (0..grid.len()).filter(|&i| grid.xi_norm(i) < rmax && low_cutoff(grid.xi_norm(i), t) > 0.0).map(|i| i as u32).collect()
}

/// `z^m` for `m ∈ [-M, M]`, stored at `m + M`.
fn power_table(z: C64, m_max: usize) -> Vec<C64> {
    let mut t = vec![C64::new(1.0, 0.0); 2 * m_max + 1];
    let zi = z.conj();
    for m in 1..=m_max {
        t[m_max + m] = t[m_max + m - 1] * z;
        t[m_max - m] = t[m_max - m + 1] * zi;
    }
    t
}

fn max_mode(grid: FourierGrid, idx: &[u32]) -> usize {
    idx.iter().map(|&i| grid.modes(i as usize).iter().map(|m| m.unsigned_abs() as usize).max().unwrap()).max().unwrap_or(0)
}

/// `h∞(t)` on the support of its cutoff. The phase `e^{-itξ·q}` with
/// `ξ = dξ·m` factors over the axes and is tabulated as powers per `η`.
pub fn h_inf_sparse(data: &ScatteringData, t: f64) -> SparseField {
    h_inf_on(data, t, cutoff_support(data.grid(), t))
}

/// `h∞(t)` at the given ascending indices.
pub fn h_inf_on(data: &ScatteringData, t: f64, idx: Vec<u32>) -> SparseField {
    let g = data.grid();
    if idx.is_empty() {
        return SparseField::default();
    }
    let m_max = max_mode(g, &idx);
    let modes: Vec<[usize; 3]> =
        idx.iter().map(|&i| g.modes(i as usize).map(|m| (m + m_max as i64) as usize)).collect();
    let mut acc = vec![C64::new(0.0, 0.0); idx.len()];
    let d = g.freq_spacing();
    for (e, v) in data.kg.values.iter().enumerate() {
        let w = v.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let eta = g.xi(e);
        let je = japanese(g.xi_norm(e));
        let tabs: Vec<Vec<C64>> =
            (0..3).map(|a| power_table(C64::from_polar(1.0, -t * d * eta[a] / je), m_max)).collect();
        for (a, m) in acc.iter_mut().zip(&modes) {
            *a += w * tabs[0][m[0]] * tabs[1][m[1]] * tabs[2][m[2]];
        }
    }
    let pref = TWO_PI_M32 * g.spectral_cell();
    let vals = idx
        .iter()
        .zip(acc)
        .map(|(&i, a)| {
            let r = g.xi_norm(i as usize);
            a * C64::from_polar(pref * low_cutoff(r, t), t * r)
        })
        .collect();
    SparseField { idx, vals }
}

pub fn compute_h_inf(data: &ScatteringData, t: f64) -> Result<SpectralField> {
    if t < 0.0 {
        return Err(Error::Domain(format!("negative time {t}")));
    }
    Ok(h_inf_sparse(data, t).to_dense(data.grid(), FieldTag::Wa))
}

/// `C∞(t, ·)` from the sparse `H∞(t)`; the `η`-phase `e^{itξ·η/⟨ξ⟩}` with
/// lattice `η` is tabulated per `ξ`.
pub fn phase_correction_rate(grid: FourierGrid, h: &SparseField, t: f64) -> Vec<f64> {
    let support: Vec<(usize, C64, [usize; 3])> = Vec::new();
    let m_max = max_mode(grid, &h.idx);
    let mut support = support;
    for (&i, &v) in h.idx.iter().zip(&h.vals) {
        let r = grid.xi_norm(i as usize);
        if r == 0.0 || v == C64::new(0.0, 0.0) {
            continue;
        }
        let m = grid.modes(i as usize).map(|m| (m + m_max as i64) as usize);
        support.push((i as usize, v * C64::from_polar(1.0 / r, -t * r), m));
    }
    let mut out = vec![0.0; grid.len()];
    if support.is_empty() {
        return out;
    }
    let d = grid.freq_spacing();
    let pref = 0.5 * TWO_PI_M32 * grid.spectral_cell();
    for (x, o) in out.iter_mut().enumerate() {
        if grid.is_nyquist(x) {
            continue;
        }
        let r = grid.xi_norm(x);
        if r == 0.0 {
            continue;
        }
        let jx = japanese(r);
        let xi = grid.xi(x);
        let tabs: Vec<Vec<C64>> = (0..3).map(|a| power_table(C64::from_polar(1.0, t * d * xi[a] / jx), m_max)).collect();
        let mut acc = C64::new(0.0, 0.0);
        for (_, w, m) in &support {
            acc += w * tabs[0][m[0]] * tabs[1][m[1]] * tabs[2][m[2]];
        }
        *o = pref * r * r / jx * acc.im;
    }
    out
}

/// `H∞(t) = φ≤0(ξ⟨t⟩^{7/8})(V^wa_∞ + 𝓗∞(t))` on the support.
pub fn low_frequency_wave(data: &ScatteringData, hcal_at: impl Fn(usize) -> C64, t: f64) -> SparseField {
    let g = data.grid();
    let idx = cutoff_support(g, t);
    let vals = idx
        .iter()
        .map(|&i| {
            let i = i as usize;
            low_cutoff(g.xi_norm(i), t) * (data.wa.values[i] + hcal_at(i))
        })
        .collect();
    SparseField { idx, vals }
}

/// Real field shared between consecutive times when bitwise equal.
pub type SharedReal = Arc<Vec<f64>>;
pub type SharedField = Arc<SpectralField>;

fn push_dedup_field(v: &mut Vec<SharedField>, f: SpectralField) {
    if let Some(last) = v.last() {
        if **last == f {
            let l = last.clone();
            v.push(l);
            return;
        }
    }
    v.push(Arc::new(f));
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CacheOptions {
    /// Include `𝔟∞`, `𝔅∞`; without them both are zero.
    pub nonresonant: bool,
    pub dealias: bool,
}

impl Default for CacheOptions {
    fn default() -> Self {
        Self { nonresonant: true, dealias: true }
    }
}

/// Tail indicators at the horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub t_max: f64,
    pub sup_c_at_t_max: f64,
    pub h_l2_at_t_max: f64,
    pub b_l2_at_t_max: f64,
}

/// All asymptotic quantities on the nodes of one time grid.
///
/// Each grid interval is a 7-point Gauss-Lobatto panel: integrands are
/// evaluated at the panel nodes and integrated with the panel's collocation
/// matrix, so only the interval end points are stored. `𝔅∞` is assembled as
/// `-e^{iD∞(t)}(K(T) - K(t))` with `K(t) = ∫_0^t e^{-iD∞}𝔟∞`.
#[derive(Clone, Debug)]
pub struct ResonantCache {
    pub grid: FourierGrid,
    pub times: TimeGrid,
    pub options: CacheOptions,
    pub h: Vec<SparseField>,
    /// `𝓗∞(t)` on the support of `h∞(t)`; elsewhere it equals `𝓗∞(T)`.
    pub hcal_local: Vec<SparseField>,
    /// `𝓗∞(T)`
    pub hcal_final: SpectralField,
    pub big_h: Vec<SparseField>,
    pub c: Vec<SharedReal>,
    pub d: Vec<SharedReal>,
    pub b: Vec<SharedField>,
    pub big_b: Vec<SharedField>,
}

const LOBATTO_7: [f64; 7] = [
    -1.0,
    -0.830_223_896_278_566_9,
    -0.468_848_793_470_714_2,
    0.0,
    0.468_848_793_470_714_2,
    0.830_223_896_278_566_9,
    1.0,
];

/// `W[j][k] = ∫_{-1}^{x_j} ℓ_k` for the Lagrange basis on the Lobatto nodes.
fn lobatto_matrix() -> [[f64; 7]; 7] {
    let x = LOBATTO_7;
    let ell = |k: usize, y: f64| (0..7).filter(|&m| m != k).map(|m| (y - x[m]) / (x[k] - x[m])).product::<f64>();
    let mut w = [[0.0; 7]; 7];
    for j in 1..7 {
        let (mid, half) = (0.5 * (x[j] - 1.0), 0.5 * (x[j] + 1.0));
        for (k, wk) in w[j].iter_mut().enumerate() {
            *wk = GAUSS_LEGENDRE_5.iter().map(|(z, g)| g * half * ell(k, mid + z * half)).sum();
        }
    }
    w
}

/// Picks the entries of `vals` (indexed by `idx`) at the ascending `sub`.
fn select(idx: &[u32], vals: &[C64], sub: &[u32]) -> Vec<C64> {
    let mut out = Vec::with_capacity(sub.len());
    let mut p = 0usize;
    for &i in sub {
        while idx[p] < i {
            p += 1;
        }
        out.push(vals[p]);
    }
    out
}

impl ResonantCache {
    pub fn build(data: &ScatteringData, times: TimeGrid, options: CacheOptions) -> Result<Self> {
        let g = data.grid();
        let ts = times.times.clone();
        let nt = ts.len();
        if nt < 2 || ts[0] != 0.0 {
            return Err(Error::Config("cache time grid must start at 0 with at least two nodes".into()));
        }
        log::info!("cache: {} nodes on [0, {}]", nt, ts[nt - 1]);
        let w = lobatto_matrix();
        let engine = Engine::new(g, options.dealias);
        let n = g.len();
        let zero = C64::new(0.0, 0.0);
        let rate = |d: &[f64], bh: &SparseField, t: f64| -> Result<SpectralField> {
            if options.nonresonant {
                nonresonant_rate(&engine, data, d, bh, t)
            } else {
                Ok(SpectralField::zeros(g, FieldTag::Kg))
            }
        };
        let wave_at = |idx: &[u32], hcal: &[C64], t: f64| -> SparseField {
            let sup = cutoff_support(g, t);
            let hc = select(idx, hcal, &sup);
            let vals = sup.iter().zip(hc).map(|(&i, v)| low_cutoff(g.xi_norm(i as usize), t) * (data.wa.values[i as usize] + v)).collect();
            SparseField { idx: sup, vals }
        };

        let h0 = h_inf_sparse(data, 0.0);
        let hcal0 = SparseField { idx: h0.idx.clone(), vals: vec![zero; h0.idx.len()] };
        let bh0 = wave_at(&h0.idx, &hcal0.vals, 0.0);
        let c0 = phase_correction_rate(g, &bh0, 0.0);
        let d0 = vec![0.0; n];
        let b0 = rate(&d0, &bh0, 0.0)?;

        let mut hcal_run = SpectralField::zeros(g, FieldTag::Wa);
        let mut k_run: Vec<SharedField> = vec![Arc::new(SpectralField::zeros(g, FieldTag::Kg))];
        let mut cache = Self {
            grid: g,
            times,
            options,
            h: vec![h0],
            hcal_local: vec![hcal0],
            hcal_final: SpectralField::zeros(g, FieldTag::Wa),
            big_h: vec![bh0],
            c: vec![Arc::new(c0)],
            d: vec![Arc::new(d0)],
            b: vec![Arc::new(b0)],
            big_b: Vec::with_capacity(nt),
        };

        for i in 0..nt - 1 {
            let half = 0.5 * (ts[i + 1] - ts[i]);
            let mid = 0.5 * (ts[i + 1] + ts[i]);
            let s: Vec<f64> = LOBATTO_7.iter().map(|x| mid + x * half).collect();
            let idx = cache.h[i].idx.clone();

            // 𝓗∞ on the panel, restricted to supp h∞(t_i)
            let mut hv = vec![cache.h[i].vals.clone()];
            for &sj in &s[1..] {
                hv.push(h_inf_on(data, sj, idx.clone()).vals);
            }
            let base: Vec<C64> = idx.iter().map(|&k| hcal_run.values[k as usize]).collect();
            let hcal_at = |j: usize| -> Vec<C64> {
                let mut v = base.clone();
                for (k, hk) in hv.iter().enumerate() {
                    let c = half * w[j][k];
                    for (a, b) in v.iter_mut().zip(hk) {
                        *a += c * b;
                    }
                }
                v
            };

            // H∞, C∞, D∞, 𝔟∞ at the panel nodes
            let mut bh = vec![cache.big_h[i].clone()];
            let mut cs: Vec<SharedReal> = vec![cache.c[i].clone()];
            for (j, &sj) in s.iter().enumerate().skip(1) {
                let b = wave_at(&idx, &hcal_at(j), sj);
                let c = phase_correction_rate(g, &b, sj);
                bh.push(b);
                if *cs[j - 1] == c {
                    let l = cs[j - 1].clone();
                    cs.push(l);
                } else {
                    cs.push(Arc::new(c));
                }
            }
            let d_left = cache.d[i].clone();
            let mut ds: Vec<SharedReal> = vec![d_left.clone()];
            for j in 1..7 {
                if cs.iter().all(|c| c.iter().all(|&x| x == 0.0)) {
                    ds.push(d_left.clone());
                    continue;
                }
                let mut d = (*d_left).clone();
                for (k, ck) in cs.iter().enumerate() {
                    let c = half * w[j][k];
                    for (a, b) in d.iter_mut().zip(ck.iter()) {
                        *a += c * b;
                    }
                }
                ds.push(Arc::new(d));
            }
            let mut bs: Vec<SharedField> = vec![cache.b[i].clone()];
            for j in 1..7 {
                let b = rate(&ds[j], &bh[j], s[j])?;
                if *bs[j - 1] == b {
                    let l = bs[j - 1].clone();
                    bs.push(l);
                } else {
                    bs.push(Arc::new(b));
                }
            }
            let k_left = k_run[i].clone();
            let k_next = if bs.iter().all(|b| b.values.iter().all(|&v| v == zero)) {
                k_left
            } else {
                let mut k = (*k_left).clone();
                for (m, bm) in bs.iter().enumerate() {
                    let c = half * w[6][m];
                    for (q, ((a, b), d)) in k.values.iter_mut().zip(&bm.values).zip(ds[m].iter()).enumerate() {
                        if g.is_nyquist(q) {
                            continue;
                        }
                        *a += c * b * C64::from_polar(1.0, -d);
                    }
                }
                Arc::new(k)
            };

            let hend = hcal_at(6);
            for (&k, v) in idx.iter().zip(&hend) {
                hcal_run.values[k as usize] = *v;
            }
            let sup = cutoff_support(g, ts[i + 1]);
            cache.h.push(SparseField { vals: select(&idx, &hv[6], &sup), idx: sup.clone() });
            cache.hcal_local.push(SparseField { vals: select(&idx, &hend, &sup), idx: sup });
            cache.big_h.push(bh.pop().unwrap());
            cache.c.push(cs.pop().unwrap());
            cache.d.push(ds.pop().unwrap());
            cache.b.push(bs.pop().unwrap());
            k_run.push(k_next);
        }
        cache.hcal_final = hcal_run;
        log::info!("cache: h, H, C, D, b done");

        let k_final = k_run[nt - 1].clone();
        for i in 0..nt {
            if Arc::ptr_eq(&k_run[i], &k_final) {
                push_dedup_field(&mut cache.big_b, SpectralField::zeros(g, FieldTag::Kg));
                continue;
            }
            let (d, k) = (&cache.d[i], &k_run[i]);
            let f = SpectralField {
                grid: g,
                values: (0..n).map(|q| -C64::from_polar(1.0, d[q]) * (k_final.values[q] - k.values[q])).collect(),
                tag: FieldTag::Kg,
            };
            push_dedup_field(&mut cache.big_b, f);
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.times.times[i]
    }

    /// `𝓗∞(t_i)` at one lattice index.
    pub fn hcal_value(&self, i: usize, k: usize) -> C64 {
        let local = &self.hcal_local[i];
        match local.idx.binary_search(&(k as u32)) {
            Ok(p) => local.vals[p],
            Err(_) => self.hcal_final.values[k],
        }
    }

    pub fn hcal(&self, i: usize) -> SpectralField {
        let mut f = self.hcal_final.clone();
        for (&k, &v) in self.hcal_local[i].idx.iter().zip(&self.hcal_local[i].vals) {
            f.values[k as usize] = v;
        }
        f
    }

    pub fn h_dense(&self, i: usize) -> SpectralField {
        self.h[i].to_dense(self.grid, FieldTag::Wa)
    }

    /// `h∞` only exists at cache nodes.
    pub fn h_at(&self, t: f64) -> Result<SpectralField> {
        let i = self.times.index_of(t).ok_or_else(|| Error::Domain(format!("h∞ is not interpolated; {t} is not a cache time")))?;
        Ok(self.h_dense(i))
    }

    /// `D∞(t)` by linear interpolation between nodes.
    pub fn d_at(&self, t: f64) -> Result<Vec<f64>> {
        let ts = &self.times.times;
        if t < 0.0 || t > self.times.t_max() + 1e-9 {
            return Err(Error::Domain(format!("{t} outside the cache range")));
        }
        let j = ts.partition_point(|&s| s <= t).clamp(1, ts.len() - 1);
        let (a, b) = (ts[j - 1], ts[j]);
        let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
        Ok((0..self.grid.len()).map(|k| (1.0 - w) * self.d[j - 1][k] + w * self.d[j][k]).collect())
    }

    /// `e^{iD∞(t_i)} V̂^kg_∞`
    pub fn corrected_kg(&self, data: &ScatteringData, i: usize) -> SpectralField {
        let d = &self.d[i];
        data.kg.map(|k, v| v * C64::from_polar(1.0, d[k]))
    }

    pub fn tails(&self) -> TailReport {
        let n = self.len() - 1;
        TailReport {
            t_max: self.t(n),
            sup_c_at_t_max: self.c[n].iter().fold(0.0, |m: f64, x| m.max(x.abs())),
            h_l2_at_t_max: self.h[n].l2_norm(self.grid),
            b_l2_at_t_max: self.b[n].l2_norm(),
        }
    }

    /// Bytes held by distinct stored fields.
    pub fn stored_bytes(&self) -> usize {
        let sparse: usize = self.h.iter().chain(&self.hcal_local).chain(&self.big_h).map(|s| s.idx.len() * 20).sum();
        let mut reals = 0;
        for v in [&self.c, &self.d] {
            for (i, f) in v.iter().enumerate() {
                if i == 0 || !Arc::ptr_eq(f, &v[i - 1]) {
                    reals += f.len() * 8;
                }
            }
        }
        let mut fields = 0;
        for v in [&self.b, &self.big_b] {
            for (i, f) in v.iter().enumerate() {
                if i == 0 || !Arc::ptr_eq(f, &v[i - 1]) {
                    fields += f.values.len() * 16;
                }
            }
        }
        sparse + reals + fields + self.hcal_final.values.len() * 16
    }

    /// Writes one snapshot per quantity per export time and a manifest.
    pub fn export(&self, dir: &Path, export_times: &TimeGrid) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut rows = Vec::new();
        for (e, &t) in export_times.times.iter().enumerate() {
            let Some(i) = self.times.index_of(t) else { continue };
            let real = |v: &[f64]| SpectralField { grid: self.grid, values: v.iter().map(|&x| C64::new(x, 0.0)).collect(), tag: FieldTag::Scalar };
            let items: [(&str, SpectralField); 7] = [
                ("h", self.h_dense(i)),
                ("Hcal", self.hcal(i)),
                ("H", self.big_h[i].to_dense(self.grid, FieldTag::Wa)),
                ("C", real(&self.c[i])),
                ("D", real(&self.d[i])),
                ("b", (*self.b[i]).clone()),
                ("B", (*self.big_b[i]).clone()),
            ];
            for (name, f) in items {
                crate::snapshot::write(&dir.join(format!("{name}_{e:03}.wkgs")), &f, self.t(i))?;
            }
            rows.push(serde_json::json!({"index": e, "t": self.t(i)}));
        }
        let manifest = serde_json::json!({
            "grid": self.grid,
            "t_max": self.times.t_max(),
            "quadrature_nodes": self.len(),
            "options": self.options,
            "quantities": ["h", "Hcal", "H", "C", "D", "b", "B"],
            "times": rows,
            "tails": self.tails(),
        });
        std::fs::write(dir.join("cache_manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

/// `𝔟∞(t)`, with the minus objects built by conjugate reflection.
pub fn nonresonant_rate(engine: &Engine, data: &ScatteringData, d: &[f64], big_h: &SparseField, t: f64) -> Result<SpectralField> {
    let g = data.grid();
    let mut out = SpectralField::zeros(g, FieldTag::Kg);
    if big_h.idx.iter().zip(&big_h.vals).all(|(&i, v)| g.xi_norm(i as usize) == 0.0 || *v == C64::new(0.0, 0.0)) {
        // the 1/|η| symbol vanishes at η = 0, so only η ≠ 0 contributes
        return Ok(out);
    }
    let corrected = data.kg.map(|k, v| v * C64::from_polar(1.0, d[k]));
    let f = corrected.signed(Sign::Minus);
    let hp = big_h.to_dense(g, FieldTag::Wa);
    for i2 in Sign::BOTH {
        let hs = hp.signed(i2);
        out.add_assign(&engine.eval_bilinear(&BilinearJob::new(Equation::KleinGordon, Sign::Minus, i2, &f, &hs, t))?);
    }
    Ok(out)
}

/// `(V̂^wa_∞ + 𝓗∞(t_i), e^{iD∞(t_i)}V̂^kg_∞ + 𝔅∞(t_i))`
pub fn resonant_profile(data: &ScatteringData, cache: &ResonantCache, i: usize) -> ProfileState {
    let wa = data.wa.add(&cache.hcal(i)).with_tag(FieldTag::Wa);
    let kg = cache.corrected_kg(data, i).add(&cache.big_b[i]).with_tag(FieldTag::Kg);
    ProfileState { t: cache.t(i), wa, kg }
}

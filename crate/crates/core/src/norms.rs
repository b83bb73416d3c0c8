//! The data norms `Y₁`, `Y₂`, the time-weighted families `S`, `T`, `S'`,
//! `T'` and the working norms `X₁ = S₁ + T₁ + S'₁(∂_t) + T'₁(∂_t)`,
//! `X₂` likewise.
//!
//! Vector-field words are built from the spatial generators `Ω_ab` and `∂_a`
//! only, applied in frequency; `Γ` and `∂_t` need the time evolution of the
//! field and are skipped (the snapshot lists them). A word of order `m`
//! enters the supremum over `n` at `n = m`, where its weight is largest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Generator, MAX_VECTOR_FIELD_ORDER};
use crate::lp::dyadic_cutoff;
use crate::spectral::{japanese, x_derivative, xi_derivative, FourierGrid, SpectralField, C64};

/// Time weight on the `∂_t` families `S'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimedWeight {
    /// `⟨t⟩^{(1 + H''(n))δ}` as displayed.
    Display,
    /// `⟨t⟩^{1 + H''(n)δ}`, the rate the `∂_t G` bounds deliver.
    Decay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormParams {
    pub n0: f64,
    pub n1: i32,
    pub d: f64,
    pub delta: f64,
    pub max_order: usize,
    pub primed_weight: PrimedWeight,
}

impl Default for NormParams {
    fn default() -> Self {
        Self { n0: 40.0, n1: 3, d: 10.0, delta: 1e-10, max_order: 1, primed_weight: PrimedWeight::Display }
    }
}

impl NormParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_order > MAX_VECTOR_FIELD_ORDER {
            return Err(Error::Config(format!("vector-field order {} exceeds the cap {MAX_VECTOR_FIELD_ORDER}", self.max_order)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite() && self.n0.is_finite() && self.d.is_finite()) {
            return Err(Error::Config("norm parameters must be finite with δ ≥ 0".into()));
        }
        Ok(())
    }

    /// `N(n) = N₀ - dn`, also for `n < 0`.
    pub fn big_n(&self, n: i32) -> f64 {
        self.n0 - self.d * n as f64
    }

    /// `H(n) = 800 - 200n`, so `H(0) = 800`.
    pub fn big_h(&self, n: i32) -> f64 {
        800.0 - 200.0 * n as f64
    }

    /// `H''(n) = H(n+1)` for both components.
    pub fn h2(&self, n: i32) -> f64 {
        self.big_h(n + 1)
    }

    /// `N''(n) = N(n) - 5` for both components.
    pub fn n2(&self, n: i32) -> f64 {
        self.big_n(n) - 5.0
    }

    fn time_weight(&self, t: f64, exponent: f64) -> f64 {
        (1.0 + t * t).powf(0.5 * exponent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormFamily {
    Y1,
    Y2,
    S1,
    S2,
    T1,
    T2,
    S1p,
    S2p,
    T1p,
    T2p,
    X1,
    X2,
}

impl NormFamily {
    fn wave(self) -> bool {
        use NormFamily::*;
        matches!(self, Y1 | S1 | T1 | S1p | T1p | X1)
    }

    fn primed(self) -> bool {
        use NormFamily::*;
        matches!(self, S1p | S2p | T1p | T2p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormTerm {
    pub term: String,
    pub n: i32,
    pub word: String,
    pub k: Option<i32>,
    pub l: Option<usize>,
    /// Supremum over the sampled times of this entry.
    pub value: f64,
    pub t: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormSnapshot {
    pub family: NormFamily,
    /// Sum over the terms of the family of the largest entry of each term.
    pub value: f64,
    pub max_order: usize,
    pub skipped_generators: Vec<String>,
    pub breakdown: Vec<NormTerm>,
}

impl NormSnapshot {
    pub fn term_sup(&self, term: &str) -> f64 {
        self.breakdown.iter().filter(|b| b.term == term).map(|b| b.value).fold(0.0, f64::max)
    }

    fn assemble(family: NormFamily, max_order: usize, breakdown: Vec<NormTerm>) -> Self {
        let mut terms: Vec<&str> = breakdown.iter().map(|b| b.term.as_str()).collect();
        terms.dedup();
        let mut value = 0.0;
        let mut seen: Vec<&str> = Vec::new();
        for t in terms {
            if !seen.contains(&t) {
                seen.push(t);
                value += breakdown.iter().filter(|b| b.term == t).map(|b| b.value).fold(0.0, f64::max);
            }
        }
        let skipped_generators =
            if max_order > 0 { vec!["Γ1".into(), "Γ2".into(), "Γ3".into(), "∂t".into()] } else { Vec::new() };
        Self { family, value, max_order, skipped_generators, breakdown }
    }
}

/// Spatial generators used by the norms.
fn norm_generators() -> Vec<Generator> {
    vec![
        Generator::Omega(0),
        Generator::Omega(1),
        Generator::Omega(2),
        Generator::D(1),
        Generator::D(2),
        Generator::D(3),
    ]
}

/// Words of order exactly `m`.
fn words(m: usize) -> Vec<Vec<Generator>> {
    let mut layer = vec![Vec::new()];
    for _ in 0..m {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<Generator>| {
                norm_generators().into_iter().map(move |g| {
                    let mut w2 = w.clone();
                    w2.push(g);
                    w2
                })
            })
            .collect();
    }
    layer
}

fn word_name(w: &[Generator]) -> String {
    if w.is_empty() {
        "id".into()
    } else {
        w.iter().map(|g| g.to_string()).collect::<Vec<_>>().join("")
    }
}

/// Transform of `ℒf` for spatial `ℒ`; the rightmost generator acts first.
fn apply_word(f: &SpectralField, w: &[Generator]) -> Result<SpectralField> {
    let g = f.grid;
    let mut out = f.clone();
    for gen in w.iter().rev() {
        out = match *gen {
            Generator::D(a) if a >= 1 => x_derivative(&out, a - 1),
            Generator::Omega(axis) => {
                // Ω_bc ↦ ξ_b ∂_{ξ_c} - ξ_c ∂_{ξ_b}
                let (b, c) = [(1, 2), (2, 0), (0, 1)][axis];
                let dc = xi_derivative(&out, c)?;
                let db = xi_derivative(&out, b)?;
                SpectralField::from_values(
                    g,
                    out.tag,
                    (0..g.len()).map(|i| g.xi(i)[b] * dc.values[i] - g.xi(i)[c] * db.values[i]).collect(),
                )?
            }
            other => return Err(Error::Unsupported(format!("generator {other} is not used by the norms"))),
        };
    }
    Ok(out)
}

/// Shells `k` whose cutoff touches a nonzero lattice frequency.
pub fn lattice_shells(grid: FourierGrid) -> Vec<i32> {
    let lo = grid.freq_spacing().log2().floor() as i32 - 1;
    let hi = (3f64.sqrt() * grid.xi_max()).log2().ceil() as i32 + 1;
    (lo..=hi)
        .filter(|&k| (1..grid.len()).any(|i| dyadic_cutoff(grid.xi_norm(i), k) > 0.0))
        .collect()
}

/// `‖φ_k f‖_{L²}` for each `k` in `ks`.
fn shell_norms(f: &[C64], grid: FourierGrid, ks: &[i32]) -> Vec<f64> {
    let mut acc = vec![0.0; ks.len()];
    for (i, v) in f.iter().enumerate() {
        let r = grid.xi_norm(i);
        if r == 0.0 {
            continue;
        }
        let m = v.norm_sqr();
        if m == 0.0 {
            continue;
        }
        // r sits in at most two neighbouring shells around log2 r
        let k0 = r.log2().floor() as i32;
        for k in [k0 - 1, k0, k0 + 1, k0 + 2] {
            if let Ok(p) = ks.binary_search(&k) {
                let c = dyadic_cutoff(r, k);
                acc[p] += c * c * m;
            }
        }
    }
    acc.iter().map(|a| (a * grid.spectral_cell()).sqrt()).collect()
}

/// `‖|ξ|^{-1/2}⟨ξ⟩^s f‖` (wave, zero mode excluded) or `‖⟨ξ⟩^s f‖`.
fn sobolev(f: &SpectralField, s: f64, wave: bool) -> f64 {
    let g = f.grid;
    let mut acc = 0.0;
    for (i, v) in f.values.iter().enumerate() {
        let r = g.xi_norm(i);
        if wave && r == 0.0 {
            continue;
        }
        let mut w = japanese(r).powf(s);
        if wave {
            w /= r.sqrt();
        }
        acc += (w * v.norm()).powi(2);
    }
    (acc * g.spectral_cell()).sqrt()
}

fn kplus(k: i32) -> f64 {
    k.max(0) as f64
}

fn kminus(k: i32) -> f64 {
    k.min(0) as f64
}

/// Keeps the larger value per key.
#[derive(Default)]
struct Sup {
    terms: Vec<NormTerm>,
}

impl Sup {
    fn offer(&mut self, term: &str, n: i32, word: &str, k: Option<i32>, l: Option<usize>, value: f64, t: Option<f64>) {
        if let Some(e) = self.terms.iter_mut().find(|e| e.term == term && e.n == n && e.word == word && e.k == k && e.l == l) {
            if value > e.value {
                e.value = value;
                e.t = t;
            }
            return;
        }
        self.terms.push(NormTerm { term: term.into(), n, word: word.into(), k, l, value, t });
    }
}

pub fn norm_y(f: &SpectralField, which: NormFamily, params: &NormParams) -> Result<NormSnapshot> {
    params.validate()?;
    if !matches!(which, NormFamily::Y1 | NormFamily::Y2) {
        return Err(Error::Input(format!("{which:?} is not a data norm")));
    }
    let wave = which.wave();
    let g = f.grid;
    let ks = lattice_shells(g);
    let mut sup = Sup::default();
    let top = params.max_order.min((params.n1 + 2) as usize);
    for m in 0..=top {
        let n = m as i32;
        for w in words(m) {
            let name = word_name(&w);
            let fl = apply_word(f, &w)?;
            sup.offer("sobolev", n, &name, None, None, sobolev(&fl, params.big_n(n - 3), wave), None);
            if n > params.n1 + 1 {
                continue;
            }
            for l in 0..3 {
                let dl = xi_derivative(&fl, l)?;
                for (&k, v) in ks.iter().zip(shell_norms(&dl.values, g, &ks)) {
                    let low = if wave { 0.5 * k as f64 } else { kplus(k) };
                    let weight = 2f64.powf(params.big_n(n - 2) * kplus(k) + low);
                    sup.offer("shell", n, &name, Some(k), Some(l), weight * v, None);
                }
            }
        }
    }
    Ok(NormSnapshot::assemble(which, params.max_order, sup.terms))
}

/// A sampled series and, for the primed families, its time derivative.
#[derive(Clone, Debug)]
pub struct TimeSeries<'a> {
    pub times: &'a [f64],
    pub values: &'a [SpectralField],
    pub dt_values: Option<&'a [SpectralField]>,
}

fn dispersion_gradient(g: FourierGrid, i: usize, l: usize, wave: bool) -> f64 {
    let r = g.xi_norm(i);
    let lam = if wave { r } else { japanese(r) };
    if lam == 0.0 {
        0.0
    } else {
        g.xi(i)[l] / lam
    }
}

/// `S`, `T`, `S'` or `T'` of a series, evaluated literally at every sample.
pub fn norm_timeweighted(series: &TimeSeries, family: NormFamily, params: &NormParams) -> Result<NormSnapshot> {
    use NormFamily::*;
    params.validate()?;
    if !matches!(family, S1 | S2 | T1 | T2 | S1p | S2p | T1p | T2p) {
        return Err(Error::Input(format!("{family:?} is not a time-weighted family")));
    }
    let values = if family.primed() {
        series.dt_values.ok_or_else(|| Error::Input(format!("{family:?} needs the ∂_t series")))?
    } else {
        series.values
    };
    if values.len() != series.times.len() {
        return Err(Error::Shape(format!("{} samples for {} times", values.len(), series.times.len())));
    }
    let wave = family.wave();
    let mut sup = Sup::default();
    let d = params.delta;
    for (&t, f) in series.times.iter().zip(values) {
        let g = f.grid;
        let ks = lattice_shells(g);
        let (term, top) = match family {
            S1 | S2 => ("S", params.n1),
            T1 | T2 => ("T", params.n1 - 1),
            S1p | S2p => ("S'", params.n1),
            _ => ("T'", params.n1 - 1),
        };
        if top < 0 {
            continue;
        }
        for m in 0..=params.max_order.min(top as usize) {
            let n = m as i32;
            for w in words(m) {
                let name = word_name(&w);
                let fl = apply_word(f, &w)?;
                match family {
                    S1 | S2 => {
                        // e^{-itΛ} is unimodular and drops out of the L² norm
                        let v = params.time_weight(t, params.big_h(n) * d) * sobolev(&fl, params.big_n(n), wave);
                        sup.offer(term, n, &name, None, None, v, Some(t));
                    }
                    T1 | T2 => {
                        let tw = params.time_weight(t, params.big_h(n + 1) * d);
                        for l in 0..3 {
                            let dl = xi_derivative(&fl, l)?;
                            for (&k, v) in ks.iter().zip(shell_norms(&dl.values, g, &ks)) {
                                let low = if wave { 0.5 * k as f64 } else { kplus(k) };
                                let weight = tw * 2f64.powf(params.big_n(n + 1) * kplus(k) + low);
                                sup.offer(term, n, &name, Some(k), Some(l), weight * v, Some(t));
                            }
                        }
                    }
                    S1p | S2p => {
                        let e = match params.primed_weight {
                            PrimedWeight::Display => (1.0 + params.h2(n)) * d,
                            PrimedWeight::Decay => 1.0 + params.h2(n) * d,
                        };
                        let tw = params.time_weight(t, e);
                        for (&k, v) in ks.iter().zip(shell_norms(&fl.values, g, &ks)) {
                            let low = if wave { -0.5 * kminus(k) } else { 0.0 };
                            let weight = tw * 2f64.powf(params.n2(n) * kplus(k) + low);
                            sup.offer(term, n, &name, Some(k), None, weight * v, Some(t));
                        }
                    }
                    _ => {
                        // |∂_ℓ(e^{-itΛ} f̂)| = |∂_ℓ f̂ - it(∂_ℓΛ) f̂|
                        let tw = params.time_weight(t, params.h2(n) * d);
                        for l in 0..3 {
                            let dl = xi_derivative(&fl, l)?;
                            let full: Vec<C64> = (0..g.len())
                                .map(|i| dl.values[i] - C64::new(0.0, t * dispersion_gradient(g, i, l, wave)) * fl.values[i])
                                .collect();
                            for (&k, v) in ks.iter().zip(shell_norms(&full, g, &ks)) {
                                let low = if wave { -0.5 * kminus(k) } else { 0.0 };
                                let weight = tw * 2f64.powf(params.n2(n) * kplus(k) + low);
                                sup.offer(term, n, &name, Some(k), Some(l), weight * v, Some(t));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(NormSnapshot::assemble(family, params.max_order, sup.terms))
}

/// `X = S + T + S'(∂_t f) + T'(∂_t f)`; the breakdown concatenates the four.
pub fn norm_x(series: &TimeSeries, which: NormFamily, params: &NormParams) -> Result<NormSnapshot> {
    use NormFamily::*;
    let parts = match which {
        X1 => [S1, T1, S1p, T1p],
        X2 => [S2, T2, S2p, T2p],
        _ => return Err(Error::Input(format!("{which:?} is not a working norm"))),
    };
    if series.dt_values.is_none() {
        return Err(Error::Input("X norms need the ∂_t series".into()));
    }
    let mut breakdown = Vec::new();
    for p in parts {
        breakdown.extend(norm_timeweighted(series, p, params)?.breakdown);
    }
    Ok(NormSnapshot::assemble(which, params.max_order, breakdown))
}

/// Largest relative variation of `⟨t⟩^{H(0)δ}` over `[0, t_max]`.
pub fn weight_variation(params: &NormParams, t_max: f64) -> f64 {
    params.time_weight(t_max, params.big_h(0) * params.delta) - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, FieldTag};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> FourierGrid {
        make_grid(8, 4.0 * std::f64::consts::PI).unwrap()
    }

    fn random_field(seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid();
        SpectralField::from_fn(g, FieldTag::Kg, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (-r2).exp()
        })
    }

    #[test]
    fn parameter_tables() {
        let p = NormParams::default();
        assert_eq!(p.big_n(0), 40.0);
        assert_eq!(p.big_n(3), 10.0);
        assert_eq!(p.big_n(4), p.big_n(3) - p.d);
        assert_eq!(p.big_n(-3), 70.0);
        assert_eq!(p.big_h(0), 800.0);
        assert_eq!(p.big_h(2), 400.0);
        assert_eq!(p.h2(1), p.big_h(2));
        assert_eq!(p.n2(1), 25.0);
        assert!(NormParams { max_order: 3, ..Default::default() }.validate().is_err());
        assert!(weight_variation(&p, 200.0) < 1e-6);
    }

    #[test]
    fn zero_inputs() {
        let p = NormParams::default();
        let z = SpectralField::zeros(grid(), FieldTag::Kg);
        assert_eq!(norm_y(&z, NormFamily::Y1, &p).unwrap().value, 0.0);
        assert_eq!(norm_y(&z, NormFamily::Y2, &p).unwrap().value, 0.0);
        let zs = vec![z.clone(), z.clone()];
        let series = TimeSeries { times: &[0.0, 1.0], values: &zs, dt_values: Some(&zs) };
        for fam in [NormFamily::X1, NormFamily::X2] {
            assert_eq!(norm_x(&series, fam, &p).unwrap().value, 0.0);
        }
    }

    #[test]
    fn single_mode_sobolev_term() {
        let g = grid();
        let mut f = SpectralField::zeros(g, FieldTag::Kg);
        let i = g.index_of([2, 0, 0]);
        let a = 0.3;
        f.values[i] = C64::new(a, 0.0);
        let p = NormParams { max_order: 0, ..Default::default() };
        let y = norm_y(&f, NormFamily::Y2, &p).unwrap();
        let expect = a * g.spectral_cell().sqrt() * japanese(g.xi_norm(i)).powf(p.big_n(-3));
        assert!((y.term_sup("sobolev") - expect).abs() <= 1e-12 * expect);
        assert!(y.value >= y.term_sup("sobolev"));
    }

    #[test]
    fn primed_needs_derivative_series() {
        let f = vec![random_field(1)];
        let s = TimeSeries { times: &[1.0], values: &f, dt_values: None };
        let p = NormParams::default();
        assert!(matches!(norm_timeweighted(&s, NormFamily::S1p, &p), Err(Error::Input(_))));
        assert!(matches!(norm_x(&s, NormFamily::X2, &p), Err(Error::Input(_))));
        assert!(norm_timeweighted(&s, NormFamily::T2, &p).is_ok());
    }

    #[test]
    fn constant_series_reduces_to_the_first_sample() {
        let f = random_field(2);
        let p = NormParams::default();
        let one = vec![f.clone()];
        let many = vec![f.clone(), f.clone(), f.clone()];
        let a = norm_timeweighted(&TimeSeries { times: &[0.0], values: &one, dt_values: None }, NormFamily::S2, &p).unwrap();
        let b = norm_timeweighted(&TimeSeries { times: &[0.0, 50.0, 200.0], values: &many, dt_values: None }, NormFamily::S2, &p)
            .unwrap();
        assert!(b.value >= a.value);
        assert!((b.value - a.value) / a.value < 1e-6);
    }

    #[test]
    fn x_dominates_its_summands() {
        let f = vec![random_field(3), random_field(4)];
        let df = vec![random_field(5), random_field(6)];
        let s = TimeSeries { times: &[1.0, 2.0], values: &f, dt_values: Some(&df) };
        let p = NormParams::default();
        let x = norm_x(&s, NormFamily::X1, &p).unwrap();
        for fam in [NormFamily::S1, NormFamily::T1, NormFamily::S1p, NormFamily::T1p] {
            assert!(x.value >= norm_timeweighted(&s, fam, &p).unwrap().value);
        }
    }

    #[test]
    fn rotation_words_vanish_on_radial_fields() {
        let g = make_grid(16, 6.0 * std::f64::consts::PI).unwrap();
        let f = SpectralField::from_fn(g, FieldTag::Wa, |x| C64::new((-2.0 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), 0.0));
        for a in 0..3 {
            let o = apply_word(&f, &[Generator::Omega(a)]).unwrap();
            let d = apply_word(&f, &[Generator::D(a + 1)]).unwrap();
            assert!(o.l2_norm() < 1e-3 * d.l2_norm(), "{} vs {}", o.l2_norm(), d.l2_norm());
        }
        assert!(apply_word(&f, &[Generator::Gamma(0)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn homogeneity_and_triangle(s1 in 0u64..1000, s2 in 0u64..1000, c in -3.0f64..3.0) {
            let (f, h) = (random_field(s1), random_field(s2));
            let p = NormParams::default();
            for fam in [NormFamily::Y1, NormFamily::Y2] {
                let nf = norm_y(&f, fam, &p).unwrap().value;
                let nc = norm_y(&f.scale(C64::new(c, 0.0)), fam, &p).unwrap().value;
                prop_assert!((nc - c.abs() * nf).abs() <= 1e-12 * nf.max(1e-300));
                let nh = norm_y(&h, fam, &p).unwrap().value;
                let ns = norm_y(&f.add(&h), fam, &p).unwrap().value;
                prop_assert!(ns <= (nf + nh) * (1.0 + 1e-12));
            }
            let (a, b) = (vec![f.clone()], vec![h.clone()]);
            let sum = vec![f.add(&h)];
            for fam in [NormFamily::X1, NormFamily::X2] {
                let x = |v: &Vec<SpectralField>| norm_x(&TimeSeries { times: &[3.0], values: v, dt_values: Some(v) }, fam, &p).unwrap().value;
                prop_assert!(x(&sum) <= (x(&a) + x(&b)) * (1.0 + 1e-12));
            }
        }
    }
}

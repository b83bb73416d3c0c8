//! Periodic Fourier grid, 3D transforms, dispersion symbols and propagators.
//!
//! Lattice ordering is the usual FFT wraparound order: the flat index of
//! `(i0, i1, i2)` is `(i0 * n + i1) * n + i2` and index `i` along an axis
//! carries the integer mode `i` for `i < n/2` and `i - n` otherwise.
//!
//! Discrete normalization: with `dx = L/n` and `dξ = 2π/L`,
//!
//! ```text
//! f̂(ξ) = (2π)^{-3/2} dx³ Σ_x e^{-i x·ξ} f(x)
//! f(x) = (2π)^{-3/2} dξ³ Σ_ξ e^{+i x·ξ} f̂(ξ)
//! ```
//!
//! so that `Σ |f|² dx³ = Σ |f̂|² dξ³` holds exactly and the transform of a
//! pointwise product is `(2π)^{-3/2} dξ³` times the wraparound lattice
//! convolution of the transforms.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierGrid {
    n: usize,
    box_length: f64,
    freq_spacing: f64,
}

pub fn make_grid(n_per_axis: usize, box_length: f64) -> Result<FourierGrid> {
    FourierGrid::new(n_per_axis, box_length)
}

impl FourierGrid {
    pub fn new(n_per_axis: usize, box_length: f64) -> Result<Self> {
        if n_per_axis < 8 || n_per_axis % 2 != 0 {
            return Err(Error::Config(format!(
                "points per axis must be even and at least 8, got {n_per_axis}"
            )));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::Config(format!("box length must be positive, got {box_length}")));
        }
        Ok(Self { n: n_per_axis, box_length, freq_spacing: 2.0 * PI / box_length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn freq_spacing(&self) -> f64 {
        self.freq_spacing
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Number of lattice points, `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice measure `dξ³`.
    pub fn spectral_cell(&self) -> f64 {
        self.freq_spacing.powi(3)
    }

    /// Physical cell volume `dx³`.
    pub fn physical_cell(&self) -> f64 {
        self.dx().powi(3)
    }

    /// Largest axis frequency below the Nyquist row.
    pub fn xi_max(&self) -> f64 {
        (self.n / 2 - 1) as f64 * self.freq_spacing
    }

    /// Integer mode carried by axis index `i`.
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn axis_indices(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    pub fn modes(&self, idx: usize) -> [i64; 3] {
        let a = self.axis_indices(idx);
        [self.mode(a[0]), self.mode(a[1]), self.mode(a[2])]
    }

    /// Flat index of the lattice point with integer modes `m` (taken mod n).
    pub fn index_of(&self, m: [i64; 3]) -> usize {
        let n = self.n as i64;
        let w = |v: i64| v.rem_euclid(n) as usize;
        (w(m[0]) * self.n + w(m[1])) * self.n + w(m[2])
    }

    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let m = self.modes(idx);
        let h = self.freq_spacing;
        [m[0] as f64 * h, m[1] as f64 * h, m[2] as f64 * h]
    }

    pub fn xi_norm(&self, idx: usize) -> f64 {
        norm3(self.xi(idx))
    }

    /// Flat index of `-ξ`.
    pub fn neg_index(&self, idx: usize) -> usize {
        let m = self.modes(idx);
        self.index_of([-m[0], -m[1], -m[2]])
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        let h = self.n / 2;
        let a = self.axis_indices(idx);
        a[0] == h || a[1] == h || a[2] == h
    }

    /// Largest retained mode per axis under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        ((self.n - 1) / 3) as i64
    }

    pub fn is_dealiased_mode(&self, idx: usize) -> bool {
        let k = self.dealias_cutoff();
        self.modes(idx).iter().all(|m| m.abs() <= k)
    }

    /// Periodic sawtooth coordinate of a physical sample, in `[-L/2, L/2)`.
    pub fn x(&self, idx: usize) -> [f64; 3] {
        let m = self.modes(idx);
        let dx = self.dx();
        [m[0] as f64 * dx, m[1] as f64 * dx, m[2] as f64 * dx]
    }

    pub fn check_same(&self, other: &FourierGrid) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!(
                "grid mismatch: ({}, {}) vs ({}, {})",
                self.n, self.box_length, other.n, other.box_length
            )));
        }
        Ok(())
    }
}

pub fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `⟨z⟩ = sqrt(1 + |z|²)`.
pub fn japanese(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Wave,
    KleinGordon,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Wave => "wa",
            Family::KleinGordon => "kg",
        }
    }

    /// Unsigned symbol `|ξ|` or `⟨ξ⟩` as a function of `|ξ|`.
    pub fn symbol(self, r: f64) -> f64 {
        match self {
            Family::Wave => r,
            Family::KleinGordon => japanese(r),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DispersionKind {
    pub family: Family,
    pub sign: Sign,
}

impl DispersionKind {
    pub const WA: DispersionKind = DispersionKind { family: Family::Wave, sign: Sign::Plus };
    pub const KG: DispersionKind = DispersionKind { family: Family::KleinGordon, sign: Sign::Plus };

    pub fn new(family: Family, sign: Sign) -> Self {
        Self { family, sign }
    }

    pub fn eval_norm(self, r: f64) -> f64 {
        self.sign.value() * self.family.symbol(r)
    }
}

/// `Λ_kind(ξ)`: `±|ξ|` or `±⟨ξ⟩`.
pub fn dispersion_symbol(kind: DispersionKind, xi: [f64; 3]) -> f64 {
    kind.eval_norm(norm3(xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldTag {
    Wa,
    Kg,
    Scalar,
}

impl From<Family> for FieldTag {
    fn from(f: Family) -> Self {
        match f {
            Family::Wave => FieldTag::Wa,
            Family::KleinGordon => FieldTag::Kg,
        }
    }
}

/// Complex function on the frequency lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: FourierGrid,
    pub values: Vec<C64>,
    pub tag: FieldTag,
}

impl SpectralField {
    pub fn zeros(grid: FourierGrid, tag: FieldTag) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()], tag }
    }

    pub fn from_values(grid: FourierGrid, tag: FieldTag, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let mut f = Self { grid, values, tag };
        f.zero_nyquist();
        Ok(f)
    }

    /// Samples `f(ξ)` on the lattice; the Nyquist rows are set to zero.
    pub fn from_fn(grid: FourierGrid, tag: FieldTag, mut f: impl FnMut([f64; 3]) -> C64) -> Self {
        let values = (0..grid.len())
            .map(|idx| if grid.is_nyquist(idx) { C64::new(0.0, 0.0) } else { f(grid.xi(idx)) })
            .collect();
        Self { grid, values, tag }
    }

    pub fn with_tag(mut self, tag: FieldTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn zero_nyquist(&mut self) {
        let g = self.grid;
        let h = g.n() / 2;
        let n = g.n();
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    if i0 == h || i1 == h || i2 == h {
                        self.values[(i0 * n + i1) * n + i2] = C64::new(0.0, 0.0);
                    }
                }
            }
        }
    }

    /// Discrete L² norm `(Σ |f̂|² dξ³)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spectral_cell()).sqrt()
    }

    pub fn l2_dist(&self, other: &SpectralField) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.spectral_cell()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> SpectralField {
        self.map(|_, v| v * c)
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        self.zip(other, |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &SpectralField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn axpy(&mut self, c: C64, other: &SpectralField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// Pointwise map with access to the flat index.
    pub fn map(&self, f: impl Fn(usize, C64) -> C64) -> SpectralField {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(i, v)).collect();
        SpectralField { grid: self.grid, values, tag: self.tag }
    }

    pub fn zip(&self, other: &SpectralField, f: impl Fn(C64, C64) -> C64) -> SpectralField {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        SpectralField { grid: self.grid, values, tag: self.tag }
    }

    /// Multiplies by a real radial symbol `m(|ξ|)`.
    pub fn multiply_radial(&self, m: impl Fn(f64) -> f64) -> SpectralField {
        let g = self.grid;
        self.map(|i, v| v * m(g.xi_norm(i)))
    }

    /// The minus object `f^-(ξ) = conj(f(-ξ))`; it is the transform of the
    /// complex conjugate of the physical function.
    pub fn conj_reflect(&self) -> SpectralField {
        let g = self.grid;
        let values = (0..g.len()).map(|i| self.values[g.neg_index(i)].conj()).collect();
        let mut f = SpectralField { grid: g, values, tag: self.tag };
        f.zero_nyquist();
        f
    }

    /// The signed object: `f` for `+`, `conj_reflect(f)` for `-`.
    pub fn signed(&self, s: Sign) -> SpectralField {
        match s {
            Sign::Plus => self.clone(),
            Sign::Minus => self.conj_reflect(),
        }
    }

    /// Largest `|f(ξ) - conj(f(-ξ))|`; zero for transforms of real functions.
    pub fn conj_symmetry_defect(&self) -> f64 {
        let g = self.grid;
        (0..g.len())
            .filter(|&i| !g.is_nyquist(i))
            .map(|i| (self.values[i] - self.values[g.neg_index(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|f(ξ) - f(-ξ)|`.
    pub fn parity_defect(&self) -> f64 {
        let g = self.grid;
        (0..g.len())
            .filter(|&i| !g.is_nyquist(i))
            .map(|i| (self.values[i] - self.values[g.neg_index(i)]).norm())
            .fold(0.0, f64::max)
    }

    /// Zeroes every mode outside the 2/3 box.
    pub fn dealias(&mut self) {
        let g = self.grid;
        for (i, v) in self.values.iter_mut().enumerate() {
            if !g.is_dealiased_mode(i) {
                *v = C64::new(0.0, 0.0);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

type Plan = Arc<dyn Fft<f64>>;

fn plans(n: usize) -> (Plan, Plan) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Plan, Plan)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("plan cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Unnormalized 3D DFT in place (`forward`: kernel `e^{-i}`).
pub fn fft3_in_place(n: usize, data: &mut [C64], forward: bool) {
    assert_eq!(data.len(), n * n * n);
    let (fwd, inv) = plans(n);
    let plan = if forward { fwd } else { inv };
    let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    // last axis is contiguous
    plan.process_with_scratch(data, &mut scratch);
    let mut buf = vec![C64::new(0.0, 0.0); data.len()];
    for stride in [n, n * n] {
        // gather lines along the axis with this stride
        let mut line = 0;
        for base0 in 0..n * n * n / (n * stride) {
            for base1 in 0..stride {
                let base = base0 * n * stride + base1;
                for k in 0..n {
                    buf[line * n + k] = data[base + k * stride];
                }
                line += 1;
            }
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        let mut line = 0;
        for base0 in 0..n * n * n / (n * stride) {
            for base1 in 0..stride {
                let base = base0 * n * stride + base1;
                for k in 0..n {
                    data[base + k * stride] = buf[line * n + k];
                }
                line += 1;
            }
        }
    }
}

/// Physical samples to the discrete Fourier transform (see module docs).
pub fn forward_transform(grid: FourierGrid, samples: &[C64], tag: FieldTag) -> Result<SpectralField> {
    if samples.len() != grid.len() {
        return Err(Error::Shape(format!(
            "expected {} physical samples, got {}",
            grid.len(),
            samples.len()
        )));
    }
    let mut values = samples.to_vec();
    fft3_in_place(grid.n(), &mut values, true);
    let c = (2.0 * PI).powf(-1.5) * grid.physical_cell();
    for v in values.iter_mut() {
        *v *= c;
    }
    let mut f = SpectralField { grid, values, tag };
    f.zero_nyquist();
    Ok(f)
}

pub fn forward_transform_real(grid: FourierGrid, samples: &[f64], tag: FieldTag) -> Result<SpectralField> {
    let c: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    forward_transform(grid, &c, tag)
}

pub fn inverse_transform(field: &SpectralField) -> Vec<C64> {
    let g = field.grid;
    let mut values = field.values.clone();
    fft3_in_place(g.n(), &mut values, false);
    let c = (2.0 * PI).powf(-1.5) * g.spectral_cell();
    for v in values.iter_mut() {
        *v *= c;
    }
    values
}

/// Pointwise multiplication by `e^{itΛ_kind(ξ)}`.
pub fn propagate(field: &SpectralField, kind: DispersionKind, t: f64) -> SpectralField {
    if t == 0.0 {
        return field.clone();
    }
    let g = field.grid;
    field.map(|i, v| v * C64::from_polar(1.0, t * kind.eval_norm(g.xi_norm(i))))
}

/// `∂_{ξ_ℓ} f̂`, computed as the transform of `-i x_ℓ f(x)` with the periodic
/// sawtooth coordinate.
pub fn xi_derivative(field: &SpectralField, axis: usize) -> Result<SpectralField> {
    if axis > 2 {
        return Err(Error::Domain(format!("axis index {axis} is not in 0..3")));
    }
    let g = field.grid;
    let mut phys = inverse_transform(field);
    for (i, v) in phys.iter_mut().enumerate() {
        *v *= C64::new(0.0, -g.x(i)[axis]);
    }
    forward_transform(g, &phys, field.tag)
}

/// Spectral derivative `∂_{x_ℓ}` (multiplication by `i ξ_ℓ`).
pub fn x_derivative(field: &SpectralField, axis: usize) -> SpectralField {
    let g = field.grid;
    field.map(|i, v| v * C64::new(0.0, g.xi(i)[axis]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * n * n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn random_field(g: FourierGrid, seed: u64) -> SpectralField {
        SpectralField::from_values(g, FieldTag::Scalar, random_samples(g.n(), seed)).unwrap()
    }

    #[test]
    fn grid_spacing_examples() {
        let g = make_grid(8, 2.0 * PI).unwrap();
        assert!((g.freq_spacing() - 1.0).abs() < 1e-15);
        assert_eq!(g.xi_max(), 3.0);
        let g = make_grid(32, 16.0 * PI).unwrap();
        assert!((g.freq_spacing() - 0.125).abs() < 1e-15);
        let g = make_grid(16, 8.0 * PI).unwrap();
        assert!((g.freq_spacing() - 0.25).abs() < 1e-15);
        let idx = g.index_of([1, 0, 0]);
        assert_eq!(g.xi(idx), [0.25, 0.0, 0.0]);
        assert!((g.freq_spacing() * g.box_length() - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(matches!(make_grid(7, 1.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(6, 1.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(8, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn lattice_negation_closed_off_nyquist() {
        let g = make_grid(8, 3.0).unwrap();
        for i in 0..g.len() {
            if g.is_nyquist(i) {
                continue;
            }
            let j = g.neg_index(i);
            assert!(!g.is_nyquist(j));
            let (a, b) = (g.xi(i), g.xi(j));
            for k in 0..3 {
                assert_eq!(a[k], -b[k]);
            }
        }
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion_symbol(DispersionKind::WA, [3.0, 4.0, 0.0]), 5.0);
        assert_eq!(dispersion_symbol(DispersionKind::KG, [0.0, 0.0, 0.0]), 1.0);
        let v = dispersion_symbol(DispersionKind::new(Family::KleinGordon, Sign::Minus), [3.0, 4.0, 0.0]);
        assert!((v + 26f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_field_transforms_to_zero_mode() {
        let g = make_grid(8, 5.0).unwrap();
        let f = forward_transform(g, &vec![C64::new(1.0, 0.0); g.len()], FieldTag::Scalar).unwrap();
        let expected = (2.0 * PI).powf(-1.5) * g.box_length().powi(3);
        assert!((f.values[0] - expected).norm() < 1e-12 * expected);
        let rest: f64 = f.values[1..].iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(rest < 1e-12 * expected);
    }

    #[test]
    fn plane_wave_transforms_to_delta() {
        let g = make_grid(8, 2.0 * PI).unwrap();
        let target = g.index_of([1, -2, 3]);
        let xi0 = g.xi(target);
        let samples: Vec<C64> = (0..g.len())
            .map(|i| {
                let a = g.axis_indices(i);
                let x = [a[0] as f64 * g.dx(), a[1] as f64 * g.dx(), a[2] as f64 * g.dx()];
                C64::from_polar(1.0, dot3(x, xi0))
            })
            .collect();
        let f = forward_transform(g, &samples, FieldTag::Scalar).unwrap();
        let peak = f.values[target].norm();
        for (i, v) in f.values.iter().enumerate() {
            if i != target {
                assert!(v.norm() < 1e-12 * peak);
            }
        }
    }

    #[test]
    fn round_trip_random_real_field() {
        let g = make_grid(16, 7.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let real: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // keep the field inside the non-Nyquist band
        let f = forward_transform_real(g, &real, FieldTag::Scalar).unwrap();
        let band = inverse_transform(&f);
        let f2 = forward_transform(g, &band, FieldTag::Scalar).unwrap();
        let back = inverse_transform(&f2);
        let num: f64 = band.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = band.iter().map(|a| a.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-13);
        let im = back.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(im < 1e-13);
    }

    #[test]
    fn propagate_group_law_and_unitarity() {
        let g = make_grid(8, 4.0).unwrap();
        let f = random_field(g, 11);
        for kind in [DispersionKind::WA, DispersionKind::KG] {
            assert_eq!(propagate(&f, kind, 0.0), f);
            let back = propagate(&propagate(&f, kind, 2.7), kind, -2.7);
            assert!(back.l2_dist(&f) < 1e-13 * f.l2_norm());
            let p = propagate(&f, kind, 13.1);
            assert!((p.l2_norm() - f.l2_norm()).abs() < 1e-13 * f.l2_norm());
        }
    }

    #[test]
    fn propagator_sign_symmetry() {
        let g = make_grid(8, 4.0).unwrap();
        let f = random_field(g, 12);
        for fam in [Family::Wave, Family::KleinGordon] {
            let minus = propagate(&f, DispersionKind::new(fam, Sign::Minus), 1.3);
            let conj = f.map(|_, v| v.conj());
            let via_plus = propagate(&conj, DispersionKind::new(fam, Sign::Plus), 1.3).map(|_, v| v.conj());
            assert!(minus.l2_dist(&via_plus) < 1e-14 * f.l2_norm());
        }
    }

    #[test]
    fn xi_derivative_of_gaussian() {
        let n = 64;
        let g = make_grid(n, (2.0 * PI * n as f64).sqrt()).unwrap();
        let f = SpectralField::from_fn(g, FieldTag::Scalar, |xi| {
            C64::new((-dot3(xi, xi) / 2.0).exp(), 0.0)
        });
        for axis in 0..3 {
            let d = xi_derivative(&f, axis).unwrap();
            for i in 0..g.len() {
                let xi = g.xi(i);
                if norm3(xi) > 3.0 {
                    continue;
                }
                let exact = -xi[axis] * (-dot3(xi, xi) / 2.0).exp();
                let err = (d.values[i] - exact).norm();
                assert!(err <= 1e-6 * exact.abs().max(1e-3), "axis {axis} xi {xi:?} err {err}");
            }
        }
    }

    #[test]
    fn xi_derivative_of_constant_vanishes() {
        // a lattice constant (Nyquist row included) is a physical delta at x = 0
        let g = make_grid(16, 9.0).unwrap();
        let f = SpectralField { grid: g, values: vec![C64::new(1.0, 0.0); g.len()], tag: FieldTag::Scalar };
        for axis in 0..3 {
            let d = xi_derivative(&f, axis).unwrap();
            assert!(d.sup_norm() < 1e-12);
        }
    }

    #[test]
    fn plancherel_random() {
        let g = make_grid(16, 5.5).unwrap();
        let phys = random_samples(16, 21);
        let f = forward_transform(g, &phys, FieldTag::Scalar).unwrap();
        let band = inverse_transform(&f);
        let phys_norm = (band.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.physical_cell()).sqrt();
        assert!((phys_norm - f.l2_norm()).abs() < 1e-12 * phys_norm);
    }

    #[test]
    fn conj_reflect_of_real_transform_is_identity() {
        let g = make_grid(8, 3.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let real: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = forward_transform_real(g, &real, FieldTag::Scalar).unwrap();
        assert!(f.conj_symmetry_defect() < 1e-13);
        assert!(f.conj_reflect().l2_dist(&f) < 1e-13 * f.l2_norm());
    }

    proptest! {
        #[test]
        fn xi_derivative_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = make_grid(8, 6.0).unwrap();
            let f = random_field(g, seed);
            let h = random_field(g, seed + 7919);
            let comb = f.scale(C64::new(a, 0.0)).add(&h.scale(C64::new(0.0, b)));
            let lhs = xi_derivative(&comb, 2).unwrap();
            let rhs = xi_derivative(&f, 2).unwrap().scale(C64::new(a, 0.0))
                .add(&xi_derivative(&h, 2).unwrap().scale(C64::new(0.0, b)));
            prop_assert!(lhs.l2_dist(&rhs) <= 1e-12 * (1.0 + lhs.l2_norm()));
        }

        #[test]
        fn symbols_bounded_below(m0 in -15i64..16, m1 in -15i64..16, m2 in -15i64..16) {
            let g = make_grid(32, 16.0 * PI).unwrap();
            let xi = g.xi(g.index_of([m0, m1, m2]));
            prop_assert!(dispersion_symbol(DispersionKind::KG, xi) >= 1.0);
            let w = dispersion_symbol(DispersionKind::WA, xi);
            prop_assert!(w >= 0.0);
            prop_assert_eq!(w == 0.0, m0 == 0 && m1 == 0 && m2 == 0);
        }

        #[test]
        fn sign_flip_negates_symbol(x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0) {
            for fam in [Family::Wave, Family::KleinGordon] {
                let p = dispersion_symbol(DispersionKind::new(fam, Sign::Plus), [x, y, z]);
                let m = dispersion_symbol(DispersionKind::new(fam, Sign::Minus), [x, y, z]);
                prop_assert_eq!(p, -m);
            }
        }
    }
}

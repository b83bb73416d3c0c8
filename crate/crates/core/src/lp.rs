//! Littlewood-Paley toolkit: smooth dyadic cutoffs in frequency, space and
//! time, and the projections `P_k`, `Q_jk`, `𝒬_jk`.

use crate::error::{Error, Result};
use crate::spectral::{forward_transform, inverse_transform, norm3, xi_derivative, FourierGrid, SpectralField, C64};

fn sigma(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// The canonical bump: `1` on `|z| ≤ 1`, `0` on `|z| ≥ 2`, smooth in between.
pub fn canonical_bump(z: f64) -> f64 {
    let z = z.abs();
    if z <= 1.0 {
        return 1.0;
    }
    if z >= 2.0 {
        return 0.0;
    }
    let a = sigma(2.0 - z);
    a / (a + sigma(z - 1.0))
}

/// A radial bump together with the dyadic families built from it.
#[derive(Clone, Copy)]
pub struct CutoffProfile {
    base: fn(f64) -> f64,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        Self { base: canonical_bump }
    }
}

impl CutoffProfile {
    pub fn new(base: fn(f64) -> f64) -> Self {
        Self { base }
    }

    pub fn base(&self, z: f64) -> f64 {
        (self.base)(z)
    }

    /// `φ_{≤a}(z) = φ(z / 2^a)`; `a` may be fractional.
    pub fn phi_leq(&self, z: f64, a: f64) -> f64 {
        self.base(z / a.exp2())
    }

    /// `φ_{≥a}(z) = 1 - φ_{≤a-1}(z)`.
    pub fn phi_geq(&self, z: f64, a: f64) -> f64 {
        1.0 - self.phi_leq(z, a - 1.0)
    }

    /// `φ_k(z) = φ(z/2^k) - φ(z/2^{k-1})`.
    pub fn phi_k(&self, z: f64, k: i32) -> f64 {
        self.phi_leq(z, k as f64) - self.phi_leq(z, k as f64 - 1.0)
    }

    /// `Σ_{k'=k1}^{k2} φ_{k'}`, evaluated by telescoping.
    pub fn phi_range(&self, z: f64, k1: i32, k2: i32) -> f64 {
        self.phi_leq(z, k2 as f64) - self.phi_leq(z, k1 as f64 - 1.0)
    }

    /// `φ_j^{(k)}`: `φ_{≤j}` at the bottom index `j = -k⁻`, `φ_j` above it.
    pub fn phi_j_k(&self, z: f64, j: i32, k: i32) -> f64 {
        if j == -k.min(0) {
            self.phi_leq(z, j as f64)
        } else {
            self.phi_k(z, j)
        }
    }

    /// `τ_m(t)`: `τ(t)` for `m = 0`, `τ(t/2^m) - τ(t/2^{m-1})` otherwise.
    pub fn time_cutoff(&self, t: f64, m: u32) -> f64 {
        if m == 0 {
            self.base(t)
        } else {
            self.phi_k(t, m as i32)
        }
    }
}

pub fn phi_leq(z: f64, a: f64) -> f64 {
    CutoffProfile::default().phi_leq(z, a)
}

pub fn phi_geq(z: f64, a: f64) -> f64 {
    CutoffProfile::default().phi_geq(z, a)
}

pub fn dyadic_cutoff(z: f64, k: i32) -> f64 {
    CutoffProfile::default().phi_k(z, k)
}

pub fn phi_j_k(z: f64, j: i32, k: i32) -> f64 {
    CutoffProfile::default().phi_j_k(z, j, k)
}

pub fn time_cutoff(t: f64, m: u32) -> f64 {
    CutoffProfile::default().time_cutoff(t, m)
}

/// Shell index `k` paired with spatial index `j`, admissible when `j ≥ 0`
/// and `j + k ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicIndex {
    pub k: i32,
    pub j: i32,
}

impl DyadicIndex {
    pub fn new(k: i32, j: i32) -> Result<Self> {
        if j < 0 || j + k < 0 {
            return Err(Error::Domain(format!("(k, j) = ({k}, {j}) needs j ≥ 0 and j + k ≥ 0")));
        }
        Ok(Self { k, j })
    }

    /// Smallest admissible `j` for this `k`, namely `-k⁻`.
    pub fn j_min(k: i32) -> i32 {
        -k.min(0)
    }
}

/// Shells `k` with `2^{k-1} ≥ dξ` and `2^{k+1}` no larger than the largest
/// lattice frequency.
pub fn resolvable_window(grid: &FourierGrid) -> (i32, i32) {
    let lo = grid.freq_spacing().log2().ceil() as i32 + 1;
    let top = 3f64.sqrt() * grid.xi_max();
    let hi = top.log2().floor() as i32 - 1;
    (lo, hi)
}

/// Largest spatial index whose annulus fits in the box, `2^j ≤ L/2`.
pub fn j_max(grid: &FourierGrid) -> i32 {
    (grid.box_length() / 2.0).log2().floor() as i32
}

pub struct Projector {
    pub profile: CutoffProfile,
}

impl Default for Projector {
    fn default() -> Self {
        Self { profile: CutoffProfile::default() }
    }
}

impl Projector {
    pub fn new(profile: CutoffProfile) -> Self {
        Self { profile }
    }

    /// Multiplication by `φ_k(|ξ|)` without the resolvability check.
    pub fn shell(&self, f: &SpectralField, k: i32) -> SpectralField {
        f.multiply_radial(|r| self.profile.phi_k(r, k))
    }

    pub fn project_p_k(&self, f: &SpectralField, k: i32) -> Result<SpectralField> {
        let (lo, hi) = resolvable_window(&f.grid);
        if k < lo || k > hi {
            return Err(Error::Range(format!("shell {k} is not resolvable; valid window is [{lo}, {hi}]")));
        }
        Ok(self.shell(f, k))
    }

    /// `Σ_{k=k1}^{k2} P_k f`, each out-of-window shell contributing zero.
    pub fn sum_shells(&self, f: &SpectralField, k1: i32, k2: i32) -> SpectralField {
        let (lo, hi) = resolvable_window(&f.grid);
        let mut acc = SpectralField::zeros(f.grid, f.tag);
        for k in k1..=k2 {
            if k < lo || k > hi {
                log::warn!("shell {k} outside resolvable window [{lo}, {hi}] skipped");
                continue;
            }
            acc.add_assign(&self.shell(f, k));
        }
        acc
    }

    /// `P_{[k1,k2]} f`.
    pub fn project_range(&self, f: &SpectralField, k1: i32, k2: i32) -> SpectralField {
        f.multiply_radial(|r| self.profile.phi_range(r, k1, k2))
    }

    /// Spatial weight of `Q_jk`. The top index `j_max(grid)` also absorbs
    /// the part of the box beyond its annulus.
    pub fn spatial_weight(&self, grid: &FourierGrid, x: [f64; 3], j: i32, k: i32) -> f64 {
        let r = norm3(x);
        let top = j_max(grid);
        let jmin = DyadicIndex::j_min(k);
        if j == top && j > jmin {
            self.profile.phi_geq(r, j as f64)
        } else {
            self.profile.phi_j_k(r, j, k)
        }
    }

    fn check_jk(&self, grid: &FourierGrid, j: i32, k: i32) -> Result<()> {
        DyadicIndex::new(k, j)?;
        let top = j_max(grid);
        if j > top.max(DyadicIndex::j_min(k)) {
            return Err(Error::Domain(format!("spatial index {j} exceeds the box limit {top}")));
        }
        Ok(())
    }

    /// `Q_jk f = φ_j^{(k)}(x) · P_k f(x)`.
    pub fn project_q_jk(&self, f: &SpectralField, j: i32, k: i32) -> Result<SpectralField> {
        self.check_jk(&f.grid, j, k)?;
        let g = f.grid;
        let pk = self.shell(f, k);
        let mut phys = inverse_transform(&pk);
        for (i, v) in phys.iter_mut().enumerate() {
            *v *= self.spatial_weight(&g, g.x(i), j, k);
        }
        forward_transform(g, &phys, f.tag)
    }

    /// `𝒬_jk f = P_{[k-2,k+2]} Q_jk f`.
    pub fn project_script_q_jk(&self, f: &SpectralField, j: i32, k: i32) -> Result<SpectralField> {
        let q = self.project_q_jk(f, j, k)?;
        Ok(self.project_range(&q, k - 2, k + 2))
    }

    /// Admissible spatial indices for shell `k` on this grid.
    pub fn j_indices(&self, grid: &FourierGrid, k: i32) -> std::ops::RangeInclusive<i32> {
        let lo = DyadicIndex::j_min(k);
        lo..=j_max(grid).max(lo)
    }

    /// `A_k = ‖P_k f‖ + Σ_ℓ ‖φ_k ∂_{ξ_ℓ} f̂‖`.
    pub fn a_k(&self, f: &SpectralField, k: i32) -> Result<f64> {
        let mut s = self.shell(f, k).l2_norm();
        for axis in 0..3 {
            s += self.shell(&xi_derivative(f, axis)?, k).l2_norm();
        }
        Ok(s)
    }

    /// `B_k = (Σ_j 2^{2j} ‖Q_jk f‖²)^{1/2}`.
    pub fn b_k(&self, f: &SpectralField, k: i32) -> Result<f64> {
        let mut s = 0.0;
        for j in self.j_indices(&f.grid, k) {
            let q = self.project_q_jk(f, j, k)?;
            s += (2f64).powi(2 * j) * q.l2_norm().powi(2);
        }
        Ok(s.sqrt())
    }
}

/// Pointwise product of two fields through physical space, without
/// de-aliasing.
pub fn physical_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.grid.check_same(&g.grid)?;
    let a = inverse_transform(f);
    let b = inverse_transform(g);
    let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    forward_transform(f.grid, &prod, f.tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, FieldTag};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(g: FourierGrid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..g.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        SpectralField::from_values(g, FieldTag::Scalar, v).unwrap()
    }

    /// A sum of a few Gaussian bumps in physical space.
    fn smooth_field(g: FourierGrid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps: Vec<([f64; 3], f64, f64)> = (0..3)
            .map(|_| {
                let c = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                (c, rng.gen_range(1.5..3.0), rng.gen_range(0.5..1.5))
            })
            .collect();
        let phys: Vec<C64> = (0..g.len())
            .map(|i| {
                let x = g.x(i);
                let v: f64 = bumps
                    .iter()
                    .map(|(c, w, a)| {
                        let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
                        a * (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * w * w)).exp()
                    })
                    .sum();
                C64::new(v, 0.0)
            })
            .collect();
        forward_transform(g, &phys, FieldTag::Scalar).unwrap()
    }

    #[test]
    fn bump_values() {
        assert_eq!(canonical_bump(0.3), 1.0);
        assert_eq!(canonical_bump(1.0), 1.0);
        assert_eq!(canonical_bump(2.0), 0.0);
        assert!((canonical_bump(1.5) - 0.5).abs() < 1e-15);
        for k in -4..4 {
            assert_eq!(dyadic_cutoff((k as f64).exp2(), k), 1.0);
        }
        assert_eq!(phi_leq(0.0, 0.0), 1.0);
    }

    #[test]
    fn time_cutoff_examples() {
        assert_eq!(time_cutoff(0.5, 0), 1.0);
        assert_eq!(time_cutoff(16.1, 3), 0.0);
        for i in 0..=4000 {
            let t = 200.0 * i as f64 / 4000.0;
            let s: f64 = (0..=8).map(|m| time_cutoff(t, m)).sum();
            assert!((s - 1.0).abs() < 1e-14, "t={t} sum={s}");
        }
    }

    #[test]
    fn time_cutoff_supports_and_slopes() {
        for m in 0..8u32 {
            let (lo, hi) = if m == 0 { (0.0, 2.0) } else { ((m as f64 - 1.0).exp2(), (m as f64 + 1.0).exp2()) };
            let h = 1e-4 * (m as f64).exp2();
            let mut max_slope: f64 = 0.0;
            for i in 0..2000 {
                let t = 600.0 * i as f64 / 2000.0;
                if t < lo || t > hi {
                    assert_eq!(time_cutoff(t, m), 0.0, "m={m} t={t}");
                }
                if t >= h {
                    let d = (time_cutoff(t + h, m) - time_cutoff(t - h, m)) / (2.0 * h);
                    max_slope = max_slope.max(d.abs());
                }
            }
            // |τ_m'| ≲ 2^{-m}
            assert!(max_slope * (m as f64).exp2() < 4.0, "m={m} slope={max_slope}");
        }
    }

    #[test]
    fn frequency_partition_of_unity() {
        for i in 0..=10000 {
            let z = (-5.0 + 10.0 * i as f64 / 10000.0).exp2();
            let s: f64 = (-6..=6).map(|k| dyadic_cutoff(z, k)).sum();
            assert!((s - 1.0).abs() < 1e-14, "z={z}");
        }
    }

    #[test]
    fn shell_supports() {
        for k in -3..3 {
            for i in 0..1000 {
                let z = 10.0 * i as f64 / 1000.0;
                if z < (k as f64 - 1.0).exp2() || z > (k as f64 + 1.0).exp2() {
                    assert_eq!(dyadic_cutoff(z, k), 0.0);
                }
            }
        }
    }

    #[test]
    fn phi_j_k_bottom_index() {
        assert_eq!(phi_j_k(0.0, 2, -2), 1.0);
        assert_eq!(phi_j_k(0.0, 3, -2), 0.0);
        assert_eq!(phi_j_k(0.0, 0, 1), 1.0);
        assert_eq!(phi_j_k(3.0, 2, -1), dyadic_cutoff(3.0, 2));
    }

    #[test]
    fn window_on_default_grid() {
        let g = make_grid(32, 16.0 * PI).unwrap();
        assert_eq!(resolvable_window(&g), (-2, 0));
        let p = Projector::default();
        let f = random_field(g, 1);
        assert!(matches!(p.project_p_k(&f, 1), Err(Error::Range(_))));
        assert!(p.project_p_k(&f, -2).is_ok());
    }

    #[test]
    fn shells_sum_to_identity_on_band() {
        let g = make_grid(32, 16.0 * PI).unwrap();
        let p = Projector::default();
        let (lo, hi) = resolvable_window(&g);
        let f = random_field(g, 2);
        // Σ_{k=lo}^{hi} φ_k ≡ 1 on 2^lo ≤ |ξ| ≤ 2^hi
        let (a, b) = ((lo as f64).exp2(), (hi as f64).exp2());
        let band = f.multiply_radial(|r| if r >= a && r <= b { 1.0 } else { 0.0 });
        assert!(band.l2_norm() > 0.1 * f.l2_norm());
        let sum = p.sum_shells(&band, lo - 1, hi + 1);
        assert!(sum.l2_dist(&band) <= 1e-12 * band.l2_norm());
    }

    #[test]
    fn distant_shells_are_orthogonal() {
        let g = make_grid(16, 8.0 * PI).unwrap();
        let p = Projector::default();
        let f = random_field(g, 3);
        for k in -2..1 {
            let out = p.shell(&p.shell(&f, k), k + 2);
            assert_eq!(out.sup_norm(), 0.0);
        }
    }

    #[test]
    fn single_mode_at_shell_center_is_kept() {
        let g = make_grid(32, 16.0 * PI).unwrap();
        let p = Projector::default();
        let mut f = SpectralField::zeros(g, FieldTag::Scalar);
        let idx = g.index_of([2, 0, 0]); // |ξ| = 1/4 = 2^{-2}
        f.values[idx] = C64::new(0.7, -0.2);
        let out = p.project_p_k(&f, -2).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn spatial_shells_sum_to_p_k() {
        let g = make_grid(32, 16.0 * PI).unwrap();
        let p = Projector::default();
        let f = random_field(g, 4);
        for k in -2..=0 {
            let pk = p.shell(&f, k);
            let mut acc_q = SpectralField::zeros(g, FieldTag::Scalar);
            let mut acc_sq = SpectralField::zeros(g, FieldTag::Scalar);
            for j in p.j_indices(&g, k) {
                acc_q.add_assign(&p.project_q_jk(&f, j, k).unwrap());
                acc_sq.add_assign(&p.project_script_q_jk(&f, j, k).unwrap());
            }
            assert!(acc_q.l2_dist(&pk) <= 1e-12 * pk.l2_norm(), "k={k}");
            assert!(acc_sq.l2_dist(&pk) <= 1e-10 * pk.l2_norm(), "k={k}");
        }
    }

    #[test]
    fn q_jk_rejects_inadmissible_indices() {
        let g = make_grid(16, 8.0 * PI).unwrap();
        let p = Projector::default();
        let f = random_field(g, 5);
        assert!(matches!(p.project_q_jk(&f, 1, -2), Err(Error::Domain(_))));
        assert!(matches!(p.project_q_jk(&f, -1, 1), Err(Error::Domain(_))));
    }

    /// `‖Q̂_jk f - 𝒬̂_jk f‖_∞ / (2^{3j/2} 2^{-4(j+k)} ‖P_k f‖)`, maximized over
    /// admissible `(j, k)`.
    fn localization_ratio(p: &Projector, f: &SpectralField) -> f64 {
        let g = f.grid;
        let (lo, hi) = resolvable_window(&g);
        let mut worst: f64 = 0.0;
        for k in lo..=hi {
            let pk = p.shell(f, k).l2_norm();
            for j in p.j_indices(&g, k) {
                let q = p.project_q_jk(f, j, k).unwrap();
                let sq = p.project_range(&q, k - 2, k + 2);
                let diff = q.sub(&sq).sup_norm();
                let scale = (1.5 * j as f64).exp2() * (-4.0 * (j + k) as f64).exp2() * pk;
                worst = worst.max(diff / scale);
            }
        }
        worst
    }

    #[test]
    fn localization_constant_is_stable() {
        let g = make_grid(32, 16.0 * PI).unwrap();
        let p = Projector::default();
        let fitted = (0..3).map(|s| localization_ratio(&p, &random_field(g, 100 + s))).fold(0.0, f64::max);
        eprintln!("fitted localization constant C = {fitted:.4e}");
        assert!(fitted.is_finite());
        for s in 0..3 {
            let r = localization_ratio(&p, &random_field(g, 200 + s));
            assert!(r <= LOCALIZATION_SLACK * fitted, "seed {s}: {r:.3e} vs fitted {fitted:.3e}");
        }
    }

    const LOCALIZATION_SLACK: f64 = 2.0;

    #[test]
    fn bony_support_property() {
        let g = make_grid(64, 32.0 * PI).unwrap();
        let p = Projector::default();
        let k2 = -1;
        for (k1, seed) in [(-4, 6u64), (-5, 7)] {
            let f = p.shell(&random_field(g, seed), k1);
            let h = p.shell(&random_field(g, seed + 50), k2);
            let prod = physical_product(&f, &h).unwrap();
            let total = prod.l2_norm();
            for k in -8..=3 {
                let part = p.shell(&prod, k).l2_norm();
                if (k - k2).abs() >= 3 {
                    assert!(part <= 1e-13 * total, "k1={k1} k={k} part={part:.3e}");
                }
            }
        }
        // k1 = k2 - 2 still produces nothing above k2 + 2
        let f = p.shell(&random_field(g, 8), k2 - 2);
        let h = p.shell(&random_field(g, 9), k2);
        let prod = physical_product(&f, &h).unwrap();
        for k in (k2 + 3)..=3 {
            assert!(p.shell(&prod, k).l2_norm() <= 1e-13 * prod.l2_norm());
        }
    }

    fn a_b_constants(p: &Projector, f: &SpectralField) -> (f64, f64) {
        let (lo, hi) = resolvable_window(&f.grid);
        let ks: Vec<i32> = (lo - 4..=hi + 4).collect();
        let a: Vec<f64> = ks.iter().map(|&k| p.a_k(f, k).unwrap()).collect();
        let b: Vec<f64> = ks.iter().map(|&k| p.b_k(f, k).unwrap()).collect();
        let mut c_ab: f64 = 0.0;
        let mut c_ba: f64 = 0.0;
        for (i, &k) in ks.iter().enumerate() {
            if k < lo || k > hi {
                continue;
            }
            let near_b: f64 = ks.iter().zip(&b).filter(|(&kk, _)| (kk - k).abs() <= 4).map(|(_, v)| v).sum();
            c_ab = c_ab.max(a[i] / near_b);
            let weighted_a: f64 = if k >= 0 {
                ks.iter().zip(&a).filter(|(&kk, _)| (kk - k).abs() <= 4).map(|(_, v)| v).sum()
            } else {
                ks.iter().zip(&a).map(|(&kk, v)| v * (-((k - kk).abs() as f64) / 2.0).exp2()).sum()
            };
            c_ba = c_ba.max(b[i] / weighted_a);
        }
        (c_ab, c_ba)
    }

    #[test]
    fn shell_norms_are_comparable() {
        let g = make_grid(32, 16.0 * PI).unwrap();
        let p = Projector::default();
        let consts: Vec<(f64, f64)> = (0..3).map(|s| a_b_constants(&p, &smooth_field(g, 300 + s))).collect();
        eprintln!("A_k ≤ C Σ B constants {consts:?}");
        let (amax, amin) = consts.iter().fold((0.0f64, f64::MAX), |(m, n), c| (m.max(c.0), n.min(c.0)));
        let (bmax, bmin) = consts.iter().fold((0.0f64, f64::MAX), |(m, n), c| (m.max(c.1), n.min(c.1)));
        assert!(amax.is_finite() && bmax.is_finite());
        assert!(amax / amin <= COMPARABILITY_SPREAD && bmax / bmin <= COMPARABILITY_SPREAD);
    }

    const COMPARABILITY_SPREAD: f64 = 3.0;

    proptest! {
        #[test]
        fn partition_holds_on_random_points(z in 0.04f64..30.0) {
            let s: f64 = (-6..=6).map(|k| dyadic_cutoff(z, k)).sum();
            prop_assert!((s - 1.0).abs() < 1e-14);
        }

        #[test]
        fn cutoffs_lie_in_unit_interval(z in 0.0f64..50.0, k in -6i32..6) {
            let v = dyadic_cutoff(z, k);
            prop_assert!((0.0..=1.0).contains(&v));
            let w = phi_leq(z, k as f64);
            prop_assert!((0.0..=1.0).contains(&w));
        }
    }
}

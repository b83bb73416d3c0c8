//! Bilinear Duhamel integrands
//!
//! ```text
//! I_wa^{ι1ι2}[F,G](t,ξ) = ¼(2π)^{-3/2} ∫ e^{itΦ_wa} a_{ι1ι2}(ξ,η) F̂(ξ-η) Ĝ(η) dη
//! I_kg^{ι1ι2}[F,G](t,ξ) = ¼(2π)^{-3/2} ∫ e^{itΦ_kg} b_{ι1ι2}(ξ,η) F̂(ξ-η) Ĝ(η) dη
//! ```
//!
//! evaluated by splitting `e^{itΦ}` into the three propagators and the
//! multiplier into separated symbols `m1(ξ-η) m2(η)`; each separated term is
//! a physical-space product of two inverse transforms.

use crate::error::{Error, Result};
use crate::phase::{multiplier, Equation, PhaseSpec};
use crate::spectral::{
    forward_transform, inverse_transform, japanese, DispersionKind, FieldTag, FourierGrid, Sign, SpectralField, C64,
};

/// Largest grid the brute-force oracle accepts.
pub const ORACLE_MAX_N: usize = 12;

#[derive(Clone, Copy)]
pub struct BilinearJob<'a> {
    pub kind: Equation,
    pub i1: Sign,
    pub i2: Sign,
    /// Profile entering at `ξ - η`.
    pub f: &'a SpectralField,
    /// Profile entering at `η`.
    pub g: &'a SpectralField,
    pub t: f64,
}

impl<'a> BilinearJob<'a> {
    pub fn new(kind: Equation, i1: Sign, i2: Sign, f: &'a SpectralField, g: &'a SpectralField, t: f64) -> Self {
        Self { kind, i1, i2, f, g, t }
    }

    pub fn phase_spec(&self) -> PhaseSpec {
        PhaseSpec::of(self.kind, self.i1, self.i2)
    }

    fn check(&self) -> Result<FourierGrid> {
        self.f.grid.check_same(&self.g.grid)?;
        Ok(self.f.grid)
    }
}

/// Lattice symbol tables shared by all evaluations on one grid.
#[derive(Clone, Debug)]
pub struct Symbols {
    pub grid: FourierGrid,
    pub r: Vec<f64>,
    pub jap: Vec<f64>,
    pub xi: [Vec<f64>; 3],
    pub mask: Vec<bool>,
}

impl Symbols {
    pub fn new(grid: FourierGrid) -> Self {
        let n = grid.len();
        let mut xi = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut r = vec![0.0; n];
        let mut jap = vec![0.0; n];
        let mut mask = vec![false; n];
        for i in 0..n {
            let x = grid.xi(i);
            for a in 0..3 {
                xi[a][i] = x[a];
            }
            r[i] = grid.xi_norm(i);
            jap[i] = japanese(r[i]);
            mask[i] = grid.is_dealiased_mode(i);
        }
        Self { grid, r, jap, xi, mask }
    }

    pub fn lambda(&self, kind: DispersionKind, i: usize) -> f64 {
        kind.sign.value()
            * match kind.family {
                crate::spectral::Family::Wave => self.r[i],
                crate::spectral::Family::KleinGordon => self.jap[i],
            }
    }

    /// `e^{itΛ_kind} f`, optionally restricted to the 2/3 box.
    pub fn propagate(&self, f: &SpectralField, kind: DispersionKind, t: f64, dealias: bool) -> SpectralField {
        let values = f
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if dealias && !self.mask[i] {
                    C64::new(0.0, 0.0)
                } else {
                    v * C64::from_polar(1.0, t * self.lambda(kind, i))
                }
            })
            .collect();
        SpectralField { grid: f.grid, values, tag: f.tag }
    }
}

/// Separated symbol `m(ζ)` applied to one factor.
#[derive(Clone, Copy, Debug)]
enum Sym {
    One,
    InvJap,
    /// `ζ_i / ⟨ζ⟩`
    Riesz(usize),
    /// `|ζ|² / ⟨ζ⟩`
    SqOverJap,
    /// `1 / |ζ|`, zero at the origin
    InvAbs,
}

impl Sym {
    fn eval(self, s: &Symbols, i: usize) -> f64 {
        match self {
            Sym::One => 1.0,
            Sym::InvJap => 1.0 / s.jap[i],
            Sym::Riesz(a) => s.xi[a][i] / s.jap[i],
            Sym::SqOverJap => s.r[i] * s.r[i] / s.jap[i],
            Sym::InvAbs => {
                if s.r[i] == 0.0 {
                    0.0
                } else {
                    1.0 / s.r[i]
                }
            }
        }
    }

    /// Parity: `m(-ζ) = parity · m(ζ)`.
    fn parity(self) -> f64 {
        match self {
            Sym::Riesz(_) => -1.0,
            _ => 1.0,
        }
    }
}

/// Separated expansion of the multiplier: terms `(coeff, m1, m2)` with the
/// coefficient multiplied by `ι1ι2` when the flag is set.
fn separated_terms(kind: Equation) -> Vec<(f64, bool, Sym, Sym)> {
    match kind {
        Equation::Wave => vec![
            (1.0, false, Sym::One, Sym::One),
            (-1.0, true, Sym::InvJap, Sym::InvJap),
            (1.0, true, Sym::Riesz(0), Sym::Riesz(0)),
            (1.0, true, Sym::Riesz(1), Sym::Riesz(1)),
            (1.0, true, Sym::Riesz(2), Sym::Riesz(2)),
        ],
        Equation::KleinGordon => vec![(1.0, true, Sym::SqOverJap, Sym::InvAbs)],
    }
}

fn input_kinds(kind: Equation, i1: Sign, i2: Sign) -> (DispersionKind, DispersionKind) {
    let spec = PhaseSpec::of(kind, i1, i2);
    spec.inputs
}

fn output_kind(kind: Equation) -> DispersionKind {
    match kind {
        Equation::Wave => DispersionKind::WA,
        Equation::KleinGordon => DispersionKind::KG,
    }
}

fn apply_symbol(s: &Symbols, f: &SpectralField, m: Sym) -> SpectralField {
    f.map(|i, v| v * m.eval(s, i))
}

/// Fast evaluator for the bilinear integrands on one grid.
#[derive(Clone, Debug)]
pub struct Engine {
    pub symbols: Symbols,
    pub dealias: bool,
}

impl Engine {
    pub fn new(grid: FourierGrid, dealias: bool) -> Self {
        Self { symbols: Symbols::new(grid), dealias }
    }

    pub fn grid(&self) -> FourierGrid {
        self.symbols.grid
    }

    fn finish(&self, mut product: Vec<C64>, kind: Equation, t: f64) -> Result<SpectralField> {
        let g = self.grid();
        let tag = match kind {
            Equation::Wave => FieldTag::Wa,
            Equation::KleinGordon => FieldTag::Kg,
        };
        let mut out = forward_transform(g, &product, tag)?;
        product.clear();
        let s = &self.symbols;
        let sigma = output_kind(kind);
        for (i, v) in out.values.iter_mut().enumerate() {
            if self.dealias && !s.mask[i] {
                *v = C64::new(0.0, 0.0);
            } else {
                *v *= 0.25 * C64::from_polar(1.0, t * s.lambda(sigma, i));
            }
        }
        Ok(out)
    }

    /// `I_kind^{ι1ι2}[F, G](t)` via separated symbols.
    pub fn eval_bilinear(&self, job: &BilinearJob) -> Result<SpectralField> {
        let g = job.check()?;
        g.check_same(&self.grid())?;
        let s = &self.symbols;
        let (mu, nu) = input_kinds(job.kind, job.i1, job.i2);
        let uf = s.propagate(job.f, mu, -job.t, self.dealias);
        let ug = s.propagate(job.g, nu, -job.t, self.dealias);
        let sign = job.i1.value() * job.i2.value();
        let mut acc = vec![C64::new(0.0, 0.0); g.len()];
        for (c, signed, m1, m2) in separated_terms(job.kind) {
            let coeff = if signed { c * sign } else { c };
            let a = inverse_transform(&apply_symbol(s, &uf, m1));
            let b = inverse_transform(&apply_symbol(s, &ug, m2));
            for ((acc, x), y) in acc.iter_mut().zip(&a).zip(&b) {
                *acc += coeff * x * y;
            }
        }
        self.finish(acc, job.kind, job.t)
    }

    /// Inverse transform of `Σ_ι ι^{signed} m U^ι` where `U^- = conj_reflect(U^+)`,
    /// using `IFT(m U^-) = parity(m) · conj(IFT(m U))`.
    fn signed_sum(&self, u: &SpectralField, m: Sym, signed: bool) -> Vec<C64> {
        let w = inverse_transform(&apply_symbol(&self.symbols, u, m));
        let minus = if signed { -m.parity() } else { m.parity() };
        w.iter().map(|z| z + minus * z.conj()).collect()
    }

    /// Profile right-hand sides `(∂t V̂^wa, ∂t V̂^kg)`: the sums over the four
    /// sign pairs of each equation, with the minus inputs built by
    /// conjugate reflection. The four jobs are combined factor by factor.
    pub fn rhs_profiles(&self, vwa: &SpectralField, vkg: &SpectralField, t: f64) -> Result<(SpectralField, SpectralField)> {
        vwa.grid.check_same(&self.grid())?;
        vkg.grid.check_same(&self.grid())?;
        let s = &self.symbols;
        let ukg = s.propagate(vkg, DispersionKind::KG, -t, self.dealias);
        let uwa = s.propagate(vwa, DispersionKind::WA, -t, self.dealias);
        let n = self.grid().len();

        let mut pw = vec![C64::new(0.0, 0.0); n];
        for (c, signed, m1, _) in separated_terms(Equation::Wave) {
            // both factors carry the same symbol, so each term is a square
            let a = self.signed_sum(&ukg, m1, signed);
            for (p, x) in pw.iter_mut().zip(&a) {
                *p += c * x * x;
            }
        }
        let rwa = self.finish(pw, Equation::Wave, t)?;

        let d = self.signed_sum(&ukg, Sym::SqOverJap, true);
        let e = self.signed_sum(&uwa, Sym::InvAbs, true);
        let pk: Vec<C64> = d.iter().zip(&e).map(|(x, y)| x * y).collect();
        let rkg = self.finish(pk, Equation::KleinGordon, t)?;
        Ok((rwa, rkg))
    }

    /// The same right-hand sides as an explicit sum of the eight jobs.
    pub fn rhs_profiles_by_jobs(&self, vwa: &SpectralField, vkg: &SpectralField, t: f64) -> Result<(SpectralField, SpectralField)> {
        let mut rwa = SpectralField::zeros(self.grid(), FieldTag::Wa);
        let mut rkg = SpectralField::zeros(self.grid(), FieldTag::Kg);
        for i1 in Sign::BOTH {
            for i2 in Sign::BOTH {
                let (f1, f2) = (vkg.signed(i1), vkg.signed(i2));
                rwa.add_assign(&self.eval_bilinear(&BilinearJob::new(Equation::Wave, i1, i2, &f1, &f2, t))?);
                let h = vwa.signed(i2);
                rkg.add_assign(&self.eval_bilinear(&BilinearJob::new(Equation::KleinGordon, i1, i2, &f1, &h, t))?);
            }
        }
        Ok((rwa, rkg))
    }
}

/// Literal wraparound double-lattice sum of
/// `¼(2π)^{-3/2} Σ_η e^{itΦ(ξ,η)} m(ξ,η) F̂(ξ-η) Ĝ(η) Δη³`, without
/// de-aliasing. `ξ - η` is reduced to its representative on the lattice;
/// Nyquist rows of the output are zero, as everywhere else.
pub fn eval_bilinear_oracle(job: &BilinearJob) -> Result<SpectralField> {
    let g = job.check()?;
    if g.n() > ORACLE_MAX_N {
        return Err(Error::CostGuard(format!("{}³ exceeds the {}³ limit", g.n(), ORACLE_MAX_N)));
    }
    let spec = job.phase_spec();
    let pref = 0.25 * (2.0 * std::f64::consts::PI).powf(-1.5) * g.spectral_cell();
    let modes: Vec<[i64; 3]> = (0..g.len()).map(|i| g.modes(i)).collect();
    let xis: Vec<[f64; 3]> = (0..g.len()).map(|i| g.xi(i)).collect();
    let mut out = SpectralField::zeros(
        g,
        match job.kind {
            Equation::Wave => FieldTag::Wa,
            Equation::KleinGordon => FieldTag::Kg,
        },
    );
    for xi_i in 0..g.len() {
        if g.is_nyquist(xi_i) {
            continue;
        }
        let mx = modes[xi_i];
        let xi = xis[xi_i];
        let mut acc = C64::new(0.0, 0.0);
        for eta_i in 0..g.len() {
            let ge = job.g.values[eta_i];
            if ge == C64::new(0.0, 0.0) {
                continue;
            }
            let me = modes[eta_i];
            let z_i = g.index_of([mx[0] - me[0], mx[1] - me[1], mx[2] - me[2]]);
            let fz = job.f.values[z_i];
            if fz == C64::new(0.0, 0.0) {
                continue;
            }
            let zeta = xis[z_i];
            let eta = xis[eta_i];
            // ξ - η at its lattice representative, so η is recovered as ξ - ζ
            let eta_eff = [xi[0] - zeta[0], xi[1] - zeta[1], xi[2] - zeta[2]];
            let ph = phase_split(spec, xi, zeta, eta);
            let m = multiplier_split(job, xi, zeta, eta, eta_eff);
            acc += C64::from_polar(m, job.t * ph) * fz * ge;
        }
        out.values[xi_i] = acc * pref;
    }
    Ok(out)
}

/// `Λ_σ(ξ) - Λ_μ(ζ) - Λ_ν(η)` with `ζ` and `η` the lattice representatives.
fn phase_split(spec: PhaseSpec, xi: [f64; 3], zeta: [f64; 3], eta: [f64; 3]) -> f64 {
    use crate::spectral::dispersion_symbol;
    dispersion_symbol(spec.output, xi) - dispersion_symbol(spec.inputs.0, zeta) - dispersion_symbol(spec.inputs.1, eta)
}

/// The multiplier on the lattice: when `ξ - η` does not wrap, this is the
/// plain `a` or `b`; otherwise the factors are evaluated at the
/// representatives.
fn multiplier_split(job: &BilinearJob, xi: [f64; 3], zeta: [f64; 3], eta: [f64; 3], eta_eff: [f64; 3]) -> f64 {
    let wraps = (0..3).any(|a| (eta_eff[a] - eta[a]).abs() > 1e-9);
    if !wraps {
        return multiplier(job.kind, job.i1, job.i2, xi, eta);
    }
    let s = job.i1.value() * job.i2.value();
    let jz = japanese(crate::spectral::norm3(zeta));
    let re = crate::spectral::norm3(eta);
    let je = japanese(re);
    match job.kind {
        Equation::Wave => {
            let d = zeta[0] * eta[0] + zeta[1] * eta[1] + zeta[2] * eta[2];
            1.0 + s * (d - 1.0) / (jz * je)
        }
        Equation::KleinGordon => {
            if re == 0.0 {
                0.0
            } else {
                let z2 = zeta[0] * zeta[0] + zeta[1] * zeta[1] + zeta[2] * zeta[2];
                s * z2 / (jz * re)
            }
        }
    }
}

//! Physical solutions, normalized solutions and profiles, and the
//! vector fields `Γ_j = x_j∂_t + t∂_j`, `Ω_ab = x_a∂_b - x_b∂_a`, `∂_α`.
//!
//! `U^wa = ∂_t u - i|∇|u`, `U^kg = ∂_t v - i⟨∇⟩v`, `V = e^{itΛ}U`. The zero
//! frequency of `u` is not recoverable from `U^wa` and is set to 0.

use std::fmt;

use crate::error::{Error, Result};
use crate::spectral::{
    forward_transform_real, inverse_transform, japanese, propagate, x_derivative, DispersionKind, FieldTag,
    FourierGrid, SpectralField, C64,
};

/// Hard cap on vector-field word length.
pub const MAX_VECTOR_FIELD_ORDER: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalState {
    pub grid: FourierGrid,
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub v: Vec<f64>,
    pub vt: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedState {
    pub t: f64,
    pub wa: SpectralField,
    pub kg: SpectralField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileState {
    pub t: f64,
    pub wa: SpectralField,
    pub kg: SpectralField,
}

impl PhysicalState {
    pub fn zeros(grid: FourierGrid, t: f64) -> Self {
        let z = vec![0.0; grid.len()];
        Self { grid, t, u: z.clone(), ut: z.clone(), v: z.clone(), vt: z }
    }

    fn check(&self) -> Result<()> {
        let n = self.grid.len();
        for (name, f) in [("u", &self.u), ("ut", &self.ut), ("v", &self.v), ("vt", &self.vt)] {
            if f.len() != n {
                return Err(Error::Shape(format!("{name} has {} samples, expected {n}", f.len())));
            }
        }
        Ok(())
    }
}

impl ProfileState {
    pub fn zeros(grid: FourierGrid, t: f64) -> Self {
        Self { t, wa: SpectralField::zeros(grid, FieldTag::Wa), kg: SpectralField::zeros(grid, FieldTag::Kg) }
    }

    pub fn grid(&self) -> FourierGrid {
        self.wa.grid
    }
}

fn real_hat(grid: FourierGrid, f: &[f64]) -> Result<SpectralField> {
    forward_transform_real(grid, f, FieldTag::Scalar)
}

fn split_parts(z: &[C64]) -> (Vec<f64>, Vec<f64>) {
    (z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
}

pub fn normalize(state: &PhysicalState) -> Result<NormalizedState> {
    state.check()?;
    let g = state.grid;
    let (u, ut, v, vt) = (real_hat(g, &state.u)?, real_hat(g, &state.ut)?, real_hat(g, &state.v)?, real_hat(g, &state.vt)?);
    let wa = ut.map(|i, a| a - C64::new(0.0, g.xi_norm(i)) * u.values[i]).with_tag(FieldTag::Wa);
    let kg = vt.map(|i, a| a - C64::new(0.0, japanese(g.xi_norm(i))) * v.values[i]).with_tag(FieldTag::Kg);
    Ok(NormalizedState { t: state.t, wa, kg })
}

/// `∂_t u = Re U^wa`, `u = -|∇|^{-1} Im U^wa`, and likewise for `v` with
/// `⟨∇⟩`. Also returns the largest imaginary part left on the recovered
/// `u` and `v` before it is dropped.
pub fn recover_checked(state: &NormalizedState) -> Result<(PhysicalState, f64)> {
    let g = state.wa.grid;
    g.check_same(&state.kg.grid)?;
    let (ut, im_wa) = split_parts(&inverse_transform(&state.wa));
    let (vt, im_kg) = split_parts(&inverse_transform(&state.kg));
    let u_hat = real_hat(g, &im_wa)?.map(|i, c| {
        let r = g.xi_norm(i);
        if r == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            -c / r
        }
    });
    let v_hat = real_hat(g, &im_kg)?.map(|i, c| -c / japanese(g.xi_norm(i)));
    let (u, r1) = split_parts(&inverse_transform(&u_hat));
    let (v, r2) = split_parts(&inverse_transform(&v_hat));
    let residue = r1.iter().chain(&r2).fold(0.0, |m: f64, x| m.max(x.abs()));
    Ok((PhysicalState { grid: g, t: state.t, u, ut, v, vt }, residue))
}

pub fn recover(state: &NormalizedState) -> Result<PhysicalState> {
    recover_checked(state).map(|(s, _)| s)
}

pub fn to_profile(state: &NormalizedState) -> ProfileState {
    ProfileState {
        t: state.t,
        wa: propagate(&state.wa, DispersionKind::WA, state.t),
        kg: propagate(&state.kg, DispersionKind::KG, state.t),
    }
}

pub fn from_profile(state: &ProfileState) -> NormalizedState {
    NormalizedState {
        t: state.t,
        wa: propagate(&state.wa, DispersionKind::WA, -state.t),
        kg: propagate(&state.kg, DispersionKind::KG, -state.t),
    }
}

/// One generator; spatial axes are 0-based (`Gamma(0)` is `Γ₁`, `Omega(2)`
/// is `Ω₁₂`, `D(0)` is `∂_t`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    Gamma(usize),
    /// `Ω` with the axis it rotates about: `Omega(0) = Ω₂₃`, `Omega(1) = Ω₃₁`, `Omega(2) = Ω₁₂`.
    Omega(usize),
    /// `∂_α`, `α = 0` time and `1..=3` space.
    D(usize),
}

impl Generator {
    pub const ALL: [Generator; 10] = [
        Generator::Gamma(0),
        Generator::Gamma(1),
        Generator::Gamma(2),
        Generator::Omega(0),
        Generator::Omega(1),
        Generator::Omega(2),
        Generator::D(0),
        Generator::D(1),
        Generator::D(2),
        Generator::D(3),
    ];

    fn valid(self) -> bool {
        match self {
            Generator::Gamma(a) | Generator::Omega(a) => a < 3,
            Generator::D(a) => a < 4,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let g = match s {
            "G1" | "Γ1" => Generator::Gamma(0),
            "G2" | "Γ2" => Generator::Gamma(1),
            "G3" | "Γ3" => Generator::Gamma(2),
            "O23" | "Ω23" => Generator::Omega(0),
            "O31" | "Ω31" => Generator::Omega(1),
            "O12" | "Ω12" => Generator::Omega(2),
            "d0" | "∂0" => Generator::D(0),
            "d1" | "∂1" => Generator::D(1),
            "d2" | "∂2" => Generator::D(2),
            "d3" | "∂3" => Generator::D(3),
            _ => return Err(Error::Config(format!("unknown vector field {s:?}"))),
        };
        Ok(g)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Gamma(a) => write!(f, "G{}", a + 1),
            Generator::Omega(a) => write!(f, "O{}{}", (a + 1) % 3 + 1, (a + 2) % 3 + 1),
            Generator::D(a) => write!(f, "d{a}"),
        }
    }
}

/// A word `ℒ = L₁ L₂ … L_n`; the rightmost generator acts first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorFieldSpec {
    word: Vec<Generator>,
}

impl VectorFieldSpec {
    pub fn new(word: Vec<Generator>, max_order: usize) -> Result<Self> {
        if max_order > MAX_VECTOR_FIELD_ORDER {
            return Err(Error::Config(format!("max order {max_order} exceeds the cap {MAX_VECTOR_FIELD_ORDER}")));
        }
        if word.len() > max_order {
            return Err(Error::Config(format!("vector field of order {} exceeds max order {max_order}", word.len())));
        }
        if let Some(g) = word.iter().find(|g| !g.valid()) {
            return Err(Error::Config(format!("invalid generator {g:?}")));
        }
        Ok(Self { word })
    }

    pub fn identity() -> Self {
        Self { word: Vec::new() }
    }

    pub fn order(&self) -> usize {
        self.word.len()
    }

    pub fn word(&self) -> &[Generator] {
        &self.word
    }

    /// All words of length `1..=order`.
    pub fn all_words(order: usize) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        let mut layer = vec![Vec::new()];
        for _ in 0..order {
            let mut next = Vec::new();
            for w in &layer {
                for g in Generator::ALL {
                    let mut w2: Vec<Generator> = w.clone();
                    w2.push(g);
                    next.push(w2);
                }
            }
            for w in &next {
                out.push(Self::new(w.clone(), order)?);
            }
            layer = next;
        }
        Ok(out)
    }
}

impl fmt::Display for VectorFieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "id");
        }
        let parts: Vec<String> = self.word.iter().map(|g| g.to_string()).collect();
        write!(f, "{}", parts.join(""))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    U,
    V,
}

/// Source of second time derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    /// `∂_t² u = Δu`, `∂_t² v = Δv - v`.
    Linear,
    /// The coupled system with its quadratic terms.
    Nonlinear,
}

struct Spatial {
    grid: FourierGrid,
}

impl Spatial {
    fn d(&self, f: &[f64], axis: usize) -> Result<Vec<f64>> {
        let h = real_hat(self.grid, f)?;
        Ok(inverse_transform(&x_derivative(&h, axis)).iter().map(|c| c.re).collect())
    }

    fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        let g = self.grid;
        let h = real_hat(g, f)?.map(|i, c| -c * g.xi_norm(i).powi(2));
        Ok(inverse_transform(&h).iter().map(|c| c.re).collect())
    }

    /// `(Δ - m) f`
    fn klein_gordon(&self, f: &[f64], m: f64) -> Result<Vec<f64>> {
        let mut l = self.laplacian(f)?;
        for (a, b) in l.iter_mut().zip(f) {
            *a -= m * b;
        }
        Ok(l)
    }

    fn coord(&self, axis: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.grid.x(i)[axis]).collect()
    }
}

/// `(∂_t² u, ∂_t² v)` from the equations.
pub fn second_time_derivatives(state: &PhysicalState, dynamics: Dynamics) -> Result<(Vec<f64>, Vec<f64>)> {
    state.check()?;
    let s = Spatial { grid: state.grid };
    let mut utt = s.laplacian(&state.u)?;
    let lap_v = s.laplacian(&state.v)?;
    let mut vtt: Vec<f64> = lap_v.iter().zip(&state.v).map(|(a, b)| a - b).collect();
    if dynamics == Dynamics::Nonlinear {
        for i in 0..utt.len() {
            utt[i] += state.vt[i] * state.vt[i] + state.v[i] * state.v[i];
            vtt[i] += state.u[i] * lap_v[i];
        }
        for ax in 0..3 {
            let dv = s.d(&state.v, ax)?;
            for (a, b) in utt.iter_mut().zip(&dv) {
                *a += b * b;
            }
        }
    }
    Ok((utt, vtt))
}

/// Time jet `[f, ∂_t f, …, ∂_t^depth f]` of one component.
fn initial_jet(state: &PhysicalState, target: Target, dynamics: Dynamics, depth: usize) -> Result<Vec<Vec<f64>>> {
    let (f0, f1) = match target {
        Target::U => (&state.u, &state.ut),
        Target::V => (&state.v, &state.vt),
    };
    let mut jet = vec![f0.clone(), f1.clone()];
    if depth >= 2 {
        let (utt, vtt) = second_time_derivatives(state, dynamics)?;
        jet.push(match target {
            Target::U => utt,
            Target::V => vtt,
        });
    }
    if depth >= 3 {
        if dynamics == Dynamics::Nonlinear {
            return Err(Error::Unsupported("time derivatives beyond second order need the linear flow".into()));
        }
        let s = Spatial { grid: state.grid };
        let m = if target == Target::U { 0.0 } else { 1.0 };
        while jet.len() <= depth {
            let k = jet.len();
            let next = s.klein_gordon(&jet[k - 2], m)?;
            jet.push(next);
        }
    }
    jet.truncate(depth + 1);
    Ok(jet)
}

fn apply_generator(s: &Spatial, g: Generator, t: f64, jet: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let depth = jet.len() - 1;
    let mut out = Vec::with_capacity(depth);
    for k in 0..depth {
        let f = match g {
            Generator::D(0) => jet[k + 1].clone(),
            Generator::D(a) => s.d(&jet[k], a - 1)?,
            Generator::Omega(a) => {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                let dc = s.d(&jet[k], c)?;
                let db = s.d(&jet[k], b)?;
                let (xb, xc) = (s.coord(b), s.coord(c));
                (0..dc.len()).map(|i| xb[i] * dc[i] - xc[i] * db[i]).collect()
            }
            Generator::Gamma(j) => {
                // ∂_t^k (x_j ∂_t f + t ∂_j f) = x_j f_{k+1} + t ∂_j f_k + k ∂_j f_{k-1}
                let xj = s.coord(j);
                let dj = s.d(&jet[k], j)?;
                let mut r: Vec<f64> = (0..dj.len()).map(|i| xj[i] * jet[k + 1][i] + t * dj[i]).collect();
                if k > 0 {
                    let dp = s.d(&jet[k - 1], j)?;
                    for (a, b) in r.iter_mut().zip(&dp) {
                        *a += k as f64 * b;
                    }
                }
                r
            }
        };
        out.push(f);
    }
    Ok(out)
}

/// `[ℒf, ∂_t ℒf, …, ∂_t^extra ℒf]` for `f = u` or `v`.
pub fn apply_vector_field_jet(
    state: &PhysicalState,
    spec: &VectorFieldSpec,
    target: Target,
    dynamics: Dynamics,
    extra: usize,
) -> Result<Vec<Vec<f64>>> {
    let depth = spec.order() + extra;
    let mut jet = initial_jet(state, target, dynamics, depth.max(1))?;
    jet.truncate(depth + 1);
    let s = Spatial { grid: state.grid };
    for &g in spec.word().iter().rev() {
        jet = apply_generator(&s, g, state.t, &jet)?;
    }
    Ok(jet)
}

pub fn apply_vector_field(state: &PhysicalState, spec: &VectorFieldSpec, target: Target, dynamics: Dynamics) -> Result<Vec<f64>> {
    Ok(apply_vector_field_jet(state, spec, target, dynamics, 0)?.swap_remove(0))
}

/// Exact linear flow of a physical state to time `t`.
pub fn evolve_linear(state: &PhysicalState, t: f64) -> Result<PhysicalState> {
    let p = to_profile(&normalize(state)?);
    let mut q = p;
    q.t = t;
    recover(&from_profile(&q))
}

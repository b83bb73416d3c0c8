//! Quadratic phases, the multipliers of the two Duhamel integrands, the
//! resonance table and numerical probes of the phase lower bounds.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{dispersion_symbol, dot3, japanese, norm3, DispersionKind, Family, Sign, C64};

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Output equation of a quadratic interaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Equation {
    Wave,
    KleinGordon,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::Wave => "wa",
            Equation::KleinGordon => "kg",
        }
    }
}

/// `Φ_{σμν}(ξ, η) = Λ_σ(ξ) - Λ_μ(ξ - η) - Λ_ν(η)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseSpec {
    pub output: DispersionKind,
    pub inputs: (DispersionKind, DispersionKind),
}

impl PhaseSpec {
    /// `Φ_wa^{ι1ι2} = |ξ| - ι1⟨ξ-η⟩ - ι2⟨η⟩`.
    pub fn wa(i1: Sign, i2: Sign) -> Self {
        Self {
            output: DispersionKind::WA,
            inputs: (DispersionKind::new(Family::KleinGordon, i1), DispersionKind::new(Family::KleinGordon, i2)),
        }
    }

    /// `Φ_kg^{ι1ι2} = ⟨ξ⟩ - ι1⟨ξ-η⟩ - ι2|η|`.
    pub fn kg(i1: Sign, i2: Sign) -> Self {
        Self {
            output: DispersionKind::KG,
            inputs: (DispersionKind::new(Family::KleinGordon, i1), DispersionKind::new(Family::Wave, i2)),
        }
    }

    pub fn of(eq: Equation, i1: Sign, i2: Sign) -> Self {
        match eq {
            Equation::Wave => Self::wa(i1, i2),
            Equation::KleinGordon => Self::kg(i1, i2),
        }
    }

    /// The same phase with all three signs flipped.
    pub fn flipped(self) -> Self {
        let f = |k: DispersionKind| DispersionKind::new(k.family, k.sign.flip());
        Self { output: f(self.output), inputs: (f(self.inputs.0), f(self.inputs.1)) }
    }

    /// `(equation, ι1, ι2)` when the spec is one of the eight tabulated cases.
    pub fn tabulated(self) -> Option<(Equation, Sign, Sign)> {
        let (mu, nu) = self.inputs;
        if self.output == DispersionKind::WA && mu.family == Family::KleinGordon && nu.family == Family::KleinGordon {
            return Some((Equation::Wave, mu.sign, nu.sign));
        }
        if self.output == DispersionKind::KG && mu.family == Family::KleinGordon && nu.family == Family::Wave {
            return Some((Equation::KleinGordon, mu.sign, nu.sign));
        }
        None
    }
}

pub fn phase(spec: PhaseSpec, xi: [f64; 3], eta: [f64; 3]) -> f64 {
    dispersion_symbol(spec.output, xi)
        - dispersion_symbol(spec.inputs.0, sub3(xi, eta))
        - dispersion_symbol(spec.inputs.1, eta)
}

/// `a_{ι1ι2}(ξ, η) = 1 + ι1ι2((ξ-η)·η - 1)/(⟨ξ-η⟩⟨η⟩)`.
pub fn multiplier_a(i1: Sign, i2: Sign, xi: [f64; 3], eta: [f64; 3]) -> f64 {
    let z = sub3(xi, eta);
    let s = i1.value() * i2.value();
    1.0 + s * (dot3(z, eta) - 1.0) / (japanese(norm3(z)) * japanese(norm3(eta)))
}

/// `b_{ι1ι2}(ξ, η) = ι1ι2|ξ-η|²/(⟨ξ-η⟩|η|)`, set to zero at `η = 0`.
pub fn multiplier_b(i1: Sign, i2: Sign, xi: [f64; 3], eta: [f64; 3]) -> f64 {
    let r = norm3(eta);
    if r == 0.0 {
        return 0.0;
    }
    let z = norm3(sub3(xi, eta));
    i1.value() * i2.value() * z * z / (japanese(z) * r)
}

pub fn multiplier(eq: Equation, i1: Sign, i2: Sign, xi: [f64; 3], eta: [f64; 3]) -> f64 {
    match eq {
        Equation::Wave => multiplier_a(i1, i2, xi, eta),
        Equation::KleinGordon => multiplier_b(i1, i2, xi, eta),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeadingPhaseKind {
    /// Low-frequency wave output: `|ξ| + ι ξ·η/⟨η⟩`.
    WaBulk,
    /// High-low KG interaction: `ξ·η/⟨ξ⟩ - ι|η|`.
    KgHighLow,
}

pub fn leading_phase(kind: LeadingPhaseKind, iota: Sign, xi: [f64; 3], eta: [f64; 3]) -> f64 {
    match kind {
        LeadingPhaseKind::WaBulk => norm3(xi) + iota.value() * dot3(xi, eta) / japanese(norm3(eta)),
        LeadingPhaseKind::KgHighLow => dot3(xi, eta) / japanese(norm3(xi)) - iota.value() * norm3(eta),
    }
}

/// Descriptor of a resonance set in `(ξ, η)` space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ResonanceSet {
    Empty,
    XiZero,
    EtaZero,
    XiTwiceEta,
}

impl ResonanceSet {
    pub fn contains(self, xi: [f64; 3], eta: [f64; 3]) -> bool {
        match self {
            ResonanceSet::Empty => false,
            ResonanceSet::XiZero => norm3(xi) == 0.0,
            ResonanceSet::EtaZero => norm3(eta) == 0.0,
            ResonanceSet::XiTwiceEta => norm3(sub3(xi, [2.0 * eta[0], 2.0 * eta[1], 2.0 * eta[2]])) == 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ResonanceReport {
    pub time_resonant: ResonanceSet,
    pub space_resonant: ResonanceSet,
    pub spacetime: ResonanceSet,
    pub stationary: bool,
}

pub fn classify_resonances(spec: PhaseSpec) -> Result<ResonanceReport> {
    let (eq, i1, i2) = spec
        .tabulated()
        .ok_or_else(|| Error::Unsupported(format!("phase {spec:?} is not one of the eight tabulated cases")))?;
    let same = i1 == i2;
    let report = match (eq, same) {
        (Equation::Wave, true) => ResonanceReport {
            time_resonant: ResonanceSet::Empty,
            space_resonant: ResonanceSet::XiTwiceEta,
            spacetime: ResonanceSet::Empty,
            stationary: false,
        },
        (Equation::Wave, false) => ResonanceReport {
            time_resonant: ResonanceSet::XiZero,
            space_resonant: ResonanceSet::XiZero,
            spacetime: ResonanceSet::XiZero,
            stationary: true,
        },
        (Equation::KleinGordon, _) if i1 == Sign::Minus => ResonanceReport {
            time_resonant: ResonanceSet::Empty,
            space_resonant: ResonanceSet::EtaZero,
            spacetime: ResonanceSet::Empty,
            stationary: false,
        },
        (Equation::KleinGordon, _) => ResonanceReport {
            time_resonant: ResonanceSet::EtaZero,
            space_resonant: ResonanceSet::EtaZero,
            spacetime: ResonanceSet::EtaZero,
            stationary: true,
        },
    };
    Ok(report)
}

/// Result of a Monte-Carlo check of `|Φ| ≥ (|ξ| or |η|)/(4b²)`.
#[derive(Clone, Debug, Serialize)]
pub struct MarginReport {
    pub case: String,
    pub b: f64,
    pub samples: usize,
    pub min_ratio: f64,
    pub argmin: ([f64; 3], [f64; 3]),
}

impl MarginReport {
    pub fn pass(&self) -> bool {
        self.min_ratio >= 1.0
    }

    pub fn csv_header() -> &'static str {
        "case,b,samples,min_ratio,argmin"
    }

    pub fn csv_row(&self) -> String {
        let (x, e) = self.argmin;
        format!(
            "{},{},{},{:.12e},\"({:.6},{:.6},{:.6};{:.6},{:.6},{:.6})\"",
            self.case, self.b, self.samples, self.min_ratio, x[0], x[1], x[2], e[0], e[1], e[2]
        )
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, r: f64) -> [f64; 3] {
    loop {
        let p = [rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)];
        if norm3(p) <= r {
            return p;
        }
    }
}

/// Samples `(ξ, η)` with `|ξ|, |η|, |ξ-η| ≤ b` and reports the smallest value
/// of `|Φ|·4b²/|ξ|` (wave output) or `|Φ|·4b²/|η|` (KG output). Points
/// where the denominator vanishes are skipped.
pub fn check_phase_lower_bound(eq: Equation, i1: Sign, i2: Sign, b: f64, samples: usize, seed: u64) -> Result<MarginReport> {
    let spec = PhaseSpec::of(eq, i1, i2);
    if !classify_resonances(spec)?.stationary {
        return Err(Error::Unsupported(format!(
            "the lower bound is only claimed in the stationary cases, not {}{}{}",
            eq.name(),
            i1.symbol(),
            i2.symbol()
        )));
    }
    if b < 1.0 {
        return Err(Error::Config(format!("b must be at least 1, got {b}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut arg = ([0.0; 3], [0.0; 3]);
    let mut taken = 0;
    while taken < samples {
        let xi = sample_ball(&mut rng, b);
        let eta = sample_ball(&mut rng, b);
        if norm3(sub3(xi, eta)) > b {
            continue;
        }
        taken += 1;
        let den = match eq {
            Equation::Wave => norm3(xi),
            Equation::KleinGordon => norm3(eta),
        };
        if den == 0.0 {
            continue;
        }
        let r = phase(spec, xi, eta).abs() * 4.0 * b * b / den;
        if r < best {
            best = r;
            arg = (xi, eta);
        }
    }
    Ok(MarginReport {
        case: format!("{}{}{}", eq.name(), i1.symbol(), i2.symbol()),
        b,
        samples,
        min_ratio: best,
        argmin: arg,
    })
}

/// Empirical constant in `|⟨ξ1⟩ ± ⟨ξ2⟩ ± |ξ1+ξ2|| ≥ c|ξ1+ξ2|/(1+|ξ1|+|ξ2|)²`,
/// minimized over all four sign choices with `|ξ1|, |ξ2| ≤ radius`.
pub fn elliptic_phase_constant(samples: usize, radius: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let a = sample_ball(&mut rng, radius);
        let b = sample_ball(&mut rng, radius);
        let s = norm3([a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
        if s == 0.0 {
            continue;
        }
        let w = (1.0 + norm3(a) + norm3(b)).powi(2);
        for p in [1.0, -1.0] {
            for q in [1.0, -1.0] {
                let phi = japanese(norm3(a)) + p * japanese(norm3(b)) + q * s;
                best = best.min(phi.abs() * w / s);
            }
        }
    }
    best
}

/// A one-dimensional quadrature rule for `∫ e^{itφ} a`: nodes carry the phase,
/// the amplitude and the weight. Radial three-dimensional integrals are
/// expressed with weights `4π r² dr`.
#[derive(Clone, Debug)]
pub struct OscillatoryModel {
    pub phase: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub weight: Vec<f64>,
}

impl OscillatoryModel {
    /// Midpoint rule on `[a, b]` with `m` cells.
    pub fn line(a: f64, b: f64, m: usize, phase: impl Fn(f64) -> f64, amp: impl Fn(f64) -> f64) -> Self {
        let h = (b - a) / m as f64;
        let xs: Vec<f64> = (0..m).map(|i| a + (i as f64 + 0.5) * h).collect();
        Self {
            phase: xs.iter().map(|&x| phase(x)).collect(),
            amplitude: xs.iter().map(|&x| amp(x)).collect(),
            weight: vec![h; m],
        }
    }

    /// Radial integral over the ball of radius `r_max` in three dimensions.
    pub fn radial3(r_max: f64, m: usize, phase: impl Fn(f64) -> f64, amp: impl Fn(f64) -> f64) -> Self {
        let h = r_max / m as f64;
        let rs: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
        Self {
            phase: rs.iter().map(|&r| phase(r)).collect(),
            amplitude: rs.iter().map(|&r| amp(r)).collect(),
            weight: rs.iter().map(|&r| 4.0 * PI * r * r * h).collect(),
        }
    }

    pub fn integrate(&self, t: f64) -> C64 {
        self.phase
            .iter()
            .zip(&self.amplitude)
            .zip(&self.weight)
            .map(|((&p, &a), &w)| C64::from_polar(a * w, t * p))
            .sum()
    }

    /// Largest phase increment between neighbouring nodes at time `t`.
    pub fn max_phase_step(&self, t: f64) -> f64 {
        self.phase.windows(2).map(|w| (t * (w[1] - w[0])).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    /// Fitted exponent `p` in `|I(t)| ≈ c t^{-p}`.
    pub exponent: f64,
    pub coefficient: f64,
    pub values: Vec<(f64, f64)>,
}

/// Least-squares fit of `log y = log c - p log t`.
pub fn fit_power_law(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = ts.len() as f64;
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (-slope, (my - slope * mx).exp())
}

/// Evaluates the model integral at each `t` and fits a power law to `|I(t)|`.
pub fn stationary_phase_probe(model: &OscillatoryModel, ts: &[f64]) -> Result<DecayFit> {
    if ts.len() < 2 {
        return Err(Error::Input("need at least two times to fit a decay rate".into()));
    }
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    let step = model.max_phase_step(t_max);
    if step > PI / 8.0 {
        return Err(Error::Accuracy(format!(
            "phase advances {step:.3} rad between nodes at t = {t_max}; refine the rule"
        )));
    }
    let values: Vec<(f64, f64)> = ts.iter().map(|&t| (t, model.integrate(t).norm())).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.1).collect();
    let (exponent, coefficient) = fit_power_law(ts, &ys);
    Ok(DecayFit { exponent, coefficient, values })
}

pub const STATIONARY_CASES: [(Equation, Sign, Sign); 4] = [
    (Equation::Wave, Sign::Plus, Sign::Minus),
    (Equation::Wave, Sign::Minus, Sign::Plus),
    (Equation::KleinGordon, Sign::Plus, Sign::Plus),
    (Equation::KleinGordon, Sign::Plus, Sign::Minus),
];

pub const ALL_CASES: [(Equation, Sign, Sign); 8] = [
    (Equation::Wave, Sign::Plus, Sign::Plus),
    (Equation::Wave, Sign::Plus, Sign::Minus),
    (Equation::Wave, Sign::Minus, Sign::Plus),
    (Equation::Wave, Sign::Minus, Sign::Minus),
    (Equation::KleinGordon, Sign::Plus, Sign::Plus),
    (Equation::KleinGordon, Sign::Plus, Sign::Minus),
    (Equation::KleinGordon, Sign::Minus, Sign::Plus),
    (Equation::KleinGordon, Sign::Minus, Sign::Minus),
];

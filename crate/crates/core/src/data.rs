//! Named data recipes for profiles and scattering data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ProfileState;
use crate::spectral::{dot3, FieldTag, FourierGrid, SpectralField, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Gaussian KG profile, zero wave profile.
    GaussianKg,
    /// The same Gaussian in both components.
    GaussianBoth,
    /// A real pair of KG modes at `±(dξ, 0, 0)`.
    TwoMode,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian-kg" => Ok(Preset::GaussianKg),
            "gaussian-both" => Ok(Preset::GaussianBoth),
            "two-mode" => Ok(Preset::TwoMode),
            _ => Err(Error::Config(format!("unknown data preset {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataRecipe {
    pub preset: Preset,
    /// Gaussian width `s` in `ε s³ e^{-s²|ξ|²/2}`.
    pub width: f64,
    /// Strength `κ` of the seeded modulation `1 + κ Σ c_k cos(ξ·a_k)`.
    pub modulation: f64,
}

impl Default for DataRecipe {
    fn default() -> Self {
        Self { preset: Preset::GaussianBoth, width: 2.0, modulation: 0.2 }
    }
}

impl DataRecipe {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Config(format!("data width {} must be positive", self.width)));
        }
        if !(0.0..1.0 / 3.0).contains(&self.modulation) {
            return Err(Error::Config(format!("modulation {} must lie in [0, 1/3)", self.modulation)));
        }
        Ok(())
    }

    /// Real, even profile shape; the modulation keeps it positive.
    fn shape(&self, grid: FourierGrid, eps: f64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves: Vec<(f64, [f64; 3])> = (0..3)
            .map(|_| (rng.gen_range(-1.0..1.0), [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]))
            .collect();
        let s = self.width;
        let kappa = self.modulation;
        SpectralField::from_fn(grid, FieldTag::Scalar, |x| {
            let r2 = dot3(x, x);
            let m = 1.0 + kappa * waves.iter().map(|(c, a)| c * dot3(x, *a).cos()).sum::<f64>();
            C64::new(eps * s.powi(3) * (-s * s * r2 / 2.0).exp() * m, 0.0)
        })
    }

    /// `(V^wa, V^kg)` for this recipe.
    pub fn build(&self, grid: FourierGrid, eps: f64, seed: u64) -> Result<(SpectralField, SpectralField)> {
        self.validate()?;
        let zero = SpectralField::zeros(grid, FieldTag::Wa);
        Ok(match self.preset {
            Preset::GaussianKg => (zero, self.shape(grid, eps, seed).with_tag(FieldTag::Kg)),
            Preset::GaussianBoth => {
                let f = self.shape(grid, eps, seed);
                (f.clone().with_tag(FieldTag::Wa), f.with_tag(FieldTag::Kg))
            }
            Preset::TwoMode => {
                let mut kg = SpectralField::zeros(grid, FieldTag::Kg);
                let a = C64::new(eps / grid.spectral_cell().sqrt(), 0.0);
                kg.values[grid.index_of([1, 0, 0])] = a;
                kg.values[grid.index_of([-1, 0, 0])] = a;
                (zero, kg)
            }
        })
    }

    pub fn profile(&self, grid: FourierGrid, eps: f64, seed: u64, t: f64) -> Result<ProfileState> {
        let (wa, kg) = self.build(grid, eps, seed)?;
        Ok(ProfileState { t, wa, kg })
    }
}

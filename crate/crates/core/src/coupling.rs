//! Drift and interaction couplings as finite trigonometric coefficient
//! tables, plus initial laws on the torus.
//!
//! F(θ) = Σ_k F_k e^{ikθ} and Γ(θ,ψ) = Σ_{k,l} Γ_{kl} e^{ikθ} e^{ilψ}, both
//! real-valued, which forces F_{−k} = conj(F_k) and Γ_{−k,−l} = conj(Γ_{kl}).
//! Finite support makes Γ smooth, so the summability constant
//! Σ (kl)^{1+ε} |Γ_{kl}|² is finite for every ε.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

const REALNESS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    drift: BTreeMap<i64, Complex64>,
    interaction: BTreeMap<(i64, i64), Complex64>,
}

impl CouplingSpec {
    pub fn new(
        drift: BTreeMap<i64, Complex64>,
        interaction: BTreeMap<(i64, i64), Complex64>,
    ) -> Result<Self> {
        for (&k, &c) in &drift {
            let mirror = drift.get(&-k).copied().unwrap_or(Complex64::new(0.0, 0.0));
            if (mirror - c.conj()).norm() > REALNESS_TOL {
                return Err(Error::Config(format!("drift coefficient at {k} breaks realness")));
            }
        }
        for (&(k, l), &c) in &interaction {
            let mirror = interaction.get(&(-k, -l)).copied().unwrap_or(Complex64::new(0.0, 0.0));
            if (mirror - c.conj()).norm() > REALNESS_TOL {
                return Err(Error::Config(format!(
                    "interaction coefficient at ({k},{l}) breaks realness"
                )));
            }
        }
        Ok(Self { drift, interaction })
    }

    pub fn zero() -> Self {
        Self { drift: BTreeMap::new(), interaction: BTreeMap::new() }
    }

    /// F ≡ 0, Γ(θ,ψ) = −K sin(θ−ψ).
    pub fn kuramoto(k: f64) -> Self {
        let mut interaction = BTreeMap::new();
        // −K sin(θ−ψ) = (iK/2) e^{iθ}e^{−iψ} + (−iK/2) e^{−iθ}e^{iψ}
        interaction.insert((1, -1), Complex64::new(0.0, k / 2.0));
        interaction.insert((-1, 1), Complex64::new(0.0, -k / 2.0));
        Self { drift: BTreeMap::new(), interaction }
    }

    pub fn drift_coeffs(&self) -> &BTreeMap<i64, Complex64> {
        &self.drift
    }

    pub fn interaction_coeffs(&self) -> &BTreeMap<(i64, i64), Complex64> {
        &self.interaction
    }

    pub fn eval_drift(&self, theta: f64) -> f64 {
        self.drift
            .iter()
            .map(|(&k, &c)| (c * Complex64::from_polar(1.0, k as f64 * theta)).re)
            .sum()
    }

    pub fn eval_interaction(&self, theta: f64, psi: f64) -> f64 {
        self.interaction
            .iter()
            .map(|(&(k, l), &c)| {
                (c * Complex64::from_polar(1.0, k as f64 * theta + l as f64 * psi)).re
            })
            .sum()
    }

    /// ‖F‖_∞ ≤ Σ |F_k|.
    pub fn drift_sup_bound(&self) -> f64 {
        self.drift.values().map(|c| c.norm()).sum()
    }

    /// ‖Γ‖_∞ ≤ Σ |Γ_{kl}|.
    pub fn interaction_sup_bound(&self) -> f64 {
        self.interaction.values().map(|c| c.norm()).sum()
    }

    /// Σ (kl)^{1+ε} |Γ_{kl}|², finite for every ε on finite tables.
    pub fn summability_constant(&self, epsilon: f64) -> f64 {
        self.interaction
            .iter()
            .filter(|(&(k, l), _)| k != 0 && l != 0)
            .map(|(&(k, l), &c)| ((k * l).unsigned_abs() as f64).powf(1.0 + epsilon) * c.norm_sqr())
            .sum()
    }

    /// Largest |k| appearing in either coefficient table.
    pub fn max_frequency(&self) -> i64 {
        let d = self.drift.keys().map(|k| k.abs()).max().unwrap_or(0);
        let i = self
            .interaction
            .keys()
            .map(|&(k, l)| k.abs().max(l.abs()))
            .max()
            .unwrap_or(0);
        d.max(i)
    }
}

/// Initial distribution of the oscillator angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialLaw {
    Uniform,
    PointMass(f64),
    VonMises { loc: f64, concentration: f64 },
}

impl InitialLaw {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::Uniform => rng.gen::<f64>() * TAU,
            InitialLaw::PointMass(theta) => theta.rem_euclid(TAU),
            InitialLaw::VonMises { loc, concentration } => {
                sample_von_mises(rng, loc, concentration)
            }
        }
    }

    /// Trigonometric moment ∫ e^{−ikθ} dμ(θ).
    pub fn moment(&self, k: i64) -> Complex64 {
        match *self {
            InitialLaw::Uniform => {
                if k == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            InitialLaw::PointMass(theta) => Complex64::from_polar(1.0, -(k as f64) * theta),
            InitialLaw::VonMises { loc, concentration } => {
                let ratio = crate::fokker_planck::bessel_i(k.unsigned_abs() as u32, concentration)
                    / crate::fokker_planck::bessel_i(0, concentration);
                Complex64::from_polar(ratio, -(k as f64) * loc)
            }
        }
    }
}

/// Best-Fisher rejection sampler for the von Mises distribution.
fn sample_von_mises<R: Rng>(rng: &mut R, loc: f64, kappa: f64) -> f64 {
    if kappa <= 1e-12 {
        return rng.gen::<f64>() * TAU;
    }
    let a = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let b = (a - (2.0 * a).sqrt()) / (2.0 * kappa);
    let r = (1.0 + b * b) / (2.0 * b);
    loop {
        let u1: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.gen();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen();
            let theta = loc + if u3 > 0.5 { f.acos() } else { -f.acos() };
            return theta.rem_euclid(TAU);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kuramoto_matches_sine() {
        let c = CouplingSpec::kuramoto(2.0);
        for (theta, psi) in [(0.3, 1.1), (5.0, 0.2), (2.0, 2.0)] {
            let expect = -2.0 * (theta - psi as f64).sin();
            assert!((c.eval_interaction(theta, psi) - expect).abs() < 1e-12);
        }
        assert_eq!(c.eval_drift(1.0), 0.0);
        assert!((c.interaction_sup_bound() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn realness_enforced() {
        let mut bad = BTreeMap::new();
        bad.insert((1, 0), Complex64::new(0.5, 0.5));
        assert!(CouplingSpec::new(BTreeMap::new(), bad).is_err());

        let mut good = BTreeMap::new();
        good.insert((1, 0), Complex64::new(0.5, 0.5));
        good.insert((-1, 0), Complex64::new(0.5, -0.5));
        let spec = CouplingSpec::new(BTreeMap::new(), good).unwrap();
        // Γ(θ,ψ) = cos θ − sin θ, real everywhere
        assert!((spec.eval_interaction(0.7, 0.0) - (0.7f64.cos() - 0.7f64.sin())).abs() < 1e-12);
    }

    #[test]
    fn summability_finite() {
        let c = CouplingSpec::kuramoto(1.0);
        assert!(c.summability_constant(0.5).is_finite());
        assert!((c.summability_constant(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn initial_law_moments() {
        assert_eq!(InitialLaw::Uniform.moment(0), Complex64::new(1.0, 0.0));
        assert_eq!(InitialLaw::Uniform.moment(3), Complex64::new(0.0, 0.0));
        let pm = InitialLaw::PointMass(0.9);
        assert!((pm.moment(2) - Complex64::from_polar(1.0, -1.8)).norm() < 1e-12);
    }

    #[test]
    fn von_mises_sampler_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let law = InitialLaw::VonMises { loc: 1.0, concentration: 4.0 };
        let n = 20000;
        let (mut c, mut s) = (0.0, 0.0);
        for _ in 0..n {
            let th = law.sample(&mut rng);
            c += th.cos();
            s += th.sin();
        }
        let r = ((c / n as f64).powi(2) + (s / n as f64).powi(2)).sqrt();
        let mean = (s / n as f64).atan2(c / n as f64);
        // population resultant length is I1(4)/I0(4) ≈ 0.8635
        assert!((r - 0.8635).abs() < 0.02, "r={r}");
        assert!((mean - 1.0).abs() < 0.02, "mean={mean}");
    }
}

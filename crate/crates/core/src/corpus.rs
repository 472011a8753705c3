//! The fixed test-function corpus: Gaussians, Hermite functions,
//! chirp-modulated Gaussians and random trigonometric polynomials.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{Codomain, GridSpec, SampledField};
use crate::periodic::TrigPolynomial;
use crate::stft::{stft, stft_trigpoly, StftField};
use crate::window::{hermite_function, Window};

pub const DEFAULT_SEED: u64 = 0x5EED;

/// An analytic test function on `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// L²-normalized Gaussian of width `sigma` centred at `center`.
    Gaussian { sigma: f64, center: f64 },
    /// `σ^{-1/2} h_n(t/σ)`.
    Hermite { order: usize, sigma: f64 },
    /// Gaussian times `e^{i(rate·t²/2 + carrier·t)}`.
    Chirp { sigma: f64, rate: f64, carrier: f64 },
    Trig { poly: TrigPolynomial },
}

impl TestFunction {
    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            TestFunction::Gaussian { sigma, center } => {
                let s = t - center;
                Complex64::new((PI * sigma * sigma).powf(-0.25) * (-s * s / (2.0 * sigma * sigma)).exp(), 0.0)
            }
            TestFunction::Hermite { order, sigma } => {
                Complex64::new(sigma.powf(-0.5) * hermite_function(*order, t / sigma), 0.0)
            }
            TestFunction::Chirp { sigma, rate, carrier } => {
                let env = (PI * sigma * sigma).powf(-0.25) * (-t * t / (2.0 * sigma * sigma)).exp();
                Complex64::from_polar(env, rate * t * t / 2.0 + carrier * t)
            }
            TestFunction::Trig { poly } => poly.eval(&[t]),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, TestFunction::Trig { .. })
    }

    pub fn sample(&self, grid: GridSpec) -> Result<SampledField> {
        SampledField::from_fn(grid, Codomain::Function, |t| self.eval(t[0]))
    }

    /// `V_φf` on `grid`: closed form for trigonometric polynomials, direct
    /// quadrature on `t_grid` otherwise.
    pub fn stft(&self, window: &Window, grid: &GridSpec, t_grid: &GridSpec) -> Result<StftField> {
        match self {
            TestFunction::Trig { poly } => stft_trigpoly(poly, window, grid),
            f => {
                let mut v = stft(&f.sample(t_grid.clone())?, window, grid)?;
                v.source = format!("{f:?}");
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub function: TestFunction,
}

/// `count` random 2π-periodic polynomials with five terms, frequencies
/// in `-4..=4` and coefficients uniform in the unit square.
pub fn random_trig_polynomials(rng: &mut ChaCha8Rng, count: usize) -> Vec<TrigPolynomial> {
    (0..count)
        .map(|_| {
            let mut p = TrigPolynomial::two_pi_periodic(1);
            while p.coeffs().len() < 5 {
                let nu = rng.gen_range(-4..=4);
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if p.coefficient(&[nu]) == Complex64::new(0.0, 0.0) {
                    p.add_term(vec![nu], c);
                }
            }
            p
        })
        .collect()
}

/// The 20-member corpus: 6 Gaussians (σ ∈ {0.5, 1, 2} × centres {0, 2.5}),
/// Hermite functions of order 0..=3, 4 chirps and 6 trigonometric polynomials.
pub fn standard_corpus(seed: u64) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(20);
    for sigma in [0.5, 1.0, 2.0] {
        for center in [0.0, 2.5] {
            out.push(CorpusEntry {
                id: format!("gauss-s{sigma}-c{center}"),
                function: TestFunction::Gaussian { sigma, center },
            });
        }
    }
    for order in 0..4 {
        out.push(CorpusEntry {
            id: format!("hermite-{order}"),
            function: TestFunction::Hermite { order, sigma: 1.0 },
        });
    }
    for k in 0..4 {
        out.push(CorpusEntry {
            id: format!("chirp-{k}"),
            function: TestFunction::Chirp {
                sigma: 1.0,
                rate: rng.gen_range(-0.75..0.75),
                carrier: rng.gen_range(-1.5..1.5),
            },
        });
    }
    for (k, poly) in random_trig_polynomials(&mut rng, 6).into_iter().enumerate() {
        out.push(CorpusEntry { id: format!("trig-{k}"), function: TestFunction::Trig { poly } });
    }
    out
}

/// Only the trigonometric polynomials of [`standard_corpus`].
pub fn trig_corpus(seed: u64) -> Vec<TrigPolynomial> {
    standard_corpus(seed)
        .into_iter()
        .filter_map(|e| match e.function {
            TestFunction::Trig { poly } => Some(poly),
            _ => None,
        })
        .collect()
}

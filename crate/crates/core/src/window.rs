//! Analysis windows: Gaussians, Hermite functions and sampled windows.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;

/// A window `φ` on `R^d`. Analytic windows are tensor products over the
/// physical coordinates and have closed-form Fourier transforms under
/// `φ̂(ω) = (2π)^{-d/2} ∫ φ(t) e^{-i⟨t,ω⟩} dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Window {
    /// `(πσ²)^{-d/4} e^{-|t|²/(2σ²)}` when normalized, peak 1 otherwise.
    Gaussian {
        dim: usize,
        sigma: f64,
        #[serde(default = "yes")]
        normalized: bool,
    },
    /// `Π_k σ^{-1/2} h_n(t_k/σ)` with `h_n` the L²-normalized Hermite function;
    /// unnormalized windows are scaled so that order 0 has peak 1.
    Hermite {
        dim: usize,
        order: usize,
        sigma: f64,
        #[serde(default = "yes")]
        normalized: bool,
    },
    /// Samples on a grid; no analytic transform.
    #[serde(skip)]
    Sampled(SampledField),
}

fn yes() -> bool {
    true
}

/// L²-normalized Hermite function `h_n(t)` by the stable three-term recurrence.
pub fn hermite_function(n: usize, t: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-t * t / 2.0).exp();
    for k in 0..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * t * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

impl Window {
    pub fn gaussian(dim: usize, sigma: f64) -> Self {
        Window::Gaussian { dim, sigma, normalized: true }
    }

    pub fn hermite(dim: usize, order: usize, sigma: f64) -> Self {
        Window::Hermite { dim, order, sigma, normalized: true }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Window::Gaussian { dim, sigma, .. } | Window::Hermite { dim, sigma, .. } => {
                if *dim == 0 {
                    return Err(Error::InvalidArgument("window dimension must be positive".into()));
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidArgument(format!("window width {sigma} must be positive")));
                }
                Ok(())
            }
            Window::Sampled(f) => {
                if f.values.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
                    Err(Error::InvalidArgument("sampled window is identically zero".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::Gaussian { dim, .. } | Window::Hermite { dim, .. } => *dim,
            Window::Sampled(f) => f.dim(),
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Window::Sampled(_))
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Window::Gaussian { .. } | Window::Hermite { order: 0, .. })
    }

    /// Gaussians and Hermite functions belong to every admissible window
    /// class; sampled windows are not certified.
    pub fn admissibility_certified(&self) -> bool {
        self.is_analytic()
    }

    /// Width parameter that the sampling grid must resolve.
    pub fn width(&self) -> Option<f64> {
        match self {
            Window::Gaussian { sigma, .. } | Window::Hermite { sigma, .. } => Some(*sigma),
            Window::Sampled(_) => None,
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Window::Gaussian { dim, sigma, normalized } | Window::Hermite { dim, sigma, normalized, .. } => {
                if *normalized {
                    1.0
                } else {
                    (PI * sigma * sigma).powf(*dim as f64 / 4.0)
                }
            }
            Window::Sampled(_) => 1.0,
        }
    }

    /// Radius beyond which an analytic window is below `1e-17` of its peak scale.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Window::Gaussian { sigma, dim, .. } => Some(sigma * (9.0 + 0.5 * *dim as f64)),
            Window::Hermite { sigma, order, dim, .. } => {
                Some(sigma * (9.0 + 0.5 * *dim as f64 + (2.0 * *order as f64 + 1.0).sqrt()))
            }
            Window::Sampled(_) => None,
        }
    }

    /// `φ(t)` for analytic windows.
    pub fn eval(&self, t: &[f64]) -> Result<Complex64> {
        match self {
            Window::Gaussian { sigma, dim, .. } => {
                let r2: f64 = t.iter().map(|v| v * v).sum();
                let v = (PI * sigma * sigma).powf(-(*dim as f64) / 4.0) * (-r2 / (2.0 * sigma * sigma)).exp();
                Ok(Complex64::new(v * self.scale(), 0.0))
            }
            Window::Hermite { sigma, order, .. } => {
                let v: f64 = t.iter().map(|&tk| sigma.powf(-0.5) * hermite_function(*order, tk / sigma)).product();
                Ok(Complex64::new(v * self.scale(), 0.0))
            }
            Window::Sampled(_) => Err(Error::Unsupported(
                "sampled windows are evaluated only at their grid nodes".into(),
            )),
        }
    }

    /// `φ̂(ω)` for analytic windows; `None` for sampled ones.
    pub fn hat(&self, w: &[f64]) -> Option<Complex64> {
        match self {
            Window::Gaussian { sigma, dim, .. } => {
                let r2: f64 = w.iter().map(|v| v * v).sum();
                let v = (sigma * sigma / PI).powf(*dim as f64 / 4.0) * (-sigma * sigma * r2 / 2.0).exp();
                Some(Complex64::new(v * self.scale(), 0.0))
            }
            Window::Hermite { sigma, order, dim, .. } => {
                let v: f64 = w.iter().map(|&wk| sigma.sqrt() * hermite_function(*order, sigma * wk)).product();
                let phase = Complex64::new(0.0, -1.0).powu((*order * *dim) as u32);
                Some(phase * v * self.scale())
            }
            Window::Sampled(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Window::Gaussian { sigma, .. } => format!("gaussian(sigma={sigma})"),
            Window::Hermite { order, sigma, .. } => format!("hermite(order={order},sigma={sigma})"),
            Window::Sampled(f) => format!("sampled({} nodes)", f.values.len()),
        }
    }
}

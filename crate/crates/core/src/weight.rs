//! Moderate and submultiplicative weights from a closed algebraic family.
//!
//! Weights are evaluated in the log domain, so `1/ω` is available
//! symbolically through [`Weight::reciprocal`] and large exponents do not
//! overflow until the final exponentiation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Japanese bracket `⟨x⟩ = (1 + |x|²)^{1/2}`.
pub fn bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A positive weight on `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeight", into = "RawWeight")]
pub enum Weight {
    Constant { dim: usize },
    /// `⟨x⟩^s`
    Polynomial { dim: usize, s: f64 },
    /// `e^{s|x|}`
    Exponential { dim: usize, s: f64 },
    /// Pointwise product of weights of the same dimension.
    Product { dim: usize, factors: Vec<Weight> },
    /// `ω(x_1, .., x_k) = Π ω_i(x_i)` over consecutive coordinate blocks.
    Separable { dim: usize, factors: Vec<Weight> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawWeight {
    form: String,
    #[serde(default)]
    params: Vec<serde_json::Value>,
    dim: usize,
}

impl TryFrom<RawWeight> for Weight {
    type Error = String;

    fn try_from(raw: RawWeight) -> std::result::Result<Self, String> {
        let scalar = |params: &[serde_json::Value]| -> std::result::Result<f64, String> {
            match params {
                [v] => v
                    .as_f64()
                    .ok_or_else(|| format!("params[0] must be a number, got {v}")),
                _ => Err(format!("expected exactly one parameter, got {}", params.len())),
            }
        };
        let factors = |params: Vec<serde_json::Value>| -> std::result::Result<Vec<Weight>, String> {
            params
                .into_iter()
                .enumerate()
                .map(|(i, v)| serde_json::from_value(v).map_err(|e| format!("params[{i}]: {e}")))
                .collect()
        };
        let w = match raw.form.as_str() {
            "constant" => Weight::Constant { dim: raw.dim },
            "polynomial" => Weight::Polynomial {
                dim: raw.dim,
                s: scalar(&raw.params)?,
            },
            "exponential" => Weight::Exponential {
                dim: raw.dim,
                s: scalar(&raw.params)?,
            },
            "product" => Weight::product(factors(raw.params)?).map_err(|e| e.to_string())?,
            "separable" => Weight::separable(factors(raw.params)?).map_err(|e| e.to_string())?,
            other => {
                return Err(format!(
                    "unknown weight form `{other}` (expected constant, polynomial, exponential, product or separable)"
                ))
            }
        };
        if w.dim() != raw.dim {
            return Err(format!("factor dimensions add up to {}, not {}", w.dim(), raw.dim));
        }
        Ok(w)
    }
}

impl From<Weight> for RawWeight {
    fn from(w: Weight) -> Self {
        let num = |s: f64| vec![serde_json::json!(s)];
        let facs = |f: Vec<Weight>| {
            f.into_iter()
                .map(|w| serde_json::to_value(w).expect("weights serialize"))
                .collect()
        };
        match w {
            Weight::Constant { dim } => RawWeight { form: "constant".into(), params: vec![], dim },
            Weight::Polynomial { dim, s } => RawWeight { form: "polynomial".into(), params: num(s), dim },
            Weight::Exponential { dim, s } => RawWeight { form: "exponential".into(), params: num(s), dim },
            Weight::Product { dim, factors } => RawWeight { form: "product".into(), params: facs(factors), dim },
            Weight::Separable { dim, factors } => RawWeight { form: "separable".into(), params: facs(factors), dim },
        }
    }
}

impl Weight {
    pub fn one(dim: usize) -> Self {
        Weight::Constant { dim }
    }

    pub fn polynomial(dim: usize, s: f64) -> Self {
        Weight::Polynomial { dim, s }
    }

    pub fn exponential(dim: usize, s: f64) -> Self {
        Weight::Exponential { dim, s }
    }

    pub fn product(factors: Vec<Weight>) -> Result<Self> {
        let dim = factors
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty product of weights".into()))?
            .dim();
        if factors.iter().any(|f| f.dim() != dim) {
            return Err(Error::InvalidArgument(
                "pointwise product requires factors of equal dimension".into(),
            ));
        }
        Ok(Weight::Product { dim, factors })
    }

    pub fn separable(factors: Vec<Weight>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("empty separable weight".into()));
        }
        let dim = factors.iter().map(Weight::dim).sum();
        Ok(Weight::Separable { dim, factors })
    }

    /// The weight `(x, ξ) ↦ ω_0(ξ)` on `R^{2d}`.
    pub fn lift_second(w0: &Weight) -> Self {
        Weight::Separable {
            dim: 2 * w0.dim(),
            factors: vec![Weight::one(w0.dim()), w0.clone()],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Weight::Constant { dim }
            | Weight::Polynomial { dim, .. }
            | Weight::Exponential { dim, .. }
            | Weight::Product { dim, .. }
            | Weight::Separable { dim, .. } => *dim,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Weight::Constant { .. } => true,
            Weight::Polynomial { s, .. } | Weight::Exponential { s, .. } => *s == 0.0,
            Weight::Product { factors, .. } | Weight::Separable { factors, .. } => {
                factors.iter().all(Weight::is_constant)
            }
        }
    }

    /// `log ω(x)`.
    pub fn log_eval(&self, x: &[f64]) -> f64 {
        match self {
            Weight::Constant { .. } => 0.0,
            Weight::Polynomial { s, .. } => {
                if *s == 0.0 {
                    0.0
                } else {
                    0.5 * s * (1.0 + x.iter().map(|v| v * v).sum::<f64>()).ln()
                }
            }
            Weight::Exponential { s, .. } => {
                if *s == 0.0 {
                    0.0
                } else {
                    s * euclid(x)
                }
            }
            Weight::Product { factors, .. } => factors.iter().map(|f| f.log_eval(x)).sum(),
            Weight::Separable { factors, .. } => {
                let mut off = 0;
                let mut acc = 0.0;
                for f in factors {
                    acc += f.log_eval(&x[off..off + f.dim()]);
                    off += f.dim();
                }
                acc
            }
        }
    }

    /// `ω(x)`, failing with a range error if the value is not a positive finite number.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.log_eval(x).exp();
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Range(format!("weight value {v} at point {x:?} is not representable")))
        }
    }

    /// `1/ω`.
    pub fn reciprocal(&self) -> Weight {
        match self {
            Weight::Constant { dim } => Weight::Constant { dim: *dim },
            Weight::Polynomial { dim, s } => Weight::Polynomial { dim: *dim, s: -s },
            Weight::Exponential { dim, s } => Weight::Exponential { dim: *dim, s: -s },
            Weight::Product { dim, factors } => Weight::Product {
                dim: *dim,
                factors: factors.iter().map(Weight::reciprocal).collect(),
            },
            Weight::Separable { dim, factors } => Weight::Separable {
                dim: *dim,
                factors: factors.iter().map(Weight::reciprocal).collect(),
            },
        }
    }
}

/// Exponent `ρ` of the bracket factor attached by [`theta_rho`].
pub fn theta_rho_exponent(r: f64, d: usize, strict: bool) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!("quasi-norm order r = {r} must lie in (0,1]")));
    }
    let base = 2.0 * d as f64 * (1.0 / r - 1.0);
    Ok(if strict { base + 1.0 } else { base })
}

/// `Θ_ρ v = v·⟨·⟩^ρ` with `ρ = 2d(1/r − 1)`, plus one when `strict` is set.
/// Returns the weight together with `ρ`.
pub fn theta_rho(v: &Weight, r: f64, d: usize, strict: bool) -> Result<(Weight, f64)> {
    let rho = theta_rho_exponent(r, d, strict)?;
    if rho == 0.0 {
        return Ok((v.clone(), rho));
    }
    let w = Weight::product(vec![v.clone(), Weight::polynomial(v.dim(), rho)])?;
    Ok((w, rho))
}

/// Grid-measured moderateness constants of `ω` with respect to `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeratenessCertificate {
    pub weight: Weight,
    pub companion: Weight,
    pub radius: f64,
    pub points_per_axis: usize,
    /// `max ω(x+y) / (ω(x) v(y))` over grid pairs.
    pub constant: f64,
    /// `max ω(x) / v(x)` over the grid.
    pub upper_constant: f64,
    /// `max 1 / (v(−x) ω(x))` over the grid.
    pub lower_constant: f64,
}

fn cube_grid(dim: usize, radius: f64, n: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..n)
        .map(|i| -radius + 2.0 * radius * i as f64 / (n - 1) as f64)
        .collect();
    let total = n.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let v = axis[idx % n];
                    idx /= n;
                    v
                })
                .collect()
        })
        .collect()
}

/// Measures the moderateness constant of `ω` against `v` on the grid
/// `[-R, R]^dim` with `n` points per axis.
pub fn certify_moderate(
    w: &Weight,
    v: &Weight,
    radius: f64,
    n: usize,
) -> Result<ModeratenessCertificate> {
    if w.dim() != v.dim() {
        return Err(Error::InvalidArgument("weight and companion differ in dimension".into()));
    }
    if n < 3 {
        return Err(Error::InvalidArgument("at least 3 grid points per axis are required".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let grid = cube_grid(w.dim(), radius, n);
    for x in &grid {
        w.eval(x)?;
        v.eval(x)?;
    }
    let check = |x: &[f64], val: f64| -> Result<f64> {
        if val.is_finite() {
            Ok(val)
        } else {
            Err(Error::Range(format!("overflow while evaluating weights at {x:?}")))
        }
    };
    let log_w: Vec<f64> = grid.iter().map(|x| w.log_eval(x)).collect();
    let log_v: Vec<f64> = grid.iter().map(|x| v.log_eval(x)).collect();
    let mut c = f64::NEG_INFINITY;
    let mut sum = vec![0.0; w.dim()];
    for (x, lwx) in grid.iter().zip(&log_w) {
        for (y, lvy) in grid.iter().zip(&log_v) {
            for k in 0..sum.len() {
                sum[k] = x[k] + y[k];
            }
            let l = w.log_eval(&sum) - lwx - lvy;
            c = c.max(l);
        }
    }
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for (x, lwx) in grid.iter().zip(&log_w) {
        upper = upper.max(lwx - v.log_eval(x));
        let neg: Vec<f64> = x.iter().map(|t| -t).collect();
        lower = lower.max(-v.log_eval(&neg) - lwx);
    }
    let origin = vec![0.0; w.dim()];
    Ok(ModeratenessCertificate {
        weight: w.clone(),
        companion: v.clone(),
        radius,
        points_per_axis: n,
        constant: check(&origin, c.exp())?,
        upper_constant: check(&origin, upper.exp())?,
        lower_constant: check(&origin, lower.exp())?,
    })
}

/// Smallest rate `r` with `e^{-r|x|} ≤ ω(x) ≤ e^{r|x|}` on the grid points of
/// `[-R, R]^dim` with `|x| ≥ 1` (constants are absorbed inside the unit ball).
pub fn exp_envelope_with(w: &Weight, radius: f64, n: usize) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let n = n.max(3);
    let mut rate = 0.0_f64;
    for x in cube_grid(w.dim(), radius, n) {
        let norm = euclid(&x);
        if norm >= 1.0 {
            rate = rate.max(w.log_eval(&x).abs() / norm);
        }
    }
    Ok(rate)
}

/// [`exp_envelope_with`] at a default resolution of roughly `10^5` grid points.
pub fn exp_envelope(w: &Weight, radius: f64) -> Result<f64> {
    let per_axis = match w.dim() {
        0 | 1 => 100_001,
        2 => 301,
        3 => 47,
        d => (1e5_f64.powf(1.0 / d as f64)) as usize,
    };
    exp_envelope_with(w, radius, per_axis | 1)
}

//! Trigonometric polynomials on a lattice of periods, their Fourier
//! coefficients, coefficient-space norms and distribution action.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Codomain, GridSpec, SampledField};
use crate::lattice::OrderedBasis;
use crate::mixed::{discrete_mixed_norm, lq_norm, mixed_norm, Exponent, ExponentVector, LatticeSequence, MixedNormSpec};
use crate::modulation::{check_truncation, spread};
use crate::parallel::par_map;
use crate::stft::stft_trigpoly;
use crate::wiener::ratio;
use crate::window::Window;
use crate::weight::Weight;

/// `f = Σ c(f,α) e^{i⟨·,α⟩}` with `α = T_{E'} ν` on the dual lattice `Λ'_E`.
/// Coefficients are keyed by the integer coordinates `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrig", into = "RawTrig")]
pub struct TrigPolynomial {
    period: OrderedBasis,
    dual: OrderedBasis,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

#[derive(Serialize, Deserialize)]
struct RawCoeff {
    alpha: Vec<i64>,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct RawTrig {
    /// Basis of the dual lattice `Λ'_E`.
    lattice: OrderedBasis,
    coeffs: Vec<RawCoeff>,
}

impl TryFrom<RawTrig> for TrigPolynomial {
    type Error = String;

    fn try_from(raw: RawTrig) -> std::result::Result<Self, String> {
        let period = raw.lattice.dual().map_err(|e| e.to_string())?;
        let mut p = TrigPolynomial::new(period);
        for (i, c) in raw.coeffs.into_iter().enumerate() {
            if c.alpha.len() != p.dim() {
                return Err(format!("coeffs[{i}].alpha has {} entries, expected {}", c.alpha.len(), p.dim()));
            }
            p.add_term(c.alpha, Complex64::new(c.re, c.im));
        }
        Ok(p)
    }
}

impl From<TrigPolynomial> for RawTrig {
    fn from(p: TrigPolynomial) -> Self {
        RawTrig {
            lattice: p.dual.clone(),
            coeffs: p
                .coeffs
                .iter()
                .map(|(nu, c)| RawCoeff { alpha: nu.clone(), re: c.re, im: c.im })
                .collect(),
        }
    }
}

impl TrigPolynomial {
    /// The zero polynomial with periods `Λ_E`.
    pub fn new(period: OrderedBasis) -> Self {
        let dual = period.dual().expect("nondegenerate basis has a dual");
        TrigPolynomial { period, dual, coeffs: BTreeMap::new() }
    }

    /// 2π-periodic polynomials on `R^d` (`E = 2π·I`, `E' = I`).
    pub fn two_pi_periodic(d: usize) -> Self {
        let period = OrderedBasis::standard(d).scaled(2.0 * PI).expect("2π·I");
        TrigPolynomial::new(period)
    }

    pub fn from_terms(period: OrderedBasis, terms: &[(Vec<i64>, Complex64)]) -> Self {
        let mut p = TrigPolynomial::new(period);
        for (nu, c) in terms {
            p.add_term(nu.clone(), *c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.period.dim()
    }

    pub fn period(&self) -> &OrderedBasis {
        &self.period
    }

    pub fn dual_basis(&self) -> &OrderedBasis {
        &self.dual
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<i64>, Complex64> {
        &self.coeffs
    }

    /// Adds `c·e^{i⟨·,α⟩}`; exact zeros are dropped.
    pub fn add_term(&mut self, nu: Vec<i64>, c: Complex64) {
        let v = self.coefficient(&nu) + c;
        if v == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&nu);
        } else {
            self.coeffs.insert(nu, v);
        }
    }

    pub fn coefficient(&self, nu: &[i64]) -> Complex64 {
        self.coeffs.get(nu).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Physical frequency `α = T_{E'} ν`.
    pub fn alpha(&self, nu: &[i64]) -> Vec<f64> {
        let v: Vec<f64> = nu.iter().map(|&k| k as f64).collect();
        self.dual.from_coords(&v)
    }

    /// `(α, c(f,α))` pairs in key order.
    pub fn terms(&self) -> Vec<(Vec<f64>, Complex64)> {
        self.coeffs.iter().map(|(nu, c)| (self.alpha(nu), *c)).collect()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms()
            .iter()
            .map(|(a, c)| {
                let ph: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum();
                c * Complex64::from_polar(1.0, ph)
            })
            .sum()
    }

    pub fn synthesize(&self, grid: GridSpec) -> Result<SampledField> {
        if grid.dim() != self.dim() {
            return Err(Error::InvalidArgument("grid dimension differs from polynomial dimension".into()));
        }
        let terms = self.terms();
        SampledField::from_fn(grid, Codomain::Function, |x| {
            terms
                .iter()
                .map(|(a, c)| {
                    let ph: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum();
                    c * Complex64::from_polar(1.0, ph)
                })
                .sum()
        })
    }

    pub fn scale(&self, s: Complex64) -> TrigPolynomial {
        let mut p = self.clone();
        p.coeffs = self.coeffs.iter().map(|(k, v)| (k.clone(), v * s)).filter(|(_, v)| *v != Complex64::new(0.0, 0.0)).collect();
        p
    }

    /// `c(f,α) ↦ c(f, α − β)` for `β = T_{E'} shift`, i.e. multiplication by `e^{i⟨·,β⟩}`.
    pub fn shift_frequency(&self, shift: &[i64]) -> TrigPolynomial {
        let mut p = self.clone();
        p.coeffs = self
            .coeffs
            .iter()
            .map(|(k, v)| (k.iter().zip(shift).map(|(a, b)| a + b).collect(), *v))
            .collect();
        p
    }

    /// Inclusive box of the support in `ν` coordinates.
    pub fn support_box(&self) -> Option<Vec<(i64, i64)>> {
        let mut s = LatticeSequence::new(self.dim());
        for k in self.coeffs.keys() {
            s.insert(k.clone(), Complex64::new(1.0, 0.0));
        }
        s.bounding_box()
    }

    /// Largest `|α|` among the support.
    pub fn max_frequency(&self) -> f64 {
        self.coeffs
            .keys()
            .map(|nu| self.alpha(nu).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn as_sequence(&self) -> LatticeSequence {
        let mut s = LatticeSequence::new(self.dim());
        for (k, v) in &self.coeffs {
            s.insert(k.clone(), *v);
        }
        s
    }
}

/// `c(f,α) = |κ(E)|^{-1} ∫_{κ(E)} f(x) e^{-i⟨x,α⟩} dx` for every `ν` in the
/// inclusive box `nu_range`, by the midpoint rule on one fundamental cell.
pub fn fourier_coefficients(
    f: &SampledField,
    period: &OrderedBasis,
    nu_range: &[(i64, i64)],
) -> Result<TrigPolynomial> {
    let g = &f.grid;
    let d = period.dim();
    if !g.basis.approx_eq(period, 1e-12) {
        return Err(Error::InvalidArgument("samples are not laid out along the period basis".into()));
    }
    if g.ranges.iter().any(|(a, b)| a != b) {
        return Err(Error::InvalidArgument("samples must cover exactly one fundamental domain".into()));
    }
    if nu_range.len() != d {
        return Err(Error::InvalidArgument("frequency range has wrong dimension".into()));
    }
    for (k, &(lo, hi)) in nu_range.iter().enumerate() {
        for nu in [lo, hi] {
            if 2 * nu.unsigned_abs() >= g.m[k] as u64 {
                let mut alpha = vec![0; d];
                alpha[k] = nu;
                return Err(Error::Aliasing { alpha });
            }
        }
    }
    let coords: Vec<Vec<f64>> = (0..g.len()).map(|i| g.coords_of(&g.multi_index(i))).collect();
    let n = g.len() as f64;
    let mut out = TrigPolynomial::new(period.clone());
    let box_shape: Vec<usize> = nu_range.iter().map(|(a, b)| (b - a + 1) as usize).collect();
    let total: usize = box_shape.iter().product();
    for mut flat in 0..total {
        let nu: Vec<i64> = box_shape
            .iter()
            .zip(nu_range)
            .map(|(&s, &(a, _))| {
                let i = flat % s;
                flat /= s;
                a + i as i64
            })
            .collect();
        let mut re = crate::sum::Kahan::new();
        let mut im = crate::sum::Kahan::new();
        for (u, v) in coords.iter().zip(&f.values) {
            // ⟨x, α⟩ = 2π u·ν in basis coordinates
            let ph: f64 = u.iter().zip(&nu).map(|(a, &b)| a * b as f64).sum::<f64>() * 2.0 * PI;
            let z = v * Complex64::from_polar(1.0, -ph);
            re.add(z.re);
            im.add(z.im);
        }
        let c = Complex64::new(re.value(), im.value()) / n;
        if c.norm() > 1e-14 * f.values.iter().map(|v| v.norm()).fold(0.0, f64::max) {
            out.add_term(nu, c);
        }
    }
    Ok(out)
}

/// `‖{c(f,α) ω_0(α)}‖_{ℓ^q(Λ'_E)}`.
pub fn coefficient_norm(f: &TrigPolynomial, w0: &Weight, exps: &ExponentVector) -> Result<f64> {
    discrete_mixed_norm(&f.as_sequence(), exps, w0, f.dual_basis())
}

/// `⟨f, φ⟩ = (2π)^{d/2} Σ c(f,α) φ̂(−α)`.
pub fn distribution_action(f: &TrigPolynomial, window: &Window) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, c) in f.terms() {
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let h = window
            .hat(&neg)
            .ok_or_else(|| Error::Unsupported("window has no analytic Fourier transform".into()))?;
        acc += c * h;
    }
    Ok(acc * (2.0 * PI).powf(f.dim() as f64 / 2.0))
}

/// Local exponent of a periodic study: a fixed value or "same as `q`".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalExponent {
    Fixed(Exponent),
    MatchQ,
}

impl LocalExponent {
    pub fn resolve(self, q: Exponent) -> Exponent {
        match self {
            LocalExponent::Fixed(r) => r,
            LocalExponent::MatchQ => q,
        }
    }
}

impl fmt::Display for LocalExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalExponent::Fixed(r) => write!(f, "{r}"),
            LocalExponent::MatchQ => f.write_str("q"),
        }
    }
}

impl FromStr for LocalExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "q" {
            Ok(LocalExponent::MatchQ)
        } else {
            s.parse().map(LocalExponent::Fixed)
        }
    }
}

impl Serialize for LocalExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LocalExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            S(String),
            N(f64),
        }
        match Raw::deserialize(d)? {
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::N(v) => Exponent::new(v).map(LocalExponent::Fixed).map_err(serde::de::Error::custom),
        }
    }
}

/// Grids, window and exponent lists of a coefficient/STFT comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSetup {
    pub window: Window,
    pub q_list: Vec<Exponent>,
    pub r_list: Vec<LocalExponent>,
    /// `ω_0` on the frequency side, with a label for reports.
    pub weights: Vec<(String, Weight)>,
    /// Samples per period cell along each `x` axis.
    pub m_x: usize,
    /// Samples per dual cell along each `ξ` axis.
    pub m_xi: usize,
    #[serde(default = "one_thread")]
    pub threads: usize,
}

fn one_thread() -> usize {
    1
}

/// Norms of one polynomial for one `(q, r, ω_0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicRow {
    pub id: String,
    pub q: Exponent,
    pub r: Exponent,
    pub weight: String,
    /// `‖c(f,·)ω_0‖_{ℓ^q}`.
    pub coefficient: f64,
    /// `‖ξ ↦ ‖V_φf(·,ξ)‖_{L^r(κ(E))} ω_0(ξ)‖_{L^q}` in lattice coordinates.
    pub stft: f64,
    /// `(∬_{κ(E)×R^d} |V_φf·ω|^q)^{1/q}` in physical measure, when `r = q < ∞`.
    pub double_integral: Option<f64>,
}

impl PeriodicRow {
    pub fn stft_ratio(&self) -> f64 {
        ratio(self.stft, self.coefficient)
    }

    pub fn integral_ratio(&self) -> Option<f64> {
        self.double_integral.map(|v| ratio(v, self.coefficient))
    }
}

/// One `(q, r, ω_0)` combination with its corpus spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGroup {
    pub q: Exponent,
    pub r: LocalExponent,
    pub weight: String,
    pub rows: Vec<PeriodicRow>,
}

impl PeriodicGroup {
    pub fn stft_spread(&self) -> f64 {
        spread(self.rows.iter().map(|r| r.stft_ratio()))
    }

    pub fn integral_spread(&self) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter_map(|r| r.integral_ratio()).collect();
        if v.is_empty() {
            None
        } else {
            Some(spread(v))
        }
    }
}

/// Past this distance from the coefficient hull, `e^{-σ²t²/2}` is below
/// `10^{-12·max(1, 1/q)}`.
fn xi_reach(window: &Window, q: f64) -> Result<f64> {
    let sigma = window
        .width()
        .ok_or_else(|| Error::Unsupported("window has no analytic Fourier transform".into()))?;
    let decades = 12.0 * (1.0 / q).max(1.0);
    let bulk = match window {
        Window::Hermite { order, .. } => (2.0 * *order as f64 + 1.0).sqrt(),
        _ => 0.0,
    };
    Ok(((2.0 * decades * std::f64::consts::LN_10).sqrt() + bulk) / sigma)
}

/// Phase-space grid over one period cell in `x` and the coefficient hull
/// plus `reach` in `ξ`, in the coordinates of the dual basis.
pub fn periodic_phase_grid(f: &TrigPolynomial, reach: f64, m_x: usize, m_xi: usize) -> Result<GridSpec> {
    let d = f.dim();
    let hull = f.support_box().unwrap_or_else(|| vec![(0, 0); d]);
    let dual = f.dual_basis();
    let mut ranges = vec![(0, 0); d];
    for (k, &(lo, hi)) in hull.iter().enumerate() {
        let col = &dual.columns()[k];
        let len = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pad = (reach / len).ceil() as i64 + 1;
        ranges.push((lo - pad, hi + pad - 1));
    }
    let mut m = vec![m_x; d];
    m.extend(vec![m_xi; d]);
    GridSpec::new(f.period().product(dual), m, ranges)
}

/// Coefficient norm, cell-local STFT norm and (for `r = q`) the double
/// integral of one polynomial.
pub fn periodic_norms(
    f: &TrigPolynomial,
    window: &Window,
    q: Exponent,
    r: Exponent,
    w0: &Weight,
    m_x: usize,
    m_xi: usize,
) -> Result<(f64, f64, Option<f64>)> {
    let d = f.dim();
    let coefficient = coefficient_norm(f, w0, &ExponentVector(vec![q; d]))?;
    let grid = periodic_phase_grid(f, xi_reach(window, q.value())?, m_x, m_xi)?;
    let v = stft_trigpoly(f, window, &grid)?;
    let weight = Weight::lift_second(w0);
    let mut exps = vec![r; d];
    exps.extend(vec![q; d]);
    let spec = MixedNormSpec::new(grid.basis.clone(), ExponentVector(exps), weight.clone());
    let stft = mixed_norm(&v.field, &spec)?;
    if stft > 0.0 {
        check_truncation(&v, &spec, stft, &(d..2 * d).collect::<Vec<_>>())?;
    }
    let double_integral = if r == q && !q.is_infinite() {
        let qv = q.value();
        let weighted = v.field.weigh(&weight)?;
        let s = weighted.map(|z| Complex64::new(z.norm().powf(qv), 0.0)).quadrature()?.re;
        Some(s.powf(1.0 / qv))
    } else {
        None
    };
    Ok((coefficient, stft, double_integral))
}

/// For every `(q, r, ω_0)`: each polynomial's coefficient norm, cell-local
/// STFT norm and double integral, with corpus spreads of their ratios.
pub fn periodic_equivalence_study(
    corpus: &[(String, TrigPolynomial)],
    setup: &PeriodicSetup,
) -> Result<Vec<PeriodicGroup>> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    let d = corpus[0].1.dim();
    if let Some((id, _)) = corpus.iter().find(|(_, p)| p.dim() != d) {
        return Err(Error::InvalidArgument(format!("polynomial {id} has a different dimension")));
    }
    if let Some((label, _)) = setup.weights.iter().find(|(_, w)| w.dim() != d) {
        return Err(Error::InvalidArgument(format!("weight {label} must have dimension {d}")));
    }
    let mut groups = Vec::new();
    for &q in &setup.q_list {
        for &rc in &setup.r_list {
            let r = rc.resolve(q);
            for (label, w0) in &setup.weights {
                let rows = par_map(corpus, setup.threads, |(id, f)| -> Result<PeriodicRow> {
                    let (coefficient, stft, double_integral) =
                        periodic_norms(f, &setup.window, q, r, w0, setup.m_x, setup.m_xi)?;
                    Ok(PeriodicRow { id: id.clone(), q, r, weight: label.clone(), coefficient, stft, double_integral })
                });
                groups.push(PeriodicGroup {
                    q,
                    r: rc,
                    weight: label.clone(),
                    rows: rows.into_iter().collect::<Result<_>>()?,
                });
            }
        }
    }
    Ok(groups)
}

/// `‖V_φf(·,ξ)‖_{L^r(x_s + κ(E))}` with `x_s = s/m` periods, for each shift
/// `s` and each `ξ` node of `xi_grid` (one-dimensional polynomials).
pub fn translated_cell_norms(
    f: &TrigPolynomial,
    window: &Window,
    xi_grid: &GridSpec,
    m: usize,
    r: f64,
    shifts: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if f.dim() != 1 || xi_grid.dim() != 1 {
        return Err(Error::Unsupported("translated cell norms are implemented for d = 1".into()));
    }
    let far = shifts.iter().copied().max().unwrap_or(0);
    let cells = (far + m).div_ceil(m) as i64;
    let xg = GridSpec::new(f.period().clone(), vec![m], vec![(0, cells - 1)])?;
    let grid = xg.product(xi_grid);
    let v = stft_trigpoly(f, window, &grid)?;
    let nx = xg.len();
    let step = 1.0 / m as f64;
    Ok(shifts
        .iter()
        .map(|&s| {
            (0..xi_grid.len())
                .map(|ixi| {
                    let row = &v.field.values[nx * ixi..nx * (ixi + 1)];
                    lq_norm(row[s..s + m].iter().map(|z| z.norm()), r, step)
                })
                .collect()
        })
        .collect())
}

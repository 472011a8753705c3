//! Iterated mixed quasi-norms `L^q_{E,(ω)}` on sampled fields and their
//! discrete counterparts on lattices.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::lattice::OrderedBasis;
use crate::sum::Kahan;
use crate::weight::Weight;

/// A Lebesgue exponent in `(0, ∞]`. `∞` is stored as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const INF: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && !p.is_nan() {
            Ok(Exponent(p))
        } else {
            Err(Error::InvalidArgument(format!("exponent {p} is not in (0, inf]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    /// Accepts decimals, `inf`/`infinity`/`∞`, and fractions like `1/2`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse exponent `{s}`"));
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => return Ok(Exponent::INF),
            _ => {}
        }
        let v = match t.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.trim().parse().map_err(|_| bad())?;
                let b: f64 = b.trim().parse().map_err(|_| bad())?;
                a / b
            }
            None => t.parse().map_err(|_| bad())?,
        };
        Exponent::new(v)
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            S(String),
            N(f64),
        }
        match Raw::deserialize(d)? {
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::N(v) => Exponent::new(v).map_err(serde::de::Error::custom),
        }
    }
}

/// Per-axis exponents `(q_1, …, q_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentVector(pub Vec<Exponent>);

impl ExponentVector {
    pub fn new(values: &[f64]) -> Result<Self> {
        values.iter().map(|&v| Exponent::new(v)).collect::<Result<Vec<_>>>().map(ExponentVector)
    }

    /// `(q, …, q)`.
    pub fn scalar(q: f64, d: usize) -> Result<Self> {
        Ok(ExponentVector(vec![Exponent::new(q)?; d]))
    }

    pub fn parse(items: &[&str]) -> Result<Self> {
        items.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>().map(ExponentVector)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|e| e.0).collect()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().map(|e| e.0).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().map(|e| e.0).fold(0.0, f64::max)
    }

    /// `min(1, q_1, …, q_d)`.
    pub fn order(&self) -> f64 {
        self.min().min(1.0)
    }

    pub fn concat(&self, other: &ExponentVector) -> ExponentVector {
        ExponentVector(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `(Σ v^q·step)^{1/q}`, or the maximum for `q = ∞`. Scaled by the maximum
/// so large dynamic ranges neither overflow nor underflow.
pub fn lq_norm<I: IntoIterator<Item = f64> + Clone>(values: I, q: f64, step: f64) -> f64 {
    let m = values.clone().into_iter().fold(0.0_f64, f64::max);
    if m == 0.0 || q.is_infinite() {
        return m;
    }
    let mut acc = Kahan::new();
    for v in values {
        if v > 0.0 {
            acc.add((v / m).powf(q));
        }
    }
    (acc.value() * step).powf(1.0 / q) * m
}

/// Dense real array with axis 0 fastest, reduced one axis at a time.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Dense { shape, data }
    }

    /// Replaces axis `axis` by its `L^q` norm with sample step `step`.
    pub fn reduce_axis(&self, axis: usize, q: f64, step: f64) -> Dense {
        let inner: usize = self.shape[..axis].iter().product();
        let n = self.shape[axis];
        let outer: usize = self.shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(inner * outer);
        let mut line = vec![0.0; n];
        for o in 0..outer {
            for i in 0..inner {
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = self.data[i + inner * (k + n * o)];
                }
                data.push(lq_norm(line.iter().copied(), q, step));
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Dense { shape, data }
    }

    /// Reduces all axes in the order `perm` (original axis labels).
    pub fn reduce_all(mut self, exps: &[f64], steps: &[f64], perm: &[usize]) -> f64 {
        let mut remaining: Vec<usize> = (0..exps.len()).collect();
        for &a in perm {
            let pos = remaining.iter().position(|&r| r == a).expect("valid permutation");
            self = self.reduce_axis(pos, exps[a], steps[a]);
            remaining.remove(pos);
        }
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }
}

pub(crate) fn check_permutation(perm: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if perm.len() != d {
        return Err(Error::InvalidArgument(format!(
            "permutation {perm:?} does not have length {d}"
        )));
    }
    for &p in perm {
        if p >= d || seen[p] {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Mixed norm `L^q_{E,(ω)}`, optionally restricted to a union of cells and
/// reduced in a permuted axis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub basis: OrderedBasis,
    pub exponents: ExponentVector,
    pub weight: Weight,
    /// Inclusive cell ranges per axis; samples outside are treated as zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<(i64, i64)>>,
    /// Order in which axes are reduced; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
}

impl MixedNormSpec {
    pub fn new(basis: OrderedBasis, exponents: ExponentVector, weight: Weight) -> Self {
        MixedNormSpec { basis, exponents, weight, region: None, permutation: None }
    }

    pub fn with_permutation(mut self, perm: Vec<usize>) -> Self {
        self.permutation = Some(perm);
        self
    }

    pub fn with_region(mut self, region: Vec<(i64, i64)>) -> Self {
        self.region = Some(region);
        self
    }

    pub fn order(&self) -> Vec<usize> {
        self.permutation.clone().unwrap_or_else(|| (0..self.exponents.len()).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.basis.dim();
        if self.exponents.len() != d {
            return Err(Error::InvalidArgument(format!(
                "{} exponents for a {d}-dimensional basis",
                self.exponents.len()
            )));
        }
        if self.weight.dim() != d {
            return Err(Error::InvalidArgument(format!(
                "weight of dimension {} for a {d}-dimensional basis",
                self.weight.dim()
            )));
        }
        if let Some(r) = &self.region {
            if r.len() != d {
                return Err(Error::InvalidArgument("region has wrong dimension".into()));
            }
        }
        check_permutation(&self.order(), d)
    }
}

/// `|f·ω|` at the samples, in flat order.
pub(crate) fn weighted_magnitudes(f: &SampledField, w: &Weight) -> Result<Vec<f64>> {
    if w.is_constant() {
        return Ok(f.magnitudes());
    }
    f.weigh(w).map(|g| g.magnitudes())
}

/// The `g_k` recursion: reduce axis 1 first (or in `spec.permutation` order),
/// integrating over basis coordinates with step `1/m_k`.
pub fn mixed_norm(f: &SampledField, spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    if !f.grid.basis.approx_eq(&spec.basis, 1e-12) {
        return Err(Error::InvalidArgument(
            "field grid axes are not aligned with the norm's basis".into(),
        ));
    }
    let mut g = weighted_magnitudes(f, &spec.weight)?;
    if let Some(region) = &spec.region {
        for (i, v) in g.iter_mut().enumerate() {
            let idx = f.grid.multi_index(i);
            let inside = idx.iter().enumerate().all(|(k, &ik)| {
                let cell = f.grid.ranges[k].0 + (ik / f.grid.m[k]) as i64;
                cell >= region[k].0 && cell <= region[k].1
            });
            if !inside {
                *v = 0.0;
            }
        }
    }
    let steps: Vec<f64> = f.grid.m.iter().map(|&m| 1.0 / m as f64).collect();
    Ok(Dense::new(f.grid.shape(), g).reduce_all(&spec.exponents.values(), &steps, &spec.order()))
}

/// A finitely supported complex sequence on `Z^d` (lattice coordinates).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatticeSequence {
    pub dim: usize,
    pub entries: BTreeMap<Vec<i64>, Complex64>,
}

impl LatticeSequence {
    pub fn new(dim: usize) -> Self {
        LatticeSequence { dim, entries: BTreeMap::new() }
    }

    pub fn delta(j: Vec<i64>) -> Self {
        let mut s = LatticeSequence::new(j.len());
        s.entries.insert(j, Complex64::new(1.0, 0.0));
        s
    }

    pub fn insert(&mut self, j: Vec<i64>, v: Complex64) {
        assert_eq!(j.len(), self.dim, "index dimension");
        self.entries.insert(j, v);
    }

    pub fn get(&self, j: &[i64]) -> Complex64 {
        self.entries.get(j).copied().unwrap_or_default()
    }

    /// Inclusive bounding box of the support, or `None` if empty.
    pub fn bounding_box(&self) -> Option<Vec<(i64, i64)>> {
        let mut it = self.entries.keys();
        let first = it.next()?;
        let mut bb: Vec<(i64, i64)> = first.iter().map(|&v| (v, v)).collect();
        for j in it {
            for (b, &v) in bb.iter_mut().zip(j) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        Some(bb)
    }

    /// Dense magnitudes `|a(j)|·ω(T_E j)` over the bounding box.
    pub(crate) fn dense_weighted(&self, w: &Weight, basis: &OrderedBasis) -> Result<(Vec<(i64, i64)>, Dense)> {
        let bb = self.bounding_box().unwrap_or_else(|| vec![(0, 0); self.dim]);
        let shape: Vec<usize> = bb.iter().map(|(a, b)| (b - a + 1) as usize).collect();
        let mut data = vec![0.0; shape.iter().product()];
        for (j, v) in &self.entries {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Unsupported(format!("non-finite sequence value at {j:?}")));
            }
            let mut flat = 0;
            for k in (0..self.dim).rev() {
                flat = flat * shape[k] + (j[k] - bb[k].0) as usize;
            }
            let jf: Vec<f64> = j.iter().map(|&x| x as f64).collect();
            let wv = if w.is_constant() { 1.0 } else { w.eval(&basis.from_coords(&jf))? };
            data[flat] = v.norm() * wv;
        }
        Ok((bb, Dense::new(shape, data)))
    }
}

/// `ℓ^q_{E,(ω)}` with axes reduced first-to-last.
pub fn discrete_mixed_norm(
    a: &LatticeSequence,
    exps: &ExponentVector,
    w: &Weight,
    basis: &OrderedBasis,
) -> Result<f64> {
    let perm: Vec<usize> = (0..a.dim).collect();
    discrete_mixed_norm_ordered(a, exps, w, basis, &perm)
}

/// [`discrete_mixed_norm`] with an explicit reduction order.
pub fn discrete_mixed_norm_ordered(
    a: &LatticeSequence,
    exps: &ExponentVector,
    w: &Weight,
    basis: &OrderedBasis,
    perm: &[usize],
) -> Result<f64> {
    if exps.len() != a.dim || basis.dim() != a.dim || w.dim() != a.dim {
        return Err(Error::InvalidArgument(
            "sequence, exponents, weight and basis dimensions differ".into(),
        ));
    }
    check_permutation(perm, a.dim)?;
    let (_, dense) = a.dense_weighted(w, basis)?;
    Ok(dense.reduce_all(&exps.values(), &vec![1.0; a.dim], perm))
}

/// Outcome of an `r`-power triangle inequality test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleCheck {
    pub holds: bool,
    /// `‖f+g‖^r − ‖f‖^r − ‖g‖^r`; nonpositive when the inequality holds.
    pub defect: f64,
}

/// Tests `‖f+g‖^r ≤ ‖f‖^r + ‖g‖^r` for any norm evaluator, with slack `1e-12`
/// relative to the right-hand side.
pub fn quasi_triangle_check<N>(norm: N, f: &SampledField, g: &SampledField, r: f64) -> Result<TriangleCheck>
where
    N: Fn(&SampledField) -> Result<f64>,
{
    let one = Complex64::new(1.0, 0.0);
    let sum = f.combine(one, g, one)?;
    let lhs = norm(&sum)?.powf(r);
    let rhs = norm(f)?.powf(r) + norm(g)?.powf(r);
    let defect = lhs - rhs;
    Ok(TriangleCheck { holds: defect <= 1e-12 * rhs.max(f64::MIN_POSITIVE), defect })
}

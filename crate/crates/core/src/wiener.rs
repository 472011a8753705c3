//! Wiener amalgam norms with a local `L^r` component over lattice cells and
//! a discrete global component, the two-variable variants on phase space,
//! and the ℳ/𝒲 norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, SampledField};
use crate::lattice::OrderedBasis;
use crate::mixed::{check_permutation, lq_norm, weighted_magnitudes, Dense, ExponentVector};
use crate::stft::{split_phase_grid, StftField};
use crate::weight::Weight;

/// `‖f‖_{𝖶^r_E(ω_0, ℓ^p_E)} = ‖j ↦ ‖f‖_{L^r_E(j+κ(E))} ω_0(j)‖_{ℓ^p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerSpec {
    pub local: ExponentVector,
    pub basis: OrderedBasis,
    pub global: ExponentVector,
    /// `ω_0`, evaluated at the lattice points `T_E j`.
    pub weight: Weight,
    /// Axis reduction order, shared by the local and the global norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
}

impl WienerSpec {
    pub fn new(local: ExponentVector, basis: OrderedBasis, global: ExponentVector) -> Self {
        let d = basis.dim();
        WienerSpec { local, basis, global, weight: Weight::one(d), permutation: None }
    }

    pub fn with_weight(mut self, w: Weight) -> Self {
        self.weight = w;
        self
    }

    pub fn with_permutation(mut self, perm: Vec<usize>) -> Self {
        self.permutation = Some(perm);
        self
    }

    pub fn order(&self) -> Vec<usize> {
        self.permutation.clone().unwrap_or_else(|| (0..self.basis.dim()).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.basis.dim();
        if self.local.len() != d || self.global.len() != d || self.weight.dim() != d {
            return Err(Error::InvalidArgument(format!(
                "Wiener spec on a {d}-dimensional basis has {} local exponents, {} global exponents and a weight of dimension {}",
                self.local.len(),
                self.global.len(),
                self.weight.dim()
            )));
        }
        check_permutation(&self.order(), d)
    }
}

/// Number of grid cells per Wiener cell along each axis, if `cells` is the
/// grid basis with every column scaled by a positive integer.
fn cell_factors(grid: &GridSpec, cells: &OrderedBasis) -> Result<Vec<usize>> {
    let d = grid.dim();
    if cells.dim() != d {
        return Err(Error::InvalidArgument("cell basis and grid differ in dimension".into()));
    }
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let g = &grid.basis.columns()[k];
        let e = &cells.columns()[k];
        let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let en: f64 = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n = (en / gn).round();
        let aligned = n >= 1.0 && g.iter().zip(e).all(|(a, b)| (a * n - b).abs() <= 1e-9 * en.max(1.0));
        if !aligned {
            return Err(Error::Resolution(format!(
                "grid is not cell-commensurate with the Wiener cells along axis {k}"
            )));
        }
        let n = n as usize;
        let (a, b) = grid.ranges[k];
        if a.rem_euclid(n as i64) != 0 || (b + 1).rem_euclid(n as i64) != 0 {
            return Err(Error::Resolution(format!(
                "grid range {a}..={b} on axis {k} does not cover whole cells of size {n}"
            )));
        }
        out.push(n);
    }
    Ok(out)
}

/// `h(j) = ‖f‖_{L^r(j+κ(E))} ω_0(j)` for every cell covered by the grid,
/// from precomputed magnitudes. Returns the first cell index and the array.
pub(crate) fn cell_norms(mags: &[f64], grid: &GridSpec, spec: &WienerSpec) -> Result<(Vec<i64>, Dense)> {
    spec.validate()?;
    let factors = cell_factors(grid, &spec.basis)?;
    let d = grid.dim();
    let shape = grid.shape();
    let per: Vec<usize> = factors.iter().zip(&grid.m).map(|(n, m)| n * m).collect();
    let counts: Vec<usize> = shape.iter().zip(&per).map(|(s, p)| s / p).collect();
    let first: Vec<i64> = grid.ranges.iter().zip(&factors).map(|(&(a, _), &n)| a / n as i64).collect();
    let steps: Vec<f64> = per.iter().map(|&p| 1.0 / p as f64).collect();
    let local = spec.local.values();
    let order = spec.order();
    let total: usize = counts.iter().product();
    let block_len: usize = per.iter().product();
    let mut data = Vec::with_capacity(total);
    let mut block = vec![0.0; block_len];
    let mut j = vec![0usize; d];
    let mut idx = vec![0usize; d];
    let mut off = vec![0usize; d];
    for _ in 0..total {
        for slot in block.iter_mut() {
            for k in 0..d {
                idx[k] = j[k] * per[k] + off[k];
            }
            *slot = mags[grid.flat_index(&idx)];
            for k in 0..d {
                off[k] += 1;
                if off[k] < per[k] {
                    break;
                }
                off[k] = 0;
            }
        }
        let mut h = Dense::new(per.clone(), block.clone()).reduce_all(&local, &steps, &order);
        if !spec.weight.is_constant() {
            let jc: Vec<f64> = j.iter().zip(&first).map(|(&a, &b)| (a as i64 + b) as f64).collect();
            h *= spec.weight.eval(&spec.basis.from_coords(&jc))?;
        }
        data.push(h);
        for k in 0..d {
            j[k] += 1;
            if j[k] < counts[k] {
                break;
            }
            j[k] = 0;
        }
    }
    Ok((first, Dense::new(counts, data)))
}

fn wiener_from_magnitudes(mags: &[f64], grid: &GridSpec, spec: &WienerSpec) -> Result<f64> {
    let (_, h) = cell_norms(mags, grid, spec)?;
    let d = grid.dim();
    Ok(h.reduce_all(&spec.global.values(), &vec![1.0; d], &spec.order()))
}

/// Plain Wiener amalgam norm of a sampled field.
pub fn wiener_norm(f: &SampledField, spec: &WienerSpec) -> Result<f64> {
    wiener_from_magnitudes(&f.magnitudes(), &f.grid, spec)
}

/// Two-variable Wiener norms on a phase-space field: Wiener cells in `x`,
/// a mixed Lebesgue norm `L^q` (over the grid's `ξ` basis) in `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoVariableSpec {
    pub local: ExponentVector,
    pub cells: OrderedBasis,
    pub global: ExponentVector,
    pub companion: ExponentVector,
    /// `ω` on `R^{2d}`, applied pointwise before any reduction.
    pub weight: Weight,
}

impl TwoVariableSpec {
    fn x_spec(&self) -> WienerSpec {
        WienerSpec::new(self.local.clone(), self.cells.clone(), self.global.clone())
    }

    fn check(&self, f: &StftField) -> Result<(GridSpec, GridSpec, Vec<f64>)> {
        let d = f.dim();
        if self.companion.len() != d || self.weight.dim() != 2 * d {
            return Err(Error::InvalidArgument(format!(
                "companion exponents must have length {d} and the weight dimension {}",
                2 * d
            )));
        }
        let (xg, xig) = split_phase_grid(&f.field.grid)?;
        let mags = weighted_magnitudes(&f.field, &self.weight)?;
        Ok((xg, xig, mags))
    }
}

/// `ξ ↦ ‖F_ω(·,ξ)‖_{𝖶^r_E(1,ℓ^p)}` followed by the `L^q` norm in `ξ`.
pub fn wiener_var1(f: &StftField, spec: &TwoVariableSpec) -> Result<f64> {
    let (xg, xig, mags) = spec.check(f)?;
    let ws = spec.x_spec();
    let nx = xg.len();
    let mut phi = Vec::with_capacity(xig.len());
    for slice in mags.chunks(nx) {
        phi.push(wiener_from_magnitudes(slice, &xg, &ws)?);
    }
    let d = xig.dim();
    let steps: Vec<f64> = xig.m.iter().map(|&m| 1.0 / m as f64).collect();
    let perm: Vec<usize> = (0..d).collect();
    Ok(Dense::new(xig.shape(), phi).reduce_all(&spec.companion.values(), &steps, &perm))
}

/// `x ↦ ‖F_ω(x,·)‖_{L^q}` followed by the Wiener norm `𝖶^r_E(1,ℓ^p)` in `x`.
pub fn wiener_var2(f: &StftField, spec: &TwoVariableSpec) -> Result<f64> {
    let (xg, xig, mags) = spec.check(f)?;
    let psi = companion_profile(&mags, &xg, &xig, &spec.companion);
    wiener_from_magnitudes(&psi, &xg, &spec.x_spec())
}

fn companion_profile(mags: &[f64], xg: &GridSpec, xig: &GridSpec, q: &ExponentVector) -> Vec<f64> {
    let nx = xg.len();
    let nxi = xig.len();
    let d = xig.dim();
    let steps: Vec<f64> = xig.m.iter().map(|&m| 1.0 / m as f64).collect();
    let perm: Vec<usize> = (0..d).collect();
    let qv = q.values();
    (0..nx)
        .map(|ix| {
            let col: Vec<f64> = (0..nxi).map(|i| mags[ix + nx * i]).collect();
            if d == 1 {
                lq_norm(col.iter().copied(), qv[0], steps[0])
            } else {
                Dense::new(xig.shape(), col).reduce_all(&qv, &steps, &perm)
            }
        })
        .collect()
}

/// Local exponents `𝒓`, `x`-cells, companion `L^q` in `ξ` and weight for
/// the ℳ and 𝒲 norms (global component fixed to `ℓ^∞`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptSpec {
    pub local: ExponentVector,
    pub cells: OrderedBasis,
    pub companion: ExponentVector,
    pub weight: Weight,
}

impl ScriptSpec {
    fn two_variable(&self) -> Result<TwoVariableSpec> {
        Ok(TwoVariableSpec {
            local: self.local.clone(),
            cells: self.cells.clone(),
            global: ExponentVector::scalar(f64::INFINITY, self.cells.dim())?,
            companion: self.companion.clone(),
            weight: self.weight.clone(),
        })
    }
}

/// `(‖f‖_{ℳ^r_E(ω,L^q)}, ‖f‖_{𝒲^r_E(ω,L^q)})` from one STFT field.
pub fn script_norms(f: &StftField, spec: &ScriptSpec) -> Result<(f64, f64)> {
    let tv = spec.two_variable()?;
    Ok((wiener_var1(f, &tv)?, wiener_var2(f, &tv)?))
}

/// The three norms of each embedding chain on a phase-space field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingChains {
    /// `(left, middle, right)` with cells in `x` first.
    pub chain1: [f64; 3],
    /// `(left, middle, right)` with `ξ` reduced first.
    pub chain2: [f64; 3],
}

impl EmbeddingChains {
    /// `middle/left` and `right/middle` for both chains.
    pub fn ratios(&self) -> [[f64; 2]; 2] {
        let r = |c: &[f64; 3]| [ratio(c[1], c[0]), ratio(c[2], c[1])];
        [r(&self.chain1), r(&self.chain2)]
    }
}

/// `a/b` with `0/0 = 0`.
pub fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Evaluates both embedding chains on `F_ω`, with cells given by the grid's
/// own `E_1 × E_2` cells.
///
/// Chain 1: `𝖶^{(r,∞)}(ℓ^{p,q})`, `𝖶^r_1(ℓ^p, L^q)`, `𝖶^{r_1}(ℓ^{p,q})`.
/// Chain 2 (ξ first): `𝖶^∞(ℓ^{p,q})`, `𝖶^{r_2}_2(ℓ^p, L^q)`, `𝖶^{r_2}(ℓ^{p,q})`.
pub fn embedding_check_rel1(
    f: &StftField,
    p: &ExponentVector,
    q: &ExponentVector,
    r: &ExponentVector,
    r1: f64,
    r2: f64,
    w: &Weight,
) -> Result<EmbeddingChains> {
    let d = f.dim();
    if p.len() != d || q.len() != d || r.len() != d {
        return Err(Error::InvalidArgument(format!("exponent vectors must have length {d}")));
    }
    let bound1 = p.min().min(q.min()).min(r.min()).min(1.0);
    if !(r1 > 0.0 && r1 <= bound1) {
        return Err(Error::Precondition(format!(
            "r1 = {r1} must satisfy 0 < r1 <= min(1, p, q, r) = {bound1}"
        )));
    }
    if !(r2 > 0.0 && r2 <= q.min()) {
        return Err(Error::Precondition(format!(
            "r2 = {r2} must satisfy 0 < r2 <= min(q) = {}",
            q.min()
        )));
    }
    let weighted = f.field.weigh(w)?;
    let grid = &weighted.grid;
    let basis = grid.basis.clone();
    let mags = weighted.magnitudes();
    let inf = ExponentVector::scalar(f64::INFINITY, d)?;
    let pq = p.concat(q);
    let xi_first: Vec<usize> = (d..2 * d).chain(0..d).collect();
    let plain = |local: ExponentVector, perm: Option<Vec<usize>>| -> Result<f64> {
        let mut s = WienerSpec::new(local, basis.clone(), pq.clone());
        s.permutation = perm;
        wiener_from_magnitudes(&mags, grid, &s)
    };
    let (xg, _) = split_phase_grid(grid)?;
    let unweighted = StftField { field: weighted.clone(), ..f.clone() };
    let tv = |local: ExponentVector| TwoVariableSpec {
        local,
        cells: xg.basis.clone(),
        global: p.clone(),
        companion: q.clone(),
        weight: Weight::one(2 * d),
    };
    let left1 = plain(r.concat(&inf), None)?;
    let mid1 = wiener_var1(&unweighted, &tv(r.clone()))?;
    let right1 = plain(ExponentVector::scalar(r1, 2 * d)?, None)?;
    let left2 = plain(ExponentVector::scalar(f64::INFINITY, 2 * d)?, Some(xi_first.clone()))?;
    let mid2 = wiener_var2(&unweighted, &tv(ExponentVector::scalar(r2, d)?))?;
    let right2 = plain(ExponentVector::scalar(r2, 2 * d)?, Some(xi_first))?;
    Ok(EmbeddingChains { chain1: [left1, mid1, right1], chain2: [left2, mid2, right2] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Codomain;
    use crate::window::Window;
    use num_complex::Complex64;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn field1(m: usize, lo: i64, hi: i64, f: impl Fn(f64) -> f64) -> SampledField {
        let g = GridSpec::uniform(OrderedBasis::standard(1), m, lo, hi).unwrap();
        SampledField::from_fn(g, Codomain::Function, |x| c(f(x[0]))).unwrap()
    }

    fn ev(s: &[&str]) -> ExponentVector {
        ExponentVector::parse(s).unwrap()
    }

    #[test]
    fn single_cell_indicator() {
        let f = field1(8, -3, 3, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
        for (r, p) in [("1", "1"), ("0.5", "inf"), ("inf", "0.5"), ("2", "3")] {
            let spec = WienerSpec::new(ev(&[r]), OrderedBasis::standard(1), ev(&[p]));
            assert!((wiener_norm(&f, &spec).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn one_sided_exponential() {
        let m = 1000;
        let f = field1(m, -2, 59, |x| if x >= 0.0 { (-x).exp() } else { 0.0 });
        let sup = wiener_norm(&f, &WienerSpec::new(ev(&["inf"]), OrderedBasis::standard(1), ev(&["1"]))).unwrap();
        let geometric = 1.0 / (1.0 - (-1.0f64).exp());
        // the grid maximum sits half a sample inside each cell
        assert!((sup - geometric).abs() <= geometric / (2.0 * m as f64), "{sup}");
        let l1 = wiener_norm(&f, &WienerSpec::new(ev(&["1"]), OrderedBasis::standard(1), ev(&["1"]))).unwrap();
        assert!((l1 - 1.0).abs() < 1e-6, "{l1}");
    }

    #[test]
    fn coarser_cells_are_supported() {
        let f = field1(4, -4, 3, |x| (x * 0.7).sin().abs());
        let two = OrderedBasis::diagonal(&[2.0]).unwrap();
        let spec = WienerSpec::new(ev(&["2"]), two, ev(&["1"]));
        let v = wiener_norm(&f, &spec).unwrap();
        // oracle: each cell [2j, 2j+2) has unit coordinate length, L² norm over 8 samples
        let mut acc = 0.0;
        for j in -2..2 {
            let s: f64 = (0..8).map(|i| {
                let x = 2.0 * j as f64 + (i as f64 + 0.5) / 4.0;
                (x * 0.7).sin().powi(2)
            }).sum::<f64>() / 8.0;
            acc += s.sqrt();
        }
        assert!((v - acc).abs() < 1e-12);

        let bad = WienerSpec::new(ev(&["2"]), OrderedBasis::diagonal(&[1.5]).unwrap(), ev(&["1"]));
        assert!(matches!(wiener_norm(&f, &bad), Err(Error::Resolution(_))));
        let odd = field1(4, -3, 3, |_| 1.0);
        let spec = WienerSpec::new(ev(&["2"]), OrderedBasis::diagonal(&[2.0]).unwrap(), ev(&["1"]));
        assert!(matches!(wiener_norm(&odd, &spec), Err(Error::Resolution(_))));
    }

    fn phase_field(m: usize, lo: i64, hi: i64, f: impl Fn(f64, f64) -> f64) -> StftField {
        let g = GridSpec::uniform(OrderedBasis::standard(2), m, lo, hi).unwrap();
        StftField {
            field: SampledField::from_fn(g, Codomain::PhaseSpace, |p| c(f(p[0], p[1]))).unwrap(),
            window: Window::gaussian(1, 1.0),
            source: "test".into(),
            x_period: None,
        }
    }

    fn tv(r: &str, p: &str, q: &str) -> TwoVariableSpec {
        TwoVariableSpec {
            local: ev(&[r]),
            cells: OrderedBasis::standard(1),
            global: ev(&[p]),
            companion: ev(&[q]),
            weight: Weight::one(2),
        }
    }

    #[test]
    fn two_variable_indicator_and_factorization() {
        let unit = phase_field(4, -2, 2, |x, y| if (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) { 1.0 } else { 0.0 });
        assert!((wiener_var1(&unit, &tv("1", "1", "1")).unwrap() - 1.0).abs() < 1e-14);
        assert!((wiener_var2(&unit, &tv("1", "1", "1")).unwrap() - 1.0).abs() < 1e-14);

        let g = |x: f64| (-(x - 0.3).powi(2)).exp();
        let h = |y: f64| 1.0 / (1.0 + y * y);
        let sep = phase_field(8, -4, 3, |x, y| g(x) * h(y));
        let gf = field1(8, -4, 3, g);
        let hf = field1(8, -4, 3, h);
        let spec = tv("2", "0.5", "3");
        let wg = wiener_norm(&gf, &WienerSpec::new(ev(&["2"]), OrderedBasis::standard(1), ev(&["0.5"]))).unwrap();
        let hq = crate::mixed::lq_norm(hf.magnitudes(), 3.0, 1.0 / 8.0);
        for v in [wiener_var1(&sep, &spec).unwrap(), wiener_var2(&sep, &spec).unwrap()] {
            assert!((v - wg * hq).abs() < 1e-12 * v, "{v} vs {}", wg * hq);
        }
    }

    #[test]
    fn weighted_consistency_is_exact() {
        let f = phase_field(4, -3, 2, |x, y| (-(x * x + y * y) / 3.0).exp());
        let w = Weight::lift_second(&Weight::polynomial(1, 1.5));
        let pre = StftField { field: f.field.weigh(&w).unwrap(), ..f.clone() };
        let mut spec = tv("0.5", "2", "1");
        let a = wiener_var2(&pre, &spec).unwrap();
        spec.weight = w;
        let b = wiener_var2(&f, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_indicator_chains() {
        let unit = phase_field(4, -2, 2, |x, y| if (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) { 1.0 } else { 0.0 });
        let ch = embedding_check_rel1(&unit, &ev(&["1"]), &ev(&["2"]), &ev(&["1"]), 0.5, 1.0, &Weight::one(2)).unwrap();
        for v in ch.chain1 {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn chain_hypotheses_enforced() {
        let f = phase_field(2, -1, 0, |_, _| 1.0);
        let one = ev(&["1"]);
        let e = embedding_check_rel1(&f, &one, &one, &one, 2.0, 1.0, &Weight::one(2)).unwrap_err();
        assert!(matches!(e, Error::Precondition(ref m) if m.contains("r1")));
        let e = embedding_check_rel1(&f, &one, &ev(&["0.5"]), &one, 0.5, 1.0, &Weight::one(2)).unwrap_err();
        assert!(matches!(e, Error::Precondition(ref m) if m.contains("r2")));
    }

    #[test]
    fn gaussian_pair_first_inequalities() {
        let f = phase_field(8, -8, 7, |x, y| (2.0 * std::f64::consts::PI).powf(-0.5) * (-(x * x + y * y) / 4.0).exp());
        let ch = embedding_check_rel1(&f, &ev(&["1"]), &ev(&["2"]), &ev(&["2"]), 0.5, 1.0, &Weight::one(2)).unwrap();
        assert!(ch.chain1[1] <= ch.chain1[0] * (1.0 + 1e-9));
        assert!(ch.chain2[1] <= ch.chain2[0] * (1.0 + 1e-9));
        assert!(ch.chain1.iter().chain(&ch.chain2).all(|v| v.is_finite() && *v > 0.0));
    }
}

//! Ordered bases, dual bases, lattices and their fundamental cells.
//!
//! A basis `E = {e_1, .., e_d}` is stored as the matrix `T_E` whose columns are
//! the basis vectors. Its dual basis `E'` satisfies `<e_j, e'_k> = 2π δ_jk`,
//! i.e. `T_{E'} = 2π (T_E^{-1})^t`. The fundamental cell `κ(E)` is realized
//! half-open, `[0,1)^d` in basis coordinates, so that lattice translates tile
//! `R^d` without overlap.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative determinant threshold below which a basis is rejected.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Tolerance used when matching a Gram matrix against `2π` times a permutation.
pub const PERMUTED_DUAL_TOL: f64 = 1e-9;

/// Largest dimension for which permuted duality is decided by exhaustive search.
const EXHAUSTIVE_PERMUTATION_MAX_DIM: usize = 6;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawBasis {
    columns: Vec<Vec<f64>>,
}

/// An ordered basis of `R^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawBasis", into = "RawBasis")]
pub struct OrderedBasis {
    columns: Vec<Vec<f64>>,
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
}

impl TryFrom<RawBasis> for OrderedBasis {
    type Error = Error;

    fn try_from(raw: RawBasis) -> Result<Self> {
        OrderedBasis::new(raw.columns)
    }
}

impl From<OrderedBasis> for RawBasis {
    fn from(b: OrderedBasis) -> Self {
        RawBasis { columns: b.columns }
    }
}

impl PartialEq for OrderedBasis {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
    }
}

impl OrderedBasis {
    /// Builds a basis from its column vectors, rejecting degenerate sets.
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(Error::InvalidArgument("basis must contain at least one vector".into()));
        }
        if columns.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidArgument(format!(
                "basis of {d} vectors must consist of vectors of length {d}"
            )));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("basis vectors must be finite".into()));
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| columns[j][i]);
        let det = matrix.determinant();
        let scale = columns
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0_f64, f64::max);
        let threshold = DEGENERACY_THRESHOLD * scale.powi(d as i32);
        if !(det.abs() > threshold) {
            return Err(Error::Singular { det, threshold });
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { det, threshold })?;
        Ok(OrderedBasis {
            columns,
            matrix,
            inverse,
            det,
        })
    }

    pub fn standard(d: usize) -> Self {
        Self::diagonal(&vec![1.0; d]).expect("standard basis is nondegenerate")
    }

    /// Basis `{s_1 ε_1, .., s_d ε_d}` along the coordinate axes.
    pub fn diagonal(scales: &[f64]) -> Result<Self> {
        let d = scales.len();
        let columns = (0..d)
            .map(|k| {
                let mut c = vec![0.0; d];
                c[k] = scales[k];
                c
            })
            .collect();
        Self::new(columns)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Volume `|κ(E)| = |det T_E|` of the fundamental cell.
    pub fn volume(&self) -> f64 {
        self.det.abs()
    }

    /// Basis coordinates `T_E^{-1} x`.
    pub fn to_coords(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.inverse[(i, j)] * x[j]).sum())
            .collect()
    }

    /// The point `T_E c = c_1 e_1 + .. + c_d e_d`.
    pub fn from_coords(&self, c: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.matrix[(i, j)] * c[j]).sum())
            .collect()
    }

    /// Dual basis `E'` with `<e_j, e'_k> = 2π δ_jk`.
    pub fn dual(&self) -> Result<OrderedBasis> {
        let d = self.dim();
        let columns = (0..d)
            .map(|k| (0..d).map(|i| 2.0 * PI * self.inverse[(k, i)]).collect())
            .collect();
        OrderedBasis::new(columns)
    }

    /// The basis `s·E`.
    pub fn scaled(&self, s: f64) -> Result<OrderedBasis> {
        OrderedBasis::new(
            self.columns
                .iter()
                .map(|c| c.iter().map(|v| v * s).collect())
                .collect(),
        )
    }

    /// The product basis `E_1 × E_2` of `R^{d_1+d_2}`: the vectors of `self`
    /// embedded in the first block followed by those of `other` in the second.
    pub fn product(&self, other: &OrderedBasis) -> OrderedBasis {
        let (d1, d2) = (self.dim(), other.dim());
        let mut columns = Vec::with_capacity(d1 + d2);
        for c in &self.columns {
            let mut v = c.clone();
            v.resize(d1 + d2, 0.0);
            columns.push(v);
        }
        for c in &other.columns {
            let mut v = vec![0.0; d1];
            v.extend_from_slice(c);
            columns.push(v);
        }
        OrderedBasis::new(columns).expect("product of nondegenerate bases is nondegenerate")
    }

    /// Splits a block-diagonal basis of `R^{2d}` into its two `R^d` factors.
    pub fn split_product(&self) -> Option<(OrderedBasis, OrderedBasis)> {
        let n = self.dim();
        if !n.is_multiple_of(2) {
            return None;
        }
        let d = n / 2;
        for (k, c) in self.columns.iter().enumerate() {
            let off = if k < d { &c[d..] } else { &c[..d] };
            if off.iter().any(|v| *v != 0.0) {
                return None;
            }
        }
        let first = self.columns[..d].iter().map(|c| c[..d].to_vec()).collect();
        let second = self.columns[d..].iter().map(|c| c[d..].to_vec()).collect();
        Some((OrderedBasis::new(first).ok()?, OrderedBasis::new(second).ok()?))
    }

    /// Entrywise comparison relative to the largest column norm.
    pub fn approx_eq(&self, other: &OrderedBasis, rel_tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let scale = self
            .columns
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        self.columns
            .iter()
            .flatten()
            .zip(other.columns.iter().flatten())
            .all(|(a, b)| (a - b).abs() <= rel_tol * scale)
    }
}

/// The lattice `Λ_E` of integer combinations of a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub basis: OrderedBasis,
}

impl Lattice {
    pub fn new(basis: OrderedBasis) -> Self {
        Lattice { basis }
    }

    /// The dual lattice `Λ'_E = Λ_{E'}`.
    pub fn dual(&self) -> Result<Lattice> {
        Ok(Lattice::new(self.basis.dual()?))
    }

    pub fn point(&self, n: &[i64]) -> Vec<f64> {
        let c: Vec<f64> = n.iter().map(|&v| v as f64).collect();
        self.basis.from_coords(&c)
    }

    /// Integer coordinates of `x` if it is a lattice point.
    pub fn coordinates(&self, x: &[f64]) -> Option<Vec<i64>> {
        let c = self.basis.to_coords(x);
        let n: Vec<i64> = c.iter().map(|v| v.round() as i64).collect();
        let back = self.point(&n);
        let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let ok = back
            .iter()
            .zip(x)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * scale);
        ok.then_some(n)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.coordinates(x).is_some()
    }

    /// The refined lattice generated by `(1/n)·E`, which contains `self`.
    pub fn refine(&self, n: usize) -> Result<Lattice> {
        if n == 0 {
            return Err(Error::InvalidArgument("refinement factor must be at least 1".into()));
        }
        Ok(Lattice::new(self.basis.scaled(1.0 / n as f64)?))
    }
}

/// Index `j` of the lattice cell `j + κ(E)` containing `x`, in integer basis
/// coordinates. Cells are half-open, so boundary points go to the cell on
/// their upper side (`x = 3` lies in `3 + [0,1)`).
pub fn cell_index(basis: &OrderedBasis, x: &[f64]) -> Vec<i64> {
    basis
        .to_coords(x)
        .into_iter()
        .map(|c| {
            let r = c.round();
            // snap coordinates that are integers up to rounding noise
            if (c - r).abs() <= 1e-12 * r.abs().max(1.0) {
                r as i64
            } else {
                c.floor() as i64
            }
        })
        .collect()
}

/// A phase split basis `E = E_1 × E_2` of `R^{2d}` built from a pair of
/// permuted dual bases; the configuration part `E_0` is the first `d` vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSplitBasis {
    full: OrderedBasis,
    e1: OrderedBasis,
    e2: OrderedBasis,
    /// `permutation[j] = k` when `e2_k` is the dual vector of `e1_j`.
    permutation: Vec<usize>,
}

impl PhaseSplitBasis {
    pub fn full(&self) -> &OrderedBasis {
        &self.full
    }

    pub fn e1(&self) -> &OrderedBasis {
        &self.e1
    }

    pub fn e2(&self) -> &OrderedBasis {
        &self.e2
    }

    /// Half the phase-space dimension.
    pub fn dim(&self) -> usize {
        self.e1.dim()
    }

    /// Indices of the configuration part `E_0` within the full basis.
    pub fn config_part(&self) -> std::ops::Range<usize> {
        0..self.dim()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Always true for bases built by [`phase_split`].
    pub fn is_strongly_phase_split(&self) -> bool {
        true
    }

    /// The dual basis `E' = E_1' × E_2'`.
    pub fn dual(&self) -> Result<OrderedBasis> {
        Ok(self.e1.dual()?.product(&self.e2.dual()?))
    }

    /// Residual of the projection onto `V_1 = {(x,0)}` for `E_0` and onto
    /// `V_2 = {(0,ξ)}` for the remaining vectors.
    pub fn projection_residual(&self) -> f64 {
        let d = self.dim();
        let mut res = 0.0_f64;
        for (k, c) in self.full.columns().iter().enumerate() {
            let off = if k < d { &c[d..] } else { &c[..d] };
            res = res.max(off.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        res
    }
}

/// Gram matrix `<e1_j, e2_k>`.
pub fn gram(e1: &OrderedBasis, e2: &OrderedBasis) -> Vec<Vec<f64>> {
    e1.columns()
        .iter()
        .map(|a| {
            e2.columns()
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect()
}

fn permutation_defect(g: &[Vec<f64>], perm: &[usize]) -> f64 {
    let mut defect = 0.0_f64;
    for (j, row) in g.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let target = if perm[j] == k { 2.0 * PI } else { 0.0 };
            defect = defect.max((v - target).abs());
        }
    }
    defect / (2.0 * PI)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Finds the permutation realizing permuted duality of `(e1, e2)`, if any.
pub fn find_dual_permutation(e1: &OrderedBasis, e2: &OrderedBasis) -> Option<Vec<usize>> {
    if e1.dim() != e2.dim() {
        return None;
    }
    let g = gram(e1, e2);
    let d = e1.dim();
    let best = if d <= EXHAUSTIVE_PERMUTATION_MAX_DIM {
        let mut perm: Vec<usize> = (0..d).collect();
        let mut best = (permutation_defect(&g, &perm), perm.clone());
        while next_permutation(&mut perm) {
            let defect = permutation_defect(&g, &perm);
            if defect < best.0 {
                best = (defect, perm.clone());
            }
        }
        best
    } else {
        // greedy matching: each row takes its entry closest to 2π among unused columns
        let mut used = vec![false; d];
        let mut perm = vec![0; d];
        for (j, row) in g.iter().enumerate() {
            let k = (0..d)
                .filter(|&k| !used[k])
                .min_by(|&a, &b| {
                    (row[a] - 2.0 * PI)
                        .abs()
                        .total_cmp(&(row[b] - 2.0 * PI).abs())
                })
                .expect("an unused column remains");
            used[k] = true;
            perm[j] = k;
        }
        (permutation_defect(&g, &perm), perm)
    };
    (best.0 <= PERMUTED_DUAL_TOL).then_some(best.1)
}

/// Builds the strongly phase split basis `E_1 × E_2` induced by a pair of
/// permuted dual bases.
pub fn phase_split(e1: &OrderedBasis, e2: &OrderedBasis) -> Result<PhaseSplitBasis> {
    if e1.dim() != e2.dim() {
        return Err(Error::InvalidArgument(format!(
            "bases of different dimensions {} and {}",
            e1.dim(),
            e2.dim()
        )));
    }
    let permutation =
        find_dual_permutation(e1, e2).ok_or_else(|| Error::NotPermutedDual { gram: gram(e1, e2) })?;
    Ok(PhaseSplitBasis {
        full: e1.product(e2),
        e1: e1.clone(),
        e2: e2.clone(),
        permutation,
    })
}

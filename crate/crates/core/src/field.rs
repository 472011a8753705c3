//! Uniform cell-centered grids over unions of lattice cells, sampled fields
//! and midpoint quadrature.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::OrderedBasis;
use crate::sum::Kahan;
use crate::weight::Weight;

/// Samples `m_k` points per lattice cell along axis `k`, over the cells
/// `j_min ..= j_max` of each axis. Sample `i` on axis `k` sits at basis
/// coordinate `j_min + (i + 1/2) / m_k`. Axis 0 varies fastest in flat order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub basis: OrderedBasis,
    pub m: Vec<usize>,
    pub ranges: Vec<(i64, i64)>,
}

impl GridSpec {
    pub fn new(basis: OrderedBasis, m: Vec<usize>, ranges: Vec<(i64, i64)>) -> Result<Self> {
        let d = basis.dim();
        if m.len() != d || ranges.len() != d {
            return Err(Error::InvalidArgument(format!(
                "grid over a {d}-dimensional basis needs {d} densities and ranges, got {} and {}",
                m.len(),
                ranges.len()
            )));
        }
        if m.contains(&0) {
            return Err(Error::InvalidArgument("samples per cell must be at least 1".into()));
        }
        if let Some(k) = ranges.iter().position(|(a, b)| b < a) {
            return Err(Error::InvalidArgument(format!("empty cell range on axis {k}")));
        }
        Ok(GridSpec { basis, m, ranges })
    }

    /// Same density and cell range on every axis.
    pub fn uniform(basis: OrderedBasis, m: usize, j_min: i64, j_max: i64) -> Result<Self> {
        let d = basis.dim();
        GridSpec::new(basis, vec![m; d], vec![(j_min, j_max); d])
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Number of cells along each axis.
    pub fn cells(&self) -> Vec<usize> {
        self.ranges.iter().map(|(a, b)| (b - a + 1) as usize).collect()
    }

    /// Number of samples along each axis.
    pub fn shape(&self) -> Vec<usize> {
        self.cells().iter().zip(&self.m).map(|(c, m)| c * m).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element of one sample, `|det T_E| / Π m_k`.
    pub fn sample_volume(&self) -> f64 {
        self.basis.volume() / self.m.iter().map(|&m| m as f64).product::<f64>()
    }

    /// Basis coordinate of sample `i` along `axis`.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.ranges[axis].0 as f64 + (i as f64 + 0.5) / self.m[axis] as f64
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.shape()
            .iter()
            .map(|&n| {
                let i = flat % n;
                flat /= n;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for k in (0..idx.len()).rev() {
            let n = (self.ranges[k].1 - self.ranges[k].0 + 1) as usize * self.m[k];
            flat = flat * n + idx[k];
        }
        flat
    }

    pub fn coords_of(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(k, &i)| self.axis_coord(k, i)).collect()
    }

    /// Physical location of the sample with multi-index `idx`.
    pub fn point_of(&self, idx: &[usize]) -> Vec<f64> {
        self.basis.from_coords(&self.coords_of(idx))
    }

    /// Physical locations of all samples in flat order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|f| self.point_of(&self.multi_index(f))).collect()
    }

    /// Multi-index of the sample located at basis coordinates `c`, if `c` is a
    /// sample center up to `tol` (in units of the sample step).
    pub fn locate_coords(&self, c: &[f64], tol: f64) -> Option<Vec<usize>> {
        let shape = self.shape();
        let mut idx = Vec::with_capacity(c.len());
        for k in 0..c.len() {
            let u = (c[k] - self.ranges[k].0 as f64) * self.m[k] as f64 - 0.5;
            let r = u.round();
            if (u - r).abs() > tol || r < 0.0 || r >= shape[k] as f64 {
                return None;
            }
            idx.push(r as usize);
        }
        Some(idx)
    }

    /// Whether `c` is commensurate with the sample lattice (without range check).
    pub fn is_on_lattice(&self, c: &[f64], tol: f64) -> bool {
        c.iter().enumerate().all(|(k, &v)| {
            let u = (v - self.ranges[k].0 as f64) * self.m[k] as f64 - 0.5;
            (u - u.round()).abs() <= tol
        })
    }

    /// Grid over the single cell `j`.
    pub fn cell(&self, j: &[i64]) -> Result<GridSpec> {
        if j.len() != self.dim() {
            return Err(Error::InvalidArgument("cell index has wrong dimension".into()));
        }
        for (k, (&jk, &(a, b))) in j.iter().zip(&self.ranges).enumerate() {
            if jk < a || jk > b {
                return Err(Error::Range(format!(
                    "cell {j:?} lies outside the grid (axis {k} covers {a}..={b})"
                )));
            }
        }
        GridSpec::new(
            self.basis.clone(),
            self.m.clone(),
            j.iter().map(|&v| (v, v)).collect(),
        )
    }

    /// All cell indices in order (axis 0 fastest).
    pub fn cell_indices(&self) -> Vec<Vec<i64>> {
        let cells = self.cells();
        let total: usize = cells.iter().product();
        (0..total)
            .map(|mut f| {
                cells
                    .iter()
                    .zip(&self.ranges)
                    .map(|(&n, &(a, _))| {
                        let i = f % n;
                        f /= n;
                        a + i as i64
                    })
                    .collect()
            })
            .collect()
    }

    /// Grid with every density multiplied by `k`.
    pub fn refined(&self, k: usize) -> Result<GridSpec> {
        GridSpec::new(
            self.basis.clone(),
            self.m.iter().map(|&m| m * k).collect(),
            self.ranges.clone(),
        )
    }

    /// Grid over the product space `self × other`.
    pub fn product(&self, other: &GridSpec) -> GridSpec {
        GridSpec {
            basis: self.basis.product(&other.basis),
            m: self.m.iter().chain(&other.m).copied().collect(),
            ranges: self.ranges.iter().chain(&other.ranges).copied().collect(),
        }
    }

    /// Sub-grid on the axes `axes` (only meaningful for block-diagonal bases).
    pub fn project(&self, axes: std::ops::Range<usize>) -> Result<GridSpec> {
        let cols: Vec<Vec<f64>> = self.basis.columns()[axes.clone()]
            .iter()
            .map(|c| c[axes.clone()].to_vec())
            .collect();
        GridSpec::new(
            OrderedBasis::new(cols)?,
            self.m[axes.clone()].to_vec(),
            self.ranges[axes].to_vec(),
        )
    }
}

/// What a sampled field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Codomain {
    Function,
    PhaseSpace,
}

/// Complex samples of a function on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub codomain: Codomain,
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    grid: GridSpec,
    codomain: Codomain,
    #[serde(default)]
    metadata: serde_json::Map<String, serde_json::Value>,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, codomain: Codomain) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Range(format!("non-finite sample at flat index {i}")));
        }
        Ok(SampledField { grid, values, codomain })
    }

    /// Samples `f` at the physical location of every grid point.
    pub fn from_fn<F>(grid: GridSpec, codomain: Codomain, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let values = (0..grid.len())
            .map(|i| f(&grid.point_of(&grid.multi_index(i))))
            .collect();
        SampledField::new(grid, values, codomain)
    }

    pub fn zeros(grid: GridSpec, codomain: Codomain) -> Self {
        let n = grid.len();
        SampledField { grid, values: vec![Complex64::new(0.0, 0.0); n], codomain }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn scale(&self, c: Complex64) -> SampledField {
        SampledField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            codomain: self.codomain,
        }
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> SampledField {
        SampledField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            codomain: self.codomain,
        }
    }

    /// Pointwise `a·self + b·other` on a common grid.
    pub fn combine(&self, a: Complex64, other: &SampledField, b: Complex64) -> Result<SampledField> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("fields live on different grids".into()));
        }
        Ok(SampledField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
            codomain: self.codomain,
        })
    }

    /// Midpoint rule: per-cell compensated sums, added cell by cell in
    /// [`GridSpec::cell_indices`] order, times the sample volume.
    pub fn quadrature(&self) -> Result<Complex64> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("quadrature over an empty grid".into()));
        }
        let vol = self.grid.sample_volume();
        let mut total = Complex64::new(0.0, 0.0);
        for j in self.grid.cell_indices() {
            total += self.cell_sum(&j) * vol;
        }
        Ok(total)
    }

    fn cell_sum(&self, j: &[i64]) -> Complex64 {
        let mut re = Kahan::new();
        let mut im = Kahan::new();
        for f in self.cell_flat_indices(j) {
            re.add(self.values[f].re);
            im.add(self.values[f].im);
        }
        Complex64::new(re.value(), im.value())
    }

    /// Flat indices of the samples inside cell `j`, in axis-major order.
    pub fn cell_flat_indices(&self, j: &[i64]) -> Vec<usize> {
        let g = &self.grid;
        let m = &g.m;
        let per_cell: usize = m.iter().product();
        let base: Vec<usize> = j
            .iter()
            .zip(&g.ranges)
            .zip(m)
            .map(|((&jk, &(a, _)), &mk)| (jk - a) as usize * mk)
            .collect();
        let mut out = Vec::with_capacity(per_cell);
        let mut local = vec![0usize; m.len()];
        let mut idx = vec![0usize; m.len()];
        for _ in 0..per_cell {
            for k in 0..m.len() {
                idx[k] = base[k] + local[k];
            }
            out.push(g.flat_index(&idx));
            for k in 0..m.len() {
                local[k] += 1;
                if local[k] < m[k] {
                    break;
                }
                local[k] = 0;
            }
        }
        out
    }

    /// Exact sub-array over the cell `j + κ(E)`.
    pub fn restrict(&self, j: &[i64]) -> Result<SampledField> {
        let grid = self.grid.cell(j)?;
        let values = self.cell_flat_indices(j).into_iter().map(|f| self.values[f]).collect();
        Ok(SampledField { grid, values, codomain: self.codomain })
    }

    /// Pointwise product with `ω` evaluated at the sample locations.
    pub fn weigh(&self, w: &Weight) -> Result<SampledField> {
        if w.dim() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "weight of dimension {} applied to a {}-dimensional field",
                w.dim(),
                self.dim()
            )));
        }
        if w.is_constant() {
            return Ok(self.clone());
        }
        let mut values = Vec::with_capacity(self.values.len());
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.point_of(&self.grid.multi_index(i));
            let wv = w.eval(&x)?;
            let p = v * wv;
            if !(p.re.is_finite() && p.im.is_finite()) {
                return Err(Error::Range(format!("weighted value overflows at {x:?}")));
            }
            values.push(p);
        }
        Ok(SampledField { grid: self.grid.clone(), values, codomain: self.codomain })
    }

    /// CSV with one row per sample: physical coordinates, real and imaginary part.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        let head: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        writeln!(out, "{},re,im", head.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point_of(&self.grid.multi_index(i));
            let mut row: Vec<String> = p.iter().map(|c| format!("{c:.12e}")).collect();
            row.push(format!("{:.12e}", v.re));
            row.push(format!("{:.12e}", v.im));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Binary layout: `u64` little-endian header length, a JSON header with the
    /// grid, then little-endian `f64` (re, im) pairs.
    pub fn write_binary<W: Write>(
        &self,
        mut out: W,
        metadata: serde_json::Map<String, serde_json::Value>,
    ) -> Result<()> {
        let header = BinaryHeader { grid: self.grid.clone(), codomain: self.codomain, metadata };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Io(e.to_string()))?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        for v in &self.values {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`SampledField::write_binary`]; also returns the metadata.
    pub fn read_binary<R: Read>(
        mut input: R,
    ) -> Result<(SampledField, serde_json::Map<String, serde_json::Value>)> {
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        input.read_exact(&mut json)?;
        let header: BinaryHeader =
            serde_json::from_slice(&json).map_err(|e| Error::Io(format!("bad header: {e}")))?;
        let n = header.grid.len();
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 16];
        for _ in 0..n {
            input.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
            values.push(Complex64::new(re, im));
        }
        Ok((SampledField::new(header.grid, values, header.codomain)?, header.metadata))
    }
}

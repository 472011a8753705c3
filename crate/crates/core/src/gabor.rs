//! Gabor systems on the periodic discrete model `Z_L`: analysis, synthesis,
//! frame operator, canonical dual window and the window-change domination
//! `|V_{φ_0}f| ≤ a ∗ |V_φf|` with `a(k) = |V_ψφ_0(−k)|`.
//!
//! Time-frequency shifts are `π(x, ω)h(n) = e^{2πiωn/L} h(n − x)` and
//! `V_gf(x, ω) = ⟨f, π(x, ω)g⟩`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::par_map;
use crate::weight::Weight;
use crate::window::Window;

/// A system counts as a frame when `A > FRAME_TOL · B`.
pub const FRAME_TOL: f64 = 1e-8;
/// Relative residual at which the dual-window iteration stops.
pub const DUAL_TOL: f64 = 1e-10;
/// Coefficients `a(k)` below this fraction of their maximum are dropped.
pub const COEFF_CUTOFF: f64 = 1e-12;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// Sample spacing `√(2π/L)` that gives time and frequency the same step.
pub fn sample_step(len: usize) -> f64 {
    (2.0 * PI / len as f64).sqrt()
}

/// Centred representative of `n mod L` in `[-L/2, L/2)`.
pub fn centred(n: usize, len: usize) -> i64 {
    let n = (n % len) as i64;
    if n >= (len as i64 + 1) / 2 {
        n - len as i64
    } else {
        n
    }
}

/// Samples an analytic 1-d window at `n·√(2π/L)` (centred indices) and
/// normalizes it in `ℓ²`.
pub fn sample_window(window: &Window, len: usize) -> Result<Vec<Complex64>> {
    if window.dim() != 1 || !window.is_analytic() {
        return Err(Error::InvalidArgument("only analytic one-dimensional windows can be sampled".into()));
    }
    let h = sample_step(len);
    let mut g = (0..len)
        .map(|n| window.eval(&[centred(n, len) as f64 * h]))
        .collect::<Result<Vec<_>>>()?;
    let s = norm2(&g);
    if s == 0.0 {
        return Err(Error::InvalidArgument("window vanishes on the sample grid".into()));
    }
    g.iter_mut().for_each(|v| *v /= s);
    Ok(g)
}

/// `π(x, ω)h`.
pub fn tf_shift(h: &[Complex64], x: usize, omega: usize) -> Vec<Complex64> {
    let len = h.len();
    (0..len)
        .map(|n| {
            let phase = 2.0 * PI * ((omega * n) % len) as f64 / len as f64;
            h[(n + len - x % len) % len] * Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// `V_gf(x, ω)` on all of `Z_L × Z_L`, stored at `x + L·ω`.
pub fn discrete_stft(f: &[Complex64], g: &[Complex64]) -> Result<Vec<Complex64>> {
    let len = f.len();
    if g.len() != len || len == 0 {
        return Err(Error::InvalidArgument(format!(
            "signal and window lengths differ ({} vs {})",
            len,
            g.len()
        )));
    }
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut out = vec![zero(); len * len];
    let mut buf = vec![zero(); len];
    for x in 0..len {
        for (n, b) in buf.iter_mut().enumerate() {
            *b = f[n] * g[(n + len - x) % len].conj();
        }
        fft.process(&mut buf);
        for (omega, v) in buf.iter().enumerate() {
            out[x + len * omega] = *v;
        }
    }
    Ok(out)
}

/// Coefficients on the lattice `aZ_L × bZ_L`, stored at `k + K·l` with
/// `K = L/a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientArray {
    pub time_steps: usize,
    pub freq_steps: usize,
    pub values: Vec<Complex64>,
}

impl CoefficientArray {
    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.values[k + self.time_steps * l]
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Atoms `π(ka, lb)g` for `0 ≤ k < L/a`, `0 ≤ l < L/b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaborSystem {
    pub window: Vec<Complex64>,
    pub a: usize,
    pub b: usize,
}

/// Extreme frame bounds and conditioning of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    #[serde(rename = "A")]
    pub lower: f64,
    #[serde(rename = "B")]
    pub upper: f64,
    pub condition: f64,
    pub is_frame: bool,
    /// Smallest `n` dividing `a` and `b` for which `(a/n, b/n)` is a frame.
    pub n_min: Option<usize>,
}

impl GaborSystem {
    pub fn new(window: Vec<Complex64>, a: usize, b: usize) -> Result<Self> {
        let len = window.len();
        if len == 0 || a == 0 || b == 0 || !len.is_multiple_of(a) || !len.is_multiple_of(b) {
            return Err(Error::InvalidArgument(format!(
                "lattice steps a = {a}, b = {b} must divide the length {len}"
            )));
        }
        Ok(GaborSystem { window, a, b })
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn time_steps(&self) -> usize {
        self.len() / self.a
    }

    pub fn freq_steps(&self) -> usize {
        self.len() / self.b
    }

    /// Atoms per sample, `L/(ab)`.
    pub fn redundancy(&self) -> f64 {
        self.len() as f64 / (self.a * self.b) as f64
    }

    /// Same lattice, another window.
    pub fn with_window(&self, window: Vec<Complex64>) -> Result<Self> {
        GaborSystem::new(window, self.a, self.b)
    }

    /// `(a/n, b/n)`.
    pub fn refined(&self, n: usize) -> Result<Self> {
        if n == 0 || !self.a.is_multiple_of(n) || !self.b.is_multiple_of(n) {
            return Err(Error::InvalidArgument(format!(
                "refinement {n} does not divide a = {} and b = {}",
                self.a, self.b
            )));
        }
        GaborSystem::new(self.window.clone(), self.a / n, self.b / n)
    }

    pub fn atom(&self, k: usize, l: usize) -> Vec<Complex64> {
        tf_shift(&self.window, k * self.a, l * self.b)
    }

    fn check_len(&self, f: &[Complex64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "signal length {} does not match the system length {}",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// `⟨f, π(ka, lb)g⟩`.
    pub fn analysis(&self, f: &[Complex64]) -> Result<CoefficientArray> {
        self.check_len(f)?;
        let len = self.len();
        let (nk, nl) = (self.time_steps(), self.freq_steps());
        let fft = FftPlanner::new().plan_fft_forward(len);
        let mut values = vec![zero(); nk * nl];
        let mut buf = vec![zero(); len];
        for k in 0..nk {
            let x = k * self.a;
            for (n, v) in buf.iter_mut().enumerate() {
                *v = f[n] * self.window[(n + len - x) % len].conj();
            }
            fft.process(&mut buf);
            for l in 0..nl {
                values[k + nk * l] = buf[l * self.b];
            }
        }
        Ok(CoefficientArray { time_steps: nk, freq_steps: nl, values })
    }

    /// `Σ c(k, l) π(ka, lb)g`.
    pub fn synthesis(&self, c: &CoefficientArray) -> Result<Vec<Complex64>> {
        let len = self.len();
        let (nk, nl) = (self.time_steps(), self.freq_steps());
        if c.time_steps != nk || c.freq_steps != nl {
            return Err(Error::InvalidArgument("coefficient array does not match the lattice".into()));
        }
        let fft = FftPlanner::new().plan_fft_inverse(len);
        let mut out = vec![zero(); len];
        let mut buf = vec![zero(); len];
        for k in 0..nk {
            buf.iter_mut().for_each(|v| *v = zero());
            for l in 0..nl {
                buf[l * self.b] = c.get(k, l);
            }
            fft.process(&mut buf);
            let x = k * self.a;
            for (n, o) in out.iter_mut().enumerate() {
                *o += buf[n] * self.window[(n + len - x) % len];
            }
        }
        Ok(out)
    }

    /// `S = Σ_λ π(λ)g ⊗ conj(π(λ)g)` as a dense `L × L` matrix, assembled
    /// over time shifts on up to `threads` workers.
    pub fn frame_operator_with(&self, threads: usize) -> DMatrix<Complex64> {
        let len = self.len();
        let ks: Vec<usize> = (0..self.time_steps()).collect();
        let parts = par_map(&ks, threads, |&k| {
            let mut s = DMatrix::<Complex64>::zeros(len, len);
            for l in 0..self.freq_steps() {
                let h = self.atom(k, l);
                for j in 0..len {
                    let hj = h[j].conj();
                    for i in 0..len {
                        s[(i, j)] += h[i] * hj;
                    }
                }
            }
            s
        });
        parts.into_iter().fold(DMatrix::zeros(len, len), |acc, s| acc + s)
    }

    pub fn frame_operator(&self) -> DMatrix<Complex64> {
        self.frame_operator_with(1)
    }

    fn bounds(&self) -> (f64, f64) {
        let ev = self.frame_operator().symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    /// Frame bounds from the extreme eigenvalues of `S`.
    pub fn frame_report(&self) -> FrameReport {
        let (lower, upper) = self.bounds();
        let is_frame = upper > 0.0 && lower > FRAME_TOL * upper;
        let n_min = (1..=self.a.min(self.b))
            .filter(|n| self.a.is_multiple_of(*n) && self.b.is_multiple_of(*n))
            .find(|&n| {
                if n == 1 {
                    return is_frame;
                }
                self.refined(n).map(|g| {
                    let (lo, hi) = g.bounds();
                    hi > 0.0 && lo > FRAME_TOL * hi
                })
                .unwrap_or(false)
            });
        FrameReport { lower, upper, condition: upper / lower.max(0.0), is_frame, n_min }
    }

    /// `ψ = S^{-1}g` by Jacobi-preconditioned conjugate gradients, returned
    /// as the system with window `ψ` on the same lattice.
    pub fn canonical_dual(&self) -> Result<GaborSystem> {
        let report = self.frame_report();
        if !report.is_frame {
            return Err(Error::NotAFrame { min_eigenvalue: report.lower, max_eigenvalue: report.upper });
        }
        let s = self.frame_operator();
        let psi = conjugate_gradient(&s, &self.window, DUAL_TOL, 10 * self.len())?;
        self.with_window(psi)
    }

    /// `Σ ⟨f, π(λ)g⟩ π(λ)ψ` for the dual system `psi`.
    pub fn reconstruct(&self, dual: &GaborSystem, f: &[Complex64]) -> Result<Vec<Complex64>> {
        dual.synthesis(&self.analysis(f)?)
    }
}

/// Solves `S x = rhs` for Hermitian positive definite `S`.
pub fn conjugate_gradient(
    s: &DMatrix<Complex64>,
    rhs: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Complex64>> {
    let n = rhs.len();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        (0..n).map(|i| (0..n).map(|j| s[(i, j)] * v[j]).sum()).collect()
    };
    let diag: Vec<f64> = (0..n).map(|i| s[(i, i)].re).collect();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("operator has a non-positive diagonal entry".into()));
    }
    let bnorm = norm2(rhs);
    let mut x = vec![zero(); n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<Complex64> = r.iter().zip(&diag).map(|(v, d)| v / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&z, &r).re;
    let mut residual = 1.0;
    for it in 0..max_iter {
        let sp = apply(&p);
        let alpha = rz / dot(&p, &sp).re;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= sp[i] * alpha;
        }
        residual = norm2(&r) / bnorm;
        if residual <= tol {
            return Ok(x);
        }
        z = r.iter().zip(&diag).map(|(v, d)| v / d).collect();
        let rz_next = dot(&z, &r).re;
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::NoConvergence { residual, iterations: max_iter })
}

/// Outcome of a window-change domination test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// `max_z (|V_{φ_0}f(z)| − (a ∗ |V_φf|)(z))`.
    pub defect: f64,
    /// `max_z |V_{φ_0}f(z)|`.
    pub lhs_max: f64,
    /// Lattice coefficients kept after truncation.
    pub terms: usize,
}

/// `a(k) = |V_ψφ_0(−k)|` on the lattice of `system`, truncated below
/// [`COEFF_CUTOFF`] of its maximum. Entries are `((x, ω), a)` in sample units.
fn domination_coefficients(dual: &GaborSystem, phi0: &[Complex64]) -> Result<Vec<((usize, usize), f64)>> {
    let len = dual.len();
    let v = discrete_stft(phi0, &dual.window)?;
    let mut coeffs = Vec::new();
    for k in 0..dual.time_steps() {
        for l in 0..dual.freq_steps() {
            let (x, w) = (k * dual.a, l * dual.b);
            let a = v[(len - x) % len + len * ((len - w) % len)].norm();
            coeffs.push(((x, w), a));
        }
    }
    let top = coeffs.iter().map(|c| c.1).fold(0.0, f64::max);
    coeffs.retain(|c| c.1 > COEFF_CUTOFF * top);
    Ok(coeffs)
}

fn convolve(coeffs: &[((usize, usize), f64)], field: &[f64], len: usize, z: (usize, usize)) -> f64 {
    coeffs
        .iter()
        .map(|&((x, w), a)| a * field[(z.0 + len - x) % len + len * ((z.1 + len - w) % len)])
        .sum()
}

/// Compares `|V_{φ_0}f|` with `a ∗_{[Λ]} |V_φf|` on all of `Z_L × Z_L`,
/// where `φ` is the window of `system` and `ψ` its canonical dual.
pub fn window_change_domination(
    f: &[Complex64],
    system: &GaborSystem,
    phi0: &[Complex64],
) -> Result<DominationReport> {
    system.check_len(f)?;
    system.check_len(phi0)?;
    let len = system.len();
    let dual = system.canonical_dual()?;
    let coeffs = domination_coefficients(&dual, phi0)?;
    let lhs: Vec<f64> = discrete_stft(f, phi0)?.iter().map(|v| v.norm()).collect();
    let field: Vec<f64> = discrete_stft(f, &system.window)?.iter().map(|v| v.norm()).collect();
    let mut defect = f64::NEG_INFINITY;
    for w in 0..len {
        for x in 0..len {
            let rhs = convolve(&coeffs, &field, len, (x, w));
            defect = defect.max(lhs[x + len * w] - rhs);
        }
    }
    let lhs_max = lhs.iter().copied().fold(0.0, f64::max);
    Ok(DominationReport { defect, lhs_max, terms: coeffs.len() })
}

/// Weighted form `ω|V_{φ_0}f| ≤ C (a·v) ∗ (ω|V_φf|)`: returns the smallest
/// `C` that makes it hold at every node where `|V_{φ_0}f|` exceeds `1e-10`
/// of its maximum. Phase-space points are `√(2π/L)` times centred indices;
/// the shifted point `z − k` is not wrapped when the weights are evaluated.
pub fn weighted_domination_constant(
    f: &[Complex64],
    system: &GaborSystem,
    phi0: &[Complex64],
    omega: &Weight,
    v: &Weight,
) -> Result<f64> {
    if omega.dim() != 2 || v.dim() != 2 {
        return Err(Error::InvalidArgument("weights must live on the two-dimensional phase space".into()));
    }
    system.check_len(f)?;
    system.check_len(phi0)?;
    let len = system.len();
    let h = sample_step(len);
    let dual = system.canonical_dual()?;
    let coeffs = domination_coefficients(&dual, phi0)?;
    let lhs: Vec<f64> = discrete_stft(f, phi0)?.iter().map(|v| v.norm()).collect();
    let field: Vec<f64> = discrete_stft(f, &system.window)?.iter().map(|v| v.norm()).collect();
    let top = lhs.iter().copied().fold(0.0, f64::max);
    let point = |x: i64, w: i64| [x as f64 * h, w as f64 * h];
    let kv = coeffs
        .iter()
        .map(|&((x, w), a)| {
            let (cx, cw) = (centred(x, len), centred(w, len));
            Ok(((x, w), (cx, cw), a * v.eval(&point(cx, cw))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut constant: f64 = 0.0;
    for w in 0..len {
        for x in 0..len {
            let l = lhs[x + len * w];
            if l <= 1e-10 * top {
                continue;
            }
            let (zx, zw) = (centred(x, len), centred(w, len));
            let mut rhs = 0.0;
            for &((kx, kw), (cx, cw), av) in &kv {
                let fv = field[(x + len - kx) % len + len * ((w + len - kw) % len)];
                if fv > 0.0 {
                    rhs += av * omega.eval(&point(zx - cx, zw - cw))? * fv;
                }
            }
            constant = constant.max(omega.eval(&point(zx, zw))? * l / rhs);
        }
    }
    Ok(constant)
}

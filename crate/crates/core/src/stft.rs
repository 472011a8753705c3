//! Short-time Fourier transforms
//! `V_φf(x,ξ) = (2π)^{-d/2} ∫ f(t) conj(φ(t−x)) e^{-i⟨t,ξ⟩} dt`
//! on phase-space grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde_json::json;

use crate::error::{Error, Result};
use crate::field::{Codomain, GridSpec, SampledField};
use crate::lattice::OrderedBasis;
use crate::periodic::TrigPolynomial;
use crate::window::Window;

pub const CONVENTION: &str = "unitary-angular";

/// Minimum number of samples per window width.
pub const MIN_SAMPLES_PER_WIDTH: f64 = 4.0;

/// An STFT sampled on a phase-space grid whose first `d` axes are `x` and
/// last `d` axes are `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StftField {
    pub field: SampledField,
    pub window: Window,
    pub source: String,
    /// Period basis of the source when it is periodic in `x`.
    pub x_period: Option<OrderedBasis>,
}

impl StftField {
    pub fn dim(&self) -> usize {
        self.field.dim() / 2
    }

    /// Keys recorded next to exported samples.
    pub fn metadata(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut m = serde_json::Map::new();
        m.insert("window".into(), json!(self.window.describe()));
        m.insert("convention".into(), json!(CONVENTION));
        m.insert("source".into(), json!(self.source));
        m.insert("window_admissible".into(), json!(self.window.admissibility_certified()));
        m
    }

    pub fn scale(&self, c: Complex64) -> StftField {
        StftField { field: self.field.scale(c), ..self.clone() }
    }
}

/// Splits a phase-space grid into its `x` and `ξ` grids.
pub fn split_phase_grid(grid: &GridSpec) -> Result<(GridSpec, GridSpec)> {
    let dd = grid.dim();
    if !dd.is_multiple_of(2) || grid.basis.split_product().is_none() {
        return Err(Error::InvalidArgument(
            "phase-space grid must use a block basis E1 × E2 of even dimension".into(),
        ));
    }
    let d = dd / 2;
    Ok((grid.project(0..d)?, grid.project(d..dd)?))
}

fn max_step(grid: &GridSpec) -> f64 {
    grid.basis
        .columns()
        .iter()
        .zip(&grid.m)
        .map(|(c, &m)| c.iter().map(|v| v * v).sum::<f64>().sqrt() / m as f64)
        .fold(0.0, f64::max)
}

enum WindowSampler<'a> {
    Analytic { w: &'a Window, radius: f64 },
    Grid(&'a SampledField),
}

impl WindowSampler<'_> {
    /// `conj(φ(s))`, or `None` when `φ(s)` is negligible.
    fn conj_at(&self, s: &[f64]) -> Result<Option<Complex64>> {
        match self {
            WindowSampler::Analytic { w, radius } => {
                let r2: f64 = s.iter().map(|v| v * v).sum();
                if r2 > radius * radius {
                    Ok(None)
                } else {
                    Ok(Some(w.eval(s)?.conj()))
                }
            }
            WindowSampler::Grid(g) => {
                let c = g.grid.basis.to_coords(s);
                if !g.grid.is_on_lattice(&c, 1e-6) {
                    return Err(Error::Resolution(
                        "window samples are not commensurate with the signal grid".into(),
                    ));
                }
                Ok(g.grid.locate_coords(&c, 1e-6).map(|idx| g.values[g.grid.flat_index(&idx)].conj()))
            }
        }
    }
}

/// Direct quadrature of `V_φf` at every node of `grid`.
pub fn stft(f: &SampledField, window: &Window, grid: &GridSpec) -> Result<StftField> {
    window.validate()?;
    let d = f.dim();
    if window.dim() != d || grid.dim() != 2 * d {
        return Err(Error::InvalidArgument(format!(
            "signal of dimension {d}, window of dimension {}, phase grid of dimension {}",
            window.dim(),
            grid.dim()
        )));
    }
    let (xg, xig) = split_phase_grid(grid)?;
    let step = max_step(&f.grid);
    let sampler = match window {
        Window::Sampled(g) => {
            if g.grid.m.iter().zip(&f.grid.m).any(|(a, b)| a != b) {
                return Err(Error::Resolution("sampled window and signal use different densities".into()));
            }
            WindowSampler::Grid(g)
        }
        w => {
            let sigma = w.width().expect("analytic window");
            if sigma < MIN_SAMPLES_PER_WIDTH * step {
                return Err(Error::Resolution(format!(
                    "window width {sigma} is resolved by fewer than {MIN_SAMPLES_PER_WIDTH} samples (step {step})"
                )));
            }
            WindowSampler::Analytic { w, radius: w.support_radius().expect("analytic window") }
        }
    };

    let ts: Vec<Vec<f64>> = f.grid.points();
    let support: Vec<usize> = (0..ts.len()).filter(|&i| f.values[i] != Complex64::new(0.0, 0.0)).collect();
    let xs = xg.points();
    let xis = xig.points();
    let scale = f.grid.sample_volume() * (2.0 * PI).powf(-(d as f64) / 2.0);

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    // e^{-i⟨t,ξ⟩} table when it fits in memory
    let table: Option<Vec<Complex64>> = if support.len() * xis.len() <= 1 << 22 {
        let mut t = Vec::with_capacity(support.len() * xis.len());
        for xi in &xis {
            for &i in &support {
                t.push(Complex64::from_polar(1.0, -dot(&ts[i], xi)));
            }
        }
        Some(t)
    } else {
        None
    };

    let nx = xs.len();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut local: Vec<(usize, Complex64)> = Vec::new();
    let mut s = vec![0.0; d];
    for (ix, x) in xs.iter().enumerate() {
        local.clear();
        for (pos, &i) in support.iter().enumerate() {
            for k in 0..d {
                s[k] = ts[i][k] - x[k];
            }
            if let Some(c) = sampler.conj_at(&s)? {
                local.push((pos, f.values[i] * c));
            }
        }
        if local.is_empty() {
            continue;
        }
        for (ixi, xi) in xis.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            match &table {
                Some(t) => {
                    let row = &t[ixi * support.len()..(ixi + 1) * support.len()];
                    for &(pos, g) in &local {
                        acc += g * row[pos];
                    }
                }
                None => {
                    for &(pos, g) in &local {
                        acc += g * Complex64::from_polar(1.0, -dot(&ts[support[pos]], xi));
                    }
                }
            }
            values[ix + nx * ixi] = acc * scale;
        }
    }
    Ok(StftField {
        field: SampledField::new(grid.clone(), values, Codomain::PhaseSpace)?,
        window: window.clone(),
        source: "sampled".into(),
        x_period: None,
    })
}

/// Direct quadrature of `V_φf` at arbitrary phase-space points `(x, ξ)`.
pub fn stft_at(f: &SampledField, window: &Window, points: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    window.validate()?;
    let d = f.dim();
    if window.dim() != d || points.iter().any(|p| p.len() != 2 * d) {
        return Err(Error::InvalidArgument(format!("points must have {} coordinates", 2 * d)));
    }
    let sampler = match window {
        Window::Sampled(g) => WindowSampler::Grid(g),
        w => WindowSampler::Analytic { w, radius: w.support_radius().expect("analytic window") },
    };
    let ts = f.grid.points();
    let scale = f.grid.sample_volume() * (2.0 * PI).powf(-(d as f64) / 2.0);
    let mut s = vec![0.0; d];
    points
        .iter()
        .map(|p| {
            let (x, xi) = p.split_at(d);
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, v) in ts.iter().zip(&f.values) {
                for k in 0..d {
                    s[k] = t[k] - x[k];
                }
                if let Some(c) = sampler.conj_at(&s)? {
                    let ph: f64 = t.iter().zip(xi).map(|(a, b)| a * b).sum();
                    acc += v * c * Complex64::from_polar(1.0, -ph);
                }
            }
            Ok(acc * scale)
        })
        .collect()
}

/// Closed form `V_φf(x,ξ) = Σ_α c(f,α) e^{-i⟨x,ξ−α⟩} conj(φ̂(α−ξ))` for
/// analytic windows. Sampled windows fall back to [`stft`] on a synthesized
/// copy of `f` laid out on the window's grid.
pub fn stft_trigpoly(f: &TrigPolynomial, window: &Window, grid: &GridSpec) -> Result<StftField> {
    window.validate()?;
    let d = f.dim();
    if window.dim() != d || grid.dim() != 2 * d {
        return Err(Error::InvalidArgument("dimension mismatch between polynomial, window and grid".into()));
    }
    let (xg, xig) = split_phase_grid(grid)?;
    if let Window::Sampled(wf) = window {
        let xs = xg.points();
        let reach = |k: usize, hi: bool| -> f64 {
            let vals = xs.iter().map(|p| p[k]);
            if hi { vals.fold(f64::NEG_INFINITY, f64::max) } else { vals.fold(f64::INFINITY, f64::min) }
        };
        let wpts = wf.grid.points();
        let mut ranges = Vec::with_capacity(d);
        for k in 0..d {
            let lo = reach(k, false) + wpts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = reach(k, true) + wpts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            let a = wf.grid.basis.to_coords(&{
                let mut v = vec![0.0; d];
                v[k] = lo;
                v
            })[k]
                .floor() as i64
                - 1;
            let b = wf.grid.basis.to_coords(&{
                let mut v = vec![0.0; d];
                v[k] = hi;
                v
            })[k]
                .ceil() as i64
                + 1;
            ranges.push((a.min(b), a.max(b)));
        }
        let tg = GridSpec::new(wf.grid.basis.clone(), wf.grid.m.clone(), ranges)?;
        let sampled = f.synthesize(tg)?;
        let mut out = stft(&sampled, window, grid)?;
        out.source = "trig-polynomial (synthesized)".into();
        out.x_period = Some(f.period().clone());
        return Ok(out);
    }
    let xs = xg.points();
    let xis = xig.points();
    let terms = f.terms();
    let nx = xs.len();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut om = vec![0.0; d];
    for (ixi, xi) in xis.iter().enumerate() {
        // Φ(ξ−α) does not depend on x
        let factors: Vec<(usize, Complex64)> = terms
            .iter()
            .enumerate()
            .filter_map(|(n, (a, c))| {
                for k in 0..d {
                    om[k] = a[k] - xi[k];
                }
                let h = window.hat(&om).expect("analytic window").conj();
                if h == Complex64::new(0.0, 0.0) {
                    None
                } else {
                    Some((n, c * h))
                }
            })
            .collect();
        for (ix, x) in xs.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(n, ch) in &factors {
                let a = &terms[n].0;
                let ph: f64 = (0..d).map(|k| x[k] * (xi[k] - a[k])).sum();
                acc += ch * Complex64::from_polar(1.0, -ph);
            }
            values[ix + nx * ixi] = acc;
        }
    }
    Ok(StftField {
        field: SampledField::new(grid.clone(), values, Codomain::PhaseSpace)?,
        window: window.clone(),
        source: "trig-polynomial".into(),
        x_period: Some(f.period().clone()),
    })
}

/// `max_X |F(X)| / ‖F‖_{L^p(B_r(X))}` over the nodes whose ball lies inside
/// the grid. Balls are Euclidean in physical phase-space coordinates.
pub fn subharmonic_check(f: &StftField, p: f64, r: f64) -> Result<f64> {
    if !f.window.is_gaussian() {
        return Err(Error::InvalidArgument("subharmonic check requires a Gaussian window".into()));
    }
    if !(p > 0.0) || !(r > 0.0) {
        return Err(Error::InvalidArgument("exponent and radius must be positive".into()));
    }
    let g = &f.field.grid;
    let step = max_step(g);
    if r < 8.0 * step {
        return Err(Error::Resolution(format!(
            "ball radius {r} is resolved by fewer than 8 samples (step {step})"
        )));
    }
    let dd = g.dim();
    // sample lattice generator S = T_E diag(1/m)
    let mut s = g.basis.matrix().clone();
    for k in 0..dd {
        let mk = g.m[k] as f64;
        for i in 0..dd {
            s[(i, k)] /= mk;
        }
    }
    let s_inv = s.clone().try_inverse().ok_or(Error::Singular { det: 0.0, threshold: 0.0 })?;
    let bounds: Vec<i64> = (0..dd)
        .map(|k| {
            let row: f64 = (0..dd).map(|i| s_inv[(k, i)].powi(2)).sum::<f64>().sqrt();
            (row * r).ceil() as i64
        })
        .collect();
    let mut offsets: Vec<Vec<i64>> = vec![vec![]];
    for &b in &bounds {
        offsets = offsets
            .into_iter()
            .flat_map(|o| (-b..=b).map(move |v| {
                let mut o2 = o.clone();
                o2.push(v);
                o2
            }))
            .collect();
    }
    offsets.retain(|o| {
        let mut v = 0.0;
        for i in 0..dd {
            let comp: f64 = (0..dd).map(|k| s[(i, k)] * o[k] as f64).sum();
            v += comp * comp;
        }
        v <= r * r * (1.0 + 1e-12)
    });
    let shape = g.shape();
    let vol = g.sample_volume();
    let mags = f.field.magnitudes();
    let mut best = 0.0_f64;
    let mut any = false;
    'nodes: for flat in 0..mags.len() {
        let idx = g.multi_index(flat);
        for k in 0..dd {
            let i = idx[k] as i64;
            if i - bounds[k] < 0 || i + bounds[k] >= shape[k] as i64 {
                continue 'nodes;
            }
        }
        any = true;
        let center = mags[flat];
        if center == 0.0 {
            continue;
        }
        let mut nb = vec![0usize; dd];
        let vals = offsets.iter().map(|o| {
            for k in 0..dd {
                nb[k] = (idx[k] as i64 + o[k]) as usize;
            }
            mags[g.flat_index(&nb)]
        });
        let vals: Vec<f64> = vals.collect();
        let norm = if p.is_infinite() {
            vals.iter().copied().fold(0.0, f64::max)
        } else {
            crate::mixed::lq_norm(vals.iter().copied(), p, vol)
        };
        if norm > 0.0 {
            best = best.max(center / norm);
        }
    }
    if !any {
        return Err(Error::Resolution("no grid node has its whole ball inside the grid".into()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_signal(m: usize) -> SampledField {
        let w = Window::gaussian(1, 1.0);
        let g = GridSpec::uniform(OrderedBasis::standard(1), m, -20, 19).unwrap();
        SampledField::from_fn(g, Codomain::Function, |t| w.eval(t).unwrap()).unwrap()
    }

    fn closed_form(x: f64, xi: f64) -> Complex64 {
        Complex64::from_polar((2.0 * PI).powf(-0.5) * (-(x * x + xi * xi) / 4.0).exp(), -x * xi / 2.0)
    }

    #[test]
    fn gaussian_pair_closed_form() {
        let f = gaussian_signal(16);
        let grid = GridSpec::new(OrderedBasis::standard(2), vec![2, 2], vec![(-3, 2), (-3, 2)]).unwrap();
        let v = stft(&f, &Window::gaussian(1, 1.0), &grid).unwrap();
        for (i, val) in v.field.values.iter().enumerate() {
            let p = grid.point_of(&grid.multi_index(i));
            assert!((val - closed_form(p[0], p[1])).norm() < 1e-12, "{p:?}");
        }
        // direct quadrature at the nodes (0,0) and (2,0)
        let at = |x: f64, xi: f64| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, fv) in f.values.iter().enumerate() {
                let t = f.grid.point_of(&f.grid.multi_index(i))[0];
                acc += fv * Window::gaussian(1, 1.0).eval(&[t - x]).unwrap() * Complex64::from_polar(1.0, -t * xi);
            }
            acc * f.grid.sample_volume() / (2.0 * PI).sqrt()
        };
        assert!((at(0.0, 0.0).norm() - 0.398942280401).abs() < 1e-9);
        assert!((at(2.0, 0.0).norm() - 0.146762663174).abs() < 1e-9);
    }

    #[test]
    fn pointwise_matches_closed_form() {
        let f = gaussian_signal(16);
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![-1.0, 1.5]];
        let v = stft_at(&f, &Window::gaussian(1, 1.0), &pts).unwrap();
        for (p, z) in pts.iter().zip(&v) {
            assert!((z - closed_form(p[0], p[1])).norm() < 1e-12, "{p:?}");
        }
        assert!((v[0].norm() - 0.398942280401).abs() < 1e-9);
    }

    #[test]
    fn zero_signal_gives_zero() {
        let f = SampledField::zeros(gaussian_signal(8).grid, Codomain::Function);
        let grid = GridSpec::uniform(OrderedBasis::standard(2), 2, -2, 1).unwrap();
        let v = stft(&f, &Window::gaussian(1, 1.0), &grid).unwrap();
        assert!(v.field.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn under_resolved_window_rejected() {
        let f = gaussian_signal(2);
        let grid = GridSpec::uniform(OrderedBasis::standard(2), 1, -1, 0).unwrap();
        assert!(matches!(stft(&f, &Window::gaussian(1, 1.0), &grid), Err(Error::Resolution(_))));
    }

    #[test]
    fn trigpoly_fast_path_closed_forms() {
        let w = Window::gaussian(1, 1.0);
        let per = TrigPolynomial::two_pi_periodic(1).period().clone();
        let grid = GridSpec::new(OrderedBasis::standard(2), vec![3, 3], vec![(-3, 2), (-3, 3)]).unwrap();
        for (nu, shift) in [(1i64, 1.0), (0, 0.0)] {
            let f = TrigPolynomial::from_terms(per.clone(), &[(vec![nu], Complex64::new(1.0, 0.0))]);
            let v = stft_trigpoly(&f, &w, &grid).unwrap();
            for (i, val) in v.field.values.iter().enumerate() {
                let xi = grid.point_of(&grid.multi_index(i))[1];
                let expect = PI.powf(-0.25) * (-(xi - shift) * (xi - shift) / 2.0).exp();
                assert!((val.norm() - expect).abs() < 1e-14);
            }
        }
        let zero = TrigPolynomial::new(per);
        let v = stft_trigpoly(&zero, &w, &grid).unwrap();
        assert!(v.field.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn trigpoly_agrees_with_quadrature() {
        let per = TrigPolynomial::two_pi_periodic(1).period().clone();
        let p = TrigPolynomial::from_terms(
            per,
            &[(vec![0], Complex64::new(0.3, 0.1)), (vec![2], Complex64::new(-0.5, 0.2)), (vec![-1], Complex64::new(0.0, 1.0))],
        );
        let w = Window::gaussian(1, 1.0);
        let grid = GridSpec::new(OrderedBasis::standard(2), vec![2, 2], vec![(-2, 1), (-4, 3)]).unwrap();
        let fast = stft_trigpoly(&p, &w, &grid).unwrap();
        // 64 samples per 2π
        let tg = GridSpec::uniform(OrderedBasis::standard(1).scaled(2.0 * PI).unwrap(), 64, -4, 3).unwrap();
        let slow = stft(&p.synthesize(tg).unwrap(), &w, &grid).unwrap();
        let peak = fast.field.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in fast.field.values.iter().zip(&slow.field.values) {
            assert!((a - b).norm() <= 1e-6 * peak);
        }
    }

    #[test]
    fn subharmonic_examples() {
        let w = Window::gaussian(1, 1.0);
        let build = |m: usize| {
            let grid = GridSpec::uniform(OrderedBasis::standard(2), m, -4, 3).unwrap();
            let f = SampledField::from_fn(grid.clone(), Codomain::PhaseSpace, |p| closed_form(p[0], p[1])).unwrap();
            StftField { field: f, window: w.clone(), source: "closed form".into(), x_period: None }
        };
        let coarse = subharmonic_check(&build(8), 2.0, 1.0).unwrap();
        let fine = subharmonic_check(&build(16), 2.0, 1.0).unwrap();
        assert!(coarse.is_finite() && coarse > 0.0);
        assert!((coarse / fine - 1.0).abs() < 0.05, "{coarse} {fine}");

        let scaled = build(8).scale(Complex64::new(10.0, 0.0));
        let c10 = subharmonic_check(&scaled, 2.0, 1.0).unwrap();
        assert!((c10 / coarse - 1.0).abs() < 1e-12);

        let sup = subharmonic_check(&build(8), f64::INFINITY, 1.0).unwrap();
        assert!(sup <= 1.0 && sup > 0.999);

        assert!(matches!(subharmonic_check(&build(4), 2.0, 1.0), Err(Error::Resolution(_))));
    }
}

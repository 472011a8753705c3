//! Semi-discrete convolution `(a ∗_{[E]} f)(x) = Σ_j a(j) f(x − T_E j)` and
//! randomized measurements of the Young-type estimate
//! `‖a ∗ f‖_{L^p_{(ω)}(I)} ≤ C ‖a‖_{ℓ^r_{(v)}} ‖f‖_{L^p_{(ω)}(I)}`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Codomain, GridSpec, SampledField};
use crate::lattice::OrderedBasis;
use crate::mixed::{discrete_mixed_norm, mixed_norm, ExponentVector, LatticeSequence, MixedNormSpec};
use crate::weight::Weight;
use crate::wiener::ratio;

/// How samples shifted past the edge of the grid are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Outside the grid the field is zero.
    Zero,
    /// The field repeats with the extent of the grid along the axis.
    Periodic,
}

/// `Σ_j a(j) f(· − T_E j)` on the grid of `f`, with `a` indexed by the
/// coordinates of `lattice`. Every shift must be a whole number of samples.
pub fn semidiscrete_convolution(
    a: &LatticeSequence,
    lattice: &OrderedBasis,
    f: &SampledField,
    boundary: &[Boundary],
) -> Result<SampledField> {
    let g = &f.grid;
    let d = g.dim();
    if a.dim != d || lattice.dim() != d || boundary.len() != d {
        return Err(Error::InvalidArgument(format!(
            "sequence, lattice and boundary modes must all have dimension {d}"
        )));
    }
    let shape = g.shape();
    let mut shifts = Vec::with_capacity(a.entries.len());
    for (j, &v) in &a.entries {
        let jf: Vec<f64> = j.iter().map(|&x| x as f64).collect();
        let c = g.basis.to_coords(&lattice.from_coords(&jf));
        let mut s = Vec::with_capacity(d);
        for k in 0..d {
            let samples = c[k] * g.m[k] as f64;
            if (samples - samples.round()).abs() > 1e-9 {
                return Err(Error::Resolution(format!(
                    "lattice point {j:?} is not a whole number of samples on axis {k} (shift {samples})"
                )));
            }
            s.push(samples.round() as i64);
        }
        shifts.push((s, v));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut src = vec![0usize; d];
    for (i, o) in out.iter_mut().enumerate() {
        let idx = g.multi_index(i);
        'shift: for (s, v) in &shifts {
            for k in 0..d {
                let n = shape[k] as i64;
                let t = idx[k] as i64 - s[k];
                src[k] = match boundary[k] {
                    Boundary::Periodic => t.rem_euclid(n) as usize,
                    Boundary::Zero if (0..n).contains(&t) => t as usize,
                    Boundary::Zero => continue 'shift,
                };
            }
            *o += v * f.values[g.flat_index(&src)];
        }
    }
    SampledField::new(g.clone(), out, f.codomain)
}

/// Exponents, weights and periodic axes of a Young-estimate measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungSetup {
    pub p: ExponentVector,
    pub r: ExponentVector,
    /// `ω` on the field side.
    pub omega: Weight,
    /// `v` on the sequence side.
    pub v: Weight,
    /// Axes along which `|f|` is periodic; there `I` is one cell.
    pub periodic: Vec<bool>,
}

impl YoungSetup {
    pub fn unweighted(p: ExponentVector, r: ExponentVector, periodic: Vec<bool>) -> Self {
        let d = p.len();
        YoungSetup { p, r, omega: Weight::one(d), v: Weight::one(d), periodic }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// `r_k ≤ min_{m ≤ k}(1, p_m)` for every axis.
    pub fn check_hypothesis(&self) -> Result<()> {
        let d = self.dim();
        if self.r.len() != d || self.periodic.len() != d || self.omega.dim() != d || self.v.dim() != d {
            return Err(Error::InvalidArgument(format!(
                "Young setup needs exponents, weights and periodic flags of dimension {d}"
            )));
        }
        let mut bound: f64 = 1.0;
        for (k, (p, r)) in self.p.values().iter().zip(self.r.values()).enumerate() {
            bound = bound.min(*p);
            if r > bound {
                return Err(Error::Precondition(format!(
                    "r[{k}] = {r} exceeds min(1, p[0..={k}]) = {bound}"
                )));
            }
        }
        Ok(())
    }

    fn boundary(&self) -> Vec<Boundary> {
        self.periodic
            .iter()
            .map(|&p| if p { Boundary::Periodic } else { Boundary::Zero })
            .collect()
    }
}

/// `‖a ∗ f‖ / (‖a‖_{ℓ^r_{(v)}} ‖f‖)` with the `L^p_{(ω)}` norms over the grid
/// of `f`, which must span exactly one cell on every periodic axis. The
/// lattice is the grid's own.
pub fn young_estimate_check(a: &LatticeSequence, f: &SampledField, setup: &YoungSetup) -> Result<f64> {
    setup.check_hypothesis()?;
    let g = &f.grid;
    if g.dim() != setup.dim() {
        return Err(Error::InvalidArgument("field and setup differ in dimension".into()));
    }
    if let Some(k) = (0..g.dim()).find(|&k| setup.periodic[k] && g.ranges[k].0 != g.ranges[k].1) {
        return Err(Error::InvalidArgument(format!("periodic axis {k} must span exactly one cell")));
    }
    let conv = semidiscrete_convolution(a, &g.basis, f, &setup.boundary())?;
    let spec = MixedNormSpec::new(g.basis.clone(), setup.p.clone(), setup.omega.clone());
    let lhs = mixed_norm(&conv, &spec)?;
    let rhs = discrete_mixed_norm(a, &setup.r, &setup.v, &g.basis)? * mixed_norm(f, &spec)?;
    Ok(ratio(lhs, rhs))
}

/// A randomized Young-estimate study over `batches` draws of `(a, f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungStudy {
    pub setup: YoungSetup,
    pub batches: usize,
    pub seed: u64,
    /// Samples per cell.
    pub m: usize,
    /// Non-periodic axes cover cells `-half_width ..= half_width - 1`.
    pub half_width: i64,
    /// Nonzero entries of `a`, placed in `[-2, 2]^d`.
    pub terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungReport {
    pub constants: Vec<f64>,
    pub max: f64,
}

enum AxisFactor {
    Periodic { cos: [f64; 2], sin: [f64; 2] },
    Bump { center: f64, width: f64, chirp: f64 },
}

impl AxisFactor {
    fn draw(rng: &mut ChaCha8Rng, periodic: bool) -> Self {
        if periodic {
            AxisFactor::Periodic {
                cos: [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)],
                sin: [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)],
            }
        } else {
            AxisFactor::Bump {
                center: rng.gen_range(-1.0..1.0),
                width: rng.gen_range(0.25..0.6),
                chirp: rng.gen_range(-2.0..2.0),
            }
        }
    }

    fn eval(&self, x: f64) -> Complex64 {
        let tau = 2.0 * std::f64::consts::PI;
        match self {
            AxisFactor::Periodic { cos, sin } => {
                let v = 1.0 + (0..2)
                    .map(|h| cos[h] * (tau * (h + 1) as f64 * x).cos() + sin[h] * (tau * (h + 1) as f64 * x).sin())
                    .sum::<f64>();
                Complex64::new(v, 0.0)
            }
            AxisFactor::Bump { center, width, chirp } => {
                let s = (x - center) / width;
                Complex64::from_polar((-0.5 * s * s).exp(), chirp * x)
            }
        }
    }
}

/// Draws `(a, f)` pairs from `seed` (independent of `m`, so refined runs see
/// the same functions) and records the measured constants.
pub fn young_study(study: &YoungStudy) -> Result<YoungReport> {
    let setup = &study.setup;
    setup.check_hypothesis()?;
    let d = setup.dim();
    let ranges: Vec<(i64, i64)> = setup
        .periodic
        .iter()
        .map(|&p| if p { (0, 0) } else { (-study.half_width, study.half_width - 1) })
        .collect();
    let grid = GridSpec::new(OrderedBasis::standard(d), vec![study.m; d], ranges)?;
    let mut rng = ChaCha8Rng::seed_from_u64(study.seed);
    let mut constants = Vec::with_capacity(study.batches);
    for _ in 0..study.batches {
        let mut a = LatticeSequence::new(d);
        for _ in 0..study.terms.max(1) {
            let j: Vec<i64> = (0..d).map(|_| rng.gen_range(-2..=2)).collect();
            a.insert(j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
        let factors: Vec<AxisFactor> = setup.periodic.iter().map(|&p| AxisFactor::draw(&mut rng, p)).collect();
        let f = SampledField::from_fn(grid.clone(), Codomain::Function, |x| {
            factors.iter().zip(x).map(|(fa, &t)| fa.eval(t)).product()
        })?;
        constants.push(young_estimate_check(&a, &f, setup)?);
    }
    let max = constants.iter().copied().fold(0.0, f64::max);
    Ok(YoungReport { constants, max })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(m: usize, lo: i64, hi: i64, f: impl Fn(f64) -> f64) -> SampledField {
        let g = GridSpec::uniform(OrderedBasis::standard(1), m, lo, hi).unwrap();
        SampledField::from_fn(g, Codomain::Function, |x| Complex64::new(f(x[0]), 0.0)).unwrap()
    }

    fn seq(entries: &[(i64, f64)]) -> LatticeSequence {
        let mut a = LatticeSequence::new(1);
        for &(j, v) in entries {
            a.insert(vec![j], Complex64::new(v, 0.0));
        }
        a
    }

    fn std1() -> OrderedBasis {
        OrderedBasis::standard(1)
    }

    #[test]
    fn delta_is_identity_and_shift() {
        let f = line(4, -3, 3, |x| (-x * x).exp());
        let id = semidiscrete_convolution(&LatticeSequence::delta(vec![0]), &std1(), &f, &[Boundary::Zero]).unwrap();
        assert_eq!(id, f);
        let sh = semidiscrete_convolution(&LatticeSequence::delta(vec![1]), &std1(), &f, &[Boundary::Zero]).unwrap();
        let expect = line(4, -3, 3, |x| if x > -2.0 { (-(x - 1.0) * (x - 1.0)).exp() } else { 0.0 });
        for (a, b) in sh.values.iter().zip(&expect.values) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn disjoint_translates_of_indicator() {
        let f = line(8, 0, 1, |x| if x < 1.0 { 1.0 } else { 0.0 });
        let c = semidiscrete_convolution(&seq(&[(0, 1.0), (1, 1.0)]), &std1(), &f, &[Boundary::Zero]).unwrap();
        assert!(c.values.iter().all(|v| (v.re - 1.0).abs() < 1e-15));
    }

    #[test]
    fn non_commensurate_shift_is_resolution_error() {
        let f = line(4, 0, 3, |x| x);
        let half = OrderedBasis::diagonal(&[0.3]).unwrap();
        let e = semidiscrete_convolution(&LatticeSequence::delta(vec![1]), &half, &f, &[Boundary::Zero]);
        assert!(matches!(e, Err(Error::Resolution(_))));
    }

    #[test]
    fn periodic_l1_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = line(64, 0, 0, |x| 1.0 + 0.5 * (6.0 * x).sin().powi(2));
        let a = seq(&(0..5).map(|j| (j - 2, rng.gen_range(0.0..1.0))).collect::<Vec<_>>());
        let setup = YoungSetup::unweighted(ExponentVector::scalar(1.0, 1).unwrap(), ExponentVector::scalar(1.0, 1).unwrap(), vec![true]);
        let c = young_estimate_check(&a, &f, &setup).unwrap();
        assert!((c - 1.0).abs() < 1e-10, "{c}");
    }

    #[test]
    fn hypothesis_violation_is_precondition() {
        let setup = YoungSetup::unweighted(ExponentVector::new(&[0.5]).unwrap(), ExponentVector::new(&[1.0]).unwrap(), vec![false]);
        assert!(matches!(setup.check_hypothesis(), Err(Error::Precondition(_))));
        let ok = YoungSetup::unweighted(ExponentVector::new(&[1.0, 2.0]).unwrap(), ExponentVector::new(&[1.0, 1.0]).unwrap(), vec![true, false]);
        assert!(ok.check_hypothesis().is_ok());
        let bad = YoungSetup::unweighted(ExponentVector::new(&[0.5, 2.0]).unwrap(), ExponentVector::new(&[0.5, 1.0]).unwrap(), vec![true, false]);
        assert!(bad.check_hypothesis().is_err());
    }

    #[test]
    fn delta_gives_unit_constant() {
        let f = line(8, -6, 5, |x| (-x * x).exp());
        let setup = YoungSetup::unweighted(ExponentVector::new(&[0.5]).unwrap(), ExponentVector::new(&[0.5]).unwrap(), vec![false]);
        let c = young_estimate_check(&LatticeSequence::delta(vec![0]), &f, &setup).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_study_satisfies_bound() {
        let study = YoungStudy {
            setup: YoungSetup::unweighted(ExponentVector::new(&[0.5]).unwrap(), ExponentVector::new(&[0.5]).unwrap(), vec![false]),
            batches: 5,
            seed: 1,
            m: 8,
            half_width: 10,
            terms: 4,
        };
        let r = young_study(&study).unwrap();
        assert_eq!(r.constants.len(), 5);
        assert!(r.max <= 1.0 + 1e-9, "{r:?}");
    }
}

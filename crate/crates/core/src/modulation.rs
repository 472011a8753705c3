//! Modulation-space quasi-norms `M^{p,q}_{E,(ω)}` and `W^{p,q}_{E,(ω)}` of
//! STFT fields, and corpus studies comparing them with Wiener amalgam norms.

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusEntry;
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::lattice::OrderedBasis;
use crate::mixed::{mixed_norm, ExponentVector, MixedNormSpec};
use crate::parallel::par_map;
use crate::stft::StftField;
use crate::weight::Weight;
use crate::wiener::{ratio, wiener_norm, WienerSpec};
use crate::window::Window;

/// Boundary cells may carry at most this fraction of a norm.
pub const TRUNCATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    /// `L^p` in `x` first, then `L^q` in `ξ`.
    M,
    /// `L^q` in `ξ` first, then `L^p` in `x`.
    W,
}

/// Exponents and weight of `M^{p,q}_{E,(ω)}` or `W^{p,q}_{E,(ω)}` with
/// `E = E_1 × E_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModSpec {
    pub e1: OrderedBasis,
    pub e2: OrderedBasis,
    pub p: ExponentVector,
    pub q: ExponentVector,
    pub weight: Weight,
    pub flavor: Flavor,
}

impl ModSpec {
    pub fn new(e1: OrderedBasis, e2: OrderedBasis, p: ExponentVector, q: ExponentVector, weight: Weight) -> Self {
        ModSpec { e1, e2, p, q, weight, flavor: Flavor::M }
    }

    pub fn basis(&self) -> OrderedBasis {
        self.e1.product(&self.e2)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.e1.dim();
        if self.e2.dim() != d || self.p.len() != d || self.q.len() != d || self.weight.dim() != 2 * d {
            return Err(Error::InvalidArgument(format!(
                "modulation spec needs E1, E2, p and q of dimension {d} and a weight of dimension {}",
                2 * d
            )));
        }
        Ok(())
    }

    fn mixed_spec(&self) -> MixedNormSpec {
        let d = self.e1.dim();
        let spec = MixedNormSpec::new(self.basis(), self.p.concat(&self.q), self.weight.clone());
        match self.flavor {
            Flavor::M => spec,
            Flavor::W => spec.with_permutation((d..2 * d).chain(0..d).collect()),
        }
    }
}

/// `‖V_φf·ω‖` in `L^{p,q}` (or `L^q` inside `L^p` for the W flavour).
///
/// Fails with a truncation error when the outermost cells of a non-periodic
/// axis carry more than [`TRUNCATION_TOL`] of the value. A nonzero source
/// that is periodic in `x` has infinite norm for finite `p`.
pub fn mod_norm(f: &StftField, spec: &ModSpec) -> Result<f64> {
    spec.validate()?;
    let d = spec.e1.dim();
    if f.dim() != d {
        return Err(Error::InvalidArgument("field and spec differ in dimension".into()));
    }
    let mixed = spec.mixed_spec();
    let periodic_x = f.x_period.is_some();
    if periodic_x && spec.p.0.iter().any(|e| !e.is_infinite()) {
        let nonzero = f.field.values.iter().any(|v| v.norm() > 0.0);
        return Ok(if nonzero { f64::INFINITY } else { 0.0 });
    }
    let value = mixed_norm(&f.field, &mixed)?;
    if value == 0.0 {
        return Ok(0.0);
    }
    let axes: Vec<usize> = if periodic_x { (d..2 * d).collect() } else { (0..2 * d).collect() };
    check_truncation(f, &mixed, value, &axes)?;
    Ok(value)
}

pub(crate) fn check_truncation(f: &StftField, spec: &MixedNormSpec, value: f64, axes: &[usize]) -> Result<()> {
    let g = &f.field.grid;
    let mut region: Vec<(i64, i64)> = g.ranges.clone();
    for &k in axes {
        let (a, b) = g.ranges[k];
        if b - a < 2 {
            return Err(Error::Truncation(format!("axis {k} has fewer than three cells")));
        }
        region[k] = (a + 1, b - 1);
    }
    let inner = mixed_norm(&f.field, &spec.clone().with_region(region))?;
    let lost = 1.0 - inner / value;
    if lost > TRUNCATION_TOL {
        return Err(Error::Truncation(format!(
            "boundary cells carry a fraction {lost:e} of the norm (limit {TRUNCATION_TOL:e}); enlarge the phase-space box"
        )));
    }
    Ok(())
}

/// Inputs of a window/local-exponent equivalence study.
#[derive(Debug, Clone)]
pub struct EquivalenceSetup {
    /// Phase-space grid; its cells are the Wiener cells.
    pub grid: GridSpec,
    /// Quadrature grid for non-periodic sources.
    pub t_grid: GridSpec,
    /// Exponents on all `2d` phase-space axes.
    pub p: ExponentVector,
    pub weight: Weight,
    pub window1: Window,
    pub window2: Window,
    /// Local exponents, applied to every axis.
    pub r_list: Vec<f64>,
    pub threads: usize,
}

/// One corpus member's norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub id: String,
    /// `‖V_{φ_1}f‖_{L^p_{E,(ω)}}`.
    pub lebesgue: f64,
    /// `‖V_{φ_2}f‖_{𝖶^∞_E(ω,ℓ^p)}`.
    pub wiener_inf: f64,
    /// `‖V_{φ_2}f‖_{𝖶^r_E(ω,ℓ^p)}` for each entry of `r_list`.
    pub wiener: Vec<f64>,
    /// Whether all values are finite.
    pub finite: bool,
}

impl EquivalenceRow {
    /// `𝖶^r / 𝖶^∞` per local exponent.
    pub fn ratio_to_sup(&self) -> Vec<f64> {
        self.wiener.iter().map(|&w| ratio(w, self.wiener_inf)).collect()
    }

    /// `𝖶^r / L^p` per local exponent.
    pub fn ratio_to_lebesgue(&self) -> Vec<f64> {
        self.wiener.iter().map(|&w| ratio(w, self.lebesgue)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceTable {
    pub r_list: Vec<f64>,
    pub rows: Vec<EquivalenceRow>,
}

/// `max/min` over the finite entries.
pub fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        f64::NAN
    } else {
        hi / lo
    }
}

impl EquivalenceTable {
    /// Corpus spread of `𝖶^r / 𝖶^∞` per local exponent.
    pub fn spreads_to_sup(&self) -> Vec<f64> {
        (0..self.r_list.len())
            .map(|k| spread(self.rows.iter().filter(|r| r.finite).map(|r| r.ratio_to_sup()[k])))
            .collect()
    }

    /// Corpus spread of `𝖶^r / L^p` per local exponent.
    pub fn spreads_to_lebesgue(&self) -> Vec<f64> {
        (0..self.r_list.len())
            .map(|k| spread(self.rows.iter().filter(|r| r.finite).map(|r| r.ratio_to_lebesgue()[k])))
            .collect()
    }

    /// Corpus spread of `𝖶^∞ / L^p`.
    pub fn spread_sup_to_lebesgue(&self) -> f64 {
        spread(self.rows.iter().filter(|r| r.finite).map(|r| ratio(r.wiener_inf, r.lebesgue)))
    }
}

/// For each corpus member: the Lebesgue norm of `V_{φ_1}f` and the Wiener
/// norms of `V_{φ_2}f` with local exponents `r_list` and `r = ∞`.
pub fn equivalence_study(corpus: &[CorpusEntry], setup: &EquivalenceSetup) -> Result<EquivalenceTable> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    let dd = setup.grid.dim();
    if setup.p.len() != dd || setup.weight.dim() != dd {
        return Err(Error::InvalidArgument(format!(
            "exponents and weight must live on all {dd} phase-space axes"
        )));
    }
    let d = dd / 2;
    let (e1, e2) = setup
        .grid
        .basis
        .split_product()
        .ok_or_else(|| Error::InvalidArgument("phase-space grid must use a block basis".into()))?;
    let p_x = ExponentVector(setup.p.0[..d].to_vec());
    let p_xi = ExponentVector(setup.p.0[d..].to_vec());
    let mspec = ModSpec::new(e1, e2, p_x, p_xi, setup.weight.clone());
    let wiener = |r: f64| -> Result<WienerSpec> {
        Ok(WienerSpec::new(ExponentVector::scalar(r, dd)?, setup.grid.basis.clone(), setup.p.clone())
            .with_weight(setup.weight.clone()))
    };
    let specs: Vec<WienerSpec> = setup.r_list.iter().map(|&r| wiener(r)).collect::<Result<_>>()?;
    let sup_spec = wiener(f64::INFINITY)?;
    let rows = par_map(corpus, setup.threads, |entry| -> Result<EquivalenceRow> {
        let f1 = entry.function.stft(&setup.window1, &setup.grid, &setup.t_grid)?;
        let lebesgue = mod_norm(&f1, &mspec)?;
        if !lebesgue.is_finite() {
            return Ok(EquivalenceRow {
                id: entry.id.clone(),
                lebesgue,
                wiener_inf: f64::INFINITY,
                wiener: vec![f64::INFINITY; specs.len()],
                finite: false,
            });
        }
        let f2 = if setup.window2 == setup.window1 {
            f1
        } else {
            entry.function.stft(&setup.window2, &setup.grid, &setup.t_grid)?
        };
        let wiener_inf = wiener_norm(&f2.field, &sup_spec)?;
        let wiener = specs.iter().map(|s| wiener_norm(&f2.field, s)).collect::<Result<Vec<_>>>()?;
        Ok(EquivalenceRow { id: entry.id.clone(), lebesgue, wiener_inf, wiener, finite: true })
    });
    Ok(EquivalenceTable { r_list: setup.r_list.clone(), rows: rows.into_iter().collect::<Result<_>>()? })
}

//! Study configurations and the batch runner behind the command-line tool.
//!
//! A config is a JSON object with a `kind` and the fields of that kind.
//! Every study writes one CSV report (first line `# anchor: …`), written
//! atomically; reports are byte-identical across runs of the same build.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::convolution::{young_study, YoungSetup, YoungStudy};
use crate::corpus::{standard_corpus, CorpusEntry, TestFunction, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::gabor::{sample_window, window_change_domination, GaborSystem};
use crate::lattice::OrderedBasis;
use crate::mixed::{mixed_norm, Exponent, ExponentVector, MixedNormSpec};
use crate::modulation::{equivalence_study, mod_norm, EquivalenceSetup, Flavor, ModSpec};
use crate::parallel::par_map;
use crate::periodic::{coefficient_norm, periodic_equivalence_study, LocalExponent, PeriodicSetup, TrigPolynomial};
use crate::stft::{stft_at, CONVENTION};
use crate::weight::Weight;
use crate::wiener::{embedding_check_rel1, wiener_norm, WienerSpec};
use crate::window::Window;

/// Run-time options shared by every study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub threads: usize,
    /// Multiplies every grid density.
    pub resolution_scale: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { threads: 1, resolution_scale: 1 }
    }
}

/// Which functions a study runs on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    /// Include the 20-member standard corpus drawn from `seed`.
    #[serde(default)]
    pub standard: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Keep only these ids of the standard corpus.
    #[serde(default)]
    pub only: Option<Vec<String>>,
    /// Extra members.
    #[serde(default)]
    pub functions: Vec<CorpusEntry>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl CorpusSpec {
    pub fn entries(&self) -> Vec<CorpusEntry> {
        let mut out: Vec<CorpusEntry> = if self.standard {
            standard_corpus(self.seed)
                .into_iter()
                .filter(|e| self.only.as_ref().is_none_or(|ids| ids.contains(&e.id)))
                .collect()
        } else {
            Vec::new()
        };
        out.extend(self.functions.iter().cloned());
        out
    }

    fn require(&self) -> Result<Vec<CorpusEntry>> {
        let e = self.entries();
        if e.is_empty() {
            return Err(Error::InvalidArgument("empty corpus".into()));
        }
        Ok(e)
    }

    fn polynomials(&self) -> Result<Vec<(String, TrigPolynomial)>> {
        let polys: Vec<(String, TrigPolynomial)> = self
            .require()?
            .into_iter()
            .filter_map(|e| match e.function {
                TestFunction::Trig { poly } => Some((e.id, poly)),
                _ => None,
            })
            .collect();
        if polys.is_empty() {
            return Err(Error::InvalidArgument("empty corpus: no trigonometric polynomials selected".into()));
        }
        Ok(polys)
    }
}

fn refine(g: &GridSpec, k: usize) -> Result<GridSpec> {
    g.refined(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftStudy {
    pub signal: TestFunction,
    pub window: Window,
    pub t_grid: GridSpec,
    /// Phase-space grid, optional.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Extra phase-space points `(x, ξ)`.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormStudy {
    pub signal: TestFunction,
    pub grid: GridSpec,
    pub exponents: Vec<ExponentVector>,
    #[serde(default)]
    pub weight: Option<Weight>,
    #[serde(default)]
    pub permutation: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerStudy {
    pub signal: TestFunction,
    pub grid: GridSpec,
    pub cells: OrderedBasis,
    pub local: Vec<ExponentVector>,
    pub global: ExponentVector,
    #[serde(default)]
    pub weight: Option<Weight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModNormStudy {
    pub corpus: CorpusSpec,
    pub window: Window,
    pub grid: GridSpec,
    pub t_grid: GridSpec,
    pub p: ExponentVector,
    pub q: ExponentVector,
    #[serde(default)]
    pub weight: Option<Weight>,
    #[serde(default = "default_flavor")]
    pub flavor: Flavor,
}

fn default_flavor() -> Flavor {
    Flavor::M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffStudy {
    pub corpus: CorpusSpec,
    pub exponents: Vec<Exponent>,
    #[serde(default)]
    pub weight: Option<Weight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivWienerStudy {
    pub corpus: CorpusSpec,
    pub grid: GridSpec,
    pub t_grid: GridSpec,
    pub p: ExponentVector,
    #[serde(default)]
    pub weight: Option<Weight>,
    pub window1: Window,
    pub window2: Window,
    pub r_list: Vec<Exponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivPeriodicStudy {
    pub corpus: CorpusSpec,
    pub window: Window,
    pub q_list: Vec<Exponent>,
    pub r_list: Vec<LocalExponent>,
    pub weights: Vec<(String, Weight)>,
    pub m_x: usize,
    pub m_xi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingStudy {
    pub corpus: CorpusSpec,
    pub window: Window,
    pub grid: GridSpec,
    pub t_grid: GridSpec,
    pub p: ExponentVector,
    pub q: ExponentVector,
    pub r: ExponentVector,
    pub r1: Exponent,
    pub r2: Exponent,
    #[serde(default)]
    pub weight: Option<Weight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoungConfig {
    pub p: ExponentVector,
    pub r: ExponentVector,
    pub periodic: Vec<bool>,
    #[serde(default)]
    pub omega: Option<Weight>,
    #[serde(default)]
    pub v: Option<Weight>,
    pub batches: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub m: usize,
    pub half_width: i64,
    #[serde(default = "default_terms")]
    pub terms: usize,
}

fn default_terms() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaborStudy {
    pub length: usize,
    pub window: Window,
    pub a: usize,
    pub b: usize,
    #[serde(default = "default_signals")]
    pub signals: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Also run the window-change domination test against this window.
    #[serde(default)]
    pub change_window: Option<Window>,
}

fn default_signals() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Study {
    Stft(StftStudy),
    Norm(NormStudy),
    Wiener(WienerStudy),
    ModNorm(ModNormStudy),
    Coeffs(CoeffStudy),
    EquivWienerR(EquivWienerStudy),
    EquivPeriodic(EquivPeriodicStudy),
    EmbeddingRel1(EmbeddingStudy),
    Young(YoungConfig),
    GaborDual(GaborStudy),
}

pub const KINDS: [&str; 10] = [
    "stft",
    "norm",
    "wiener",
    "modnorm",
    "coeffs",
    "equiv-wiener-r",
    "equiv-periodic",
    "embedding-rel1",
    "young",
    "gabor-dual",
];

/// A parsed config: the study plus report naming.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: String,
    /// Label written in the first CSV line.
    pub anchor: String,
    /// Report file name inside the output directory.
    pub output: String,
    pub study: Study,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    if s == "." {
        return String::new();
    }
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            serde_path_to_error::Segment::Seq { index } => out.push_str(&index.to_string()),
            serde_path_to_error::Segment::Map { key } => out.push_str(key),
            serde_path_to_error::Segment::Enum { variant } => out.push_str(variant),
            serde_path_to_error::Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn parse_part<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Error::Config {
        pointer: pointer_of(e.path()),
        message: e.inner().to_string(),
    })
}

fn default_anchor(kind: &str) -> &'static str {
    match kind {
        "stft" => "short-time Fourier transform samples",
        "norm" => "mixed Lebesgue quasi-norms",
        "wiener" => "Wiener amalgam quasi-norms",
        "modnorm" => "modulation-space quasi-norms",
        "coeffs" => "Fourier coefficient norms",
        "equiv-wiener-r" => "Wiener local-exponent equivalence",
        "equiv-periodic" => "periodic coefficient and STFT norm equivalence",
        "embedding-rel1" => "Wiener embedding chains",
        "young" => "semi-discrete Young estimate",
        _ => "Gabor frame and canonical dual",
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config {
            pointer: String::new(),
            message: e.to_string(),
        })?;
        let Value::Object(mut map) = value else {
            return Err(Error::Config { pointer: String::new(), message: "config must be a JSON object".into() });
        };
        let kind = match map.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(Error::Config { pointer: "/kind".into(), message: "kind must be a string".into() }),
            None => return Err(Error::Config { pointer: "/kind".into(), message: "missing study kind".into() }),
        };
        let text_field = |map: &mut serde_json::Map<String, Value>, key: &str| -> Result<Option<String>> {
            match map.remove(key) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s)),
                Some(_) => Err(Error::Config { pointer: format!("/{key}"), message: format!("{key} must be a string") }),
            }
        };
        let anchor = text_field(&mut map, "anchor")?;
        let output = text_field(&mut map, "output")?;
        let rest = Value::Object(map);
        let study = match kind.as_str() {
            "stft" => Study::Stft(parse_part(rest)?),
            "norm" => Study::Norm(parse_part(rest)?),
            "wiener" => Study::Wiener(parse_part(rest)?),
            "modnorm" => Study::ModNorm(parse_part(rest)?),
            "coeffs" => Study::Coeffs(parse_part(rest)?),
            "equiv-wiener-r" => Study::EquivWienerR(parse_part(rest)?),
            "equiv-periodic" => Study::EquivPeriodic(parse_part(rest)?),
            "embedding-rel1" => Study::EmbeddingRel1(parse_part(rest)?),
            "young" => Study::Young(parse_part(rest)?),
            "gabor-dual" => Study::GaborDual(parse_part(rest)?),
            other => {
                return Err(Error::Config {
                    pointer: "/kind".into(),
                    message: format!("unknown study kind `{other}`; expected one of {}", KINDS.join(", ")),
                })
            }
        };
        let anchor = anchor.unwrap_or_else(|| default_anchor(&kind).to_string());
        let output = output.unwrap_or_else(|| format!("{kind}.csv"));
        if output.contains('/') || output.contains('\\') || output.is_empty() {
            return Err(Error::Config { pointer: "/output".into(), message: "output must be a plain file name".into() });
        }
        Ok(StudyConfig { kind, anchor, output, study })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        StudyConfig::from_json(&text)
    }

    /// Structural and hypothesis checks without running anything.
    pub fn validate(&self) -> Result<()> {
        match &self.study {
            Study::Stft(s) => {
                s.window.validate()?;
                if s.grid.is_none() && s.points.is_empty() {
                    return Err(Error::InvalidArgument("stft study needs a grid or points".into()));
                }
                Ok(())
            }
            Study::Norm(s) => {
                let w = s.weight.clone().unwrap_or_else(|| Weight::one(s.grid.dim()));
                for e in &s.exponents {
                    let mut spec = MixedNormSpec::new(s.grid.basis.clone(), e.clone(), w.clone());
                    spec.permutation = s.permutation.clone();
                    spec.validate()?;
                }
                Ok(())
            }
            Study::Wiener(s) => {
                let w = s.weight.clone().unwrap_or_else(|| Weight::one(s.grid.dim()));
                for l in &s.local {
                    WienerSpec::new(l.clone(), s.cells.clone(), s.global.clone()).with_weight(w.clone()).validate()?;
                }
                Ok(())
            }
            Study::ModNorm(s) => {
                s.corpus.require()?;
                s.window.validate()?;
                mod_spec(s)?.validate()
            }
            Study::Coeffs(s) => s.corpus.polynomials().map(|_| ()),
            Study::EquivWienerR(s) => {
                s.corpus.require()?;
                s.window1.validate()?;
                s.window2.validate()?;
                if s.r_list.is_empty() {
                    return Err(Error::InvalidArgument("r_list is empty".into()));
                }
                Ok(())
            }
            Study::EquivPeriodic(s) => {
                s.corpus.polynomials()?;
                s.window.validate()
            }
            Study::EmbeddingRel1(s) => {
                s.corpus.require()?;
                let bound1 = s.p.min().min(s.q.min()).min(s.r.min()).min(1.0);
                if s.r1.value() > bound1 {
                    return Err(Error::Precondition(format!("r1 = {} exceeds min(1, p, q, r) = {bound1}", s.r1)));
                }
                if s.r2.value() > s.q.min() {
                    return Err(Error::Precondition(format!("r2 = {} exceeds min(q) = {}", s.r2, s.q.min())));
                }
                Ok(())
            }
            Study::Young(y) => young_setup(y).check_hypothesis(),
            Study::GaborDual(g) => {
                g.window.validate()?;
                GaborSystem::new(vec![Complex64::new(0.0, 0.0); g.length], g.a, g.b).map(|_| ())
            }
        }
    }

    /// Runs the study and writes its report into `out_dir`.
    pub fn run(&self, out_dir: &Path, opts: RunOptions) -> Result<PathBuf> {
        self.validate()?;
        let k = opts.resolution_scale.max(1);
        let threads = opts.threads.max(1);
        let mut csv = format!("# anchor: {}\n", self.anchor);
        match &self.study {
            Study::Stft(s) => run_stft(s, k, &mut csv)?,
            Study::Norm(s) => run_norm(s, k, &mut csv)?,
            Study::Wiener(s) => run_wiener(s, k, &mut csv)?,
            Study::ModNorm(s) => run_modnorm(s, k, threads, &mut csv)?,
            Study::Coeffs(s) => run_coeffs(s, &mut csv)?,
            Study::EquivWienerR(s) => run_equiv_wiener(s, k, threads, &mut csv)?,
            Study::EquivPeriodic(s) => run_equiv_periodic(s, k, threads, &mut csv)?,
            Study::EmbeddingRel1(s) => run_embedding(s, k, threads, &mut csv)?,
            Study::Young(y) => run_young(y, k, &mut csv)?,
            Study::GaborDual(g) => run_gabor(g, threads, &mut csv)?,
        }
        let path = out_dir.join(&self.output);
        write_atomic(&path, csv.as_bytes())?;
        Ok(path)
    }
}

/// Writes through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io)?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.15e}")
    }
}

fn row(csv: &mut String, cells: &[String]) {
    csv.push_str(&cells.join(","));
    csv.push('\n');
}

fn run_stft(s: &StftStudy, k: usize, csv: &mut String) -> Result<()> {
    let f = s.signal.sample(refine(&s.t_grid, k)?)?;
    let d = f.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.extend((0..d).map(|i| format!("xi{i}")));
    header.extend(["re", "im", "abs"].map(String::from));
    let _ = writeln!(csv, "# convention: {CONVENTION}; window: {}", s.window.describe());
    row(csv, &header);
    let emit = |csv: &mut String, p: &[f64], v: Complex64| {
        let mut cells: Vec<String> = p.iter().map(|&c| num(c)).collect();
        cells.extend([num(v.re), num(v.im), num(v.norm())]);
        row(csv, &cells);
    };
    if !s.points.is_empty() {
        for (p, v) in s.points.iter().zip(stft_at(&f, &s.window, &s.points)?) {
            emit(csv, p, v);
        }
    }
    if let Some(g) = &s.grid {
        let g = refine(g, k)?;
        let v = match &s.signal {
            TestFunction::Trig { poly } => crate::stft::stft_trigpoly(poly, &s.window, &g)?,
            _ => crate::stft::stft(&f, &s.window, &g)?,
        };
        for (i, z) in v.field.values.iter().enumerate() {
            emit(csv, &g.point_of(&g.multi_index(i)), *z);
        }
    }
    Ok(())
}

fn run_norm(s: &NormStudy, k: usize, csv: &mut String) -> Result<()> {
    let f = s.signal.sample(refine(&s.grid, k)?)?;
    let w = s.weight.clone().unwrap_or_else(|| Weight::one(f.dim()));
    row(csv, &["exponents".into(), "value".into()]);
    for e in &s.exponents {
        let mut spec = MixedNormSpec::new(f.grid.basis.clone(), e.clone(), w.clone());
        spec.permutation = s.permutation.clone();
        row(csv, &[e.to_string(), num(mixed_norm(&f, &spec)?)]);
    }
    Ok(())
}

fn run_wiener(s: &WienerStudy, k: usize, csv: &mut String) -> Result<()> {
    let f = s.signal.sample(refine(&s.grid, k)?)?;
    let w = s.weight.clone().unwrap_or_else(|| Weight::one(f.dim()));
    row(csv, &["local".into(), "global".into(), "value".into()]);
    for l in &s.local {
        let spec = WienerSpec::new(l.clone(), s.cells.clone(), s.global.clone()).with_weight(w.clone());
        row(csv, &[l.to_string(), s.global.to_string(), num(wiener_norm(&f, &spec)?)]);
    }
    Ok(())
}

fn mod_spec(s: &ModNormStudy) -> Result<ModSpec> {
    let (e1, e2) = s
        .grid
        .basis
        .split_product()
        .ok_or_else(|| Error::InvalidArgument("phase-space grid must use a block basis".into()))?;
    let w = s.weight.clone().unwrap_or_else(|| Weight::one(s.grid.dim()));
    Ok(ModSpec { flavor: s.flavor, ..ModSpec::new(e1, e2, s.p.clone(), s.q.clone(), w) })
}

fn run_modnorm(s: &ModNormStudy, k: usize, threads: usize, csv: &mut String) -> Result<()> {
    let corpus = s.corpus.require()?;
    let spec = mod_spec(s)?;
    let grid = refine(&s.grid, k)?;
    let t_grid = refine(&s.t_grid, k)?;
    let values = par_map(&corpus, threads, |e| -> Result<f64> {
        mod_norm(&e.function.stft(&s.window, &grid, &t_grid)?, &spec)
    });
    row(csv, &["id".into(), "value".into()]);
    for (e, v) in corpus.iter().zip(values) {
        row(csv, &[e.id.clone(), num(v?)]);
    }
    Ok(())
}

fn run_coeffs(s: &CoeffStudy, csv: &mut String) -> Result<()> {
    let polys = s.corpus.polynomials()?;
    row(csv, &["id".into(), "q".into(), "value".into()]);
    for (id, p) in &polys {
        let w = s.weight.clone().unwrap_or_else(|| Weight::one(p.dim()));
        for &q in &s.exponents {
            let v = coefficient_norm(p, &w, &ExponentVector(vec![q; p.dim()]))?;
            row(csv, &[id.clone(), q.to_string(), num(v)]);
        }
    }
    Ok(())
}

fn run_equiv_wiener(s: &EquivWienerStudy, k: usize, threads: usize, csv: &mut String) -> Result<()> {
    let corpus = s.corpus.require()?;
    let setup = EquivalenceSetup {
        grid: refine(&s.grid, k)?,
        t_grid: refine(&s.t_grid, k)?,
        p: s.p.clone(),
        weight: s.weight.clone().unwrap_or_else(|| Weight::one(s.grid.dim())),
        window1: s.window1.clone(),
        window2: s.window2.clone(),
        r_list: s.r_list.iter().map(|r| r.value()).collect(),
        threads,
    };
    let table = equivalence_study(&corpus, &setup)?;
    let mut header: Vec<String> = ["id", "finite", "lebesgue", "wiener_inf"].map(String::from).to_vec();
    for r in &s.r_list {
        header.extend([format!("wiener_r{r}"), format!("ratio_sup_r{r}"), format!("ratio_lebesgue_r{r}")]);
    }
    row(csv, &header);
    for r in &table.rows {
        let mut cells = vec![r.id.clone(), r.finite.to_string(), num(r.lebesgue), num(r.wiener_inf)];
        for ((w, a), b) in r.wiener.iter().zip(r.ratio_to_sup()).zip(r.ratio_to_lebesgue()) {
            cells.extend([num(*w), num(a), num(b)]);
        }
        row(csv, &cells);
    }
    let mut cells = vec!["spread".into(), String::new(), String::new(), num(table.spread_sup_to_lebesgue())];
    for (a, b) in table.spreads_to_sup().into_iter().zip(table.spreads_to_lebesgue()) {
        cells.extend([String::new(), num(a), num(b)]);
    }
    row(csv, &cells);
    Ok(())
}

fn run_equiv_periodic(s: &EquivPeriodicStudy, k: usize, threads: usize, csv: &mut String) -> Result<()> {
    let polys = s.corpus.polynomials()?;
    let setup = PeriodicSetup {
        window: s.window.clone(),
        q_list: s.q_list.clone(),
        r_list: s.r_list.clone(),
        weights: s.weights.clone(),
        m_x: s.m_x * k,
        m_xi: s.m_xi * k,
        threads,
    };
    let groups = periodic_equivalence_study(&polys, &setup)?;
    row(
        csv,
        &["id", "q", "r", "weight", "coefficient", "stft", "double_integral", "stft_ratio", "integral_ratio"]
            .map(String::from),
    );
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for g in &groups {
        for r in &g.rows {
            row(
                csv,
                &[
                    r.id.clone(),
                    r.q.to_string(),
                    r.r.to_string(),
                    r.weight.clone(),
                    num(r.coefficient),
                    num(r.stft),
                    opt(r.double_integral),
                    num(r.stft_ratio()),
                    opt(r.integral_ratio()),
                ],
            );
        }
        row(
            csv,
            &[
                "spread".into(),
                g.q.to_string(),
                g.r.to_string(),
                g.weight.clone(),
                String::new(),
                String::new(),
                String::new(),
                num(g.stft_spread()),
                opt(g.integral_spread()),
            ],
        );
    }
    Ok(())
}

fn run_embedding(s: &EmbeddingStudy, k: usize, threads: usize, csv: &mut String) -> Result<()> {
    let corpus = s.corpus.require()?;
    let grid = refine(&s.grid, k)?;
    let t_grid = refine(&s.t_grid, k)?;
    let w = s.weight.clone().unwrap_or_else(|| Weight::one(grid.dim()));
    let out = par_map(&corpus, threads, |e| {
        let v = e.function.stft(&s.window, &grid, &t_grid)?;
        embedding_check_rel1(&v, &s.p, &s.q, &s.r, s.r1.value(), s.r2.value(), &w)
    });
    row(
        csv,
        &["id", "left1", "mid1", "right1", "left2", "mid2", "right2", "first1", "second1", "first2", "second2"]
            .map(String::from),
    );
    for (e, c) in corpus.iter().zip(out) {
        let c = c?;
        let r = c.ratios();
        let mut cells = vec![e.id.clone()];
        cells.extend(c.chain1.iter().chain(&c.chain2).map(|&v| num(v)));
        cells.extend([r[0][0], r[0][1], r[1][0], r[1][1]].map(num));
        row(csv, &cells);
    }
    Ok(())
}

fn young_setup(y: &YoungConfig) -> YoungSetup {
    let d = y.p.len();
    YoungSetup {
        p: y.p.clone(),
        r: y.r.clone(),
        omega: y.omega.clone().unwrap_or_else(|| Weight::one(d)),
        v: y.v.clone().unwrap_or_else(|| Weight::one(d)),
        periodic: y.periodic.clone(),
    }
}

fn run_young(y: &YoungConfig, k: usize, csv: &mut String) -> Result<()> {
    let study = YoungStudy {
        setup: young_setup(y),
        batches: y.batches,
        seed: y.seed,
        m: y.m * k,
        half_width: y.half_width,
        terms: y.terms,
    };
    let report = young_study(&study)?;
    row(csv, &["batch".into(), "constant".into()]);
    for (i, c) in report.constants.iter().enumerate() {
        row(csv, &[i.to_string(), num(*c)]);
    }
    row(csv, &["max".into(), num(report.max)]);
    Ok(())
}

fn run_gabor(g: &GaborStudy, threads: usize, csv: &mut String) -> Result<()> {
    use rand::{Rng, SeedableRng};
    let system = GaborSystem::new(sample_window(&g.window, g.length)?, g.a, g.b)?;
    let _ = system.frame_operator_with(threads);
    let report = system.frame_report();
    row(csv, &["key".into(), "value".into()]);
    row(csv, &["A".into(), num(report.lower)]);
    row(csv, &["B".into(), num(report.upper)]);
    row(csv, &["condition".into(), num(report.condition)]);
    row(csv, &["is_frame".into(), report.is_frame.to_string()]);
    row(csv, &["n_min".into(), report.n_min.map(|n| n.to_string()).unwrap_or_default()]);
    let dual = system.canonical_dual()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(g.seed);
    let mut worst: f64 = 0.0;
    let mut last = Vec::new();
    for _ in 0..g.signals {
        let f: Vec<Complex64> = (0..g.length)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let back = system.reconstruct(&dual, &f)?;
        let err = f.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let nf = f.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(err / nf);
        last = f;
    }
    row(csv, &["max_reconstruction_error".into(), num(worst)]);
    if let Some(w0) = &g.change_window {
        let phi0 = sample_window(w0, g.length)?;
        if last.is_empty() {
            last = phi0.clone();
        }
        let d = window_change_domination(&last, &system, &phi0)?;
        row(csv, &["domination_defect".into(), num(d.defect)]);
        row(csv, &["domination_terms".into(), d.terms.to_string()]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_weight_form_points_at_key() {
        let cfg = r#"{"kind":"norm","signal":{"kind":"gaussian","sigma":1.0,"center":0.0},
            "grid":{"basis":{"columns":[[1.0]]},"m":[4],"ranges":[[-8,7]]},
            "exponents":[["2"]],"weight":{"form":"bogus","dim":1}}"#;
        let e = StudyConfig::from_json(cfg).unwrap_err();
        match e {
            Error::Config { pointer, .. } => assert!(pointer.starts_with("/weight"), "{pointer}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(Error::Config { pointer: String::new(), message: String::new() }.exit_code(), 2);
    }

    #[test]
    fn unknown_kind_and_fields_rejected() {
        assert!(StudyConfig::from_json(r#"{"kind":"nope"}"#).is_err());
        let e = StudyConfig::from_json(r#"{"kind":"young","p":["1"],"r":["1"],"periodic":[true],"batches":1,"m":4,"half_width":2,"extra":1}"#)
            .unwrap_err();
        assert!(e.to_string().contains("extra"));
    }

    #[test]
    fn young_hypothesis_violation_is_precondition() {
        let cfg = StudyConfig::from_json(
            r#"{"kind":"young","p":["1/2"],"r":["1"],"periodic":[false],"batches":2,"m":4,"half_width":6}"#,
        )
        .unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn empty_corpus_is_reported() {
        let cfg = StudyConfig::from_json(
            r#"{"kind":"coeffs","corpus":{"standard":false},"exponents":["1"]}"#,
        )
        .unwrap();
        let e = cfg.validate().unwrap_err();
        assert!(e.to_string().contains("empty corpus"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn stft_study_reports_origin_value() {
        let cfg = StudyConfig::from_json(
            r#"{"kind":"stft","signal":{"kind":"gaussian","sigma":1.0,"center":0.0},
                "window":{"kind":"gaussian","dim":1,"sigma":1.0,"normalized":true},
                "t_grid":{"basis":{"columns":[[1.0]]},"m":[16],"ranges":[[-20,19]]},
                "points":[[0.0,0.0]]}"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = cfg.run(dir.path(), RunOptions::default()).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with("# anchor: "));
        let last = text.lines().last().unwrap();
        let abs: f64 = last.split(',').next_back().unwrap().parse().unwrap();
        assert!((abs - 0.398942280401).abs() < 1e-9);
    }
}

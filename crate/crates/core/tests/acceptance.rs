//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the summary is always printed.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use modspace::convolution::{young_estimate_check, young_study, YoungSetup, YoungStudy};
use modspace::corpus::{standard_corpus, trig_corpus, CorpusEntry, TestFunction, DEFAULT_SEED};
use modspace::gabor::{sample_window, window_change_domination, GaborSystem};
use modspace::mixed::{mixed_norm, Exponent};
use modspace::modulation::{equivalence_study, mod_norm, EquivalenceSetup, ModSpec};
use modspace::periodic::{periodic_equivalence_study, translated_cell_norms, LocalExponent, PeriodicGroup, PeriodicSetup};
use modspace::stft::{stft, stft_at, stft_trigpoly};
use modspace::study::{RunOptions, StudyConfig};
use modspace::wiener::{embedding_check_rel1, wiener_norm, WienerSpec};
use modspace::{
    Codomain, Complex64, ExponentVector, GridSpec, LatticeSequence, MixedNormSpec, OrderedBasis, SampledField,
    TrigPolynomial, Weight, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ev(items: &[&str]) -> ExponentVector {
    ExponentVector::parse(items).unwrap()
}

fn exponent(s: &str) -> Exponent {
    s.parse().unwrap()
}

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().min(b.abs())
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phase_grid(m: usize, lo: i64, hi: i64) -> GridSpec {
    GridSpec::uniform(OrderedBasis::standard(2), m, lo, hi).unwrap()
}

fn line_grid(m: usize, lo: i64, hi: i64) -> GridSpec {
    GridSpec::uniform(OrderedBasis::standard(1), m, lo, hi).unwrap()
}

fn stft_oracle() -> Outcome {
    let start = Instant::now();
    let f = TestFunction::Gaussian { sigma: 1.0, center: 0.0 }.sample(line_grid(16, -20, 19)).unwrap();
    let mut points = Vec::new();
    for i in -160..=160 {
        for j in -160..=160 {
            points.push(vec![i as f64 * 0.05, j as f64 * 0.05]);
        }
    }
    let values = stft_at(&f, &Window::gaussian(1, 1.0), &points).unwrap();
    let peak = (2.0 * PI).powf(-0.5);
    let mut worst: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for (p, v) in points.iter().zip(&values) {
        let (x, xi) = (p[0], p[1]);
        let exact = Complex64::from_polar(peak * (-(x * x + xi * xi) / 4.0).exp(), -x * xi / 2.0);
        worst = worst.max((v - exact).norm() / peak);
        worst_abs = worst_abs.max((v.norm() - exact.norm()).abs() / peak);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-6 && secs <= 30.0,
        format!("max error relative to peak {worst:.2e} (modulus only {worst_abs:.2e}), {secs:.1} s"),
    )
}

fn moyal_anchor() -> Outcome {
    let t_grid = line_grid(16, -20, 19);
    let f = TestFunction::Gaussian { sigma: 1.0, center: 0.0 }.sample(t_grid).unwrap();
    let v = stft(&f, &Window::gaussian(1, 1.0), &phase_grid(4, -8, 7)).unwrap();
    let std1 = OrderedBasis::standard(1);
    let l2 = mod_norm(&v, &ModSpec::new(std1.clone(), std1.clone(), ev(&["2"]), ev(&["2"]), Weight::one(2))).unwrap();
    let per = TrigPolynomial::two_pi_periodic(1).period().clone();
    let e = TrigPolynomial::from_terms(per, &[(vec![1], Complex64::new(1.0, 0.0))]);
    let grid = GridSpec::new(OrderedBasis::standard(2), vec![4, 8], vec![(-3, 2), (-9, 10)]).unwrap();
    let ve = stft_trigpoly(&e, &Window::gaussian(1, 1.0), &grid).unwrap();
    let m = mod_norm(&ve, &ModSpec::new(std1.clone(), std1, ev(&["inf"]), ev(&["2"]), Weight::one(2))).unwrap();
    check(
        (l2 - 1.0).abs() <= 1e-6 && (m - 1.0).abs() <= 1e-6,
        format!("|V f|_L2 = {l2:.12}, |e^(it)|_M(inf,2) = {m:.12}"),
    )
}

fn periodicity() -> Outcome {
    let polys = trig_corpus(DEFAULT_SEED);
    let xi = line_grid(2, -6, 5);
    let shifts: Vec<usize> = (0..20).collect();
    let mut worst: f64 = 0.0;
    for p in &polys {
        for r in [0.5, 1.0, 2.0, f64::INFINITY] {
            let n = translated_cell_norms(p, &Window::gaussian(1, 1.0), &xi, 32, r, &shifts).unwrap();
            for (k, base) in n[0].iter().enumerate() {
                let (lo, hi) = n.iter().map(|s| s[k]).fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(v), b.max(v)));
                if *base > 1e-300 {
                    worst = worst.max((hi - lo) / base);
                }
            }
        }
    }
    check(worst <= 1e-9, format!("{} polynomials, 20 shifts, max relative variation {worst:.2e}", polys.len()))
}

/// Random field constant on half-cells of the unit square lattice.
fn piecewise_constant(rng: &mut ChaCha8Rng) -> SampledField {
    let grid = GridSpec::uniform(OrderedBasis::standard(2), 4, -3, 2).unwrap();
    let n = 12;
    let pieces: Vec<Complex64> = (0..n * n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }
        })
        .collect();
    SampledField::from_fn(grid, Codomain::Function, |x| {
        let i = ((x[0] + 3.0) * 2.0).floor() as usize;
        let j = ((x[1] + 3.0) * 2.0).floor() as usize;
        pieces[i + n * j]
    })
    .unwrap()
}

fn local_norm_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst: f64 = 0.0;
    let settings: [(&[&str], &[&str]); 3] = [(&["1/2", "1"], &["1/2", "1/2"]), (&["1", "inf"], &["1", "1"]), (&["2", "2"], &["1", "2"])];
    for _ in 0..100 {
        let f = piecewise_constant(&mut rng);
        for (p, r) in settings {
            let (p, r) = (ev(p), ev(r));
            let lp = mixed_norm(&f, &MixedNormSpec::new(f.grid.basis.clone(), p.clone(), Weight::one(2))).unwrap();
            let seq = wiener_norm(&f, &WienerSpec::new(r, OrderedBasis::standard(2), p)).unwrap();
            worst = worst.max(seq / lp);
        }
    }
    check(worst <= 1.0 + 1e-9, format!("100 fields x 3 exponent settings, max |a|/|f| = {worst:.12}"))
}

fn embedding_constants(k: usize) -> Vec<([[f64; 2]; 2], [f64; 3], [f64; 3])> {
    let grid = GridSpec::uniform(OrderedBasis::standard(2), 2 * k, -20, 19).unwrap();
    let t_grid = line_grid(8 * k, -26, 25);
    let w = Window::gaussian(1, 1.0);
    standard_corpus(DEFAULT_SEED)
        .iter()
        .map(|e| {
            let v = e.function.stft(&w, &grid, &t_grid).unwrap();
            let c = embedding_check_rel1(&v, &ev(&["1"]), &ev(&["2"]), &ev(&["1"]), 0.5, 1.0, &Weight::one(2)).unwrap();
            (c.ratios(), c.chain1, c.chain2)
        })
        .collect()
}

fn embedding_chains() -> Outcome {
    let coarse = embedding_constants(1);
    let fine = embedding_constants(2);
    let mut first: f64 = 0.0;
    let mut change: f64 = 0.0;
    for (a, b) in coarse.iter().zip(&fine) {
        first = first.max(a.0[0][0]).max(a.0[1][0]).max(b.0[0][0]).max(b.0[1][0]);
        for (ca, cb) in [(&a.1, &b.1), (&a.2, &b.2)] {
            change = change.max(rel_change(ca[1] / ca[2], cb[1] / cb[2]));
        }
    }
    check(
        first <= 1.0 + 1e-9 && change <= 0.1,
        format!("{} functions, max first-inequality constant {first:.12}, max second-constant change {:.2}%", coarse.len(), 100.0 * change),
    )
}

fn non_periodic_corpus() -> Vec<CorpusEntry> {
    standard_corpus(DEFAULT_SEED).into_iter().filter(|e| !e.function.is_periodic()).collect()
}

fn sup_spreads(corpus: &[CorpusEntry], p: &[&str], k: usize, window: &Window) -> (Vec<f64>, f64, f64) {
    let setup = EquivalenceSetup {
        grid: GridSpec::uniform(OrderedBasis::standard(2), 2 * k, -28, 27).unwrap(),
        t_grid: line_grid(8 * k, -34, 33),
        p: ev(p),
        weight: Weight::one(2),
        window1: window.clone(),
        window2: window.clone(),
        r_list: vec![0.5, 1.0, f64::INFINITY],
        threads: 4,
    };
    let table = equivalence_study(corpus, &setup).unwrap();
    let ratios: Vec<f64> = table.rows.iter().flat_map(|r| r.ratio_to_sup()).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    (table.spreads_to_sup(), lo, hi)
}

fn wiener_equivalence() -> Outcome {
    let corpus = non_periodic_corpus();
    let gauss = Window::gaussian(1, 1.0);
    let herm = Window::hermite(1, 0, 1.5);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut change: f64 = 0.0;
    for p in [&["1/2", "1/2"][..], &["1", "2"], &["inf", "1"]] {
        let (base, l0, h0) = sup_spreads(&corpus, p, 1, &gauss);
        let (fine, l1, h1) = sup_spreads(&corpus, p, 2, &gauss);
        let (swap, l2, h2) = sup_spreads(&corpus, p, 1, &herm);
        lo = lo.min(l0).min(l1).min(l2);
        hi = hi.max(h0).max(h1).max(h2);
        for k in 0..base.len() {
            change = change.max(rel_change(base[k], fine[k])).max(rel_change(base[k], swap[k]));
        }
    }
    check(
        lo > 0.0 && hi <= 1.0 + 1e-9 && change <= 0.1,
        format!("{} functions, ratios in [{lo:.4}, {hi:.12}], max spread change {:.2}%", corpus.len(), 100.0 * change),
    )
}

fn gabor_suite() -> Outcome {
    let start = Instant::now();
    let len = 64;
    let system = GaborSystem::new(sample_window(&Window::gaussian(1, 1.0), len).unwrap(), 4, 8).unwrap();
    let report = system.frame_report();
    let dual = system.canonical_dual().unwrap();
    let phi0 = sample_window(&Window::hermite(1, 0, 1.25), len).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let mut err: f64 = 0.0;
    let mut defect = f64::NEG_INFINITY;
    for _ in 0..50 {
        let f: Vec<Complex64> =
            (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let back = system.reconstruct(&dual, &f).unwrap();
        let e: f64 = f.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let n: f64 = f.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        err = err.max(e / n);
        defect = defect.max(window_change_domination(&f, &system, &phi0).unwrap().defect);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        report.is_frame && err <= 1e-8 && defect <= 1e-6 && secs <= 60.0,
        format!(
            "A = {:.4}, B = {:.4}, reconstruction error {err:.2e}, domination defect {defect:.3e}, {secs:.1} s",
            report.lower, report.upper
        ),
    )
}

fn young_max(p: &[&str], r: &[&str], periodic: Vec<bool>, m: usize) -> f64 {
    let study = YoungStudy {
        setup: YoungSetup::unweighted(ev(p), ev(r), periodic),
        batches: 50,
        seed: 8,
        m,
        half_width: 10,
        terms: 4,
    };
    young_study(&study).unwrap().max
}

fn nonnegative_l1_equality() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let grid = line_grid(16, -10, 9);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut a = LatticeSequence::new(1);
        for j in -2..=2 {
            a.insert(vec![j], Complex64::new(rng.gen_range(0.0..1.0), 0.0));
        }
        let c = rng.gen_range(-1.0..1.0);
        let f = SampledField::from_fn(grid.clone(), Codomain::Function, |x| {
            let s = x[0] - c;
            Complex64::new(if s.abs() < 3.0 { (1.0 - s * s / 9.0).powi(2) } else { 0.0 }, 0.0)
        })
        .unwrap();
        let setup = YoungSetup::unweighted(ev(&["1"]), ev(&["1"]), vec![false]);
        worst = worst.max((young_estimate_check(&a, &f, &setup).unwrap() - 1.0).abs());
    }
    worst
}

fn young_estimate() -> Outcome {
    let settings: [(&[&str], &[&str], Vec<bool>); 3] =
        [(&["1"], &["1"], vec![false]), (&["1/2"], &["1/2"], vec![false]), (&["1", "2"], &["1", "1"], vec![true, false])];
    let mut worst: f64 = 0.0;
    let mut change: f64 = 0.0;
    for (p, r, periodic) in settings {
        let a = young_max(p, r, periodic.clone(), 8);
        let b = young_max(p, r, periodic, 16);
        worst = worst.max(a).max(b);
        change = change.max(rel_change(a, b));
    }
    let eq = nonnegative_l1_equality();
    check(
        worst <= 1.0 + 1e-9 && change <= 0.1 && eq <= 1e-10,
        format!("max constant {worst:.6}, max refinement change {:.2}%, L1 equality defect {eq:.1e}", 100.0 * change),
    )
}

fn periodic_setup(m: usize) -> PeriodicSetup {
    PeriodicSetup {
        window: Window::gaussian(1, 1.0),
        q_list: vec![exponent("1/2"), exponent("1"), exponent("2")],
        r_list: vec![LocalExponent::Fixed(exponent("1/2")), LocalExponent::MatchQ, LocalExponent::Fixed(exponent("inf"))],
        weights: vec![("one".into(), Weight::one(1)), ("bracket".into(), Weight::polynomial(1, 1.0))],
        m_x: m,
        m_xi: m,
        threads: 4,
    }
}

fn row_ratios(g: &PeriodicGroup) -> Vec<f64> {
    g.rows.iter().flat_map(|r| std::iter::once(r.stft_ratio()).chain(r.integral_ratio())).collect()
}

fn periodic_headline() -> Outcome {
    let corpus: Vec<(String, TrigPolynomial)> =
        trig_corpus(DEFAULT_SEED).into_iter().enumerate().map(|(k, p)| (format!("trig-{k}"), p)).collect();
    let scaled: Vec<_> = corpus.iter().map(|(id, p)| (id.clone(), p.scale(Complex64::new(-2.5, 4.0)))).collect();
    let shifted: Vec<_> = corpus.iter().map(|(id, p)| (id.clone(), p.shift_frequency(&[3]))).collect();
    let base = periodic_equivalence_study(&corpus, &periodic_setup(8)).unwrap();
    let fine = periodic_equivalence_study(&corpus, &periodic_setup(16)).unwrap();
    let sc = periodic_equivalence_study(&scaled, &periodic_setup(8)).unwrap();
    let sh = periodic_equivalence_study(&shifted, &periodic_setup(8)).unwrap();
    let mut finite = true;
    let (mut scale_dev, mut shift_dev, mut change): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (((b, f), s), t) in base.iter().zip(&fine).zip(&sc).zip(&sh) {
        let rb = row_ratios(b);
        finite &= rb.iter().all(|v| v.is_finite() && *v > 0.0);
        for (x, y) in rb.iter().zip(row_ratios(s)) {
            scale_dev = scale_dev.max((x - y).abs() / x);
        }
        if b.weight == "one" {
            for (x, y) in rb.iter().zip(row_ratios(t)) {
                shift_dev = shift_dev.max((x - y).abs() / x);
            }
        }
        change = change.max(rel_change(b.stft_spread(), f.stft_spread()));
        if let (Some(x), Some(y)) = (b.integral_spread(), f.integral_spread()) {
            change = change.max(rel_change(x, y));
        }
    }
    let per = TrigPolynomial::two_pi_periodic(1).period().clone();
    let e = TrigPolynomial::from_terms(per, &[(vec![1], Complex64::new(1.0, 0.0))]);
    let anchor_setup = PeriodicSetup {
        q_list: vec![exponent("2")],
        r_list: vec![LocalExponent::Fixed(exponent("inf"))],
        weights: vec![("one".into(), Weight::one(1))],
        ..periodic_setup(8)
    };
    let anchor = periodic_equivalence_study(&[("exp".into(), e)], &anchor_setup).unwrap()[0].rows[0].stft_ratio();
    check(
        finite && scale_dev <= 1e-12 && shift_dev <= 1e-9 && change <= 0.05 && (anchor - 1.0).abs() <= 1e-6,
        format!(
            "finite {finite}, scale deviation {scale_dev:.1e}, shift deviation {shift_dev:.1e}, spread change {:.3}%, anchor {anchor:.12}",
            100.0 * change
        ),
    )
}

fn determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../studies");
    let mut names: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.file_name().unwrap() != "schema.json")
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for cfg in &names {
        let study = StudyConfig::load(cfg).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = study.run(a.path(), RunOptions { threads: 1, resolution_scale: 1 }).unwrap();
        let pb = study.run(b.path(), RunOptions { threads: 4, resolution_scale: 1 }).unwrap();
        if std::fs::read(pa).unwrap() != std::fs::read(pb).unwrap() {
            differing.push(cfg.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    check(differing.is_empty(), format!("{} studies, differing: {differing:?}", names.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("STFT closed form", stft_oracle),
        ("Moyal and single-exponential anchors", moyal_anchor),
        ("periodicity of cell norms", periodicity),
        ("sequence norm bounded by function norm", local_norm_bound),
        ("embedding chains", embedding_chains),
        ("Wiener local-exponent equivalence", wiener_equivalence),
        ("Gabor frame suite", gabor_suite),
        ("Young estimate", young_estimate),
        ("periodic norm equivalence", periodic_headline),
        ("determinism", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p wisense --test acceptance -- --nocapture` to see
//! the report; the target fails if any criterion fails.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use wisense::channel::{apply_scene, GestureLabel, ScattererKind, Scene, ScattererTrack};
use wisense::doppler::{caf_batch, CafConfig};
use wisense::monitor::{build_transitions, summarize, viterbi, IntensityTrace, TransitionModel};
use wisense::recognition::{class_residuals, segment, src_classify, Dictionary, FeatureVector, PcaModel, SegmentConfig, SparseCode};
use wisense::respiration::{hampel, phase_sensitivity, PhaseTrace};
use wisense::scenario::{run_suite, GestureSuiteConfig, RespirationScenario};
use wisense::waveform::{
    apply_frequency_response, estimate_csi, find_bursts, gen_beacon_train, gen_ofdm_stream, subcarrier_groups,
    IqTrace, OfdmModulator, SymbolKind, WaveformConfig, CARRIER_2G4_HZ, CARRIER_5G8_HZ,
};
use wisense::{C64, SPEED_OF_LIGHT};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn phase_sensitivity_values() -> Outcome {
    let cases = [
        (0.005, CARRIER_2G4_HZ, 0.25),
        (0.02, CARRIER_2G4_HZ, 1.0),
        (0.005, CARRIER_5G8_HZ, 0.6),
        (0.02, CARRIER_5G8_HZ, 2.4),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (d, fc, want) in cases {
        let got = phase_sensitivity(d, SPEED_OF_LIGHT / fc).unwrap();
        worst = worst.max((got - want).abs() / want);
        parts.push(format!("{got:.4}"));
    }
    outcome(
        worst <= 0.02,
        format!("[{}] rad, worst deviation {:.2}% (tol 2%)", parts.join(", "), 100.0 * worst),
    )
}

fn beacon_cadence() -> Outcome {
    let cfg = WaveformConfig::default();
    let train = gen_beacon_train(&cfg, 1.0, 1).unwrap();
    let n = find_bursts(&train).len();
    outcome(n == 10, format!("{n} bursts in 1 s at {} MHz (want 10)", cfg.sample_rate_hz / 1e6))
}

fn caf_tone_test() -> Outcome {
    let fs = 4000.0;
    let wf = WaveformConfig::sensing(CARRIER_2G4_HZ, fs);
    let cfg = CafConfig::default();
    let seeds = 4u64;
    let (mut trials, mut worst, mut failures) = (0, 0.0f64, 0);
    for f in 1..=50 {
        for seed in 0..seeds {
            let r = gen_ofdm_stream(&wf, 1.5, 100 * f + seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + 100 * f + seed);
            let p = r.mean_power();
            let normal = Normal::new(0.0, (p / 2.0).sqrt()).unwrap();
            let samples = r
                .samples
                .iter()
                .enumerate()
                .map(|(n, x)| {
                    x * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f as f64 * n as f64 / fs)
                        + C64::new(normal.sample(&mut rng), normal.sample(&mut rng))
                })
                .collect();
            let s = IqTrace { samples, ..r.clone() };
            let spec = caf_batch(&r, &s, &cfg).unwrap();
            for peak in spec.peak_doppler() {
                trials += 1;
                let err = (peak - f as f64).abs();
                worst = worst.max(err);
                if err > 2.0 {
                    failures += 1;
                }
            }
        }
    }
    outcome(
        failures == 0,
        format!("{trials} batches over 1..50 Hz at 0 dB SNR, worst error {worst:.2} Hz, {failures} over 2 Hz"),
    )
}

fn case1_respiration() -> Outcome {
    let sc = RespirationScenario::default();
    let runs = 20;
    let results: Vec<f64> = (0..runs)
        .map(|seed| sc.run(seed).map(|(_, r)| r.estimate.rate_hz).unwrap_or(f64::NAN))
        .collect();
    let ok = results.iter().filter(|r| ((*r - sc.rate_hz) / sc.rate_hz).abs() <= 0.05).count();
    let worst = results.iter().map(|r| ((r - sc.rate_hz) / sc.rate_hz).abs()).fold(0.0, f64::max);
    outcome(
        ok * 100 >= 95 * runs as usize,
        format!("{ok}/{runs} runs within 5% of {} Hz (need >= 95%), worst {:.2}%", sc.rate_hz, 100.0 * worst),
    )
}

fn exhaustive_label(y: &[f64], dict: &Dictionary, k: usize) -> (Vec<f64>, SparseCode) {
    let n = dict.n_atoms();
    let mut best: Option<(f64, SparseCode)> = None;
    let mut consider = |support: Vec<usize>| {
        let coef = dict.least_squares(y, &support).unwrap();
        let approx = dict.synthesize(&support, &coef);
        let r = y.iter().zip(&approx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if best.as_ref().map_or(true, |(b, _)| r < *b) {
            best = Some((
                r,
                SparseCode {
                    support,
                    coefficients: coef,
                    residual_norms: vec![r],
                },
            ));
        }
    };
    for a in 0..n {
        consider(vec![a]);
        if k >= 2 {
            for b in a + 1..n {
                consider(vec![a, b]);
                if k >= 3 {
                    for c in b + 1..n {
                        consider(vec![a, b, c]);
                    }
                }
            }
        }
    }
    let code = best.unwrap().1;
    (class_residuals(y, dict, &code), code)
}

fn argmin_class(res: &[f64], dict: &Dictionary) -> GestureLabel {
    let mut best = dict.classes()[0];
    for c in dict.classes() {
        if res[c.index()] < res[best.index()] {
            best = c;
        }
    }
    best
}

fn omp_vs_exhaustive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (mut accepted, mut agree, mut same_support, mut drawn) = (0, 0, 0, 0);
    while accepted < 200 && drawn < 20_000 {
        drawn += 1;
        let n_atoms = rng.gen_range(6..=12);
        let dim = rng.gen_range(16..=32);
        let k = rng.gen_range(1..=3);
        let n_classes = rng.gen_range(2..=6usize);
        let atoms: Vec<Vec<f64>> = (0..n_atoms).map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect()).collect();
        let labels: Vec<GestureLabel> = (0..n_atoms).map(|i| GestureLabel::ALL[i % n_classes]).collect();
        let dict = Dictionary::from_features(atoms, labels).unwrap();
        let class = GestureLabel::ALL[rng.gen_range(0..n_classes)];
        let members: Vec<usize> = (0..n_atoms).filter(|&i| dict.label(i) == class).collect();
        let mut y = vec![0.0; dim];
        for &i in members.iter().take(k) {
            let c = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            y.iter_mut().zip(dict.atom(i)).for_each(|(v, a)| *v += c * a);
        }
        y.iter_mut().for_each(|v| *v += 0.01 * normal.sample(&mut rng));
        let (res, code) = exhaustive_label(&y, &dict, k);
        let mut sorted: Vec<f64> = dict.classes().iter().map(|c| res[c.index()]).collect();
        sorted.sort_by(f64::total_cmp);
        if sorted.len() < 2 || sorted[1] - sorted[0] < 0.1 * sorted[1] {
            continue;
        }
        accepted += 1;
        let want = argmin_class(&res, &dict);
        let got = src_classify(&FeatureVector { coefficients: y.clone() }, &dict, k, 1e-12).unwrap();
        agree += usize::from(got.label == want);
        let mut a = got.code.support.clone();
        let mut b = code.support.clone();
        a.sort_unstable();
        b.sort_unstable();
        same_support += usize::from(a == b);
    }
    outcome(
        accepted >= 200 && agree == accepted,
        format!("{agree}/{accepted} labels agree with exhaustive search ({same_support} identical supports)"),
    )
}

fn case2_gestures() -> Outcome {
    let cfg = GestureSuiteConfig::default();
    let (_, report) = run_suite(&cfg, 2024).unwrap();
    println!("      confusion matrix (rows true g1..g6, columns predicted):");
    for (g, row) in GestureLabel::ALL.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:3}")).collect();
        println!("        {} {}", g.code(), cells.join(" "));
    }
    let pass = report.src_accuracy >= 0.90 && report.src_accuracy >= report.knn_accuracy - 0.02;
    outcome(
        pass,
        format!(
            "SRC accuracy {:.3} (need >= 0.90), k-NN {:.3}, {} train / {} test, {} undetected; confusion (true rows g1..g6) [{}]",
            report.src_accuracy,
            report.knn_accuracy,
            report.n_train,
            report.n_test,
            report.n_undetected,
            report
                .confusion
                .iter()
                .map(|row| row.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join(" | ")
        ),
    )
}

fn daily_summary() -> Outcome {
    let mut v = Vec::new();
    v.extend(std::iter::repeat(0.1).take(1080));
    v.extend(std::iter::repeat(0.55).take(313));
    v.extend(std::iter::repeat(0.3).take(245));
    v.extend(std::iter::repeat(0.85).take(166));
    let trace = IntensityTrace::from_intensities(0.0, 30.0, &v).unwrap();
    let s = summarize(&trace, 0.4, 0.7).unwrap();
    let pass = s.sedentary_min == 662.5
        && s.moderate_min == 156.5
        && s.vigorous_min == 83.0
        && s.total_min == 902.0
        && s.sedentary_excluding_sleep_min == 122.5
        && s.total_excluding_sleep_min == 362.0;
    outcome(
        pass,
        format!(
            "{{{}, {}, {}}} total {}; excluding sleep {{{}, {}, {}}} total {}",
            s.sedentary_min,
            s.moderate_min,
            s.vigorous_min,
            s.total_min,
            s.sedentary_excluding_sleep_min,
            s.moderate_min,
            s.vigorous_min,
            s.total_excluding_sleep_min
        ),
    )
}

fn brute_force_path(e: &[Vec<f64>], m: &TransitionModel, init: &[f64]) -> Vec<usize> {
    let n = m.n_states();
    let ln = |p: f64| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for code in 0..n.pow(e.len() as u32) {
        let path: Vec<usize> = (0..e.len()).map(|t| code / n.pow((e.len() - 1 - t) as u32) % n).collect();
        let mut s = ln(init[path[0]]) + e[0][path[0]];
        for t in 1..e.len() {
            s += ln(m.probabilities[path[t - 1]][path[t]]) + e[t][path[t]];
        }
        if s > best.1 {
            best = (path, s);
        }
    }
    best.0
}

fn viterbi_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut agree, mut violations) = (0, 0);
    let cases = 1000;
    for _ in 0..cases {
        let n = rng.gen_range(2..=4);
        let frames = rng.gen_range(1..=5);
        let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let counts: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(0.1..5.0)).collect()).collect();
        let forbidden: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .filter(|_| rng.gen_bool(0.3))
            .collect();
        let m = build_transitions(&names, &counts, &forbidden).unwrap();
        let e: Vec<Vec<f64>> = (0..frames).map(|_| (0..n).map(|_| rng.gen_range(-6.0..0.0)).collect()).collect();
        let init = vec![1.0 / n as f64; n];
        let path = viterbi(&e, &m, &init).unwrap();
        agree += usize::from(path == brute_force_path(&e, &m, &init));
        violations += path.windows(2).filter(|w| forbidden.contains(&(w[0], w[1]))).count();
    }
    outcome(
        agree == cases && violations == 0,
        format!("{agree}/{cases} paths equal exhaustive enumeration, {violations} forbidden transitions decoded"),
    )
}

fn invariant_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failed = Vec::new();

    // CSI round trip
    let cfg = WaveformConfig::default();
    let modem = OfdmModulator::new(&cfg).unwrap();
    let groups = subcarrier_groups(cfg.n_active, cfg.csi_groups);
    let mut csi_err: f64 = 0.0;
    for seed in 0..50 {
        let sym = modem.symbol_trace(SymbolKind::Preamble, seed);
        let per_group: Vec<C64> = (0..groups.len())
            .map(|_| C64::from_polar(rng.gen_range(0.1..2.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let mut gains = vec![C64::new(0.0, 0.0); cfg.n_active];
        for (g, r) in groups.iter().enumerate() {
            for i in r.clone() {
                gains[i] = per_group[g];
            }
        }
        let rx = apply_frequency_response(&sym, &cfg, &gains).unwrap();
        let csi = estimate_csi(&[rx], &cfg, &sym).unwrap();
        for (g, want) in per_group.iter().enumerate() {
            csi_err = csi_err.max((csi.get(0, g) - want).norm());
        }
    }
    if csi_err > 1e-6 {
        failed.push(format!("csi round trip {csi_err:e}"));
    }

    // channel linearity
    let wf = WaveformConfig::sensing(CARRIER_2G4_HZ, 2000.0);
    let scene = Scene {
        tx_pos: [0.0, 0.0, 1.0],
        ref_rx_pos: [0.0, 1.0, 1.0],
        surv_rx_pos: vec![[1.0, -1.0, 1.0], [-2.0, 2.0, 1.0]],
        scatterers: vec![ScattererTrack::new(vec![[0.0, 2.0, 1.0, 1.0], [1.0, 3.0, 2.0, 1.0]], 0.5, ScattererKind::Static).unwrap()],
        wall_attenuation_db: 6.0,
        direct_leakage_db: 20.0,
        noise_power: 0.0,
    };
    let a = gen_ofdm_stream(&wf, 0.9, 1).unwrap();
    let b = gen_ofdm_stream(&wf, 0.9, 2).unwrap();
    let (ca, cb) = (C64::new(0.7, -0.2), C64::new(-1.3, 0.4));
    let mix = IqTrace {
        samples: a.samples.iter().zip(&b.samples).map(|(x, y)| ca * x + cb * y).collect(),
        ..a.clone()
    };
    let (oa, ob, om) = (apply_scene(&a, &scene, 0).unwrap(), apply_scene(&b, &scene, 0).unwrap(), apply_scene(&mix, &scene, 0).unwrap());
    let mut lin_err: f64 = 0.0;
    for c in 0..2 {
        for n in 0..a.len() {
            let want = ca * oa.surveillance[c].samples[n] + cb * ob.surveillance[c].samples[n];
            lin_err = lin_err.max((om.surveillance[c].samples[n] - want).norm());
        }
    }
    if lin_err > 1e-9 {
        failed.push(format!("channel linearity {lin_err:e}"));
    }

    // Hampel idempotence on breathing-like traces with spikes
    let mut hampel_bad = 0;
    for _ in 0..50 {
        let rate = rng.gen_range(0.15..0.45);
        let mut v: Vec<f64> = (0..400)
            .map(|i| (2.0 * std::f64::consts::PI * rate * i as f64 * 0.1).sin() + 0.05 * rng.gen_range(-1.0..1.0))
            .collect();
        for _ in 0..8 {
            let i = rng.gen_range(0..v.len());
            v[i] += rng.gen_range(-5.0..5.0);
        }
        let t = PhaseTrace::new(v, 0.1, 0.0).unwrap();
        let once = hampel(&t, 11, 3.0).unwrap();
        let twice = hampel(&once, 11, 3.0).unwrap();
        hampel_bad += usize::from(once.phase_rad != twice.phase_rad);
    }
    if hampel_bad > 0 {
        failed.push(format!("hampel idempotence failed on {hampel_bad}/50 traces"));
    }

    // PCA orthonormality and diagonal projected covariance
    let (mut ortho_err, mut offdiag): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let (n, dim) = (rng.gen_range(10..60), rng.gen_range(3..40));
        let k = rng.gen_range(1..=dim.min(n - 1));
        let samples: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|j| rng.gen_range(-1.0..1.0) / (1.0 + j as f64)).collect()).collect();
        let m = PcaModel::fit(&samples, k).unwrap();
        for i in 0..k {
            for j in 0..k {
                let d: f64 = m.components[i].iter().zip(&m.components[j]).map(|(a, b)| a * b).sum();
                ortho_err = ortho_err.max((d - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        let proj: Vec<Vec<f64>> = samples.iter().map(|s| m.project(s).unwrap().coefficients).collect();
        for i in 0..k {
            for j in 0..i {
                let c = proj.iter().map(|p| p[i] * p[j]).sum::<f64>() / (n - 1) as f64;
                offdiag = offdiag.max(c.abs());
            }
        }
    }
    if ortho_err > 1e-8 || offdiag > 1e-6 {
        failed.push(format!("pca orthonormality {ortho_err:e}, off-diagonal covariance {offdiag:e}"));
    }

    // segment disjointness
    let mut seg_bad = 0;
    for _ in 0..50 {
        let nb = rng.gen_range(5..80);
        let axis: Vec<f64> = (-10..=10).map(|k| k as f64 * 2.0).collect();
        let rows: Vec<Vec<f64>> = (0..nb)
            .map(|_| axis.iter().map(|_| if rng.gen_bool(0.3) { rng.gen_range(0.0..10.0) } else { 0.0 }).collect())
            .collect();
        let times: Vec<f64> = (0..nb).map(|b| 0.25 + 0.25 * b as f64).collect();
        let spec = wisense::doppler::DopplerSpectrogram::new(rows, times, axis, 2.0).unwrap();
        let w = segment(&spec, &SegmentConfig::default()).unwrap();
        seg_bad += usize::from(!w.windows(2).all(|p| p[0].end_s <= p[1].start_s + 1e-12) || w.iter().any(|x| x.end_s <= x.start_s));
    }
    if seg_bad > 0 {
        failed.push(format!("segment disjointness failed on {seg_bad}/50"));
    }

    // summarize total conservation
    let mut sum_bad = 0;
    for _ in 0..100 {
        let v: Vec<f64> = (0..rng.gen_range(1..300)).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let epoch = [30.0, 60.0, 10.0][rng.gen_range(0..3)];
        let t = IntensityTrace::from_intensities(0.0, epoch, &v).unwrap();
        let t1 = rng.gen_range(0.05..0.5);
        let t2 = rng.gen_range(t1 + 0.01..0.99);
        let s = summarize(&t, t1, t2).unwrap();
        let total = v.len() as f64 * epoch / 60.0;
        if (s.sedentary_min + s.moderate_min + s.vigorous_min - total).abs() > 1e-9 || (s.total_min - total).abs() > 1e-9 {
            sum_bad += 1;
        }
    }
    if sum_bad > 0 {
        failed.push(format!("summarize conservation failed on {sum_bad}/100"));
    }

    let detail = if failed.is_empty() {
        format!("csi {csi_err:.1e}, linearity {lin_err:.1e}, hampel, pca, segment, summarize all hold")
    } else {
        failed.join("; ")
    };
    outcome(failed.is_empty(), detail)
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn demo_determinism() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for case in ["1", "2", "3"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut codes = Vec::new();
        for d in [&a, &b] {
            let out = d.path().to_str().unwrap().to_string();
            codes.push(wisense::cli::main_with_args(["wisense", "--seed", "7", "--out", &out, "demo", case]));
        }
        let (sa, sb) = (dir_snapshot(a.path()), dir_snapshot(b.path()));
        let same = codes == [0, 0] && !sa.is_empty() && sa == sb;
        pass &= same;
        parts.push(format!("case {case}: {} files {}", sa.len(), if same { "identical" } else { "DIFFER" }));
    }
    outcome(pass, parts.join(", "))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("phase sensitivity", phase_sensitivity_values),
        ("beacon cadence", beacon_cadence),
        ("CAF tone test", caf_tone_test),
        ("case 1 respiration", case1_respiration),
        ("SRC oracle equivalence", omp_vs_exhaustive),
        ("case 2 gesture suite", case2_gestures),
        ("daily summary round trip", daily_summary),
        ("Viterbi oracle", viterbi_oracle),
        ("invariant suites", invariant_suites),
        ("demo determinism", demo_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|x| *x == id || name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!o.pass);
        println!("{status} {id:>2} {name}: {} ({:.1} s)", o.detail, start.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
}

//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p photonsim-cli --test acceptance`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_8, PI};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use photonsim_core::entangle::{chsh, correlation, make_pair, measure_pair, measure_sequential, no_signaling_check, ChshSettings};
use photonsim_core::entropy::{collapse_entropy_report, shannon_entropy, ProbabilityVector};
use photonsim_core::interferometer::{choice_timing_invariance, run_mzi, MziConfig};
use photonsim_core::optics::{cascade_analytic, cascade_mc, natural_light, sandwich_axes, Source};
use photonsim_core::protocol::{run_protocol, EncodingRule, ReceiverStrategy, DEFAULT_SHUFFLES};
use photonsim_core::quantum::{MeasurementBasis, StateVector};
use photonsim_core::rng::stream_from_seed;
use photonsim_core::stats::{binomial_sigma, BinomialEstimate, GOLDEN_SIGMAS, SWEEP_SIGMAS};
use photonsim_core::Complex64;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(est: &BinomialEstimate, p: f64, k: f64, what: &str) -> Result<(), String> {
    check(
        est.within_sigmas(p, k),
        format!("{what}: {} vs {p} ({:.2}σ, band {k}σ)", est.point, (est.point - p) / binomial_sigma(p, est.trials)),
    )
}

fn crossed_polarizers() -> Outcome {
    let axes = [FRAC_PI_2, 0.0];
    let exact = cascade_analytic(&natural_light(), &axes).map_err(|e| e.to_string())?.fractions();
    check(exact == vec![0.5, 0.0], format!("analytic stages {exact:?}"))?;
    let n = 1_000_000;
    let mc = cascade_mc(n, &axes, Source::Natural, 1).map_err(|e| e.to_string())?;
    let counts = mc.counts().expect("MC counts");
    within(&BinomialEstimate::new(counts[0], n).unwrap(), 0.5, GOLDEN_SIGMAS, "stage 1")?;
    check(counts[1] == 0, format!("stage 2 count {}", counts[1]))?;
    Ok(format!("analytic (0.5, 0.0); MC stage 1 = {}, stage 2 count = 0", counts[0] as f64 / n as f64))
}

fn three_polarizers() -> Outcome {
    let axes = [FRAC_PI_2, FRAC_PI_4, 0.0];
    let exact = cascade_analytic(&natural_light(), &axes).map_err(|e| e.to_string())?.fractions();
    for (got, want) in exact.iter().zip([0.5, 0.25, 0.125]) {
        check((got - want).abs() <= 1e-12, format!("analytic stages {exact:?}"))?;
    }
    let n = 1_000_000;
    let mc = cascade_mc(n, &axes, Source::Natural, 2).map_err(|e| e.to_string())?;
    let last = *mc.counts().expect("MC counts").last().unwrap();
    within(&BinomialEstimate::new(last, n).unwrap(), 0.125, GOLDEN_SIGMAS, "final stage")?;
    Ok(format!("analytic {exact:?}; MC final = {}", last as f64 / n as f64))
}

fn malus_sweep() -> Outcome {
    let mut best = (0, f64::MIN);
    let mut worst_err: f64 = 0.0;
    for deg in 1..=89 {
        let theta = f64::from(deg).to_radians();
        let v = *cascade_analytic(&natural_light(), &sandwich_axes(theta)).map_err(|e| e.to_string())?.fractions().last().unwrap();
        let formula = 0.5 * theta.cos().powi(2) * (FRAC_PI_2 - theta).cos().powi(2);
        worst_err = worst_err.max((v - formula).abs());
        if v > best.1 {
            best = (deg, v);
        }
    }
    check(best.0 == 45, format!("maximum at {}°", best.0))?;
    check(worst_err <= 1e-12, format!("max deviation from formula {worst_err:e}"))?;
    Ok(format!("argmax 45°, max deviation {worst_err:e}"))
}

fn entropy_claims() -> Outcome {
    let h_half = shannon_entropy(&ProbabilityVector::new(vec![0.5, 0.5]).unwrap());
    check((h_half - 1.0).abs() <= 1e-12, format!("H(0.5, 0.5) = {h_half}"))?;
    let h_certain = shannon_entropy(&ProbabilityVector::new(vec![1.0, 0.0]).unwrap());
    check(h_certain == 0.0, format!("H(1, 0) = {h_certain}"))?;
    let mut rng = stream_from_seed(4, 0);
    for case in 0..1000 {
        let a: Vec<f64> = (0..4).map(|_| rng.uniform() * 2.0 - 1.0).collect();
        let state = StateVector::new(vec![Complex64::new(a[0], a[1]), Complex64::new(a[2], a[3])]).map_err(|e| e.to_string())?;
        let basis = MeasurementBasis::new(rng.uniform() * 2.0 * PI).unwrap();
        let r = collapse_entropy_report(&state, &basis, &mut rng).map_err(|e| e.to_string())?;
        check(r.after_bits == 0.0, format!("case {case}: after_bits = {}", r.after_bits))?;
    }
    Ok(format!("H(½,½) = {h_half}, H(1,0) = 0, after_bits = 0 in 1000/1000 cases"))
}

fn entangled_pairs() -> Outcome {
    let pair = make_pair();
    let mut rng = stream_from_seed(5, 0);
    let mut trials = 0;
    for _ in 0..20 {
        let basis = MeasurementBasis::new(rng.uniform() * PI).unwrap();
        for i in 0..5_000 {
            let (a, b) = if i % 2 == 0 {
                let o = measure_pair(&pair, &basis, &basis, &mut rng);
                (o.outcome_a, o.outcome_b)
            } else {
                let o = measure_sequential(&pair, &basis, &basis, &mut rng).map_err(|e| e.to_string())?;
                (o.outcome_a, o.outcome_b)
            };
            check(a != b, format!("equal outcomes at θ = {}", basis.theta()))?;
            trials += 1;
        }
    }
    let target = -FRAC_PI_4.cos();
    let e = correlation(0.0, FRAC_PI_8, 1_000_000, 6).map_err(|e| e.to_string())?;
    let sigma = ((1.0 - target * target) / e.n as f64).sqrt();
    check((e.e_value - target).abs() <= GOLDEN_SIGMAS * sigma, format!("E(22.5°) = {} vs {target}", e.e_value))?;
    let s = chsh(&ChshSettings::standard(), 1_000_000, 7).map_err(|e| e.to_string())?;
    let s_target = 2.0 * 2f64.sqrt();
    check((s.s - s_target).abs() <= GOLDEN_SIGMAS * s.std_err, format!("S = {} ± {} vs {s_target}", s.s, s.std_err))?;
    Ok(format!("{trials} equal-basis trials all anti-correlated; E(22.5°) = {:.5}; S = {:.5} ± {:.5}", e.e_value, s.s, s.std_err))
}

fn no_signaling() -> Outcome {
    let td = no_signaling_check(&[0.0, FRAC_PI_4]).map_err(|e| e.to_string())?;
    check(td < 1e-12, format!("max trace distance {td:e}"))?;
    let rule = EncodingRule::default();
    let mut worst: f64 = 0.0;
    let strategies = ReceiverStrategy::standard_set();
    for (i, s) in strategies.iter().enumerate() {
        let r = run_protocol(100_000, &rule, s, 100 + i as u64, DEFAULT_SHUFFLES).map_err(|e| e.to_string())?;
        check(r.receiver_model == "standard-measurement", format!("{s} is not standard"))?;
        check(r.mutual_info_bits < 0.001, format!("{s}: MI = {}", r.mutual_info_bits))?;
        let (lo, hi) = r.mi_confidence_interval;
        check(lo <= 0.0 && 0.0 <= hi, format!("{s}: CI ({lo}, {hi}) excludes 0"))?;
        worst = worst.max(r.mutual_info_bits);
    }
    Ok(format!("trace distance {td:e}; {} standard receivers, max MI {worst:.2e} bits, all CIs contain 0", strategies.len()))
}

fn basis_oracle() -> Outcome {
    let r =
        run_protocol(100_000, &EncodingRule::default(), &ReceiverStrategy::BasisOracle, 8, DEFAULT_SHUFFLES).map_err(|e| e.to_string())?;
    check(r.ber == 0.0, format!("BER = {}", r.ber))?;
    check(r.mutual_info_bits == 1.0, format!("MI = {}", r.mutual_info_bits))?;
    Ok(format!("BER = {}, MI = {} ({})", r.ber, r.mutual_info_bits, r.receiver_model))
}

fn delayed_choice() -> Outcome {
    let n = 100_000;
    for k in 0..16u64 {
        let phi = k as f64 * 2.0 * PI / 16.0;
        let closed = run_mzi(&MziConfig::closed(phi), n, 10 + k).map_err(|e| e.to_string())?;
        let expected = (phi / 2.0).cos().powi(2);
        let est = BinomialEstimate::new(closed.count_d0, n).unwrap();
        if binomial_sigma(expected, n) == 0.0 {
            check(est.point == expected, format!("closed φ = {phi}: {}", est.point))?;
        } else {
            within(&est, expected, SWEEP_SIGMAS, &format!("closed φ = {phi:.4}"))?;
        }
        let open = run_mzi(&MziConfig::open(phi), n, 100 + k).map_err(|e| e.to_string())?;
        within(&BinomialEstimate::new(open.count_d0, n).unwrap(), 0.5, SWEEP_SIGMAS, &format!("open φ = {phi:.4}"))?;
    }
    let t = choice_timing_invariance(FRAC_PI_3, 0.5, 1_000_000, 9).map_err(|e| e.to_string())?;
    check(t.consistent, format!("timing report inconsistent: z = {:?}, {:?}", t.z_present, t.z_absent))?;
    let present = t.delayed.by_choice.expect("delayed breakdown").present.d0().expect("photons with the splitter present");
    within(&present, 0.75, SWEEP_SIGMAS, "D0 given present at φ = 60°")?;
    Ok(format!(
        "16 closed phases and 16 open phases within 4σ; delayed vs fixed z = {:.2} (present), {:.2} (absent)",
        t.z_present.unwrap_or(f64::NAN),
        t.z_absent.unwrap_or(f64::NAN)
    ))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_photonsim"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("PHOTONSIM_OUT_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
}

/// Result files of a run plus the manifest without its timing and worker fields.
fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir).map_err(|e| e.to_string())?.map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        if name == "manifest.json" {
            let mut m: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
            let obj = m.as_object_mut().ok_or("manifest is not an object")?;
            obj.remove("wall_time_seconds");
            obj.remove("workers");
            files.push((name, serde_json::to_vec(&m).unwrap()));
        } else {
            files.push((name, bytes));
        }
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: [&[&str]; 8] = [
        &["malus", "--mode", "mc", "--n", "200000"],
        &["malus", "--sweep", "--format", "csv"],
        &["entropy"],
        &["bell", "--n", "50000", "--n-chsh", "50000"],
        &["nosignal", "--n", "50000"],
        &["protocol", "--strategy", "fixed-basis-readout:0"],
        &["mzi", "--n", "50000", "--n-timing", "200000"],
        &["mzi", "--format", "csv", "--n", "50000", "--n-timing", "200000"],
    ];
    let mut compared = 0;
    for (i, cmd) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        // same output path every time, since the manifest echoes it
        let dir = tmp.path().join(format!("run-{i}"));
        for workers in [None, None, Some("4"), Some("1")] {
            if dir.exists() {
                std::fs::remove_dir_all(&dir).map_err(|e| e.to_string())?;
            }
            let mut args = cmd.to_vec();
            args.extend(["--seed", "2718"]);
            if let Some(w) = workers {
                args.extend(["--workers", w]);
            }
            run_cli(&dir, &args)?;
            runs.push(snapshot(&dir)?);
        }
        for (j, r) in runs.iter().enumerate().skip(1) {
            check(r == &runs[0], format!("{cmd:?}: run {j} differs from run 0"))?;
        }
        compared += runs[0].len();
    }
    Ok(format!("{} commands × 4 runs (default, repeat, --workers 4, --workers 1): {compared} files byte-identical", commands.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("crossed polarizers block natural light", crossed_polarizers),
        ("three polarizers pass one eighth", three_polarizers),
        ("middle-polarizer sweep peaks at 45°", malus_sweep),
        ("entropy before and after collapse", entropy_claims),
        ("entangled-pair correlations", entangled_pairs),
        ("no-signaling verdict for standard receivers", no_signaling),
        ("counterfactual basis-oracle receiver", basis_oracle),
        ("interferometer fringe and delayed choice", delayed_choice),
        ("CLI determinism across runs and workers", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

//! One runner per subcommand. Angles arrive in degrees and leave in degrees;
//! everything in between is radians.

use serde_json::json;

use photonsim_core::entangle::{
    bob_marginal_mc, bob_state_after_alice, chsh_with, correlation_analytic, correlation_with, no_signaling_check_with, ChshSettings,
    PairState,
};
use photonsim_core::entropy::collapse_entropy_report;
use photonsim_core::interferometer::{choice_timing_invariance, mzi_probabilities, run_mzi, MziConfig, MziStats};
use photonsim_core::optics::{cascade_analytic, cascade_mc, CascadeResult, Source};
use photonsim_core::protocol::{run_protocol, EncodingRule};
use photonsim_core::quantum::{MeasurementBasis, StateVector};
use photonsim_core::rng::{chunk_stream_index, stream_from_seed, RNG_ALGORITHM};
use photonsim_core::stats::{two_proportion_z, BinomialEstimate, SWEEP_SIGMAS};
use photonsim_core::Result;

use crate::config::{
    self, BellParams, EntropyParams, ExperimentConfig, MalusParams, Mode, MziParams, NosignalParams, PairKind, Parameters, ProtocolParams,
    SourceKind,
};
use crate::output::{Cell, RunOutput, Table};

/// Stream domain for the per-row collapses of the entropy grid.
const DOMAIN_ENTROPY: u64 = 96;

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let seed = config.seed;
    let (results, tables, summary) = match &config.parameters {
        Parameters::Malus(p) => malus(p, seed)?,
        Parameters::Entropy(p) => entropy(p, seed)?,
        Parameters::Bell(p) => bell(p, seed)?,
        Parameters::Nosignal(p) => nosignal(p, seed)?,
        Parameters::Protocol(p) => protocol(p, seed)?,
        Parameters::Mzi(p) => mzi(p, seed)?,
    };
    let results = json!({
        "experiment": config.experiment,
        "seed": seed,
        "rng_algorithm": RNG_ALGORITHM,
        "parameters": config.parameters.to_json(),
        "results": results,
    });
    Ok(RunOutput { results, tables, summary })
}

type Parts = (serde_json::Value, Vec<Table>, serde_json::Value);

/// Seed for row `row` of a sweep, so rows draw independent samples.
fn row_seed(seed: u64, row: u64) -> u64 {
    seed.wrapping_add(row)
}

fn rad(deg: f64) -> f64 {
    deg.to_radians()
}

fn pair(kind: PairKind) -> PairState {
    match kind {
        PairKind::Singlet => PairState::singlet(),
        PairKind::PsiPlus => PairState::psi_plus(),
    }
}

fn estimate_json(e: &BinomialEstimate) -> serde_json::Value {
    json!({ "successes": e.successes, "trials": e.trials, "point": e.point, "ci95": [e.ci95.0, e.ci95.1] })
}

fn run_cascade(p: &MalusParams, axes_deg: &[f64], seed: u64) -> Result<CascadeResult> {
    let source = match p.source {
        SourceKind::Natural => Source::Natural,
        SourceKind::Linear => Source::Linear(rad(p.source_angle_deg)),
    };
    let axes: Vec<f64> = axes_deg.iter().map(|d| rad(*d)).collect();
    match p.mode {
        Mode::Analytic => cascade_analytic(&source.beam()?, &axes),
        Mode::Mc => cascade_mc(p.n, &axes, source, seed),
    }
}

fn malus(p: &MalusParams, seed: u64) -> Result<Parts> {
    let result = run_cascade(p, &p.axes_deg, seed)?;
    let fractions = result.fractions();
    let mut stages = Table::new("stages", &["stage", "axis_deg", "count", "fraction", "ci_lo", "ci_hi"]);
    let mut stage_json = Vec::new();
    for (k, (axis, fraction)) in p.axes_deg.iter().zip(&fractions).enumerate() {
        let count = result.counts().map(|c| c[k]);
        let ci = count.map(|c| BinomialEstimate::new(c, p.n)).transpose()?.map(|e| e.ci95);
        stages.push(vec![
            (k as u64 + 1).into(),
            (*axis).into(),
            count.map_or(Cell::Text(String::new()), Cell::Int),
            (*fraction).into(),
            ci.map(|c| c.0).into(),
            ci.map(|c| c.1).into(),
        ]);
        stage_json.push(json!({
            "stage": k + 1,
            "axis_deg": axis,
            "count": count,
            "fraction": fraction,
            "ci95": ci.map(|c| [c.0, c.1]),
        }));
    }
    let mut tables = vec![stages];
    let mut summary = json!({ "final_fraction": fractions.last() });
    let mut sweep_json = serde_json::Value::Null;
    if p.sweep.enabled {
        let mut sweep = Table::new("sweep", &["theta_deg", "final_fraction"]);
        let mut rows = Vec::new();
        let mut best: Option<(f64, f64)> = None;
        for theta in p.sweep.grid() {
            // middle polarizer rotated by θ from the first of the crossed pair
            let axes_deg = [90.0, 90.0 - theta, 0.0];
            let last = *run_cascade(p, &axes_deg, seed)?.fractions().last().expect("three stages");
            if best.is_none_or(|(_, v)| last > v) {
                best = Some((theta, last));
            }
            sweep.push(vec![theta.into(), last.into()]);
            rows.push(json!({ "theta_deg": theta, "final_fraction": last }));
        }
        let (argmax, max) = best.expect("sweep grid is non-empty");
        sweep_json = json!({ "rows": rows, "argmax_deg": argmax, "max_final_fraction": max });
        summary["sweep_argmax_deg"] = json!(argmax);
        tables.push(sweep);
    }
    let results = json!({
        "mode": p.mode,
        "n_source": result.n_source,
        "stages": stage_json,
        "sweep": sweep_json,
    });
    Ok((results, tables, summary))
}

fn entropy(p: &EntropyParams, seed: u64) -> Result<Parts> {
    let basis = MeasurementBasis::new(rad(p.basis_deg))?;
    let mut table = Table::new("entropy", &["alpha_sq", "basis_deg", "before_bits", "outcome", "after_bits", "delta_bits"]);
    let mut rows = Vec::new();
    for (i, a) in p.alpha_sq.iter().enumerate() {
        let state = StateVector::qubit(a.sqrt(), (1.0 - a).sqrt())?;
        let mut rng = stream_from_seed(seed, chunk_stream_index(DOMAIN_ENTROPY, i as u64));
        let r = collapse_entropy_report(&state, &basis, &mut rng)?;
        table.push(vec![
            (*a).into(),
            p.basis_deg.into(),
            r.before_bits.into(),
            u64::from(r.outcome).into(),
            r.after_bits.into(),
            r.delta_bits.into(),
        ]);
        rows.push(json!({
            "alpha_sq": a,
            "basis_deg": p.basis_deg,
            "before_bits": r.before_bits,
            "outcome": r.outcome,
            "after_bits": r.after_bits,
            "delta_bits": r.delta_bits,
        }));
    }
    let max_after = rows.iter().filter_map(|r| r["after_bits"].as_f64()).fold(0.0, f64::max);
    Ok((json!({ "rows": rows }), vec![table], json!({ "rows": rows.len(), "max_after_bits": max_after })))
}

fn bell(p: &BellParams, seed: u64) -> Result<Parts> {
    let source = pair(p.state);
    let mut table = Table::new("correlation", &["delta_deg", "e_analytic", "e_mc", "std_err"]);
    let mut rows = Vec::new();
    if p.delta.enabled {
        for (row, delta) in p.delta.grid().into_iter().enumerate() {
            let exact = correlation_analytic(&source, 0.0, rad(delta))?;
            let mc = correlation_with(&source, 0.0, rad(delta), p.n, row_seed(seed, row as u64))?;
            table.push(vec![delta.into(), exact.into(), mc.e_value.into(), mc.std_err.into()]);
            rows.push(json!({ "delta_deg": delta, "e_analytic": exact, "e_mc": mc.e_value, "std_err": mc.std_err, "n": mc.n }));
        }
    }
    let [a, a_prime, b, b_prime] = p.chsh_deg.map(rad);
    let settings = ChshSettings { a, a_prime, b, b_prime };
    let r = chsh_with(&source, &settings, p.n_chsh, seed)?;
    let labels = ["a,b", "a,b'", "a',b", "a',b'"];
    let angles =
        [(p.chsh_deg[0], p.chsh_deg[2]), (p.chsh_deg[0], p.chsh_deg[3]), (p.chsh_deg[1], p.chsh_deg[2]), (p.chsh_deg[1], p.chsh_deg[3])];
    let mut exact_terms = [0.0; 4];
    let mut chsh_table = Table::new("chsh", &["term", "theta_a_deg", "theta_b_deg", "e_analytic", "e_mc", "std_err"]);
    let mut terms = Vec::new();
    for k in 0..4 {
        exact_terms[k] = correlation_analytic(&source, rad(angles[k].0), rad(angles[k].1))?;
        let t = &r.terms[k];
        chsh_table.push(vec![
            labels[k].into(),
            angles[k].0.into(),
            angles[k].1.into(),
            exact_terms[k].into(),
            t.e_value.into(),
            t.std_err.into(),
        ]);
        terms.push(json!({
            "term": labels[k],
            "theta_a_deg": angles[k].0,
            "theta_b_deg": angles[k].1,
            "e_analytic": exact_terms[k],
            "e_mc": t.e_value,
            "std_err": t.std_err,
            "n": t.n,
        }));
    }
    let s_analytic = (exact_terms[0] - exact_terms[1] + exact_terms[2] + exact_terms[3]).abs();
    chsh_table.push(vec![
        "S".into(),
        Cell::Text(String::new()),
        Cell::Text(String::new()),
        s_analytic.into(),
        r.s.into(),
        r.std_err.into(),
    ]);
    let results = json!({
        "state": p.state,
        "correlation": rows,
        "chsh": { "terms": terms, "s_analytic": s_analytic, "s_mc": r.s, "std_err": r.std_err },
    });
    let summary = json!({ "s_analytic": s_analytic, "s_mc": r.s, "s_std_err": r.std_err });
    Ok((results, vec![table, chsh_table], summary))
}

fn nosignal(p: &NosignalParams, seed: u64) -> Result<Parts> {
    let source = pair(p.state);
    let alice: Vec<f64> = p.alice_bases_deg.iter().map(|d| rad(*d)).collect();
    let max_td = no_signaling_check_with(&source, &alice)?;
    let mut states = Vec::new();
    for (deg, theta) in p.alice_bases_deg.iter().zip(&alice) {
        let rho = bob_state_after_alice(&source, &MeasurementBasis::new(*theta)?)?;
        let entries: Vec<[f64; 2]> = rho.entries().iter().map(|c| [c.re, c.im]).collect();
        states.push(json!({ "alice_basis_deg": deg, "bob_state": entries }));
    }
    let mut table = Table::new("bob_statistics", &["alice_deg", "bob_deg", "n", "zeros", "fraction", "ci_lo", "ci_hi", "z_vs_first"]);
    let mut rows = Vec::new();
    let mut worst_z: f64 = 0.0;
    for (j, bob_deg) in p.bob_bases_deg.iter().enumerate() {
        let mut first: Option<BinomialEstimate> = None;
        for (i, alice_deg) in p.alice_bases_deg.iter().enumerate() {
            let domain = (j * p.alice_bases_deg.len() + i) as u64;
            let e = bob_marginal_mc(&source, alice[i], rad(*bob_deg), p.n, seed, domain)?;
            let z = first.as_ref().map_or(0.0, |f| two_proportion_z(f, &e));
            worst_z = worst_z.max(z.abs());
            first.get_or_insert(e);
            table.push(vec![
                (*alice_deg).into(),
                (*bob_deg).into(),
                e.trials.into(),
                e.successes.into(),
                e.point.into(),
                e.ci95.0.into(),
                e.ci95.1.into(),
                z.into(),
            ]);
            rows.push(json!({ "alice_deg": alice_deg, "bob_deg": bob_deg, "bob_zero": estimate_json(&e), "z_vs_first": z }));
        }
    }
    let consistent = worst_z <= SWEEP_SIGMAS;
    let mut summary_table = Table::new("summary", &["max_trace_distance", "max_abs_z", "sigma_band", "consistent"]);
    summary_table.push(vec![max_td.into(), worst_z.into(), SWEEP_SIGMAS.into(), consistent.into()]);
    let results = json!({
        "state": p.state,
        "max_trace_distance": max_td,
        "bob_states": states,
        "bob_statistics": rows,
        "max_abs_z": worst_z,
        "sigma_band": SWEEP_SIGMAS,
        "consistent": consistent,
    });
    let summary = json!({ "max_trace_distance": max_td, "max_abs_z": worst_z, "consistent": consistent });
    Ok((results, vec![summary_table, table], summary))
}

fn protocol(p: &ProtocolParams, seed: u64) -> Result<Parts> {
    let strategy = config::strategy(&p.strategy).map_err(|e| photonsim_core::Error::InvalidArgument(e.0))?;
    let rule = EncodingRule::new(rad(p.basis_for_one_deg), rad(p.basis_for_zero_deg))?;
    let r = run_protocol(p.n_bits, &rule, &strategy, seed, p.shuffles as usize)?;
    let results = json!({
        "n_bits": r.n_bits,
        "pairs_per_bit": r.pairs_per_bit,
        "strategy": r.strategy,
        "receiver_model": r.receiver_model,
        "rule": { "basis_for_one_deg": p.basis_for_one_deg, "basis_for_zero_deg": p.basis_for_zero_deg, "degenerate": rule.is_degenerate() },
        "ber": r.ber,
        "bit_errors": r.bit_errors,
        "mutual_info_bits": r.mutual_info_bits,
        "mi_confidence_interval": [r.mi_confidence_interval.0, r.mi_confidence_interval.1],
        "mi_p_value": r.mi_p_value,
        "mi_shuffles": r.mi_shuffles,
        "ties": r.ties,
        "seed": r.seed,
        "rng_algorithm": r.rng_algorithm,
    });
    let mut table = Table::new(
        "report",
        &[
            "n_bits",
            "pairs_per_bit",
            "strategy",
            "receiver_model",
            "basis_for_one_deg",
            "basis_for_zero_deg",
            "ber",
            "bit_errors",
            "mutual_info_bits",
            "mi_ci_lo",
            "mi_ci_hi",
            "mi_p_value",
            "ties",
        ],
    );
    table.push(vec![
        r.n_bits.into(),
        r.pairs_per_bit.into(),
        r.strategy.clone().into(),
        r.receiver_model.into(),
        p.basis_for_one_deg.into(),
        p.basis_for_zero_deg.into(),
        r.ber.into(),
        r.bit_errors.into(),
        r.mutual_info_bits.into(),
        r.mi_confidence_interval.0.into(),
        r.mi_confidence_interval.1.into(),
        r.mi_p_value.into(),
        r.ties.into(),
    ]);
    let summary = json!({
        "receiver_model": r.receiver_model,
        "ber": r.ber,
        "mutual_info_bits": r.mutual_info_bits,
        "mi_confidence_interval": [r.mi_confidence_interval.0, r.mi_confidence_interval.1],
    });
    Ok((results, vec![table], summary))
}

fn d0_fraction(s: &MziStats) -> f64 {
    s.count_d0 as f64 / s.n as f64
}

fn mzi(p: &MziParams, seed: u64) -> Result<Parts> {
    let mut table = Table::new(
        "fringe",
        &["phase_deg", "p_d0_closed", "closed_d0", "closed_fraction", "closed_z", "open_d0", "open_fraction", "open_z"],
    );
    let mut rows = Vec::new();
    let mut worst_z: f64 = 0.0;
    for k in 0..p.fringe_points {
        let deg = k as f64 * 360.0 / p.fringe_points as f64;
        let phase = rad(deg);
        let (p_closed, _) = mzi_probabilities(phase, true)?;
        let (p_open, _) = mzi_probabilities(phase, false)?;
        let closed = run_mzi(&MziConfig::closed(phase), p.n, row_seed(seed, 2 * k))?;
        let open = run_mzi(&MziConfig::open(phase), p.n, row_seed(seed, 2 * k + 1))?;
        let z = |s: &MziStats, q: f64| {
            let sigma = (q * (1.0 - q) / s.n as f64).sqrt();
            let diff = d0_fraction(s) - q;
            if sigma == 0.0 {
                if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                diff / sigma
            }
        };
        let (zc, zo) = (z(&closed, p_closed), z(&open, p_open));
        worst_z = worst_z.max(zc.abs()).max(zo.abs());
        table.push(vec![
            deg.into(),
            p_closed.into(),
            closed.count_d0.into(),
            d0_fraction(&closed).into(),
            zc.into(),
            open.count_d0.into(),
            d0_fraction(&open).into(),
            zo.into(),
        ]);
        rows.push(json!({
            "phase_deg": deg,
            "p_d0_closed": p_closed,
            "p_d0_open": p_open,
            "closed": closed,
            "open": open,
            "closed_z": zc,
            "open_z": zo,
        }));
    }
    let t = choice_timing_invariance(rad(p.timing_phase_deg), p.p_present, p.n_timing, row_seed(seed, 2 * p.fringe_points))?;
    let split = t.delayed.by_choice.expect("delayed run records the breakdown");
    let (p_closed, _) = mzi_probabilities(rad(p.timing_phase_deg), true)?;
    let mut timing_table =
        Table::new("timing", &["choice", "n", "d0", "fraction", "fixed_n", "fixed_d0", "fixed_fraction", "p_d0_analytic", "z"]);
    for (label, cond, fixed, analytic, z) in
        [("present", split.present, t.fixed_closed, p_closed, t.z_present), ("absent", split.absent, t.fixed_open, 0.5, t.z_absent)]
    {
        let fraction = (cond.n > 0).then(|| cond.count_d0 as f64 / cond.n as f64);
        timing_table.push(vec![
            label.into(),
            cond.n.into(),
            cond.count_d0.into(),
            fraction.into(),
            fixed.n.into(),
            fixed.count_d0.into(),
            d0_fraction(&fixed).into(),
            analytic.into(),
            z.into(),
        ]);
    }
    let timing = json!({
        "phase_deg": p.timing_phase_deg,
        "p_present": t.p_present,
        "n": t.n,
        "delayed": t.delayed,
        "fixed_closed": t.fixed_closed,
        "fixed_open": t.fixed_open,
        "p_d0_closed_analytic": p_closed,
        "z_present": t.z_present,
        "z_absent": t.z_absent,
        "sigma_band": t.sigma_band,
        "consistent": t.consistent,
    });
    let fringe_ok = worst_z <= SWEEP_SIGMAS;
    let results = json!({ "fringe": rows, "fringe_max_abs_z": worst_z, "fringe_consistent": fringe_ok, "timing": timing });
    let summary = json!({ "fringe_max_abs_z": worst_z, "fringe_consistent": fringe_ok, "timing_consistent": t.consistent });
    Ok((results, vec![table, timing_table], summary))
}

//! Library half of the `uclab` experiment runner: configuration types, the
//! dispatcher that turns an [`ExperimentConfig`] into a [`ResultRecord`], and
//! the sweep/verify batteries. The binary is a thin argument-parsing shell
//! around [`run`], so tests can drive experiments in-process and compare
//! records byte for byte.

pub mod config;

use num_complex::Complex64;
use serde_json::json;

use config::{
    parse_placement, parse_potential, CertClass, CommandSpec, ExperimentConfig, GhostCheck,
    ObserveTarget, PhiSpec, ResultRecord, SequenceParams, Status, SystemParams,
};
use uclab_core::constants::{self, ConstantBundle, Variant};
use uclab_core::counterexample;
use uclab_core::funclass;
use uclab_core::geometry::{self, BoundaryCondition, Domain};
use uclab_core::ghost;
use uclab_core::logdom::LogVal;
use uclab_core::observability::{self, TheoremInput};
use uclab_core::spectral::{self, EigenSystem, PotentialSpec, SpectralFunction};
use uclab_core::{Error, Result};

fn build_system(p: &SystemParams, seed: u64) -> Result<EigenSystem> {
    let domain = Domain::new(p.d, p.l, p.bc)?;
    let basis = spectral::build_basis(&domain, p.lambda_max)?;
    let potential = parse_potential(&p.potential, p.d, seed)?;
    spectral::assemble_and_diagonalize(&basis, &potential)
}

fn build_sequence(
    domain: &Domain,
    s: &SequenceParams,
    seed: u64,
) -> Result<geometry::EquidistributedSequence> {
    geometry::make_equidistributed(domain, s.g, s.delta, parse_placement(&s.placement, seed)?)
}

fn build_phi(system: &EigenSystem, spec: &PhiSpec, seed: u64) -> Result<SpectralFunction> {
    let n = system.n_modes();
    match spec {
        PhiSpec::Mode { k } => {
            if *k == 0 || *k > n {
                return Err(Error::InvalidParameter(format!(
                    "mode index must lie in 1..={n}, got {k}"
                )));
            }
            Ok(SpectralFunction::unit_mode(k - 1, n))
        }
        PhiSpec::Random => Ok(SpectralFunction::random(n, seed)),
        PhiSpec::Decay { rate } => {
            let alpha: Vec<Complex64> = system
                .energies
                .iter()
                .map(|&e| Complex64::new((-rate * e.max(0.0).sqrt()).exp(), 0.0))
                .collect();
            Ok(SpectralFunction::from_alpha(alpha))
        }
    }
}

fn cmd_spectrum(p: &SystemParams, seed: u64) -> Result<(serde_json::Value, Status)> {
    let system = build_system(p, seed)?;
    let sandwich = spectral::eigenvalue_sandwich_check(&system);
    let status = if sandwich.pass { Status::Pass } else { Status::Fail };
    let value = json!({
        "n_modes": system.n_modes(),
        "energies": system.energies,
        "laplacian_eigenvalues": system.basis.modes.iter().map(|m| m.lambda).collect::<Vec<_>>(),
        "mode_indices": system.basis.modes.iter().map(|m| m.y.clone()).collect::<Vec<_>>(),
        "potential_bounds": system.bounds,
        "unitarity_defect": system.psi.unitarity_defect(),
        "sandwich": sandwich,
    });
    Ok((value, status))
}

fn cmd_certify(
    p: &SystemParams,
    class: CertClass,
    kappa: f64,
    phi_spec: &PhiSpec,
    seed: u64,
) -> Result<(serde_json::Value, Status)> {
    let system = build_system(p, seed)?;
    let phi = build_phi(&system, phi_spec, seed)?;
    let per_k: Vec<serde_json::Value> = phi
        .alpha
        .iter()
        .zip(&system.energies)
        .enumerate()
        .map(|(k, (a, &e))| json!({"k": k + 1, "energy": e, "alpha_sq": a.norm_sqr()}))
        .collect();
    let value = match class {
        CertClass::A => {
            let c = funclass::certify_a(&system, &phi, kappa)?;
            json!({
                "class": "A",
                "kappa": kappa,
                "ln_d_min": c.d_b_min.ln,
                "d_min": c.d_b_min.value(),
                "truncation_tail_ln": c.truncation_tail.ln,
                "per_k": per_k,
            })
        }
        CertClass::B => {
            let c = funclass::certify_b(&system, &phi, kappa)?;
            json!({
                "class": "B",
                "kappa": kappa,
                "ln_d_min": c.d_a_min.ln,
                "d_min": c.d_a_min.value(),
                "argmax_k": c.argmax_k + 1,
                "per_k": per_k,
            })
        }
        CertClass::Poly => {
            let c = funclass::certify_polynomial(&system, &phi, kappa)?;
            json!({
                "class": "poly",
                "kappa": kappa,
                "ln_d_min": c.ln,
                "d_min": c.value(),
                "per_k": per_k,
            })
        }
    };
    Ok((value, Status::Complete))
}

#[allow(clippy::too_many_arguments)]
fn cmd_constants(
    d: usize,
    g: f64,
    delta: f64,
    kappa: f64,
    ln_d_a: f64,
    ln_d_b: f64,
    v_inf: f64,
    v_plus: f64,
    v_minus: f64,
    n_a: f64,
    n_b: f64,
) -> Result<(serde_json::Value, Status)> {
    let bundle = ConstantBundle {
        d,
        g,
        delta,
        kappa,
        d_a: LogVal::from_ln(ln_d_a),
        d_b: LogVal::from_ln(ln_d_b),
        v_inf,
        v_plus,
        v_minus,
        n_a,
        n_b,
    };
    let derived = bundle.derive()?;
    let (db_conv, db_bound) = match derived.epsilon {
        Some(eps) => {
            let (db, bound) = constants::db_from_da(bundle.d_a, eps, v_plus, d)?;
            (Some(db), Some(bound))
        }
        None => (None, None),
    };
    let d1 = constants::d1_of(delta / g, v_inf, 1.0);
    let d2 = constants::d2_of(delta / g, v_inf, 1.0, d)?;
    let value = json!({
        "inputs": bundle,
        "derived": derived,
        "d1_with_n1_equal_1": d1,
        "d2_with_n2_equal_1": d2,
        "d_b_from_d_a": db_conv,
        "ln_d_b_upper_bound": db_bound,
        // linear-domain renderings; non-representable values appear as null
        "linear": {
            "c_sfuc_a": derived.c_sfuc_a.map(|v| v.value()),
            "c_sfuc_b": derived.c_sfuc_b.map(|v| v.value()),
            "d_a": bundle.d_a.value(),
            "d_b": bundle.d_b.value(),
            "d1": d1.value(),
            "d2": d2.value(),
            "d_b_from_d_a": db_conv.map(|v| v.value()),
        },
    });
    Ok((value, Status::Complete))
}

struct ObserveOutcome {
    value: serde_json::Value,
    status: Status,
    sharp_lower: Option<f64>,
    sharp_upper: Option<f64>,
    formula_ln: Option<f64>,
    margin: Option<f64>,
    v_inf: f64,
}

fn run_observe(
    p: &SystemParams,
    s: &SequenceParams,
    target: &ObserveTarget,
    seed: u64,
) -> Result<ObserveOutcome> {
    let system = build_system(p, seed)?;
    let seq = build_sequence(system.domain(), s, seed)?;
    match target {
        ObserveTarget::Subspace { n } => {
            let gm = observability::gram(&system, &seq)?;
            let sub = observability::sharp_subspace_constant(&system, &gm, *n)?;
            Ok(ObserveOutcome {
                value: json!({
                    "target": "subspace",
                    "requested_n": sub.requested_n,
                    "n": sub.n,
                    "extended": sub.extended,
                    "sharp_constant": sub.lambda_min,
                    "quadrature": gm.quad,
                }),
                status: Status::Complete,
                sharp_lower: Some(sub.lambda_min),
                sharp_upper: Some(sub.lambda_min),
                formula_ln: None,
                margin: None,
                v_inf: system.bounds.v_inf,
            })
        }
        ObserveTarget::Class { variant, kappa, ln_d, n_exponent, n_trunc } => {
            let variant = match variant.as_str() {
                "A" | "a" => Variant::A,
                "B" | "b" => Variant::B,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "variant must be A or B, got {other}"
                    )))
                }
            };
            let bundle = ConstantBundle {
                d: p.d,
                g: s.g,
                delta: s.delta,
                kappa: *kappa,
                d_a: LogVal::from_ln(*ln_d),
                d_b: LogVal::from_ln(*ln_d),
                v_inf: system.bounds.v_inf,
                v_plus: system.bounds.v_plus,
                v_minus: system.bounds.v_minus,
                n_a: *n_exponent,
                n_b: *n_exponent,
            };
            // usize::MAX is the "every retained mode" sentinel
            let n_trunc = if *n_trunc == usize::MAX { system.n_modes() } else { *n_trunc };
            let rep = observability::verify_theorem(
                &system,
                &seq,
                TheoremInput::Class { n_trunc },
                variant,
                &bundle,
            )?;
            let status = if rep.pass { Status::Pass } else { Status::Fail };
            let (lower, upper) = rep
                .weighted
                .as_ref()
                .map(|w| (w.lower, w.upper))
                .unwrap_or((rep.ratio, rep.ratio));
            Ok(ObserveOutcome {
                value: serde_json::to_value(&rep)?,
                status,
                sharp_lower: Some(lower),
                sharp_upper: Some(upper),
                formula_ln: Some(rep.c_sfuc.ln),
                margin: Some(rep.margin),
                v_inf: system.bounds.v_inf,
            })
        }
    }
}

fn apply_sweep_param(
    p: &SystemParams,
    s: &SequenceParams,
    target: &ObserveTarget,
    param: &str,
    value: f64,
) -> Result<(SystemParams, SequenceParams, ObserveTarget)> {
    let mut p = p.clone();
    let mut s = s.clone();
    let mut t = target.clone();
    match param {
        "delta" => s.delta = value,
        "L" => p.l = value,
        "kappa" => match &mut t {
            ObserveTarget::Class { kappa, .. } => *kappa = value,
            _ => {
                return Err(Error::InvalidParameter(
                    "kappa sweep needs a class target".into(),
                ))
            }
        },
        "ln_d" => match &mut t {
            ObserveTarget::Class { ln_d, .. } => *ln_d = value,
            _ => {
                return Err(Error::InvalidParameter(
                    "ln_d sweep needs a class target".into(),
                ))
            }
        },
        other => {
            return Err(Error::InvalidParameter(format!(
                "sweepable parameters are delta, L, kappa, ln_d; got {other}"
            )))
        }
    }
    Ok((p, s, t))
}

/// Stable CSV schema, documented in the README:
/// param,value,sharp_lower,sharp_upper,formula_c_sfuc_ln,margin,status
pub fn sweep_csv_header() -> &'static str {
    "param,value,sharp_lower,sharp_upper,formula_c_sfuc_ln,margin,status"
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    p: &SystemParams,
    s: &SequenceParams,
    target: &ObserveTarget,
    param: &str,
    values: &[f64],
    fit: bool,
    seed: u64,
    threads: usize,
) -> Result<(serde_json::Value, Status)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    // one row per value; rows run independently with per-row seeds and land
    // in index order regardless of completion order
    let rows: Vec<serde_json::Value> = pool.install(|| {
        use rayon::prelude::*;
        values
            .par_iter()
            .enumerate()
            .map(|(idx, &v)| {
                let row_seed = seed.wrapping_add(idx as u64);
                match apply_sweep_param(p, s, target, param, v)
                    .and_then(|(pp, ss, tt)| run_observe(&pp, &ss, &tt, row_seed))
                {
                    Ok(out) => json!({
                        "param": param,
                        "value": v,
                        "sharp_lower": out.sharp_lower,
                        "sharp_upper": out.sharp_upper,
                        "formula_c_sfuc_ln": out.formula_ln,
                        "margin": out.margin,
                        "v_inf": out.v_inf,
                        "status": serde_json::to_value(out.status).unwrap(),
                    }),
                    Err(e) => json!({
                        "param": param,
                        "value": v,
                        "status": serde_json::to_value(Status::from_error(&e)).unwrap(),
                        "error": e.to_string(),
                    }),
                }
            })
            .collect()
    });

    let mut csv = String::from(sweep_csv_header());
    csv.push('\n');
    for row in &rows {
        let get = |k: &str| -> String {
            match &row[k] {
                serde_json::Value::Null => String::new(),
                serde_json::Value::Number(n) => format!("{n}"),
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            }
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            get("param"),
            get("value"),
            get("sharp_lower"),
            get("sharp_upper"),
            get("formula_c_sfuc_ln"),
            get("margin"),
            get("status"),
        ));
    }

    let fit_result = if fit && param == "delta" {
        let ln_d = match target {
            ObserveTarget::Class { ln_d, .. } => *ln_d,
            _ => 0.0,
        };
        let measurements: Vec<constants::Measurement> = rows
            .iter()
            .filter_map(|r| {
                let lower = r["sharp_lower"].as_f64()?;
                let v = r["value"].as_f64()?;
                let v_inf = r["v_inf"].as_f64()?;
                if lower > 0.0 {
                    Some(constants::Measurement {
                        delta_over_g: v / s.g,
                        v_inf,
                        ln_d,
                        c_measured: lower.min(1.0),
                    })
                } else {
                    None
                }
            })
            .collect();
        match constants::fit_exponent(&measurements) {
            Ok(f) => Some(serde_json::to_value(f)?),
            Err(e) => Some(json!({"error": e.to_string()})),
        }
    } else {
        None
    };

    let any_fail = rows.iter().any(|r| r["status"] == json!("fail"));
    let status = if values.is_empty() || !any_fail { Status::Complete } else { Status::Fail };
    Ok((json!({"rows": rows, "csv": csv, "fit": fit_result}), status))
}

fn cmd_ghost(
    p: &SystemParams,
    phi_spec: &PhiSpec,
    n: usize,
    check: &GhostCheck,
    seed: u64,
) -> Result<(serde_json::Value, Status)> {
    let system = build_system(p, seed)?;
    let phi = build_phi(&system, phi_spec, seed)?;
    let gf = ghost::GhostFunction::new(&system, &phi, n)?;
    match check {
        GhostCheck::TwoSided { t } => {
            let rep = ghost::verify_two_sided(&gf, *t)?;
            let status = if rep.pass { Status::Pass } else { Status::Fail };
            Ok((serde_json::to_value(&rep)?, status))
        }
        GhostCheck::Interpolation { sequence, qmc_points } => {
            let seq = build_sequence(system.domain(), sequence, seed)?;
            let rep = ghost::measure_interpolation(&gf, &seq, *qmc_points, seed)?;
            Ok((serde_json::to_value(&rep)?, Status::Complete))
        }
    }
}

fn cmd_counterexample(
    d: usize,
    l: f64,
    delta: f64,
    kappa: f64,
    radius_fraction: f64,
    lambda_max: f64,
) -> Result<(serde_json::Value, Status)> {
    let domain = Domain::new(d, l, BoundaryCondition::Dirichlet)?;
    let seq =
        geometry::make_equidistributed(&domain, 1.0, delta, geometry::PlacementMode::Centered)?;
    let bump = counterexample::find_gap(&seq, &domain, radius_fraction)?;
    let basis = spectral::build_basis(&domain, lambda_max)?;
    let system = spectral::assemble_and_diagonalize(&basis, &PotentialSpec::zero())?;
    let lemma = counterexample::verify_lemma_polynomial(&bump, &system, kappa)?;
    let demo = counterexample::corollary_demo(&bump, &system, &seq, kappa)?;
    let status = if lemma.pass && demo.pass { Status::Pass } else { Status::Fail };
    Ok((json!({"bump": bump, "lemma": lemma, "corollary": demo}), status))
}

fn worst(a: Status, b: Status) -> Status {
    use Status::*;
    let rank = |s: Status| match s {
        Pass | Complete => 0,
        Inconclusive => 1,
        HypothesisViolation => 2,
        Fail => 3,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

/// The fixed verification battery: exercises every module with seeded inputs
/// so two runs with equal seeds produce byte-identical records.
fn cmd_verify(quick: bool, seed: u64) -> Result<(serde_json::Value, Status)> {
    let mut status = Status::Pass;
    let pi = std::f64::consts::PI;

    // analytic spectrum, three boundary conditions
    let mut spectrum = Vec::new();
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann, BoundaryCondition::Periodic] {
        let dom = Domain::new(1, 1.0, bc)?;
        let basis = spectral::build_basis(&dom, (50.5 * pi).powi(2))?;
        let sys = spectral::assemble_and_diagonalize(&basis, &PotentialSpec::zero())?;
        let worst_dev = (0..50.min(sys.n_modes()))
            .map(|k| (sys.energies[k] - sys.laplacian_eigenvalue(k)).abs())
            .fold(0.0f64, f64::max);
        if worst_dev > 1e-12 {
            status = worst(status, Status::Fail);
        }
        spectrum.push(json!({"bc": bc.to_string(), "max_deviation": worst_dev}));
    }

    // sandwich on seeded cosine potentials
    let mut sandwich = Vec::new();
    let n_pots = if quick { 2 } else { 5 };
    for i in 0..n_pots {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
        let terms: Vec<(Vec<u32>, f64)> =
            (0..3).map(|_| (vec![rng.gen_range(1..5u32)], rng.gen_range(-1.0..1.0))).collect();
        let dom = Domain::new(1, 1.0, BoundaryCondition::Dirichlet)?;
        let basis = spectral::build_basis(&dom, (60.5 * pi).powi(2))?;
        let sys = spectral::assemble_and_diagonalize(&basis, &PotentialSpec::Cosine { terms })?;
        let rep = spectral::eigenvalue_sandwich_check(&sys);
        if !rep.pass {
            status = worst(status, Status::Fail);
        }
        let min_lower = rep.lower_margin[..rep.enforced_upto]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        sandwich.push(json!({"seed": seed.wrapping_add(i), "pass": rep.pass, "min_lower_margin": min_lower}));
    }

    // conversion lemma on mixed-sign spectra
    let mut conversion = Vec::new();
    {
        let dom = Domain::new(1, 1.0, BoundaryCondition::Neumann)?;
        let basis = spectral::build_basis(&dom, (40.5 * pi).powi(2))?;
        let sys = spectral::assemble_and_diagonalize(&basis, &PotentialSpec::Constant { c: -10.0 })?;
        let n_phis = if quick { 3 } else { 10 };
        for i in 0..n_phis {
            let phi = SpectralFunction::random(sys.n_modes(), seed.wrapping_add(100 + i));
            let rep = funclass::verify_conversion(&sys, &phi, 1.0, 0.5)?;
            if rep.slack.ln < -1e-12 {
                status = worst(status, Status::Fail);
            }
            conversion.push(json!({"lhs_ln": rep.lhs_ln, "rhs_ln": rep.rhs_ln, "slack_ln": rep.slack.ln}));
        }
    }

    // two-sided H¹ comparison
    let mut two_sided = Vec::new();
    {
        let dom = Domain::new(1, 1.0, BoundaryCondition::Dirichlet)?;
        let basis = spectral::build_basis(&dom, (25.5 * pi).powi(2))?;
        let sys = spectral::assemble_and_diagonalize(&basis, &PotentialSpec::zero())?;
        for (i, t) in [0.5, 1.0, 2.0].iter().enumerate() {
            let phi = SpectralFunction::random(sys.n_modes(), seed.wrapping_add(200 + i as u64));
            let gf = ghost::GhostFunction::new(&sys, &phi, 6)?;
            let rep = ghost::verify_two_sided(&gf, *t)?;
            if !rep.pass {
                status = worst(status, Status::Fail);
            }
            two_sided.push(json!({"t": t, "lhs": rep.lhs, "mid": rep.mid, "rhs": rep.rhs}));
        }
    }

    // scale-free weighted constants
    let scale = {
        let pot = PotentialSpec::zero();
        let params = observability::ScaleExperiment {
            bc: BoundaryCondition::Neumann,
            potential: &pot,
            g: 1.0,
            delta: 0.1,
            placement: geometry::PlacementMode::Centered,
            kappa: 49.0,
            d_b: LogVal::from_ln(1.0),
            lambda_max: 100.0,
        };
        let ls: &[f64] = if quick { &[1.0, 3.0] } else { &[1.0, 3.0, 5.0] };
        let table = observability::scale_invariance_experiment(&params, ls)?;
        if !(table.min_lower > 0.0) {
            status = worst(status, Status::Fail);
        }
        serde_json::to_value(&table)?
    };

    // polynomial counterexample
    let corollary = {
        let (value, st) = cmd_counterexample(1, 1.0, 0.1, 1.0, 0.9, (50.5 * pi).powi(2))?;
        status = worst(status, st);
        value
    };

    Ok((
        json!({
            "analytic_spectrum": spectrum,
            "sandwich": sandwich,
            "conversion": conversion,
            "two_sided": two_sided,
            "scale_free": scale,
            "corollary": corollary,
        }),
        status,
    ))
}

/// Execute a configuration and wrap the outcome in a result record. Errors
/// become statuses (and exit codes) rather than panics; `threads` only
/// parallelizes sweep rows and never changes any computed value.
pub fn run(cfg: &ExperimentConfig, threads: usize, timings: bool) -> ResultRecord {
    let started = std::time::Instant::now();
    let outcome: Result<(serde_json::Value, Status)> = match &cfg.command {
        CommandSpec::Spectrum { system } => cmd_spectrum(system, cfg.seed),
        CommandSpec::Certify { system, class, kappa, phi } => {
            cmd_certify(system, *class, *kappa, phi, cfg.seed)
        }
        CommandSpec::Constants {
            d,
            g,
            delta,
            kappa,
            ln_d_a,
            ln_d_b,
            v_inf,
            v_plus,
            v_minus,
            n_a,
            n_b,
        } => cmd_constants(*d, *g, *delta, *kappa, *ln_d_a, *ln_d_b, *v_inf, *v_plus, *v_minus, *n_a, *n_b),
        CommandSpec::Observe { system, sequence, target } => {
            run_observe(system, sequence, target, cfg.seed).map(|o| (o.value, o.status))
        }
        CommandSpec::Sweep { system, sequence, target, param, values, fit } => {
            cmd_sweep(system, sequence, target, param, values, *fit, cfg.seed, threads)
        }
        CommandSpec::Ghost { system, phi, n, check } => cmd_ghost(system, phi, *n, check, cfg.seed),
        CommandSpec::Counterexample { d, l, delta, kappa, radius_fraction, lambda_max } => {
            cmd_counterexample(*d, *l, *delta, *kappa, *radius_fraction, *lambda_max)
        }
        CommandSpec::Verify { quick } => cmd_verify(*quick, cfg.seed),
    };
    let (results, status, error) = match outcome {
        Ok((v, s)) => (v, s, None),
        Err(e) => (serde_json::Value::Null, Status::from_error(&e), Some(e.to_string())),
    };
    ResultRecord {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        status,
        results,
        error,
        timings_ms: if timings { Some(started.elapsed().as_millis()) } else { None },
    }
}

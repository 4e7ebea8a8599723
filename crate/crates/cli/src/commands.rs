use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use hfhr::constants::{
    acceleration_report, build_corrector, case_study_constants, certify_baseline_drift, certify_improvement,
    contraction_rate, lyapunov_quadratic_bounds, model_baseline, multiwell_corrector, multiwell_lambda_star,
    CorrectorSpec, LyapunovFunction, RateReport,
};
use hfhr::coupling::{
    baseline_quadratic_norm, build_profile, estimate_contraction, gradient_constant, ContractionEstimate,
    CoupledStart, CouplingParams, Observer, DEFAULT_GRID,
};
use hfhr::experiments::{read_numeric_csv, run_experiment, ExperimentConfig};
use hfhr::integrators::{log_schedule, run_ensemble_from, write_snapshots_csv, InitialLaw, PhasePoint, Sampler, SamplerParams};
use hfhr::metrics::{w2_assignment, w2_exact_1d, w2_sliced, SampleCloud, MAX_ASSIGNMENT};
use hfhr::{Mat, PotentialModel};
use serde_json::{json, Map, Value};

use crate::model::CaseArg;
use crate::{CliError, ConstantsArgs, CoupleArgs, ExperimentArgs, Format, Method, SampleArgs, SamplerArg, StartArg, WassersteinArgs};

/// Phase-plane radius of the drift certificates.
const CERTIFICATE_RADIUS: f64 = 20.0;
/// Slack for rounding in the certificate margins.
const CERTIFICATE_SLACK: f64 = 1e-8;

fn schedule(steps: usize, snapshots: usize) -> Vec<usize> {
    let mut s = log_schedule(steps, snapshots);
    s.insert(0, 0);
    s.dedup();
    s
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(hfhr::Error::from)?;
    Ok(())
}

pub fn sample(args: &SampleArgs, verbose: u8) -> Result<(), CliError> {
    let model = args.model.build()?;
    let sampler = match args.sampler {
        SamplerArg::Hfhr => Sampler::Hfhr,
        SamplerArg::Klmc => Sampler::Klmc,
        SamplerArg::Ula => Sampler::Ula,
    };
    if sampler != Sampler::Hfhr && args.alpha != 0.0 {
        return Err(CliError::Usage(format!("--alpha applies to hfhr only, got {} for {sampler}", args.alpha)));
    }
    let params = SamplerParams {
        alpha: args.alpha,
        gamma: args.model.gamma,
        eta: args.eta,
        steps: args.steps,
        chains: args.chains,
        seed: args.seed,
    };
    let init = args.init_std.map_or(InitialLaw::Origin, |std| InitialLaw::Gaussian { std });
    let out_dir = args.out.resolve(None);
    create_dir(&out_dir)?;
    let started = Instant::now();
    let trajectory = run_ensemble_from(&model, &params, sampler, &schedule(args.steps, args.snapshots), init)?;
    let path = out_dir.join("samples.csv");
    write_snapshots_csv(&path, &trajectory, args.with_momenta)?;
    let last = trajectory.snapshots.last().expect("schedule includes K");
    let final_path = out_dir.join("final.csv");
    write_cloud(&final_path, &last.positions)?;
    if verbose > 0 {
        eprintln!("{} chains × {} steps in {:.2?}", args.chains, args.steps, started.elapsed());
    }
    println!("wrote {} and {}", path.display(), final_path.display());
    Ok(())
}

fn write_cloud(path: &Path, points: &Mat) -> Result<(), CliError> {
    let mut text = (1..=points.cols()).map(|i| format!("q{i}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for i in 0..points.rows() {
        let row: Vec<String> = points.row(i).iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(hfhr::Error::from)?;
    Ok(())
}

struct CoupleRun {
    rate: RateReport,
    estimate: ContractionEstimate,
}

fn couple_once(model: &PotentialModel, args: &CoupleArgs, alpha: f64) -> Result<CoupleRun, CliError> {
    let c = model.constants();
    let gamma = args.model.gamma;
    let dim = model.dim();
    // D = A: for α past α₀ the baseline drift has no positive rate to offer
    let rate = contraction_rate(
        c.drift_rate,
        alpha,
        gamma,
        c.lipschitz,
        dim,
        c.drift_offset,
        args.kappa_adjust,
    )?;
    let coupling = CouplingParams::new(&rate, args.xi)?;
    let c_bar = gradient_constant(rate.theta, gamma, baseline_quadratic_norm(gamma));
    let profile = build_profile(&rate, c_bar, DEFAULT_GRID)?;
    let lyapunov = LyapunovFunction::baseline(gamma, c.drift_rate);
    let observer = Observer {
        profile: &profile,
        lyapunov: &lyapunov,
        epsilon: rate.epsilon,
    };
    let start = match args.start {
        StartArg::Independent => CoupledStart::Independent { std: args.separation },
        StartArg::Identical => CoupledStart::Fixed(PhasePoint::origin(dim), PhasePoint::origin(dim)),
        StartArg::Offset => {
            let mut q = vec![0.0; dim];
            q[0] = args.separation;
            CoupledStart::Fixed(PhasePoint::origin(dim), PhasePoint::new(q, vec![0.0; dim])?)
        }
    };
    let params = SamplerParams {
        alpha,
        gamma,
        eta: args.eta,
        steps: args.steps,
        chains: args.pairs,
        seed: args.seed,
    };
    let estimate = estimate_contraction(
        model,
        &params,
        &coupling,
        &start,
        &schedule(args.steps, args.snapshots),
        &observer,
    )?;
    Ok(CoupleRun { rate, estimate })
}

pub fn couple(args: &CoupleArgs, verbose: u8) -> Result<(), CliError> {
    let model = args.model.build()?;
    let out_dir = args.out.resolve(None);
    create_dir(&out_dir)?;
    let mut alphas = vec![args.alpha];
    if args.compare && args.alpha != 0.0 {
        alphas.insert(0, 0.0);
    }
    println!("{:>8} {:>14} {:>14} {:>10}", "alpha", "fitted_rate", "c_lambda", "ratio");
    for &alpha in &alphas {
        let started = Instant::now();
        let run = couple_once(&model, args, alpha)?;
        let name = if alphas.len() == 1 {
            "decay.csv".to_string()
        } else {
            format!("decay_a{alpha}.csv")
        };
        run.estimate.curve.write_csv(&out_dir.join(&name))?;
        if verbose > 0 {
            eprintln!("alpha {alpha}: {} pairs in {:.2?}, wrote {name}", args.pairs, started.elapsed());
        }
        let fitted = run.estimate.fitted_rate;
        println!(
            "{:>8} {:>14.6e} {:>14.6e} {:>10.3}",
            alpha,
            fitted,
            run.rate.rate,
            fitted / run.rate.rate
        );
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Ledger value of a fallible constant; certificate failures are recorded in
/// `failures` and stored as `{"error": ...}`, other errors propagate.
fn ledger_entry<T: serde::Serialize>(
    key: &str,
    result: hfhr::Result<T>,
    failures: &mut Vec<String>,
) -> Result<(Value, Option<T>), CliError> {
    match result {
        Ok(v) => Ok((to_value(&v), Some(v))),
        Err(hfhr::Error::Certificate(msg)) => {
            failures.push(format!("{key}: {msg}"));
            Ok((json!({ "error": msg }), None))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn constants(args: &ConstantsArgs) -> Result<(), CliError> {
    let model = args.model.build()?;
    let gamma = args.model.gamma;
    let c = model.constants().clone();
    let dim = model.dim();
    let mut failures = Vec::new();
    let mut ledger = Map::new();
    ledger.insert("case".into(), json!(model.name()));
    ledger.insert("d".into(), json!(dim));
    ledger.insert("gamma".into(), json!(gamma));
    ledger.insert("lambda".into(), json!(c.drift_rate));
    ledger.insert("alpha".into(), json!(args.alpha));
    ledger.insert("kappa_adjust".into(), json!(args.kappa_adjust));
    ledger.insert("assumptions".into(), to_value(&c));
    let bounds = lyapunov_quadratic_bounds(gamma, c.drift_rate, c.energy_at_zero, c.grad_at_zero, c.lipschitz)?;
    ledger.insert("lyapunov_bounds".into(), to_value(&bounds));
    let baseline = model_baseline(&model, gamma)?;
    ledger.insert("baseline_drift".into(), to_value(&baseline));
    let rate = contraction_rate(
        c.drift_rate,
        args.alpha,
        gamma,
        c.lipschitz,
        dim,
        baseline.offset(args.alpha),
        args.kappa_adjust,
    )?;
    ledger.insert("master_rate".into(), to_value(&rate));

    let (generic_json, generic) = ledger_entry("corrector", build_corrector(&model, gamma, c.drift_rate), &mut failures)?;
    ledger.insert("corrector".into(), generic_json);
    let mut chosen: Option<CorrectorSpec> = generic;
    if args.model.case == CaseArg::Mw {
        let (explicit_json, explicit) = ledger_entry(
            "corrector_explicit",
            multiwell_corrector(&model, gamma, c.drift_rate),
            &mut failures,
        )?;
        ledger.insert("corrector_explicit".into(), explicit_json);
        if explicit.is_some() {
            chosen = explicit;
        }
    }
    if let Some(corrector) = &chosen {
        let (acc_json, _) = ledger_entry(
            "acceleration",
            acceleration_report(&model, corrector, args.kappa_adjust),
            &mut failures,
        )?;
        ledger.insert("acceleration".into(), acc_json);
    }
    if args.model.case != CaseArg::Gaussian {
        let (table_json, _) = ledger_entry("case_table", case_study_constants(&model, gamma), &mut failures)?;
        ledger.insert("case_table".into(), table_json);
    }
    if args.lambda_scan {
        if args.model.case != CaseArg::Mw {
            return Err(CliError::Usage("--lambda-scan applies to --case mw only".into()));
        }
        let (star_json, _) = ledger_entry("lambda_star", multiwell_lambda_star(gamma), &mut failures)?;
        ledger.insert("lambda_star".into(), star_json);
    }

    let mut certificates = Map::new();
    let grid = args.grid.max(2);
    certificates.insert("radius".into(), json!(CERTIFICATE_RADIUS));
    certificates.insert("grid".into(), json!([grid, grid]));
    if args.alpha <= baseline.alpha0 {
        let margin = certify_baseline_drift(&model, &baseline, args.alpha, CERTIFICATE_RADIUS, grid, grid);
        certificates.insert("baseline_drift_min_margin".into(), json!(margin));
        if margin < -CERTIFICATE_SLACK {
            failures.push(format!("baseline drift violated by {:.3e}", -margin));
        }
    } else {
        certificates.insert(
            "baseline_drift_min_margin".into(),
            json!(format!("not applicable: alpha {} exceeds alpha0 {:.4e}", args.alpha, baseline.alpha0)),
        );
    }
    if let Some(corrector) = &chosen {
        let margin = certify_improvement(&model, corrector, CERTIFICATE_RADIUS, grid, grid);
        certificates.insert("improvement_min_margin".into(), json!(margin));
        if margin < -CERTIFICATE_SLACK {
            failures.push(format!("improvement inequality violated by {:.3e}", -margin));
        }
    }
    ledger.insert("certificates".into(), Value::Object(certificates));
    ledger.insert("failures".into(), json!(failures));

    let ledger = Value::Object(ledger);
    let text = serde_json::to_string_pretty(&ledger).expect("JSON values serialise");
    if let Some(path) = &args.out {
        std::fs::write(path, &text).map_err(hfhr::Error::from)?;
    }
    match args.format {
        Format::Json => println!("{text}"),
        Format::Table => print!("{}", table(&ledger)),
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Certificate(failures.join("; ")))
    }
}

/// One `key  value` line per scalar leaf; matrices are skipped.
fn table(ledger: &Value) -> String {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                if map.contains_key("data") && map.contains_key("rows") {
                    return;
                }
                for (k, v) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, rows);
                }
            }
            Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
                let cells: Vec<String> = items.iter().map(cell).collect();
                rows.push((prefix.to_string(), cells.join(", ")));
            }
            Value::Array(items) => {
                for (i, v) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), v, rows);
                }
            }
            other => rows.push((prefix.to_string(), cell(other))),
        }
    }
    fn cell(v: &Value) -> String {
        match v {
            Value::Number(n) => match n.as_f64() {
                Some(x) if n.is_f64() => format!("{x:.6e}"),
                _ => n.to_string(),
            },
            Value::String(s) => s.clone(),
            Value::Null => "-".into(),
            other => other.to_string(),
        }
    }
    let mut rows = Vec::new();
    walk("", ledger, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

fn read_cloud(path: &Path, skip: usize) -> Result<SampleCloud, CliError> {
    let all = read_numeric_csv(path)?;
    if skip >= all.cols() {
        return Err(CliError::Usage(format!(
            "--skip-columns {skip} leaves no coordinates in {}",
            path.display()
        )));
    }
    let d = all.cols() - skip;
    let data: Vec<f64> = (0..all.rows()).flat_map(|i| all.row(i)[skip..].to_vec()).collect();
    Ok(SampleCloud::new(Mat::from_vec(all.rows(), d, data)?)?)
}

pub fn wasserstein(args: &WassersteinArgs) -> Result<(), CliError> {
    let a = read_cloud(&args.first, args.skip_columns)?;
    let b = read_cloud(&args.second, args.skip_columns)?;
    let method = match args.method {
        Method::Auto if a.dim() == 1 => Method::Exact1d,
        Method::Auto if a.len() == b.len() && a.len() <= MAX_ASSIGNMENT => Method::Assignment,
        Method::Auto => Method::Sliced,
        m => m,
    };
    let (name, value) = match method {
        Method::Exact1d => ("exact_1d", w2_exact_1d(&a, &b)?),
        Method::Assignment => ("assignment", w2_assignment(&a, &b)?),
        _ => ("sliced", w2_sliced(&a, &b, args.projections, args.seed)?),
    };
    println!("{name} W2 = {value:.12e}");
    Ok(())
}

pub fn experiment(args: &ExperimentArgs, verbose: u8) -> Result<(), CliError> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out_dir = args.out.resolve(config.output_dir.as_ref());
    let started = Instant::now();
    let report = run_experiment(&config, &out_dir)?;
    for r in &report.results {
        let last = r.metric.len() - 1;
        println!(
            "{}: final {} = {:.6} ± {:.6} after {} steps",
            r.label, report.metric, r.metric[last], r.stderr[last], r.steps[last]
        );
    }
    if verbose > 0 {
        eprintln!("wrote {} in {:.2?}", out_dir.display(), started.elapsed());
    }
    Ok(())
}

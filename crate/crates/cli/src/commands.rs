use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use birkhoff::ergodic::{
    ergodic_mean_naive, fluctuation_report, gap_profile, mean_curve, mean_of_abs_means,
    parse_n_grid, sample_points, stabilization_scan, tail_mass, ErgodicMeans,
};
use birkhoff::mapping::{approx_error, approximate_system, MapSpec};
use birkhoff::space::{format_real, write_system_csv};
use birkhoff::systems::observable;
use birkhoff::{FiniteSystem, Observable64};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush().map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush().map_err(CliError::from)
        }
    }
}

fn emit_json(path: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    emit(path, |w| {
        writeln!(w, "{text}").map_err(CliError::from)
    })
}

fn system_and_observable(cfg: &ExperimentConfig) -> Result<(FiniteSystem, Observable64), CliError> {
    let system = cfg.system()?.build()?;
    let f = observable(cfg.observable()?, &system)?;
    Ok((system, f))
}

fn sample(cfg: &ExperimentConfig, m: usize) -> Result<Vec<usize>, CliError> {
    match &cfg.points {
        Some(p) => {
            if let Some(&x) = p.iter().find(|&&x| x >= m) {
                return Err(CliError::Config(format!("point {x} is outside 0..{m}")));
            }
            let mut p = p.clone();
            p.sort_unstable();
            p.dedup();
            Ok(p)
        }
        None => Ok(sample_points(m, cfg.sample, cfg.seed)),
    }
}

pub fn build(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = cfg.system()?;
    let system = spec.build()?;
    let f = cfg
        .observable
        .as_ref()
        .map(|o| observable::<f64>(o, &system))
        .transpose()?;
    emit(cfg.out.as_deref(), |w| Ok(write_system_csv(w, &system, f.as_ref())?))?;
    if let Some(report) = &cfg.report {
        let cycles = system.perm().cycles();
        let counts: BTreeMap<String, usize> = cycles
            .length_counts()
            .iter()
            .map(|(n, a)| (n.to_string(), *a))
            .collect();
        emit_json(
            Some(report),
            &json!({
                "system": spec,
                "size": system.size(),
                "metric": system.metric_kind(),
                "cycles": cycles.count(),
                "transitive": system.is_transitive(),
                "length_counts": counts,
            }),
        )?;
    }
    Ok(())
}

pub fn means(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (system, f) = system_and_observable(cfg)?;
    let m = system.size();
    let grid = parse_n_grid(cfg.n_grid.as_deref().unwrap_or(&format!("log:1:{m}:200")))?;
    let points = match &cfg.points {
        Some(_) => sample(cfg, m)?,
        None => vec![0],
    };
    let means = ErgodicMeans::new(&system, &f)?;
    let profiles = points
        .iter()
        .map(|&x| mean_curve(&means, x, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    emit(cfg.out.as_deref(), |w| {
        let io = CliError::from;
        writeln!(w, "point,a,mean").map_err(io)?;
        for p in &profiles {
            for (a, v) in p.plot_points() {
                writeln!(w, "{},{},{}", p.base_index, format_real(a), format_real(v)).map_err(io)?;
            }
        }
        Ok(())
    })
}

pub fn stabilize(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (system, f) = system_and_observable(cfg)?;
    let points = sample(cfg, system.size())?;
    let means = ErgodicMeans::new(&system, &f)?;
    let result = stabilization_scan(
        &means,
        cfg.epsilon.unwrap_or(0.1),
        cfg.delta.unwrap_or(0.05),
        cfg.n_min,
        &points,
    )?;
    emit_json(cfg.out.as_deref(), &json!({ "size": system.size(), "result": result }))
}

pub fn fluct(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (system, f) = system_and_observable(cfg)?;
    let m = system.size();
    let points = sample(cfg, m)?;
    let means = ErgodicMeans::new(&system, &f)?;
    let report = fluctuation_report(&means, cfg.epsilon.unwrap_or(0.01), cfg.horizon.unwrap_or(m), &points)?;
    emit_json(
        cfg.out.as_deref(),
        &json!({
            "size": m,
            "max_count": report.max_count(),
            "k_at_0.99": report.first_k_reaching(0.99),
            "report": report,
        }),
    )
}

pub fn gap(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (system, f) = system_and_observable(cfg)?;
    let k = cfg.require(cfg.k, "K")?;
    let l = cfg.require(cfg.l, "L")?;
    let points = sample(cfg, system.size())?;
    let means = ErgodicMeans::new(&system, &f)?;
    let gaps = gap_profile(&means, k, l, &points)?;
    let (worst, gap) = gaps
        .iter()
        .enumerate()
        .fold((None, 0.0f64), |(wi, wg), (i, &g)| if g > wg { (Some(points[i]), g) } else { (wi, wg) });
    emit_json(
        cfg.out.as_deref(),
        &json!({ "K": k, "L": l, "gap": gap, "worst_point": worst, "sample_size": points.len() }),
    )
}

pub fn tail(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (_, f) = system_and_observable(cfg)?;
    let threshold = cfg.require(cfg.threshold, "threshold")?;
    emit_json(
        cfg.out.as_deref(),
        &json!({
            "threshold": threshold,
            "tail_mass": tail_mass(&f, threshold)?,
            "abs_average": f.abs().global_average(),
        }),
    )
}

fn read_images(path: &Path, m: usize) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut images = vec![None; m];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let bad = || CliError::Config(format!("{}: bad row {}", path.display(), row + 2));
        if record.len() != 2 {
            return Err(bad());
        }
        let i: usize = record[0].trim().parse().map_err(|_| bad())?;
        let v: f64 = record[1].trim().parse().map_err(|_| bad())?;
        if i >= m || images[i].is_some() {
            return Err(bad());
        }
        images[i] = Some(v);
    }
    images
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| CliError::Config(format!("{}: no image for index {i}", path.display()))))
        .collect()
}

pub fn approx(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let base = cfg.system()?.build()?;
    let map = match (&cfg.images, &cfg.map) {
        (Some(path), _) => {
            let (coords, _) = base.real_coordinates().ok_or_else(|| {
                CliError::Config("tabulated images need a system with real coordinates".into())
            })?;
            MapSpec::tabulated(coords, &read_images(path, base.size())?)?
        }
        (None, Some(m)) => m.build(),
        (None, None) => return Err(CliError::Config("no map given (use --map, --images or the `map` key)".into())),
    };
    let delta = cfg.require(cfg.delta, "delta")?;
    let epsilon = cfg.epsilon.unwrap_or(delta);
    let (system, log) = approximate_system(&map, base.embedding(), delta, cfg.transitive)?;
    let error = approx_error(&system, &map, epsilon)?;
    let source_error = approx_error(&base, &map, epsilon)?;
    if let Some(out) = &cfg.out {
        emit(Some(out), |w| Ok(write_system_csv(w, &system, None)?))?;
    }
    emit_json(
        cfg.report.as_deref(),
        &json!({
            "log": log,
            "epsilon": epsilon,
            "approx_error": error,
            "source_approx_error": source_error,
        }),
    )
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    observed: f64,
    tolerance: f64,
}

impl Check {
    fn at_most(name: &'static str, observed: f64, tolerance: f64) -> Self {
        Check {
            name,
            passed: observed <= tolerance,
            observed,
            tolerance,
        }
    }
}

/// Runs the invariant suite; returns whether every check passed.
pub fn verify(cfg: &ExperimentConfig) -> Result<bool, CliError> {
    let (system, f) = system_and_observable(cfg)?;
    let tol = &cfg.tolerances;
    let m = system.size();
    let points = sample(cfg, m)?;
    let means = ErgodicMeans::new(&system, &f)?;
    let av = f.global_average();
    let abs_av = f.abs().global_average();
    let max_abs = f.max_abs();
    let mut checks = Vec::new();

    let full = points
        .iter()
        .map(|&x| (means.mean_unchecked(x, m) - av).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("full_cycle_identity", full, tol.full_cycle));

    let cycles = system.perm().cycles();
    let mut length_of = vec![0usize; m];
    for c in cycles.cycles() {
        for &y in c {
            length_of[y] = c.len();
        }
    }
    let wrong_periods = points
        .iter()
        .filter(|&&x| system.perm().period(x).ok() != Some(length_of[x]))
        .count();
    checks.push(Check::at_most("period_matches_cycles", wrong_periods as f64, 0.0));

    let windows = [1, 2, 17, (m / 2).max(1), m, m + 3];
    let mut prefix_err = 0.0f64;
    for &x in points.iter().take(32) {
        for &n in &windows {
            let naive = ergodic_mean_naive(&system, &f, x, n)?;
            prefix_err = prefix_err.max((means.mean_unchecked(x, n) - naive).abs());
        }
    }
    checks.push(Check::at_most("prefix_equals_naive", prefix_err, tol.prefix));

    let mut excess = f64::NEG_INFINITY;
    for n in [2, 17, (m / 2).max(1)] {
        excess = excess.max(mean_of_abs_means(&means, n)? - abs_av);
    }
    checks.push(Check::at_most("mean_of_means_bound", excess, tol.invariant));

    let mut shift_excess = f64::NEG_INFINITY;
    for &x in &points {
        let tx = system.perm().apply(x);
        for n in [1, 2, 17, (m / 2).max(1), m] {
            let d = (means.mean_unchecked(tx, n) - means.mean_unchecked(x, n)).abs();
            shift_excess = shift_excess.max(d - 2.0 * max_abs / n as f64);
        }
    }
    checks.push(Check::at_most("shift_identity", shift_excess, tol.invariant));

    let t0 = (tail_mass(&f, 0.0)? - abs_av).abs();
    checks.push(Check::at_most("tail_at_zero", t0, tol.invariant));

    let mut last = f64::INFINITY;
    let mut rises = 0.0f64;
    for i in 0..=16 {
        let t = tail_mass(&f, max_abs * i as f64 / 16.0)?;
        rises = rises.max(t - last);
        last = t;
    }
    checks.push(Check::at_most("tail_monotone", rises.max(0.0), tol.invariant));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let passed = failed.is_empty();
    let report: Value = json!({
        "passed": passed,
        "failed": failed,
        "size": m,
        "transitive": system.is_transitive(),
        "sample_size": points.len(),
        "checks": checks,
    });
    emit_json(cfg.report.as_deref().or(cfg.out.as_deref()), &report)?;
    Ok(passed)
}

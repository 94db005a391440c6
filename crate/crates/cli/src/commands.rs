//! Subcommand bodies. Each builds an [`Artifact`]; checks that fail after
//! the artifact is complete are reported once it has been written.

use crate::args::{
    BoundsArgs, ChainArgs, Command, ConsistencyArgs, HeatArgs, IdentitiesArgs, MeanfieldCommand,
    NListArgs, SweepArgs,
};
use crate::config::{Config, Format};
use crate::{emit, Artifact, CliError};
use lee2d::analysis::{run_identity_suite, SuiteConfig};
use lee2d::bounds::{bound_report, default_fit_grid, norm_bound_u};
use lee2d::heatkernel::{
    diagonal_bound_check, heat_equation_residual, heat_kernel, log_grid,
    stochastic_completeness_check,
};
use lee2d::meanfield::{
    constant_ansatz_energy, random_chain_check, solve_chi, GaussianTrial, TrialState,
};
use lee2d::renorm::{solve_bound_state, PhysicalParams};
use lee2d::{Manifold, Point};
use lee2d_sweep::persist::{csv_string, persist};
use lee2d_sweep::{
    consistency_matrix, random_grid, run_sweep, Axis, AxisValues, Settings, SweepSpec,
};
use serde_json::json;
use std::io::Write;

type Outcome = (Artifact, Option<CliError>);

pub fn execute<W: Write>(cmd: &Command, cfg: &Config, out: &mut W) -> Result<(), CliError> {
    if let Command::Sweep(a) = cmd {
        return sweep(a, cfg, out);
    }
    let (artifact, failure) = match cmd {
        Command::Heat(a) => heat(a, cfg)?,
        Command::BoundState => bound_state(cfg)?,
        Command::Bounds(a) => bounds(a, cfg)?,
        Command::Meanfield(MeanfieldCommand::Solve(a)) => meanfield_solve(a, cfg)?,
        Command::Meanfield(MeanfieldCommand::Ansatz(a)) => ansatz_table(n_list(a, cfg, &[]), cfg)?,
        Command::Meanfield(MeanfieldCommand::Asymptotics(a)) => asymptotics(a, cfg)?,
        Command::Meanfield(MeanfieldCommand::ChainCheck(a)) => chain_check(a, cfg)?,
        Command::Identities(a) => identities(a, cfg)?,
        Command::Consistency(a) => consistency(a, cfg)?,
        Command::Sweep(_) => unreachable!(),
    };
    emit(cfg, &artifact, out)?;
    failure.map_or(Ok(()), Err)
}

/// Shortest round-trip scientific notation, shared by every CSV.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn geometry_params(man: &Manifold<f64>) -> String {
    match *man {
        Manifold::Plane => String::new(),
        Manifold::Torus { l1, l2 } => format!("l1={};l2={}", num(l1), num(l2)),
        Manifold::Sphere { radius } | Manifold::HyperbolicPlane { radius } => {
            format!("radius={}", num(radius))
        }
    }
}

fn point(
    man: &Manifold<f64>,
    p: Option<(f64, f64)>,
    fallback: Point<f64>,
) -> Result<Point<f64>, CliError> {
    let pt = p.map_or(fallback, |(a, b)| Point::new(a, b));
    man.validate_point(&pt)?;
    Ok(pt)
}

fn fmt_point(p: &Point<f64>) -> String {
    format!("{};{}", num(p.x1), num(p.x2))
}

fn heat(a: &HeatArgs, cfg: &Config) -> Result<Outcome, CliError> {
    let (man, p) = (&cfg.manifold, &cfg.params);
    let x = point(man, a.x, p.source)?;
    let y = point(man, a.y, p.source)?;
    let lo = a.s_min.unwrap_or(cfg.numerics.s_min);
    let hi = a.s_max.unwrap_or(cfg.numerics.s_max);
    let points = a.points.map_or(cfg.numerics.s_points, |k| k as usize);
    if !(lo > 0.0 && hi > lo && points >= 2) {
        return Err(CliError::Usage(
            "need 0 < s-min < s-max and at least 2 points".into(),
        ));
    }
    let header = [
        "kind",
        "params",
        "s",
        "x",
        "y",
        "value",
        "residual_kind",
        "residual",
    ];
    let mut rows = Vec::new();
    let params = match geometry_params(man) {
        g if g.is_empty() => format!("m={}", num(p.m)),
        g => format!("m={};{g}", num(p.m)),
    };
    let base = |s: f64, value: f64, kind: &str, r: f64| {
        vec![
            man.kind().name().to_string(),
            params.clone(),
            num(s),
            fmt_point(&x),
            fmt_point(&y),
            num(value),
            kind.to_string(),
            num(r),
        ]
    };
    for s in log_grid(lo, hi, points) {
        let k = heat_kernel(man, &x, &y, s, p.m)?;
        let back = heat_kernel(man, &y, &x, s, p.m)?;
        let sym = if k == 0.0 {
            0.0
        } else {
            (k - back).abs() / k.abs()
        };
        rows.push(base(
            s,
            k,
            "heat_equation",
            heat_equation_residual(man, &x, &y, s, p.m)?,
        ));
        rows.push(base(s, k, "symmetry", sym));
        rows.push(base(
            s,
            k,
            "stochastic_completeness",
            stochastic_completeness_check(man, &y, s, p.m)?,
        ));
    }
    let header = header.iter().map(|s| s.to_string()).collect();
    Ok((Artifact::Csv { header, rows }, None))
}

fn root_check(residual: f64, tol: f64, what: &str) -> Option<CliError> {
    (residual > tol).then(|| {
        CliError::Check(format!(
            "{what}: residual {residual:e} exceeds tolerance {tol:e}"
        ))
    })
}

fn bound_state(cfg: &Config) -> Result<Outcome, CliError> {
    let (man, p) = (&cfg.manifold, &cfg.params);
    let b = solve_bound_state(p, man, cfg.numerics.bracket)?;
    let v = json!({
        "geometry": man.kind().name(),
        "params": geometry_params(man),
        "m": p.m,
        "mu": p.mu,
        "lambda": p.lambda,
        "E": b.energy,
        "residual": b.residual,
        "iterations": b.iterations,
        "bracket": [b.bracket.0, b.bracket.1],
    });
    let fail = root_check(b.residual, cfg.numerics.tolerance, "bound state");
    Ok((Artifact::Json(v), fail))
}

fn bounds(a: &BoundsArgs, cfg: &Config) -> Result<Outcome, CliError> {
    let (man, p) = (&cfg.manifold, &cfg.params);
    let grid = default_fit_grid(man, p.m);
    let report = bound_report(p, man, &grid)?;
    let json = Artifact::Json(json!({
        "geometry": man.kind().name(),
        "n": p.n,
        "report": report,
    }));
    if a.n_list.is_empty() {
        return Ok((json, None));
    }
    let fit = diagonal_bound_check(man, &grid, p.m)?;
    let mut rows = Vec::new();
    for &n in &a.n_list {
        let pn = p.with_n(n as u64);
        let r = bound_report(&pn, man, &grid)?;
        let norm = norm_bound_u(r.lower_bound, &pn, man)?.value();
        rows.push(vec![
            num(n),
            num(fit.constant),
            num(r.lower_bound),
            num(norm),
        ]);
    }
    let header = ["n", "constant", "lower_bound", "norm_bound"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let csv = Artifact::Csv { header, rows };
    Ok((
        Artifact::Either {
            csv: Box::new(csv),
            json: Box::new(json),
            default: Format::Json,
        },
        None,
    ))
}

fn n_list(a: &NListArgs, cfg: &Config, default: &[f64]) -> Vec<u64> {
    if !a.n_list.is_empty() {
        a.n_list.iter().map(|&n| n as u64).collect()
    } else if !default.is_empty() {
        default.iter().map(|&n| n as u64).collect()
    } else {
        vec![cfg.params.n]
    }
}

const MF_HEADER: [&str; 7] = [
    "n",
    "chi",
    "E",
    "deficit",
    "predicted_deficit",
    "ratio",
    "residual",
];

fn mf_header() -> Vec<String> {
    MF_HEADER.iter().map(|s| s.to_string()).collect()
}

/// `λ√(n/V)` on compact surfaces, `2mCeλ² ln n` otherwise.
fn predicted_deficit(p: &PhysicalParams<f64>, man: &Manifold<f64>, c_const: f64) -> Option<f64> {
    let n = p.n as f64;
    match man.volume() {
        Some(v) => Some(p.lambda * (n / v).sqrt()),
        None if p.n >= 2 => {
            Some(2.0 * p.m * c_const * std::f64::consts::E * p.lambda * p.lambda * n.ln())
        }
        None => None,
    }
}

fn mf_row(
    n: u64,
    chi: f64,
    e: f64,
    p: &PhysicalParams<f64>,
    predicted: Option<f64>,
    residual: f64,
) -> Vec<String> {
    let deficit = n as f64 * p.m + p.mu - e;
    let pred = predicted.map(num).unwrap_or_default();
    let ratio = predicted
        .filter(|&d| d != 0.0)
        .map(|d| num(deficit / d))
        .unwrap_or_default();
    vec![
        num(n as f64),
        num(chi),
        num(e),
        num(deficit),
        pred,
        ratio,
        num(residual),
    ]
}

fn meanfield_solve(a: &NListArgs, cfg: &Config) -> Result<Outcome, CliError> {
    let (man, p) = (&cfg.manifold, &cfg.params);
    let trial = trial_for(man, p.m, cfg.numerics.width)?;
    let c_const = fitted_constant(man, p.m)?;
    let mut rows = Vec::new();
    let mut fail = None;
    for n in n_list(a, cfg, &[]) {
        let pn = p.with_n(n);
        let s = solve_chi(&trial, &pn, man)?;
        let scale = s.chi.abs().max(pn.m).max(pn.mu.abs());
        fail = fail.or(root_check(
            s.residual,
            cfg.numerics.tolerance * scale.max(1.0),
            "chi equation",
        ));
        rows.push(mf_row(
            n,
            s.chi,
            s.energy,
            &pn,
            predicted_deficit(&pn, man, c_const),
            s.residual,
        ));
    }
    Ok((
        Artifact::Csv {
            header: mf_header(),
            rows,
        },
        fail,
    ))
}

fn ansatz_table(ns: Vec<u64>, cfg: &Config) -> Result<Outcome, CliError> {
    let (man, p) = (&cfg.manifold, &cfg.params);
    let mut rows = Vec::new();
    for n in ns {
        let pn = p.with_n(n);
        let s = constant_ansatz_energy(&pn, man, cfg.numerics.ansatz)?;
        rows.push(mf_row(
            n,
            s.gap,
            s.energy,
            &pn,
            predicted_deficit(&pn, man, 0.0),
            s.residual,
        ));
    }
    Ok((
        Artifact::Csv {
            header: mf_header(),
            rows,
        },
        None,
    ))
}

fn asymptotics(a: &NListArgs, cfg: &Config) -> Result<Outcome, CliError> {
    let default = [1e4, 1e5, 1e6];
    if cfg.manifold.is_compact() {
        ansatz_table(n_list(a, cfg, &default), cfg)
    } else {
        let ns = n_list(a, cfg, &default)
            .into_iter()
            .map(|n| n as f64)
            .collect();
        meanfield_solve(&NListArgs { n_list: ns }, cfg)
    }
}

fn chain_check(a: &ChainArgs, cfg: &Config) -> Result<Outcome, CliError> {
    let (man, p) = (&cfg.manifold, &cfg.params);
    let samples = random_chain_check(p, man, a.draws, cfg.numerics.seed)?;
    let all_hold = samples
        .iter()
        .all(|s| s.report.all_hold && s.report.interesting_regime);
    let exact_schedule = samples
        .iter()
        .all(|s| (s.schedule.ratio - 1.0).abs() <= 4.0 * f64::EPSILON);
    let v = json!({
        "geometry": man.kind().name(),
        "seed": cfg.numerics.seed,
        "draws": a.draws,
        "all_hold": all_hold,
        "schedule_exact": exact_schedule,
        "samples": samples,
    });
    let fail = (!(all_hold && exact_schedule))
        .then(|| CliError::Check("a chain term exceeded its cap".into()));
    Ok((Artifact::Json(v), fail))
}

fn identities(a: &IdentitiesArgs, cfg: &Config) -> Result<Outcome, CliError> {
    let suite = SuiteConfig {
        seed: cfg.numerics.seed,
        positivity_draws: a.positivity_draws,
        minimum_draws: a.minimum_draws,
        identity_draws: a.identity_draws,
    };
    let report = run_identity_suite(&suite)?;
    let fail = (!report.all_passed).then(|| {
        let bad: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        CliError::Check(format!("identity checks failed: {}", bad.join(", ")))
    });
    Ok((Artifact::Json(serde_json::to_value(&report)?), fail))
}

fn consistency(a: &ConsistencyArgs, cfg: &Config) -> Result<Outcome, CliError> {
    let radius = match cfg.manifold {
        Manifold::Sphere { radius } | Manifold::HyperbolicPlane { radius } => radius,
        _ => 1.0,
    };
    let mans = [Manifold::sphere(radius)?, Manifold::hyperbolic(radius)?];
    let grid = random_grid(cfg.numerics.seed, a.per_geometry, &mans);
    let report = consistency_matrix(&grid, cfg.numerics.width);
    let fail = (!report.all_passed).then(|| {
        CliError::Check(format!(
            "mean-field energy below the lower bound (min margin {:e})",
            report.min_margin
        ))
    });
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.geometry.clone(),
                num(r.m),
                num(r.mu),
                num(r.lambda),
                r.n.to_string(),
                opt(r.meanfield_energy),
                opt(r.lower_bound),
                opt(r.margin),
                r.passed.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let header = [
        "index",
        "geometry",
        "m",
        "mu",
        "lambda",
        "n",
        "meanfield_energy",
        "lower_bound",
        "margin",
        "passed",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let csv = Artifact::Csv { header, rows };
    let json = Artifact::Json(serde_json::to_value(&report)?);
    Ok((
        Artifact::Either {
            csv: Box::new(csv),
            json: Box::new(json),
            default: Format::Json,
        },
        fail,
    ))
}

fn sweep_spec(a: &SweepArgs, cfg: &Config) -> Result<SweepSpec, CliError> {
    if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        return serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("sweep spec: {e}")));
    }
    let name = a
        .axis
        .as_deref()
        .ok_or_else(|| CliError::Usage("--axis is required without --spec".into()))?;
    let axis = Axis::from_name(name).ok_or_else(|| {
        let names: Vec<&str> = Axis::ALL.iter().map(|a| a.name()).collect();
        CliError::Usage(format!(
            "unknown axis `{name}` (expected one of {})",
            names.join(", ")
        ))
    })?;
    let grid = |v: &[f64], flag: &str| -> Result<(f64, f64, usize), CliError> {
        match *v {
            [from, to, k] if k >= 1.0 && k.fract() == 0.0 => Ok((from, to, k as usize)),
            _ => Err(CliError::Usage(format!("--{flag} takes from,to,points"))),
        }
    };
    let given = [
        !a.values.is_empty(),
        !a.log.is_empty(),
        !a.linear.is_empty(),
    ];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(CliError::Usage(
            "give exactly one of --values, --log, --linear".into(),
        ));
    }
    let values = if !a.values.is_empty() {
        AxisValues::List {
            values: a.values.clone(),
        }
    } else if !a.log.is_empty() {
        let (from, to, points) = grid(&a.log, "log")?;
        AxisValues::Log { from, to, points }
    } else {
        let (from, to, points) = grid(&a.linear, "linear")?;
        AxisValues::Linear { from, to, points }
    };
    if a.outputs.is_empty() {
        return Err(CliError::Usage(
            "--outputs needs at least one quantity".into(),
        ));
    }
    let defaults = Settings::default();
    Ok(SweepSpec {
        axis,
        values,
        params: cfg.params,
        manifold: cfg.manifold,
        outputs: a.outputs.clone(),
        seed: cfg.numerics.seed,
        settings: Settings {
            epsilon: cfg.numerics.epsilon,
            s: a.s.unwrap_or(defaults.s),
            width: cfg.numerics.width,
            gap: a.gap.unwrap_or(defaults.gap),
            ansatz: cfg.numerics.ansatz,
        },
    })
}

fn sweep<W: Write>(a: &SweepArgs, cfg: &Config, out: &mut W) -> Result<(), CliError> {
    let spec = sweep_spec(a, cfg)?;
    let result = run_sweep(&spec)?;
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => match &cfg.path {
            Some(path) => {
                persist(&result, path)?;
            }
            None => out.write_all(csv_string(&result)?.as_bytes())?,
        },
        Format::Json => {
            let v = json!({
                "config_hash": result.metadata.config_hash,
                "spec": result.spec,
                "quantities": result.quantities,
                "rows": result.rows,
            });
            emit(cfg, &Artifact::Json(v), out)?;
        }
    }
    Ok(())
}

fn trial_for(man: &Manifold<f64>, m: f64, width: f64) -> Result<TrialState<f64>, CliError> {
    Ok(if man.is_compact() {
        TrialState::Constant
    } else {
        TrialState::Gaussian(GaussianTrial::new(man, m, width)?)
    })
}

fn fitted_constant(man: &Manifold<f64>, m: f64) -> Result<f64, CliError> {
    Ok(diagonal_bound_check(man, &default_fit_grid(man, m), m)?.constant)
}

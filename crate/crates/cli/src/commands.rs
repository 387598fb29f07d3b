use std::path::Path;
use std::time::Instant;

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use sllift_core::actions::{self, ActionError, DiameterProfile, Space};
use sllift_core::hardness::{self, HardnessError};
use sllift_core::lifting::{self, LiftError};
use sllift_core::oracle::{self, OracleError, DEFAULT_BUDGET};
use sllift_core::residue::ResidueError;
use sllift_core::{HardInstance, LiftConfig, MinNorm, Obstruction, Residue};

use crate::parse::parse_matrix;
use crate::record::{write_atomic, write_csv, ExperimentRecord, Obj};
use crate::{Cli, CliError, Command, HardArgs, LiftArgs, SpaceArg, SweepArgs, SweepKind};

type Result<T> = std::result::Result<T, CliError>;

fn residue_err(e: ResidueError) -> CliError {
    match e {
        ResidueError::PrimeTooLarge { .. }
        | ResidueError::FactorLimitExceeded(_)
        | ResidueError::TooManyRoots { .. } => CliError::Budget(e.to_string()),
        ResidueError::BadModulus(_) | ResidueError::ZeroExponent => CliError::Usage(e.to_string()),
        _ => CliError::Infeasible(e.to_string()),
    }
}

fn lift_err(e: LiftError) -> CliError {
    match e {
        LiftError::SearchExhausted { .. } => CliError::Budget(e.to_string()),
        LiftError::Matrix(sllift_core::intmat::IntMatError::NotInvertible { .. })
        | LiftError::NotExtendableModQ { .. }
        | LiftError::NotExtendable(_)
        | LiftError::InvalidInput(_) => CliError::Infeasible(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

fn hardness_err(e: HardnessError) -> CliError {
    match e {
        HardnessError::Residue(r) => residue_err(r),
        HardnessError::SieveExhausted { .. } => CliError::Budget(e.to_string()),
        HardnessError::NoUnitAlpha { .. } => CliError::Infeasible(e.to_string()),
        HardnessError::InvalidInput(_) => CliError::Usage(e.to_string()),
    }
}

fn oracle_err(e: OracleError) -> CliError {
    match e {
        OracleError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
        OracleError::InvalidSpec(_) => CliError::Usage(e.to_string()),
    }
}

fn action_err(e: ActionError) -> CliError {
    match e {
        ActionError::Oracle(o) => oracle_err(o),
        ActionError::NotPrimitive { .. } => CliError::Infeasible(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let budget = cli.oracle_budget.unwrap_or(DEFAULT_BUDGET);
    match &cli.command {
        Command::Lift(a) => cmd_lift(a),
        Command::Hard(a) => cmd_hard(a, budget),
        Command::Sweep(a) => cmd_sweep(a, budget),
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn emit(record: &ExperimentRecord, json: bool, out: Option<&Path>, human: impl FnOnce()) -> Result<()> {
    let line = record.to_json();
    if json {
        println!("{line}");
    } else {
        human();
    }
    if let Some(p) = out {
        write_atomic(p, format!("{line}\n").as_bytes())?;
    }
    Ok(())
}

fn residue_obj(key: &str, r: &Residue, obj: Obj) -> Obj {
    obj.u(key, r.value())
}

pub fn cmd_lift(a: &LiftArgs) -> Result<()> {
    if a.n < 2 {
        return Err(CliError::Usage(format!("n must be at least 2, got {}", a.n)));
    }
    if a.q == 0 || a.q > sllift_core::residue::MAX_MODULUS {
        return Err(CliError::Usage(format!("q must be in 1..=2^63-1, got {}", a.q)));
    }
    if !(a.c.is_finite() && a.c > 0.0) {
        return Err(CliError::Usage(format!("c must be positive, got {}", a.c)));
    }
    let start = Instant::now();
    let x = if a.matrix.trim() == "random" {
        lifting::random_sl(&mut ChaCha8Rng::seed_from_u64(a.seed), a.n, a.q)
    } else {
        parse_matrix(&a.matrix, a.n)?
    };
    let config = LiftConfig {
        c: a.c,
        ..LiftConfig::default()
    };
    let cert = lifting::lift(&x, a.q, a.seed, &config).map_err(lift_err)?;
    let ql = a.q as f64 * (a.q as f64).log2();
    let results = Obj::new()
        .u("n", a.n as u64)
        .u("q", a.q)
        .matrix("x", &x.reduce_mod(a.q))
        .matrix("gamma", &cert.gamma)
        .big("first_rows_max", &cert.first_rows_max)
        .big("last_row_max", &cert.last_row_max)
        .f("first_rows_ratio", ratio(&cert.first_rows_max, ql))
        .f("last_row_ratio", ratio(&cert.last_row_max, ql * a.q as f64))
        .f("op_norm_estimate", cert.gamma.spectral_norm_estimate())
        .u("trials_used", cert.trials_used)
        .v("used_fallback", cert.used_fallback)
        .v("verified", true)
        .done();
    let record = ExperimentRecord {
        command: "lift".into(),
        params: Obj::new()
            .u("n", a.n as u64)
            .u("q", a.q)
            .v("matrix", a.matrix.trim())
            .f("c", a.c)
            .into_map(),
        seed: a.seed,
        results,
        wall_time_ms: elapsed_ms(start),
    };
    emit(&record, a.json, a.out.as_deref(), || {
        println!("gamma =");
        for row in cert.gamma.row_vecs() {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            println!("  [{}]", cells.join(", "));
        }
        println!("det(gamma) = 1, gamma ≡ x mod {}", a.q);
        println!("first rows max |entry| = {}", cert.first_rows_max);
        println!("last row max |entry| = {}", cert.last_row_max);
        println!(
            "row search trials = {}{}",
            cert.trials_used,
            if cert.used_fallback { " (fallback)" } else { "" }
        );
    })
}

fn ratio(v: &BigInt, denom: f64) -> f64 {
    if denom > 0.0 {
        v.to_string().parse::<f64>().unwrap_or(f64::INFINITY) / denom
    } else {
        f64::NAN
    }
}

fn instance_results(h: &HardInstance) -> Obj {
    let witness = match &h.witness {
        Some(w) => {
            let o = Obj::new().u("q2", w.q2).u("n", w.n as u64);
            let o = residue_obj("alpha", &w.alpha, o);
            residue_obj("beta", &w.beta, o)
                .u("abs_alpha", w.abs_alpha)
                .u("abs_n_beta", w.abs_n_beta)
                .done()
        }
        None => Value::Null,
    };
    let obstruction = match &h.obstruction {
        Obstruction::DiagonalCongruence { alpha, n_beta } => Obj::new()
            .v("kind", "diagonal_congruence")
            .u("modulus", alpha.modulus())
            .u("alpha", alpha.value())
            .u("n_beta", n_beta.value())
            .done(),
        Obstruction::Trace { residue } => Obj::new()
            .v("kind", "trace")
            .u("modulus", residue.modulus())
            .u("residue", residue.value())
            .done(),
    };
    let bound = Obj::new()
        .u("num", h.lower_bound_num)
        .u("den", h.lower_bound_den)
        .u("ceil", h.lower_bound_ceil())
        .f("value", h.lower_bound())
        .done();
    Obj::new()
        .u("q", h.q)
        .u("n", h.n as u64)
        .matrix("x", &h.x)
        .v("witness", witness)
        .v("obstruction", obstruction)
        .v("lower_bound", bound)
        .v("vacuous", h.is_vacuous())
        .v("degenerate", h.degenerate)
}

pub fn cmd_hard(a: &HardArgs, budget: u128) -> Result<()> {
    let start = Instant::now();
    let (h, params) = match (a.sarnak_m, a.q) {
        (Some(m), _) => (
            hardness::sarnak_instance(m).map_err(hardness_err)?,
            Obj::new().u("sarnak_m", m),
        ),
        (None, Some(q)) => (
            hardness::hard_instance(q, a.n, a.budget).map_err(hardness_err)?,
            Obj::new().u("q", q).u("n", a.n as u64).u("budget", a.budget),
        ),
        (None, None) => return Err(CliError::Usage("either --q or --sarnak-m is required".into())),
    };
    let mut results = instance_results(&h);
    let mut params = params;
    let mut outcome = Ok(());
    let mut flagged = false;
    if let Some(t_max) = a.verify_oracle {
        params = params.u("verify_oracle", t_max);
        let oracle = match oracle::min_lift_norm(&h.x, h.q, t_max, budget) {
            Ok(MinNorm::Found { norm, witness }) => {
                let meets = norm >= h.lower_bound_ceil();
                let holds = h.obstruction.holds(&witness);
                if !(meets && holds) {
                    outcome = Err(CliError::Usage(format!(
                        "check failed: oracle minimum {norm} vs bound {}, obstruction holds: {holds}",
                        h.lower_bound_ceil()
                    )));
                }
                Obj::new()
                    .v("status", "found")
                    .u("min_norm", norm)
                    .matrix("witness", &witness)
                    .v("meets_bound", meets)
                    .v("obstruction_holds", holds)
                    .done()
            }
            Ok(MinNorm::Unbounded { t_max }) => Obj::new().v("status", "unbounded").u("t_max", t_max).done(),
            Err(e @ OracleError::BudgetExceeded { candidates, .. }) => {
                flagged = true;
                outcome = Err(oracle_err(e));
                Obj::new()
                    .v("status", "budget_exceeded")
                    .v("candidates_str", candidates.to_string())
                    .done()
            }
            Err(e) => return Err(oracle_err(e)),
        };
        results = results.v("oracle", oracle);
    }
    let results = results.v("flagged", flagged).done();
    let record = ExperimentRecord {
        command: "hard".into(),
        params: params.into_map(),
        seed: 0,
        results,
        wall_time_ms: elapsed_ms(start),
    };
    emit(&record, a.json, a.out.as_deref(), || {
        println!("q = {}, n = {}", h.q, h.n);
        println!("x = {}", h.x);
        if let Some(w) = &h.witness {
            println!(
                "beta^{} = alpha mod {}: alpha = {} (|alpha| = {}), beta = {}, |n beta| = {}",
                w.n, w.q2, w.alpha.value(), w.abs_alpha, w.beta.value(), w.abs_n_beta
            );
        }
        match &h.obstruction {
            Obstruction::DiagonalCongruence { alpha, n_beta } => println!(
                "every lift: {} a_1 + a_2 + ... + a_n ≡ {} mod {}",
                alpha.value(),
                n_beta.value(),
                alpha.modulus()
            ),
            Obstruction::Trace { residue } => {
                println!("every lift: trace ≡ {} mod {}", residue.value(), residue.modulus())
            }
        }
        println!(
            "every lift has norm >= {}/{} (>= {}){}",
            h.lower_bound_num,
            h.lower_bound_den,
            h.lower_bound_ceil(),
            if h.is_vacuous() { " [vacuous]" } else { "" }
        );
        if let Some(o) = record.results.get("oracle") {
            println!("oracle: {o}");
        }
    })?;
    outcome
}

struct Point {
    params: Map<String, Value>,
    results: Result<Value>,
    wall_time_ms: u64,
}

const ROOT_COLUMNS: &[&str] = &["q", "n", "k", "alpha", "beta", "abs_alpha", "abs_n_beta", "ratio", "error"];
const DRS_COLUMNS: &[&str] = &["n", "T", "count", "ratio", "error"];
const SKEWED_COLUMNS: &[&str] = &["T", "count", "normalized", "error"];
const DIAMETER_COLUMNS: &[&str] = &[
    "space", "n", "q", "points", "pairs", "unreached", "diameter_norm", "q50", "q90", "q99",
    "diameter_exponent", "error",
];
const LIFT_COLUMNS: &[&str] = &[
    "n", "q", "samples", "failures", "first_rows_ratio", "last_row_ratio", "max_trials", "fallbacks", "error",
];

fn shared_params(a: &SweepArgs) -> Obj {
    let o = Obj::new().v("kind", kind_name(a.kind));
    match a.kind {
        SweepKind::Roots => o.u("n", a.n as u64).u("k", a.k as u64).u("alpha_budget", a.alpha_budget),
        SweepKind::Drs => o.u("n", a.n as u64),
        SweepKind::Skewed => o,
        SweepKind::Diameter => {
            let o = o.v("space", space_name(a.space)).u("n", a.n as u64);
            match a.t_max {
                Some(t) => o.u("t_max", t),
                None => o,
            }
        }
        SweepKind::LiftBounds => o.u("n", a.n as u64).u("samples", a.samples).f("c", a.c),
    }
}

fn kind_name(k: SweepKind) -> &'static str {
    match k {
        SweepKind::Roots => "roots",
        SweepKind::Drs => "drs",
        SweepKind::Skewed => "skewed",
        SweepKind::Diameter => "diameter",
        SweepKind::LiftBounds => "lift-bounds",
    }
}

fn space_name(s: SpaceArg) -> &'static str {
    match s {
        SpaceArg::A => "A",
        SpaceArg::P => "P",
    }
}

fn timed(params: Map<String, Value>, f: impl FnOnce() -> Result<Value>) -> Point {
    let start = Instant::now();
    let results = f();
    Point {
        params,
        results,
        wall_time_ms: elapsed_ms(start),
    }
}

fn with_point(shared: &Obj, key: &str, v: u64) -> Map<String, Value> {
    let mut m = shared.clone().into_map();
    m.extend(Obj::new().u(key, v).into_map());
    m
}

fn sweep_points(a: &SweepArgs, budget: u128) -> Result<Vec<Point>> {
    let shared = shared_params(a);
    let qs = |default: &[u64]| a.q.clone().map(|v| v.0).unwrap_or_else(|| default.to_vec());
    let ts = a.t.clone().map(|v| v.0).unwrap_or_else(|| (1..=8).collect());
    let points = match a.kind {
        SweepKind::Roots => qs(&(2..=100).collect::<Vec<_>>())
            .into_iter()
            .map(|q| {
                timed(with_point(&shared, "q", q), || {
                    let w = hardness::root_with_fallback(q, a.n as u32, a.alpha_budget, a.k)
                        .map_err(hardness_err)?;
                    let exp = 1.0 - 1.0 / a.k.max(1) as f64;
                    Ok(Obj::new()
                        .u("q", q)
                        .u("n", a.n as u64)
                        .u("k", a.k as u64)
                        .u("alpha", w.alpha.value())
                        .u("beta", w.beta.value())
                        .u("abs_alpha", w.abs_alpha)
                        .u("abs_n_beta", w.abs_n_beta)
                        .f("ratio", w.abs_n_beta as f64 / (q as f64).powf(exp))
                        .v("valid", w.is_valid())
                        .done())
                })
            })
            .collect(),
        SweepKind::Drs => {
            let start = Instant::now();
            let table = oracle::drs_table(a.n, &ts, budget);
            let ms = elapsed_ms(start);
            ts.iter()
                .enumerate()
                .map(|(i, &t)| Point {
                    params: with_point(&shared, "T", t),
                    results: match &table {
                        Ok(rows) => {
                            let r = &rows[i];
                            let o = Obj::new().u("n", a.n as u64).u("T", r.t).u("count", r.count);
                            Ok(match r.ratio {
                                Some(x) => o.f("ratio", x),
                                None => o.v("ratio", Value::Null),
                            }
                            .done())
                        }
                        Err(e) => Err(oracle_err(e.clone())),
                    },
                    wall_time_ms: if i == 0 { ms } else { 0 },
                })
                .collect()
        }
        SweepKind::Skewed => ts
            .iter()
            .map(|&t| {
                timed(with_point(&shared, "T", t), || {
                    let r = &oracle::skewed_counts(&[t], budget).map_err(oracle_err)?[0];
                    Ok(Obj::new()
                        .u("T", r.t)
                        .u("count", r.count)
                        .f("normalized", r.normalized)
                        .done())
                })
            })
            .collect(),
        SweepKind::Diameter => {
            let space = match a.space {
                SpaceArg::A => Space::Affine,
                SpaceArg::P => Space::Projective,
            };
            qs(&(2..=8).collect::<Vec<_>>())
                .into_iter()
                .map(|q| {
                    timed(with_point(&shared, "q", q), || {
                        let t_max = a.t_max.unwrap_or(4 * q.max(1));
                        let p = actions::diameter_profile(space, a.n, q, t_max, budget).map_err(action_err)?;
                        Ok(profile_results(&p, t_max))
                    })
                })
                .collect()
        }
        SweepKind::LiftBounds => qs(&[16, 101, 1024])
            .into_iter()
            .map(|q| timed(with_point(&shared, "q", q), || lift_bounds(a, q)))
            .collect(),
    };
    Ok(points)
}

fn opt_u(o: Obj, key: &str, v: Option<u64>) -> Obj {
    match v {
        Some(v) => o.u(key, v),
        None => o.v(key, Value::Null),
    }
}

fn opt_f(o: Obj, key: &str, v: Option<f64>) -> Obj {
    match v {
        Some(v) => o.f(key, v),
        None => o.v(key, Value::Null),
    }
}

fn profile_results(p: &DiameterProfile, t_max: u64) -> Value {
    let o = Obj::new()
        .v("space", p.space.to_string())
        .u("n", p.n as u64)
        .u("q", p.q)
        .u("t_max", t_max)
        .u("points", p.points as u64)
        .u("pairs", p.pairs as u64)
        .u("unreached", p.unreached as u64);
    let o = opt_u(o, "diameter_norm", p.diameter_norm);
    let o = opt_u(o, "q50", p.quantile_norms[0]);
    let o = opt_u(o, "q90", p.quantile_norms[1]);
    let o = opt_u(o, "q99", p.quantile_norms[2]);
    let o = opt_f(o, "diameter_exponent", p.diameter_exponent);
    let o = opt_f(o, "q50_exponent", p.quantile_exponents[0]);
    let o = opt_f(o, "q90_exponent", p.quantile_exponents[1]);
    opt_f(o, "q99_exponent", p.quantile_exponents[2]).done()
}

fn lift_bounds(a: &SweepArgs, q: u64) -> Result<Value> {
    if a.n < 2 || q == 0 {
        return Err(CliError::Usage(format!("need n >= 2 and q >= 1 (n = {}, q = {q})", a.n)));
    }
    let config = LiftConfig {
        c: a.c,
        ..LiftConfig::default()
    };
    let ql = q as f64 * (q as f64).log2();
    let (mut failures, mut fallbacks, mut max_trials) = (0u64, 0u64, 0u64);
    let (mut first, mut last) = (0f64, 0f64);
    for i in 0..a.samples {
        let seed = a.seed ^ (q << 20) ^ i;
        let x = lifting::random_sl(&mut ChaCha8Rng::seed_from_u64(seed), a.n, q);
        match lifting::lift(&x, q, seed, &config) {
            Ok(c) => {
                first = first.max(ratio(&c.first_rows_max, ql));
                last = last.max(ratio(&c.last_row_max, ql * q as f64));
                max_trials = max_trials.max(c.trials_used);
                fallbacks += c.used_fallback as u64;
            }
            Err(e) => {
                log::warn!("lift failed for q = {q}, sample {i}: {e}");
                failures += 1;
            }
        }
    }
    Ok(Obj::new()
        .u("n", a.n as u64)
        .u("q", q)
        .u("samples", a.samples)
        .u("failures", failures)
        .f("first_rows_ratio", first)
        .f("last_row_ratio", last)
        .u("max_trials", max_trials)
        .u("fallbacks", fallbacks)
        .done())
}

fn cell(results: &Value, params: &Map<String, Value>, col: &str) -> String {
    let find = |m: &Map<String, Value>| m.get(col).or_else(|| m.get(&format!("{col}_str"))).cloned();
    let v = results
        .as_object()
        .and_then(find)
        .or_else(|| find(params))
        .unwrap_or(Value::Null);
    match v {
        Value::Null => String::new(),
        Value::String(s) => s,
        other => other.to_string(),
    }
}

pub fn cmd_sweep(a: &SweepArgs, budget: u128) -> Result<()> {
    let points = sweep_points(a, budget)?;
    if points.is_empty() {
        return Err(CliError::Usage("empty sweep".into()));
    }
    let columns = match a.kind {
        SweepKind::Roots => ROOT_COLUMNS,
        SweepKind::Drs => DRS_COLUMNS,
        SweepKind::Skewed => SKEWED_COLUMNS,
        SweepKind::Diameter => DIAMETER_COLUMNS,
        SweepKind::LiftBounds => LIFT_COLUMNS,
    };
    let mut lines = String::new();
    let mut rows = Vec::new();
    let mut first_error = None;
    let mut successes = 0usize;
    for p in points {
        let results = match p.results {
            Ok(v) => {
                successes += 1;
                v
            }
            Err(e) => {
                let v = Obj::new().v("error", e.to_string()).u("exit_class", e.code() as u64).done();
                first_error.get_or_insert(e);
                v
            }
        };
        rows.push(columns.iter().map(|c| cell(&results, &p.params, c)).collect::<Vec<_>>());
        let record = ExperimentRecord {
            command: "sweep".into(),
            params: p.params,
            seed: a.seed,
            results,
            wall_time_ms: p.wall_time_ms,
        };
        let line = record.to_json();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    }
    if let Some(path) = &a.out {
        write_atomic(path, lines.as_bytes())?;
    }
    if let Some(path) = &a.csv {
        write_csv(path, columns, &rows)?;
    }
    match (successes, first_error) {
        (0, Some(e)) => Err(e),
        _ => Ok(()),
    }
}

use std::path::Path;
use std::process::ExitCode;

use arqg::dynamics::{
    compare_modes, run_learning, CompareConfig, LearningConfig, LearningMode, LearningTrace,
};
use arqg::equilibrium::{
    cost_for_threshold, critical_costs, find_equilibria, peak_threshold, ReservationCost,
};
use arqg::queue::{md1_wait, wait_ar, wait_noar};
use arqg::revenue::{conservative_optimum, price_of_conservatism, revenue_at, static_optimum};
use arqg::sim::{self, validate_waits, EngineKind, SimConfig};
use arqg::{QueueParams, Threshold};
use serde_json::{json, Value};

use crate::config::FileConfig;
use crate::output::{emit, num, CliError, Table};
use crate::{
    AnalyzeArgs, Common, EngineArg, EquilibriaArgs, LearnArgs, LearnMode, SimulateArgs, SweepArgs,
    SweepKind,
};

const DEFAULT_STEPS: usize = 10_000;

type Outcome = Result<ExitCode, CliError>;

fn queue(cfg: &FileConfig, common: &Common) -> Result<QueueParams, CliError> {
    let lambda = cfg.require("lambda", common.lambda)?;
    let mu = cfg.require("mu", common.mu)?;
    Ok(QueueParams::new(lambda, mu)?)
}

fn params_json(p: &QueueParams) -> Value {
    json!({ "lambda": p.arrival_rate(), "mu": p.service_rate() })
}

fn with(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

pub fn analyze(args: AnalyzeArgs) -> Outcome {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let p = queue(&cfg, &args.common)?;
    let tau = cfg.pick("tau", args.tau)?.map(Threshold::new).transpose()?;
    let cc = critical_costs(&p);
    let mut result = json!({
        "rho": p.utilization(),
        "md1_wait": md1_wait(&p),
        "lower_critical_cost": cc.lower,
        "upper_critical_cost": cc.upper,
        "peak_threshold": peak_threshold(&p),
    });
    if let Some(t) = tau {
        result["wait_ar"] = json!(wait_ar(&p, t));
        result["wait_noar"] = json!(wait_noar(&p, t));
        result["cost_for_threshold"] = json!(cost_for_threshold(&p, t));
    }
    let params = with(params_json(&p), json!({ "tau": tau }));
    emit("analyze", &params, None, &result)?;
    Ok(ExitCode::SUCCESS)
}

pub fn equilibria(args: EquilibriaArgs) -> Outcome {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let p = queue(&cfg, &args.common)?;
    let cost = ReservationCost::new(cfg.require("cost", args.cost)?)?;
    let eq = find_equilibria(&p, cost);
    let params = with(params_json(&p), json!({ "cost": cost }));
    emit("equilibria", &params, None, &eq)?;
    Ok(ExitCode::SUCCESS)
}

pub fn sweep(args: SweepArgs) -> Outcome {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let what: SweepKind = cfg.require("what", args.what)?;
    let n: usize = cfg.require("points", args.points)?;
    if n < 2 {
        return Err(CliError::Param(format!("--points must be at least 2 (got {n})")));
    }
    let out: Option<std::path::PathBuf> = cfg.pick("out", args.out)?;
    let (kind, params) = match what {
        SweepKind::Poc => ("poc", json!({ "points": n })),
        SweepKind::CostCurve | SweepKind::Revenue => {
            let p = queue(&cfg, &args.common)?;
            let kind = if matches!(what, SweepKind::Revenue) { "revenue" } else { "cost-curve" };
            (kind, with(params_json(&p), json!({ "points": n })))
        }
    };
    let mut table;
    match what {
        SweepKind::CostCurve => {
            let p = queue(&cfg, &args.common)?;
            table = Table::create(out.as_deref(), &["tau", "cost"])?;
            // τ_i = i/(n-1) on [0, 1].
            for i in 0..n {
                let tau = i as f64 / (n - 1) as f64;
                let c = cost_for_threshold(&p, Threshold::new(tau)?);
                table.row([num(tau), num(c.value())])?;
            }
        }
        SweepKind::Revenue => {
            let p = queue(&cfg, &args.common)?;
            table = Table::create(out.as_deref(), &["tau", "fee", "revenue"])?;
            // τ_i = i/n on (0, 1]; τ = 0 earns nothing at a zero fee.
            for i in 1..=n {
                let tau = Threshold::new(i as f64 / n as f64)?;
                let fee = cost_for_threshold(&p, tau);
                table.row([num(tau.value()), num(fee.value()), num(revenue_at(&p, tau)?)])?;
            }
        }
        SweepKind::Poc => {
            table = Table::create(out.as_deref(), &["rho", "static_revenue", "guaranteed_revenue", "poc"])?;
            // ρ_i = i/(n+1) on (0, 1).
            for i in 1..=n {
                let p = QueueParams::from_utilization(i as f64 / (n + 1) as f64)?;
                let s = static_optimum(&p).revenue;
                // Below ρ = 2/3 the guaranteed optimum is the static one.
                let g = match conservative_optimum(&p) {
                    Ok(g) if p.utilization() > 2.0 / 3.0 => g.revenue,
                    _ => s,
                };
                table.row([num(p.utilization()), num(s), num(g), num(price_of_conservatism(&p))])?;
            }
        }
    }
    table.finish()?;
    if let Some(path) = out {
        let result = json!({ "kind": kind, "rows": n, "path": path.display().to_string() });
        emit("sweep", &params, None, &result)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn write_trace(path: &Path, trace: &LearningTrace) -> Result<(), CliError> {
    let mut t = Table::create(
        Some(path),
        &["index", "belief_in", "realized_threshold", "demand", "reservations", "belief_out"],
    )?;
    for r in &trace.records {
        t.row([
            r.index.to_string(),
            num(r.belief_in.value()),
            num(r.realized_threshold.value()),
            r.demand.to_string(),
            r.reservations.to_string(),
            num(r.belief_out.value()),
        ])?;
    }
    t.finish()
}

pub fn learn(args: LearnArgs) -> Outcome {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let p = queue(&cfg, &args.common)?;
    let mode: LearnMode = cfg.require("mode", args.mode)?;
    let fee = ReservationCost::new(cfg.require("cost", args.cost)?)?;
    let belief = Threshold::new(cfg.require("belief", args.belief)?)?;
    let steps = cfg.or("steps", args.steps, DEFAULT_STEPS)?;
    let step_duration = cfg.or("step-duration", args.step_duration, 1.0)?;
    let seed = cfg.seed(args.seed)?;
    let replications: Option<usize> = cfg.pick("replications", args.replications)?;
    let out: Option<std::path::PathBuf> = cfg.pick("out", args.out)?;
    let mut params = with(
        params_json(&p),
        json!({
            "cost": fee,
            "belief": belief,
            "steps": steps,
            "step_duration": step_duration,
        }),
    );

    let single = |mode: LearningMode| {
        let mut c = LearningConfig::new(p, fee, mode, belief, steps);
        c.step_duration = step_duration;
        c.seed = seed;
        run_learning(&c)
    };

    match mode {
        LearnMode::Strategy | LearnMode::Action => {
            if replications.is_some_and(|r| r != 1) {
                return Err(CliError::Param("--replications applies to --mode compare".into()));
            }
            let learning = if mode == LearnMode::Strategy {
                LearningMode::Strategy
            } else {
                LearningMode::Action
            };
            params["mode"] = json!(learning);
            let trace = single(learning)?;
            if let Some(path) = &out {
                write_trace(path, &trace)?;
            }
            let result = json!({
                "outcome": trace.outcome,
                "steps_run": trace.records.len(),
                "ar_fraction": trace.ar_fraction(),
                "final_belief": trace.final_belief(),
                "trace": out.as_ref().map(|p| p.display().to_string()),
            });
            emit("learn", &params, Some(seed), &result)?;
        }
        LearnMode::Compare => {
            let replications = replications.unwrap_or(1);
            params["mode"] = json!("compare");
            params["replications"] = json!(replications);
            let cmp = CompareConfig {
                params: p,
                fee,
                initial_belief: belief,
                steps,
                step_duration,
                replications,
                seed,
            };
            let r = compare_modes(&cmp)?;
            if let Some(path) = &out {
                // Replication 0 replays the same stream as a single run.
                let (s, a) = (single(LearningMode::Strategy)?, single(LearningMode::Action)?);
                let mut t = Table::create(
                    Some(path),
                    &["index", "demand", "strategy_reservations", "action_reservations"],
                )?;
                for (x, y) in s.records.iter().zip(&a.records) {
                    if x.demand != y.demand {
                        return Err(CliError::Invariant(format!(
                            "modes saw different demand at step {}",
                            x.index
                        )));
                    }
                    t.row([
                        x.index.to_string(),
                        x.demand.to_string(),
                        x.reservations.to_string(),
                        y.reservations.to_string(),
                    ])?;
                }
                t.finish()?;
            }
            let result = json!({
                "strategy": r.strategy,
                "action": r.action,
                "difference": r.difference,
                "test": r.test,
                "dominance_fraction": r.dominance_fraction,
                "trace": out.as_ref().map(|p| p.display().to_string()),
            });
            emit("learn", &params, Some(seed), &result)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(args: SimulateArgs) -> Outcome {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let p = queue(&cfg, &args.common)?;
    let tau = Threshold::new(cfg.require("tau", args.tau)?)?;
    let horizon = cfg.require("horizon", args.horizon)?;
    let seed = cfg.seed(args.seed)?;
    let mut sc = SimConfig::new(p, tau, horizon, seed);
    sc.warmup = cfg.or("warmup", args.warmup, sc.warmup)?;
    sc.band_width = cfg.or("band-width", args.band_width, sc.band_width)?;
    sc.engine = match cfg.or("engine", args.engine, EngineArg::Priority)? {
        EngineArg::Priority => EngineKind::Priority,
        EngineArg::Calendar => EngineKind::Calendar,
        EngineArg::Both => EngineKind::Both,
    };
    let trace_out: Option<std::path::PathBuf> = cfg.pick("trace-out", args.trace_out)?;

    let outcome = sim::simulate(&sc)?;
    if let Some(path) = &trace_out {
        let run = &outcome.runs[0];
        let mut t = Table::create(
            Some(path),
            &["id", "p", "action", "arrival", "departure", "wait"],
        )?;
        for c in &outcome.workload {
            let action = match c.action {
                arqg::dynamics::Action::Reserve => "AR",
                arqg::dynamics::Action::NoReserve => "AR'",
            };
            t.row([
                c.id.to_string(),
                num(c.potential_priority),
                action.to_string(),
                num(c.arrival_time),
                num(run.departures[c.id]),
                num(run.wait(&p, c)),
            ])?;
        }
        t.finish()?;
    }

    let validations: Vec<_> = outcome
        .reports
        .iter()
        .map(|r| validate_waits(r, &p, tau))
        .collect();
    let params = with(
        params_json(&p),
        json!({
            "tau": tau,
            "horizon": horizon,
            "warmup": sc.warmup,
            "engine": sc.engine,
            "band_width": sc.band_width,
        }),
    );
    let result = json!({
        "reports": outcome.reports,
        "validation": validations,
        "equivalence": outcome.equivalence,
        "trace": trace_out.as_ref().map(|p| p.display().to_string()),
    });
    emit("simulate", &params, Some(seed), &result)?;
    match outcome.equivalence {
        Some(e) if !e.equivalent => Err(CliError::Invariant(format!(
            "engines disagree by {} on departure times",
            e.max_departure_delta
        ))),
        _ => Ok(ExitCode::SUCCESS),
    }
}

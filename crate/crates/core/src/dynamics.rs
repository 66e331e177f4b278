//! Best-response learning dynamics.
//!
//! Each step a fresh Poisson batch of customers arrives. Every customer
//! best-responds to the current belief about the population threshold.
//! Under strategy-learning the next belief is the threshold actually played;
//! under action-learning it is estimated from the observed share of
//! customers who did not reserve.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{find_equilibria, lower_critical_cost, Regime, ReservationCost};
use crate::queue::{believed_wait_ar, wait_ar, wait_noar, PotentialPriority, QueueParams, Threshold};
use crate::rng::{self, SimRng};
use crate::stats::{welch_greater, Moments, WelchTest};
use crate::{Error, Result};

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_WIDTH: f64 = 1e-12;
/// Beliefs this close to an interior equilibrium best-respond with it.
pub const FIXED_POINT_SNAP: f64 = 1e-12;
/// Successive beliefs closer than this count as stationary.
const STATIONARY_TOL: f64 = 1e-10;
const STATIONARY_RUN: usize = 3;
/// Largest `|BR(τ) - τ|` accepted for a reported limit.
const FIXED_POINT_TOL: f64 = 1e-9;
/// How many increments of the last step to search ahead for the limit.
const LIMIT_SCAN_STEPS: usize = 10_000;
/// Collapses of the best response to 0 that mark an action-learning run as cycling.
const CYCLE_COLLAPSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "AR")]
    Reserve,
    #[serde(rename = "AR'")]
    NoReserve,
}

/// A customer's choice given a belief about everyone else.
///
/// Reserves iff the believed wait plus the fee is strictly below the wait
/// without reserving; indifferent customers do not reserve.
pub fn decide(
    params: &QueueParams,
    fee: ReservationCost,
    belief: Threshold,
    p: PotentialPriority,
) -> Action {
    if believed_wait_ar(params, belief, p) + fee.value() < wait_noar(params, belief) {
        Action::Reserve
    } else {
        Action::NoReserve
    }
}

/// The threshold induced by applying [`decide`] to every potential priority.
///
/// Beliefs within [`FIXED_POINT_SNAP`] of an interior equilibrium map to that
/// equilibrium exactly, so equilibria are fixed points in floating point too.
/// A step's reservations are the priorities strictly above this threshold.
pub fn best_response(params: &QueueParams, fee: ReservationCost, belief: Threshold) -> Threshold {
    if let Some(&root) = find_equilibria(params, fee)
        .some_make_ar
        .iter()
        .find(|r| (r.value() - belief.value()).abs() <= FIXED_POINT_SNAP)
    {
        return root;
    }
    let target = wait_noar(params, belief) - fee.value();
    if wait_ar(params, belief) < target {
        return Threshold::ZERO;
    }
    if target <= 0.0 {
        return Threshold::NONE_MAKE_AR;
    }
    // wait_ar is strictly decreasing, wait_ar(belief) >= target > 0 = wait_ar(1).
    let (mut lo, mut hi) = (belief.value(), 1.0);
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo < BISECTION_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if wait_ar(params, Threshold::new(mid).expect("inside [belief, 1]")) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Threshold::new(0.5 * (lo + hi)).expect("inside [belief, 1]")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearningMode {
    /// Beliefs are the previous step's threshold.
    Strategy,
    /// Beliefs are `1 - reservations/demand` of the previous step.
    Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub params: QueueParams,
    pub fee: ReservationCost,
    pub mode: LearningMode,
    pub initial_belief: Threshold,
    pub steps: usize,
    /// Length of a step in time units; demand per step is Poisson(λ·Δ).
    pub step_duration: f64,
    pub seed: u64,
}

impl LearningConfig {
    pub fn new(
        params: QueueParams,
        fee: ReservationCost,
        mode: LearningMode,
        initial_belief: Threshold,
        steps: usize,
    ) -> Self {
        Self {
            params,
            fee,
            mode,
            initial_belief,
            steps,
            step_duration: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.step_duration.is_finite() && self.step_duration > 0.0) {
            return Err(Error::Config(format!(
                "step duration must be positive (got {})",
                self.step_duration
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based step number.
    pub index: usize,
    pub belief_in: Threshold,
    /// Threshold played this step, `BR(belief_in)`.
    pub realized_threshold: Threshold,
    pub demand: usize,
    pub reservations: usize,
    pub belief_out: Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    /// Beliefs converge to `limit`, a fixed point of the best response.
    /// `absorbing` marks an action-learning run pinned at none-make-AR.
    Converged {
        limit: Threshold,
        detected_at: usize,
        absorbing: bool,
    },
    /// Action-learning that keeps collapsing to everyone-reserves.
    Cycling { collapses: usize },
    /// The step budget ran out before either of the above.
    MaxSteps,
}

impl Outcome {
    pub fn limit(&self) -> Option<Threshold> {
        match self {
            Outcome::Converged { limit, .. } => Some(*limit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningTrace {
    pub config: LearningConfig,
    pub records: Vec<StepRecord>,
    pub outcome: Outcome,
}

impl LearningTrace {
    /// Total reservations over total demand.
    pub fn ar_fraction(&self) -> Option<f64> {
        let demand: usize = self.records.iter().map(|r| r.demand).sum();
        let reserved: usize = self.records.iter().map(|r| r.reservations).sum();
        (demand > 0).then(|| reserved as f64 / demand as f64)
    }

    pub fn final_belief(&self) -> Threshold {
        self.records
            .last()
            .map_or(self.config.initial_belief, |r| r.belief_out)
    }
}

/// One population of learners; feeding two of them the same draws gives
/// common random numbers.
#[derive(Debug, Clone)]
struct Learner {
    params: QueueParams,
    fee: ReservationCost,
    mode: LearningMode,
    belief: Threshold,
    index: usize,
}

impl Learner {
    fn new(params: QueueParams, fee: ReservationCost, mode: LearningMode, belief: Threshold) -> Self {
        Self {
            params,
            fee,
            mode,
            belief,
            index: 0,
        }
    }

    fn step(&mut self, priorities: &[f64]) -> StepRecord {
        self.index += 1;
        let belief_in = self.belief;
        let realized_threshold = best_response(&self.params, self.fee, belief_in);
        let reservations = priorities
            .iter()
            .filter(|&&p| p > realized_threshold.value())
            .count();
        let demand = priorities.len();
        let belief_out = match self.mode {
            LearningMode::Strategy => realized_threshold,
            LearningMode::Action if demand == 0 => belief_in,
            LearningMode::Action => Threshold::new((demand - reservations) as f64 / demand as f64)
                .expect("a share lies in [0, 1]"),
        };
        self.belief = belief_out;
        StepRecord {
            index: self.index,
            belief_in,
            realized_threshold,
            demand,
            reservations,
            belief_out,
        }
    }
}

/// Draws one step's customers: Poisson demand, Uniform(0, 1) priorities.
fn draw_step(rng: &mut SimRng, demand: &Poisson<f64>, out: &mut Vec<f64>) {
    let d = demand.sample(rng) as usize;
    out.clear();
    out.extend((0..d).map(|_| rng.random::<f64>()));
}

fn demand_distribution(params: &QueueParams, step_duration: f64) -> Poisson<f64> {
    Poisson::new(params.arrival_rate() * step_duration).expect("positive finite mean")
}

pub fn run_learning(config: &LearningConfig) -> Result<LearningTrace> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, 0);
    let demand = demand_distribution(&config.params, config.step_duration);
    let mut learner = Learner::new(config.params, config.fee, config.mode, config.initial_belief);
    let mut priorities = Vec::new();
    let mut records = Vec::with_capacity(config.steps.min(1 << 20));
    let mut outcome = None;

    for _ in 0..config.steps {
        draw_step(&mut rng, &demand, &mut priorities);
        records.push(learner.step(&priorities));
        if outcome.is_none() {
            if let Some(found) = detect_convergence(config, &records) {
                outcome = Some(found);
                if matches!(found, Outcome::Converged { absorbing: true, .. }) {
                    break;
                }
            }
        }
    }

    let outcome = outcome.unwrap_or_else(|| detect_limit(config, &records));
    Ok(LearningTrace {
        config: *config,
        records,
        outcome,
    })
}

/// Classifies a trace so far.
///
/// Strategy-learning converges once beliefs are stationary for three steps,
/// or once three shrinking same-sign moves certify a monotone approach to a
/// best-response fixed point. Action-learning converges only by absorption
/// at none-make-AR, and otherwise counts as cycling after two collapses of
/// the best response to 0.
pub fn detect_limit(config: &LearningConfig, records: &[StepRecord]) -> Outcome {
    if let Some(found) = detect_convergence(config, records) {
        return found;
    }
    if config.mode == LearningMode::Action {
        let collapses = records
            .iter()
            .filter(|r| r.realized_threshold.value() == 0.0)
            .count();
        if collapses >= CYCLE_COLLAPSES {
            return Outcome::Cycling { collapses };
        }
    }
    Outcome::MaxSteps
}

fn detect_convergence(config: &LearningConfig, records: &[StepRecord]) -> Option<Outcome> {
    let last = records.last()?;
    match config.mode {
        LearningMode::Action => {
            let absorbed = last.belief_out.is_none_make_ar()
                && config.fee.value() >= lower_critical_cost(&config.params);
            absorbed.then_some(Outcome::Converged {
                limit: Threshold::NONE_MAKE_AR,
                detected_at: last.index,
                absorbing: true,
            })
        }
        LearningMode::Strategy => {
            if records.len() >= STATIONARY_RUN
                && records[records.len() - STATIONARY_RUN..].iter().all(|r| {
                    (r.belief_out.value() - r.belief_in.value()).abs() < STATIONARY_TOL
                })
            {
                return Some(Outcome::Converged {
                    limit: last.belief_out,
                    detected_at: last.index,
                    absorbing: false,
                });
            }
            monotone_limit(config, records).map(|limit| Outcome::Converged {
                limit,
                detected_at: last.index,
                absorbing: false,
            })
        }
    }
}

/// A deterministic best-response sequence that moves monotonically with
/// shrinking steps converges to the first fixed point of `BR` ahead of it.
/// Locate that fixed point by scanning `BR(τ) - τ` for a sign change and
/// bisecting.
fn monotone_limit(config: &LearningConfig, records: &[StepRecord]) -> Option<Threshold> {
    let n = records.len();
    if n < 3 {
        return None;
    }
    let moves: Vec<f64> = records[n - 3..]
        .iter()
        .map(|r| r.belief_out.value() - r.belief_in.value())
        .collect();
    let dir = moves[2].signum();
    let same_sign = moves.iter().all(|m| m.signum() == dir && *m != 0.0);
    let shrinking = moves[2].abs() < moves[1].abs() && moves[1].abs() < moves[0].abs();
    if !(same_sign && shrinking) {
        return None;
    }

    let gap = |t: f64| {
        let t = Threshold::new(t).expect("search stays in [0, 1]");
        best_response(&config.params, config.fee, t).value() - t.value()
    };
    let start = records[n - 1].belief_out.value();
    let h = moves[2].abs();
    let mut behind = start;
    let mut ahead = None;
    for k in 1..=LIMIT_SCAN_STEPS {
        let t = (start + dir * h * k as f64).clamp(0.0, 1.0);
        if gap(t) * dir <= 0.0 {
            ahead = Some(t);
            break;
        }
        if t == 0.0 || t == 1.0 {
            return None;
        }
        behind = t;
    }
    let mut ahead = ahead?;
    while (ahead - behind).abs() > BISECTION_WIDTH {
        let mid = 0.5 * (behind + ahead);
        if gap(mid) * dir <= 0.0 {
            ahead = mid;
        } else {
            behind = mid;
        }
    }
    // Prefer the side that satisfies the fixed-point check; both lie within
    // the bisection width of the limit.
    [ahead, behind]
        .into_iter()
        .find(|&t| gap(t).abs() < FIXED_POINT_TOL)
        .map(|t| Threshold::new(t).expect("in [0, 1]"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub params: QueueParams,
    pub fee: ReservationCost,
    pub initial_belief: Threshold,
    pub steps: usize,
    pub step_duration: f64,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeSummary {
    /// Total reservations over total demand.
    pub ar_fraction: f64,
    pub mean_reservations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeComparison {
    pub config: CompareConfig,
    pub strategy: ModeSummary,
    pub action: ModeSummary,
    /// `action.ar_fraction - strategy.ar_fraction`.
    pub difference: f64,
    /// Welch test of action-mode per-step reservations exceeding strategy-mode.
    pub test: WelchTest,
    /// Share of steps where action-learning reserved at least as many.
    pub dominance_fraction: f64,
}

/// Strategy- vs action-learning on common random numbers.
///
/// Both populations see the same demand and priorities at every step of
/// every replication. Only defined where the fee has a unique interior
/// equilibrium.
pub fn compare_modes(config: &CompareConfig) -> Result<ModeComparison> {
    if config.steps == 0 || config.replications == 0 {
        return Err(Error::Config(
            "steps and replications must be at least 1".into(),
        ));
    }
    if !(config.step_duration.is_finite() && config.step_duration > 0.0) {
        return Err(Error::Config("step duration must be positive".into()));
    }
    let regime = find_equilibria(&config.params, config.fee).regime;
    if regime != Regime::UniqueSomeMakeAr {
        return Err(Error::Regime(format!(
            "mode comparison needs a unique some-make-AR equilibrium, fee gives {regime:?}"
        )));
    }

    let demand = demand_distribution(&config.params, config.step_duration);
    let (mut strat, mut act) = (Moments::default(), Moments::default());
    let (mut strat_total, mut act_total, mut demand_total) = (0usize, 0usize, 0usize);
    let mut dominated = 0usize;
    let mut priorities = Vec::new();

    for rep in 0..config.replications {
        let mut rng = rng::stream(config.seed, rep as u64);
        let mut s = Learner::new(
            config.params,
            config.fee,
            LearningMode::Strategy,
            config.initial_belief,
        );
        let mut a = Learner::new(
            config.params,
            config.fee,
            LearningMode::Action,
            config.initial_belief,
        );
        for _ in 0..config.steps {
            draw_step(&mut rng, &demand, &mut priorities);
            let rs = s.step(&priorities).reservations;
            let ra = a.step(&priorities).reservations;
            strat.push(rs as f64);
            act.push(ra as f64);
            strat_total += rs;
            act_total += ra;
            demand_total += priorities.len();
            dominated += usize::from(ra >= rs);
        }
    }

    let total_steps = (config.steps * config.replications) as f64;
    let share = |n: usize| {
        if demand_total == 0 {
            0.0
        } else {
            n as f64 / demand_total as f64
        }
    };
    let strategy = ModeSummary {
        ar_fraction: share(strat_total),
        mean_reservations: strat.mean(),
    };
    let action = ModeSummary {
        ar_fraction: share(act_total),
        mean_reservations: act.mean(),
    };
    Ok(ModeComparison {
        config: *config,
        strategy,
        action,
        difference: action.ar_fraction - strategy.ar_fraction,
        test: welch_greater(&act, &strat),
        dominance_fraction: dominated as f64 / total_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QueueParams {
        QueueParams::new(45.0, 60.0).unwrap()
    }

    fn t(v: f64) -> Threshold {
        Threshold::new(v).unwrap()
    }

    fn p(v: f64) -> PotentialPriority {
        PotentialPriority::new(v).unwrap()
    }

    fn cost(v: f64) -> ReservationCost {
        ReservationCost::new(v).unwrap()
    }

    fn tau_e() -> Threshold {
        find_equilibria(&q(), cost(0.024)).some_make_ar[0]
    }

    /// Independent oracle: scan wait_ar on a fine grid, then bisect the
    /// bracketing cell with a fixed iteration count.
    fn br_oracle(params: &QueueParams, fee: f64, belief: f64) -> f64 {
        let target = wait_noar(params, t(belief)) - fee;
        if wait_ar(params, t(belief)) < target {
            return 0.0;
        }
        if target <= 0.0 {
            return 1.0;
        }
        let n = 100_000;
        let mut lo = belief;
        for i in 1..=n {
            let x = belief + (1.0 - belief) * i as f64 / n as f64;
            if wait_ar(params, t(x.min(1.0))) < target {
                let mut hi = x.min(1.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if wait_ar(params, t(mid)) < target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
            lo = x;
        }
        1.0
    }

    #[test]
    fn decide_examples() {
        let te = tau_e();
        assert_eq!(decide(&q(), cost(0.024), te, p(te.value())), Action::NoReserve);
        assert_eq!(decide(&q(), cost(0.024), t(0.1026), p(0.9)), Action::Reserve);
        assert_eq!(decide(&q(), cost(0.04), t(1.0), p(1.0)), Action::NoReserve);
    }

    #[test]
    fn best_response_examples() {
        assert_eq!(best_response(&q(), cost(0.024), t(0.5)), Threshold::ZERO);
        let br0 = best_response(&q(), cost(0.024), t(0.0)).value();
        assert!((br0 - 0.0302).abs() < 5e-5, "{br0}");
        assert!((br0 - br_oracle(&q(), 0.024, 0.0)).abs() < 1e-10);
        // wait_ar(BR(0)) = wait_noar(0) - C = 0.126.
        assert!((wait_ar(&q(), t(br0)) - 0.126).abs() < 1e-10);

        let br = best_response(&q(), cost(0.024), t(0.1026)).value();
        assert!(br > 0.1026 && br < tau_e().value() + 1e-12, "{br}");
        let te = tau_e();
        assert!((best_response(&q(), cost(0.024), te).value() - te.value()).abs() < 1e-10);

        let br = best_response(&q(), cost(0.032), t(0.6)).value();
        assert!(br > 0.6 && br <= 1.0);
    }

    #[test]
    fn best_response_matches_oracle() {
        for &fee in &[0.0, 0.01, 0.024, 0.03, 0.032, 0.04] {
            for i in 0..=50 {
                let b = i as f64 / 50.0;
                let got = best_response(&q(), cost(fee), t(b)).value();
                let roots = find_equilibria(&q(), cost(fee)).some_make_ar;
                if let Some(r) = roots.iter().find(|r| (r.value() - b).abs() <= FIXED_POINT_SNAP) {
                    assert_eq!(got, r.value());
                    continue;
                }
                let want = br_oracle(&q(), fee, b);
                assert!((got - want).abs() < 1e-9, "fee {fee} belief {b}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn zero_demand_carries_belief() {
        let mut l = Learner::new(q(), cost(0.024), LearningMode::Action, t(0.3));
        let r = l.step(&[]);
        assert_eq!(r.belief_out, t(0.3));
        assert_eq!(r.demand, 0);
        let r = l.step(&[0.99, 0.98]);
        assert_eq!(r.reservations, 2);
        assert_eq!(r.belief_out, Threshold::ZERO);
    }

    #[test]
    fn strategy_start_near_equilibrium() {
        let cfg = LearningConfig::new(q(), cost(0.024), LearningMode::Strategy, t(0.1026), 10);
        let trace = run_learning(&cfg).unwrap();
        let te = tau_e().value();
        assert!(trace
            .records
            .iter()
            .all(|r| r.belief_out.value() >= r.belief_in.value() && r.belief_out.value() < te));
        match trace.outcome {
            Outcome::Converged { detected_at, limit, absorbing } => {
                assert!(detected_at <= 3);
                assert!(!absorbing);
                assert!((limit.value() - te).abs() < 1e-10);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn detect_limit_constant_tail() {
        let cfg = LearningConfig::new(q(), cost(0.032), LearningMode::Strategy, t(0.2222), 4);
        let rec = |i, v: f64| StepRecord {
            index: i,
            belief_in: t(v),
            realized_threshold: t(v),
            demand: 0,
            reservations: 0,
            belief_out: t(v),
        };
        let records: Vec<_> = (1..=4).map(|i| rec(i, 0.2222)).collect();
        assert_eq!(
            detect_limit(&cfg, &records),
            Outcome::Converged {
                limit: t(0.2222),
                detected_at: 4,
                absorbing: false
            }
        );
        assert_eq!(detect_limit(&cfg, &records[..1]), Outcome::MaxSteps);
    }

    #[test]
    fn action_absorption_detected() {
        let mut cfg = LearningConfig::new(q(), cost(0.032), LearningMode::Action, t(0.9), 1000);
        cfg.seed = 3;
        let trace = run_learning(&cfg).unwrap();
        assert!(matches!(
            trace.outcome,
            Outcome::Converged { absorbing: true, .. }
        ));
        // Stops once absorbed.
        assert!(trace.records.len() < 1000);
        assert_eq!(trace.final_belief(), Threshold::NONE_MAKE_AR);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = LearningConfig::new(q(), cost(0.024), LearningMode::Strategy, t(0.1), 0);
        assert!(run_learning(&cfg).is_err());
        cfg.steps = 5;
        cfg.step_duration = 0.0;
        assert!(run_learning(&cfg).is_err());

        let cmp = CompareConfig {
            params: q(),
            fee: cost(0.032),
            initial_belief: t(0.1),
            steps: 10,
            step_duration: 1.0,
            replications: 1,
            seed: 0,
        };
        assert!(matches!(compare_modes(&cmp), Err(Error::Regime(_))));
    }

    #[test]
    fn single_step_comparison_identical_at_equilibrium() {
        let cmp = CompareConfig {
            params: q(),
            fee: cost(0.024),
            initial_belief: tau_e(),
            steps: 1,
            step_duration: 1.0,
            replications: 1,
            seed: 11,
        };
        let r = compare_modes(&cmp).unwrap();
        assert_eq!(r.strategy.ar_fraction, r.action.ar_fraction);
        assert_eq!(r.dominance_fraction, 1.0);
    }
}

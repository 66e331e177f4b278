//! Discrete-event simulation of the reservation queue.
//!
//! Two engines process the same workload:
//!
//! - [`run_priority`] treats the system as a single-server preemptive-resume
//!   priority queue with priority `p` for reserving customers and `0` for
//!   the rest, and simulates it event by event.
//! - [`run_calendar`] replays the reservation period: reserving customers,
//!   earliest request first, book the earliest free server time at or after
//!   their desired start, split around earlier bookings. Non-reserving
//!   customers are then served first-come-first-served in the unbooked time.
//!
//! The two must agree on every departure time.

mod calendar;
mod priority;
mod report;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::dynamics::Action;
use crate::queue::{QueueParams, Threshold};
use crate::rng;
use crate::{Error, Result};

pub use calendar::run_calendar;
pub use priority::run_priority;
pub use report::{
    validate_waits, validate_with, BandStat, BandVerdict, SimReport, Validation, Verdict, WaitStat,
};

pub const DEFAULT_WARMUP: f64 = 0.2;
pub const DEFAULT_BAND_WIDTH: f64 = 0.05;
pub const DEFAULT_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Priority,
    Calendar,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: QueueParams,
    pub threshold: Threshold,
    /// Arrivals are generated over `(0, horizon]`.
    pub horizon: f64,
    /// Fraction of the horizon whose arrivals are excluded from statistics.
    pub warmup: f64,
    pub seed: u64,
    pub engine: EngineKind,
    /// Width of the priority bands reported for reserving customers.
    pub band_width: f64,
    /// Number of time batches used for batch-means confidence intervals.
    pub batches: usize,
}

impl SimConfig {
    pub fn new(params: QueueParams, threshold: Threshold, horizon: f64, seed: u64) -> Self {
        Self {
            params,
            threshold,
            horizon,
            warmup: DEFAULT_WARMUP,
            seed,
            engine: EngineKind::Both,
            band_width: DEFAULT_BAND_WIDTH,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > self.params.service_time()) {
            return Err(Error::Config(format!(
                "horizon must be finite and longer than one service time (got {})",
                self.horizon
            )));
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(Error::Config(format!(
                "warmup must lie in [0, 1) (got {})",
                self.warmup
            )));
        }
        if !(self.band_width > 0.0 && self.band_width <= 1.0) {
            return Err(Error::Config(format!(
                "band width must lie in (0, 1] (got {})",
                self.band_width
            )));
        }
        if self.batches < 2 {
            return Err(Error::Config("at least two batches are needed".into()));
        }
        Ok(())
    }

    /// Start of the measurement window.
    pub fn warmup_time(&self) -> f64 {
        self.warmup * self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Customer {
    /// Position in arrival order.
    pub id: usize,
    /// Time of the reservation request in `[-1, 0]`, i.e. `-p` with a
    /// reservation period of unit length.
    pub request_time: f64,
    /// Desired service start.
    pub arrival_time: f64,
    pub potential_priority: f64,
    pub action: Action,
}

impl Customer {
    /// Priority in the preemptive queue: `p` if reserving, `0` otherwise.
    pub fn effective_priority(&self) -> f64 {
        match self.action {
            Action::Reserve => self.potential_priority,
            Action::NoReserve => 0.0,
        }
    }
}

/// Poisson arrivals over `(0, horizon]` with i.i.d. Uniform(0, 1) potential
/// priorities; customers reserve iff `p > τ`.
pub fn generate_workload(config: &SimConfig) -> Result<Vec<Customer>> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, 0);
    let gaps = Exp::new(config.params.arrival_rate()).expect("positive rate");
    let tau = config.threshold.value();
    let mut out = Vec::with_capacity((config.params.arrival_rate() * config.horizon * 1.01) as usize);
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut rng);
        if t > config.horizon {
            break;
        }
        let p: f64 = rng.random();
        out.push(Customer {
            id: out.len(),
            request_time: -p,
            arrival_time: t,
            potential_priority: p,
            action: if p > tau {
                Action::Reserve
            } else {
                Action::NoReserve
            },
        });
    }
    Ok(out)
}

/// Output of one engine on one workload.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub engine: EngineKind,
    /// Departure time of each customer, indexed by id.
    pub departures: Vec<f64>,
    /// Maximal intervals during which the server was busy, in time order.
    pub busy: Vec<(f64, f64)>,
}

impl SimRun {
    /// Sojourn time minus service time.
    pub fn wait(&self, params: &QueueParams, customer: &Customer) -> f64 {
        (self.departures[customer.id] - customer.arrival_time - params.service_time()).max(0.0)
    }

    pub fn report(&self, config: &SimConfig, workload: &[Customer]) -> SimReport {
        report::build(config, workload, self)
    }

    /// Wait statistics of reserving customers with `p` in `[lo, hi)`.
    pub fn band(&self, config: &SimConfig, workload: &[Customer], lo: f64, hi: f64) -> WaitStat {
        report::band_stat(config, workload, self, lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equivalence {
    pub equivalent: bool,
    pub max_departure_delta: f64,
}

/// Departure times within `1e-9` absolute, customer by customer.
pub const EQUIVALENCE_TOL: f64 = 1e-9;

pub fn compare_engines(a: &SimRun, b: &SimRun) -> Equivalence {
    let max_departure_delta = if a.departures.len() != b.departures.len() {
        f64::INFINITY
    } else {
        a.departures
            .iter()
            .zip(&b.departures)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    Equivalence {
        equivalent: max_departure_delta <= EQUIVALENCE_TOL,
        max_departure_delta,
    }
}

/// Everything produced by [`simulate`].
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub workload: Vec<Customer>,
    pub runs: Vec<SimRun>,
    pub reports: Vec<SimReport>,
    /// Present when both engines ran.
    pub equivalence: Option<Equivalence>,
}

/// Generates a workload and runs the configured engine(s) on it.
pub fn simulate(config: &SimConfig) -> Result<SimOutcome> {
    let workload = generate_workload(config)?;
    let runs = match config.engine {
        EngineKind::Priority => vec![run_priority(config, &workload)],
        EngineKind::Calendar => vec![run_calendar(config, &workload)],
        EngineKind::Both => vec![run_priority(config, &workload), run_calendar(config, &workload)],
    };
    let reports = runs.iter().map(|r| r.report(config, &workload)).collect();
    let equivalence = (runs.len() == 2).then(|| compare_engines(&runs[0], &runs[1]));
    Ok(SimOutcome {
        workload,
        runs,
        reports,
        equivalence,
    })
}

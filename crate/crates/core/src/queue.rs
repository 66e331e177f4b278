//! Queue parameterization and the expected waits of the threshold customer.
//!
//! With every customer following a threshold strategy `τ`, a customer whose
//! potential priority equals `τ` sees arrivals of rate `λ(1-τ)` above it
//! and `λτ` below it. Waits come from the preemptive-resume priority
//! formula for M/G/1 specialised to deterministic service `1/μ`. Waiting
//! time is sojourn minus service.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Arrival rate `λ` and service rate `μ` of an M/D/1 queue with `0 < λ < μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct QueueParams {
    arrival_rate: f64,
    service_rate: f64,
}

#[derive(Deserialize)]
struct RawParams {
    arrival_rate: f64,
    service_rate: f64,
}

impl TryFrom<RawParams> for QueueParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        QueueParams::new(raw.arrival_rate, raw.service_rate)
    }
}

impl QueueParams {
    pub fn new(arrival_rate: f64, service_rate: f64) -> Result<Self> {
        if !arrival_rate.is_finite() || arrival_rate <= 0.0 {
            return Err(Error::Params(format!(
                "arrival rate must be positive and finite (got {arrival_rate})"
            )));
        }
        if !service_rate.is_finite() || service_rate <= 0.0 {
            return Err(Error::Params(format!(
                "service rate must be positive and finite (got {service_rate})"
            )));
        }
        if arrival_rate >= service_rate {
            return Err(Error::Params(format!(
                "arrival rate must be < service rate (got {arrival_rate} >= {service_rate})"
            )));
        }
        Ok(Self {
            arrival_rate,
            service_rate,
        })
    }

    /// Parameters with service rate 1 and the given utilization.
    pub fn from_utilization(rho: f64) -> Result<Self> {
        Self::new(rho, 1.0)
    }

    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    pub fn service_rate(&self) -> f64 {
        self.service_rate
    }

    /// `ρ = λ/μ`, always in `(0, 1)`.
    pub fn utilization(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    pub fn service_time(&self) -> f64 {
        1.0 / self.service_rate
    }

    /// `μ - λ(1-τ)`: the spare capacity left after serving everyone above `τ`.
    pub(crate) fn headroom(&self, tau: f64) -> f64 {
        self.service_rate - self.arrival_rate * (1.0 - tau)
    }
}

macro_rules! unit_interval {
    ($(#[$meta:meta])* $name:ident, $label:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
        #[serde(try_from = "f64", into = "f64")]
        pub struct $name(f64);

        impl $name {
            pub fn new(value: f64) -> Result<Self> {
                if (0.0..=1.0).contains(&value) {
                    Ok(Self(value))
                } else {
                    Err(Error::domain($label, value, "must lie in [0, 1]"))
                }
            }

            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl TryFrom<f64> for $name {
            type Error = Error;

            fn try_from(value: f64) -> Result<Self> {
                Self::new(value)
            }
        }

        impl From<$name> for f64 {
            fn from(v: $name) -> f64 {
                v.0
            }
        }
    };
}

unit_interval!(
    /// A threshold strategy: reserve iff the potential priority exceeds it.
    ///
    /// `1` encodes the none-make-AR strategy; anything below `1` is a
    /// some-make-AR strategy. Also used for beliefs about the population.
    Threshold,
    "threshold"
);

unit_interval!(
    /// `p = 1 - F_T(t)` for request time `t`; Uniform(0, 1) across customers.
    PotentialPriority,
    "potential priority"
);

impl Threshold {
    pub const ZERO: Threshold = Threshold(0.0);
    /// Nobody reserves.
    pub const NONE_MAKE_AR: Threshold = Threshold(1.0);

    pub fn is_none_make_ar(self) -> bool {
        self.0 >= 1.0
    }
}

/// Expected wait of the threshold customer when it reserves.
///
/// Evaluated as `d(3μ - 2d) / (2μ y²)` with `d = λ(1-τ)` and `y = μ - d`,
/// which is algebraically identical to
/// `(μ - λ(1-τ)/2) / (μ - λ(1-τ))² - 1/μ` but has no cancellation, so it
/// is exactly zero at `τ = 1` and never negative.
pub fn wait_ar(params: &QueueParams, tau: Threshold) -> f64 {
    let mu = params.service_rate;
    let d = params.arrival_rate * (1.0 - tau.0);
    let y = mu - d;
    d * (3.0 * mu - 2.0 * d) / (2.0 * mu * y * y)
}

/// Expected wait of the threshold customer when it does not reserve.
///
/// Evaluated as `(μλ/2 + d(μ - λ)) / (μ y (μ - λ))`, the cancellation-free
/// rearrangement of `(μ - λ/2) / ((μ - λ(1-τ))(μ - λ)) - 1/μ`. At `τ = 1`
/// this is the Pollaczek-Khinchine M/D/1 wait `λ / (2μ(μ - λ))`.
pub fn wait_noar(params: &QueueParams, tau: Threshold) -> f64 {
    let (lambda, mu) = (params.arrival_rate, params.service_rate);
    let d = lambda * (1.0 - tau.0);
    let y = mu - d;
    let slack = mu - lambda;
    (0.5 * mu * lambda + d * slack) / (mu * y * slack)
}

/// Wait a customer with priority `p` expects from reserving while believing
/// everyone else follows `belief`.
///
/// Above the belief it is the threshold customer of the population at `p`;
/// below it, the customer shares the position of the belief's threshold
/// customer.
pub fn believed_wait_ar(params: &QueueParams, belief: Threshold, p: PotentialPriority) -> f64 {
    wait_ar(params, Threshold(p.0.max(belief.0)))
}

/// Pollaczek-Khinchine mean wait of the single-class M/D/1 queue.
pub fn md1_wait(params: &QueueParams) -> f64 {
    let (lambda, mu) = (params.arrival_rate, params.service_rate);
    lambda / (2.0 * mu * (mu - lambda))
}

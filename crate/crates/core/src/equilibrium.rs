//! Reservation cost as a function of the equilibrium threshold, and its
//! inverse: the set of equilibria induced by a given cost.

use serde::{Deserialize, Serialize};

use crate::queue::{QueueParams, Threshold};
use crate::{Error, Result};

/// Roots closer than this to 0 or 1 are not reported as some-make-AR.
const INTERIOR_EPS: f64 = 1e-12;
/// Relative discriminant tolerance below which the quadratic has a double root.
const DOUBLE_ROOT_TOL: f64 = 1e-14;

/// Reservation cost `C`, in waiting-time units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ReservationCost(f64);

impl ReservationCost {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::domain(
                "reservation cost",
                value,
                "must be finite and nonnegative",
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ReservationCost {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ReservationCost> for f64 {
    fn from(c: ReservationCost) -> f64 {
        c.0
    }
}

/// `C̲ = C(1)` and, when `ρ > 1/2`, the interior peak `C̄` of `C(τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalCosts {
    pub lower: ReservationCost,
    pub upper: Option<ReservationCost>,
}

/// Which case of the equilibrium structure a cost falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Exactly one equilibrium, with `τ < 1`.
    UniqueSomeMakeAr,
    /// Two some-make-AR equilibria plus none-make-AR.
    Multiple,
    /// Only the none-make-AR equilibrium.
    UniqueNoneMakeAr,
    /// `C = C̄`: the two interior equilibria merge at the peak.
    Tangent,
    /// `C = C̲` with `ρ > 1/2`: one interior equilibrium plus none-make-AR,
    /// the upper interior root having reached `τ = 1`.
    LowerBoundary,
    /// Zero cost: everyone reserves (`τ = 0`), which is not an interior root.
    Degenerate,
}

/// All equilibria for a given cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSet {
    /// Interior thresholds in `(0, 1)`, ascending.
    pub some_make_ar: Vec<Threshold>,
    /// Whether `τ = 1` is an equilibrium.
    pub none_make_ar: bool,
    pub regime: Regime,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.some_make_ar.len() + usize::from(self.none_make_ar)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All equilibrium thresholds including `1` when none-make-AR holds.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.some_make_ar.iter().map(|t| t.value()).collect();
        if self.none_make_ar {
            out.push(1.0);
        }
        out
    }
}

/// `C(τ) = λμτ / (2(μ-λ)(μ-λ(1-τ))²)`: the cost at which `τ` is an
/// equilibrium threshold. Equal to `wait_noar(τ) - wait_ar(τ)`.
pub fn cost_for_threshold(params: &QueueParams, tau: Threshold) -> ReservationCost {
    ReservationCost(raw_cost(params, tau.value()))
}

pub(crate) fn raw_cost(params: &QueueParams, tau: f64) -> f64 {
    let (lambda, mu) = (params.arrival_rate(), params.service_rate());
    let y = params.headroom(tau);
    lambda * mu * tau / (2.0 * (mu - lambda) * y * y)
}

/// `C̲ = λ / (2μ(μ-λ))`.
pub fn lower_critical_cost(params: &QueueParams) -> f64 {
    let (lambda, mu) = (params.arrival_rate(), params.service_rate());
    lambda / (2.0 * mu * (mu - lambda))
}

/// Location `(μ-λ)/λ` of the interior maximum of `C(τ)`, if `ρ > 1/2`.
pub fn peak_threshold(params: &QueueParams) -> Option<Threshold> {
    (params.utilization() > 0.5).then(|| {
        let (lambda, mu) = (params.arrival_rate(), params.service_rate());
        Threshold::new((mu - lambda) / lambda).expect("peak lies in (0, 1) when rho > 1/2")
    })
}

pub fn critical_costs(params: &QueueParams) -> CriticalCosts {
    let (lambda, mu) = (params.arrival_rate(), params.service_rate());
    let lower = ReservationCost(lower_critical_cost(params));
    let upper = (params.utilization() > 0.5)
        .then(|| ReservationCost(mu / (8.0 * (lambda - mu) * (lambda - mu))));
    CriticalCosts { lower, upper }
}

/// Every equilibrium for reservation cost `cost`.
///
/// Interior equilibria solve `C(τ) = C`, i.e. the quadratic
/// `2Caλ²τ² + (4Ca²λ - λμ)τ + 2Ca³ = 0` with `a = μ - λ`. None-make-AR is an
/// equilibrium iff `C >= C̲`.
pub fn find_equilibria(params: &QueueParams, cost: ReservationCost) -> EquilibriumSet {
    let c = cost.value();
    let (lambda, mu) = (params.arrival_rate(), params.service_rate());
    let a = mu - lambda;
    let qa = 2.0 * c * a * lambda * lambda;
    let qb = 4.0 * c * a * a * lambda - lambda * mu;
    let qc = 2.0 * c * a * a * a;

    let mut roots = Vec::with_capacity(2);
    let mut tangent = false;
    if qa > 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc.abs() <= DOUBLE_ROOT_TOL * qb * qb {
            tangent = true;
            roots.push(-qb / (2.0 * qa));
        } else if disc > 0.0 {
            let q = -0.5 * (qb + qb.signum() * disc.sqrt());
            roots.push(q / qa);
            roots.push(qc / q);
        }
    }
    roots.retain(|&r| r > INTERIOR_EPS && r < 1.0 - INTERIOR_EPS);
    roots.sort_by(f64::total_cmp);

    let none_make_ar = c >= lower_critical_cost(params);
    let regime = if c == 0.0 {
        Regime::Degenerate
    } else if tangent && !roots.is_empty() {
        Regime::Tangent
    } else {
        match (roots.len(), none_make_ar) {
            (2, _) => Regime::Multiple,
            (1, false) => Regime::UniqueSomeMakeAr,
            (1, true) => Regime::LowerBoundary,
            _ => Regime::UniqueNoneMakeAr,
        }
    };

    EquilibriumSet {
        some_make_ar: roots
            .into_iter()
            .map(|r| Threshold::new(r).expect("filtered to (0, 1)"))
            .collect(),
        none_make_ar,
        regime,
    }
}

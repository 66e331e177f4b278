//! Revenue of a fee-setting provider.
//!
//! Revenue at an equilibrium threshold is the reservation rate times the fee
//! that induces that threshold, `R(τ) = λ(1-τ)C(τ)`. It depends on `ρ` and
//! `τ` only: `ρ²τ(1-τ) / (2(1-ρ)(1-ρ+ρτ)²)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::equilibrium::{
    cost_for_threshold, find_equilibria, lower_critical_cost, peak_threshold, raw_cost,
    ReservationCost,
};
use crate::queue::{QueueParams, Threshold};
use crate::{Error, Result};

/// Grid size for the coarse scan in [`optimal_dynamic_fee`].
const FEE_SCAN_POINTS: usize = 10_000;
const GOLDEN_TOL: f64 = 1e-10;

/// Revenue per unit time when the population settles on `tau_e`.
pub fn revenue_at(params: &QueueParams, tau_e: Threshold) -> Result<f64> {
    if tau_e.value() <= 0.0 {
        return Err(Error::domain(
            "equilibrium threshold",
            tau_e.value(),
            "must lie in (0, 1]",
        ));
    }
    Ok(raw_revenue(params, tau_e.value()))
}

fn raw_revenue(params: &QueueParams, tau: f64) -> f64 {
    params.arrival_rate() * (1.0 - tau) * raw_cost(params, tau)
}

/// The revenue-maximizing fee when every customer plays the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticOptimum {
    pub tau_opt: Threshold,
    pub fee: ReservationCost,
    pub revenue: f64,
    /// `C*` lies strictly inside `(C̲, C̄)`, so it also admits a
    /// none-make-AR equilibrium. Holds iff `ρ > 2/3`.
    pub multiple_equilibria: bool,
}

/// `τ_opt = (1-ρ)/(2-ρ)`, `C* = λ(2μ-λ)/(8μ(μ-λ)²)`, `R* = ρ²/(8(1-ρ)²)`.
pub fn static_optimum(params: &QueueParams) -> StaticOptimum {
    let rho = params.utilization();
    let (lambda, mu) = (params.arrival_rate(), params.service_rate());
    let tau_opt = Threshold::new((1.0 - rho) / (2.0 - rho)).expect("tau_opt lies in (0, 1/2)");
    let fee = lambda * (2.0 * mu - lambda) / (8.0 * mu * (mu - lambda) * (mu - lambda));
    let revenue = rho * rho / (8.0 * (1.0 - rho) * (1.0 - rho));
    StaticOptimum {
        tau_opt,
        fee: ReservationCost::new(fee).expect("C* is positive"),
        revenue,
        multiple_equilibria: fee > lower_critical_cost(params),
    }
}

/// Best revenue obtainable with a fee that cannot induce none-make-AR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservativeOptimum {
    /// `((1-ρ)/ρ)²`: the interior root of `C(τ) = C̲`.
    pub tau_g: Threshold,
    /// The supremum fee `C̲`.
    pub fee: ReservationCost,
    /// Always `false`: `C̲` itself already admits none-make-AR, so the
    /// guaranteed revenue is only approached from below.
    pub attained: bool,
    /// `R_g* = (2ρ-1)/(2(1-ρ))`.
    pub revenue: f64,
}

pub fn conservative_optimum(params: &QueueParams) -> Result<ConservativeOptimum> {
    let rho = params.utilization();
    if rho <= 0.5 {
        return Err(Error::Regime(format!(
            "utilization {rho} <= 1/2 has a unique equilibrium for every fee; use static_optimum"
        )));
    }
    let ratio = (1.0 - rho) / rho;
    Ok(ConservativeOptimum {
        tau_g: Threshold::new(ratio * ratio).expect("ratio < 1 when rho > 1/2"),
        fee: ReservationCost::new(lower_critical_cost(params)).expect("positive"),
        attained: false,
        revenue: (2.0 * rho - 1.0) / (2.0 * (1.0 - rho)),
    })
}

/// `R* / R_g*`: `1` for `ρ <= 2/3`, otherwise `ρ² / (-8ρ² + 12ρ - 4)`.
pub fn price_of_conservatism(params: &QueueParams) -> f64 {
    let rho = params.utilization();
    if rho <= 2.0 / 3.0 {
        1.0
    } else {
        rho * rho / (-8.0 * rho * rho + 12.0 * rho - 4.0)
    }
}

/// The other interior equilibrium sharing a cost with `tau_e1`:
/// `τ_e2 = ((1-ρ)/ρ)² / τ_e1`.
pub fn companion_threshold(params: &QueueParams, tau_e1: Threshold) -> Result<Threshold> {
    let rho = params.utilization();
    let Some(peak) = peak_threshold(params) else {
        return Err(Error::Regime(format!(
            "utilization {rho} <= 1/2: C(tau) is monotone, no companion threshold exists"
        )));
    };
    let tau_g = ((1.0 - rho) / rho).powi(2);
    let t = tau_e1.value();
    // A relative slack absorbs rounding when the caller passes tau_g or the
    // peak computed along a different path.
    let slack = 1e-12;
    if t < tau_g * (1.0 - slack) || t > peak.value() * (1.0 + slack) {
        return Err(Error::domain(
            "tau_e1",
            t,
            "must lie between ((1-rho)/rho)^2 and the peak (mu-lambda)/lambda",
        ));
    }
    Ok(Threshold::new((tau_g / t).min(1.0)).expect("clamped to [0, 1]"))
}

/// Distribution of the initial belief `β`, as `P(β < x)` on `[0, 1]`.
#[derive(Clone)]
pub enum BeliefDistribution {
    Uniform,
    /// All mass at one belief.
    PointMass(f64),
    /// Any nondecreasing function; endpoint values are forced to 0 and 1.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for BeliefDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "Uniform"),
            Self::PointMass(b) => write!(f, "PointMass({b})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl BeliefDistribution {
    pub fn point_mass(belief: f64) -> Result<Self> {
        Threshold::new(belief)?;
        Ok(Self::PointMass(belief))
    }

    pub fn custom(cdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(cdf))
    }

    /// `P(β < x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match self {
            Self::Uniform => x,
            Self::PointMass(b) => {
                if *b < x {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Custom(f) => f(x).clamp(0.0, 1.0),
        }
    }
}

/// Long-run expected revenue when customers learn by strategy-learning from
/// a random initial belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicRevenue {
    pub revenue: f64,
    /// The fee admits none-make-AR alongside an interior equilibrium. Under
    /// action-learning such a fee is eventually absorbed at none-make-AR and
    /// earns nothing in the long run.
    pub multiple_equilibria: bool,
}

impl DynamicRevenue {
    /// Long-run revenue under action-learning when the fee admits multiple
    /// equilibria. `None` for unique-equilibrium fees, where action-learning
    /// cycles and has no closed form.
    pub fn action_learning_revenue(&self) -> Option<f64> {
        self.multiple_equilibria.then_some(0.0)
    }
}

/// Strategy-learning converges to the lower interior equilibrium `τ_e1` iff
/// the initial belief is below `τ_e2`, so revenue is `P(β < τ_e2) R(τ_e1)`.
pub fn dynamic_revenue(
    params: &QueueParams,
    fee: ReservationCost,
    beliefs: &BeliefDistribution,
) -> DynamicRevenue {
    let eq = find_equilibria(params, fee);
    let Some(&tau_e1) = eq.some_make_ar.first() else {
        return DynamicRevenue {
            revenue: 0.0,
            multiple_equilibria: false,
        };
    };
    if !eq.none_make_ar {
        return DynamicRevenue {
            revenue: raw_revenue(params, tau_e1.value()),
            multiple_equilibria: false,
        };
    }
    let tau_e2 = match eq.some_make_ar.get(1) {
        Some(t) => t.value(),
        // C = C̲ puts the upper root at 1; C = C̄ merges both at the peak.
        None => tau_e2_for(params, tau_e1.value()),
    };
    DynamicRevenue {
        revenue: beliefs.cdf(tau_e2) * raw_revenue(params, tau_e1.value()),
        multiple_equilibria: true,
    }
}

fn tau_e2_for(params: &QueueParams, tau_e1: f64) -> f64 {
    let rho = params.utilization();
    (((1.0 - rho) / rho).powi(2) / tau_e1).min(1.0)
}

/// Revenue-maximizing fee under strategy-learning with random initial beliefs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicFee {
    pub fee: ReservationCost,
    pub revenue: f64,
    /// The interior equilibrium the fee targets.
    pub tau_e1: Threshold,
}

pub fn optimal_dynamic_fee(params: &QueueParams, beliefs: &BeliefDistribution) -> DynamicFee {
    let rho = params.utilization();
    if let BeliefDistribution::Uniform = beliefs {
        if rho > 2.0 / 3.0 {
            let g = conservative_optimum(params).expect("rho > 2/3");
            return DynamicFee {
                fee: g.fee,
                revenue: g.revenue,
                tau_e1: g.tau_g,
            };
        }
        let s = static_optimum(params);
        return DynamicFee {
            fee: s.fee,
            revenue: s.revenue,
            tau_e1: s.tau_opt,
        };
    }
    numeric_dynamic_fee(params, beliefs)
}

/// Direct maximization for arbitrary belief distributions.
///
/// Thresholds below `τ_g` (all of `(0, 1)` when `ρ <= 1/2`) give a unique
/// equilibrium, where `R` is unimodal with its maximum at `τ_opt`. Thresholds
/// in `[τ_g, peak]` give multiple equilibria and are scanned on a grid, then
/// the best bracket is refined by golden-section search.
pub fn numeric_dynamic_fee(params: &QueueParams, beliefs: &BeliefDistribution) -> DynamicFee {
    let rho = params.utilization();
    let tau_opt = (1.0 - rho) / (2.0 - rho);

    let (unique_tau, band) = match peak_threshold(params) {
        None => (tau_opt, None),
        Some(peak) => {
            let tau_g = ((1.0 - rho) / rho).powi(2);
            // Below tau_g the supremum is approached but C < C̲ strictly; the
            // band includes tau_g itself, so take the open side only inside it.
            (tau_opt.min(tau_g), Some((tau_g, peak.value())))
        }
    };

    let mut best_tau = unique_tau;
    let mut best = raw_revenue(params, unique_tau);

    if let Some((lo, hi)) = band {
        let objective = |t: f64| beliefs.cdf(tau_e2_for(params, t)) * raw_revenue(params, t);
        let step = (hi - lo) / (FEE_SCAN_POINTS - 1) as f64;
        let mut arg = 0;
        let mut band_best = f64::NEG_INFINITY;
        for i in 0..FEE_SCAN_POINTS {
            let v = objective(lo + step * i as f64);
            if v > band_best {
                band_best = v;
                arg = i;
            }
        }
        let a = lo + step * arg.saturating_sub(1) as f64;
        let b = (lo + step * (arg + 1) as f64).min(hi);
        let refined = golden_section_max(objective, a, b, GOLDEN_TOL);
        let (t, v) = [(lo + step * arg as f64, band_best), (refined, objective(refined))]
            .into_iter()
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("two candidates");
        // Ties favour the band's lower end (C̲), which is attainable.
        if v >= best {
            best = v;
            best_tau = t;
        }
    }

    let tau_e1 = Threshold::new(best_tau).expect("scan stays in [0, 1]");
    DynamicFee {
        fee: cost_for_threshold(params, tau_e1),
        revenue: best,
        tau_e1,
    }
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

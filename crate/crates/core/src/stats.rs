//! Small statistics helpers: running moments, Welch's test and batch means.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

const LARGE_DF: f64 = 1e5;

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        iter.into_iter().for_each(|x| m.push(x));
        m
    }
}

/// One-sided Welch two-sample test of `H1: mean(a) > mean(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

pub fn welch_greater(a: &Moments, b: &Moments) -> WelchTest {
    let (na, nb) = (a.count() as f64, b.count() as f64);
    let (va, vb) = (a.variance() / na, b.variance() / nb);
    let se2 = va + vb;
    let diff = a.mean() - b.mean();
    if se2 == 0.0 {
        let p_value = if diff > 0.0 { 0.0 } else { 1.0 };
        return WelchTest {
            t: if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY },
            df: f64::NAN,
            p_value,
        };
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    WelchTest {
        t,
        df,
        p_value: dist.sf(t),
    }
}

/// Two-sided `1 - alpha` Student-t critical value.
pub fn t_critical(df: f64, alpha: f64) -> f64 {
    let q = 1.0 - alpha / 2.0;
    // statrs' t quantile loses accuracy for very large df, where the normal
    // quantile is exact to ~1e-5 anyway.
    if df > LARGE_DF {
        Normal::standard().inverse_cdf(q)
    } else {
        StudentsT::new(0.0, 1.0, df)
            .expect("positive degrees of freedom")
            .inverse_cdf(q)
    }
}

/// Mean and 95% half-width from independent batch means.
///
/// Returns `None` with fewer than two batches.
pub fn batch_means_ci(batch_means: &[f64]) -> Option<(f64, f64)> {
    if batch_means.len() < 2 {
        return None;
    }
    let m: Moments = batch_means.iter().copied().collect();
    let k = batch_means.len() as f64;
    let half = t_critical(k - 1.0, 0.05) * (m.variance() / k).sqrt();
    Some((m.mean(), half))
}

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Bound::{Excluded, Unbounded};

use super::{Customer, EngineKind, SimConfig, SimRun};
use crate::dynamics::Action;

/// Nonnegative finite time usable as an ordered map key.
#[derive(Debug, Clone, Copy)]
struct Instant(f64);

impl Ord for Instant {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for Instant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Instant {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Instant {}

/// Booked server time as disjoint intervals keyed by start. Touching
/// intervals are merged, so the end of an interval is always free.
#[derive(Debug, Default)]
pub(super) struct Calendar {
    booked: BTreeMap<Instant, f64>,
}

impl Calendar {
    /// Books the earliest `amount` of free time at or after `from`, possibly
    /// split across several gaps. Returns the end of the last piece.
    pub(super) fn book(&mut self, from: f64, amount: f64) -> f64 {
        let mut at = from;
        let mut left = amount;
        loop {
            if let Some((_, &end)) = self.booked.range(..=Instant(at)).next_back() {
                if end > at {
                    at = end;
                }
            }
            let gap_end = self
                .booked
                .range((Excluded(Instant(at)), Unbounded))
                .next()
                .map_or(f64::INFINITY, |(start, _)| start.0);
            let finish = at + left;
            if finish <= gap_end {
                self.insert(at, finish);
                return finish;
            }
            self.insert(at, gap_end);
            left -= gap_end - at;
            at = gap_end;
        }
    }

    fn insert(&mut self, start: f64, end: f64) {
        let mut lo = start;
        let mut hi = end;
        if let Some((&key, &prev_end)) = self.booked.range(..Instant(start)).next_back() {
            if prev_end == start {
                lo = key.0;
                self.booked.remove(&key);
            }
        }
        if let Some(next_end) = self.booked.remove(&Instant(end)) {
            hi = next_end;
        }
        self.booked.insert(Instant(lo), hi);
    }

    pub(super) fn intervals(&self) -> Vec<(f64, f64)> {
        self.booked.iter().map(|(s, &e)| (s.0, e)).collect()
    }
}

/// Reservation-calendar semantics.
///
/// Reserving customers book in order of request time (highest potential
/// priority first), each taking the nearest free `1/μ` at or after its
/// desired start, split around earlier bookings. Non-reserving customers
/// then take the unbooked time first-come-first-served; a service that
/// runs into a booking is suspended and resumed after it.
pub fn run_calendar(config: &SimConfig, workload: &[Customer]) -> SimRun {
    let service = config.params.service_time();
    let mut departures = vec![f64::NAN; workload.len()];
    let mut calendar = Calendar::default();

    let mut reserving: Vec<&Customer> = workload
        .iter()
        .filter(|c| c.action == Action::Reserve)
        .collect();
    reserving.sort_by(|a, b| {
        a.request_time
            .total_cmp(&b.request_time)
            .then(a.id.cmp(&b.id))
    });
    for c in reserving {
        departures[c.id] = calendar.book(c.arrival_time, service);
    }
    for c in workload.iter().filter(|c| c.action == Action::NoReserve) {
        departures[c.id] = calendar.book(c.arrival_time, service);
    }

    SimRun {
        engine: EngineKind::Calendar,
        departures,
        busy: calendar.intervals(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{QueueParams, Threshold};

    fn customer(id: usize, arrival: f64, p: f64, reserve: bool) -> Customer {
        Customer {
            id,
            request_time: -p,
            arrival_time: arrival,
            potential_priority: p,
            action: if reserve { Action::Reserve } else { Action::NoReserve },
        }
    }

    fn config() -> SimConfig {
        SimConfig::new(
            QueueParams::new(0.5, 1.0).unwrap(),
            Threshold::new(0.5).unwrap(),
            100.0,
            0,
        )
    }

    #[test]
    fn booking_splits_around_existing() {
        let mut cal = Calendar::default();
        assert_eq!(cal.book(2.0, 1.0), 3.0);
        // Starts at 1.5, runs 0.5, skips [2, 3), finishes at 3.5.
        assert_eq!(cal.book(1.5, 1.0), 3.5);
        assert_eq!(cal.intervals(), vec![(1.5, 3.5)]);
        // Fills [0, 1.5) and finishes the remaining 0.5 after 3.5.
        assert_eq!(cal.book(0.0, 2.0), 4.0);
        assert_eq!(cal.intervals(), vec![(0.0, 4.0)]);
        assert_eq!(cal.book(10.0, 1.0), 11.0);
        assert_eq!(cal.intervals(), vec![(0.0, 4.0), (10.0, 11.0)]);
    }

    #[test]
    fn single_customer_served_on_arrival() {
        let run = run_calendar(&config(), &[customer(0, 4.0, 0.7, true)]);
        assert_eq!(run.departures, vec![5.0]);
    }

    #[test]
    fn three_customer_illustration() {
        // The customer with the earlier request (p = 0.9) wants [1, 2). The
        // other reserving customer starts at 0.4, is preempted at 1 and
        // resumes at 2. The non-reserving customer waits for it to finish.
        let w = [
            customer(0, 0.4, 0.7, true),
            customer(1, 1.0, 0.9, true),
            customer(2, 1.2, 0.1, false),
        ];
        let run = run_calendar(&config(), &w);
        assert_eq!(run.departures[1], 2.0);
        assert!((run.departures[0] - 2.4).abs() < 1e-12);
        assert!((run.departures[2] - 3.4).abs() < 1e-12);
        assert_eq!(run.busy.len(), 1);
    }
}

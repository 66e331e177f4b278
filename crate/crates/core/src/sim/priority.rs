use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Customer, EngineKind, SimConfig, SimRun};

/// Heap entry; the maximum is the customer the server should be working on.
#[derive(Debug, Clone, Copy)]
struct Waiting {
    priority: f64,
    arrival: f64,
    id: usize,
}

impl Ord for Waiting {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.arrival.total_cmp(&self.arrival))
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Waiting {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Waiting {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Waiting {}

/// Event-driven preemptive-resume priority queue with deterministic service.
///
/// Events are arrivals and completions of the customer in service. The
/// customer in service is always the heap maximum, so an arrival of higher
/// priority preempts it and it later resumes with its remaining work.
/// Equal priorities (the non-reserving class) are served in arrival order.
pub fn run_priority(config: &SimConfig, workload: &[Customer]) -> SimRun {
    let service = config.params.service_time();
    let n = workload.len();
    let mut remaining = vec![service; n];
    let mut departures = vec![f64::NAN; n];
    let mut busy = Vec::new();
    let mut busy_start = 0.0;
    let mut present = BinaryHeap::new();
    let mut now = 0.0;
    let mut next = 0;

    loop {
        let next_arrival = workload.get(next).map(|c| c.arrival_time);
        match present.peek() {
            Some(&Waiting { id, .. }) => {
                let done = now + remaining[id];
                if next_arrival.is_none_or(|a| done <= a) {
                    now = done;
                    remaining[id] = 0.0;
                    departures[id] = now;
                    present.pop();
                    if present.is_empty() {
                        busy.push((busy_start, now));
                    }
                    continue;
                }
                let a = next_arrival.expect("checked above");
                remaining[id] -= a - now;
                now = a;
            }
            None => match next_arrival {
                None => break,
                Some(a) => {
                    now = a;
                    busy_start = a;
                }
            },
        }
        let c = &workload[next];
        present.push(Waiting {
            priority: c.effective_priority(),
            arrival: c.arrival_time,
            id: c.id,
        });
        next += 1;
    }

    SimRun {
        engine: EngineKind::Priority,
        departures,
        busy,
    }
}

//! One episode of signal propagation toward a target.
//!
//! At every timestamp `t` the signals whose route duration `t - emit_time`
//! is feasible arrive at the target with mass `p[source][target][duration]`.
//! The host vector attends to the arrivals at least `threshold`-similar to it
//! (hard attention: plain mean of host and similar keys, renormalized). A
//! similar arrival then contributes its full mass to the energy, any other
//! arrival contributes `mass * (x . h)`. Energy accumulates over time and the
//! goal of a target is the peak of the accumulated curve.

use serde::{Deserialize, Serialize};

use crate::codec::{Dipole, Signal, TargetField};
use crate::geometry::Geometry;
use crate::policy::{ApplyReport, LearningRates, RoutePolicy, UpdateAccumulator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival<'a> {
    pub signal: &'a Signal,
    pub duration: u32,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalEvent<'a> {
    pub time: u32,
    pub target: usize,
    pub arrivals: Vec<Arrival<'a>>,
}

impl ArrivalEvent<'_> {
    pub fn total_mass(&self) -> f64 {
        self.arrivals.iter().map(|a| a.mass).sum()
    }
}

/// Signals reaching `target` at time `t`. One emission per source and
/// timestamp (`N = 1`); arrivals with zero mass are dropped.
pub fn collect_arrivals<'a>(
    geometry: &Geometry,
    policy: &RoutePolicy,
    signals: &'a [Signal],
    target: usize,
    t: u32,
) -> ArrivalEvent<'a> {
    let arrivals = signals
        .iter()
        .filter(|s| s.emit_time <= t)
        .filter_map(|signal| {
            let duration = t - signal.emit_time;
            if !geometry.is_feasible(signal.source, target, duration) {
                return None;
            }
            let mass = policy.prob(signal.source, target, duration);
            (mass > 0.0).then_some(Arrival { signal, duration, mass })
        })
        .collect();
    ArrivalEvent {
        time: t,
        target,
        arrivals,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttendedTarget {
    pub vector: Dipole,
    pub time: u32,
    pub similar: usize,
}

/// Host averaged with every arrival at least `threshold`-similar to it.
pub fn attended_target(event: &ArrivalEvent<'_>, field: &TargetField, threshold: f64) -> AttendedTarget {
    let mut sum = field.dipole.clone();
    let mut similar = 0;
    for a in &event.arrivals {
        if a.signal.similarity(field) >= threshold {
            sum.add_assign(&a.signal.dipole);
            similar += 1;
        }
    }
    let vector = if similar == 0 {
        field.dipole.clone()
    } else {
        // The host is a unit vector and every key is within 0.7 of it, so the
        // sum cannot vanish.
        sum.normalized().expect("attended host is non-zero")
    };
    AttendedTarget {
        vector,
        time: event.time,
        similar,
    }
}

pub fn instantaneous_energy(event: &ArrivalEvent<'_>, h: &AttendedTarget, field: &TargetField, threshold: f64) -> f64 {
    event
        .arrivals
        .iter()
        .map(|a| {
            if a.signal.similarity(field) >= threshold {
                a.mass
            } else {
                a.mass * a.signal.dipole.dot(&h.vector)
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    /// Energy of the interaction event at each timestamp `0..=T`.
    pub instantaneous: Vec<f64>,
    /// Running sum of `instantaneous`.
    pub cumulative: Vec<f64>,
    /// Mass delivered up to and including each timestamp.
    pub delivered: Vec<f64>,
    /// Peak of `cumulative`.
    pub goal: f64,
}

pub fn goal_j(
    geometry: &Geometry,
    policy: &RoutePolicy,
    signals: &[Signal],
    target: usize,
    field: &TargetField,
    threshold: f64,
) -> EnergyTrace {
    let n = geometry.config().durations();
    let mut instantaneous = Vec::with_capacity(n);
    let mut cumulative = Vec::with_capacity(n);
    let mut delivered = Vec::with_capacity(n);
    let (mut energy, mut mass) = (0.0, 0.0);
    for t in 0..=geometry.horizon() {
        let event = collect_arrivals(geometry, policy, signals, target, t);
        let h = attended_target(&event, field, threshold);
        let e = instantaneous_energy(&event, &h, field, threshold);
        energy += e;
        mass += event.total_mass();
        instantaneous.push(e);
        cumulative.push(energy);
        delivered.push(mass);
    }
    let goal = cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    EnergyTrace {
        instantaneous,
        cumulative,
        delivered,
        goal,
    }
}

/// Index of the largest goal; the first index wins ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub target: usize,
    pub label: u8,
    pub goals: Vec<f64>,
}

/// Geometry, per-target host fields and route tables of one learner set.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceModel {
    pub geometry: Geometry,
    pub fields: Vec<TargetField>,
    pub policy: RoutePolicy,
    pub rates: LearningRates,
}

impl InterferenceModel {
    pub fn new(geometry: Geometry, fields: Vec<TargetField>, rates: LearningRates) -> Self {
        assert_eq!(geometry.num_targets(), fields.len(), "one host field per target");
        let policy = RoutePolicy::init_uniform(&geometry);
        Self {
            geometry,
            fields,
            policy,
            rates,
        }
    }

    /// The 81-source digit setup with labels at the four corners.
    pub fn mnist(labels: &[u8], rates: LearningRates) -> crate::Result<Self> {
        let geometry = Geometry::mnist(labels)?;
        let fields = geometry
            .targets()
            .iter()
            .copied()
            .map(crate::codec::make_target)
            .collect();
        Ok(Self::new(geometry, fields, rates))
    }

    pub fn threshold(&self) -> f64 {
        self.rates.sim_threshold
    }

    pub fn goal(&self, signals: &[Signal], target: usize) -> EnergyTrace {
        goal_j(
            &self.geometry,
            &self.policy,
            signals,
            target,
            &self.fields[target],
            self.threshold(),
        )
    }

    /// Evaluates every target as if it were active and picks the largest goal.
    pub fn predict(&self, signals: &[Signal]) -> Prediction {
        let goals: Vec<f64> = (0..self.fields.len()).map(|y| self.goal(signals, y).goal).collect();
        let target = argmax_first(&goals);
        Prediction {
            target,
            label: self.geometry.targets()[target].label,
            goals,
        }
    }

    /// One supervised episode toward `target`: every arrival over `0..=T`
    /// records its modification against the unattended host, then the
    /// accumulated change is applied once.
    pub fn train_episode(&mut self, signals: &[Signal], target: usize) -> ApplyReport {
        let mut acc = UpdateAccumulator::new(&self.policy);
        let field = &self.fields[target];
        for t in 0..=self.geometry.horizon() {
            let event = collect_arrivals(&self.geometry, &self.policy, signals, target, t);
            for a in &event.arrivals {
                acc.accumulate(
                    &self.geometry,
                    &self.policy,
                    a.signal.source,
                    target,
                    a.duration,
                    a.signal.similarity(field),
                    &self.rates,
                );
            }
        }
        self.policy.apply_and_renormalize(&acc)
    }
}

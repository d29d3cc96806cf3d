//! Route probability tables and the local reinforcement rule.
//!
//! Every `(source, target)` pair owns a distribution over travel durations
//! `0..=T`. One training episode adds `rate(similarity) * p` to each duration
//! that delivered a signal, floors at zero and renormalizes the row. Rows of
//! different targets never mix, so learning one class cannot disturb another.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub eta_minus_minus: f64,
    /// `|similarity| >= sim_threshold` selects the strong branches.
    pub sim_threshold: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            eta_plus: 1.0,
            eta_minus: -0.5,
            eta_minus_minus: -0.8,
            sim_threshold: 0.7,
        }
    }
}

impl LearningRates {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta_plus > 0.0
            && self.eta_minus < 0.0
            && self.eta_minus >= self.eta_minus_minus
            && self.eta_minus_minus > -1.0
            && self.sim_threshold > 0.0
            && self.sim_threshold <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "learning rates must satisfy eta_plus > 0 > eta_minus >= eta_minus_minus > -1 and 0 < threshold <= 1, got {self:?}"
            )))
        }
    }

    pub fn bucket(&self, sim: f64) -> f64 {
        similarity_bucket(sim, self)
    }
}

pub fn similarity_bucket(sim: f64, rates: &LearningRates) -> f64 {
    if sim >= rates.sim_threshold {
        rates.eta_plus
    } else if sim <= -rates.sim_threshold {
        rates.eta_minus_minus
    } else {
        rates.eta_minus
    }
}

/// `probs[(source * targets + target) * durations + duration]`
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePolicy {
    sources: usize,
    targets: usize,
    durations: usize,
    probs: Vec<f64>,
}

impl RoutePolicy {
    /// Uniform `1 / (T + 1)` over every duration, including those the speed
    /// limit rules out. That mass is the reservoir of signals that never
    /// arrive.
    pub fn init_uniform(geometry: &Geometry) -> Self {
        let durations = geometry.config().durations();
        let sources = geometry.num_sources();
        let targets = geometry.num_targets();
        Self {
            sources,
            targets,
            durations,
            probs: vec![1.0 / durations as f64; sources * targets * durations],
        }
    }

    pub fn from_rows(sources: usize, targets: usize, durations: usize, probs: Vec<f64>) -> Result<Self> {
        if sources == 0 || targets == 0 || durations == 0 || probs.len() != sources * targets * durations {
            return Err(Error::PolicyFormat(format!(
                "{} probabilities do not fit shape [{sources}][{targets}][{durations}]",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::PolicyFormat(format!("invalid probability {bad}")));
        }
        Ok(Self {
            sources,
            targets,
            durations,
            probs,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.sources, self.targets, self.durations)
    }

    fn offset(&self, source: usize, target: usize) -> usize {
        (source * self.targets + target) * self.durations
    }

    pub fn row(&self, source: usize, target: usize) -> &[f64] {
        let o = self.offset(source, target);
        &self.probs[o..o + self.durations]
    }

    fn row_mut(&mut self, source: usize, target: usize) -> &mut [f64] {
        let o = self.offset(source, target);
        &mut self.probs[o..o + self.durations]
    }

    pub fn prob(&self, source: usize, target: usize, duration: u32) -> f64 {
        self.row(source, target)[duration as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// All rows belonging to one target, in source order.
    pub fn target_table(&self, target: usize) -> Vec<f64> {
        (0..self.sources)
            .flat_map(|s| self.row(s, target).iter().copied())
            .collect()
    }

    /// Probability that a signal from `source` ever reaches `target`.
    pub fn feasible_mass(&self, geometry: &Geometry, source: usize, target: usize) -> f64 {
        let lo = geometry.min_delay(source, target) as usize;
        self.row(source, target).get(lo..).map_or(0.0, |r| r.iter().sum())
    }

    /// Applies one episode of accumulated modifications. Rows with no
    /// modification are left bit-for-bit untouched. A row that floors to all
    /// zeros is reset to uniform and reported.
    pub fn apply_and_renormalize(&mut self, acc: &UpdateAccumulator) -> ApplyReport {
        assert_eq!(self.shape(), acc.shape, "accumulator shape mismatch");
        let mut report = ApplyReport::default();
        let uniform = 1.0 / self.durations as f64;
        for s in 0..self.sources {
            for y in 0..self.targets {
                let o = self.offset(s, y);
                let deltas = &acc.deltas[o..o + self.durations];
                if deltas.iter().all(|&d| d == 0.0) {
                    continue;
                }
                let row = self.row_mut(s, y);
                for (p, d) in row.iter_mut().zip(deltas) {
                    *p = (*p + d).max(0.0);
                }
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.iter_mut().for_each(|p| *p /= total);
                } else {
                    row.fill(uniform);
                    report.reset_rows.push((s, y));
                }
                report.updated_rows += 1;
            }
        }
        report
    }

    /// Short hex digest of the table contents.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.probs {
            h.update(p.to_le_bytes());
        }
        h.finalize()[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Plain-text form: one header line, then one line of space-separated
    /// probabilities per `(source, target)` row in row-major order. Values are
    /// written in shortest round-trip form, so `from_text(to_text())` is exact.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "route-policy v1 sources={} targets={} durations={}\n",
            self.sources, self.targets, self.durations
        );
        for row in self.probs.chunks(self.durations) {
            let line: Vec<String> = row.iter().map(|p| format!("{p:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::PolicyFormat("empty policy file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("route-policy") || fields.next() != Some("v1") {
            return Err(Error::PolicyFormat(format!("unrecognized header {header:?}")));
        }
        let mut dims = [0usize; 3];
        for (slot, key) in dims.iter_mut().zip(["sources", "targets", "durations"]) {
            let field = fields.next().unwrap_or_default();
            *slot = field
                .strip_prefix(key)
                .and_then(|f| f.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::PolicyFormat(format!("expected {key}=<n> in header, got {field:?}")))?;
        }
        let probs = lines
            .flat_map(str::split_whitespace)
            .map(|v| v.parse::<f64>().map_err(|e| Error::PolicyFormat(format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(dims[0], dims[1], dims[2], probs)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApplyReport {
    pub updated_rows: usize,
    /// Rows that floored to zero everywhere and were reset to uniform.
    pub reset_rows: Vec<(usize, usize)>,
}

/// Modifications gathered over one episode, applied once at its end.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateAccumulator {
    shape: (usize, usize, usize),
    deltas: Vec<f64>,
}

impl UpdateAccumulator {
    pub fn new(policy: &RoutePolicy) -> Self {
        Self {
            shape: policy.shape(),
            deltas: vec![0.0; policy.probs.len()],
        }
    }

    pub fn reset(&mut self) {
        self.deltas.fill(0.0);
    }

    pub fn delta(&self, source: usize, target: usize, duration: u32) -> f64 {
        let (_, targets, durations) = self.shape;
        self.deltas[(source * targets + target) * durations + duration as usize]
    }

    /// Records `rate(sim) * p[source][target][duration]` for one arrival.
    ///
    /// Panics if `duration` is infeasible for the pair.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate(
        &mut self,
        geometry: &Geometry,
        policy: &RoutePolicy,
        source: usize,
        target: usize,
        duration: u32,
        sim: f64,
        rates: &LearningRates,
    ) {
        assert!(
            geometry.is_feasible(source, target, duration),
            "duration {duration} is infeasible for source {source} -> target {target}"
        );
        let (_, targets, durations) = self.shape;
        self.deltas[(source * targets + target) * durations + duration as usize] +=
            rates.bucket(sim) * policy.prob(source, target, duration);
    }
}

//! Diagnostics of trained route tables: who arrives when, how alike the
//! arriving signals are, how long routes take, and how spread out in time the
//! similar arrivals are.

use serde::{Deserialize, Serialize};

use crate::codec::{Dipole, Signal, TargetField};
use crate::engine::InterferenceModel;
use crate::geometry::Geometry;
use crate::policy::RoutePolicy;

/// Share of the mass delivered up to some time that came from each signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalDistribution {
    pub time: u32,
    /// Indexed like the signal slice it was built from.
    pub q: Vec<f64>,
}

/// Cumulative delivered mass per signal up to `t`, normalized. `None` when
/// nothing has arrived yet.
pub fn arrival_distribution(
    geometry: &Geometry,
    policy: &RoutePolicy,
    signals: &[Signal],
    target: usize,
    t: u32,
) -> Option<ArrivalDistribution> {
    let mass: Vec<f64> = signals
        .iter()
        .map(|s| {
            if s.emit_time > t {
                return 0.0;
            }
            let lo = geometry.min_delay(s.source, target);
            let hi = (t - s.emit_time).min(geometry.horizon());
            if lo > hi {
                return 0.0;
            }
            policy.row(s.source, target)[lo as usize..=hi as usize].iter().sum()
        })
        .collect();
    let total: f64 = mass.iter().sum();
    (total > 0.0).then(|| ArrivalDistribution {
        time: t,
        q: mass.into_iter().map(|m| m / total).collect(),
    })
}

/// `sum_lm q_l q_m x_l . x_m`, evaluated as the squared norm of the
/// q-weighted mean signal.
pub fn expected_similarity(dist: &ArrivalDistribution, signals: &[Signal]) -> f64 {
    assert_eq!(dist.q.len(), signals.len());
    let mut mean = Dipole::zeros(signals.first().map_or(0, |s| s.dipole.dim()));
    for (q, s) in dist.q.iter().zip(signals) {
        let scaled = Dipole::new(s.dipole.components().iter().map(|x| x * q).collect());
        mean.add_assign(&scaled);
    }
    mean.dot(&mean)
}

/// Mean expected similarity over the timestamps in `window`.
pub fn windowed_similarity(
    geometry: &Geometry,
    policy: &RoutePolicy,
    signals: &[Signal],
    target: usize,
    window: std::ops::RangeInclusive<u32>,
) -> Option<f64> {
    let values: Vec<f64> = window
        .filter_map(|t| arrival_distribution(geometry, policy, signals, target, t))
        .map(|d| expected_similarity(&d, signals))
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Rows are learners (targets), columns are input labels or sending policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub corner: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn cell(&self, r: usize, c: usize) -> Option<f64> {
        self.cells[r][c]
    }

    /// The own column is the first maximum of its row.
    pub fn diagonal_is_row_max(&self, r: usize) -> bool {
        let row: Vec<f64> = self.cells[r].iter().map(|c| c.unwrap_or(f64::NEG_INFINITY)).collect();
        crate::engine::argmax_first(&row) == r
    }

    /// The own column strictly exceeds every other column of its row.
    pub fn diagonal_exceeds_row(&self, r: usize) -> bool {
        let Some(d) = self.cells[r][r] else { return false };
        self.cells[r]
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != r)
            .all(|(_, v)| v.is_none_or(|v| d > v))
    }

    pub fn to_csv(&self, precision: usize) -> String {
        let mut out = format!("{},{}\n", self.corner, self.cols.join(","));
        for (name, row) in self.rows.iter().zip(&self.cells) {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map_or_else(|| "NA".to_string(), |v| format!("{v:.precision$}")))
                .collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }
}

pub const SIMILARITY_WINDOW: std::ops::RangeInclusive<u32> = 19..=24;

/// Expected similarity of arriving signals with the host field withdrawn.
/// `inputs[c]` holds the encoded test images of the model's `c`-th label.
pub fn similarity_table(model: &InterferenceModel, inputs: &[Vec<Vec<Signal>>]) -> Table {
    let labels = model.geometry.labels();
    assert_eq!(inputs.len(), labels.len());
    let cells = (0..labels.len())
        .map(|learner| {
            inputs
                .iter()
                .map(|images| {
                    let vals: Vec<f64> = images
                        .iter()
                        .filter_map(|sig| {
                            windowed_similarity(&model.geometry, &model.policy, sig, learner, SIMILARITY_WINDOW)
                        })
                        .collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect()
        })
        .collect();
    Table {
        corner: "learner".into(),
        rows: labels.iter().map(|l| format!("L{l}")).collect(),
        cols: labels.iter().map(|l| format!("y={l}")).collect(),
        cells,
    }
}

/// Mean travel duration of signals sent from `sources` at `t = 0` with the
/// route table of `sending`, counting only durations that can physically
/// reach `destination`.
pub fn expected_arrival_time(
    geometry: &Geometry,
    policy: &RoutePolicy,
    sources: &[usize],
    sending: usize,
    destination: usize,
) -> Option<f64> {
    let (mut weighted, mut total) = (0.0, 0.0);
    for &s in sources {
        let lo = geometry.min_delay(s, destination) as usize;
        for (d, &p) in policy.row(s, sending).iter().enumerate().skip(lo) {
            weighted += p * d as f64;
            total += p;
        }
    }
    (total > 0.0).then(|| weighted / total)
}

/// White input from every source: rows are destinations, columns sending policies.
pub fn arrival_time_table(geometry: &Geometry, policy: &RoutePolicy) -> Table {
    let labels = geometry.labels();
    let all: Vec<usize> = (0..geometry.num_sources()).collect();
    let cells = (0..labels.len())
        .map(|dest| {
            (0..labels.len())
                .map(|send| expected_arrival_time(geometry, policy, &all, send, dest))
                .collect()
        })
        .collect();
    Table {
        corner: "learner".into(),
        rows: labels.iter().map(|l| format!("L{l}")).collect(),
        cols: labels.iter().map(|l| format!("P{l}")).collect(),
        cells,
    }
}

/// Shannon entropy (nats) of the arrival-time distribution of the mass sent
/// by similar sources. `None` without any similar source.
pub fn signal_entropy(
    geometry: &Geometry,
    policy: &RoutePolicy,
    signals: &[Signal],
    target: usize,
    field: &TargetField,
    threshold: f64,
) -> Option<f64> {
    let mut per_t = vec![0.0; geometry.config().durations()];
    let mut any = false;
    for s in signals.iter().filter(|s| s.similarity(field) >= threshold) {
        any = true;
        for d in geometry.min_delay(s.source, target)..=geometry.horizon() {
            let t = s.emit_time + d;
            if t <= geometry.horizon() {
                per_t[t as usize] += policy.prob(s.source, target, d);
            }
        }
    }
    let total: f64 = per_t.iter().sum();
    if !any || total <= 0.0 {
        return None;
    }
    Some(
        -per_t
            .iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| {
                let q = m / total;
                q * q.ln()
            })
            .sum::<f64>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_patch, make_target};
    use crate::geometry::{GridCoord, SpacetimeConfig, TargetSite};
    use crate::policy::LearningRates;
    use proptest::prelude::*;

    fn mnist() -> InterferenceModel {
        InterferenceModel::mnist(&[0, 1, 2, 4], LearningRates::default()).unwrap()
    }

    fn unit(v: &[f64]) -> Signal {
        Signal {
            dipole: Dipole::new(v.to_vec()).normalized().unwrap(),
            source: 0,
            emit_time: 0,
        }
    }

    fn brute_similarity(q: &[f64], signals: &[Signal]) -> f64 {
        let mut s = 0.0;
        for (l, xl) in signals.iter().enumerate() {
            for (m, xm) in signals.iter().enumerate() {
                s += q[l] * q[m] * xl.dipole.dot(&xm.dipole);
            }
        }
        s
    }

    #[test]
    fn distribution_cases() {
        let m = mnist();
        let signals = vec![encode_patch(&[1; 9], 0, 0)];
        assert!(arrival_distribution(&m.geometry, &m.policy, &signals, 0, 1).is_none());
        let d = arrival_distribution(&m.geometry, &m.policy, &signals, 0, 10).unwrap();
        assert_eq!(d.q, vec![1.0]);
    }

    #[test]
    fn distribution_normalizes_cumulative_mass() {
        // Source (0,0) is 2 from corner 0, source (0,1) is 3. At t = 4 they have
        // delivered 3 and 2 uniform slots.
        let m = mnist();
        let signals = vec![encode_patch(&[1; 9], 0, 0), encode_patch(&[0; 9], 1, 0)];
        let d = arrival_distribution(&m.geometry, &m.policy, &signals, 0, 4).unwrap();
        assert!((d.q[0] - 0.6).abs() < 1e-12 && (d.q[1] - 0.4).abs() < 1e-12);

        let mut p = m.policy.clone();
        let mut rows = p.as_slice().to_vec();
        // Make the cumulative masses 0.3 and 0.1 at t = 3.
        let dur = 25;
        rows[..dur].fill(0.0);
        rows[2] = 0.1;
        rows[3] = 0.2;
        rows[4] = 0.7;
        let off = 4 * dur;
        rows[off..off + dur].fill(0.0);
        rows[off + 3] = 0.1;
        rows[off + 4] = 0.9;
        p = RoutePolicy::from_rows(81, 4, 25, rows).unwrap();
        let d = arrival_distribution(&m.geometry, &p, &signals, 0, 3).unwrap();
        assert!((d.q[0] - 0.75).abs() < 1e-12 && (d.q[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn expected_similarity_cases() {
        let half = ArrivalDistribution {
            time: 0,
            q: vec![0.5, 0.5],
        };
        let same = vec![unit(&[1.0, 2.0]), unit(&[1.0, 2.0])];
        assert!((expected_similarity(&half, &same) - 1.0).abs() < 1e-12);
        let ortho = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        assert!((expected_similarity(&half, &ortho) - 0.5).abs() < 1e-12);
        let anti = vec![unit(&[1.0, 0.0]), unit(&[-1.0, 0.0])];
        assert!(expected_similarity(&half, &anti).abs() < 1e-12);
    }

    #[test]
    fn arrival_time_cases() {
        let m = mnist();
        // Uniform table, (0,0) toward its own corner: mean of 2..=24.
        assert!((expected_arrival_time(&m.geometry, &m.policy, &[0], 0, 0).unwrap() - 13.0).abs() < 1e-12);

        // Point mass at the distance for every source gives the mean distance.
        let mut rows = vec![0.0; 81 * 4 * 25];
        for s in 0..81 {
            for y in 0..4 {
                rows[(s * 4 + y) * 25 + m.geometry.distance(s, y) as usize] = 1.0;
            }
        }
        let p = RoutePolicy::from_rows(81, 4, 25, rows).unwrap();
        let all: Vec<usize> = (0..81).collect();
        let mean = all.iter().map(|&s| m.geometry.distance(s, 3) as f64).sum::<f64>() / 81.0;
        assert!((expected_arrival_time(&m.geometry, &p, &all, 3, 3).unwrap() - mean).abs() < 1e-12);

        // Nothing this table sends can reach a destination past the horizon.
        let near = vec![
            TargetSite {
                label: 0,
                coord: GridCoord::new(0, 0),
            },
            TargetSite {
                label: 1,
                coord: GridCoord::new(0, 30),
            },
        ];
        let g = Geometry::new(vec![GridCoord::new(0, 0)], near, SpacetimeConfig::MNIST).unwrap();
        let p = RoutePolicy::init_uniform(&g);
        assert_eq!(expected_arrival_time(&g, &p, &[0], 0, 1), None);
    }

    #[test]
    fn entropy_cases() {
        let m = mnist();
        let g = &m.fields[0];
        let lit = vec![encode_patch(&[1; 9], 0, 0)];
        let h = signal_entropy(&m.geometry, &m.policy, &lit, 0, g, 0.7).unwrap();
        assert!((h - 23f64.ln()).abs() < 1e-12);
        let dark = vec![encode_patch(&[0; 9], 0, 0)];
        assert_eq!(signal_entropy(&m.geometry, &m.policy, &dark, 0, g, 0.7), None);

        let mut rows = m.policy.as_slice().to_vec();
        rows[..25].fill(0.0);
        rows[7] = 1.0;
        let p = RoutePolicy::from_rows(81, 4, 25, rows.clone()).unwrap();
        assert_eq!(signal_entropy(&m.geometry, &p, &lit, 0, g, 0.7), Some(0.0));

        rows[..25].fill(0.0);
        rows[10..16].fill(1.0 / 6.0);
        let p = RoutePolicy::from_rows(81, 4, 25, rows).unwrap();
        let h = signal_entropy(&m.geometry, &p, &lit, 0, g, 0.7).unwrap();
        assert!((h - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn untrained_rows_are_symmetric_for_symmetric_input() {
        let m = mnist();
        // A centred plus shape, symmetric under both mirror axes.
        let signals: Vec<Signal> = (0..81)
            .map(|s| {
                let (r, c) = (s / 9, s % 9);
                let on = r == 4 || c == 4;
                encode_patch(&if on { [1; 9] } else { [0, 1, 0, 1, 1, 1, 0, 1, 0] }, s, 0)
            })
            .collect();
        let inputs = vec![vec![signals.clone()]; 4];
        let table = similarity_table(&m, &inputs);
        let first = table.cell(0, 0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert!((table.cell(r, c).unwrap() - first).abs() < 1e-12);
            }
        }
        // Brute force agrees for one corner.
        let d = arrival_distribution(&m.geometry, &m.policy, &signals, 2, 20).unwrap();
        assert!((expected_similarity(&d, &signals) - brute_similarity(&d.q, &signals)).abs() < 1e-12);
    }

    #[test]
    fn table_verdicts_and_csv() {
        let t = Table {
            corner: "learner".into(),
            rows: vec!["L0".into(), "L1".into()],
            cols: vec!["y=0".into(), "y=1".into()],
            cells: vec![vec![Some(0.3), Some(0.2)], vec![Some(0.5), Some(0.4)]],
        };
        assert!(t.diagonal_is_row_max(0) && !t.diagonal_is_row_max(1));
        assert!(t.diagonal_exceeds_row(0) && !t.diagonal_exceeds_row(1));
        assert_eq!(t.to_csv(2), "learner,y=0,y=1\nL0,0.30,0.20\nL1,0.50,0.40\n");
    }

    #[test]
    fn entropy_uses_field() {
        let g = make_target(TargetSite {
            label: 0,
            coord: GridCoord::new(-1, -1),
        });
        let m = mnist();
        let lit = vec![encode_patch(&[1; 9], 80, 0)];
        // Distance 18: seven feasible slots.
        let h = signal_entropy(&m.geometry, &m.policy, &lit, 0, &g, 0.7).unwrap();
        assert!((h - 7f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn similarity_matches_double_sum_and_is_bounded(
            raw in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 4), 0.01f64..1.0), 1..12)
        ) {
            let signals: Vec<Signal> = raw.iter().filter_map(|(v, _)| Dipole::new(v.clone()).normalized()).map(|d| Signal { dipole: d, source: 0, emit_time: 0 }).collect();
            prop_assume!(!signals.is_empty());
            let w: Vec<f64> = raw.iter().take(signals.len()).map(|(_, w)| *w).collect();
            let total: f64 = w.iter().sum();
            let dist = ArrivalDistribution { time: 0, q: w.iter().map(|x| x / total).collect() };
            let fast = expected_similarity(&dist, &signals);
            prop_assert!((fast - brute_similarity(&dist.q, &signals)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&fast));
        }

        #[test]
        fn entropy_is_bounded_by_uniform(rows in prop::collection::vec(0.0f64..1.0, 25)) {
            let m = mnist();
            let mut all = m.policy.as_slice().to_vec();
            let total: f64 = rows.iter().sum::<f64>() + 1e-3;
            for (d, v) in rows.iter().enumerate() {
                all[d] = (v + 1e-3 / 25.0) / total;
            }
            let p = RoutePolicy::from_rows(81, 4, 25, all).unwrap();
            let lit = vec![encode_patch(&[1; 9], 0, 0)];
            let h = signal_entropy(&m.geometry, &p, &lit, 0, &m.fields[0], 0.7).unwrap();
            prop_assert!(h >= 0.0 && h <= 23f64.ln() + 1e-12);
        }
    }
}

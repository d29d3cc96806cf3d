//! Discrete space-time lattice: source and target coordinates, Manhattan
//! distances and the travel durations allowed by the speed limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the MNIST patch grid (27 pixels / 3).
pub const GRID_EXTENT: i32 = 9;
/// Number of MNIST sources, one per 3x3 patch.
pub const MNIST_SOURCES: usize = (GRID_EXTENT * GRID_EXTENT) as usize;

/// A lattice site in patch units. Targets may sit outside the source square,
/// so coordinates are signed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCoord {
    pub row: i32,
    pub col: i32,
}

impl GridCoord {
    pub const fn new(row: i32, col: i32) -> Self {
        Self { row, col }
    }

    pub fn in_source_square(self) -> bool {
        (0..GRID_EXTENT).contains(&self.row) && (0..GRID_EXTENT).contains(&self.col)
    }
}

pub fn manhattan_distance(a: GridCoord, b: GridCoord) -> u32 {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

/// A class receiver placed at a fixed lattice site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSite {
    pub label: u8,
    pub coord: GridCoord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpacetimeConfig {
    /// Last timestamp; time runs over `0..=horizon`.
    pub horizon: u32,
    /// Lattice cells a signal may cross per timestamp.
    pub max_speed: u32,
}

impl SpacetimeConfig {
    pub const MNIST: SpacetimeConfig = SpacetimeConfig {
        horizon: 24,
        max_speed: 1,
    };

    pub fn new(horizon: u32, max_speed: u32) -> Result<Self> {
        if horizon == 0 || max_speed == 0 {
            return Err(Error::Config(format!(
                "horizon ({horizon}) and max_speed ({max_speed}) must be positive"
            )));
        }
        Ok(Self { horizon, max_speed })
    }

    /// Number of distinct travel durations `0..=horizon`.
    pub fn durations(&self) -> usize {
        self.horizon as usize + 1
    }
}

impl Default for SpacetimeConfig {
    fn default() -> Self {
        Self::MNIST
    }
}

/// Corner sites just outside the 9x9 source square, in the order labels are
/// assigned to them.
pub const MNIST_CORNERS: [GridCoord; 4] = [
    GridCoord::new(-1, -1),
    GridCoord::new(-1, GRID_EXTENT),
    GridCoord::new(GRID_EXTENT, -1),
    GridCoord::new(GRID_EXTENT, GRID_EXTENT),
];

/// Maps exactly four class labels, in the given order, onto the four corners.
pub fn target_sites(labels: &[u8]) -> Result<Vec<TargetSite>> {
    if labels.len() != MNIST_CORNERS.len() {
        return Err(Error::Config(format!(
            "expected {} class labels, got {}",
            MNIST_CORNERS.len(),
            labels.len()
        )));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::Config(format!("duplicate class label {l}")));
        }
    }
    Ok(labels
        .iter()
        .zip(MNIST_CORNERS)
        .map(|(&label, coord)| TargetSite { label, coord })
        .collect())
}

/// Smallest travel duration that respects the speed limit.
pub fn min_duration(dist: u32, cfg: &SpacetimeConfig) -> u32 {
    dist.div_ceil(cfg.max_speed)
}

/// All durations `d` with `dist / max_speed <= d <= horizon`. Longer routes are
/// detours and stay feasible.
pub fn feasible_durations(src: GridCoord, tgt: &TargetSite, cfg: &SpacetimeConfig) -> std::ops::RangeInclusive<u32> {
    let lo = min_duration(manhattan_distance(src, tgt.coord), cfg);
    // An empty range when lo > horizon.
    lo..=cfg.horizon
}

/// Sources, targets and the precomputed source-to-target minimum durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    sources: Vec<GridCoord>,
    targets: Vec<TargetSite>,
    config: SpacetimeConfig,
    /// `min_delay[s * targets + y]`
    min_delay: Vec<u32>,
}

impl Geometry {
    pub fn new(sources: Vec<GridCoord>, targets: Vec<TargetSite>, config: SpacetimeConfig) -> Result<Self> {
        if sources.is_empty() || targets.is_empty() {
            return Err(Error::Config(
                "geometry needs at least one source and one target".into(),
            ));
        }
        let min_delay = sources
            .iter()
            .flat_map(|&s| targets.iter().map(move |t| (s, t)))
            .map(|(s, t)| min_duration(manhattan_distance(s, t.coord), &config))
            .collect();
        Ok(Self {
            sources,
            targets,
            config,
            min_delay,
        })
    }

    /// The 9x9 MNIST source grid (row-major) with the given labels at the corners.
    pub fn mnist(labels: &[u8]) -> Result<Self> {
        let sources = (0..GRID_EXTENT)
            .flat_map(|row| (0..GRID_EXTENT).map(move |col| GridCoord::new(row, col)))
            .collect();
        Self::new(sources, target_sites(labels)?, SpacetimeConfig::MNIST)
    }

    pub fn sources(&self) -> &[GridCoord] {
        &self.sources
    }

    pub fn targets(&self) -> &[TargetSite] {
        &self.targets
    }

    pub fn config(&self) -> &SpacetimeConfig {
        &self.config
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn horizon(&self) -> u32 {
        self.config.horizon
    }

    pub fn labels(&self) -> Vec<u8> {
        self.targets.iter().map(|t| t.label).collect()
    }

    pub fn target_index(&self, label: u8) -> Option<usize> {
        self.targets.iter().position(|t| t.label == label)
    }

    pub fn source_index(&self, coord: GridCoord) -> Option<usize> {
        self.sources.iter().position(|&s| s == coord)
    }

    pub fn distance(&self, source: usize, target: usize) -> u32 {
        manhattan_distance(self.sources[source], self.targets[target].coord)
    }

    pub fn min_delay(&self, source: usize, target: usize) -> u32 {
        self.min_delay[source * self.targets.len() + target]
    }

    pub fn is_feasible(&self, source: usize, target: usize, duration: u32) -> bool {
        duration >= self.min_delay(source, target) && duration <= self.config.horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let o = GridCoord::new(0, 0);
        assert_eq!(manhattan_distance(o, o), 0);
        assert_eq!(manhattan_distance(GridCoord::new(8, 8), GridCoord::new(-1, -1)), 18);
        assert_eq!(manhattan_distance(o, GridCoord::new(-1, -1)), 2);
    }

    #[test]
    fn corners_follow_label_order() {
        let sites = target_sites(&[0, 1, 2, 4]).unwrap();
        let got: Vec<_> = sites.iter().map(|s| (s.label, s.coord.row, s.coord.col)).collect();
        assert_eq!(got, vec![(0, -1, -1), (1, -1, 9), (2, 9, -1), (4, 9, 9)]);
        assert!(sites.iter().all(|s| !s.coord.in_source_square()));
    }

    #[test]
    fn wrong_label_count_is_rejected() {
        assert!(matches!(target_sites(&[]), Err(Error::Config(_))));
        assert!(matches!(target_sites(&[0, 1]), Err(Error::Config(_))));
        assert!(matches!(target_sites(&[0, 1, 1, 4]), Err(Error::Config(_))));
    }

    #[test]
    fn mnist_distance_range() {
        let g = Geometry::mnist(&[0, 1, 2, 4]).unwrap();
        let all: Vec<u32> = (0..81)
            .flat_map(|s| (0..4).map(move |y| (s, y)))
            .map(|(s, y)| g.distance(s, y))
            .collect();
        assert_eq!(*all.iter().min().unwrap(), 2);
        assert_eq!(*all.iter().max().unwrap(), 18);
        for y in 0..4 {
            assert!(g
                .sources()
                .iter()
                .all(|&s| manhattan_distance(s, g.targets()[y].coord) <= 18));
        }
    }

    #[test]
    fn feasible_duration_examples() {
        let cfg = SpacetimeConfig::MNIST;
        let far = TargetSite {
            label: 0,
            coord: GridCoord::new(-1, -1),
        };
        let d = feasible_durations(GridCoord::new(8, 8), &far, &cfg);
        assert_eq!(d.clone().count(), 7);
        assert_eq!((*d.start(), *d.end()), (18, 24));

        let here = TargetSite {
            label: 0,
            coord: GridCoord::new(3, 3),
        };
        assert_eq!(feasible_durations(GridCoord::new(3, 3), &here, &cfg), 0..=24);

        let unreachable = TargetSite {
            label: 0,
            coord: GridCoord::new(20, 5),
        };
        assert!(feasible_durations(GridCoord::new(0, 0), &unreachable, &cfg).is_empty());
    }

    #[test]
    fn config_rejects_zero() {
        assert!(SpacetimeConfig::new(0, 1).is_err());
        assert!(SpacetimeConfig::new(24, 0).is_err());
        assert_eq!(SpacetimeConfig::new(24, 1).unwrap(), SpacetimeConfig::MNIST);
    }

    fn coord() -> impl Strategy<Value = GridCoord> {
        (-30i32..30, -30i32..30).prop_map(|(r, c)| GridCoord::new(r, c))
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in coord(), b in coord(), c in coord()) {
            prop_assert_eq!(manhattan_distance(a, b), manhattan_distance(b, a));
            prop_assert_eq!(manhattan_distance(a, b) == 0, a == b);
            prop_assert!(manhattan_distance(a, c) <= manhattan_distance(a, b) + manhattan_distance(b, c));
        }

        #[test]
        fn feasible_set_is_contiguous_tail(a in coord(), b in coord(), horizon in 1u32..40) {
            let cfg = SpacetimeConfig::new(horizon, 1).unwrap();
            let t = TargetSite { label: 0, coord: b };
            let dist = manhattan_distance(a, b);
            let set: Vec<u32> = feasible_durations(a, &t, &cfg).collect();
            prop_assert_eq!(set.is_empty(), dist > horizon);
            if let Some(&first) = set.first() {
                prop_assert_eq!(first, dist);
                prop_assert_eq!(*set.last().unwrap(), horizon);
                prop_assert_eq!(set.len() as u32, horizon - dist + 1);
            }
        }
    }
}

//! Mean-field magnetization of an attention layer: the fixed point of
//! `mu = tanh(beta * (n_bar * J * mu + b))`, swept over the external field
//! to expose the hysteresis loop that opens once `beta * n_bar * J > 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfParams {
    pub beta: f64,
    pub n_bar: f64,
    pub coupling: f64,
    pub b_ext: f64,
}

impl MfParams {
    pub fn new(beta: f64, n_bar: f64, coupling: f64, b_ext: f64) -> Result<Self> {
        let finite = [beta, n_bar, coupling, b_ext].iter().all(|v| v.is_finite());
        if !finite || beta <= 0.0 || n_bar < 0.0 {
            return Err(Error::Config(format!(
                "mean-field parameters need beta > 0 and n_bar >= 0 (got beta={beta}, n_bar={n_bar})"
            )));
        }
        Ok(Self {
            beta,
            n_bar,
            coupling,
            b_ext,
        })
    }

    /// `beta * n_bar * J`, the quantity whose crossing of 1 opens the loop.
    pub fn gain(&self) -> f64 {
        self.beta * self.n_bar * self.coupling
    }

    pub fn rhs(&self, mu: f64) -> f64 {
        (self.beta * (self.n_bar * self.coupling * mu + self.b_ext)).tanh()
    }

    pub fn residual(&self, mu: f64) -> f64 {
        (mu - self.rhs(mu)).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-12,
            max_iterations: 100_000,
        }
    }
}

pub fn solve_mu(params: &MfParams, init_mu: f64) -> Result<f64> {
    solve_mu_with(params, init_mu, &SolverSettings::default())
}

/// Damped fixed-point iteration from `init_mu`.
pub fn solve_mu_with(params: &MfParams, init_mu: f64, s: &SolverSettings) -> Result<f64> {
    if !(-1.0..=1.0).contains(&init_mu) {
        return Err(Error::Range(format!("initial magnetization {init_mu} outside [-1, 1]")));
    }
    let mut mu = init_mu;
    for _ in 0..s.max_iterations {
        let next = (1.0 - s.damping) * mu + s.damping * params.rhs(mu);
        let step = (next - mu).abs();
        mu = next;
        if step < s.tolerance && params.residual(mu) <= 1e-10 {
            return Ok(mu);
        }
    }
    Err(Error::NoConvergence {
        iterations: s.max_iterations,
        beta: params.beta,
        n_bar: params.n_bar,
        coupling: params.coupling,
        b_ext: params.b_ext,
        last_mu: mu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Ascending,
    Descending,
}

/// Solves along `b_grid`, each point warm-started from the previous one. The
/// ascending branch starts from `mu = -1`, the descending one from `+1`.
pub fn activation_curve(
    beta: f64,
    n_bar: f64,
    coupling: f64,
    b_grid: &[f64],
    branch: Branch,
) -> Result<Vec<(f64, f64)>> {
    if b_grid.is_empty() {
        return Err(Error::Config("field grid is empty".into()));
    }
    let monotone = match branch {
        Branch::Ascending => b_grid.windows(2).all(|w| w[0] <= w[1]),
        Branch::Descending => b_grid.windows(2).all(|w| w[0] >= w[1]),
    };
    if !monotone {
        return Err(Error::Config(format!(
            "field grid is not monotone for the {branch:?} branch"
        )));
    }
    let mut mu = match branch {
        Branch::Ascending => -1.0,
        Branch::Descending => 1.0,
    };
    b_grid
        .iter()
        .map(|&b| {
            mu = solve_mu(&MfParams::new(beta, n_bar, coupling, b)?, mu)?;
            Ok((b, mu))
        })
        .collect()
}

/// Both branches on one ascending grid: `(b, mu_ascending, mu_descending)`.
pub fn hysteresis_curves(beta: f64, n_bar: f64, coupling: f64, b_grid: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let up = activation_curve(beta, n_bar, coupling, b_grid, Branch::Ascending)?;
    let rev: Vec<f64> = b_grid.iter().rev().copied().collect();
    let mut down = activation_curve(beta, n_bar, coupling, &rev, Branch::Descending)?;
    down.reverse();
    Ok(up.iter().zip(&down).map(|(&(b, a), &(_, d))| (b, a, d)).collect())
}

/// Trapezoid integral of `|mu_descending - mu_ascending|` over `b`.
pub fn hysteresis_area(curves: &[(f64, f64, f64)]) -> f64 {
    curves
        .windows(2)
        .map(|w| {
            let (b0, a0, d0) = w[0];
            let (b1, a1, d1) = w[1];
            0.5 * (b1 - b0) * ((d0 - a0).abs() + (d1 - a1).abs())
        })
        .sum()
}

pub fn curves_csv(curves: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("b,mu_ascending,mu_descending\n");
    for (b, a, d) in curves {
        out.push_str(&format!("{b:.6},{a:.12},{d:.12}\n"));
    }
    out
}

/// Threshold above which a zero-field solution counts as magnetized.
pub const SPONTANEOUS_MU: f64 = 1e-6;

/// Zero-field magnetization solved from `mu = 1`. Right at the critical gain
/// the iteration slows down without bound; a solve that runs out of
/// iterations there is read as non-magnetized, since its last iterate is
/// still decaying toward zero.
pub fn spontaneous_mu(beta: f64, coupling: f64, n_bar: f64) -> Result<f64> {
    let p = MfParams::new(beta, n_bar, coupling, 0.0)?;
    match solve_mu(&p, 1.0) {
        Ok(mu) => Ok(mu),
        Err(Error::NoConvergence { last_mu, .. }) if (p.gain() - 1.0).abs() < 1e-2 && last_mu.abs() < 1e-2 => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Smallest grid `n_bar` whose zero-field magnetization exceeds `1e-6`.
pub fn transition_check(beta: f64, coupling: f64, n_bar_grid: &[f64]) -> Result<f64> {
    let gains: Vec<f64> = n_bar_grid.iter().map(|n| beta * n * coupling).collect();
    let lo = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n_bar_grid.is_empty() || !(lo <= 1.0 && hi > 1.0) {
        return Err(Error::Range(format!(
            "n_bar grid gives beta*n_bar*J in [{lo}, {hi}], which does not span 1"
        )));
    }
    let mut sorted = n_bar_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    for n in sorted {
        if spontaneous_mu(beta, coupling, n)?.abs() > SPONTANEOUS_MU {
            return Ok(n);
        }
    }
    Err(Error::Range("no grid point magnetizes spontaneously".into()))
}

/// `lo, lo + step, ...` up to `hi` inclusive, built from integer multiples.
pub fn linspace_step(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || hi < lo {
        return Vec::new();
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Positive root of `mu = tanh(g * mu)` by bisection.
    fn bisect(g: f64) -> f64 {
        let (mut lo, mut hi) = (1e-9, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - (g * mid).tanh() < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn solve_examples() {
        let p = MfParams::new(1.0, 0.5, 1.0, 0.0).unwrap();
        assert!(solve_mu(&p, 0.9).unwrap().abs() < 1e-10);
        let p = MfParams::new(1.0, 2.0, 1.0, 0.0).unwrap();
        let mu = solve_mu(&p, 1.0).unwrap();
        assert!((mu - bisect(2.0)).abs() < 1e-10);
        assert!((mu - 0.9575).abs() < 1e-4);
        let p = MfParams::new(1.0, 1.0, 1.0, 50.0).unwrap();
        assert!(1.0 - solve_mu(&p, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn parameter_and_init_errors() {
        assert!(MfParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(MfParams::new(1.0, -1.0, 1.0, 0.0).is_err());
        let p = MfParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(solve_mu(&p, 1.5), Err(Error::Range(_))));
        let tight = SolverSettings {
            max_iterations: 3,
            ..Default::default()
        };
        assert!(matches!(
            solve_mu_with(&p, 1.0, &tight),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn curve_examples() {
        let grid = linspace_step(-1.0, 1.0, 0.05);
        let below = hysteresis_curves(1.0, 0.5, 1.0, &grid).unwrap();
        for &(b, a, d) in &below {
            assert!((a - d).abs() < 1e-8, "branches split at b={b}");
        }
        assert!(below.windows(2).all(|w| w[1].1 > w[0].1));
        assert!(hysteresis_area(&below) < 1e-8);

        let above = hysteresis_curves(1.0, 2.0, 1.0, &grid).unwrap();
        let zero = above.iter().find(|c| c.0.abs() < 1e-12).unwrap();
        assert!(zero.1 < -0.9 && zero.2 > 0.9);
        assert!(hysteresis_area(&above) > 0.1);
        // The ascending branch jumps somewhere on the positive side.
        let jump = above.windows(2).map(|w| w[1].1 - w[0].1).fold(0.0, f64::max);
        assert!(jump > 1.0);

        let single = activation_curve(1.0, 0.5, 1.0, &[0.0], Branch::Ascending).unwrap();
        assert_eq!(single.len(), 1);
        assert!(single[0].1.abs() < 1e-10);
        assert!(activation_curve(1.0, 0.5, 1.0, &[], Branch::Ascending).is_err());
        assert!(activation_curve(1.0, 0.5, 1.0, &[1.0, 0.0], Branch::Ascending).is_err());
    }

    #[test]
    fn transition_examples() {
        let grid = linspace_step(0.5, 2.0, 0.05);
        // mu - tanh(g mu) is negative just below its positive root, so the
        // root exceeds 1e-6 exactly when the function is negative there.
        let brute = grid
            .iter()
            .copied()
            .find(|&n| SPONTANEOUS_MU - (n * SPONTANEOUS_MU).tanh() < 0.0);
        let n = transition_check(1.0, 1.0, &grid).unwrap();
        assert_eq!(Some(n), brute);
        assert!(n > 1.0 && n <= 1.05 + 1e-9);

        let n = transition_check(2.0, 1.0, &linspace_step(0.1, 2.0, 0.05)).unwrap();
        assert!((n - 0.5).abs() <= 0.05 + 1e-9);

        assert!(matches!(
            transition_check(1.0, 1.0, &linspace_step(0.1, 0.9, 0.1)),
            Err(Error::Range(_))
        ));
        assert!(matches!(transition_check(1.0, 1.0, &[]), Err(Error::Range(_))));
    }

    proptest! {
        #[test]
        fn solutions_satisfy_the_equation(beta in 0.1f64..3.0, n_bar in 0.0f64..3.0, b in -2.0f64..2.0, init in -1.0f64..1.0) {
            let p = MfParams::new(beta, n_bar, 1.0, b).unwrap();
            prop_assume!((p.gain() - 1.0).abs() > 0.05);
            let mu = solve_mu(&p, init).unwrap();
            prop_assert!((-1.0..=1.0).contains(&mu));
            prop_assert!(p.residual(mu) <= 1e-10);
        }

        #[test]
        fn zero_field_solutions_pair_up(beta in 0.1f64..3.0, n_bar in 0.0f64..3.0) {
            let p = MfParams::new(beta, n_bar, 1.0, 0.0).unwrap();
            prop_assume!((p.gain() - 1.0).abs() > 0.05);
            let up = solve_mu(&p, 1.0).unwrap();
            let down = solve_mu(&p, -1.0).unwrap();
            prop_assert!((up + down).abs() <= 1e-10);
        }
    }
}

//! Heuristic minimization of `I(A:B|F)` over stochastic maps `E → F`.
//!
//! Every candidate map yields a valid upper bound on the intrinsic
//! information, so the search only has to find good maps, not certify
//! optimality. Two sources of candidates are combined:
//!
//! * an exhaustive sweep over deterministic maps, enumerated as set
//!   partitions of `E` (relabelling `F` does not change `I(A:B|F)`);
//! * Nelder–Mead descent over row-stochastic matrices written as normalized
//!   squares `m(f|e) = x_ef² / Σ_f' x_ef'²`, started from the best sweep
//!   maps and from random points.
//!
//! `|F|` is fixed to `|E|`; smaller output alphabets are reached through
//! unused columns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::simplex_search::nelder_mead;
use super::{apply_unchecked, conditional_mutual_information, JointDistribution, StochasticMap};
use crate::error::{Error, Result};

/// Largest `|E|^|E|` for which the deterministic sweep is allowed.
pub const SWEEP_LIMIT: u128 = 10_000_000;

/// How many of the best deterministic maps seed the descent.
const SWEEP_SEEDS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicOptions {
    pub restarts: usize,
    pub deterministic_sweep: bool,
    pub seed: u64,
    /// Objective evaluations per descent run.
    pub max_evals: usize,
}

impl Default for IntrinsicOptions {
    fn default() -> Self {
        IntrinsicOptions {
            restarts: 32,
            deterministic_sweep: true,
            seed: 0,
            max_evals: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicResult {
    /// Smallest `I(A:B|F)` found, in bits.
    pub bound: f64,
    pub map: StochasticMap,
    /// `I(A:B|E)`, the value of the identity map.
    pub identity_value: f64,
    /// Best deterministic map value, when the sweep ran.
    pub sweep_value: Option<f64>,
}

pub fn minimize_intrinsic(
    p: &JointDistribution,
    opts: &IntrinsicOptions,
) -> Result<IntrinsicResult> {
    let ne = p.alphabets()[2];
    let objective = |m: &StochasticMap| conditional_mutual_information(&apply_unchecked(p, m));

    let identity = StochasticMap::identity(ne);
    let identity_value = objective(&identity);
    let mut best = (identity_value, identity);

    let mut seeds = Vec::new();
    let mut sweep_value = None;
    if opts.deterministic_sweep {
        let count = (ne as u128).saturating_pow(ne as u32);
        if count > SWEEP_LIMIT {
            return Err(Error::GuardExceeded {
                count,
                limit: SWEEP_LIMIT,
            });
        }
        let mut scored: Vec<(f64, StochasticMap)> = set_partitions(ne)
            .into_iter()
            .map(|assign| {
                let m = StochasticMap::deterministic(&assign, ne).expect("partition labels < |E|");
                (objective(&m), m)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        sweep_value = scored.first().map(|s| s.0);
        if let Some(first) = scored.first() {
            if first.0 < best.0 {
                best = first.clone();
            }
        }
        seeds = scored.into_iter().take(SWEEP_SEEDS).map(|s| s.1).collect();
    }

    let runs: Vec<(f64, usize, StochasticMap)> = (0..opts.restarts)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(run as u64);
            let start = match seeds.get(run) {
                Some(m) => perturbed_params(m, 0.05, &mut rng),
                None => (0..ne * ne).map(|_| rng.gen_range(0.05..1.0)).collect(),
            };
            let (value, map) = descend(p, ne, start, opts.max_evals);
            (value, run, map)
        })
        .collect();

    for (value, _, map) in runs {
        // Runs arrive in index order, so ties keep the earliest restart.
        if value < best.0 {
            best = (value, map);
        }
    }

    Ok(IntrinsicResult {
        bound: best.0,
        map: best.1,
        identity_value,
        sweep_value,
    })
}

fn descend(
    p: &JointDistribution,
    ne: usize,
    start: Vec<f64>,
    max_evals: usize,
) -> (f64, StochasticMap) {
    let objective =
        |x: &[f64]| conditional_mutual_information(&apply_unchecked(p, &params_to_map(x, ne)));
    let mut x = start;
    let mut value = f64::INFINITY;
    // Restarting from the incumbent rebuilds a collapsed simplex.
    for step in [0.3, 0.1, 0.03] {
        let out = nelder_mead(objective, &x, step, max_evals / 3, 1e-18);
        if out.value <= value {
            value = out.value;
            x = out.x;
        }
    }
    (value, params_to_map(&x, ne))
}

fn params_to_map(x: &[f64], ne: usize) -> StochasticMap {
    let mut m = Vec::with_capacity(ne * ne);
    for row in x.chunks(ne) {
        let norm: f64 = row.iter().map(|v| v * v).sum();
        if norm <= 1e-300 {
            m.extend(std::iter::repeat_n(1.0 / ne as f64, ne));
        } else {
            m.extend(row.iter().map(|v| v * v / norm));
        }
    }
    // Re-normalize so rounding never pushes a row sum outside tolerance.
    for row in m.chunks_mut(ne) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    StochasticMap::new(ne, ne, m).expect("normalized squares form a stochastic map")
}

fn perturbed_params(m: &StochasticMap, noise: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..m.n_in())
        .flat_map(|e| m.row(e).to_vec())
        .map(|v| v.sqrt() + noise * rng.gen::<f64>())
        .collect()
}

/// Restricted growth strings of length `n`: one labelling per set partition.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for label in 0..=max + 1 {
            prefix.push(label);
            extend(prefix, max.max(label), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut prefix = vec![0];
    extend(&mut prefix, 0, n, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{apply_map, mutual_information};

    #[test]
    fn partition_counts_are_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(n).len(), b, "n = {n}");
        }
    }

    #[test]
    fn copy_of_ab_reaches_zero() {
        let p = JointDistribution::from_fn(
            [2, 2, 4],
            |a, b, e| if e == 2 * a + b { 0.25 } else { 0.0 },
        )
        .unwrap();
        let r = minimize_intrinsic(
            &p,
            &IntrinsicOptions {
                restarts: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.bound <= 1e-12);
    }

    #[test]
    fn independent_e_keeps_mutual_information() {
        let pe = [0.2, 0.5, 0.3];
        let pab = [0.4, 0.1, 0.1, 0.4];
        let p = JointDistribution::from_fn([2, 2, 3], |a, b, e| pab[2 * a + b] * pe[e]).unwrap();
        let mi = mutual_information(&p.marginal_ab());
        let r = minimize_intrinsic(
            &p,
            &IntrinsicOptions {
                restarts: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((r.bound - mi).abs() < 1e-9);
    }

    #[test]
    fn never_worse_than_identity_or_sweep() {
        let p = JointDistribution::from_fn([2, 2, 3], |a, b, e| {
            [
                0.1, 0.05, 0.2, 0.02, 0.08, 0.05, 0.03, 0.07, 0.1, 0.15, 0.1, 0.05,
            ][(2 * a + b) * 3 + e]
        })
        .unwrap();
        let r = minimize_intrinsic(
            &p,
            &IntrinsicOptions {
                restarts: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.bound <= r.identity_value);
        assert!(r.bound <= r.sweep_value.unwrap());
        let check = conditional_mutual_information(&apply_map(&p, &r.map).unwrap());
        assert!((check - r.bound).abs() < 1e-12);
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let p = JointDistribution::from_fn([2, 2, 3], |a, b, e| {
            [
                0.1, 0.05, 0.2, 0.02, 0.08, 0.05, 0.03, 0.07, 0.1, 0.15, 0.1, 0.05,
            ][(2 * a + b) * 3 + e]
        })
        .unwrap();
        let opts = IntrinsicOptions {
            restarts: 6,
            deterministic_sweep: false,
            seed: 7,
            max_evals: 900,
        };
        let a = minimize_intrinsic(&p, &opts).unwrap();
        let b = minimize_intrinsic(&p, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_guard() {
        let ne = 9; // 9^9 > 10^7
        let p = JointDistribution::from_fn([1, 1, ne], |_, _, _| 1.0 / ne as f64).unwrap();
        let err = minimize_intrinsic(&p, &IntrinsicOptions::default()).unwrap_err();
        assert!(matches!(err, Error::GuardExceeded { .. }));
        let ok = minimize_intrinsic(
            &p,
            &IntrinsicOptions {
                restarts: 1,
                deterministic_sweep: false,
                max_evals: 300,
                ..Default::default()
            },
        );
        assert!(ok.is_ok());
    }
}

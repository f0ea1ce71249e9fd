//! The local polytope: deterministic strategies, CHSH-type facets, LP
//! membership and maximal local weights of convex decompositions.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::correlation::{check_theta, to_correlators, Correlation, CorrelatorForm, Scenario};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome};

/// Upper bound on `k_A^n_A · k_B^n_B` accepted by vertex enumeration.
pub const VERTEX_LIMIT: u128 = 1_000_000;

/// Total constraint violation below which a correlation counts as local.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Tolerance for facet comparisons `|S| ≤ 2`.
pub const FACET_TOL: f64 = 1e-9;

/// A local deterministic strategy: Alice answers `a(x)`, Bob answers `b(y)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicVertex {
    scenario: Scenario,
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

impl DeterministicVertex {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// `p(a,b|x,y) ∈ {0, 1}` for this strategy.
    #[inline]
    pub fn entry(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        if self.alice[x] == a && self.bob[y] == b {
            1.0
        } else {
            0.0
        }
    }

    pub fn correlation(&self) -> Correlation {
        Correlation::from_fn(self.scenario, |a, b, x, y| self.entry(a, b, x, y))
            .expect("deterministic strategies are valid correlations")
    }
}

pub fn vertex_count(scenario: Scenario) -> u128 {
    let pow = |k: usize, n: usize| (k as u128).saturating_pow(n as u32);
    pow(scenario.k_a, scenario.n_a).saturating_mul(pow(scenario.k_b, scenario.n_b))
}

/// All `k_A^n_A · k_B^n_B` deterministic strategies, Alice's assignment
/// varying slowest.
pub fn enumerate_vertices(scenario: Scenario) -> Result<Vec<DeterministicVertex>> {
    let count = vertex_count(scenario);
    if count > VERTEX_LIMIT {
        return Err(Error::GuardExceeded {
            count,
            limit: VERTEX_LIMIT,
        });
    }
    let alice = assignments(scenario.k_a, scenario.n_a);
    let bob = assignments(scenario.k_b, scenario.n_b);
    let mut out = Vec::with_capacity(count as usize);
    for a in &alice {
        for b in &bob {
            out.push(DeterministicVertex {
                scenario,
                alice: a.clone(),
                bob: b.clone(),
            });
        }
    }
    Ok(out)
}

/// Every function `[n] → [k]`, in lexicographic order.
fn assignments(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect();
    }
    out
}

/// Value of `⟨A_x0 B_y0⟩ + ⟨A_x0 B_y1⟩ + ⟨A_x1 B_y0⟩ − ⟨A_x1 B_y1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FacetValue {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
    pub value: f64,
}

/// CHSH-type expressions for every ordered pair `x0 ≠ x1`, `y0 ≠ y1`.
///
/// In the 2×2, 2×3 and 2×4 binary scenarios these are all the nontrivial
/// facets of the local polytope, so `|S| ≤ 2` for all of them is a complete
/// locality test there.
pub fn facet_values(f: &CorrelatorForm) -> Vec<FacetValue> {
    let e = &f.correlators;
    let (n_a, n_b) = (f.n_a(), f.n_b());
    let mut out = Vec::new();
    for x0 in 0..n_a {
        for x1 in (0..n_a).filter(|&x| x != x0) {
            for y0 in 0..n_b {
                for y1 in (0..n_b).filter(|&y| y != y0) {
                    out.push(FacetValue {
                        x0,
                        x1,
                        y0,
                        y1,
                        value: e[x0][y0] + e[x0][y1] + e[x1][y0] - e[x1][y1],
                    });
                }
            }
        }
    }
    out
}

/// The facet with the largest `|S|`; earliest in index order on ties.
pub fn strongest_facet(values: &[FacetValue]) -> Option<FacetValue> {
    values.iter().copied().fold(None, |best, f| match best {
        Some(b) if b.value.abs() >= f.value.abs() => Some(b),
        _ => Some(f),
    })
}

/// Whether the CHSH facets are the complete facet list for `scenario`.
pub fn facets_complete(scenario: Scenario) -> bool {
    scenario.is_binary() && scenario.n_a == 2 && (2..=4).contains(&scenario.n_b)
}

/// Locality decided by the facet inequalities alone. Only meaningful where
/// [`facets_complete`] holds.
pub fn is_chsh_local(c: &Correlation) -> Result<bool> {
    let f = to_correlators(c)?;
    Ok(facet_values(&f)
        .iter()
        .all(|s| s.value.abs() <= 2.0 + FACET_TOL))
}

/// Visibility `1/(cos θ + sin θ)` at which the noisy biased-CHSH correlation
/// leaves the local polytope.
pub fn local_visibility_theta(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    debug_assert!(theta < FRAC_PI_2);
    Ok(1.0 / (theta.cos() + theta.sin()))
}

/// A convex combination of deterministic strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    pub vertices: Vec<DeterministicVertex>,
    pub weights: Vec<f64>,
}

impl LocalModel {
    /// `Σ w_λ D_λ` as a flat table; not renormalized.
    pub fn table(&self, scenario: Scenario) -> Vec<f64> {
        let mut table = vec![0.0; scenario.len()];
        for (v, &w) in self.vertices.iter().zip(&self.weights) {
            for (x, &a) in v.alice.iter().enumerate() {
                for (y, &b) in v.bob.iter().enumerate() {
                    table[scenario.index(a, b, x, y)] += w;
                }
            }
        }
        table
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalityVerdict {
    Local(LocalModel),
    Nonlocal {
        /// Minimal total violation of `Σ w D = p` found by phase one.
        residual: f64,
        /// Most violated CHSH facet, where the facet list is complete.
        witness: Option<FacetValue>,
    },
}

impl LocalityVerdict {
    pub fn is_local(&self) -> bool {
        matches!(self, LocalityVerdict::Local(_))
    }
}

/// Decides membership in the local polytope by LP feasibility over the
/// deterministic strategies.
pub fn is_local_lp(c: &Correlation) -> Result<LocalityVerdict> {
    let sc = c.scenario();
    let vertices = enumerate_vertices(sc)?;
    let mut lp = LinearProgram::new(vertices.len()).with_feasibility_tol(MEMBERSHIP_TOL);
    for (idx, coeffs) in vertex_rows(sc, &vertices) {
        lp.add_equality(coeffs, c.table()[idx])?;
    }
    match lp.solve()? {
        LpOutcome::Optimal(sol) => Ok(LocalityVerdict::Local(sparse_model(&vertices, &sol.x))),
        LpOutcome::Infeasible { residual } => {
            let witness = if facets_complete(sc) {
                strongest_facet(&facet_values(&to_correlators(c)?))
            } else {
                None
            };
            Ok(LocalityVerdict::Nonlocal { residual, witness })
        }
        LpOutcome::Unbounded => Err(Error::Lp("feasibility problem reported unbounded".into())),
    }
}

/// One row per table entry: the coefficients `D_λ(a,b|x,y)` over vertices.
fn vertex_rows(
    sc: Scenario,
    vertices: &[DeterministicVertex],
) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
    (0..sc.n_a).flat_map(move |x| {
        (0..sc.n_b).flat_map(move |y| {
            (0..sc.k_a).flat_map(move |a| {
                (0..sc.k_b).map(move |b| {
                    let coeffs = vertices.iter().map(|v| v.entry(a, b, x, y)).collect();
                    (sc.index(a, b, x, y), coeffs)
                })
            })
        })
    })
}

fn sparse_model(vertices: &[DeterministicVertex], x: &[f64]) -> LocalModel {
    let (vertices, weights) = vertices
        .iter()
        .zip(x)
        .filter(|(_, &w)| w > 0.0)
        .map(|(v, &w)| (v.clone(), w))
        .unzip();
    LocalModel { vertices, weights }
}

/// Result of a local-weight maximization `p = q·p_L + (1 − q)·p_NL`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWeight {
    pub q: f64,
    /// `p_L`; absent when `q = 0`.
    pub local: Option<Correlation>,
    /// `p_NL`; absent when `q = 1`.
    pub nonlocal: Option<Correlation>,
    /// False when no decomposition of the requested form exists (then `q = 0`).
    pub feasible: bool,
}

/// Largest `q` such that `(p − (1 − q)·target)/q` is local.
///
/// Solved as one LP over unnormalized vertex weights `w` and `q`:
/// `Σ w D − q·target = p − target`, `q ≤ 1`, maximize `q`.
pub fn max_local_weight_along(c: &Correlation, target: &Correlation) -> Result<LocalWeight> {
    c.ensure_same_scenario(target)?;
    let sc = c.scenario();
    if c.max_abs_diff(target)? <= crate::correlation::TOL {
        return Ok(if is_local_lp(c)?.is_local() {
            LocalWeight {
                q: 1.0,
                local: Some(c.clone()),
                nonlocal: None,
                feasible: true,
            }
        } else {
            LocalWeight {
                q: 0.0,
                local: None,
                nonlocal: Some(target.clone()),
                feasible: true,
            }
        });
    }

    let vertices = enumerate_vertices(sc)?;
    let nv = vertices.len();
    // Variables: w_0..w_{nv-1}, q, slack for q ≤ 1.
    let mut lp = LinearProgram::new(nv + 2).with_feasibility_tol(MEMBERSHIP_TOL);
    for (idx, mut coeffs) in vertex_rows(sc, &vertices) {
        coeffs.push(-target.table()[idx]);
        coeffs.push(0.0);
        lp.add_equality(coeffs, c.table()[idx] - target.table()[idx])?;
    }
    let mut cap = vec![0.0; nv + 2];
    cap[nv] = 1.0;
    cap[nv + 1] = 1.0;
    lp.add_equality(cap, 1.0)?;
    let mut cost = vec![0.0; nv + 2];
    cost[nv] = -1.0;
    lp.set_objective(cost)?;

    let sol = match lp.solve()? {
        LpOutcome::Optimal(sol) => sol,
        LpOutcome::Infeasible { .. } => {
            return Ok(LocalWeight {
                q: 0.0,
                local: None,
                nonlocal: None,
                feasible: false,
            })
        }
        LpOutcome::Unbounded => return Err(Error::Lp("local weight LP unbounded".into())),
    };
    let q = sol.x[nv].clamp(0.0, 1.0);
    let model = sparse_model(&vertices, &sol.x[..nv]);
    Ok(LocalWeight {
        q,
        local: normalized_component(sc, model.table(sc), q)?,
        nonlocal: (q < 1.0).then(|| target.clone()),
        feasible: true,
    })
}

/// Largest `q` with `p = q·p_L + (1 − q)·p_NS`, `p_L` local and `p_NS`
/// nonsignaling. For nonsignaling `p` the remainder is automatically
/// nonsignaling, so the LP is `Σ w D + r = p`, `w, r ≥ 0`, maximize `Σ w`.
pub fn max_local_weight_ns(c: &Correlation) -> Result<LocalWeight> {
    if !c.is_nonsignaling() {
        return Err(Error::InvalidCorrelation(format!(
            "correlation is signaling (deviation {:.3e})",
            c.signaling_deviation()
        )));
    }
    let sc = c.scenario();
    let vertices = enumerate_vertices(sc)?;
    let nv = vertices.len();
    let ne = sc.len();
    let mut lp = LinearProgram::new(nv + ne).with_feasibility_tol(MEMBERSHIP_TOL);
    for (idx, mut coeffs) in vertex_rows(sc, &vertices) {
        let mut slack = vec![0.0; ne];
        slack[idx] = 1.0;
        coeffs.extend(slack);
        lp.add_equality(coeffs, c.table()[idx])?;
    }
    let mut cost = vec![-1.0; nv];
    cost.extend(vec![0.0; ne]);
    lp.set_objective(cost)?;
    let sol = match lp.solve()? {
        LpOutcome::Optimal(sol) => sol,
        other => return Err(Error::Lp(format!("unexpected outcome {other:?}"))),
    };
    let q = sol.x[..nv].iter().sum::<f64>().clamp(0.0, 1.0);
    let model = sparse_model(&vertices, &sol.x[..nv]);
    Ok(LocalWeight {
        q,
        local: normalized_component(sc, model.table(sc), q)?,
        nonlocal: normalized_component(sc, sol.x[nv..].to_vec(), 1.0 - q)?,
        feasible: true,
    })
}

/// Rescales a sub-normalized table of total weight `mass` per setting into a
/// correlation; `None` when the mass is negligible.
fn normalized_component(
    sc: Scenario,
    mut table: Vec<f64>,
    mass: f64,
) -> Result<Option<Correlation>> {
    if mass <= 1e-12 {
        return Ok(None);
    }
    let block = sc.k_a * sc.k_b;
    for chunk in table.chunks_mut(block) {
        for p in chunk.iter_mut() {
            *p = p.max(0.0);
        }
        let total: f64 = chunk.iter().sum();
        if total <= 0.0 {
            return Err(Error::Lp("component has an empty setting block".into()));
        }
        for p in chunk.iter_mut() {
            *p /= total;
        }
    }
    Correlation::new(sc, table).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{chsh_four_setting_correlation, chsh_protocol_correlation};
    use std::collections::HashSet;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, SQRT_2};

    #[test]
    fn vertex_counts() {
        let count = |na, nb| {
            enumerate_vertices(Scenario::binary(na, nb).unwrap())
                .unwrap()
                .len()
        };
        assert_eq!(count(2, 2), 16);
        assert_eq!(count(2, 3), 32);
        assert_eq!(count(1, 1), 4);

        let vs = enumerate_vertices(Scenario::binary(2, 3).unwrap()).unwrap();
        let distinct: HashSet<_> = vs.iter().collect();
        assert_eq!(distinct.len(), 32);
        for v in &vs {
            assert!(v
                .correlation()
                .table()
                .iter()
                .all(|&p| p == 0.0 || p == 1.0));
        }
    }

    #[test]
    fn vertex_guard() {
        let sc = Scenario::binary(10, 11).unwrap();
        assert!(matches!(
            enumerate_vertices(sc),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn facet_values_of_ideal_protocol() {
        let f = to_correlators(&chsh_protocol_correlation(FRAC_PI_4, 1.0).unwrap()).unwrap();
        let facets = facet_values(&f);
        assert_eq!(facets.len(), 12);
        let get = |x0, x1, y0, y1| {
            facets
                .iter()
                .find(|s| (s.x0, s.x1, s.y0, s.y1) == (x0, x1, y0, y1))
                .unwrap()
                .value
        };
        assert!((get(0, 1, 0, 1) - 2.0 * SQRT_2).abs() < 1e-12);
        assert!(get(1, 0, 0, 1).abs() < 1e-12);
        let best = strongest_facet(&facets).unwrap();
        assert_eq!((best.x0, best.x1, best.y0, best.y1), (0, 1, 0, 1));
    }

    #[test]
    fn facet_table_for_general_theta() {
        let theta: f64 = 0.37;
        let (s, c) = theta.sin_cos();
        let f = to_correlators(&chsh_protocol_correlation(theta, 1.0).unwrap()).unwrap();
        let expected = [
            ((0, 1, 0, 1), 2.0 * (c + s)),
            ((0, 1, 0, 2), 1.0 + c + s),
            ((0, 1, 1, 0), 0.0),
            ((0, 1, 1, 2), 1.0 - c + s),
            ((0, 1, 2, 0), 1.0 + c - s),
            ((0, 1, 2, 1), 1.0 + c + s),
            ((1, 0, 0, 1), 0.0),
            ((1, 0, 0, 2), -1.0 + c + s),
            ((1, 0, 1, 0), 2.0 * (s - c)),
            ((1, 0, 1, 2), -1.0 - c + s),
            ((1, 0, 2, 0), 1.0 - c + s),
            ((1, 0, 2, 1), 1.0 - c - s),
        ];
        let facets = facet_values(&f);
        for (idx, value) in expected {
            let got = facets
                .iter()
                .find(|s| (s.x0, s.x1, s.y0, s.y1) == idx)
                .unwrap();
            assert!((got.value - value).abs() < 1e-12, "{idx:?}");
        }
    }

    #[test]
    fn uniform_has_zero_facets() {
        let c = Correlation::uniform(Scenario::binary(2, 3).unwrap());
        assert!(facet_values(&to_correlators(&c).unwrap())
            .iter()
            .all(|s| s.value == 0.0));
    }

    #[test]
    fn local_visibility_values() {
        assert!(
            (local_visibility_theta(FRAC_PI_4).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs()
                < 1e-12
        );
        assert!((local_visibility_theta(FRAC_PI_3).unwrap() - 0.7320508075688772).abs() < 1e-12);
        assert!((local_visibility_theta(1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!(local_visibility_theta(0.0).is_err());
        assert!(local_visibility_theta(FRAC_PI_2).is_err());
    }

    #[test]
    fn lp_membership() {
        let theta = 0.6;
        let vl = local_visibility_theta(theta).unwrap();
        let local = chsh_protocol_correlation(theta, vl - 1e-4).unwrap();
        match is_local_lp(&local).unwrap() {
            LocalityVerdict::Local(model) => {
                assert!((model.total_weight() - 1.0).abs() < 1e-9);
                let rebuilt = model.table(local.scenario());
                for (p, q) in rebuilt.iter().zip(local.table()) {
                    assert!((p - q).abs() < 1e-9);
                }
            }
            other => panic!("{other:?}"),
        }

        match is_local_lp(&chsh_protocol_correlation(FRAC_PI_4, 0.75).unwrap()).unwrap() {
            LocalityVerdict::Nonlocal { residual, witness } => {
                assert!(residual > MEMBERSHIP_TOL);
                let w = witness.unwrap();
                assert_eq!((w.x0, w.x1, w.y0, w.y1), (0, 1, 0, 1));
                assert!((w.value - 0.75 * 2.0 * SQRT_2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vertices_are_local_with_unit_weight() {
        let sc = Scenario::binary(2, 2).unwrap();
        for v in enumerate_vertices(sc).unwrap() {
            match is_local_lp(&v.correlation()).unwrap() {
                LocalityVerdict::Local(model) => {
                    assert_eq!(model.vertices.len(), 1);
                    assert_eq!(model.vertices[0], v);
                    assert!((model.weights[0] - 1.0).abs() < 1e-12);
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn lp_agrees_with_facets_on_grid() {
        for k in 1..=5 {
            let theta = k as f64 * std::f64::consts::PI / 12.0;
            for i in 0..=8 {
                let v = 0.60 + 0.05 * i as f64;
                let c = chsh_protocol_correlation(theta, v).unwrap();
                let lp = is_local_lp(&c).unwrap().is_local();
                let facets = is_chsh_local(&c).unwrap();
                let threshold = v <= local_visibility_theta(theta).unwrap();
                assert_eq!(lp, facets, "theta={theta} v={v}");
                assert_eq!(lp, threshold, "theta={theta} v={v}");
            }
        }
    }

    #[test]
    fn four_setting_extension_same_threshold() {
        let theta = 0.5;
        let vl = local_visibility_theta(theta).unwrap();
        let below = chsh_four_setting_correlation(theta, vl - 1e-5).unwrap();
        let above = chsh_four_setting_correlation(theta, vl + 1e-5).unwrap();
        assert!(is_local_lp(&below).unwrap().is_local());
        assert!(!is_local_lp(&above).unwrap().is_local());
    }

    #[test]
    fn local_weight_along_werner_line() {
        let theta = FRAC_PI_4;
        let vl = local_visibility_theta(theta).unwrap();
        let target = chsh_protocol_correlation(theta, 1.0).unwrap();
        let c = chsh_protocol_correlation(theta, 0.85).unwrap();
        let w = max_local_weight_along(&c, &target).unwrap();
        assert!((w.q - (1.0 - 0.85) / (1.0 - vl)).abs() < 1e-9);
        assert!((w.q - 0.512132).abs() < 1e-6);
        let local = w.local.unwrap();
        assert!(is_local_lp(&local).unwrap().is_local());
        let expected_local = chsh_protocol_correlation(theta, vl).unwrap();
        assert!(local.max_abs_diff(&expected_local).unwrap() < 1e-9);
    }

    #[test]
    fn local_weight_degenerate_cases() {
        let target = chsh_protocol_correlation(FRAC_PI_4, 1.0).unwrap();
        let same = max_local_weight_along(&target, &target).unwrap();
        assert_eq!(same.q, 0.0);
        assert!(same.feasible);

        let local = chsh_protocol_correlation(FRAC_PI_4, 0.5).unwrap();
        assert_eq!(max_local_weight_along(&local, &local).unwrap().q, 1.0);
        let w = max_local_weight_along(&local, &target).unwrap();
        assert!((w.q - 1.0).abs() < 1e-9);
    }

    #[test]
    fn local_weight_infeasible_segment() {
        // Mixing a local target with local points never yields a nonlocal one.
        let c = chsh_protocol_correlation(FRAC_PI_4, 0.9).unwrap();
        let target = Correlation::from_fn(c.scenario(), |a, b, x, y| {
            if (a, b) == (x % 2, y % 2) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let w = max_local_weight_along(&c, &target).unwrap();
        assert!(!w.feasible);
        assert_eq!(w.q, 0.0);
    }

    #[test]
    fn ns_local_weight() {
        let sc = Scenario::binary(2, 2).unwrap();
        let pr = Correlation::from_fn(sc, |a, b, x, y| if (a ^ b) == (x & y) { 0.5 } else { 0.0 })
            .unwrap();
        let w = max_local_weight_ns(&pr).unwrap();
        assert!(w.q.abs() < 1e-9);

        let local = chsh_protocol_correlation(0.7, 0.4).unwrap();
        assert!((max_local_weight_ns(&local).unwrap().q - 1.0).abs() < 1e-9);

        // Ideal CHSH point: 0 ≤ q ≤ 1 − (S − 2)/(4 − 2).
        let ideal = chsh_protocol_correlation(FRAC_PI_4, 1.0).unwrap();
        let w = max_local_weight_ns(&ideal).unwrap();
        let s = 2.0 * SQRT_2;
        assert!(w.q >= 0.0 && w.q <= 1.0 - (s - 2.0) / 2.0 + 1e-9);
        let mixed = w
            .local
            .as_ref()
            .unwrap()
            .mix(w.nonlocal.as_ref().unwrap(), w.q)
            .unwrap();
        assert!(mixed.max_abs_diff(&ideal).unwrap() < 1e-9);
        assert!(w.nonlocal.unwrap().signaling_deviation() < 1e-9);
    }

    #[test]
    fn ns_rejects_signaling() {
        let sc = Scenario::binary(1, 2).unwrap();
        let c = Correlation::new(sc, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(max_local_weight_ns(&c).is_err());
    }
}

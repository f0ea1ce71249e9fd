//! Convex-combination attack on protocols that announce their settings.
//!
//! Eve hands out local deterministic strategies with probability `q_L`
//! (and then knows both outcomes, `e = (a, b)`) and a nonlocal correlation
//! otherwise (`e = ?`). Relabelling `E → F` and bounding the key rate by
//! `Σ_xy p_xy · I_xy(A:B|F)` gives an upper bound on any two-way key rate.

use std::f64::consts::PI;

use crate::correlation::{
    check_theta, check_visibility, werner_correlation, Correlation, MeasurementArrangement,
};
use crate::error::{Error, Result};
use crate::info::{apply_map, conditional_mutual_information, JointDistribution, StochasticMap};
use crate::local::local_visibility_theta;

/// Visibility above which some projective measurements on the two-qubit
/// Werner state produce nonlocal correlations. Literature value, no closed
/// form.
pub const V_NONLOCAL_WERNER: f64 = 0.6964;

/// Maximal deviation tolerated between an attack's mixture and the observed
/// correlation.
pub const CONSISTENCY_TOL: f64 = 1e-9;

/// Visibility below which every projective-measurement correlation of the
/// Werner state is local: `999 · 689 · 10⁻⁶ · cos⁴(π/50)`.
pub fn v_local_werner() -> f64 {
    999.0 * 689.0e-6 * (PI / 50.0).cos().powi(4)
}

/// `(1 − v)/(1 − v_L)`, the local weight of a Werner-line decomposition.
pub fn werner_local_weight(v: f64, v_local: f64) -> f64 {
    (1.0 - v) / (1.0 - v_local)
}

/// Constants of the general Werner analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WernerConstants {
    pub v_local: f64,
    pub v_nonlocal: f64,
    pub v_crit: f64,
}

impl WernerConstants {
    pub fn get() -> Self {
        WernerConstants {
            v_local: v_local_werner(),
            v_nonlocal: V_NONLOCAL_WERNER,
            v_crit: critical_visibility_werner(),
        }
    }
}

/// Constants of the biased-CHSH protocol at angle `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaConstants {
    pub theta: f64,
    pub v_local: f64,
    /// `s^θ = (1 + v_L^θ)/2`.
    pub s_theta: f64,
    pub v_crit: f64,
}

impl ThetaConstants {
    pub fn new(theta: f64) -> Result<Self> {
        let v_local = local_visibility_theta(theta)?;
        Ok(ThetaConstants {
            theta,
            v_local,
            s_theta: 0.5 * (1.0 + v_local),
            v_crit: critical_from_local(v_local),
        })
    }

    pub fn local_weight(&self, v: f64) -> f64 {
        werner_local_weight(v, self.v_local)
    }
}

/// `p = q_L · p_L + (1 − q_L) · p_NL`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcDecomposition {
    pub q_local: f64,
    pub local: Correlation,
    pub nonlocal: Correlation,
}

impl CcDecomposition {
    pub fn new(q_local: f64, local: Correlation, nonlocal: Correlation) -> Result<Self> {
        local.ensure_same_scenario(&nonlocal)?;
        if !(0.0..=1.0).contains(&q_local) {
            return Err(Error::OutOfRange {
                name: "q_local",
                value: q_local,
                expected: "[0, 1]",
            });
        }
        Ok(CcDecomposition {
            q_local,
            local,
            nonlocal,
        })
    }

    pub fn mixture(&self) -> Correlation {
        self.local
            .mix(&self.nonlocal, self.q_local)
            .expect("components share a scenario and q is in range")
    }
}

/// Werner-line decomposition: `p_NL` at `v = 1`, `p_L` at `v = v_local`.
///
/// Below `v_local` the observed correlation is itself local; the attack then
/// degenerates to `q_L = 1` with `p_L` the observed correlation.
pub fn cc_werner(
    v: f64,
    v_local: f64,
    arrangement: &MeasurementArrangement,
) -> Result<CcDecomposition> {
    check_visibility(v)?;
    if !(v_local > 0.0 && v_local < 1.0) {
        return Err(Error::OutOfRange {
            name: "v_local",
            value: v_local,
            expected: "open interval (0, 1)",
        });
    }
    let nonlocal = werner_correlation(1.0, arrangement)?;
    if v < v_local {
        return CcDecomposition::new(1.0, werner_correlation(v, arrangement)?, nonlocal);
    }
    let local = werner_correlation(v_local, arrangement)?;
    CcDecomposition::new(werner_local_weight(v, v_local), local, nonlocal)
}

/// [`cc_werner`] for the biased-CHSH protocol with `v_L = v_L^θ`.
pub fn cc_chsh(theta: f64, v: f64) -> Result<CcDecomposition> {
    let v_local = local_visibility_theta(theta)?;
    cc_werner(v, v_local, &MeasurementArrangement::chsh(theta)?)
}

/// Index of Eve's "no information" symbol `?` for a binary scenario.
pub const UNKNOWN: usize = 4;

/// `p(a,b,e|x,y)`: `e = (a,b)` (index `a·k_B + b`) on local rounds and
/// `e = ?` (the last index) on nonlocal rounds.
pub fn tripartite(cc: &CcDecomposition, x: usize, y: usize) -> Result<JointDistribution> {
    let sc = cc.local.scenario();
    if x >= sc.n_a || y >= sc.n_b {
        return Err(Error::OutOfRange {
            name: "setting",
            value: (x * sc.n_b + y) as f64,
            expected: "x < nA and y < nB",
        });
    }
    let ne = sc.k_a * sc.k_b + 1;
    let q = cc.q_local;
    JointDistribution::from_fn([sc.k_a, sc.k_b, ne], |a, b, e| {
        if e == ne - 1 {
            (1.0 - q) * cc.nonlocal.prob(a, b, x, y)
        } else if e == a * sc.k_b + b {
            q * cc.local.prob(a, b, x, y)
        } else {
            0.0
        }
    })
}

/// Eve's relabelling for binary outcomes, with `F` sharing `E`'s labels.
///
/// For `s¹ ≥ ½` the correlated symbols `(a,a)` are kept (they reveal `a`),
/// each anticorrelated symbol goes to `?` with probability `λ` and is kept
/// otherwise, and `?` stays `?`. For `s¹ < ½` the roles of `a = b` and
/// `a ≠ b` are swapped. `λ = 1` is the full relabelling, `λ = 0` the identity.
pub fn eve_map(s1: f64, lambda: f64) -> Result<StochasticMap> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
            expected: "[0, 1]",
        });
    }
    if !(0.0..=1.0).contains(&s1) {
        return Err(Error::OutOfRange {
            name: "s1",
            value: s1,
            expected: "[0, 1]",
        });
    }
    let collapse: &[usize] = if s1 >= 0.5 { &[1, 2] } else { &[0, 3] };
    let n = UNKNOWN + 1;
    let mut m = vec![0.0; n * n];
    for e in 0..n {
        if collapse.contains(&e) {
            m[e * n + UNKNOWN] = lambda;
            m[e * n + e] = 1.0 - lambda;
        } else {
            m[e * n + e] = 1.0;
        }
    }
    StochasticMap::new(n, n, m)
}

/// Relabelling fraction and whether it zeroes the `?` branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSolution {
    pub lambda: f64,
    /// False when no `λ ∈ [0,1]` balances the branch (`v > v_xy`); `λ` is
    /// then 1.
    pub balanced: bool,
}

fn lambda_from_balance(nonlocal_excess: f64, q: f64, local_pool: f64) -> LambdaSolution {
    if nonlocal_excess <= 0.0 {
        return LambdaSolution {
            lambda: 0.0,
            balanced: true,
        };
    }
    let denom = q * local_pool;
    if denom <= 0.0 {
        return LambdaSolution {
            lambda: 1.0,
            balanced: false,
        };
    }
    let lambda = (1.0 - q) * nonlocal_excess / denom;
    if lambda > 1.0 {
        LambdaSolution {
            lambda: 1.0,
            balanced: false,
        }
    } else {
        LambdaSolution {
            lambda,
            balanced: true,
        }
    }
}

/// Werner-line `λ_xy` making the `?` branch uniform:
/// `λ = (1 − q_L)|2s¹ − 1| / (q_L · w)` with `w = 1 − s_L` (or `s_L` when
/// `s¹ < ½`) and `s_L = ½(1 + v_L(2s¹ − 1))`.
pub fn solve_lambda(v: f64, v_local: f64, s1: f64) -> Result<LambdaSolution> {
    check_visibility(v)?;
    if !(v_local > 0.0 && v_local < 1.0) {
        return Err(Error::OutOfRange {
            name: "v_local",
            value: v_local,
            expected: "open interval (0, 1)",
        });
    }
    if !(0.0..=1.0).contains(&s1) {
        return Err(Error::OutOfRange {
            name: "s1",
            value: s1,
            expected: "[0, 1]",
        });
    }
    let q = werner_local_weight(v, v_local).min(1.0);
    let s_local = 0.5 * (1.0 + v_local * (2.0 * s1 - 1.0));
    let pool = if s1 >= 0.5 { 1.0 - s_local } else { s_local };
    Ok(lambda_from_balance((2.0 * s1 - 1.0).abs(), q, pool))
}

/// `λ_xy` balancing the `?` branch of an arbitrary binary decomposition:
/// equal total weight on `a = b` and `a ≠ b`. Zeroes `I(A:B|F=?)` whenever
/// the blocks are symmetric with uniform marginals, as on the Werner line.
pub fn balance_lambda(cc: &CcDecomposition, x: usize, y: usize) -> LambdaSolution {
    let nl = cc.nonlocal.block(x, y);
    let l = cc.local.block(x, y);
    let (nl_same, nl_diff) = (nl[0] + nl[3], nl[1] + nl[2]);
    let q = cc.q_local;
    if nl_same >= nl_diff {
        lambda_from_balance(nl_same - nl_diff, q, l[1] + l[2])
    } else {
        lambda_from_balance(nl_diff - nl_same, q, l[0] + l[3])
    }
}

/// `s¹_xy`: probability of equal outcomes in the nonlocal part.
pub fn same_outcome_probability(c: &Correlation, x: usize, y: usize) -> f64 {
    let p = c.block(x, y);
    p[0] + p[3]
}

/// How `λ_xy` is chosen when building an [`AttackModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    /// Balance the `?` branch from the decomposition itself.
    Auto,
    Fixed(f64),
}

/// One key-generating setting pair with its weight and relabelling.
#[derive(Debug, Clone, PartialEq)]
pub struct KeySetting {
    pub x: usize,
    pub y: usize,
    pub weight: f64,
    pub lambda: Option<f64>,
    pub map: StochasticMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackModel {
    pub decomposition: CcDecomposition,
    pub settings: Vec<KeySetting>,
}

impl AttackModel {
    pub fn new(decomposition: CcDecomposition, settings: Vec<KeySetting>) -> Result<Self> {
        let sc = decomposition.local.scenario();
        if !sc.is_binary() {
            return Err(Error::NonBinary {
                k_a: sc.k_a,
                k_b: sc.k_b,
            });
        }
        if settings.is_empty() {
            return Err(Error::InvalidAttack("no key-generating settings".into()));
        }
        for s in &settings {
            if s.x >= sc.n_a || s.y >= sc.n_b {
                return Err(Error::InvalidAttack(format!(
                    "setting ({}, {}) outside scenario",
                    s.x, s.y
                )));
            }
            if s.weight.is_nan() || s.weight < 0.0 {
                return Err(Error::InvalidAttack(format!(
                    "negative weight {}",
                    s.weight
                )));
            }
            if s.map.n_in() != UNKNOWN + 1 {
                return Err(Error::InvalidAttack(format!(
                    "map for ({}, {}) has input alphabet {}, expected {}",
                    s.x,
                    s.y,
                    s.map.n_in(),
                    UNKNOWN + 1
                )));
            }
        }
        let total: f64 = settings.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidAttack(format!(
                "setting weights sum to {total}"
            )));
        }
        Ok(AttackModel {
            decomposition,
            settings,
        })
    }

    /// Attack using [`eve_map`] on each `(x, y, p_xy)`.
    pub fn relabelling(
        decomposition: CcDecomposition,
        weights: &[(usize, usize, f64)],
        choice: LambdaChoice,
    ) -> Result<Self> {
        let sc = decomposition.local.scenario();
        let mut settings = Vec::with_capacity(weights.len());
        for &(x, y, weight) in weights {
            if x >= sc.n_a || y >= sc.n_b {
                return Err(Error::InvalidAttack(format!(
                    "setting ({x}, {y}) outside scenario"
                )));
            }
            let s1 = same_outcome_probability(&decomposition.nonlocal, x, y);
            let lambda = match choice {
                LambdaChoice::Auto => balance_lambda(&decomposition, x, y).lambda,
                LambdaChoice::Fixed(l) => l,
            };
            settings.push(KeySetting {
                x,
                y,
                weight,
                lambda: Some(lambda),
                map: eve_map(s1, lambda)?,
            });
        }
        Self::new(decomposition, settings)
    }

    /// Werner-line attack with `λ_xy` from [`solve_lambda`] (or fixed).
    pub fn werner(
        v: f64,
        v_local: f64,
        arrangement: &MeasurementArrangement,
        weights: &[(usize, usize, f64)],
        choice: LambdaChoice,
    ) -> Result<Self> {
        let decomposition = cc_werner(v, v_local, arrangement)?;
        let mut settings = Vec::with_capacity(weights.len());
        for &(x, y, weight) in weights {
            let (Some(alpha), Some(beta)) = (arrangement.alice.get(x), arrangement.bob.get(y))
            else {
                return Err(Error::InvalidAttack(format!(
                    "setting ({x}, {y}) outside scenario"
                )));
            };
            let s1 = 0.5 * (1.0 - alpha.dot(beta));
            let lambda = match choice {
                LambdaChoice::Auto => solve_lambda(v, v_local, s1)?.lambda,
                LambdaChoice::Fixed(l) => l,
            };
            settings.push(KeySetting {
                x,
                y,
                weight,
                lambda: Some(lambda),
                map: eve_map(s1, lambda)?,
            });
        }
        Self::new(decomposition, settings)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingBound {
    pub x: usize,
    pub y: usize,
    pub weight: f64,
    pub lambda: Option<f64>,
    /// `p_F(?|x,y)`.
    pub p_unknown: f64,
    /// `I_xy(A:B|F=?)`.
    pub mi_unknown: f64,
    /// `I_xy(A:B|F)`.
    pub cmi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateBound {
    pub total: f64,
    pub settings: Vec<SettingBound>,
}

/// `r ≤ Σ_xy p_xy · I_xy(A:B|F)` for the attack's relabelled distributions.
///
/// With the relabellings of [`eve_map`] every branch except `f = ?` is
/// deterministic in `(a, b)` or in `a`, so this equals
/// `Σ_xy p_xy · p_F(?) · I_xy(A:B|F=?)`.
pub fn keyrate_bound(observed: &Correlation, attack: &AttackModel) -> Result<KeyRateBound> {
    let mixture = attack.decomposition.mixture();
    observed.ensure_same_scenario(&mixture)?;
    let deviation = observed.max_abs_diff(&mixture)?;
    if deviation > CONSISTENCY_TOL {
        return Err(Error::InconsistentDecomposition { deviation });
    }
    let mut total = 0.0;
    let mut settings = Vec::with_capacity(attack.settings.len());
    for s in &attack.settings {
        let pabe = tripartite(&attack.decomposition, s.x, s.y)?;
        let pabf = apply_map(&pabe, &s.map)?;
        let cmi = conditional_mutual_information(&pabf);
        let unknown = s.map.n_out() - 1;
        let (p_unknown, _) = pabf.conditional(unknown);
        settings.push(SettingBound {
            x: s.x,
            y: s.y,
            weight: s.weight,
            lambda: s.lambda,
            p_unknown,
            mi_unknown: pabf.mutual_information_given(unknown),
            cmi,
        });
        total += s.weight * cmi;
    }
    Ok(KeyRateBound { total, settings })
}

fn xlog2(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * y.log2()
    }
}

/// Closed-form bound for the biased-CHSH protocol keyed on `(x, y) = (0, 2)`:
///
/// ```text
/// r ≤ 2(1 − s q) + (1 − q) log₂[(1 − q) / 2(1 − s q)]
///              + q(1 − s) log₂[q(1 − s) / 2(1 − s q)]
/// ```
///
/// with `s = s^θ`, `q = q_L^θ(v)`; zero for `v ≤ v_crit^θ`.
pub fn chsh_keyrate_bound(theta: f64, v: f64) -> Result<f64> {
    check_visibility(v)?;
    let k = ThetaConstants::new(theta)?;
    if v <= k.v_crit {
        return Ok(0.0);
    }
    let q = k.local_weight(v);
    let s = k.s_theta;
    let z = 2.0 * (1.0 - s * q);
    let r = z + xlog2(1.0 - q, (1.0 - q) / z) + xlog2(q * (1.0 - s), q * (1.0 - s) / z);
    Ok(r.max(0.0))
}

/// Visibility `[v_L(2s¹−1) + 1] / [v_L(1−2s¹) + 4s¹ − 1]` up to which the
/// `?` branch of setting `(x, y)` can be made independent.
pub fn v_xy(s1: f64, v_local: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&s1) {
        return Err(Error::OutOfRange {
            name: "s1",
            value: s1,
            expected: "[1/2, 1]",
        });
    }
    if !(v_local > 0.0 && v_local < 1.0) {
        return Err(Error::OutOfRange {
            name: "v_local",
            value: v_local,
            expected: "open interval (0, 1)",
        });
    }
    let u = 2.0 * s1 - 1.0;
    Ok((v_local * u + 1.0) / (4.0 * s1 - 1.0 - v_local * u))
}

fn critical_from_local(v_local: f64) -> f64 {
    (v_local + 1.0) / (3.0 - v_local)
}

/// Critical visibility of the Werner state over all projective arrangements.
pub fn critical_visibility_werner() -> f64 {
    critical_from_local(v_local_werner())
}

/// Critical visibility of the biased-CHSH protocol at angle `θ`.
pub fn critical_visibility_theta(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(critical_from_local(local_visibility_theta(theta)?))
}

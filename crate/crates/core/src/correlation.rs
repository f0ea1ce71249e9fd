//! Bipartite Bell correlations `p(a,b|x,y)`.
//!
//! Tables are generated directly from Bloch vectors: for projective qubit
//! measurements on a Werner state of visibility `v`,
//! `p(a,b|x,y) = [1 - v (-1)^(a+b) α_x·β_y] / 4`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for normalization, nonsignaling and norm checks.
pub const TOL: f64 = 1e-12;

/// Inputs and outputs of a Bell scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "nA")]
    pub n_a: usize,
    #[serde(rename = "nB")]
    pub n_b: usize,
    #[serde(rename = "kA")]
    pub k_a: usize,
    #[serde(rename = "kB")]
    pub k_b: usize,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "(nA={}, nB={}, kA={}, kB={})",
            self.n_a, self.n_b, self.k_a, self.k_b
        )
    }
}

impl Scenario {
    pub fn new(n_a: usize, n_b: usize, k_a: usize, k_b: usize) -> Result<Self> {
        if n_a == 0 || n_b == 0 || k_a == 0 || k_b == 0 {
            return Err(Error::InvalidScenario(format!(
                "all of nA={n_a}, nB={n_b}, kA={k_a}, kB={k_b} must be at least 1"
            )));
        }
        Ok(Scenario { n_a, n_b, k_a, k_b })
    }

    /// Scenario with two outcomes per measurement.
    pub fn binary(n_a: usize, n_b: usize) -> Result<Self> {
        Self::new(n_a, n_b, 2, 2)
    }

    pub fn is_binary(&self) -> bool {
        self.k_a == 2 && self.k_b == 2
    }

    /// Number of table entries.
    pub fn len(&self) -> usize {
        self.n_a * self.n_b * self.k_a * self.k_b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of `p(a,b|x,y)`; the layout is `[x][y][a][b]`.
    #[inline]
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((x * self.n_b + y) * self.k_a + a) * self.k_b + b
    }

    fn block_len(&self) -> usize {
        self.k_a * self.k_b
    }
}

/// Finite table `p(a,b|x,y)`, nonnegative and normalized per setting pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrelationDoc", into = "CorrelationDoc")]
pub struct Correlation {
    scenario: Scenario,
    table: Vec<f64>,
}

impl Correlation {
    /// Builds a correlation from a flat `[x][y][a][b]` table, checking
    /// nonnegativity and normalization. Nonsignaling is not enforced.
    pub fn new(scenario: Scenario, table: Vec<f64>) -> Result<Self> {
        if table.len() != scenario.len() {
            return Err(Error::InvalidCorrelation(format!(
                "table has {} entries, scenario needs {}",
                table.len(),
                scenario.len()
            )));
        }
        if let Some(&p) = table.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidCorrelation(format!(
                "entry {p} is negative or not finite"
            )));
        }
        let c = Correlation { scenario, table };
        for x in 0..scenario.n_a {
            for y in 0..scenario.n_b {
                let total: f64 = c.block(x, y).iter().sum();
                if (total - 1.0).abs() > TOL {
                    return Err(Error::InvalidCorrelation(format!(
                        "setting ({x},{y}) sums to {total}"
                    )));
                }
            }
        }
        Ok(c)
    }

    pub fn from_fn(
        scenario: Scenario,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut table = vec![0.0; scenario.len()];
        for x in 0..scenario.n_a {
            for y in 0..scenario.n_b {
                for a in 0..scenario.k_a {
                    for b in 0..scenario.k_b {
                        table[scenario.index(a, b, x, y)] = f(a, b, x, y);
                    }
                }
            }
        }
        Self::new(scenario, table)
    }

    /// Uniform (white-noise) correlation.
    pub fn uniform(scenario: Scenario) -> Self {
        let p = 1.0 / scenario.block_len() as f64;
        Correlation {
            scenario,
            table: vec![p; scenario.len()],
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[self.scenario.index(a, b, x, y)]
    }

    /// The `k_A × k_B` block of outcome probabilities for setting `(x, y)`,
    /// row-major in `(a, b)`.
    pub fn block(&self, x: usize, y: usize) -> &[f64] {
        let start = self.scenario.index(0, 0, x, y);
        &self.table[start..start + self.scenario.block_len()]
    }

    /// Largest violation of the nonsignaling conditions.
    pub fn signaling_deviation(&self) -> f64 {
        let sc = self.scenario;
        let mut worst: f64 = 0.0;
        for x in 0..sc.n_a {
            for a in 0..sc.k_a {
                let marg = |y: usize| (0..sc.k_b).map(|b| self.prob(a, b, x, y)).sum::<f64>();
                let m0 = marg(0);
                for y in 1..sc.n_b {
                    worst = worst.max((marg(y) - m0).abs());
                }
            }
        }
        for y in 0..sc.n_b {
            for b in 0..sc.k_b {
                let marg = |x: usize| (0..sc.k_a).map(|a| self.prob(a, b, x, y)).sum::<f64>();
                let m0 = marg(0);
                for x in 1..sc.n_a {
                    worst = worst.max((marg(x) - m0).abs());
                }
            }
        }
        worst
    }

    pub fn is_nonsignaling(&self) -> bool {
        self.signaling_deviation() <= TOL
    }

    /// `weight · self + (1 − weight) · other`.
    pub fn mix(&self, other: &Correlation, weight: f64) -> Result<Correlation> {
        self.ensure_same_scenario(other)?;
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::OutOfRange {
                name: "weight",
                value: weight,
                expected: "[0, 1]",
            });
        }
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| weight * p + (1.0 - weight) * q)
            .collect();
        Ok(Correlation {
            scenario: self.scenario,
            table,
        })
    }

    /// Entrywise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Correlation) -> Result<f64> {
        self.ensure_same_scenario(other)?;
        Ok(self
            .table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max))
    }

    pub fn ensure_same_scenario(&self, other: &Correlation) -> Result<()> {
        if self.scenario != other.scenario {
            return Err(Error::ScenarioMismatch(format!(
                "{} vs {}",
                self.scenario, other.scenario
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CorrelationDoc {
    scenario: Scenario,
    table: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<Correlation> for CorrelationDoc {
    fn from(c: Correlation) -> Self {
        let sc = c.scenario;
        let table = (0..sc.n_a)
            .map(|x| {
                (0..sc.n_b)
                    .map(|y| {
                        (0..sc.k_a)
                            .map(|a| (0..sc.k_b).map(|b| c.prob(a, b, x, y)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        CorrelationDoc {
            scenario: sc,
            table,
        }
    }
}

impl TryFrom<CorrelationDoc> for Correlation {
    type Error = Error;

    fn try_from(doc: CorrelationDoc) -> Result<Self> {
        let sc = doc.scenario;
        Scenario::new(sc.n_a, sc.n_b, sc.k_a, sc.k_b)?;
        let shape_err = || Error::InvalidCorrelation("table shape does not match scenario".into());
        if doc.table.len() != sc.n_a {
            return Err(shape_err());
        }
        let mut flat = Vec::with_capacity(sc.len());
        for row in &doc.table {
            if row.len() != sc.n_b {
                return Err(shape_err());
            }
            for block in row {
                if block.len() != sc.k_a || block.iter().any(|r| r.len() != sc.k_b) {
                    return Err(shape_err());
                }
                flat.extend(block.iter().flatten());
            }
        }
        Correlation::new(sc, flat)
    }
}

/// Unit vector on the Bloch sphere describing a projective qubit measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector([f64; 3]);

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > TOL {
            return Err(Error::NonUnitVector { norm });
        }
        Ok(BlochVector([x, y, z]))
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Alice's and Bob's measurement directions.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementArrangement {
    pub alice: Vec<BlochVector>,
    pub bob: Vec<BlochVector>,
}

impl MeasurementArrangement {
    pub fn new(alice: Vec<BlochVector>, bob: Vec<BlochVector>) -> Result<Self> {
        if alice.is_empty() || bob.is_empty() {
            return Err(Error::InvalidScenario(
                "each party needs at least one measurement".into(),
            ));
        }
        Ok(MeasurementArrangement { alice, bob })
    }

    /// The biased-CHSH protocol: α₀ = −z, α₁ = −x, β₀ = (sinθ, 0, cosθ),
    /// β₁ = (−cosθ, 0, sinθ), β₂ = z (the key-generating setting).
    pub fn chsh(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        let (s, c) = theta.sin_cos();
        Self::new(
            vec![
                BlochVector::new(0.0, 0.0, -1.0)?,
                BlochVector::new(-1.0, 0.0, 0.0)?,
            ],
            vec![
                BlochVector::new(s, 0.0, c)?,
                BlochVector::new(-c, 0.0, s)?,
                BlochVector::new(0.0, 0.0, 1.0)?,
            ],
        )
    }

    /// [`MeasurementArrangement::chsh`] with a fourth setting β₃ = x for Bob.
    pub fn chsh_four_setting(theta: f64) -> Result<Self> {
        let mut arr = Self::chsh(theta)?;
        arr.bob.push(BlochVector::new(1.0, 0.0, 0.0)?);
        Ok(arr)
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            n_a: self.alice.len(),
            n_b: self.bob.len(),
            k_a: 2,
            k_b: 2,
        }
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            expected: "open interval (0, π/2)",
        })
    }
}

pub(crate) fn check_visibility(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "visibility",
            value: v,
            expected: "[0, 1]",
        })
    }
}

/// Correlation of a Werner state with visibility `v` under the given
/// projective measurements.
pub fn werner_correlation(v: f64, arrangement: &MeasurementArrangement) -> Result<Correlation> {
    check_visibility(v)?;
    let sc = arrangement.scenario();
    let mut table = vec![0.0; sc.len()];
    for (x, alpha) in arrangement.alice.iter().enumerate() {
        for (y, beta) in arrangement.bob.iter().enumerate() {
            // s = (1 − v α·β)/2 on the diagonal, 1 − s off it, both halved.
            let s = 0.5 * (1.0 - v * alpha.dot(beta));
            table[sc.index(0, 0, x, y)] = 0.5 * s;
            table[sc.index(1, 1, x, y)] = 0.5 * s;
            table[sc.index(0, 1, x, y)] = 0.5 * (1.0 - s);
            table[sc.index(1, 0, x, y)] = 0.5 * (1.0 - s);
        }
    }
    Correlation::new(sc, table)
}

/// Noisy biased-CHSH protocol correlation (2 × 3 inputs).
pub fn chsh_protocol_correlation(theta: f64, v: f64) -> Result<Correlation> {
    werner_correlation(v, &MeasurementArrangement::chsh(theta)?)
}

/// Noisy biased-CHSH protocol with Bob's extra β₃ setting (2 × 4 inputs).
pub fn chsh_four_setting_correlation(theta: f64, v: f64) -> Result<Correlation> {
    werner_correlation(v, &MeasurementArrangement::chsh_four_setting(theta)?)
}

/// Point `(s, t)` of the two-dimensional slice: zero marginals,
/// `⟨A₀B₀⟩ = s`, `⟨A₀B₁⟩ = ⟨A₁B₀⟩ = t`, `⟨A₁B₁⟩ = −s`, `⟨A₀B₂⟩ = √(s²+t²)`,
/// `⟨A₁B₂⟩ = 0`.
pub fn slice_correlation(s: f64, t: f64) -> Result<Correlation> {
    let r2 = s * s + t * t;
    if !r2.is_finite() || r2 > 1.0 + TOL {
        return Err(Error::OutsideQuantumDisc { s, t });
    }
    let v = r2.sqrt().min(1.0);
    let form = CorrelatorForm {
        alice_marginals: vec![0.0; 2],
        bob_marginals: vec![0.0; 3],
        correlators: vec![vec![s, t, v], vec![t, -s, 0.0]],
    };
    from_correlators(&form, Scenario::binary(2, 3)?)
}

/// Marginals `⟨A_x⟩`, `⟨B_y⟩` and correlators `⟨A_x B_y⟩` of a binary
/// correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorForm {
    pub alice_marginals: Vec<f64>,
    pub bob_marginals: Vec<f64>,
    /// Indexed `[x][y]`.
    pub correlators: Vec<Vec<f64>>,
}

impl CorrelatorForm {
    pub fn n_a(&self) -> usize {
        self.alice_marginals.len()
    }

    pub fn n_b(&self) -> usize {
        self.bob_marginals.len()
    }
}

/// Correlator form of a binary correlation. Marginals are averaged over the
/// other party's settings, which is exact for nonsignaling input.
pub fn to_correlators(c: &Correlation) -> Result<CorrelatorForm> {
    let sc = c.scenario();
    if !sc.is_binary() {
        return Err(Error::NonBinary {
            k_a: sc.k_a,
            k_b: sc.k_b,
        });
    }
    let alice_marginals = (0..sc.n_a)
        .map(|x| {
            (0..sc.n_b)
                .map(|y| {
                    let p = c.block(x, y);
                    p[0] + p[1] - p[2] - p[3]
                })
                .sum::<f64>()
                / sc.n_b as f64
        })
        .collect();
    let bob_marginals = (0..sc.n_b)
        .map(|y| {
            (0..sc.n_a)
                .map(|x| {
                    let p = c.block(x, y);
                    p[0] - p[1] + p[2] - p[3]
                })
                .sum::<f64>()
                / sc.n_a as f64
        })
        .collect();
    let correlators = (0..sc.n_a)
        .map(|x| {
            (0..sc.n_b)
                .map(|y| {
                    let p = c.block(x, y);
                    p[0] - p[1] - p[2] + p[3]
                })
                .collect()
        })
        .collect();
    Ok(CorrelatorForm {
        alice_marginals,
        bob_marginals,
        correlators,
    })
}

/// Rebuilds `p(a,b|x,y) = ¼[1 + (−1)^a⟨A_x⟩ + (−1)^b⟨B_y⟩ + (−1)^(a+b)⟨A_xB_y⟩]`.
///
/// Entries in `[−1e-12, 0)` are clamped to zero; anything more negative is
/// rejected.
pub fn from_correlators(f: &CorrelatorForm, scenario: Scenario) -> Result<Correlation> {
    if !scenario.is_binary() {
        return Err(Error::NonBinary {
            k_a: scenario.k_a,
            k_b: scenario.k_b,
        });
    }
    if f.n_a() != scenario.n_a
        || f.n_b() != scenario.n_b
        || f.correlators.len() != scenario.n_a
        || f.correlators.iter().any(|row| row.len() != scenario.n_b)
    {
        return Err(Error::DimensionMismatch(
            "correlator form does not match scenario".into(),
        ));
    }
    let sign = |k: usize| if k == 0 { 1.0 } else { -1.0 };
    let mut table = vec![0.0; scenario.len()];
    for x in 0..scenario.n_a {
        for y in 0..scenario.n_b {
            for a in 0..2 {
                for b in 0..2 {
                    let mut p = 0.25
                        * (1.0
                            + sign(a) * f.alice_marginals[x]
                            + sign(b) * f.bob_marginals[y]
                            + sign(a) * sign(b) * f.correlators[x][y]);
                    if p < 0.0 {
                        if p < -TOL {
                            return Err(Error::NegativeProbability { value: p });
                        }
                        p = 0.0;
                    }
                    table[scenario.index(a, b, x, y)] = p;
                }
            }
        }
    }
    Correlation::new(scenario, table)
}

//! Finite-alphabet Shannon quantities in bits and stochastic relabellings of
//! an eavesdropper's variable.

mod intrinsic;
mod simplex_search;

pub use intrinsic::{minimize_intrinsic, IntrinsicOptions, IntrinsicResult, SWEEP_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for distributions and map rows.
pub const TOL: f64 = 1e-12;

/// Probabilities at or below this are dropped from entropy sums.
pub const PRUNE: f64 = 1e-15;

fn check_probabilities(p: &[f64], what: &str) -> Result<()> {
    if let Some(&x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{what} has negative or non-finite entry {x}"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {total}"
        )));
    }
    Ok(())
}

/// Shannon entropy in bits.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > PRUNE)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// Joint distribution `p(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution {
    n_a: usize,
    n_b: usize,
    p: Vec<f64>,
}

impl PairDistribution {
    /// `p` is row-major in `(a, b)`.
    pub fn new(n_a: usize, n_b: usize, p: Vec<f64>) -> Result<Self> {
        if n_a == 0 || n_b == 0 || p.len() != n_a * n_b {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n_a}×{n_b} distribution",
                p.len()
            )));
        }
        check_probabilities(&p, "pair distribution")?;
        Ok(PairDistribution { n_a, n_b, p })
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.p[a * self.n_b + b]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

/// `I(A:B)` in bits.
pub fn mutual_information(p: &PairDistribution) -> f64 {
    mi_unnormalized(&p.p, p.n_a, p.n_b, 1.0)
}

/// Mutual information of the sub-normalized table `w` (total `mass`),
/// i.e. of `w / mass`.
fn mi_unnormalized(w: &[f64], n_a: usize, n_b: usize, mass: f64) -> f64 {
    if mass <= PRUNE {
        return 0.0;
    }
    let mut pa = vec![0.0; n_a];
    let mut pb = vec![0.0; n_b];
    for a in 0..n_a {
        for b in 0..n_b {
            let x = w[a * n_b + b];
            pa[a] += x;
            pb[b] += x;
        }
    }
    let mut total = 0.0;
    for a in 0..n_a {
        for b in 0..n_b {
            let x = w[a * n_b + b];
            if x > PRUNE {
                total += x * (x * mass / (pa[a] * pb[b])).log2();
            }
        }
    }
    (total / mass).max(0.0)
}

/// Joint distribution `p(a, b, e)` of Alice, Bob and Eve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointDoc", into = "JointDoc")]
pub struct JointDistribution {
    dims: [usize; 3],
    p: Vec<f64>,
}

impl JointDistribution {
    /// `p` is row-major in `(a, b, e)`.
    pub fn new(dims: [usize; 3], p: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) || p.len() != dims.iter().product::<usize>() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for alphabets {dims:?}",
                p.len()
            )));
        }
        check_probabilities(&p, "joint distribution")?;
        Ok(JointDistribution { dims, p })
    }

    pub fn from_fn(
        dims: [usize; 3],
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut p = Vec::with_capacity(dims.iter().product());
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for e in 0..dims[2] {
                    p.push(f(a, b, e));
                }
            }
        }
        Self::new(dims, p)
    }

    /// Alphabet sizes `[|A|, |B|, |E|]`.
    pub fn alphabets(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, e: usize) -> f64 {
        self.p[(a * self.dims[1] + b) * self.dims[2] + e]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn marginal_ab(&self) -> PairDistribution {
        let [na, nb, ne] = self.dims;
        let p = self.p.chunks(ne).map(|c| c.iter().sum()).collect();
        PairDistribution {
            n_a: na,
            n_b: nb,
            p,
        }
    }

    /// `p(e)` for every value of the third variable.
    pub fn marginal_e(&self) -> Vec<f64> {
        let ne = self.dims[2];
        let mut out = vec![0.0; ne];
        for chunk in self.p.chunks(ne) {
            for (o, x) in out.iter_mut().zip(chunk) {
                *o += x;
            }
        }
        out
    }

    /// `(p(e), p(a,b|e))`; the conditional is `None` when `p(e)` vanishes.
    pub fn conditional(&self, e: usize) -> (f64, Option<PairDistribution>) {
        let [na, nb, ne] = self.dims;
        let w: Vec<f64> = (0..na * nb).map(|ab| self.p[ab * ne + e]).collect();
        let mass: f64 = w.iter().sum();
        if mass <= PRUNE {
            return (mass, None);
        }
        let p = w.into_iter().map(|x| x / mass).collect();
        (
            mass,
            Some(PairDistribution {
                n_a: na,
                n_b: nb,
                p,
            }),
        )
    }

    /// `I(A:B | E = e)`, zero when `p(e)` vanishes.
    pub fn mutual_information_given(&self, e: usize) -> f64 {
        let [na, nb, ne] = self.dims;
        let w: Vec<f64> = (0..na * nb).map(|ab| self.p[ab * ne + e]).collect();
        let mass = w.iter().sum();
        mi_unnormalized(&w, na, nb, mass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `I(A:B|F) = Σ_f p(f) · I(A:B|F=f)` in bits.
pub fn conditional_mutual_information(p: &JointDistribution) -> f64 {
    let [na, nb, nf] = p.dims;
    let mut w = vec![0.0; na * nb];
    let mut total = 0.0;
    for f in 0..nf {
        for (ab, slot) in w.iter_mut().enumerate() {
            *slot = p.p[ab * nf + f];
        }
        let mass: f64 = w.iter().sum();
        total += mass * mi_unnormalized(&w, na, nb, mass);
    }
    total.max(0.0)
}

#[derive(Serialize, Deserialize)]
struct JointDoc {
    alphabets: [usize; 3],
    p: Vec<Vec<Vec<f64>>>,
}

impl From<JointDistribution> for JointDoc {
    fn from(d: JointDistribution) -> Self {
        let [na, nb, ne] = d.dims;
        let p = (0..na)
            .map(|a| {
                (0..nb)
                    .map(|b| (0..ne).map(|e| d.get(a, b, e)).collect())
                    .collect()
            })
            .collect();
        JointDoc {
            alphabets: d.dims,
            p,
        }
    }
}

impl TryFrom<JointDoc> for JointDistribution {
    type Error = Error;

    fn try_from(doc: JointDoc) -> Result<Self> {
        let [na, nb, ne] = doc.alphabets;
        let ok = doc.p.len() == na
            && doc
                .p
                .iter()
                .all(|row| row.len() == nb && row.iter().all(|col| col.len() == ne));
        if !ok {
            return Err(Error::DimensionMismatch(
                "nested array shape does not match alphabets".into(),
            ));
        }
        let flat = doc.p.into_iter().flatten().flatten().collect();
        JointDistribution::new(doc.alphabets, flat)
    }
}

/// Row-stochastic matrix `m(f|e)` from Eve's variable `E` to `F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticMap {
    n_in: usize,
    n_out: usize,
    /// Row-major `[e][f]`.
    m: Vec<f64>,
}

impl StochasticMap {
    pub fn new(n_in: usize, n_out: usize, m: Vec<f64>) -> Result<Self> {
        if n_in == 0 || n_out == 0 || m.len() != n_in * n_out {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n_in}→{n_out} map",
                m.len()
            )));
        }
        if n_out > n_in {
            return Err(Error::DimensionMismatch(format!(
                "output alphabet {n_out} larger than input alphabet {n_in}"
            )));
        }
        for (e, row) in m.chunks(n_out).enumerate() {
            if row
                .iter()
                .any(|x| !x.is_finite() || !(0.0..=1.0).contains(x))
            {
                return Err(Error::InvalidDistribution(format!(
                    "row {e} has entries outside [0,1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > TOL {
                return Err(Error::InvalidDistribution(format!(
                    "row {e} sums to {total}"
                )));
            }
        }
        Ok(StochasticMap { n_in, n_out, m })
    }

    pub fn identity(n: usize) -> Self {
        Self::deterministic(&(0..n).collect::<Vec<_>>(), n).expect("identity is a valid map")
    }

    /// Every `e` sent to the single symbol `f = 0`.
    pub fn constant(n_in: usize, n_out: usize) -> Result<Self> {
        Self::deterministic(&vec![0; n_in], n_out)
    }

    /// `e ↦ assignment[e]` with certainty.
    pub fn deterministic(assignment: &[usize], n_out: usize) -> Result<Self> {
        let n_in = assignment.len();
        if let Some(&f) = assignment.iter().find(|&&f| f >= n_out) {
            return Err(Error::DimensionMismatch(format!(
                "symbol {f} outside output alphabet of size {n_out}"
            )));
        }
        let mut m = vec![0.0; n_in * n_out];
        for (e, &f) in assignment.iter().enumerate() {
            m[e * n_out + f] = 1.0;
        }
        Self::new(n_in, n_out, m)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    #[inline]
    pub fn get(&self, e: usize, f: usize) -> f64 {
        self.m[e * self.n_out + f]
    }

    pub fn row(&self, e: usize) -> &[f64] {
        &self.m[e * self.n_out..(e + 1) * self.n_out]
    }

    /// Rows as nested vectors, for reports.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.m.chunks(self.n_out).map(<[f64]>::to_vec).collect()
    }
}

/// `p(a,b,f) = Σ_e p(a,b,e) · m(f|e)`.
pub fn apply_map(p: &JointDistribution, map: &StochasticMap) -> Result<JointDistribution> {
    let ne = p.dims[2];
    if map.n_in != ne {
        return Err(Error::DimensionMismatch(format!(
            "map expects |E| = {}, distribution has {ne}",
            map.n_in
        )));
    }
    Ok(apply_unchecked(p, map))
}

pub(crate) fn apply_unchecked(p: &JointDistribution, map: &StochasticMap) -> JointDistribution {
    let [na, nb, ne] = p.dims;
    let nf = map.n_out;
    let mut out = vec![0.0; na * nb * nf];
    for ab in 0..na * nb {
        let src = &p.p[ab * ne..(ab + 1) * ne];
        let dst = &mut out[ab * nf..(ab + 1) * nf];
        for (e, &pe) in src.iter().enumerate() {
            if pe == 0.0 {
                continue;
            }
            for (d, &m) in dst.iter_mut().zip(map.row(e)) {
                *d += pe * m;
            }
        }
    }
    JointDistribution {
        dims: [na, nb, nf],
        p: out,
    }
}

//! Classification of the `(s, t)` slice of biased-CHSH correlations, with
//! `(s, t) = (v cos θ, v sin θ)`.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::attack::critical_visibility_theta;
use crate::error::{Error, Result};

const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionLabel {
    /// Inside the CHSH facets `|s| + |t| ≤ 1`.
    Local,
    /// Nonlocal, yet the attack forces zero key: `v_L^θ < v ≤ v_crit^θ`.
    RedZeroKey,
    /// Nonlocal with a positive key-rate bound.
    BluePositiveBound,
    /// Beyond the quantum boundary `s² + t² ≤ 1`.
    OutsideQuantum,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Local => "LOCAL",
            RegionLabel::RedZeroKey => "RED_ZERO_KEY",
            RegionLabel::BluePositiveBound => "BLUE_POSITIVE_BOUND",
            RegionLabel::OutsideQuantum => "OUTSIDE_QUANTUM",
        }
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionPoint {
    pub s: f64,
    pub t: f64,
    pub v: f64,
    pub theta: f64,
    pub label: RegionLabel,
}

/// Labels a slice point. The local set is closed (`|s| + |t| = 1` is
/// LOCAL) and so is the red region (`v = v_crit^θ` is RED). Points off the
/// first quadrant are folded onto it through `(|s|, |t|)`.
pub fn classify(s: f64, t: f64) -> RegionPoint {
    let v = s.hypot(t);
    let theta = t.atan2(s);
    let label = if s.abs() + t.abs() <= 1.0 + EDGE_TOL {
        RegionLabel::Local
    } else if s * s + t * t > 1.0 + EDGE_TOL {
        RegionLabel::OutsideQuantum
    } else {
        // Nonlocal points have |s|, |t| > 0, so the folded angle is in (0, π/2).
        let folded = t.abs().atan2(s.abs());
        let v_crit = critical_visibility_theta(folded).expect("folded angle is in (0, π/2)");
        if v <= v_crit {
            RegionLabel::RedZeroKey
        } else {
            RegionLabel::BluePositiveBound
        }
    };
    RegionPoint {
        s,
        t,
        v,
        theta,
        label,
    }
}

/// Classifies a `resolution × resolution` grid over `[0, 1]²`, row-major with
/// `t` outer and `s` inner.
pub fn region_grid(resolution: usize) -> Result<Vec<RegionPoint>> {
    if resolution < 2 {
        return Err(Error::OutOfRange {
            name: "resolution",
            value: resolution as f64,
            expected: "at least 2",
        });
    }
    let step = 1.0 / (resolution - 1) as f64;
    Ok((0..resolution * resolution)
        .into_par_iter()
        .map(|k| {
            let (j, i) = (k / resolution, k % resolution);
            classify(i as f64 * step, j as f64 * step)
        })
        .collect())
}

/// Writes `s,t,v,theta,label` rows with six decimals.
pub fn write_region_csv<W: Write>(mut w: W, points: &[RegionPoint]) -> io::Result<()> {
    writeln!(w, "s,t,v,theta,label")?;
    for p in points {
        writeln!(
            w,
            "{:.6},{:.6},{:.6},{:.6},{}",
            p.s, p.t, p.v, p.theta, p.label
        )?;
    }
    Ok(())
}

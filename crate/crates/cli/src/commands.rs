use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ccbound_core::attack::{keyrate_bound, AttackModel, CcDecomposition, LambdaChoice, UNKNOWN};
use ccbound_core::correlation::{chsh_four_setting_correlation, chsh_protocol_correlation};
use ccbound_core::info::{minimize_intrinsic, IntrinsicOptions, JointDistribution};
use ccbound_core::local::{max_local_weight_along, max_local_weight_ns};
use ccbound_core::region::write_region_csv;
use ccbound_core::{
    attack, chsh_keyrate_bound, critical_visibility_theta, local_visibility_theta, region_grid,
    Correlation, WernerConstants,
};
use rayon::prelude::*;

use crate::options::*;

pub fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build_global()
        .context("building thread pool")?;
    match cli.command {
        Command::Constants(a) => constants(a),
        Command::Curve(a) => curve(a),
        Command::Region(a) => region(a),
        Command::Bound(a) => bound(a),
        Command::Intrinsic(a) => intrinsic(a),
        Command::Localweight(a) => localweight(a),
        Command::Werner(a) => werner(a),
        Command::Tripartite(a) => tripartite(a),
    }
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, body: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_correlation(path: &Path) -> Result<Correlation> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Correlation::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_joint(path: &Path) -> Result<JointDistribution> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    JointDistribution::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn constants(a: ConstantsArgs) -> Result<()> {
    let w = WernerConstants::get();
    let mut s = String::new();
    s += &format!("v_L^w     {:.6}\n", w.v_local);
    s += &format!("v_NL^w    {:.6}\n", w.v_nonlocal);
    s += &format!("v_crit^w  {:.6}\n", w.v_crit);
    if let Some(theta) = a.theta.get() {
        s += &format!("theta     {theta:.6}\n");
        s += &format!("v_L       {:.6}\n", local_visibility_theta(theta)?);
        s += &format!("v_crit    {:.6}\n", critical_visibility_theta(theta)?);
    }
    emit(None, s.as_bytes())
}

fn curve(a: CurveArgs) -> Result<()> {
    if !(a.step > 0.0 && a.step.is_finite()) {
        bail!("step must be positive, got {}", a.step);
    }
    if a.v_min > a.v_max {
        bail!("empty range: v-min {} > v-max {}", a.v_min, a.v_max);
    }
    let theta = a.theta.or_default();
    let n = ((a.v_max - a.v_min) / a.step + 1e-9).floor() as usize;
    let chsh_scale = 2.0 * (theta.cos() + theta.sin());
    let rows = (0..=n)
        .into_par_iter()
        .map(|i| {
            let v = (a.v_min + i as f64 * a.step).min(a.v_max);
            let b = chsh_keyrate_bound(theta, v)?;
            Ok(format!("{v:.6},{:.6},{b:.6}\n", chsh_scale * v))
        })
        .collect::<Result<Vec<String>>>()?;
    let mut body = String::from("v,S,bound\n");
    body.extend(rows);
    emit(a.out.as_deref(), body.as_bytes())
}

fn region(a: RegionArgs) -> Result<()> {
    let points = region_grid(a.resolution)?;
    let mut body = Vec::new();
    write_region_csv(&mut body, &points)?;
    emit(a.out.as_deref(), &body)
}

fn default_target(observed: &Correlation, theta: f64) -> Result<Correlation> {
    let sc = observed.scenario();
    let target = match (sc.n_a, sc.n_b, sc.k_a, sc.k_b) {
        (2, 3, 2, 2) => chsh_protocol_correlation(theta, 1.0)?,
        (2, 4, 2, 2) => chsh_four_setting_correlation(theta, 1.0)?,
        _ => bail!(
            "no default target for scenario nA={} nB={} kA={} kB={}; pass --target",
            sc.n_a,
            sc.n_b,
            sc.k_a,
            sc.k_b
        ),
    };
    Ok(target)
}

fn setting_weights(specs: &[SettingSpec]) -> Result<Vec<(usize, usize, f64)>> {
    if specs.is_empty() {
        return Ok(vec![(0, 2, 1.0)]);
    }
    let given: f64 = specs.iter().filter_map(|s| s.weight).sum();
    let missing = specs.iter().filter(|s| s.weight.is_none()).count();
    let share = if missing > 0 {
        let rest = 1.0 - given;
        if rest < -1e-12 {
            bail!("setting weights exceed 1");
        }
        rest.max(0.0) / missing as f64
    } else {
        0.0
    };
    Ok(specs
        .iter()
        .map(|s| (s.x, s.y, s.weight.unwrap_or(share)))
        .collect())
}

fn bound(a: BoundArgs) -> Result<()> {
    let observed = read_correlation(&a.correlation)?;
    let target = match &a.target {
        Some(p) => read_correlation(p)?,
        None => default_target(&observed, a.theta.or_default())?,
    };
    let w = max_local_weight_along(&observed, &target)?;
    if !w.feasible {
        bail!("no decomposition into a local part and the target exists");
    }
    let local = w.local.clone().unwrap_or_else(|| target.clone());
    let nonlocal = w.nonlocal.clone().unwrap_or_else(|| target.clone());
    let cc = CcDecomposition::new(w.q, local, nonlocal)?;
    let choice = match a.lambda {
        LambdaArg::Auto => LambdaChoice::Auto,
        LambdaArg::Fixed(l) => LambdaChoice::Fixed(l),
    };
    let attack = AttackModel::relabelling(cc, &setting_weights(&a.settings)?, choice)?;
    let report = keyrate_bound(&observed, &attack)?;

    let mut s = format!("q_L    {:.6}\n", w.q);
    for b in &report.settings {
        s += &format!(
            "setting x={} y={} weight={:.6} lambda={:.6} p(?)={:.6} I(A:B|F=?)={:.6} I(A:B|F)={:.6}\n",
            b.x,
            b.y,
            b.weight,
            b.lambda.unwrap_or(f64::NAN),
            b.p_unknown,
            b.mi_unknown,
            b.cmi
        );
    }
    s += &format!("bound  {:.6}\n", report.total);
    emit(None, s.as_bytes())
}

fn intrinsic(a: IntrinsicArgs) -> Result<()> {
    let p = read_joint(&a.distribution)?;
    let opts = IntrinsicOptions {
        restarts: a.restarts,
        deterministic_sweep: !a.no_sweep,
        seed: a.seed,
        ..IntrinsicOptions::default()
    };
    let r = minimize_intrinsic(&p, &opts)?;
    let mut s = format!("bound     {:.6}\n", r.bound);
    s += &format!("identity  {:.6}\n", r.identity_value);
    if let Some(v) = r.sweep_value {
        s += &format!("sweep     {v:.6}\n");
    }
    s += "map (rows e, columns f)\n";
    for row in r.map.rows() {
        let cells: Vec<String> = row.iter().map(|m| format!("{m:.6}")).collect();
        s += &cells.join(" ");
        s += "\n";
    }
    emit(None, s.as_bytes())
}

fn localweight(a: LocalweightArgs) -> Result<()> {
    let c = read_correlation(&a.correlation)?;
    let w = match &a.target {
        Some(p) => {
            let target = read_correlation(p)?;
            let w = max_local_weight_along(&c, &target)?;
            if !w.feasible {
                bail!("no decomposition into a local part and the target exists");
            }
            w
        }
        None => max_local_weight_ns(&c)?,
    };
    let mut s = format!("q_max  {:.6}\n", w.q);
    match (&w.local, &a.out) {
        (Some(local), Some(path)) => {
            fs::write(path, local.to_json()? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
        }
        (Some(local), None) => {
            s += "local component:\n";
            s += &local.to_json()?;
            s += "\n";
        }
        (None, _) => s += "local component: none\n",
    }
    emit(None, s.as_bytes())
}

fn werner(a: WernerArgs) -> Result<()> {
    let theta = a.theta.or_default();
    let c = match a.bob {
        Settings::Three => chsh_protocol_correlation(theta, a.v)?,
        Settings::Four => chsh_four_setting_correlation(theta, a.v)?,
    };
    emit(a.out.as_deref(), (c.to_json()? + "\n").as_bytes())
}

fn tripartite(a: TripartiteArgs) -> Result<()> {
    let theta = a.theta.or_default();
    let (x, y) = a.setting.map_or((0, 2), |s| (s.x, s.y));
    let cc = attack::cc_chsh(theta, a.v)?;
    let p = attack::tripartite(&cc, x, y)?;
    debug_assert_eq!(p.alphabets()[2], UNKNOWN + 1);
    emit(a.out.as_deref(), (p.to_json()? + "\n").as_bytes())
}

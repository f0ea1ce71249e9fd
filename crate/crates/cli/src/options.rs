use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ccbound",
    version,
    about = "Key-rate upper bounds from convex-combination attacks"
)]
pub struct Cli {
    /// Worker threads for grid sweeps and minimizer restarts.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print locality and critical visibilities.
    Constants(ConstantsArgs),
    /// Closed-form key-rate bound along the visibility axis, as CSV.
    Curve(CurveArgs),
    /// Classify the (s, t) slice, as CSV.
    Region(RegionArgs),
    /// Key-rate bound of a correlation under the attack.
    Bound(BoundArgs),
    /// Minimize I(A:B|F) over Eve's maps for a tripartite distribution.
    Intrinsic(IntrinsicArgs),
    /// Maximal local weight of a correlation.
    Localweight(LocalweightArgs),
    /// Write a noisy biased-CHSH correlation as JSON.
    Werner(WernerArgs),
    /// Write the attack's tripartite distribution p(a,b,e|x,y) as JSON.
    Tripartite(TripartiteArgs),
}

/// Angle in (0, π/2), in radians or degrees.
#[derive(Debug, Clone, Copy, Args)]
pub struct ThetaArg {
    /// Bob's measurement angle in radians [default: π/4].
    #[arg(long, value_parser = parse_theta, conflicts_with = "theta_deg")]
    pub theta: Option<f64>,
    /// Bob's measurement angle in degrees.
    #[arg(long, value_parser = parse_theta_deg)]
    pub theta_deg: Option<f64>,
}

impl ThetaArg {
    pub fn get(&self) -> Option<f64> {
        self.theta.or(self.theta_deg)
    }

    pub fn or_default(&self) -> f64 {
        self.get().unwrap_or(FRAC_PI_4)
    }
}

fn parse_theta(s: &str) -> Result<f64, String> {
    let theta: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if theta > 0.0 && theta < FRAC_PI_2 {
        Ok(theta)
    } else {
        Err(format!("{theta} is not in the open interval (0, π/2)"))
    }
}

fn parse_theta_deg(s: &str) -> Result<f64, String> {
    let deg: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if deg > 0.0 && deg < 90.0 {
        Ok(deg.to_radians())
    } else {
        Err(format!("{deg} is not in the open interval (0, 90)"))
    }
}

fn parse_visibility(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

/// `x,y` or `x,y,w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingSpec {
    pub x: usize,
    pub y: usize,
    pub weight: Option<f64>,
}

fn parse_setting(s: &str) -> Result<SettingSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || format!("expected x,y or x,y,w, got {s:?}");
    match parts.as_slice() {
        [x, y] | [x, y, _] => {
            let x = x.parse().map_err(|_| bad())?;
            let y = y.parse().map_err(|_| bad())?;
            let weight = match parts.get(2) {
                Some(w) => Some(w.parse::<f64>().map_err(|_| bad())?),
                None => None,
            };
            Ok(SettingSpec { x, y, weight })
        }
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    Auto,
    Fixed(f64),
}

fn parse_lambda(s: &str) -> Result<LambdaArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(LambdaArg::Auto);
    }
    let l: f64 = s
        .parse()
        .map_err(|_| format!("expected 'auto' or a number in [0, 1], got {s:?}"))?;
    if (0.0..=1.0).contains(&l) {
        Ok(LambdaArg::Fixed(l))
    } else {
        Err(format!("{l} is not in [0, 1]"))
    }
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub theta: ThetaArg,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub theta: ThetaArg,
    #[arg(long, default_value_t = 0.70, value_parser = parse_visibility)]
    pub v_min: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_visibility)]
    pub v_max: f64,
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Grid points per axis over [0, 1].
    #[arg(long, default_value_t = 201)]
    pub resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Observed correlation (JSON).
    pub correlation: PathBuf,
    /// Key-generating setting `x,y[,w]`; repeatable. Missing weights share
    /// the remaining mass equally [default: 0,2].
    #[arg(long = "setting", value_parser = parse_setting)]
    pub settings: Vec<SettingSpec>,
    /// Relabelling fraction: `auto` or a value in [0, 1].
    #[arg(long, default_value = "auto", value_parser = parse_lambda)]
    pub lambda: LambdaArg,
    /// Nonlocal component to decompose along (JSON). Defaults to the
    /// noiseless biased-CHSH correlation at the chosen angle.
    #[arg(long, conflicts_with_all = ["theta", "theta_deg"])]
    pub target: Option<PathBuf>,
    #[command(flatten)]
    pub theta: ThetaArg,
}

#[derive(Debug, Args)]
pub struct IntrinsicArgs {
    /// Tripartite distribution (JSON).
    pub distribution: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, env = "CCBOUND_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Skip the exhaustive deterministic-map sweep.
    #[arg(long)]
    pub no_sweep: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("reference").required(true).args(["target", "ns"]))]
pub struct LocalweightArgs {
    /// Correlation (JSON).
    pub correlation: PathBuf,
    /// Decompose as q·local + (1 − q)·target.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Decompose as q·local + (1 − q)·nonsignaling.
    #[arg(long)]
    pub ns: bool,
    /// Write the local component here instead of printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Settings {
    Three,
    Four,
}

#[derive(Debug, Args)]
pub struct WernerArgs {
    #[command(flatten)]
    pub theta: ThetaArg,
    #[arg(long, value_parser = parse_visibility)]
    pub v: f64,
    /// Bob's settings: the protocol's three, or with β₃ = (1,0,0) appended.
    #[arg(long, value_enum, default_value_t = Settings::Three)]
    pub bob: Settings,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TripartiteArgs {
    #[command(flatten)]
    pub theta: ThetaArg,
    #[arg(long, value_parser = parse_visibility)]
    pub v: f64,
    /// Setting pair `x,y` [default: 0,2].
    #[arg(long, value_parser = parse_setting)]
    pub setting: Option<SettingSpec>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

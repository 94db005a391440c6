//! Command-line flags. Global flags override the matching config keys.

use crate::config::RawConfig;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "lee2d",
    version,
    about = "Renormalized non-relativistic Lee model on two-dimensional manifolds",
    long_about = "A static source at a point a couples with strength λ to bosons of mass m that \
                  propagate with the heat kernel K_s(x,y) of (1/2m)∇² on the plane, a flat torus, \
                  a round sphere or the hyperbolic plane. Subcommands evaluate kernels, the \
                  renormalized bound state, operator lower bounds and mean-field energies.\n\n\
                  Settings come from an optional TOML file (--config) with blocks [geometry], \
                  [physics], [numerics] and [output]; flags override the file.\n\n\
                  Exit codes: 0 success, 2 configuration or usage error, 3 domain error, \
                  4 accuracy target or checked inequality not met, 5 internal error."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_count(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x >= 0.0 && x.fract() == 0.0 {
        Ok(x)
    } else {
        Err(format!("`{s}` is not a nonnegative integer"))
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.trim()
                .parse()
                .map_err(|_| format!("`{a}` is not a number"))?,
            b.trim()
                .parse()
                .map_err(|_| format!("`{b}` is not a number"))?,
        )),
        _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// plane, torus, sphere or hyperbolic.
    #[arg(long, global = true)]
    pub geometry: Option<String>,
    /// Sphere radius or hyperbolic curvature radius.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub radius: Option<f64>,
    /// First torus side.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub l1: Option<f64>,
    /// Second torus side.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub l2: Option<f64>,
    /// Boson mass m.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Physical binding energy μ < m.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Coupling λ ≥ 0.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Boson number n (accepts 1e6).
    #[arg(long, global = true, value_parser = parse_count)]
    pub n: Option<f64>,
    /// Source point as `x1,x2` in chart coordinates.
    #[arg(long, global = true, value_parser = parse_pair, allow_negative_numbers = true)]
    pub source: Option<(f64, f64)>,
    /// Seed for every randomized run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Short-time cutoff ε of the bare mass.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Largest accepted root residual.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tolerance: Option<f64>,
    /// Gaussian trial width on noncompact geometries.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub width: Option<f64>,
    /// Root bracket `lo,hi` with hi < m.
    #[arg(long, global = true, value_parser = parse_pair, allow_negative_numbers = true)]
    pub bracket: Option<(f64, f64)>,
    /// printed or exact_kernel form of the constant-ansatz equation.
    #[arg(long, global = true)]
    pub ansatz: Option<String>,
    /// csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, short = 'o', global = true, value_name = "FILE")]
    pub output: Option<String>,
}

impl GlobalArgs {
    pub fn overrides(&self) -> RawConfig {
        RawConfig {
            kind: self.geometry.clone(),
            radius: self.radius,
            l1: self.l1,
            l2: self.l2,
            m: self.m,
            mu: self.mu,
            lambda: self.lambda,
            n: self.n,
            source: self.source,
            seed: self.seed,
            epsilon: self.epsilon,
            tolerance: self.tolerance,
            width: self.width,
            bracket: self.bracket,
            ansatz: self.ansatz.clone(),
            format: self.format.clone(),
            path: self.output.clone(),
            ..RawConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heat kernel K_s(x,y) on a log grid of s with property residuals.
    ///
    /// K_s is the kernel of (1/2m)∇² at diffusion time t = s/2m. Each row
    /// carries one residual: heat_equation (∂_s K − (1/2m)∇²K relative to
    /// K_s(x,x)/s), symmetry (|K(x,y) − K(y,x)|/K) or
    /// stochastic_completeness (|∫K_s(x,y)dx − 1|).
    Heat(HeatArgs),
    /// Renormalized bound state: the root E < m of
    /// Φ(E) = μ − E + λ²∫₀^∞ K_s(a,a)[e^{−s(m−μ)} − e^{−s(m−E)}] ds.
    ///
    /// The renormalization makes E = μ the exact root; the residual is |Φ(E)|.
    BoundState,
    /// Operator lower bound for the n-boson sector.
    ///
    /// Fits the diagonal constant (K_s(a,a) ≤ C/(s/2m) on the plane and
    /// hyperbolic plane, K_s(a,a) ≤ 1/V + A/(s/2m) on compact surfaces),
    /// evaluates the energy below which no bound state exists and the norm
    /// bound on the resolvent correction there. JSON by default; with
    /// --n-list and --format csv one row per n.
    Bounds(BoundsArgs),
    /// Mean-field energies from the χ-equation.
    #[command(subcommand)]
    Meanfield(MeanfieldCommand),
    /// Identity and inequality suite: positivity and minimum of
    /// f(x) = x^{1−ε} − x + δ, Feynman parametrizations, Beta reflection
    /// B(ε,1−ε) = π/sin πε and the exponential integral identity.
    Identities(IdentitiesArgs),
    /// Sweep one parameter and evaluate catalogued quantities per value.
    ///
    /// Writes CSV (axis, value, one column per quantity, residual columns,
    /// error_category); with --output a JSON sidecar with metadata, config
    /// hash and failed rows is written next to it.
    Sweep(SweepArgs),
    /// Mean-field energy against the analytic lower bound on random
    /// sphere and hyperbolic-plane points; every margin must be ≥ 0.
    Consistency(ConsistencyArgs),
}

#[derive(Debug, Args)]
pub struct HeatArgs {
    /// First point `x1,x2`; defaults to the source.
    #[arg(long, value_parser = parse_pair, allow_negative_numbers = true)]
    pub x: Option<(f64, f64)>,
    /// Second point `x1,x2`; defaults to the source.
    #[arg(long, value_parser = parse_pair, allow_negative_numbers = true)]
    pub y: Option<(f64, f64)>,
    #[arg(long)]
    pub s_min: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Number of log-spaced times.
    #[arg(long)]
    pub points: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Boson numbers for a CSV table.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub n_list: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum MeanfieldCommand {
    /// Mean-field energy E = n h₀[u] − χ from the χ-equation.
    ///
    /// χ is the unique root above −μ of
    /// χ + μ + λ²∫₀^∞ K_s(a,a)(e^{−s(m−μ)} − e^{−s(m+χ)}) ds = nλ²∫₀^∞ W_s² e^{−s(2m+χ)} ds,
    /// with W_s = ∫K_s(x,a)u(x)dx, the constant state on compact surfaces
    /// and a geodesic Gaussian elsewhere. Columns: n, chi, E, deficit = nm + μ − E,
    /// predicted_deficit (λ√(n/V) compact, 2mCeλ² ln n otherwise), ratio,
    /// residual.
    Solve(NListArgs),
    /// Constant-ansatz root: the gap g = nm − E solves
    /// g + μ + (mλ²/2π) ln(g/(m−μ)) = nλ²/(V g) (printed form), or the
    /// same with the exact-kernel logarithm.
    Ansatz(NListArgs),
    /// Large-n table: deficit nm + μ − E against λ√(n/V) on compact
    /// surfaces, 2mCeλ² ln n otherwise, for n = 10⁴, 10⁵, 10⁶ unless
    /// --n-list is given.
    Asymptotics(NListArgs),
    /// Upper-bound chain on random few-mode states with n K[v] < 1 and
    /// ε(n) = 1/ln n, δ(n) = 1/(n ln²n): the zero-mode, cross and double
    /// terms against their caps, and n δ/ε² = 1.
    ChainCheck(ChainArgs),
}

#[derive(Debug, Args)]
pub struct NListArgs {
    /// Boson numbers; defaults to the configured n.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub n_list: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Number of random trial states.
    #[arg(long, default_value_t = 20)]
    pub draws: usize,
}

#[derive(Debug, Args)]
pub struct IdentitiesArgs {
    #[arg(long, default_value_t = 100_000)]
    pub positivity_draws: usize,
    #[arg(long, default_value_t = 10_000)]
    pub minimum_draws: usize,
    #[arg(long, default_value_t = 200)]
    pub identity_draws: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep specification; replaces the flags below.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// n, epsilon, lambda, mu, m, width, s, gap or radius.
    #[arg(long)]
    pub axis: Option<String>,
    /// Explicit axis values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub values: Vec<f64>,
    /// Log grid `from,to,points`.
    #[arg(long, value_delimiter = ',')]
    pub log: Vec<f64>,
    /// Linear grid `from,to,points`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub linear: Vec<f64>,
    /// Quantities to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub outputs: Vec<String>,
    /// Time s for heat_kernel_diag.
    #[arg(long)]
    pub s: Option<f64>,
    /// Gap nm − E for divergence_slope.
    #[arg(long)]
    pub gap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    /// Random points per geometry.
    #[arg(long, default_value_t = 25)]
    pub per_geometry: usize,
}

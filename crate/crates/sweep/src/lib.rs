//! Parameter sweeps over the `lee2d` model: one axis varied, a list of
//! catalogued quantities evaluated per axis value, rows computed in
//! parallel and assembled in axis order.

pub mod consistency;
pub mod persist;

use lee2d::analysis::{default_epsilon_grid, domain_divergence_diagnostic};
use lee2d::bounds::{bound_report, default_fit_grid, BoundReport};
use lee2d::heatkernel::heat_kernel_diag;
use lee2d::meanfield::{
    constant_ansatz_energy, solve_chi, AnsatzForm, ChiSolution, GaussianTrial, TrialState,
};
use lee2d::renorm::{mu_bare_with_residual, solve_bound_state, PhysicalParams};
use lee2d::Manifold;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::{SystemTime, UNIX_EPOCH};

pub use consistency::{
    consistency_matrix, random_grid, ConsistencyPoint, ConsistencyReport, ConsistencyRow,
};

/// Version of the CSV/JSON artifact layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// The parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    Epsilon,
    Lambda,
    Mu,
    M,
    /// Width of the Gaussian trial on noncompact geometries.
    Width,
    /// Time argument of `heat_kernel_diag`.
    S,
    /// `nm − E` fed to the divergence diagnostic.
    Gap,
    /// Curvature radius, or torus side with the aspect ratio kept.
    Radius,
}

impl Axis {
    pub const ALL: [Axis; 9] = [
        Axis::N,
        Axis::Epsilon,
        Axis::Lambda,
        Axis::Mu,
        Axis::M,
        Axis::Width,
        Axis::S,
        Axis::Gap,
        Axis::Radius,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::Epsilon => "epsilon",
            Axis::Lambda => "lambda",
            Axis::Mu => "mu",
            Axis::M => "m",
            Axis::Width => "width",
            Axis::S => "s",
            Axis::Gap => "gap",
            Axis::Radius => "radius",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisValues {
    List { values: Vec<f64> },
    Log { from: f64, to: f64, points: usize },
    Linear { from: f64, to: f64, points: usize },
}

impl AxisValues {
    pub fn expand(&self) -> Result<Vec<f64>, SweepError> {
        let grid = |from: f64, to: f64, points: usize, log: bool| -> Result<Vec<f64>, SweepError> {
            if !from.is_finite() || !to.is_finite() || (log && !(from > 0.0 && to > 0.0)) {
                return Err(SweepError::Config(
                    "range ends must be finite (and positive for log ranges)".into(),
                ));
            }
            Ok((0..points)
                .map(|i| {
                    let f = if points == 1 {
                        0.0
                    } else {
                        i as f64 / (points - 1) as f64
                    };
                    if log {
                        (from.ln() + (to.ln() - from.ln()) * f).exp()
                    } else {
                        from + (to - from) * f
                    }
                })
                .collect())
        };
        let values = match self {
            AxisValues::List { values } => values.clone(),
            AxisValues::Log { from, to, points } => grid(*from, *to, *points, true)?,
            AxisValues::Linear { from, to, points } => grid(*from, *to, *points, false)?,
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SweepError::Config("axis values must be finite".into()));
        }
        Ok(values)
    }
}

/// Knobs used by quantities that are not on the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub epsilon: f64,
    pub s: f64,
    pub width: f64,
    pub gap: f64,
    pub ansatz: AnsatzForm,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            s: 1.0,
            width: 1.0,
            gap: 1.0,
            ansatz: AnsatzForm::Printed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: AxisValues,
    pub params: PhysicalParams<f64>,
    pub manifold: Manifold<f64>,
    pub outputs: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub settings: Settings,
}

impl SweepSpec {
    /// SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Registered sweep outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    BoundStateEnergy,
    MuBare,
    HeatKernelDiag,
    Chi,
    MeanfieldEnergy,
    AnsatzEnergy,
    CompactDeficitRatio,
    LowerBound,
    NormBound,
    DivergenceSlope,
}

impl Quantity {
    pub const ALL: [Quantity; 10] = [
        Quantity::BoundStateEnergy,
        Quantity::MuBare,
        Quantity::HeatKernelDiag,
        Quantity::Chi,
        Quantity::MeanfieldEnergy,
        Quantity::AnsatzEnergy,
        Quantity::CompactDeficitRatio,
        Quantity::LowerBound,
        Quantity::NormBound,
        Quantity::DivergenceSlope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::BoundStateEnergy => "bound_state_energy",
            Quantity::MuBare => "mu_bare",
            Quantity::HeatKernelDiag => "heat_kernel_diag",
            Quantity::Chi => "chi",
            Quantity::MeanfieldEnergy => "meanfield_energy",
            Quantity::AnsatzEnergy => "ansatz_energy",
            Quantity::CompactDeficitRatio => "compact_deficit_ratio",
            Quantity::LowerBound => "lower_bound",
            Quantity::NormBound => "norm_bound",
            Quantity::DivergenceSlope => "divergence_slope",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == s)
    }

    /// Whether the quantity comes with a residual column.
    pub fn has_residual(self) -> bool {
        !matches!(
            self,
            Quantity::HeatKernelDiag | Quantity::LowerBound | Quantity::NormBound
        )
    }

    pub fn description(self) -> &'static str {
        match self {
            Quantity::BoundStateEnergy => "root of the renormalized principal function; residual |Φ(E)|",
            Quantity::MuBare => "bare mass μ(ε) at settings.epsilon; residual is the quadrature error",
            Quantity::HeatKernelDiag => "K_s(a,a) at settings.s",
            Quantity::Chi => "mean-field χ (constant trial if compact, Gaussian of settings.width otherwise)",
            Quantity::MeanfieldEnergy => "mean-field energy n h₀[u] − χ for the same trial",
            Quantity::AnsatzEnergy => "constant-ansatz energy on a compact manifold",
            Quantity::CompactDeficitRatio => "(nm + μ − E_ansatz)/(λ√(n/V))",
            Quantity::LowerBound => "operator lower bound with the fitted kernel constant",
            Quantity::NormBound => "norm bound evaluated at the lower bound",
            Quantity::DivergenceSlope => "slope of the cutoff integral against ln(1/ε); residual is its relative deviation from m/2π",
        }
    }

    /// Header of the residual column, if any.
    pub fn residual_column(self) -> Option<String> {
        self.has_residual()
            .then(|| format!("{}_residual", self.name()))
    }
}

/// Resolves output names against the catalog.
pub fn parse_outputs(names: &[String]) -> Result<Vec<Quantity>, SweepError> {
    names
        .iter()
        .map(|n| {
            Quantity::from_name(n).ok_or_else(|| {
                let known: Vec<&str> = Quantity::ALL.iter().map(|q| q.name()).collect();
                SweepError::Config(format!(
                    "unknown quantity '{n}'; known: {}",
                    known.join(", ")
                ))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub axis_value: f64,
    pub values: Vec<Option<f64>>,
    pub residuals: Vec<Option<f64>>,
    /// Category of the first failure in the row.
    pub error_category: Option<String>,
    pub error_message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub artifact_version: String,
    pub config_hash: String,
    pub started_unix: f64,
    pub finished_unix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub quantities: Vec<Quantity>,
    pub rows: Vec<SweepRow>,
    pub metadata: Metadata,
}

impl SweepResult {
    /// Values of one quantity down the rows.
    pub fn column(&self, q: Quantity) -> Option<Vec<Option<f64>>> {
        let k = self.quantities.iter().position(|&x| x == q)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Evaluates every requested quantity at every axis value.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    let started = unix_now();
    let quantities = parse_outputs(&spec.outputs)?;
    spec.manifold
        .validate()
        .map_err(|e| SweepError::Config(format!("manifold: {e}")))?;
    let values = spec.values.expand()?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| evaluate_row(spec, &quantities, i, v))
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        quantities,
        rows,
        metadata: Metadata {
            schema_version: SCHEMA_VERSION,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: spec.config_hash(),
            started_unix: started,
            finished_unix: unix_now(),
        },
    })
}

struct RowState {
    params: PhysicalParams<f64>,
    manifold: Manifold<f64>,
    settings: Settings,
}

fn apply_axis(spec: &SweepSpec, value: f64) -> lee2d::Result<RowState> {
    let mut st = RowState {
        params: spec.params,
        manifold: spec.manifold,
        settings: spec.settings,
    };
    let positive = |what: &str| {
        if value > 0.0 {
            Ok(())
        } else {
            Err(lee2d::Error::Domain(format!(
                "{what} must be positive, got {value}"
            )))
        }
    };
    match spec.axis {
        Axis::N => {
            // log grids land within rounding of the integers they name
            let near = value.round();
            let value = if (value - near).abs() <= 1e-9 * near.max(1.0) {
                near
            } else {
                value
            };
            if !(value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                return Err(lee2d::Error::Domain(format!(
                    "n must be a nonnegative integer, got {value}"
                )));
            }
            st.params.n = value as u64;
        }
        Axis::Epsilon => {
            positive("epsilon")?;
            st.settings.epsilon = value;
        }
        Axis::Lambda => st.params.lambda = value,
        Axis::Mu => st.params.mu = value,
        Axis::M => st.params.m = value,
        Axis::Width => {
            positive("width")?;
            st.settings.width = value;
        }
        Axis::S => {
            positive("s")?;
            st.settings.s = value;
        }
        Axis::Gap => {
            positive("gap")?;
            st.settings.gap = value;
        }
        Axis::Radius => {
            positive("radius")?;
            st.manifold = match spec.manifold {
                Manifold::Plane => {
                    return Err(lee2d::Error::Unsupported("the plane has no radius".into()))
                }
                Manifold::Torus { l1, l2 } => Manifold::torus(value, value * l2 / l1)?,
                Manifold::Sphere { .. } => Manifold::sphere(value)?,
                Manifold::HyperbolicPlane { .. } => Manifold::hyperbolic(value)?,
            };
            st.params.source = st.manifold.wrap(st.params.source);
        }
    }
    st.params.validate()?;
    st.manifold.validate_point(&st.params.source)?;
    Ok(st)
}

/// Row-local memo of the expensive shared pieces.
struct RowCache {
    bounds: Option<lee2d::Result<BoundReport<f64>>>,
    chi: Option<lee2d::Result<ChiSolution<f64>>>,
}

fn meanfield_trial(st: &RowState) -> lee2d::Result<TrialState<f64>> {
    if st.manifold.is_compact() {
        Ok(TrialState::Constant)
    } else {
        Ok(TrialState::Gaussian(GaussianTrial::new(
            &st.manifold,
            st.params.m,
            st.settings.width,
        )?))
    }
}

fn evaluate(q: Quantity, st: &RowState, cache: &mut RowCache) -> lee2d::Result<(f64, Option<f64>)> {
    let (p, man) = (&st.params, &st.manifold);
    match q {
        Quantity::BoundStateEnergy => {
            let b = solve_bound_state(p, man, None)?;
            Ok((b.energy, Some(b.residual)))
        }
        Quantity::MuBare => {
            let v = mu_bare_with_residual(p, man, st.settings.epsilon)?;
            Ok((v.value, Some(v.integral_residual)))
        }
        Quantity::HeatKernelDiag => {
            Ok((heat_kernel_diag(man, &p.source, st.settings.s, p.m)?, None))
        }
        Quantity::Chi | Quantity::MeanfieldEnergy => {
            let sol = cache
                .chi
                .get_or_insert_with(|| meanfield_trial(st).and_then(|t| solve_chi(&t, p, man)))
                .clone()?;
            let v = if q == Quantity::Chi {
                sol.chi
            } else {
                sol.energy
            };
            Ok((v, Some(sol.residual)))
        }
        Quantity::AnsatzEnergy => {
            let a = constant_ansatz_energy(p, man, st.settings.ansatz)?;
            Ok((a.energy, Some(a.residual)))
        }
        Quantity::CompactDeficitRatio => {
            let a = constant_ansatz_energy(p, man, st.settings.ansatz)?;
            let v = man.volume().ok_or_else(|| {
                lee2d::Error::Unsupported("deficit ratio needs a compact manifold".into())
            })?;
            let n = p.n as f64;
            let scale = p.lambda * (n / v).sqrt();
            if scale == 0.0 {
                return Err(lee2d::Error::Domain(
                    "deficit ratio needs λ ≠ 0 and n > 0".into(),
                ));
            }
            Ok((
                (n * p.m + p.mu - a.energy) / scale,
                Some(a.residual / scale),
            ))
        }
        Quantity::LowerBound | Quantity::NormBound => {
            let r = cache
                .bounds
                .get_or_insert_with(|| bound_report(p, man, &default_fit_grid(man, p.m)))
                .clone()?;
            let v = if q == Quantity::LowerBound {
                r.lower_bound
            } else {
                r.norm_bound_at_e.value()
            };
            Ok((v, None))
        }
        Quantity::DivergenceSlope => {
            let gap = st.settings.gap;
            let grid = default_epsilon_grid(p, man, gap);
            let r = domain_divergence_diagnostic(p, man, gap, &grid)?;
            Ok((r.slope, Some(r.slope_error)))
        }
    }
}

fn evaluate_row(spec: &SweepSpec, quantities: &[Quantity], index: usize, value: f64) -> SweepRow {
    let k = quantities.len();
    let mut row = SweepRow {
        index,
        axis_value: value,
        values: vec![None; k],
        residuals: vec![None; k],
        error_category: None,
        error_message: None,
    };
    let fail = |row: &mut SweepRow, e: lee2d::Error| {
        if row.error_category.is_none() {
            row.error_category = Some(e.category().to_string());
            row.error_message = Some(e.to_string());
        }
    };
    let st = match apply_axis(spec, value) {
        Ok(st) => st,
        Err(e) => {
            fail(&mut row, e);
            return row;
        }
    };
    let mut cache = RowCache {
        bounds: None,
        chi: None,
    };
    for (j, &q) in quantities.iter().enumerate() {
        match evaluate(q, &st, &mut cache) {
            Ok((v, r)) => {
                row.values[j] = Some(v);
                row.residuals[j] = r;
            }
            Err(e) => fail(&mut row, e),
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(axis: Axis, values: Vec<f64>, outputs: &[&str]) -> SweepSpec {
        SweepSpec {
            axis,
            values: AxisValues::List { values },
            params: PhysicalParams::new(0.5, 0.1, 1.0, 1).unwrap(),
            manifold: Manifold::sphere(1.0).unwrap(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            seed: 7,
            settings: Settings::default(),
        }
    }

    #[test]
    fn unknown_quantity_is_a_config_error() {
        let s = spec(Axis::N, vec![1.0], &["mu_bar"]);
        assert!(matches!(run_sweep(&s), Err(SweepError::Config(_))));
    }

    #[test]
    fn log_grid_counts_snap_to_integers() {
        let mut s = spec(Axis::N, vec![], &["chi"]);
        s.values = AxisValues::Log {
            from: 10.0,
            to: 1e4,
            points: 4,
        };
        let r = run_sweep(&s).unwrap();
        assert!(r.rows.iter().all(|row| row.error_category.is_none()));
        let bad = run_sweep(&spec(Axis::N, vec![2.5], &["chi"])).unwrap();
        assert!(bad.rows[0].error_category.is_some());
    }

    #[test]
    fn empty_axis_gives_empty_rows() {
        let r = run_sweep(&spec(Axis::N, vec![], &["chi"])).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.metadata.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn bad_rows_are_isolated() {
        let r = run_sweep(&spec(
            Axis::Mu,
            vec![0.1, 0.7, -0.2],
            &["bound_state_energy"],
        ))
        .unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[1].error_category.as_deref(), Some("domain"));
        assert!((r.rows[0].values[0].unwrap() - 0.1).abs() < 1e-9);
        assert!((r.rows[2].values[0].unwrap() + 0.2).abs() < 1e-9);
    }

    #[test]
    fn log_range_expands_inclusively() {
        let v = AxisValues::Log {
            from: 1e2,
            to: 1e6,
            points: 5,
        }
        .expand()
        .unwrap();
        assert_eq!(v.len(), 5);
        assert!((v[2] - 1e4).abs() < 1e-8);
    }

    #[test]
    fn radius_axis_rescales_geometry() {
        let r = run_sweep(&spec(Axis::Radius, vec![1.0, 2.0], &["heat_kernel_diag"])).unwrap();
        let col: Vec<f64> = r
            .column(Quantity::HeatKernelDiag)
            .unwrap()
            .into_iter()
            .map(|v| v.unwrap())
            .collect();
        assert!(col[1] < col[0]);
    }
}

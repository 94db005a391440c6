//! Mean-field energies (variational upper bounds) against the analytic
//! operator lower bounds on the same parameters. A negative margin would
//! falsify one of the two implementations.

use lee2d::bounds::{bound_report, default_fit_grid};
use lee2d::meanfield::{solve_chi, GaussianTrial, TrialState};
use lee2d::renorm::PhysicalParams;
use lee2d::{Manifold, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub manifold: Manifold<f64>,
    pub params: PhysicalParams<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub index: usize,
    pub geometry: String,
    pub m: f64,
    pub mu: f64,
    pub lambda: f64,
    pub n: u64,
    pub meanfield_energy: Option<f64>,
    pub lower_bound: Option<f64>,
    /// `E_meanfield − lower_bound`.
    pub margin: Option<f64>,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    pub min_margin: f64,
    pub all_passed: bool,
}

/// `per_geometry` points on each manifold. The first point of each block
/// has `λ = 0`, where both sides equal `nm + μ`; the rest draw `m`, `μ`,
/// `λ`, `n` and the source at random.
pub fn random_grid(
    seed: u64,
    per_geometry: usize,
    manifolds: &[Manifold<f64>],
) -> Vec<ConsistencyPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_geometry * manifolds.len());
    for man in manifolds {
        for k in 0..per_geometry {
            let m = rng.gen_range(0.2..2.0);
            // the compact lower bound is stated for μ > 0
            let mu = if man.is_compact() {
                m * rng.gen_range(0.05..0.9)
            } else {
                m * rng.gen_range(-0.9..0.9)
            };
            let lambda = if k == 0 {
                0.0
            } else {
                rng.gen_range(0.05..2.0)
            };
            let n = 10f64.powf(rng.gen_range(0.0..4.0)).round().max(1.0) as u64;
            let source = man.wrap(Point::new(rng.gen_range(0.0..3.0), rng.gen_range(0.0..6.0)));
            let params = PhysicalParams::new(m, mu, lambda, n)
                .expect("drawn parameters are admissible")
                .with_source(source);
            out.push(ConsistencyPoint {
                manifold: *man,
                params,
            });
        }
    }
    out
}

fn evaluate(point: &ConsistencyPoint, width: f64) -> lee2d::Result<(f64, f64)> {
    let (p, man) = (&point.params, &point.manifold);
    let trial = if man.is_compact() {
        TrialState::Constant
    } else {
        TrialState::Gaussian(GaussianTrial::new(man, p.m, width)?)
    };
    let e = solve_chi(&trial, p, man)?.energy;
    let lb = bound_report(p, man, &default_fit_grid(man, p.m))?.lower_bound;
    Ok((e, lb))
}

/// Evaluates every point; `width` is the Gaussian trial width used on
/// noncompact geometries.
pub fn consistency_matrix(points: &[ConsistencyPoint], width: f64) -> ConsistencyReport {
    let rows: Vec<ConsistencyRow> = points
        .par_iter()
        .enumerate()
        .map(|(index, pt)| {
            let p = &pt.params;
            let mut row = ConsistencyRow {
                index,
                geometry: pt.manifold.kind().name().to_string(),
                m: p.m,
                mu: p.mu,
                lambda: p.lambda,
                n: p.n,
                meanfield_energy: None,
                lower_bound: None,
                margin: None,
                passed: false,
                error: None,
            };
            match evaluate(pt, width) {
                Ok((e, lb)) => {
                    row.meanfield_energy = Some(e);
                    row.lower_bound = Some(lb);
                    row.margin = Some(e - lb);
                    row.passed = e >= lb;
                }
                Err(e) => row.error = Some(format!("{}: {e}", e.category())),
            }
            row
        })
        .collect();
    let min_margin = rows
        .iter()
        .filter_map(|r| r.margin)
        .fold(f64::INFINITY, f64::min);
    let all_passed = rows.iter().all(|r| r.passed);
    ConsistencyReport {
        rows,
        min_margin,
        all_passed,
    }
}

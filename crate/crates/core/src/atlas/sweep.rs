use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{FoldSaddleParams, Tau};

use super::case::{classify_case, event_thresholds, CaseId};
use super::signature::topo_signature;
use super::AtlasConfig;

/// Half-width of the swept square in the `(lambda, beta)` plane. Beyond about
/// `0.6`, for `|mu| = 0.1` and the visible fold, the pseudo-equilibrium near
/// the origin and the far sigma-saddle collide and vanish: a bifurcation
/// outside the local unfolding that the case labels describe.
pub const LAMBDA_BETA_RANGE: f64 = 0.5;

/// `beta` level at which boundary curves and thin sectors are sampled.
const PROBE_BETA: f64 = 0.5 * LAMBDA_BETA_RANGE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("grid size must be at least 1")]
    EmptyGrid,
    #[error("mu = {0} is outside the admissible range")]
    BadMu(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub lambda: f64,
    pub beta: f64,
    pub case: CaseId,
    pub topo_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseGrid {
    pub tau: Tau,
    pub mu: f64,
    /// Cell centres, increasing.
    pub lambda_axis: Vec<f64>,
    pub beta_axis: Vec<f64>,
    /// Row-major over `beta`: the cell `(i, j)` is `cells[j * n + i]`.
    pub cells: Vec<GridSample>,
    /// Points on the boundary curves, at codimension-two points and in
    /// sectors too thin for the grid to resolve.
    pub boundary_samples: Vec<GridSample>,
}

impl CaseGrid {
    pub fn cell(&self, i: usize, j: usize) -> &GridSample {
        &self.cells[j * self.lambda_axis.len() + i]
    }

    pub fn samples(&self) -> impl Iterator<Item = &GridSample> {
        self.cells.iter().chain(&self.boundary_samples)
    }

    pub fn distinct_cases(&self) -> Vec<CaseId> {
        let mut ids: Vec<CaseId> = self.samples().map(|s| s.case).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn distinct_signatures(&self) -> Vec<String> {
        let mut hashes: Vec<String> = self.samples().map(|s| s.topo_hash.clone()).collect();
        hashes.sort();
        hashes.dedup();
        hashes
    }

    pub fn params(&self, sample: &GridSample) -> FoldSaddleParams {
        FoldSaddleParams {
            tau: self.tau,
            lambda: sample.lambda,
            beta: sample.beta,
            mu: self.mu,
        }
    }
}

fn cell_centres(n: usize) -> Vec<f64> {
    let width = 2.0 * LAMBDA_BETA_RANGE / n as f64;
    (0..n)
        .map(|i| -LAMBDA_BETA_RANGE + (i as f64 + 0.5) * width)
        .collect()
}

/// `lambda` values on each boundary at `beta`, plus the midpoints of the
/// sectors they cut out of the `lambda` range.
fn probe_row(tau: Tau, mu: f64, beta: f64, tol_eq: f64) -> Vec<f64> {
    let p = FoldSaddleParams {
        tau,
        lambda: 0.0,
        beta,
        mu,
    };
    let cuts = if beta > 0.0 {
        let mut e = event_thresholds(&p, tol_eq);
        e.dedup_by(|a, b| (*a - *b).abs() <= tol_eq);
        e
    } else {
        vec![p.lower_fold_x()]
    };
    let mut edges = vec![-LAMBDA_BETA_RANGE];
    edges.extend(&cuts);
    edges.push(LAMBDA_BETA_RANGE);
    let mut row = cuts;
    row.extend(edges.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    row
}

fn extra_points(tau: Tau, mu: f64, tol_eq: f64) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for beta in [-PROBE_BETA, PROBE_BETA] {
        pts.extend(
            probe_row(tau, mu, beta, tol_eq)
                .into_iter()
                .map(|l| (l, beta)),
        );
    }
    let half = 0.5 * LAMBDA_BETA_RANGE;
    pts.extend([(-half, 0.0), (0.0, 0.0), (half, 0.0)]);
    pts
}

fn sample(tau: Tau, mu: f64, lambda: f64, beta: f64, cfg: &AtlasConfig) -> GridSample {
    let params = FoldSaddleParams {
        tau,
        lambda,
        beta,
        mu,
    };
    let case = classify_case(&params, cfg.tol_eq).expect("sample inside the admissible range");
    GridSample {
        lambda,
        beta,
        case,
        topo_hash: topo_signature(&params, cfg).hash_hex(),
    }
}

/// Classifies the centres of an `n` by `n` grid over `(-0.5, 0.5)^2` and a
/// fixed set of points on and between the boundary curves. Samples are
/// computed in parallel and stored in index order, so the result does not
/// depend on the number of workers.
pub fn sweep(tau: Tau, mu: f64, n: usize, cfg: &AtlasConfig) -> Result<CaseGrid, SweepError> {
    if n == 0 {
        return Err(SweepError::EmptyGrid);
    }
    FoldSaddleParams {
        tau,
        lambda: 0.0,
        beta: 0.0,
        mu,
    }
    .validate()
    .map_err(|_| SweepError::BadMu(mu))?;

    let axis = cell_centres(n);
    let points: Vec<(f64, f64)> = (0..n * n).map(|k| (axis[k % n], axis[k / n])).collect();
    let cells = points
        .par_iter()
        .map(|&(l, b)| sample(tau, mu, l, b, cfg))
        .collect();
    let boundary_samples = extra_points(tau, mu, cfg.tol_eq)
        .par_iter()
        .map(|&(l, b)| sample(tau, mu, l, b, cfg))
        .collect();
    Ok(CaseGrid {
        tau,
        mu,
        lambda_axis: axis.clone(),
        beta_axis: axis,
        cells,
        boundary_samples,
    })
}

pub fn write_grid_csv(grid: &CaseGrid, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "lambda,beta,tau,mu,case_id,topo_hash")?;
    for s in grid.samples() {
        writeln!(
            out,
            "{:.16e},{:.16e},{},{:.16e},{},{}",
            s.lambda, s.beta, grid.tau, grid.mu, s.case, s.topo_hash
        )?;
    }
    Ok(())
}

/// One parameter point standing for a whole signature class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub topo_hash: String,
    pub case: CaseId,
    pub params: FoldSaddleParams,
}

/// For each signature found in `grids`, the sample with the smallest case
/// label (first seen wins among equal labels).
pub fn representatives(grids: &[CaseGrid]) -> Vec<Representative> {
    let mut best: BTreeMap<String, Representative> = BTreeMap::new();
    for grid in grids {
        for s in grid.samples() {
            let candidate = Representative {
                topo_hash: s.topo_hash.clone(),
                case: s.case,
                params: grid.params(s),
            };
            best.entry(s.topo_hash.clone())
                .and_modify(|r| {
                    if s.case < r.case {
                        *r = candidate.clone();
                    }
                })
                .or_insert(candidate);
        }
    }
    let mut reps: Vec<Representative> = best.into_values().collect();
    reps.sort_by(|a, b| {
        a.case
            .cmp(&b.case)
            .then_with(|| a.topo_hash.cmp(&b.topo_hash))
    });
    reps
}

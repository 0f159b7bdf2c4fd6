//! Multi-run experiments: mesh refinement and twin perturbation runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{gronwall_fit, weighted_distance, DistanceSeries, GronwallFit};
use crate::integrator::{run, RunConfig, StepController, TerminationReason, Trajectory};
use crate::model::{ForceModel, InitialData, PhysicalParameters};
use crate::reconstruct::{piecewise_linear_eval, Snapshot};
use crate::scheme::GridState;

/// Common sample points for comparing meshes.
pub const COMPARISON_POINTS: usize = 512;

/// Everything needed to launch a run, apart from the mesh and initial data.
#[derive(Clone, Debug)]
pub struct Setup {
    pub params: PhysicalParameters,
    pub force: ForceModel,
    pub config: RunConfig,
    pub controller: StepController,
}

impl Setup {
    pub fn run(&self, init: &InitialData, cells: usize) -> Result<Trajectory> {
        let state = GridState::initial(&self.params, init, cells)?;
        Ok(run(
            &state,
            &self.config,
            &self.controller,
            &self.force,
            &self.params,
        ))
    }
}

/// Root-mean-square difference of the reconstructed `(rho, u, r)` at
/// [`COMPARISON_POINTS`] cell midpoints of a uniform partition of `[0, 1]`.
pub fn l2_difference(a: &Snapshot, b: &Snapshot) -> Result<f64> {
    let mut sum = 0.0;
    for k in 0..COMPARISON_POINTS {
        let x = (k as f64 + 0.5) / COMPARISON_POINTS as f64;
        let (p, q) = (piecewise_linear_eval(a, x)?, piecewise_linear_eval(b, x)?);
        sum += (p.rho - q.rho).powi(2) + (p.u - q.u).powi(2) + (p.r - q.r).powi(2);
    }
    Ok((sum / COMPARISON_POINTS as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub meshes: Vec<usize>,
    /// Differences between consecutive meshes.
    pub differences: Vec<f64>,
    /// `log2(e_k / e_{k+1})` for consecutive differences.
    pub orders: Vec<f64>,
    /// Differences never increase under refinement.
    pub monotone: bool,
    pub terminations: Vec<TerminationReason>,
}

impl ConvergenceReport {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Runs every mesh with identical physics and compares final snapshots.
pub fn convergence_study(
    setup: &Setup,
    init: &InitialData,
    meshes: &[usize],
) -> Result<ConvergenceReport> {
    if meshes.len() < 2 {
        return Err(Error::InvalidParameters(
            "convergence study needs at least two meshes".into(),
        ));
    }
    let runs = meshes
        .iter()
        .map(|&n| setup.run(init, n))
        .collect::<Result<Vec<_>>>()?;
    convergence_from_trajectories(meshes, &runs)
}

/// Compares the final snapshots of already computed runs, ordered coarse to fine.
pub fn convergence_from_trajectories(
    meshes: &[usize],
    runs: &[Trajectory],
) -> Result<ConvergenceReport> {
    if meshes.len() < 2 || meshes.len() != runs.len() {
        return Err(Error::InvalidParameters(
            "convergence study needs one run per mesh and at least two meshes".into(),
        ));
    }
    let finals: Vec<&Snapshot> = runs
        .iter()
        .map(|t| {
            t.snapshots
                .last()
                .ok_or_else(|| Error::InvalidProfile("empty trajectory".into()))
        })
        .collect::<Result<_>>()?;
    let differences = finals
        .windows(2)
        .map(|p| l2_difference(p[0], p[1]))
        .collect::<Result<Vec<_>>>()?;
    let orders = differences
        .windows(2)
        .map(|e| (e[0] / e[1]).log2())
        .collect();
    Ok(ConvergenceReport {
        meshes: meshes.to_vec(),
        monotone: differences.windows(2).all(|e| e[1] <= e[0]),
        differences,
        orders,
        terminations: runs.iter().map(|t| t.termination).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinReport {
    pub epsilon: f64,
    pub series: DistanceSeries,
    pub fit: GronwallFit,
    pub base_termination: TerminationReason,
    pub perturbed_termination: TerminationReason,
}

/// Tolerance on `D(t)` for identical initial data.
pub const IDENTICAL_TOL: f64 = 1e-10;

/// Runs base and perturbed data on the same mesh and fits the Gronwall rate
/// to the weighted distance between matching snapshots.
pub fn twin_run(
    setup: &Setup,
    init: &InitialData,
    cells: usize,
    epsilon: f64,
) -> Result<TwinReport> {
    let base = setup.run(init, cells)?;
    let perturbed = setup.run(&init.perturbed(epsilon), cells)?;
    twin_from_trajectories(&base, &perturbed, epsilon, setup.params.theta)
}

/// Pairs snapshots by index, which matches times because output times are
/// fixed by the run configuration.
pub fn twin_from_trajectories(
    base: &Trajectory,
    perturbed: &Trajectory,
    epsilon: f64,
    theta: f64,
) -> Result<TwinReport> {
    let mut series = DistanceSeries {
        times: Vec::new(),
        values: Vec::new(),
    };
    for (a, b) in base.snapshots.iter().zip(&perturbed.snapshots) {
        if a.t != b.t {
            break;
        }
        series.times.push(a.t);
        series.values.push(weighted_distance(a, b, theta)?);
    }
    let fit = gronwall_fit(&series, IDENTICAL_TOL)?;
    Ok(TwinReport {
        epsilon,
        series,
        fit,
        base_termination: base.termination,
        perturbed_termination: perturbed.termination,
    })
}

impl TwinReport {
    /// `D(t) <= factor e^(rate t) D(0)` at every sample.
    pub fn bounded_by(&self, rate: f64, factor: f64) -> bool {
        let d0 = self.series.values[0];
        self.series
            .times
            .iter()
            .zip(&self.series.values)
            .all(|(t, d)| *d <= factor * (rate * t).exp() * d0)
    }
}

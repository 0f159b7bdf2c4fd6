//! Adaptive time integration of the semi-discrete system.
//!
//! Dormand-Prince 5(4) with a PI step-size controller. Every stage rebuilds
//! the radii from the volume law and re-closes the ghost velocity, so the
//! algebraic constraints hold at every accepted state up to rounding.
//! Positivity of the density is enforced by rejecting steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::discrete_energy;
use crate::model::{rho_pow, ForceModel, PhysicalParameters};
use crate::reconstruct::Snapshot;
use crate::scheme::{assemble_rhs, GridState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepController {
    pub safety: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub cfl_parabolic: f64,
    /// PI stabilisation exponent.
    pub beta: f64,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            safety: 0.9,
            dt_min: 1e-14,
            dt_max: 1e-2,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            cfl_parabolic: 0.5,
            beta: 0.04,
        }
    }
}

impl StepController {
    pub fn validate(&self) -> Result<()> {
        let ok = self.safety > 0.0
            && self.safety <= 1.0
            && self.dt_min > 0.0
            && self.dt_min <= self.dt_max
            && self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.cfl_parabolic > 0.0
            && self.cfl_parabolic <= 1.0
            && (0.0..0.2).contains(&self.beta);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!(
                "step controller out of range: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_final: f64,
    pub snapshot_interval: f64,
    /// Trip when `rho_i(t) / rho_i(0)` leaves `[1/factor, factor]`.
    pub sandwich_factor: f64,
    /// Trip when any `|u_j|`, ghost included, exceeds this.
    pub max_velocity: f64,
    /// Trip when the discrete energy exceeds this multiple of its initial value.
    pub max_energy_growth: f64,
}

impl RunConfig {
    pub fn new(t_final: f64, snapshot_interval: f64) -> Self {
        Self {
            t_final,
            snapshot_interval,
            sandwich_factor: 3.0,
            max_velocity: 1e3,
            max_energy_growth: 1e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_final >= 0.0
            && self.snapshot_interval > 0.0
            && (self.snapshot_interval <= self.t_final || self.t_final == 0.0)
            && self.sandwich_factor > 1.0
            && self.max_velocity > 0.0
            && self.max_energy_growth > 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!(
                "run configuration out of range: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    Completed,
    SandwichViolated,
    VelocityBlowup,
    EnergyGrowth,
    VacuumCollapse,
    StepUnderflow,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::SandwichViolated => "sandwich-violated",
            Self::VelocityBlowup => "velocity-blowup",
            Self::EnergyGrowth => "energy-growth",
            Self::VacuumCollapse => "vacuum-collapse",
            Self::StepUnderflow => "step-underflow",
        }
    }
}

/// Per-run bookkeeping over every accepted step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    /// Largest scaled free-boundary closure residual.
    pub max_closure_residual: f64,
    /// Largest relative volume-law residual.
    pub max_volume_residual: f64,
    /// Largest `|u|` (ghost included) over all accepted states.
    pub max_abs_velocity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub termination: TerminationReason,
    /// Time at which the run stopped.
    pub t_end: f64,
    pub message: Option<String>,
    pub stats: RunStats,
}

/// Parabolic step limit `cfl h^2 / (2 max_j D_j)`,
/// `D_j = (2c1+c2) rho_j^(theta+1) r_{j+1}^(2(n-1))`, clamped to `[dt_min, dt_max]`.
pub fn stable_dt(state: &GridState, params: &PhysicalParameters, ctl: &StepController) -> f64 {
    let e = 2.0 * (params.n() - 1.0);
    let diffusivity = state
        .rho
        .iter()
        .zip(&state.r[1..])
        .map(|(&rho, &r)| params.bulk() * rho_pow(rho, params.theta + 1.0) * r.powf(e))
        .fold(0.0, f64::max);
    let dt = if diffusivity > 0.0 {
        ctl.cfl_parabolic * state.h * state.h / (2.0 * diffusivity)
    } else {
        f64::INFINITY
    };
    dt.clamp(ctl.dt_min, ctl.dt_max)
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn derivative(
    state: &GridState,
    force: &ForceModel,
    params: &PhysicalParameters,
) -> Result<Vec<f64>> {
    let rhs = assemble_rhs(state, force, params)?;
    let mut k = rhs.drho;
    k.extend(rhs.du);
    Ok(k)
}

/// One Dormand-Prince step of fixed size, without acceptance logic.
#[derive(Clone, Debug)]
pub struct EmbeddedStep {
    pub state: GridState,
    /// Difference between the fifth- and fourth-order solutions.
    pub error: Vec<f64>,
}

pub fn dormand_prince(
    state: &GridState,
    dt: f64,
    force: &ForceModel,
    params: &PhysicalParameters,
) -> Result<EmbeddedStep> {
    let y0 = state.unknowns();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(derivative(state, force, params)?);
    let mut last = None;
    for stage in 1..7 {
        let y: Vec<f64> = (0..y0.len())
            .map(|i| y0[i] + dt * (0..stage).map(|s| A[stage][s] * k[s][i]).sum::<f64>())
            .collect();
        let stage_state = GridState::from_unknowns(params, state.t + C[stage] * dt, &y)?;
        k.push(derivative(&stage_state, force, params)?);
        if stage == 6 {
            last = Some(stage_state);
        }
    }
    let mut next = last.expect("seven stages");
    // The last stage is evaluated at the fifth-order solution itself.
    next.t = state.t + dt;
    let error = (0..y0.len())
        .map(|i| dt * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>())
        .collect();
    Ok(EmbeddedStep { state: next, error })
}

/// Scaled RMS norm of a local error estimate.
pub fn error_norm(
    before: &GridState,
    after: &GridState,
    error: &[f64],
    ctl: &StepController,
) -> f64 {
    let y0 = before.unknowns();
    let y1 = after.unknowns();
    let sum: f64 = error
        .iter()
        .zip(y0.iter().zip(&y1))
        .map(|(e, (a, b))| {
            let scale = ctl.abs_tol + ctl.rel_tol * a.abs().max(b.abs());
            (e / scale).powi(2)
        })
        .sum();
    (sum / error.len() as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: GridState,
    pub dt_taken: f64,
    /// Proposal for the following step.
    pub dt_next: f64,
    pub rejections: usize,
    /// Error norm of the accepted attempt, used by the PI controller.
    pub error_norm: f64,
}

/// Advances one accepted step, starting with `dt` and shrinking on rejection.
/// `previous_error` is the error norm of the last accepted step (PI memory).
pub fn step(
    state: &GridState,
    dt: f64,
    force: &ForceModel,
    params: &PhysicalParameters,
    ctl: &StepController,
    previous_error: f64,
) -> Result<StepOutcome> {
    if dt == 0.0 {
        return Ok(StepOutcome {
            state: state.clone(),
            dt_taken: 0.0,
            dt_next: ctl.dt_min,
            rejections: 0,
            error_norm: previous_error,
        });
    }
    let exponent = 0.2 - 0.75 * ctl.beta;
    let mut dt = dt;
    let mut rejections = 0;
    loop {
        if dt < ctl.dt_min {
            return Err(Error::StepUnderflow {
                t: state.t,
                dt,
                dt_min: ctl.dt_min,
            });
        }
        let attempt = dormand_prince(state, dt, force, params);
        let (next, err) = match attempt {
            Ok(s) => {
                let err = error_norm(state, &s.state, &s.error, ctl);
                (Some(s.state), err)
            }
            Err(Error::VacuumCollapse { cell, value }) => {
                if dt * 0.25 < ctl.dt_min {
                    return Err(Error::VacuumCollapse { cell, value });
                }
                (None, f64::INFINITY)
            }
            Err(Error::DegenerateClosure { .. }) if dt * 0.25 >= ctl.dt_min => {
                (None, f64::INFINITY)
            }
            Err(e) => return Err(e),
        };
        match next {
            Some(next) if err <= 1.0 => {
                let fac11 = err.max(1e-10).powf(exponent);
                let fac =
                    (fac11 / previous_error.max(1e-4).powf(ctl.beta) / ctl.safety).clamp(0.1, 5.0);
                let mut dt_next = dt / fac;
                if rejections > 0 {
                    dt_next = dt_next.min(dt);
                }
                return Ok(StepOutcome {
                    state: next,
                    dt_taken: dt,
                    dt_next: dt_next.min(ctl.dt_max),
                    rejections,
                    error_norm: err.max(1e-4),
                });
            }
            _ => {
                rejections += 1;
                let shrink = if err.is_finite() {
                    (ctl.safety / err.powf(exponent)).clamp(0.1, 0.9)
                } else {
                    0.25
                };
                dt *= shrink;
            }
        }
    }
}

/// Whether every `rho_i / reference_i` lies in `[1/factor, factor]`.
pub fn sandwich_holds(rho: &[f64], reference: &[f64], factor: f64) -> bool {
    rho.iter()
        .zip(reference)
        .all(|(r, r0)| *r >= r0 / factor && *r <= r0 * factor)
}

/// Integrates from `state0` to `cfg.t_final` or the first guard trip,
/// snapshotting at `t = t0 + k * snapshot_interval`, at the start and at the end.
pub fn run(
    state0: &GridState,
    cfg: &RunConfig,
    ctl: &StepController,
    force: &ForceModel,
    params: &PhysicalParameters,
) -> Trajectory {
    let dim = params.dim;
    let reference = state0.rho.clone();
    let energy0 = discrete_energy(&Snapshot::from_state(state0, dim), params).total;
    let mut stats = RunStats {
        min_dt: f64::INFINITY,
        max_dt: 0.0,
        max_closure_residual: state0.closure_residual(params),
        max_volume_residual: state0.volume_law_residual(params),
        max_abs_velocity: max_abs_velocity(state0),
        ..Default::default()
    };
    let mut snapshots = vec![Snapshot::from_state(state0, dim)];
    let finish = |snapshots: Vec<Snapshot>, state: &GridState, reason, message, stats| {
        let mut snapshots = snapshots;
        if snapshots.last().is_none_or(|s: &Snapshot| s.t != state.t) {
            snapshots.push(Snapshot::from_state(state, dim));
        }
        Trajectory {
            snapshots,
            termination: reason,
            t_end: state.t,
            message,
            stats,
        }
    };

    if let Err(e) = cfg.validate().and_then(|_| ctl.validate()) {
        return finish(
            snapshots,
            state0,
            TerminationReason::StepUnderflow,
            Some(e.to_string()),
            stats,
        );
    }

    let mut state = state0.clone();
    let mut dt_proposal = stable_dt(&state, params, ctl);
    let mut previous_error = 1e-4;
    let mut next_index = 1usize;
    while state.t < cfg.t_final {
        let target = (state0.t + next_index as f64 * cfg.snapshot_interval).min(cfg.t_final);
        let remaining = target - state.t;
        let mut dt = dt_proposal.min(stable_dt(&state, params, ctl));
        let lands = dt >= remaining * (1.0 - 1e-12);
        if lands {
            dt = remaining;
        } else if dt > 0.5 * remaining {
            // Split the remainder evenly rather than leave a sliver.
            dt = 0.5 * remaining;
        }
        let outcome = match step(&state, dt, force, params, ctl, previous_error) {
            Ok(o) => o,
            Err(e) => {
                let reason = match e {
                    Error::VacuumCollapse { .. } => TerminationReason::VacuumCollapse,
                    _ => TerminationReason::StepUnderflow,
                };
                return finish(snapshots, &state, reason, Some(e.to_string()), stats);
            }
        };
        stats.rejected_steps += outcome.rejections;
        stats.accepted_steps += 1;
        stats.min_dt = stats.min_dt.min(outcome.dt_taken);
        stats.max_dt = stats.max_dt.max(outcome.dt_taken);
        previous_error = outcome.error_norm;
        dt_proposal = outcome.dt_next;
        let landed = outcome.dt_taken == remaining;
        state = outcome.state;
        if landed {
            state.t = target;
            next_index += 1;
        }
        stats.max_closure_residual = stats
            .max_closure_residual
            .max(state.closure_residual(params));
        stats.max_volume_residual = stats
            .max_volume_residual
            .max(state.volume_law_residual(params));
        let speed = max_abs_velocity(&state);
        stats.max_abs_velocity = stats.max_abs_velocity.max(speed);

        let tripped = if !sandwich_holds(&state.rho, &reference, cfg.sandwich_factor) {
            let (cell, ratio) = worst_ratio(&state.rho, &reference);
            Some((
                TerminationReason::SandwichViolated,
                format!(
                    "rho/rho0 = {ratio:.4} at j = {cell} leaves [1/{f}, {f}]",
                    f = cfg.sandwich_factor
                ),
            ))
        } else if speed > cfg.max_velocity || !speed.is_finite() {
            Some((
                TerminationReason::VelocityBlowup,
                format!("max |u| = {speed:e} exceeds {:e}", cfg.max_velocity),
            ))
        } else {
            let energy = discrete_energy(&Snapshot::from_state(&state, dim), params).total;
            (energy > cfg.max_energy_growth * energy0).then(|| {
                (
                    TerminationReason::EnergyGrowth,
                    format!(
                        "energy {energy:e} exceeds {} E(0) = {energy0:e}",
                        cfg.max_energy_growth
                    ),
                )
            })
        };
        if let Some((reason, message)) = tripped {
            return finish(snapshots, &state, reason, Some(message), stats);
        }
        if landed {
            snapshots.push(Snapshot::from_state(&state, dim));
        }
    }
    finish(snapshots, &state, TerminationReason::Completed, None, stats)
}

/// Cell whose density ratio is furthest from 1 on a log scale.
fn worst_ratio(rho: &[f64], reference: &[f64]) -> (usize, f64) {
    rho.iter()
        .zip(reference)
        .map(|(r, r0)| r / r0)
        .enumerate()
        .fold((0, 1.0), |best, (j, q)| {
            if q.ln().abs() > best.1.ln().abs() {
                (j, q)
            } else {
                best
            }
        })
}

fn max_abs_velocity(state: &GridState) -> f64 {
    state
        .u
        .iter()
        .fold(state.u_ghost.abs(), |m, u| m.max(u.abs()))
}

//! A priori functionals evaluated on computed trajectories.
//!
//! Inequalities with explicit constants (energy, density sandwich, mass,
//! constraint residuals, finite boundary speed) give hard verdicts. The
//! remaining functionals only have generic constants; they are reported as
//! time series together with a bounded-trend flag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rho_pow, ForceModel, InitialData, PhysicalParameters};
use crate::reconstruct::{free_boundary, total_mass, Snapshot};
use crate::scheme::{residual_3_12, GridState};

/// Lagrangian mass must equal one to this absolute tolerance.
pub const LAGRANGIAN_MASS_TOL: f64 = 1e-12;
/// Eulerian quadrature mass may deviate from one by this multiple of `h`.
pub const EULERIAN_DRIFT_FACTOR: f64 = 10.0;
/// Closure and volume-law residuals after every accepted step.
pub const CONSTRAINT_TOL: f64 = 1e-12;
/// Slack on the finite-speed bound.
pub const FINITE_SPEED_TOL: f64 = 1e-8;
/// Bounded-trend rule: final value at most this multiple of the first-quarter max.
pub const TREND_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Self::Pass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// `sum_{j=0}^{N} (u_j^2 / 2 + rho_j^(gamma-1) / (gamma-1)) h`.
pub fn discrete_energy(snap: &Snapshot, params: &PhysicalParameters) -> EnergyBreakdown {
    let g = params.gamma - 1.0;
    let kinetic: f64 = snap.u.iter().map(|u| 0.5 * u * u * snap.h).sum();
    let potential: f64 = snap
        .rho
        .iter()
        .map(|&rho| rho_pow(rho, g) / g * snap.h)
        .sum();
    EnergyBreakdown {
        kinetic,
        potential,
        total: kinetic + potential,
    }
}

/// Instantaneous viscous dissipation
/// `sum_j rho_j^(theta+1) [(c2 + 2c1/n) (delta(r^(n-1)u)_j)^2
///   + 2(n-1)/n c1 (r_j^(n-1) delta u_j - u_j / (r_j rho_j))^2] h`.
pub fn dissipation_rate(snap: &Snapshot, params: &PhysicalParameters) -> f64 {
    let n = params.n();
    let (h, e) = (snap.h, n - 1.0);
    let bulk = params.c2 + 2.0 * params.c1 / n;
    let shear = 2.0 * e / n * params.c1;
    (0..=snap.cells())
        .map(|j| {
            let (r0, r1) = (snap.r[j], snap.r[j + 1]);
            let (u0, u1) = (snap.velocity(j), snap.velocity(j + 1));
            let rho = snap.rho[j];
            let div = (r1.powf(e) * u1 - r0.powf(e) * u0) / h;
            let strain = r0.powf(e) * (u1 - u0) / h - u0 / (r0 * rho);
            rho_pow(rho, params.theta + 1.0) * (bulk * div * div + shear * strain * strain) * h
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub verdict: Verdict,
    pub worst_margin: f64,
    /// `e^(t/2) (E(0) + int f~^2) - (E(t) + D(t))` per snapshot.
    pub margins: Vec<f64>,
    pub energy: Vec<f64>,
    /// Cumulative dissipation by the trapezoid rule over snapshots.
    pub dissipation: Vec<f64>,
    pub bound: Vec<f64>,
}

/// Checks `E(t) + D(t) <= e^(t/2) (E(0) + int_0^t f~(s)^2 ds)` at every snapshot.
pub fn energy_inequality_check(
    trajectory: &[Snapshot],
    force: &ForceModel,
    params: &PhysicalParameters,
) -> EnergyCheck {
    let energy: Vec<f64> = trajectory
        .iter()
        .map(|s| discrete_energy(s, params).total)
        .collect();
    let rates: Vec<f64> = trajectory
        .iter()
        .map(|s| dissipation_rate(s, params))
        .collect();
    let mut dissipation = Vec::with_capacity(trajectory.len());
    let mut forcing = Vec::with_capacity(trajectory.len());
    let (mut d_acc, mut f_acc) = (0.0, 0.0);
    for (k, snap) in trajectory.iter().enumerate() {
        if k > 0 {
            let (t0, t1) = (trajectory[k - 1].t, snap.t);
            d_acc += 0.5 * (t1 - t0) * (rates[k - 1] + rates[k]);
            f_acc += simpson(|t| force.envelope(t).powi(2), t0, t1, 16);
        }
        dissipation.push(d_acc);
        forcing.push(f_acc);
    }
    let e0 = energy.first().copied().unwrap_or(0.0);
    let bound: Vec<f64> = trajectory
        .iter()
        .zip(&forcing)
        .map(|(s, f)| (0.5 * s.t).exp() * (e0 + f))
        .collect();
    let margins: Vec<f64> = bound
        .iter()
        .zip(energy.iter().zip(&dissipation))
        .map(|(b, (e, d))| b - (e + d))
        .collect();
    let worst_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    EnergyCheck {
        verdict: Verdict::from_bool(margins.iter().all(|m| *m >= 0.0)),
        worst_margin,
        margins,
        energy,
        dissipation,
        bound,
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = 2 * intervals;
    let dx = (b - a) / m as f64;
    let interior: f64 = (1..m)
        .map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * dx))
        .sum();
    (f(a) + interior + f(b)) * dx / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichViolation {
    pub t: f64,
    pub cell: usize,
    /// `rho_i(t) / rho_i(0)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    /// `rho(0)/3 <= rho(t) <= 3 rho(0)`.
    pub loose: Verdict,
    /// `rho(0)/2 <= rho(t) <= 2 rho(0)`.
    pub tight: Verdict,
    pub first_loose_violation: Option<SandwichViolation>,
    pub first_tight_violation: Option<SandwichViolation>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

pub fn density_sandwich_check(trajectory: &[Snapshot]) -> SandwichCheck {
    let find = |factor: f64| {
        trajectory.iter().find_map(|snap| {
            snap.rho
                .iter()
                .zip(&trajectory[0].rho)
                .enumerate()
                .map(|(cell, (r, r0))| (cell, r / r0))
                .find(|(_, ratio)| *ratio < 1.0 / factor || *ratio > factor)
                .map(|(cell, ratio)| SandwichViolation {
                    t: snap.t,
                    cell,
                    ratio,
                })
        })
    };
    let (min_ratio, max_ratio) = trajectory
        .iter()
        .flat_map(|s| s.rho.iter().zip(&trajectory[0].rho).map(|(r, r0)| r / r0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let first_loose_violation = find(3.0);
    let first_tight_violation = find(2.0);
    SandwichCheck {
        loose: Verdict::from_bool(first_loose_violation.is_none()),
        tight: Verdict::from_bool(first_tight_violation.is_none()),
        first_loose_violation,
        first_tight_violation,
        min_ratio,
        max_ratio,
    }
}

/// `sum_j u_j^(2k) h` for `k = 1..=2m`.
pub fn velocity_moment_norms(snap: &Snapshot, m: u32) -> Vec<f64> {
    (1..=2 * m as i32)
        .map(|k| snap.u.iter().map(|u| u.powi(2 * k) * snap.h).sum())
        .collect()
}

/// `sum_{j=0}^{N-1} (1 - j h)^alpha0 (delta(rho^theta)_j)^2 h`.
pub fn weighted_rho_derivative_norm(snap: &Snapshot, alpha0: f64, theta: f64) -> f64 {
    let h = snap.h;
    (0..snap.cells())
        .map(|j| {
            let d = (rho_pow(snap.rho[j + 1], theta) - rho_pow(snap.rho[j], theta)) / h;
            (1.0 - j as f64 * h).max(0.0).powf(alpha0) * d * d * h
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressNorms {
    /// `max_j |rho_j^(theta+1) delta(r^(n-1)u)_j|`.
    pub stress_sup: f64,
    /// `max_j |rho_j delta(r^(n-1)u)_j|`.
    pub rho_div_sup: f64,
    /// `sum_j |rho_{j+1} - rho_j|`.
    pub total_variation: f64,
    /// `sum_j |delta u_j|^lambda0 h`.
    pub du_lambda0: f64,
}

pub fn stress_sup_norms(snap: &Snapshot, params: &PhysicalParameters, lambda0: f64) -> StressNorms {
    let e = params.n() - 1.0;
    let h = snap.h;
    let mut out = StressNorms {
        stress_sup: 0.0,
        rho_div_sup: 0.0,
        total_variation: 0.0,
        du_lambda0: 0.0,
    };
    for j in 0..=snap.cells() {
        let (u0, u1) = (snap.velocity(j), snap.velocity(j + 1));
        let div = (snap.r[j + 1].powf(e) * u1 - snap.r[j].powf(e) * u0) / h;
        let rho = snap.rho[j];
        out.stress_sup = out
            .stress_sup
            .max((rho_pow(rho, params.theta + 1.0) * div).abs());
        out.rho_div_sup = out.rho_div_sup.max((rho * div).abs());
        out.du_lambda0 += ((u1 - u0) / h).abs().powf(lambda0) * h;
    }
    out.total_variation = snap.rho.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
    out
}

/// `sum_j ((u_j(t_{k+1}) - u_j(t_k)) / dt)^2 h` for each snapshot interval.
pub fn ut_norm_fd(trajectory: &[Snapshot]) -> Vec<f64> {
    trajectory
        .windows(2)
        .map(|p| {
            let dt = p[1].t - p[0].t;
            p[0].u
                .iter()
                .zip(&p[1].u)
                .map(|(a, b)| ((b - a) / dt).powi(2) * p[0].h)
                .sum()
        })
        .collect()
}

/// Exponents `(l1, l2)` of the density weight `rho_1^l1 rho_2^l2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeights {
    pub l1: f64,
    pub l2: f64,
}

impl DistanceWeights {
    /// `l1 = 1 - theta`, `l2 = 2 theta - 4`.
    pub fn standard(theta: f64) -> Self {
        Self {
            l1: 1.0 - theta,
            l2: 2.0 * theta - 4.0,
        }
    }
}

/// `sum_j [w^2 + rho1^(1-theta) rho2^(2theta-4) (rho1-rho2)^2 + rho1^theta rho2^-1 (r1-r2)^2] h`.
pub fn weighted_distance(a: &Snapshot, b: &Snapshot, theta: f64) -> Result<f64> {
    weighted_distance_with(a, b, theta, DistanceWeights::standard(theta))
}

pub fn weighted_distance_with(
    a: &Snapshot,
    b: &Snapshot,
    theta: f64,
    weights: DistanceWeights,
) -> Result<f64> {
    if a.cells() != b.cells() {
        return Err(Error::MeshMismatch(a.cells(), b.cells()));
    }
    Ok((0..=a.cells())
        .map(|j| {
            let (r1, r2) = (a.rho[j], b.rho[j]);
            let w = a.u[j] - b.u[j];
            let dr = r1 - r2;
            let dx = a.r[j] - b.r[j];
            (w * w
                + r1.powf(weights.l1) * r2.powf(weights.l2) * dr * dr
                + r1.powf(theta) / r2 * dx * dx)
                * a.h
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GronwallFit {
    /// Smallest `C` with `D(t) <= e^(C t) D(0)` at every sample.
    Rate { rate: f64 },
    /// `D(0) = 0`: the series must stay below the tolerance.
    IdenticalInitialData { max_distance: f64, verdict: Verdict },
}

/// `max_{k>=1} ln(D(t_k) / D(0)) / t_k`, or the uniqueness verdict when
/// `D(0) = 0`.
pub fn gronwall_fit(series: &DistanceSeries, identical_tol: f64) -> Result<GronwallFit> {
    if series.values.len() < 2 || series.times.len() != series.values.len() {
        return Err(Error::InvalidProfile(
            "distance series needs at least two samples".into(),
        ));
    }
    let d0 = series.values[0];
    if d0 == 0.0 {
        let max_distance = series.values.iter().copied().fold(0.0, f64::max);
        return Ok(GronwallFit::IdenticalInitialData {
            max_distance,
            verdict: Verdict::from_bool(max_distance <= identical_tol),
        });
    }
    let rate = series
        .times
        .iter()
        .zip(&series.values)
        .skip(1)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, d)| (d / d0).ln() / t)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GronwallFit::Rate { rate })
}

/// Largest `|dr_i/dt - u_i|` over interior snapshots, with `dr/dt` from the
/// second-order three-point difference on a possibly non-uniform time grid.
/// Includes the outermost particle and its ghost velocity.
pub fn radius_velocity_drift(trajectory: &[Snapshot]) -> f64 {
    radius_velocity_drift_series(trajectory)
        .into_iter()
        .map(|(_, d)| d)
        .fold(0.0, f64::max)
}

/// Per interior snapshot time, the largest `|dr_i/dt - u_i|` over particles.
pub fn radius_velocity_drift_series(trajectory: &[Snapshot]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in trajectory.windows(3) {
        let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
        if h1 <= 0.0 || h2 <= 0.0 {
            continue;
        }
        let c0 = -h2 / (h1 * (h1 + h2));
        let c1 = (h2 - h1) / (h1 * h2);
        let c2 = h1 / (h2 * (h1 + h2));
        let worst = (0..w[1].r.len())
            .map(|i| (c0 * w[0].r[i] + c1 * w[1].r[i] + c2 * w[2].r[i] - w[1].velocity(i)).abs())
            .fold(0.0, f64::max);
        out.push((w[1].t, worst));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedCheck {
    pub verdict: Verdict,
    pub speed_bound: f64,
    /// `sup|u| t + tol - |b(t) - b(0)|` at the worst snapshot.
    pub worst_margin: f64,
}

/// `|b(t) - b(0)| <= sup|u| t + tol`; the speed bound defaults to the largest
/// velocity seen in any snapshot.
pub fn finite_speed_check(
    trajectory: &[Snapshot],
    speed_bound: Option<f64>,
    tol: f64,
) -> FiniteSpeedCheck {
    let sup = speed_bound.unwrap_or_else(|| {
        trajectory
            .iter()
            .flat_map(|s| s.u.iter().chain(std::iter::once(&s.u_ghost)))
            .fold(0.0, |m: f64, u| m.max(u.abs()))
    });
    let b0 = free_boundary(&trajectory[0]);
    let t0 = trajectory[0].t;
    let worst_margin = trajectory
        .iter()
        .map(|s| sup * (s.t - t0) + tol - (free_boundary(s) - b0).abs())
        .fold(f64::INFINITY, f64::min);
    FiniteSpeedCheck {
        verdict: Verdict::from_bool(worst_margin >= 0.0),
        speed_bound: sup,
        worst_margin,
    }
}

/// Final value at most [`TREND_FACTOR`] times the largest value in the first
/// quarter of the series.
pub fn bounded_trend(series: &[f64]) -> bool {
    let Some(last) = series.last() else {
        return true;
    };
    let quarter = (series.len() / 4).max(1);
    let early = series[..quarter]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    *last <= TREND_FACTOR * early
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub energy_bound: Vec<f64>,
    pub free_boundary: Vec<f64>,
    pub mass_lagrangian: Vec<f64>,
    pub mass_eulerian: Vec<f64>,
    pub closure_residual: Vec<f64>,
    pub volume_residual: Vec<f64>,
    pub min_density_ratio: Vec<f64>,
    pub max_density_ratio: Vec<f64>,
    /// Per snapshot, `sum u^(2k) h` for `k = 1..=2m`.
    pub velocity_moments: Vec<Vec<f64>>,
    pub weighted_rho_derivative: Vec<f64>,
    pub stress_sup: Vec<f64>,
    pub rho_div_sup: Vec<f64>,
    pub total_variation: Vec<f64>,
    pub du_lambda0: Vec<f64>,
    /// Per snapshot interval.
    pub ut_fd: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub energy_inequality: Verdict,
    pub energy_worst_margin: f64,
    pub sandwich: SandwichCheck,
    pub mass: Verdict,
    pub lagrangian_mass_error: f64,
    pub eulerian_mass_drift: f64,
    pub constraints: Verdict,
    pub finite_speed: FiniteSpeedCheck,
    pub radius_velocity_drift: f64,
    /// Name and bounded-trend flag of each generic-constant functional.
    pub bounded_diagnostics: Vec<(String, Verdict)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub verdicts: Verdicts,
    pub series: Series,
}

impl EstimateReport {
    /// AND over the hard verdicts.
    pub fn passed(&self) -> bool {
        let v = &self.verdicts;
        v.energy_inequality.passed()
            && v.sandwich.loose.passed()
            && v.mass.passed()
            && v.constraints.passed()
            && v.finite_speed.verdict.passed()
    }
}

/// Evaluates every functional on a trajectory.
pub fn audit(
    trajectory: &[Snapshot],
    params: &PhysicalParameters,
    init: &InitialData,
    force: &ForceModel,
) -> Result<EstimateReport> {
    let Some(first) = trajectory.first() else {
        return Err(Error::InvalidProfile("empty trajectory".into()));
    };
    let energy = energy_inequality_check(trajectory, force, params);
    let sandwich = density_sandwich_check(trajectory);

    let mut series = Series {
        times: trajectory.iter().map(|s| s.t).collect(),
        energy: energy.energy.clone(),
        dissipation: energy.dissipation.clone(),
        energy_bound: energy.bound.clone(),
        free_boundary: Vec::new(),
        mass_lagrangian: Vec::new(),
        mass_eulerian: Vec::new(),
        closure_residual: Vec::new(),
        volume_residual: Vec::new(),
        min_density_ratio: Vec::new(),
        max_density_ratio: Vec::new(),
        velocity_moments: Vec::new(),
        weighted_rho_derivative: Vec::new(),
        stress_sup: Vec::new(),
        rho_div_sup: Vec::new(),
        total_variation: Vec::new(),
        du_lambda0: Vec::new(),
        ut_fd: ut_norm_fd(trajectory),
    };
    for snap in trajectory {
        let state = GridState {
            t: snap.t,
            h: snap.h,
            rho: snap.rho.clone(),
            u: snap.u.clone(),
            u_ghost: snap.u_ghost,
            r: snap.r.clone(),
        };
        let mass = total_mass(snap);
        series.free_boundary.push(free_boundary(snap));
        series.mass_lagrangian.push(mass.lagrangian);
        series.mass_eulerian.push(mass.eulerian);
        let scale = rho_pow(snap.rho[snap.cells()], params.gamma).max(1.0);
        series
            .closure_residual
            .push(residual_3_12(&state, params).abs() / scale);
        series
            .volume_residual
            .push(state.volume_law_residual(params));
        let ratios = snap.rho.iter().zip(&first.rho).map(|(r, r0)| r / r0);
        series
            .min_density_ratio
            .push(ratios.clone().fold(f64::INFINITY, f64::min));
        series
            .max_density_ratio
            .push(ratios.fold(f64::NEG_INFINITY, f64::max));
        series
            .velocity_moments
            .push(velocity_moment_norms(snap, init.m));
        series
            .weighted_rho_derivative
            .push(weighted_rho_derivative_norm(
                snap,
                init.alpha0,
                params.theta,
            ));
        let norms = stress_sup_norms(snap, params, init.lambda0);
        series.stress_sup.push(norms.stress_sup);
        series.rho_div_sup.push(norms.rho_div_sup);
        series.total_variation.push(norms.total_variation);
        series.du_lambda0.push(norms.du_lambda0);
    }

    let lagrangian_mass_error = series
        .mass_lagrangian
        .iter()
        .map(|m| (m - 1.0).abs())
        .fold(0.0, f64::max);
    let eulerian_mass_drift = series
        .mass_eulerian
        .iter()
        .map(|m| (m - 1.0).abs())
        .fold(0.0, f64::max);
    let constraints_ok = series
        .closure_residual
        .iter()
        .chain(&series.volume_residual)
        .all(|r| *r <= CONSTRAINT_TOL);

    let mut bounded_diagnostics = Vec::new();
    let moments = init.m as usize * 2;
    for k in 0..moments {
        let s: Vec<f64> = series.velocity_moments.iter().map(|v| v[k]).collect();
        bounded_diagnostics.push((
            format!("velocity_moment_{}", 2 * (k + 1)),
            Verdict::from_bool(bounded_trend(&s)),
        ));
    }
    for (name, s) in [
        ("weighted_rho_derivative", &series.weighted_rho_derivative),
        ("stress_sup", &series.stress_sup),
        ("rho_div_sup", &series.rho_div_sup),
        ("total_variation", &series.total_variation),
        ("du_lambda0", &series.du_lambda0),
    ] {
        bounded_diagnostics.push((name.to_string(), Verdict::from_bool(bounded_trend(s))));
    }

    let verdicts = Verdicts {
        energy_inequality: energy.verdict,
        energy_worst_margin: energy.worst_margin,
        sandwich,
        mass: Verdict::from_bool(
            lagrangian_mass_error <= LAGRANGIAN_MASS_TOL
                && eulerian_mass_drift <= EULERIAN_DRIFT_FACTOR * first.h,
        ),
        lagrangian_mass_error,
        eulerian_mass_drift,
        constraints: Verdict::from_bool(constraints_ok),
        finite_speed: finite_speed_check(trajectory, None, FINITE_SPEED_TOL),
        radius_velocity_drift: radius_velocity_drift(trajectory),
        bounded_diagnostics,
    };
    Ok(EstimateReport { verdicts, series })
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use vacuum_ns::estimates::{
    audit, density_sandwich_check, energy_inequality_check, finite_speed_check,
    radius_velocity_drift_series, GronwallFit,
};
use vacuum_ns::integrator::{run, RunConfig, StepController, TerminationReason, Trajectory};
use vacuum_ns::model::{ForceModel, InitialData, PhysicalParameters, VelocityProfile};
use vacuum_ns::reconstruct::total_mass;
use vacuum_ns::scheme::{assemble_rhs, GridState};
use vacuum_ns::study::{convergence_from_trajectories, twin_from_trajectories};

const CELLS: usize = 64;
const ALPHA: f64 = 0.4;
const SNAPSHOTS: f64 = 40.0;

fn compliant() -> (PhysicalParameters, InitialData) {
    let params = PhysicalParameters::new(2, 1.0, 2.0, 1.0, 1.0, 0.0).unwrap();
    let init =
        InitialData::power_law(&params, ALPHA, 1.0, VelocityProfile::Polynomial(vec![])).unwrap();
    (params, init)
}

fn simulate(
    params: &PhysicalParameters,
    init: &InitialData,
    cells: usize,
    cfg: &RunConfig,
) -> Trajectory {
    let state = GridState::initial(params, init, cells).unwrap();
    run(
        &state,
        cfg,
        &StepController::default(),
        &ForceModel::Zero,
        params,
    )
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: u32, name: &str, outcome: Outcome) -> bool {
    let tag = if outcome.passed { "PASS" } else { "FAIL" };
    println!("[{tag}] {id:>2} {name}: {}", outcome.detail);
    outcome.passed
}

struct Fixture {
    params: PhysicalParameters,
    init: InitialData,
    horizon_run: Trajectory,
    horizon: f64,
    config: RunConfig,
    coarse: Trajectory,
    main: Trajectory,
    fine: Trajectory,
}

impl Fixture {
    fn build() -> Self {
        let (params, init) = compliant();
        // The empirical horizon is where the 1/3-3 band first breaks.
        let horizon_run = simulate(&params, &init, CELLS, &RunConfig::new(20.0, 0.02));
        let horizon = horizon_run.t_end;
        let t_final = horizon / 2.0;
        let config = RunConfig::new(t_final, t_final / SNAPSHOTS);
        println!(
            "compliant run: gamma=2 theta=1 c1=1 c2=0 n=2 a=1 alpha={ALPHA} N={CELLS}; horizon {horizon:.4} ({}), t_final {t_final:.4}",
            horizon_run.termination.as_str()
        );
        let coarse = simulate(&params, &init, CELLS / 2, &config);
        let main = simulate(&params, &init, CELLS, &config);
        let fine = simulate(&params, &init, CELLS * 2, &config);
        Self {
            params,
            init,
            horizon_run,
            horizon,
            config,
            coarse,
            main,
            fine,
        }
    }
}

fn closure_exactness(fx: &Fixture) -> Outcome {
    let s = &fx.main.stats;
    Outcome {
        passed: fx.main.termination == TerminationReason::Completed
            && s.max_closure_residual <= 1e-12
            && s.max_volume_residual <= 1e-12,
        detail: format!(
            "{} accepted steps, max closure residual {:.2e}, max volume-law residual {:.2e} (tol 1e-12)",
            s.accepted_steps, s.max_closure_residual, s.max_volume_residual
        ),
    }
}

fn telescoping_identity() -> Result<(), TestCaseError> {
    let strategy = (2usize..=40, 2u32..=3, 0.5f64..2.0).prop_flat_map(|(cells, dim, a)| {
        (
            Just(cells),
            Just(dim),
            Just(a),
            proptest::collection::vec(1e-3f64..10.0, cells + 1),
            proptest::collection::vec(-5.0f64..5.0, cells + 1),
        )
    });
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, |(cells, dim, a, rho, u)| {
            let params = PhysicalParameters::new(dim, a, 2.0, 1.0, 1.0, 0.5).unwrap();
            let state = GridState::new(&params, 0.0, rho, u).unwrap();
            let n = f64::from(dim);
            let div = state.divergence(&params);
            let mut partial = 0.0;
            for i in 0..=cells {
                partial += state.h * div[i];
                let u_next = if i + 1 > cells {
                    state.u_ghost
                } else {
                    state.u[i + 1]
                };
                let rhs = n * state.r[i + 1].powf(n - 1.0) * u_next;
                let scale = (0..=i + 1)
                    .map(|k| {
                        n * state.r[k].powf(n - 1.0)
                            * if k > cells { state.u_ghost } else { state.u[k] }.abs()
                    })
                    .fold(1.0, f64::max);
                prop_assert!(
                    (n * partial - rhs).abs() <= 1e-12 * scale,
                    "i={} lhs={} rhs={}",
                    i,
                    n * partial,
                    rhs
                );
            }
            Ok(())
        })
        .map_err(|e| TestCaseError::fail(e.to_string()))
}

/// Drift `|dr/dt - u|` at the interior output times of the coarsest cadence,
/// for cadences that halve the snapshot interval.
fn drift_orders() -> Vec<f64> {
    let (params, init) = compliant();
    let t_final = 0.25;
    let coarse_count = 10usize;
    let mut drifts = Vec::new();
    for factor in [1usize, 2, 4] {
        let count = coarse_count * factor;
        let traj = simulate(
            &params,
            &init,
            32,
            &RunConfig::new(t_final, t_final / count as f64),
        );
        let series = radius_velocity_drift_series(&traj.snapshots);
        let worst = series
            .iter()
            .enumerate()
            .filter(|(k, _)| (k + 1) % factor == 0)
            .map(|(_, (_, d))| *d)
            .fold(0.0, f64::max);
        drifts.push(worst);
    }
    drifts.windows(2).map(|d| (d[0] / d[1]).log2()).collect()
}

fn lemma_identities() -> Outcome {
    let identity = telescoping_identity();
    let orders = drift_orders();
    let order_ok = orders.iter().all(|p| *p >= 2.0);
    Outcome {
        passed: identity.is_ok() && order_ok,
        detail: format!(
            "telescoping identity over 1000 random states: {}; dr/dt = u drift orders under interval halving {:?} (need >= 2)",
            match &identity {
                Ok(()) => "holds to 1e-12".to_string(),
                Err(e) => format!("violated ({e})"),
            },
            orders.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>()
        ),
    }
}

fn energy_inequality(fx: &Fixture) -> Outcome {
    let check = energy_inequality_check(&fx.main.snapshots, &ForceModel::Zero, &fx.params);
    Outcome {
        passed: check.verdict.passed() && fx.main.t_end == fx.config.t_final,
        detail: format!(
            "{} snapshots up to t={:.4}, worst margin e^(t/2)E(0) - (E + D_visc) = {:.3e} (smallest for t > 0: {:.3e})",
            check.margins.len(),
            fx.main.t_end,
            check.worst_margin,
            check.margins[1..].iter().copied().fold(f64::INFINITY, f64::min)
        ),
    }
}

fn density_sandwich(fx: &Fixture) -> Outcome {
    let run = density_sandwich_check(&fx.main.snapshots);
    let long = density_sandwich_check(&fx.horizon_run.snapshots);
    let tight_horizon = long.first_tight_violation.map(|v| v.t);
    let horizon_ok = tight_horizon.is_none_or(|t| t > 0.0);
    Outcome {
        passed: run.loose.passed() && horizon_ok,
        detail: format!(
            "rho/rho0 in [{:.4}, {:.4}] on [0, t_final]; 1/2-2 band first fails at t={} (1/3-3 band at t={:.4})",
            run.min_ratio,
            run.max_ratio,
            tight_horizon.map_or("never".into(), |t| format!("{t:.4}")),
            fx.horizon
        ),
    }
}

fn mass(fx: &Fixture) -> Outcome {
    let drift = |t: &Trajectory| {
        let lag = t
            .snapshots
            .iter()
            .map(|s| (total_mass(s).lagrangian - 1.0).abs())
            .fold(0.0, f64::max);
        let eul = t
            .snapshots
            .iter()
            .map(|s| (total_mass(s).eulerian - 1.0).abs())
            .fold(0.0, f64::max);
        (lag, eul)
    };
    let (lag64, eul64) = drift(&fx.main);
    let (lag128, eul128) = drift(&fx.fine);
    let ratio = eul128 / eul64;
    let h = 1.0 / CELLS as f64;
    Outcome {
        passed: lag64.max(lag128) <= 1e-12 && eul64 <= 10.0 * h && (0.35..=0.65).contains(&ratio),
        detail: format!(
            "Lagrangian error {:.2e}; Eulerian drift {eul64:.4e} at N=64 (limit {:.4e}), {eul128:.4e} at N=128, ratio {ratio:.3} (need 0.5 +- 30%)",
            lag64.max(lag128),
            10.0 * h
        ),
    }
}

fn convergence(fx: &Fixture) -> Outcome {
    let runs = [fx.coarse.clone(), fx.main.clone(), fx.fine.clone()];
    let all_completed = runs
        .iter()
        .all(|t| t.termination == TerminationReason::Completed);
    let study = convergence_from_trajectories(&[CELLS / 2, CELLS, CELLS * 2], &runs).unwrap();
    Outcome {
        passed: all_completed && study.monotone && study.min_order() >= 0.9,
        detail: format!(
            "L2 differences {:?} (monotone: {}), observed order p = {:.3} (need >= 0.9)",
            study
                .differences
                .iter()
                .map(|e| format!("{e:.4e}"))
                .collect::<Vec<_>>(),
            study.monotone,
            study.min_order()
        ),
    }
}

fn continuous_dependence(fx: &Fixture) -> Outcome {
    let theta = fx.params.theta;
    let twin = |eps: f64| {
        let perturbed = simulate(&fx.params, &fx.init.perturbed(eps), CELLS, &fx.config);
        twin_from_trajectories(&fx.main, &perturbed, eps, theta).unwrap()
    };
    let (a, b, zero) = (twin(1e-3), twin(5e-4), twin(0.0));
    let rate = |r: &vacuum_ns::study::TwinReport| match r.fit {
        GronwallFit::Rate { rate } => Some(rate),
        _ => None,
    };
    let (Some(ca), Some(cb)) = (rate(&a), rate(&b)) else {
        return Outcome {
            passed: false,
            detail: "perturbed runs produced zero initial distance".into(),
        };
    };
    let agree = (ca - cb).abs() <= 0.5 * ca.abs().max(cb.abs());
    let shared = 0.5 * (ca + cb);
    let bounded = a.bounded_by(shared, 2.0) && b.bounded_by(shared, 2.0);
    let full_length = a.series.times.len() == fx.main.snapshots.len()
        && b.series.times.len() == a.series.times.len();
    let (identical_ok, identical_max) = match zero.fit {
        GronwallFit::IdenticalInitialData {
            max_distance,
            verdict,
        } => (verdict.passed(), max_distance),
        GronwallFit::Rate { .. } => (false, f64::NAN),
    };
    Outcome {
        passed: agree && bounded && full_length && identical_ok,
        detail: format!(
            "C(1e-3) = {ca:.4}, C(5e-4) = {cb:.4}, shared {shared:.4}; D <= 2 e^(Ct) D(0): {bounded}; eps=0 max D = {identical_max:.2e} (tol 1e-10)"
        ),
    }
}

fn finite_speed(fx: &Fixture) -> Outcome {
    let check = finite_speed_check(
        &fx.main.snapshots,
        Some(fx.main.stats.max_abs_velocity),
        1e-8,
    );
    Outcome {
        passed: check.verdict.passed(),
        detail: format!(
            "sup|u| = {:.4e}, worst margin {:.3e}",
            check.speed_bound, check.worst_margin
        ),
    }
}

/// Scalar re-implementation of the semi-discrete right-hand side, with the
/// free-boundary closure solved in its unscaled form.
#[allow(clippy::too_many_arguments)]
fn oracle_rhs(
    dim: u32,
    a: f64,
    gamma: f64,
    theta: f64,
    c1: f64,
    c2: f64,
    force: (f64, f64, f64),
    t: f64,
    rho: &[f64],
    u_nodes: &[f64],
) -> [Vec<(f64, f64)>; 2] {
    let big_n = rho.len() - 1;
    let h = 1.0 / big_n as f64;
    let n = dim as f64;
    let k = 2.0 * c1 + c2;
    let mut r = vec![a; big_n + 2];
    for i in 0..=big_n {
        r[i + 1] = (r[i].powf(n) + n * h / rho[i]).powf(1.0 / n);
    }
    let mut u = u_nodes.to_vec();
    u[0] = 0.0;
    let rn = rho[big_n];
    let const_part =
        rn.powf(gamma) + rn.powf(1.0 + theta) * k * r[big_n].powf(n - 1.0) * u[big_n] / h;
    let slope = -rn.powf(1.0 + theta) * k * r[big_n + 1].powf(n - 1.0) / h
        + 2.0 * c1 * (n - 1.0) * rn.powf(theta) / r[big_n + 1];
    u.push(-const_part / slope);
    let w: Vec<f64> = (0..=big_n + 1).map(|i| r[i].powf(n - 1.0) * u[i]).collect();
    // Each entry carries the value and the magnitude of its summands.
    let drho = (0..=big_n)
        .map(|i| {
            (
                -rho[i] * rho[i] * (w[i + 1] - w[i]) / h,
                rho[i] * rho[i] * (w[i + 1].abs() + w[i].abs()) / h,
            )
        })
        .collect();
    let sigma = |j: usize| {
        k * rho[j - 1].powf(theta + 1.0) * (w[j] - w[j - 1]) / h - rho[j - 1].powf(gamma)
    };
    let (amp, expo, freq) = force;
    let mut du = Vec::new();
    for j in 1..=big_n {
        let t1 = r[j].powf(n - 1.0) * (sigma(j + 1) - sigma(j)) / h;
        let t2 = -2.0
            * c1
            * (n - 1.0)
            * r[j].powf(n - 2.0)
            * u[j]
            * (rho[j].powf(theta) - rho[j - 1].powf(theta))
            / h;
        let t3 = amp * (a / r[j]).powf(expo) * (freq * t).cos();
        let pieces =
            r[j].powf(n - 1.0) * (sigma(j + 1).abs() + sigma(j).abs()) / h + t2.abs() + t3.abs();
        du.push((t1 + t2 + t3, pieces));
    }
    [drho, du]
}

fn oracle_equivalence() -> Outcome {
    let strategy = (
        2u32..=3,
        0.5f64..2.0,
        (1.2f64..3.0, 0.2f64..1.0),
        (0.1f64..2.0, 0.0f64..1.0),
        (-1.0f64..1.0, 0.0f64..3.0, 0.0f64..5.0, 0.0f64..2.0),
        proptest::collection::vec(0.05f64..2.0, 9),
        proptest::collection::vec(-1.0f64..1.0, 9),
    );
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(
        &strategy,
        |(dim, a, (gamma, theta_frac), (c1, c2), (amp, expo, freq, t), rho, u)| {
            let theta = theta_frac * (gamma - 1.0).min(1.0);
            let params = PhysicalParameters::new(dim, a, gamma, theta, c1, c2).unwrap();
            let force = ForceModel::Radial {
                amplitude: amp,
                exponent: expo,
                frequency: freq,
            };
            let state = GridState::new(&params, t, rho.clone(), u.clone()).unwrap();
            let rhs = assemble_rhs(&state, &force, &params).unwrap();
            let [drho, du] =
                oracle_rhs(dim, a, gamma, theta, c1, c2, (amp, expo, freq), t, &rho, &u);
            prop_assert_eq!(rhs.drho.len(), drho.len());
            prop_assert_eq!(rhs.du.len(), du.len());
            for (x, (y, scale)) in rhs.drho.iter().chain(&rhs.du).zip(drho.iter().chain(&du)) {
                let rel = (x - y).abs() / scale.max(f64::MIN_POSITIVE);
                worst.set(worst.get().max(rel));
                prop_assert!(rel <= 1e-13, "{} vs {} (scale {})", x, y, scale);
            }
            Ok(())
        },
    );
    Outcome {
        passed: result.is_ok(),
        detail: match result {
            Ok(()) => format!(
                "500 random N=8 states, worst relative deviation {:.2e} (tol 1e-13)",
                worst.get()
            ),
            Err(e) => format!("mismatch: {e}"),
        },
    }
}

fn diagnostic_boundedness(fx: &Fixture) -> Outcome {
    let report = audit(&fx.main.snapshots, &fx.params, &fx.init, &ForceModel::Zero).unwrap();
    let failing: Vec<&str> = report
        .verdicts
        .bounded_diagnostics
        .iter()
        .filter(|(_, v)| !v.passed())
        .map(|(name, _)| name.as_str())
        .collect();
    Outcome {
        passed: failing.is_empty(),
        detail: format!(
            "{} functionals checked, final <= 3 x first-quarter max; failing: {:?}",
            report.verdicts.bounded_diagnostics.len(),
            failing
        ),
    }
}

fn main() -> ExitCode {
    let fx = Fixture::build();
    let results = [
        report(1, "boundary-closure exactness", closure_exactness(&fx)),
        report(2, "discrete identities", lemma_identities()),
        report(3, "energy inequality", energy_inequality(&fx)),
        report(4, "density sandwich", density_sandwich(&fx)),
        report(5, "mass", mass(&fx)),
        report(6, "convergence", convergence(&fx)),
        report(7, "continuous dependence", continuous_dependence(&fx)),
        report(8, "finite-speed boundary", finite_speed(&fx)),
        report(9, "oracle equivalence", oracle_equivalence()),
        report(10, "diagnostic boundedness", diagnostic_boundedness(&fx)),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

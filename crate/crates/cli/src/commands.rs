//! The four modes. Each returns the process exit status.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;
use thiserror::Error;

use vacuum_ns::estimates::{audit, EstimateReport, GronwallFit, Verdict};
use vacuum_ns::integrator::{RunStats, TerminationReason, Trajectory};
use vacuum_ns::study::{convergence_from_trajectories, twin_from_trajectories, Setup};

use crate::config::{Mode, RunSpec};
use crate::output::{self, number, OutputError, Report};

/// Stable exit-status contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Failure = 1,
    /// A physics guard tripped or a hard verdict failed.
    Guard = 2,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}")]
    Core(#[from] vacuum_ns::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("audit mode needs a snapshot file: set [output] snapshots or pass --snapshots")]
    NoSnapshots,
}

/// Where to write and how chatty to be.
#[derive(Clone, Debug)]
pub struct Options {
    pub out_dir: PathBuf,
    pub quiet: bool,
}

#[derive(Serialize)]
struct Params<'a> {
    mode: Mode,
    physics: &'a vacuum_ns::PhysicalParameters,
    initial: &'a vacuum_ns::InitialData,
    force: &'a vacuum_ns::ForceModel,
    cells: usize,
    refinements: &'a Option<Vec<usize>>,
    perturbation: Option<f64>,
    seed: Option<u64>,
    run: &'a vacuum_ns::RunConfig,
    controller: &'a vacuum_ns::StepController,
    validation: &'a vacuum_ns::ValidationReport,
    warnings: &'a [String],
}

fn params(spec: &RunSpec) -> Params<'_> {
    Params {
        mode: spec.mode,
        physics: &spec.params,
        initial: &spec.init,
        force: &spec.force,
        cells: spec.cells,
        refinements: &spec.refinements,
        perturbation: spec.perturbation,
        seed: spec.seed,
        run: &spec.run,
        controller: &spec.controller,
        validation: &spec.validation,
        warnings: &spec.warnings,
    }
}

#[derive(Serialize)]
struct Termination<'a> {
    reason: TerminationReason,
    t_end: f64,
    message: &'a Option<String>,
    stats: &'a RunStats,
}

fn termination(traj: &Trajectory) -> Termination<'_> {
    Termination {
        reason: traj.termination,
        t_end: traj.t_end,
        message: &traj.message,
        stats: &traj.stats,
    }
}

fn setup(spec: &RunSpec) -> Setup {
    Setup {
        params: spec.params.clone(),
        force: spec.force.clone(),
        config: spec.run.clone(),
        controller: spec.controller.clone(),
    }
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn say(opts: &Options, line: impl AsRef<str>) {
    if !opts.quiet {
        println!("{}", line.as_ref());
    }
}

pub fn execute(spec: &RunSpec, opts: &Options) -> Result<Status, CliError> {
    for w in &spec.warnings {
        eprintln!("warning: {w}");
    }
    prepare(&opts.out_dir)?;
    match spec.mode {
        Mode::Run => cmd_run(spec, opts),
        Mode::Converge => cmd_converge(spec, opts),
        Mode::Perturb => cmd_perturb(spec, opts),
        Mode::Audit => cmd_audit(spec, opts),
    }
}

fn summarize(opts: &Options, report: &EstimateReport) {
    let v = &report.verdicts;
    say(
        opts,
        format!(
            "energy inequality: {:?}; sandwich 1/3-3: {:?}, 1/2-2: {:?}; mass: {:?}; constraints: {:?}; finite speed: {:?}",
            v.energy_inequality, v.sandwich.loose, v.sandwich.tight, v.mass, v.constraints, v.finite_speed.verdict
        ),
    );
}

pub fn cmd_run(spec: &RunSpec, opts: &Options) -> Result<Status, CliError> {
    let traj = setup(spec).run(&spec.init, spec.cells)?;
    let file = output::create(&opts.out_dir.join("snapshots.csv"))?;
    output::write_snapshots(BufWriter::new(file), &traj.snapshots)?;
    let report = audit(&traj.snapshots, &spec.params, &spec.init, &spec.force)?;
    output::write_json(
        &opts.out_dir.join("report.json"),
        &Report {
            params: params(spec),
            verdicts: &report.verdicts,
            series: &report.series,
            termination: termination(&traj),
        },
    )?;
    say(
        opts,
        format!(
            "{} at t={} after {} steps ({} rejected), {} snapshots",
            traj.termination.as_str(),
            traj.t_end,
            traj.stats.accepted_steps,
            traj.stats.rejected_steps,
            traj.snapshots.len()
        ),
    );
    summarize(opts, &report);
    Ok(if traj.termination == TerminationReason::Completed {
        Status::Success
    } else {
        Status::Guard
    })
}

pub fn cmd_audit(spec: &RunSpec, opts: &Options) -> Result<Status, CliError> {
    let path = spec.snapshots.as_ref().ok_or(CliError::NoSnapshots)?;
    let file = fs::File::open(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let snapshots = output::read_snapshots(std::io::BufReader::new(file), spec.params.dim)?;
    let report = audit(&snapshots, &spec.params, &spec.init, &spec.force)?;
    output::write_json(
        &opts.out_dir.join("report.json"),
        &Report {
            params: params(spec),
            verdicts: &report.verdicts,
            series: &report.series,
            termination: None::<()>,
        },
    )?;
    say(
        opts,
        format!(
            "audited {} snapshots from {}",
            snapshots.len(),
            path.display()
        ),
    );
    summarize(opts, &report);
    Ok(if report.passed() {
        Status::Success
    } else {
        Status::Guard
    })
}

#[derive(Serialize)]
struct MeshTermination {
    cells: usize,
    reason: TerminationReason,
    t_end: f64,
}

pub fn cmd_converge(spec: &RunSpec, opts: &Options) -> Result<Status, CliError> {
    let meshes = spec.refinements.clone().unwrap_or_default();
    let setup = &setup(spec);
    let init = &spec.init;
    let runs: Vec<Trajectory> = thread::scope(|s| {
        let handles: Vec<_> = meshes
            .iter()
            .map(|&n| s.spawn(move || setup.run(init, n)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sub-run panicked"))
            .collect::<Result<_, _>>()
    })?;
    let study = convergence_from_trajectories(&meshes, &runs)?;

    let mut w = csv::Writer::from_writer(output::create(&opts.out_dir.join("convergence.csv"))?);
    w.write_record(["coarse", "fine", "l2_difference", "order"])
        .map_err(OutputError::from)?;
    for (k, e) in study.differences.iter().enumerate() {
        let order = if k > 0 {
            number(study.orders[k - 1])
        } else {
            String::new()
        };
        w.write_record([
            meshes[k].to_string(),
            meshes[k + 1].to_string(),
            number(*e),
            order,
        ])
        .map_err(OutputError::from)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: "convergence.csv".into(),
        source,
    })?;

    let completed = runs
        .iter()
        .all(|t| t.termination == TerminationReason::Completed);
    #[derive(Serialize)]
    struct Verdicts {
        monotone: Verdict,
        min_order: f64,
        all_completed: Verdict,
    }
    output::write_json(
        &opts.out_dir.join("report.json"),
        &Report {
            params: params(spec),
            verdicts: Verdicts {
                monotone: Verdict::from_bool(study.monotone),
                min_order: study.min_order(),
                all_completed: Verdict::from_bool(completed),
            },
            series: &study,
            termination: meshes
                .iter()
                .zip(&runs)
                .map(|(&cells, t)| MeshTermination {
                    cells,
                    reason: t.termination,
                    t_end: t.t_end,
                })
                .collect::<Vec<_>>(),
        },
    )?;
    say(opts, "coarse  fine  l2_difference");
    for (k, e) in study.differences.iter().enumerate() {
        say(
            opts,
            format!("{:>6} {:>5}  {e:.6e}", meshes[k], meshes[k + 1]),
        );
    }
    if !study.orders.is_empty() {
        say(opts, format!("observed orders: {:?}", study.orders));
    }
    Ok(if completed && study.monotone {
        Status::Success
    } else {
        Status::Guard
    })
}

pub fn cmd_perturb(spec: &RunSpec, opts: &Options) -> Result<Status, CliError> {
    let eps = spec.perturbation.unwrap_or(0.0);
    let setup = setup(spec);
    let perturbed_init = spec.init.perturbed(eps);
    let (base, perturbed) = thread::scope(|s| {
        let a = s.spawn(|| setup.run(&spec.init, spec.cells));
        let b = s.spawn(|| setup.run(&perturbed_init, spec.cells));
        (
            a.join().expect("sub-run panicked"),
            b.join().expect("sub-run panicked"),
        )
    });
    let (base, perturbed) = (base?, perturbed?);
    let twin = twin_from_trajectories(&base, &perturbed, eps, spec.params.theta)?;

    let mut w = csv::Writer::from_writer(output::create(&opts.out_dir.join("distance.csv"))?);
    w.write_record(["t", "distance"])
        .map_err(OutputError::from)?;
    for (t, d) in twin.series.times.iter().zip(&twin.series.values) {
        w.write_record([number(*t), number(*d)])
            .map_err(OutputError::from)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: "distance.csv".into(),
        source,
    })?;

    let completed = base.termination == TerminationReason::Completed
        && perturbed.termination == TerminationReason::Completed;
    let identical_ok = match twin.fit {
        GronwallFit::IdenticalInitialData { verdict, .. } => verdict.passed(),
        GronwallFit::Rate { .. } => true,
    };
    #[derive(Serialize)]
    struct Verdicts<'a> {
        fit: &'a GronwallFit,
        epsilon: f64,
        all_completed: Verdict,
    }
    #[derive(Serialize)]
    struct Pair<'a> {
        base: Termination<'a>,
        perturbed: Termination<'a>,
    }
    output::write_json(
        &opts.out_dir.join("report.json"),
        &Report {
            params: params(spec),
            verdicts: Verdicts {
                fit: &twin.fit,
                epsilon: eps,
                all_completed: Verdict::from_bool(completed),
            },
            series: &twin.series,
            termination: Pair {
                base: termination(&base),
                perturbed: termination(&perturbed),
            },
        },
    )?;
    match twin.fit {
        GronwallFit::Rate { rate } => say(opts, format!("epsilon {eps}: fitted rate C = {rate}")),
        GronwallFit::IdenticalInitialData {
            max_distance,
            verdict,
        } => say(
            opts,
            format!("epsilon 0: max distance {max_distance:e} ({verdict:?})"),
        ),
    }
    Ok(if completed && identical_ok {
        Status::Success
    } else {
        Status::Guard
    })
}

//! INI run configuration.
//!
//! Layout: an optional `mode` key before the first section, then the
//! sections `[physics]`, `[initial]`, `[force]`, `[mesh]`, `[integrator]`
//! and `[output]`. See `config/template.ini` for every key.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;

use ini::{Ini, ParseOption};
use serde::Serialize;
use thiserror::Error;

use vacuum_ns::integrator::{RunConfig, StepController};
use vacuum_ns::model::{
    derived_exponents, validate_assumptions, DensityProfile, ForceModel, InitialData,
    PhysicalParameters, Table, ValidationReport, VelocityProfile,
};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key `{key}` in [{section}]")]
    DuplicateKey { section: String, key: String },
    #[error("missing required key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("[{section}] {key} = {value:?}: expected {expected}")]
    TypeMismatch {
        section: String,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("assumption check failed in {mode} mode: {failures}")]
    Assumptions {
        mode: &'static str,
        failures: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Run,
    Converge,
    Perturb,
    Audit,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Converge => "converge",
            Self::Perturb => "perturb",
            Self::Audit => "audit",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "run" => Ok(Self::Run),
            "converge" => Ok(Self::Converge),
            "perturb" => Ok(Self::Perturb),
            "audit" => Ok(Self::Audit),
            other => Err(format!(
                "unknown mode `{other}` (run, converge, perturb, audit)"
            )),
        }
    }
}

/// Fully parsed and validated configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunSpec {
    pub mode: Mode,
    pub params: PhysicalParameters,
    pub init: InitialData,
    pub force: ForceModel,
    pub run: RunConfig,
    pub controller: StepController,
    pub cells: usize,
    pub refinements: Option<Vec<usize>>,
    pub perturbation: Option<f64>,
    /// Recorded in reports; the perturbation shapes are deterministic.
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// Snapshot file read in audit mode.
    pub snapshots: Option<PathBuf>,
    pub validation: ValidationReport,
    pub warnings: Vec<String>,
}

const SECTIONS: [(&str, &[&str]); 7] = [
    ("", &["mode"]),
    (
        "physics",
        &["dim", "core_radius", "gamma", "theta", "c1", "c2"],
    ),
    (
        "initial",
        &[
            "alpha",
            "density",
            "density_coefficient",
            "density_table_x",
            "density_table_values",
            "lower_bound",
            "upper_bound",
            "velocity_polynomial",
            "velocity_table_x",
            "velocity_table_values",
            "alpha0",
            "lambda0",
            "m",
            "perturbation",
            "seed",
        ],
    ),
    (
        "force",
        &["kind", "value", "amplitude", "exponent", "frequency"],
    ),
    ("mesh", &["cells", "refinements"]),
    (
        "integrator",
        &[
            "t_final",
            "snapshot_interval",
            "rel_tol",
            "abs_tol",
            "dt_min",
            "dt_max",
            "safety",
            "cfl",
            "pi_beta",
            "sandwich_factor",
            "max_velocity",
            "max_energy_growth",
        ],
    ),
    ("output", &["dir", "snapshots"]),
];

struct Document {
    values: BTreeMap<(String, String), String>,
}

impl Document {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let opt = ParseOption {
            enabled_quote: false,
            enabled_escape: false,
            ..ParseOption::default()
        };
        let ini =
            Ini::load_from_str_opt(text, opt).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let known: BTreeMap<&str, BTreeSet<&str>> = SECTIONS
            .iter()
            .map(|(s, keys)| (*s, keys.iter().copied().collect()))
            .collect();
        let mut values = BTreeMap::new();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("").trim();
            let keys = known
                .get(section)
                .ok_or_else(|| ConfigError::UnknownSection(section.to_string()))?;
            for (key, value) in props.iter() {
                let key = key.trim();
                if !keys.contains(key) {
                    return Err(ConfigError::UnknownKey {
                        section: section.into(),
                        key: key.into(),
                    });
                }
                let slot = (section.to_string(), key.to_string());
                if values.insert(slot, value.trim().to_string()).is_some() {
                    return Err(ConfigError::DuplicateKey {
                        section: section.into(),
                        key: key.into(),
                    });
                }
            }
        }
        Ok(Self { values })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
    }

    fn get<T: FromStr>(
        &self,
        section: &str,
        key: &str,
        expected: &'static str,
    ) -> Result<Option<T>, ConfigError> {
        self.raw(section, key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::TypeMismatch {
                    section: section.into(),
                    key: key.into(),
                    value: v.into(),
                    expected,
                })
            })
            .transpose()
    }

    fn real(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(section, key, "a real number")
    }

    fn require_real(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.real(section, key)?
            .ok_or_else(|| missing(section, key))
    }

    fn list<T: FromStr>(
        &self,
        section: &str,
        key: &str,
        expected: &'static str,
    ) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.raw(section, key) else {
            return Ok(None);
        };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| {
                item.trim().parse().map_err(|_| ConfigError::TypeMismatch {
                    section: section.into(),
                    key: key.into(),
                    value: v.into(),
                    expected,
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }
}

fn missing(section: &str, key: &str) -> ConfigError {
    ConfigError::MissingKey {
        section: section.into(),
        key: key.into(),
    }
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

/// Parses a configuration. `mode` overrides the file's `mode` key.
pub fn parse_config(text: &str, mode: Option<Mode>) -> Result<RunSpec, ConfigError> {
    let doc = Document::parse(text)?;
    let mode = match mode {
        Some(m) => m,
        None => doc
            .get::<Mode>("", "mode", "one of run, converge, perturb, audit")?
            .unwrap_or(Mode::Run),
    };

    let params = PhysicalParameters::new(
        doc.get("physics", "dim", "an integer")?
            .ok_or_else(|| missing("physics", "dim"))?,
        doc.real("physics", "core_radius")?.unwrap_or(1.0),
        doc.require_real("physics", "gamma")?,
        doc.require_real("physics", "theta")?,
        doc.require_real("physics", "c1")?,
        doc.require_real("physics", "c2")?,
    )
    .map_err(invalid)?;

    let init = parse_initial(&doc, &params)?;
    let force = parse_force(&doc)?;

    let cells: usize = doc
        .get("mesh", "cells", "a positive integer")?
        .unwrap_or(64);
    if cells < 2 {
        return Err(ConfigError::Invalid(format!(
            "[mesh] cells = {cells}: need at least 2"
        )));
    }
    let refinements: Option<Vec<usize>> =
        doc.list("mesh", "refinements", "a comma-separated list of integers")?;

    let t_final = doc.require_real("integrator", "t_final")?;
    let default_interval = if t_final > 0.0 { t_final / 20.0 } else { 1.0 };
    let mut run = RunConfig::new(
        t_final,
        doc.real("integrator", "snapshot_interval")?
            .unwrap_or(default_interval),
    );
    if let Some(v) = doc.real("integrator", "sandwich_factor")? {
        run.sandwich_factor = v;
    }
    if let Some(v) = doc.real("integrator", "max_velocity")? {
        run.max_velocity = v;
    }
    if let Some(v) = doc.real("integrator", "max_energy_growth")? {
        run.max_energy_growth = v;
    }
    run.validate().map_err(invalid)?;

    let mut controller = StepController::default();
    for (key, slot) in [
        ("rel_tol", &mut controller.rel_tol),
        ("abs_tol", &mut controller.abs_tol),
        ("dt_min", &mut controller.dt_min),
        ("dt_max", &mut controller.dt_max),
        ("safety", &mut controller.safety),
        ("cfl", &mut controller.cfl_parabolic),
        ("pi_beta", &mut controller.beta),
    ] {
        if let Some(v) = doc.real("integrator", key)? {
            *slot = v;
        }
    }
    controller.validate().map_err(invalid)?;

    let perturbation = doc.real("initial", "perturbation")?;
    let seed = doc.get("initial", "seed", "a non-negative integer")?;
    match mode {
        Mode::Converge => {
            let list = refinements
                .as_ref()
                .ok_or_else(|| missing("mesh", "refinements"))?;
            if list.len() < 2 || list.iter().any(|n| *n < 2) {
                return Err(ConfigError::Invalid(
                    "[mesh] refinements needs at least two meshes of 2+ cells".into(),
                ));
            }
        }
        Mode::Perturb => {
            perturbation.ok_or_else(|| missing("initial", "perturbation"))?;
        }
        Mode::Run | Mode::Audit => {}
    }

    let validation = validate_assumptions(&params, &init);
    let mut warnings: Vec<String> = validation
        .failures()
        .map(|c| {
            format!(
                "{}: {} {} {} does not hold",
                c.name, c.lhs, c.relation, c.rhs
            )
        })
        .collect();
    if matches!(mode, Mode::Converge | Mode::Perturb) && !warnings.is_empty() {
        return Err(ConfigError::Assumptions {
            mode: mode.as_str(),
            failures: warnings.join("; "),
        });
    }
    warnings.extend(
        validation
            .integrability
            .iter()
            .filter(|c| c.status != vacuum_ns::model::Integrability::Finite)
            .map(|c| {
                format!(
                    "{} may diverge ({} vs {} at half resolution)",
                    c.name, c.value, c.coarse_value
                )
            }),
    );
    if !force.envelope_holds(params.core_radius, t_final.max(1e-12)) {
        warnings.push("force exceeds its envelope on the sampled grid".into());
    }

    Ok(RunSpec {
        mode,
        params,
        init,
        force,
        run,
        controller,
        cells,
        refinements,
        perturbation,
        seed,
        output_dir: doc.raw("output", "dir").unwrap_or("out").into(),
        snapshots: doc.raw("output", "snapshots").map(PathBuf::from),
        validation,
        warnings,
    })
}

fn parse_initial(doc: &Document, params: &PhysicalParameters) -> Result<InitialData, ConfigError> {
    let alpha = doc.require_real("initial", "alpha")?;
    let table = |xk: &str, vk: &str| -> Result<Table, ConfigError> {
        let x = doc
            .list("initial", xk, "a comma-separated list of reals")?
            .ok_or_else(|| missing("initial", xk))?;
        let y = doc
            .list("initial", vk, "a comma-separated list of reals")?
            .ok_or_else(|| missing("initial", vk))?;
        Table::new(x, y).map_err(invalid)
    };

    let (rho0, default_bounds) = match doc.raw("initial", "density").unwrap_or("power-law") {
        "power-law" => {
            let c = doc.real("initial", "density_coefficient")?.unwrap_or(1.0);
            (
                DensityProfile::PowerLaw {
                    coefficient: c,
                    exponent: alpha,
                },
                Some(c),
            )
        }
        "table" => (
            DensityProfile::Table(table("density_table_x", "density_table_values")?),
            None,
        ),
        other => {
            return Err(ConfigError::TypeMismatch {
                section: "initial".into(),
                key: "density".into(),
                value: other.into(),
                expected: "power-law or table",
            })
        }
    };
    let bound = |key: &str| {
        doc.real("initial", key)?
            .or(default_bounds)
            .ok_or_else(|| missing("initial", key))
    };
    let (lower, upper) = (bound("lower_bound")?, bound("upper_bound")?);

    let u0 = if doc.raw("initial", "velocity_table_x").is_some()
        || doc.raw("initial", "velocity_table_values").is_some()
    {
        if doc.raw("initial", "velocity_polynomial").is_some() {
            return Err(ConfigError::Invalid(
                "[initial] give either velocity_polynomial or a velocity table, not both".into(),
            ));
        }
        VelocityProfile::Table(table("velocity_table_x", "velocity_table_values")?)
    } else {
        VelocityProfile::Polynomial(
            doc.list(
                "initial",
                "velocity_polynomial",
                "a comma-separated list of reals",
            )?
            .unwrap_or_default(),
        )
    };

    let m: Option<u32> = doc.get("initial", "m", "a positive integer")?;
    let (alpha0, lambda0) = (
        doc.real("initial", "alpha0")?,
        doc.real("initial", "lambda0")?,
    );
    let (alpha0, lambda0, m) = match (alpha0, lambda0, m) {
        (Some(a0), Some(l0), Some(m)) => (a0, l0, m),
        _ => {
            let derived = derived_exponents(params, alpha, m).map_err(|e| {
                ConfigError::Invalid(format!(
                    "cannot derive default exponents ({e}); set alpha0, lambda0 and m"
                ))
            })?;
            (
                alpha0.unwrap_or(derived.alpha0_default),
                lambda0.unwrap_or(derived.lambda0_default),
                derived.m,
            )
        }
    };
    Ok(InitialData {
        alpha,
        lower,
        upper,
        alpha0,
        lambda0,
        m,
        rho0,
        u0,
        rho_bump: 0.0,
        u_sine: 0.0,
    })
}

fn parse_force(doc: &Document) -> Result<ForceModel, ConfigError> {
    let real = |key: &str| doc.require_real("force", key);
    let force = match doc.raw("force", "kind").unwrap_or("zero") {
        "zero" => ForceModel::Zero,
        "constant" => ForceModel::Constant {
            value: real("value")?,
        },
        "radial" => ForceModel::Radial {
            amplitude: real("amplitude")?,
            exponent: doc.real("force", "exponent")?.unwrap_or(0.0),
            frequency: doc.real("force", "frequency")?.unwrap_or(0.0),
        },
        other => {
            return Err(ConfigError::TypeMismatch {
                section: "force".into(),
                key: "kind".into(),
                value: other.into(),
                expected: "zero, constant or radial",
            })
        }
    };
    if let ForceModel::Radial { exponent, .. } = force {
        if exponent < 0.0 {
            return Err(ConfigError::Invalid(
                "[force] exponent must be non-negative".into(),
            ));
        }
    }
    Ok(force)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = "\
[physics]
dim = 2
gamma = 2
theta = 1
c1 = 1
c2 = 0

[initial]
alpha = 0.4

[integrator]
t_final = 0.1
";

    #[test]
    fn minimal_config_fills_defaults() {
        let spec = parse_config(MINIMAL, None).unwrap();
        assert_eq!(spec.mode, Mode::Run);
        assert_eq!(spec.cells, 64);
        assert_eq!(spec.params.core_radius, 1.0);
        assert_eq!(spec.force, ForceModel::Zero);
        assert_eq!(spec.run.snapshot_interval, 0.1 / 20.0);
        assert_eq!(spec.output_dir, PathBuf::from("out"));
        assert!(spec.validation.passed());
        assert!(spec.warnings.is_empty(), "{:?}", spec.warnings);
    }

    #[test]
    fn template_parses() {
        let spec = parse_config(include_str!("../config/template.ini"), None).unwrap();
        assert!(spec.validation.passed());
    }

    #[test]
    fn gamma_below_one_cites_structural_assumption() {
        let text = MINIMAL.replace("gamma = 2", "gamma = 0.9");
        let err = parse_config(&text, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(A1) γ>1"), "{msg}");
    }

    #[test]
    fn converge_needs_refinements() {
        let text = format!("mode = converge\n{MINIMAL}");
        assert_eq!(
            parse_config(&text, None).unwrap_err(),
            ConfigError::MissingKey {
                section: "mesh".into(),
                key: "refinements".into()
            }
        );
        let ok = format!("{text}\n[mesh]\nrefinements = 8, 16, 32\n");
        assert_eq!(
            parse_config(&ok, None).unwrap().refinements,
            Some(vec![8, 16, 32])
        );
    }

    #[test]
    fn perturb_needs_amplitude_seed_optional() {
        assert_eq!(
            parse_config(MINIMAL, Some(Mode::Perturb)).unwrap_err(),
            ConfigError::MissingKey {
                section: "initial".into(),
                key: "perturbation".into()
            }
        );
        let text = MINIMAL.replace("alpha = 0.4", "alpha = 0.4\nperturbation = 1e-3\nseed = 7");
        let spec = parse_config(&text, Some(Mode::Perturb)).unwrap();
        assert_eq!((spec.perturbation, spec.seed), (Some(1e-3), Some(7)));
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        let text = MINIMAL.replace("c2 = 0", "c2 = 0\nc3 = 1");
        assert!(matches!(
            parse_config(&text, None),
            Err(ConfigError::UnknownKey { .. })
        ));
        let text = format!("{MINIMAL}\n[solver]\nx = 1\n");
        assert!(matches!(
            parse_config(&text, None),
            Err(ConfigError::UnknownSection(_))
        ));
        let text = MINIMAL.replace("c2 = 0", "c2 = 0\nc2 = 1");
        assert!(matches!(
            parse_config(&text, None),
            Err(ConfigError::DuplicateKey { .. })
        ));
    }

    #[test]
    fn type_mismatch_and_missing_key() {
        let text = MINIMAL.replace("theta = 1", "theta = one");
        assert!(matches!(
            parse_config(&text, None),
            Err(ConfigError::TypeMismatch { .. })
        ));
        let text = MINIMAL.replace("c1 = 1\n", "");
        assert_eq!(
            parse_config(&text, None).unwrap_err(),
            ConfigError::MissingKey {
                section: "physics".into(),
                key: "c1".into()
            }
        );
    }

    #[test]
    fn assumption_failures_warn_or_fail_by_mode() {
        // alpha = 0.2 is below 1/(2 gamma) = 0.25.
        let text = MINIMAL.replace("alpha = 0.4", "alpha = 0.2\nperturbation = 0");
        let spec = parse_config(&text, Some(Mode::Run)).unwrap();
        assert!(spec
            .warnings
            .iter()
            .any(|w| w.contains("alpha lower bound")));
        assert!(matches!(
            parse_config(&text, Some(Mode::Perturb)),
            Err(ConfigError::Assumptions { .. })
        ));
    }

    #[test]
    fn tables_and_forces() {
        let text = MINIMAL.replace(
            "alpha = 0.4",
            "alpha = 0.4\ndensity = table\ndensity_table_x = 0, 0.5, 1\ndensity_table_values = 1, 0.7, 0\n\
             lower_bound = 0.5\nupper_bound = 1.5\nvelocity_table_x = 0, 1\nvelocity_table_values = 0, 0.1",
        ) + "\n[force]\nkind = radial\namplitude = 0.1\nexponent = 2\nfrequency = 3 # inline comment\n";
        let spec = parse_config(&text, None).unwrap();
        assert!(matches!(spec.init.rho0, DensityProfile::Table(_)));
        assert!(matches!(spec.init.u0, VelocityProfile::Table(_)));
        assert_eq!(
            spec.force,
            ForceModel::Radial {
                amplitude: 0.1,
                exponent: 2.0,
                frequency: 3.0
            }
        );
        let missing_bound = MINIMAL.replace(
            "alpha = 0.4",
            "alpha = 0.4\ndensity = table\ndensity_table_x = 0, 1\ndensity_table_values = 1, 0",
        );
        assert!(matches!(
            parse_config(&missing_bound, None),
            Err(ConfigError::MissingKey { .. })
        ));
    }
}

//! Fluid constants, constitutive laws, initial-data families, the external
//! force and admissibility checks on all of them.
//!
//! The gas is polytropic with unit pressure constant, `P = rho^gamma`, and the
//! viscosity coefficients degenerate with the density,
//! `mu = c1 rho^theta`, `lambda = c2 rho^theta`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densities below this are treated as vacuum when raised to a power.
pub const RHO_UNDERFLOW: f64 = 1e-300;

/// `rho^k` for `rho >= 0`, mapping the underflow region to zero for positive
/// `k` (so that `mu(0) = lambda(0) = P(0) = 0`).
#[inline]
pub fn rho_pow(rho: f64, k: f64) -> f64 {
    if rho < RHO_UNDERFLOW {
        if k > 0.0 {
            0.0
        } else if k == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        rho.powf(k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParameters {
    /// Spatial dimension `n`.
    pub dim: u32,
    /// Radius `a` of the solid core.
    pub core_radius: f64,
    pub gamma: f64,
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PhysicalParameters {
    /// Builds a parameter set, rejecting anything outside (A1).
    pub fn new(
        dim: u32,
        core_radius: f64,
        gamma: f64,
        theta: f64,
        c1: f64,
        c2: f64,
    ) -> Result<Self> {
        let params = Self {
            dim,
            core_radius,
            gamma,
            theta,
            c1,
            c2,
        };
        let failures: Vec<String> = params
            .structural_checks()
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        if failures.is_empty() {
            Ok(params)
        } else {
            Err(Error::InvalidParameters(failures.join("; ")))
        }
    }

    pub fn n(&self) -> f64 {
        f64::from(self.dim)
    }

    /// Coefficient `2 c1 + c2` of the normal viscous stress.
    pub fn bulk(&self) -> f64 {
        2.0 * self.c1 + self.c2
    }

    /// `beta = 2 c1 theta (n - 1) / (2 c1 + c2)`.
    pub fn beta(&self) -> f64 {
        2.0 * self.c1 * self.theta * (self.n() - 1.0) / self.bulk()
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(rho_pow(rho, self.gamma))
    }

    pub fn viscosity_mu(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.c1 * rho_pow(rho, self.theta))
    }

    pub fn viscosity_lambda(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.c2 * rho_pow(rho, self.theta))
    }

    fn structural_checks(&self) -> Vec<Check> {
        let n = self.n();
        vec![
            Check::new("(A1) n≥2", n, ">=", 2.0, self.dim >= 2),
            Check::new(
                "core radius a>0",
                self.core_radius,
                ">",
                0.0,
                self.core_radius > 0.0,
            ),
            Check::new("(A1) c1>0", self.c1, ">", 0.0, self.c1 > 0.0),
            Check::new(
                "(A1) 2c1+n·c2>0",
                2.0 * self.c1 + n * self.c2,
                ">",
                0.0,
                2.0 * self.c1 + n * self.c2 > 0.0,
            ),
            Check::new("(A1) θ>0", self.theta, ">", 0.0, self.theta > 0.0),
            Check::new(
                "(A1) θ<γ",
                self.theta,
                "<",
                self.gamma,
                self.theta < self.gamma,
            ),
            Check::new("(A1) γ>1", self.gamma, ">", 1.0, self.gamma > 1.0),
        ]
    }
}

fn check_density(rho: f64) -> Result<()> {
    if rho < 0.0 || rho.is_nan() {
        Err(Error::NegativeDensity(rho))
    } else {
        Ok(())
    }
}

/// Piecewise-linear table on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Table {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidProfile(
                "table needs at least two (x, value) pairs".into(),
            ));
        }
        if x[0] != 0.0 || x[x.len() - 1] != 1.0 {
            return Err(Error::InvalidProfile(
                "table must span exactly [0, 1]".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile(
                "table abscissae must increase strictly".into(),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("table values must be finite".into()));
        }
        Ok(Self { x, y })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.x.partition_point(|&xi| xi <= x);
        k.clamp(1, self.x.len() - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let s = (x - self.x[k]) / (self.x[k + 1] - self.x[k]);
        self.y[k] + s * (self.y[k + 1] - self.y[k])
    }

    pub fn slope(&self, x: f64) -> f64 {
        let k = self.segment(x);
        (self.y[k + 1] - self.y[k]) / (self.x[k + 1] - self.x[k])
    }

    /// Mean of `g(x) * table(x)` over `[lo, hi]` for a cubic-or-lower `g`,
    /// exact via four-point Gauss-Legendre on every linear piece.
    fn weighted_average(&self, lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.x.len() - 1 {
            let a = self.x[k].max(lo);
            let b = self.x[k + 1].min(hi);
            if b > a {
                total += gauss_legendre4(a, b, |x| g(x) * self.eval(x));
            }
        }
        total / (hi - lo)
    }
}

fn gauss_legendre4(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const NODES: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const WEIGHTS: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (node, weight) in NODES.iter().zip(WEIGHTS.iter()) {
        sum += weight * (f(mid - half * node) + f(mid + half * node));
    }
    sum * half
}

/// Initial density in mass coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DensityProfile {
    /// `coefficient * (1 - x)^exponent`.
    PowerLaw {
        coefficient: f64,
        exponent: f64,
    },
    Table(Table),
}

impl DensityProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::PowerLaw {
                coefficient,
                exponent,
            } => coefficient * (1.0 - x).max(0.0).powf(*exponent),
            Self::Table(t) => t.eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::PowerLaw {
                coefficient,
                exponent,
            } => -coefficient * exponent * (1.0 - x).max(0.0).powf(exponent - 1.0),
            Self::Table(t) => t.slope(x),
        }
    }
}

/// Initial velocity in mass coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VelocityProfile {
    /// `sum_k coeffs[k] * x^k`.
    Polynomial(Vec<f64>),
    Table(Table),
}

impl VelocityProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ck| acc * x + ck),
            Self::Table(t) => t.eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, ck)| acc * x + k as f64 * ck),
            Self::Table(t) => t.slope(x),
        }
    }

    fn average(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Self::Polynomial(c) => {
                let antiderivative = |x: f64| {
                    c.iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (k, ck)| acc * x + ck / (k as f64 + 1.0))
                        * x
                };
                (antiderivative(hi) - antiderivative(lo)) / (hi - lo)
            }
            Self::Table(t) => t.weighted_average(lo, hi, |_| 1.0),
        }
    }
}

/// Exponents and profiles of the initial state.
///
/// `rho_bump` and `u_sine` carry the perturbations used by twin runs:
/// `rho0 -> rho0 * (1 + rho_bump * x (1 - x))` and
/// `u0 -> u0 + u_sine * sin(pi x)`. Both vanish where the boundary conditions
/// require it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub alpha: f64,
    /// Lower profile constant `A` in `A (1-x)^alpha <= rho0`.
    pub lower: f64,
    /// Upper profile constant `B` in `rho0 <= B (1-x)^alpha`.
    pub upper: f64,
    pub alpha0: f64,
    pub lambda0: f64,
    pub m: u32,
    pub rho0: DensityProfile,
    pub u0: VelocityProfile,
    #[serde(default)]
    pub rho_bump: f64,
    #[serde(default)]
    pub u_sine: f64,
}

impl InitialData {
    /// `rho0 = coefficient * (1-x)^alpha` with the auxiliary exponents set to
    /// the midpoints of their windows and `m` to its smallest admissible value.
    pub fn power_law(
        params: &PhysicalParameters,
        alpha: f64,
        coefficient: f64,
        u0: VelocityProfile,
    ) -> Result<Self> {
        let derived = derived_exponents(params, alpha, None)?;
        Ok(Self {
            alpha,
            lower: coefficient,
            upper: coefficient,
            alpha0: derived.alpha0_default,
            lambda0: derived.lambda0_default,
            m: derived.m,
            rho0: DensityProfile::PowerLaw {
                coefficient,
                exponent: alpha,
            },
            u0,
            rho_bump: 0.0,
            u_sine: 0.0,
        })
    }

    /// Copy with both twin-run perturbations set to `eps`.
    pub fn perturbed(&self, eps: f64) -> Self {
        Self {
            rho_bump: eps,
            u_sine: eps,
            ..self.clone()
        }
    }

    pub fn rho0(&self, x: f64) -> f64 {
        self.rho0.eval(x) * (1.0 + self.rho_bump * x * (1.0 - x))
    }

    pub fn rho0_derivative(&self, x: f64) -> f64 {
        let bump = 1.0 + self.rho_bump * x * (1.0 - x);
        self.rho0.derivative(x) * bump + self.rho0.eval(x) * self.rho_bump * (1.0 - 2.0 * x)
    }

    pub fn u0(&self, x: f64) -> f64 {
        self.u0.eval(x) + self.u_sine * (PI * x).sin()
    }

    pub fn u0_derivative(&self, x: f64) -> f64 {
        self.u0.derivative(x) + self.u_sine * PI * (PI * x).cos()
    }

    /// Exact mean of `rho0` over `[lo, hi]`.
    pub fn rho0_cell_average(&self, lo: f64, hi: f64) -> f64 {
        let eps = self.rho_bump;
        match &self.rho0 {
            DensityProfile::PowerLaw {
                coefficient,
                exponent,
            } => {
                // In y = 1 - x the integrand is c y^p (1 + eps (y - y^2)).
                let p = *exponent;
                let anti = |y: f64| {
                    let y = y.max(0.0);
                    y.powf(p + 1.0) / (p + 1.0)
                        + eps * (y.powf(p + 2.0) / (p + 2.0) - y.powf(p + 3.0) / (p + 3.0))
                };
                coefficient * (anti(1.0 - lo) - anti(1.0 - hi)) / (hi - lo)
            }
            DensityProfile::Table(t) => t.weighted_average(lo, hi, |x| 1.0 + eps * x * (1.0 - x)),
        }
    }

    /// Exact mean of `u0` over `[lo, hi]`.
    pub fn u0_cell_average(&self, lo: f64, hi: f64) -> f64 {
        let width = hi - lo;
        // cos(pi lo) - cos(pi hi) written without cancellation.
        let sine_mean =
            2.0 * (0.5 * PI * (lo + hi)).sin() * (0.5 * PI * width).sin() / (PI * width);
        self.u0.average(lo, hi) + self.u_sine * sine_mean
    }

    /// Initial free-boundary radius `(a^n + n int_0^1 1/rho0)^(1/n)`,
    /// by midpoint quadrature on `samples` cells.
    pub fn initial_boundary_radius(&self, params: &PhysicalParameters, samples: usize) -> f64 {
        let n = params.n();
        let dx = 1.0 / samples as f64;
        let volume: f64 = (0..samples)
            .map(|k| dx / self.rho0((k as f64 + 0.5) * dx))
            .sum();
        (params.core_radius.powf(n) + n * volume).powf(1.0 / n)
    }
}

/// Spherically symmetric external force `f(r, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ForceModel {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * (a / r)^exponent * cos(frequency * t)` with `exponent >= 0`.
    Radial {
        amplitude: f64,
        exponent: f64,
        frequency: f64,
    },
}

impl ForceModel {
    pub fn eval(&self, core_radius: f64, r: f64, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { value } => value,
            Self::Radial {
                amplitude,
                exponent,
                frequency,
            } => amplitude * (core_radius / r).powf(exponent) * (frequency * t).cos(),
        }
    }

    /// Envelope `f~(t) >= |f(r, t)|` for every `r >= a`.
    pub fn envelope(&self, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { value } => value.abs(),
            Self::Radial {
                amplitude,
                frequency,
                ..
            } => (amplitude * (frequency * t).cos()).abs(),
        }
    }

    /// Spot-checks `|f(r, t)| <= f~(t)` on a grid of `r in [a, 10 a]`,
    /// `t in [0, t_max]`.
    pub fn envelope_holds(&self, core_radius: f64, t_max: f64) -> bool {
        if let Self::Radial { exponent, .. } = self {
            if *exponent < 0.0 {
                return false;
            }
        }
        (0..=32).all(|i| {
            let t = t_max * i as f64 / 32.0;
            let bound = self.envelope(t) * (1.0 + 1e-12);
            (0..=32).all(|k| {
                let r = core_radius * (1.0 + 9.0 * k as f64 / 32.0);
                self.eval(core_radius, r, t).abs() <= bound
            })
        })
    }
}

/// One named inequality with its evaluated sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub relation: String,
    pub rhs: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, lhs: f64, relation: &str, rhs: f64, passed: bool) -> Self {
        Self {
            name: name.into(),
            lhs,
            relation: relation.into(),
            rhs,
            passed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrability {
    Finite,
    SuspectDivergent,
}

/// Numerical integrability flag for one of the (A3) conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityCheck {
    pub name: String,
    /// Quadrature at the full sample count.
    pub value: f64,
    /// Quadrature at half the sample count.
    pub coarse_value: f64,
    pub status: Integrability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub integrability: Vec<IntegrabilityCheck>,
}

impl ValidationReport {
    /// AND over the inequality checks; integrability flags are advisory.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const QUADRATURE_SAMPLES: usize = 10_000;

/// Evaluates every inequality of (A1), the alpha window, the profile sandwich,
/// the alpha0 / lambda0 windows and the lower bound on `m`. Invalid data gives
/// failing entries; this never errors.
pub fn validate_assumptions(params: &PhysicalParameters, init: &InitialData) -> ValidationReport {
    let mut checks = params.structural_checks();
    let (gamma, theta, alpha) = (params.gamma, params.theta, init.alpha);

    let alpha_low = 1.0 / (2.0 * gamma);
    let alpha_high = (3.0 / (4.0 * theta)).min(1.0 / (theta + 1.0));
    checks.push(Check::new(
        "alpha lower bound",
        alpha,
        ">",
        alpha_low,
        alpha > alpha_low,
    ));
    checks.push(Check::new(
        "alpha upper bound",
        alpha,
        "<",
        alpha_high,
        alpha < alpha_high,
    ));
    checks.push(Check::new(
        "alpha<1",
        alpha,
        "<",
        1.0,
        alpha > 0.0 && alpha < 1.0,
    ));
    let drift = alpha * (theta - 1.0);
    checks.push(Check::new(
        "alpha(theta-1)<1/2",
        drift,
        "<",
        0.5,
        drift < 0.5,
    ));

    checks.push(Check::new("A>0", init.lower, ">", 0.0, init.lower > 0.0));
    checks.push(Check::new(
        "A<=B ordering",
        init.lower,
        "<=",
        init.upper,
        init.lower <= init.upper,
    ));
    let (min_ratio, max_ratio) = (0..QUADRATURE_SAMPLES)
        .map(|k| {
            let x = k as f64 / QUADRATURE_SAMPLES as f64;
            init.rho0(x) / (1.0 - x).powf(alpha)
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let slack = 1.0 + 1e-12;
    checks.push(Check::new(
        "profile lower bound A(1-x)^alpha<=rho0",
        init.lower,
        "<=",
        min_ratio,
        init.lower <= min_ratio * slack,
    ));
    checks.push(Check::new(
        "profile upper bound rho0<=B(1-x)^alpha",
        max_ratio,
        "<=",
        init.upper,
        max_ratio <= init.upper * slack,
    ));

    let a0_low = 1.0 - 2.0 * alpha * theta;
    let a0_high = 1.0f64.min(1.0 + 2.0 * alpha - 2.0 * alpha * theta);
    checks.push(Check::new(
        "alpha0 lower bound",
        init.alpha0,
        ">",
        a0_low,
        init.alpha0 > a0_low,
    ));
    checks.push(Check::new(
        "alpha0 upper bound",
        init.alpha0,
        "<",
        a0_high,
        init.alpha0 < a0_high,
    ));

    let m = f64::from(init.m);
    let m_bound = m_lower_bound(alpha, theta);
    checks.push(Check::new("m lower bound", m, ">", m_bound, m > m_bound));

    let l0_high = (4.0 * m / (4.0 * m * alpha + 1.0)).min(1.0 / (alpha * (1.0 + theta)));
    checks.push(Check::new(
        "lambda0 lower bound",
        init.lambda0,
        ">",
        1.0,
        init.lambda0 > 1.0,
    ));
    checks.push(Check::new(
        "lambda0 upper bound",
        init.lambda0,
        "<",
        l0_high,
        init.lambda0 < l0_high,
    ));

    let integrability = if params.structural_checks().iter().all(|c| c.passed) {
        integrability_checks(params, init)
    } else {
        Vec::new()
    };
    ValidationReport {
        checks,
        integrability,
    }
}

fn m_lower_bound(alpha: f64, theta: f64) -> f64 {
    [
        1.0 / (1.0 + alpha * theta - alpha),
        1.0 / (2.0 * (1.0 - theta * alpha)),
        1.0 / (4.0 - 4.0 * alpha),
        2.0,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

fn integrability_checks(
    params: &PhysicalParameters,
    init: &InitialData,
) -> Vec<IntegrabilityCheck> {
    let (gamma, theta) = (params.gamma, params.theta);
    let flag = |name: &str, integrand: &dyn Fn(usize) -> Vec<f64>| {
        let fine = integrand(QUADRATURE_SAMPLES);
        let coarse = integrand(QUADRATURE_SAMPLES / 2);
        let value = fine.iter().sum::<f64>() / fine.len() as f64;
        let coarse_value = coarse.iter().sum::<f64>() / coarse.len() as f64;
        let settled = value.is_finite()
            && coarse_value.is_finite()
            && (value - coarse_value).abs() <= 0.1 * value.abs().max(1e-300);
        IntegrabilityCheck {
            name: name.into(),
            value,
            coarse_value,
            status: if settled || (value == 0.0 && coarse_value == 0.0) {
                Integrability::Finite
            } else {
                Integrability::SuspectDivergent
            },
        }
    };
    let midpoints = |samples: usize| (0..samples).map(move |k| (k as f64 + 0.5) / samples as f64);

    vec![
        flag("(A3) u0 in L^inf", &|s| {
            let sup = midpoints(s).map(|x| init.u0(x).abs()).fold(0.0, f64::max);
            vec![sup; 1]
        }),
        flag("(A3) rho0^(1+theta) (u0_x)^2 in L^1", &|s| {
            midpoints(s)
                .map(|x| init.rho0(x).powf(1.0 + theta) * init.u0_derivative(x).powi(2))
                .collect()
        }),
        flag("(A3) (rho0^gamma)_x in L^2", &|s| {
            midpoints(s)
                .map(|x| (gamma * init.rho0(x).powf(gamma - 1.0) * init.rho0_derivative(x)).powi(2))
                .collect()
        }),
        flag("(A3) (1-x)^alpha0 ((rho0^theta)_x)^2 in L^1", &|s| {
            midpoints(s)
                .map(|x| {
                    (1.0 - x).powf(init.alpha0)
                        * (theta * init.rho0(x).powf(theta - 1.0) * init.rho0_derivative(x)).powi(2)
                })
                .collect()
        }),
        flag("(A3) initial viscous flux balance in L^2", &|s| {
            flux_balance_squared(params, init, s)
        }),
    ]
}

/// Pointwise square of
/// `((2c1+c2) rho0^(theta+1) (r0^(n-1) u0)_x)_x - 2 c1 (n-1) u0/r0 (rho0^theta)_x`
/// on `samples` midpoints, differentiating the flux by centered differences.
fn flux_balance_squared(
    params: &PhysicalParameters,
    init: &InitialData,
    samples: usize,
) -> Vec<f64> {
    let n = params.n();
    let dx = 1.0 / samples as f64;
    let xs: Vec<f64> = (0..samples).map(|k| (k as f64 + 0.5) * dx).collect();
    // r0^n at midpoints by cumulative midpoint sums of 1/rho0 on a half-step grid.
    let mut volume = 0.0;
    let mut radius = Vec::with_capacity(samples);
    for &x in &xs {
        volume += 0.5 * dx / init.rho0(x - 0.25 * dx);
        radius.push((params.core_radius.powf(n) + n * volume).powf(1.0 / n));
        volume += 0.5 * dx / init.rho0(x + 0.25 * dx);
    }
    let flux: Vec<f64> = xs
        .iter()
        .zip(&radius)
        .map(|(&x, &r)| {
            let rho = init.rho0(x);
            let div = (n - 1.0) * init.u0(x) / (r * rho) + r.powf(n - 1.0) * init.u0_derivative(x);
            params.bulk() * rho.powf(params.theta + 1.0) * div
        })
        .collect();
    (0..samples)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(samples - 1));
            let flux_x = (flux[hi] - flux[lo]) / (xs[hi] - xs[lo]);
            let x = xs[k];
            let rho = init.rho0(x);
            let rho_theta_x = params.theta * rho.powf(params.theta - 1.0) * init.rho0_derivative(x);
            let curvature = 2.0 * params.c1 * (n - 1.0) * init.u0(x) / radius[k] * rho_theta_x;
            (flux_x - curvature).powi(2)
        })
        .collect()
}

/// Open windows and defaults derived from the exponent constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub beta: f64,
    pub alpha0_window: (f64, f64),
    pub lambda0_window: (f64, f64),
    /// Smallest admissible integer `m`.
    pub m_min: u32,
    /// The `m` the `lambda0` window was computed for.
    pub m: u32,
    pub alpha0_default: f64,
    pub lambda0_default: f64,
}

/// `beta`, the `alpha0` and `lambda0` windows and the minimal `m`.
/// `m` defaults to `m_min`.
pub fn derived_exponents(
    params: &PhysicalParameters,
    alpha: f64,
    m: Option<u32>,
) -> Result<DerivedExponents> {
    let theta = params.theta;
    let m_min = m_lower_bound(alpha, theta).floor() as u32 + 1;
    let m = m.unwrap_or(m_min);
    let mf = f64::from(m);

    let alpha0_window = (
        1.0 - 2.0 * alpha * theta,
        1.0f64.min(1.0 + 2.0 * alpha - 2.0 * alpha * theta),
    );
    let lambda0_window = (
        1.0,
        (4.0 * mf / (4.0 * mf * alpha + 1.0)).min(1.0 / (alpha * (1.0 + theta))),
    );
    if !(alpha0_window.0 < alpha0_window.1) {
        return Err(Error::InconsistentExponents(format!(
            "alpha0 window ({}, {}) is empty",
            alpha0_window.0, alpha0_window.1
        )));
    }
    if !(lambda0_window.0 < lambda0_window.1) {
        return Err(Error::InconsistentExponents(format!(
            "lambda0 window ({}, {}) is empty for m = {m}",
            lambda0_window.0, lambda0_window.1
        )));
    }
    Ok(DerivedExponents {
        beta: params.beta(),
        alpha0_window,
        lambda0_window,
        m_min,
        m,
        alpha0_default: 0.5 * (alpha0_window.0 + alpha0_window.1),
        lambda0_default: 0.5 * (lambda0_window.0 + lambda0_window.1),
    })
}

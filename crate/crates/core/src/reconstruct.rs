//! Reconstructions of the nodal solution in mass coordinates, sampling in
//! physical radius, the free boundary and mass accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::GridState;

/// Immutable copy of a grid state at one output time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// Spatial dimension, needed to interpolate `r^n`.
    pub dim: u32,
    pub h: f64,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub u_ghost: f64,
    pub r: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(state: &GridState, dim: u32) -> Self {
        Self {
            t: state.t,
            dim,
            h: state.h,
            rho: state.rho.clone(),
            u: state.u.clone(),
            u_ghost: state.u_ghost,
            r: state.r.clone(),
        }
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.rho.len() - 1
    }

    /// Velocity at node `j` for `j = 0..=N+1`.
    pub fn velocity(&self, j: usize) -> f64 {
        if j == self.cells() + 1 {
            self.u_ghost
        } else {
            self.u[j]
        }
    }
}

/// Density, velocity and radius at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub rho: f64,
    pub u: f64,
    pub r: f64,
}

fn check_domain(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutsideDomain(x))
    }
}

/// Piecewise-linear reconstruction; the radius interpolates `r^n` and takes
/// the n-th root.
pub fn piecewise_linear_eval(snap: &Snapshot, x: f64) -> Result<Reconstruction> {
    check_domain(x)?;
    let cells = snap.cells();
    let scaled = x * cells as f64;
    let j = (scaled.floor() as usize).min(cells);
    if j == cells {
        return Ok(Reconstruction {
            rho: snap.rho[cells],
            u: snap.u[cells],
            r: snap.r[cells],
        });
    }
    let s = scaled - j as f64;
    let n = f64::from(snap.dim);
    let lerp = |a: f64, b: f64| a + s * (b - a);
    Ok(Reconstruction {
        rho: lerp(snap.rho[j], snap.rho[j + 1]),
        u: lerp(snap.u[j], snap.u[j + 1]),
        r: lerp(snap.r[j].powf(n), snap.r[j + 1].powf(n)).powf(1.0 / n),
    })
}

/// Cell index holding `x` under the half-open `(j h, (j+1) h]` convention,
/// with `x = 0` assigned to cell 0.
pub fn step_cell(cells: usize, x: f64) -> usize {
    let scaled = x * cells as f64;
    (scaled.ceil() as usize).saturating_sub(1).min(cells - 1)
}

/// Step-function reconstruction.
pub fn step_eval(snap: &Snapshot, x: f64) -> Result<Reconstruction> {
    check_domain(x)?;
    let j = step_cell(snap.cells(), x);
    Ok(Reconstruction {
        rho: snap.rho[j],
        u: snap.u[j],
        r: snap.r[j],
    })
}

/// Radius-density-velocity triple in physical space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerianSample {
    pub r: f64,
    pub rho: f64,
    pub u: f64,
}

/// `count` samples at uniformly spaced mass coordinates `x in [0, 1]`.
pub fn eulerian_profile(snap: &Snapshot, count: usize) -> Vec<EulerianSample> {
    let count = count.max(2);
    (0..count)
        .map(|k| {
            let x = k as f64 / (count - 1) as f64;
            let rec = piecewise_linear_eval(snap, x).expect("x in [0, 1]");
            EulerianSample {
                r: rec.r,
                rho: rec.rho,
                u: rec.u,
            }
        })
        .collect()
}

/// Radius of the outermost particle `r_{N+1}`.
pub fn free_boundary(snap: &Snapshot) -> f64 {
    snap.r[snap.cells() + 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    /// `sum_{j<N} rho_j (r_{j+1}^n - r_j^n) / n`, which the volume law makes
    /// equal to `N h = 1`.
    pub lagrangian: f64,
    /// Trapezoid rule for `int r^(n-1) rho dr` over the nodes `0..=N`.
    pub eulerian: f64,
}

pub fn total_mass(snap: &Snapshot) -> MassReport {
    let n = f64::from(snap.dim);
    let cells = snap.cells();
    let lagrangian = (0..cells)
        .map(|j| snap.rho[j] * (snap.r[j + 1].powf(n) - snap.r[j].powf(n)) / n)
        .sum();
    let density = |j: usize| snap.r[j].powf(n - 1.0) * snap.rho[j];
    let eulerian = (0..cells)
        .map(|j| 0.5 * (snap.r[j + 1] - snap.r[j]) * (density(j) + density(j + 1)))
        .sum();
    MassReport {
        lagrangian,
        eulerian,
    }
}

/// Trapezoid rule for `int r^(n-1) rho dr` over a sampled profile.
pub fn profile_mass(profile: &[EulerianSample], dim: u32) -> f64 {
    let e = f64::from(dim) - 1.0;
    profile
        .windows(2)
        .map(|p| 0.5 * (p[1].r - p[0].r) * (p[0].r.powf(e) * p[0].rho + p[1].r.powf(e) * p[1].rho))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialData, PhysicalParameters, VelocityProfile};
    use approx::assert_relative_eq;

    fn params() -> PhysicalParameters {
        PhysicalParameters::new(2, 1.0, 2.0, 1.0, 1.0, 0.0).unwrap()
    }

    fn radii_example() -> Snapshot {
        let state = GridState::new(&params(), 0.0, vec![1.0; 3], vec![0.0, 0.2, 0.5]).unwrap();
        Snapshot::from_state(&state, 2)
    }

    #[test]
    fn nodes_are_reproduced() {
        let snap = radii_example();
        for j in 0..=2 {
            let rec = piecewise_linear_eval(&snap, j as f64 * 0.5).unwrap();
            assert_eq!(rec.rho, snap.rho[j]);
            assert_eq!(rec.u, snap.u[j]);
            assert_relative_eq!(rec.r, snap.r[j], max_relative = 1e-15);
        }
    }

    #[test]
    fn radius_interpolates_volume() {
        let snap = radii_example();
        let rec = piecewise_linear_eval(&snap, 0.25).unwrap();
        assert_relative_eq!(rec.r, 1.5f64.sqrt(), max_relative = 1e-15);
        assert!(piecewise_linear_eval(&snap, 1.1).is_err());
        assert!(piecewise_linear_eval(&snap, -0.1).is_err());
    }

    #[test]
    fn constant_data_constant_reconstruction() {
        let mut snap = radii_example();
        snap.u = vec![0.3; 3];
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            let rec = piecewise_linear_eval(&snap, x).unwrap();
            assert_eq!(rec.rho, 1.0);
            assert_relative_eq!(rec.u, 0.3, max_relative = 1e-15);
        }
    }

    #[test]
    fn step_bracket_convention() {
        let snap = radii_example();
        assert_eq!(step_eval(&snap, 0.5).unwrap().u, snap.u[0]);
        assert_eq!(step_eval(&snap, 0.5 + 1e-12).unwrap().u, snap.u[1]);
        assert_eq!(step_eval(&snap, 0.0).unwrap().u, snap.u[0]);
        assert_eq!(step_eval(&snap, 1.0).unwrap().u, snap.u[1]);
        // Just right of a node the step value is the left node of the cell,
        // which is where the linear reconstruction starts.
        let x = 0.5 + 1e-14;
        let lin = piecewise_linear_eval(&snap, 0.5).unwrap();
        assert_eq!(step_eval(&snap, x).unwrap().u, lin.u);
    }

    #[test]
    fn eulerian_endpoints_and_flatness() {
        let snap = radii_example();
        let prof = eulerian_profile(&snap, 2);
        assert_eq!(prof[0].r, 1.0);
        assert_eq!(prof[0].u, 0.0);
        assert_relative_eq!(prof[1].r, snap.r[2], max_relative = 1e-15);
        let prof = eulerian_profile(&snap, 50);
        assert!(prof.iter().all(|s| s.rho == 1.0));
        assert!(prof.windows(2).all(|p| p[1].r > p[0].r));
    }

    #[test]
    fn boundary_and_mass_of_radii_example() {
        let snap = radii_example();
        assert_relative_eq!(free_boundary(&snap), 2.0, max_relative = 1e-15);
        let mass = total_mass(&snap);
        assert_relative_eq!(mass.lagrangian, 1.0, max_relative = 1e-14);
        assert_relative_eq!(mass.eulerian, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn initial_boundary_matches_quadrature() {
        let p = params();
        let init =
            InitialData::power_law(&p, 0.4, 1.0, VelocityProfile::Polynomial(vec![])).unwrap();
        // b(0)^2 = 1 + 2 int (1-x)^-0.4 = 1 + 2 / 0.6.
        let exact = (1.0 + 2.0 / 0.6f64).sqrt();
        let mut previous = f64::INFINITY;
        // The error changes sign near N = 32; monotone from there on.
        for cells in [128, 256, 512, 1024] {
            let snap = Snapshot::from_state(&GridState::initial(&p, &init, cells).unwrap(), 2);
            let err = (free_boundary(&snap) - exact).abs();
            assert!(err < previous);
            previous = err;
        }
        assert!(previous < 2e-3);
        assert_relative_eq!(
            init.initial_boundary_radius(&p, 1_000_000),
            exact,
            max_relative = 1e-3
        );
    }

    #[test]
    fn eulerian_mass_converges() {
        let p = params();
        let init =
            InitialData::power_law(&p, 0.4, 1.0, VelocityProfile::Polynomial(vec![])).unwrap();
        let mut previous = f64::INFINITY;
        for cells in [16, 32, 64, 128] {
            let snap = Snapshot::from_state(&GridState::initial(&p, &init, cells).unwrap(), 2);
            let mass = total_mass(&snap);
            assert_relative_eq!(mass.lagrangian, 1.0, max_relative = 1e-13);
            let err = (mass.eulerian - 1.0).abs();
            assert!(err < previous, "{cells}: {err}");
            previous = err;
            let profile = eulerian_profile(&snap, 4 * cells + 1);
            let sampled = profile_mass(&profile, 2);
            assert!((sampled - 1.0).abs() < 2.0 / cells as f64);
        }
    }
}

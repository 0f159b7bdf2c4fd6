//! Space-discrete Lagrangian scheme.
//!
//! The mesh has `N` cells of mass `h = 1/N`. Densities `rho_0..rho_N` and
//! velocities `u_0..u_N` live on the nodes `x_j = j h`, radii `r_0..r_{N+1}`
//! on particle positions, with `u_0 = 0` and `r_0 = a` fixed. The outermost
//! velocity `u_{N+1}` is a ghost fixed by the zero-stress closure at the
//! vacuum interface. Only `rho` and `u_1..u_N` evolve in time; radii come
//! from the algebraic volume law and the ghost from the closure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rho_pow, ForceModel, InitialData, PhysicalParameters};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub t: f64,
    /// Mesh width, always `1 / N`.
    pub h: f64,
    /// `rho_0..rho_N`.
    pub rho: Vec<f64>,
    /// `u_0..u_N`, with `u_0 = 0`.
    pub u: Vec<f64>,
    /// `u_{N+1}`.
    pub u_ghost: f64,
    /// `r_0..r_{N+1}`.
    pub r: Vec<f64>,
}

/// Time derivatives of the evolving unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct RhsVector {
    /// `d rho_i / dt` for `i = 0..=N`.
    pub drho: Vec<f64>,
    /// `d u_j / dt` for `j = 1..=N`.
    pub du: Vec<f64>,
}

impl GridState {
    /// Builds a consistent state from densities and velocities on the nodes:
    /// radii from the volume law, ghost velocity from the closure. `u[0]` is
    /// overwritten with the core condition.
    pub fn new(
        params: &PhysicalParameters,
        t: f64,
        rho: Vec<f64>,
        mut u: Vec<f64>,
    ) -> Result<Self> {
        if rho.len() < 2 || rho.len() != u.len() {
            return Err(Error::InvalidProfile(format!(
                "need N+1 >= 2 densities and as many velocities, got {} and {}",
                rho.len(),
                u.len()
            )));
        }
        u[0] = 0.0;
        let r = recompute_radii(&rho, params)?;
        let mut state = Self {
            t,
            h: 1.0 / (rho.len() - 1) as f64,
            rho,
            u,
            u_ghost: 0.0,
            r,
        };
        state.u_ghost = close_boundary(&state, params)?;
        Ok(state)
    }

    /// Cell-average initialisation: node `j >= 1` takes the mean of the
    /// profile over `((j-1) h, j h)` and node 0 duplicates node 1.
    pub fn initial(params: &PhysicalParameters, init: &InitialData, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidProfile("mesh needs at least one cell".into()));
        }
        let h = 1.0 / cells as f64;
        let mut rho = vec![0.0; cells + 1];
        let mut u = vec![0.0; cells + 1];
        for j in 1..=cells {
            let (lo, hi) = (
                (j - 1) as f64 * h,
                if j == cells { 1.0 } else { j as f64 * h },
            );
            rho[j] = init.rho0_cell_average(lo, hi);
            u[j] = init.u0_cell_average(lo, hi);
        }
        rho[0] = rho[1];
        Self::new(params, 0.0, rho, u)
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.rho.len() - 1
    }

    /// Evolving unknowns `(rho_0..rho_N, u_1..u_N)`.
    pub fn unknowns(&self) -> Vec<f64> {
        let mut y = self.rho.clone();
        y.extend_from_slice(&self.u[1..]);
        y
    }

    /// Inverse of [`GridState::unknowns`].
    pub fn from_unknowns(params: &PhysicalParameters, t: f64, y: &[f64]) -> Result<Self> {
        let cells = (y.len() - 1) / 2;
        let rho = y[..=cells].to_vec();
        let mut u = Vec::with_capacity(cells + 1);
        u.push(0.0);
        u.extend_from_slice(&y[cells + 1..]);
        Self::new(params, t, rho, u)
    }

    /// `w_i = r_i^(n-1) u_i` for `i = 0..=N+1`.
    pub fn momentum_flux(&self, params: &PhysicalParameters) -> Vec<f64> {
        let e = params.n() - 1.0;
        self.u
            .iter()
            .chain(std::iter::once(&self.u_ghost))
            .zip(&self.r)
            .map(|(u, r)| r.powf(e) * u)
            .collect()
    }

    /// `delta(r^(n-1) u)_i` for `i = 0..=N`; the last entry uses the ghost.
    pub fn divergence(&self, params: &PhysicalParameters) -> Vec<f64> {
        let w = self.momentum_flux(params);
        w.windows(2).map(|p| (p[1] - p[0]) / self.h).collect()
    }

    /// Largest relative defect of the volume law over all radii.
    pub fn volume_law_residual(&self, params: &PhysicalParameters) -> f64 {
        let n = params.n();
        let mut volume = params.core_radius.powf(n);
        let mut worst = (self.r[0] - params.core_radius).abs() / params.core_radius;
        for (i, rho) in self.rho.iter().enumerate() {
            volume += n * self.h / rho;
            worst = worst.max((self.r[i + 1].powf(n) - volume).abs() / volume);
        }
        worst
    }

    /// Free-boundary residual scaled by `max(1, rho_N^gamma)`.
    pub fn closure_residual(&self, params: &PhysicalParameters) -> f64 {
        let scale = rho_pow(self.rho[self.cells()], params.gamma).max(1.0);
        residual_3_12(self, params).abs() / scale
    }
}

/// `(w_{j+1} - w_j) / h`.
pub fn forward_difference(w: &[f64], j: usize, h: f64) -> Result<f64> {
    if j + 1 >= w.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: w.len(),
        });
    }
    Ok((w[j + 1] - w[j]) / h)
}

/// Radii `r_0..r_{N+1}` from `r_{i+1}^n = a^n + n sum_{k<=i} h / rho_k`.
pub fn recompute_radii(rho: &[f64], params: &PhysicalParameters) -> Result<Vec<f64>> {
    let n = params.n();
    let h = 1.0 / (rho.len() - 1) as f64;
    let mut r = Vec::with_capacity(rho.len() + 1);
    r.push(params.core_radius);
    let mut volume = params.core_radius.powf(n);
    for (cell, &value) in rho.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::VacuumCollapse { cell, value });
        }
        volume += n * h / value;
        r.push(volume.powf(1.0 / n));
    }
    Ok(r)
}

/// Normal stress `sigma_j = (2c1+c2) rho_{j-1}^(theta+1) delta(r^(n-1)u)_{j-1} - rho_{j-1}^gamma`
/// for `1 <= j <= N+1`.
pub fn stress(state: &GridState, params: &PhysicalParameters, j: usize) -> Result<f64> {
    let len = state.cells() + 2;
    if j == 0 || j >= len {
        return Err(Error::IndexOutOfRange { index: j, len });
    }
    let i = j - 1;
    let e = params.n() - 1.0;
    let w_next = if i + 1 > state.cells() {
        state.u_ghost
    } else {
        state.u[i + 1]
    } * state.r[i + 1].powf(e);
    let div = (w_next - state.r[i].powf(e) * state.u[i]) / state.h;
    let rho = state.rho[i];
    Ok(params.bulk() * rho_pow(rho, params.theta + 1.0) * div - rho_pow(rho, params.gamma))
}

/// Solves the linear free-boundary closure for `u_{N+1}`.
///
/// The closure is divided through by `rho_N^theta`, so nothing is divided by
/// a vanishing density; as `rho_N -> 0` the ghost tends to zero like
/// `rho_N^(gamma - theta)`.
pub fn close_boundary(state: &GridState, params: &PhysicalParameters) -> Result<f64> {
    let last = state.cells();
    let (rho, h, e) = (state.rho[last], state.h, params.n() - 1.0);
    let (r_in, r_out) = (state.r[last], state.r[last + 1]);
    let viscous = params.bulk() * rho / h;
    let curvature = 2.0 * params.c1 * e / r_out;
    let coefficient = -viscous * r_out.powf(e) + curvature;
    let scale = viscous * r_out.powf(e) + curvature.abs();
    let threshold = 1e-14 * scale;
    if !(coefficient.abs() > threshold) {
        return Err(Error::DegenerateClosure {
            coefficient,
            threshold,
        });
    }
    let source =
        -rho_pow(rho, params.gamma - params.theta) - viscous * r_in.powf(e) * state.u[last];
    Ok(source / coefficient)
}

/// Left side of the free-boundary closure, evaluated literally:
/// `rho_N^gamma - rho_N^(1+theta)(2c1+c2) delta(r^(n-1)u)_N + 2c1(n-1) u_{N+1}/r_{N+1} rho_N^theta`.
pub fn residual_3_12(state: &GridState, params: &PhysicalParameters) -> f64 {
    let last = state.cells();
    let rho = state.rho[last];
    let e = params.n() - 1.0;
    let div = (state.r[last + 1].powf(e) * state.u_ghost - state.r[last].powf(e) * state.u[last])
        / state.h;
    rho_pow(rho, params.gamma) - rho_pow(rho, 1.0 + params.theta) * params.bulk() * div
        + 2.0 * params.c1 * e * state.u_ghost / state.r[last + 1] * rho_pow(rho, params.theta)
}

/// Right-hand side of the semi-discrete system. The state must already carry
/// consistent radii and a closed ghost velocity.
pub fn assemble_rhs(
    state: &GridState,
    force: &ForceModel,
    params: &PhysicalParameters,
) -> Result<RhsVector> {
    let cells = state.cells();
    let (h, n) = (state.h, params.n());
    let (theta, gamma, bulk) = (params.theta, params.gamma, params.bulk());
    if let Some((cell, &value)) = state.rho.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::VacuumCollapse { cell, value });
    }

    let div = state.divergence(params);
    let drho: Vec<f64> = state
        .rho
        .iter()
        .zip(&div)
        .map(|(rho, d)| -rho * rho * d)
        .collect();

    // sigma[j] for j = 1..=N+1 stored at index j - 1.
    let rho_theta: Vec<f64> = state.rho.iter().map(|&rho| rho_pow(rho, theta)).collect();
    let sigma: Vec<f64> = state
        .rho
        .iter()
        .zip(&rho_theta)
        .zip(&div)
        .map(|((&rho, &rt), d)| bulk * rt * rho * d - rho_pow(rho, gamma))
        .collect();

    let curvature = 2.0 * params.c1 * (n - 1.0);
    let du = (1..=cells)
        .map(|j| {
            let r = state.r[j];
            let d_sigma = (sigma[j] - sigma[j - 1]) / h;
            let d_rho_theta = (rho_theta[j] - rho_theta[j - 1]) / h;
            r.powf(n - 1.0) * d_sigma - curvature * r.powf(n - 2.0) * state.u[j] * d_rho_theta
                + force.eval(params.core_radius, r, state.t)
        })
        .collect();
    Ok(RhsVector { drho, du })
}

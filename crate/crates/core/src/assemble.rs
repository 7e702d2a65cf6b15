//! Five-point Helmholtz operator with stretched-coordinate absorbing collars.
//!
//! For extended point `(i, j)` the row reads
//!
//! ```text
//! -sy_j/h² [ (u_{i+1,j} - u_ij)/sx_{i+½} - (u_ij - u_{i-1,j})/sx_{i-½} ]
//! -sx_i/h² [ (u_{i,j+1} - u_ij)/sy_{j+½} - (u_ij - u_{i,j-1})/sy_{j-½} ] - sx_i sy_j m_ij ω² u_ij
//! ```
//!
//! which is the stretched equation multiplied through by `sx sy`. The matrix
//! is complex symmetric, reduces to the classical stencil where `s ≡ 1`, and
//! neighbours outside the extended grid are zero (Dirichlet truncation).

use crate::error::{check_len, Error, Result};
use crate::grid::{AxisStretch, Grid, Patch, PmlProfile};
use crate::model::SlownessModel;
use crate::sparse::SparseMatrix;
use crate::C64;

/// A discretized frequency-domain problem: grid, medium, angular frequency and PML profile.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub model: SlownessModel,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// `None` only in Dirichlet test mode (`npml = 0`).
    pub profile: Option<PmlProfile>,
}

impl Problem {
    /// Problem at frequency `f_hz` with `ω = π f_hz` and the default profile.
    pub fn new(grid: Grid, model: SlownessModel, f_hz: f64) -> Result<Problem> {
        let profile = (grid.npml > 0).then(|| PmlProfile::default_for(grid.npml, grid.h, model.max_velocity()));
        Problem::with_omega(grid, model, std::f64::consts::PI * f_hz, profile)
    }

    pub fn with_omega(grid: Grid, model: SlownessModel, omega: f64, profile: Option<PmlProfile>) -> Result<Problem> {
        if !model.matches(&grid) {
            return Err(Error::DimensionMismatch { expected: grid.nx * grid.ny, found: model.values().len() });
        }
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::Domain(format!("angular frequency {omega}")));
        }
        if grid.npml > 0 && profile.is_none() {
            return Err(Error::InvalidParameter("an absorbing collar needs a PML profile".into()));
        }
        Ok(Problem { grid, model, omega, profile })
    }

    /// Stretch factors along both axes of `patch`.
    pub fn stretch(&self, patch: &Patch) -> (AxisStretch, AxisStretch) {
        let p = self.grid.npml;
        let prof = self.profile.as_ref();
        (AxisStretch::new(patch.ext_nx(p), p, prof, self.omega), AxisStretch::new(patch.ext_ny(p), p, prof, self.omega))
    }

    /// Helmholtz matrix of `patch` with its own collar.
    pub fn assemble_patch(&self, patch: &Patch) -> SparseMatrix {
        let p = self.grid.npml;
        let (nx, ny) = (patch.ext_nx(p), patch.ext_ny(p));
        let (sx, sy) = self.stretch(patch);
        let h2 = self.grid.h * self.grid.h;
        let w2 = self.omega * self.omega;
        let rows = crate::par::map(ny, |j| {
            let mut out = Vec::with_capacity(nx);
            for i in 0..nx {
                let mut row = Vec::with_capacity(5);
                let mut diag = C64::new(0.0, 0.0);
                let idx = j * nx + i;
                let ax = sy.node(j) / h2;
                let ay = sx.node(i) / h2;
                let west = -ax / sx.half_before(i);
                let east = -ax / sx.half_after(i);
                let north = -ay / sy.half_before(j);
                let south = -ay / sy.half_after(j);
                if j > 0 {
                    row.push((idx - nx, north));
                }
                if i > 0 {
                    row.push((idx - 1, west));
                }
                diag -= west + east + north + south;
                let m = self.model.at_ext(patch, p, i, j);
                diag -= sx.node(i) * sy.node(j) * (m * w2);
                row.push((idx, diag));
                if i + 1 < nx {
                    row.push((idx + 1, east));
                }
                if j + 1 < ny {
                    row.push((idx + nx, south));
                }
                out.push(row);
            }
            out
        });
        SparseMatrix::from_rows(nx * ny, rows.into_iter().flatten().collect())
    }
}

/// Global Helmholtz matrix `H` on the extended grid.
pub fn assemble_helmholtz(
    grid: &Grid,
    model: &SlownessModel,
    omega: f64,
    profile: Option<&PmlProfile>,
) -> Result<SparseMatrix> {
    if !model.matches(grid) {
        return Err(Error::DimensionMismatch { expected: grid.nx * grid.ny, found: model.values().len() });
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("angular frequency {omega} must be positive")));
    }
    let problem = Problem::with_omega(*grid, model.clone(), omega, profile.copied())?;
    Ok(problem.assemble_patch(&grid.full_patch()))
}

/// Complex values on every point of an extended grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<C64>,
}

impl ComplexField {
    pub fn zeros(grid: &Grid) -> ComplexField {
        ComplexField { grid: *grid, values: vec![C64::new(0.0, 0.0); grid.n_total()] }
    }

    pub fn from_values(grid: &Grid, values: Vec<C64>) -> Result<ComplexField> {
        check_len(grid.n_total(), values.len())?;
        Ok(ComplexField { grid: *grid, values })
    }

    pub fn at(&self, ix: usize, iy: usize) -> C64 {
        self.values[self.grid.interior_index(ix, iy)]
    }

    /// Interior values in row-major order (x fastest).
    pub fn interior(&self) -> Vec<C64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.nx * g.ny);
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                out.push(self.at(ix, iy));
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        crate::dense::norm2(&self.values)
    }

    pub fn scaled(&self, alpha: C64) -> ComplexField {
        ComplexField { grid: self.grid, values: self.values.iter().map(|z| z * alpha).collect() }
    }

    /// Relative ℓ² distance to `other` over the whole extended grid.
    pub fn rel_diff(&self, other: &ComplexField) -> f64 {
        crate::dense::rel_diff(&self.values, &other.values)
    }
}

/// Discrete delta of magnitude `1/h²` at interior point `(ix, iy)`.
pub fn point_source(grid: &Grid, ix: usize, iy: usize) -> ComplexField {
    let mut f = ComplexField::zeros(grid);
    f.values[grid.interior_index(ix, iy)] = C64::new(1.0 / (grid.h * grid.h), 0.0);
    f
}

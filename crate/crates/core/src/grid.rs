//! Regular grids, rectangular patches of a grid and the PML stretching profile.
//!
//! A [`Grid`] holds `nx × ny` interior points surrounded by a collar of
//! `npml` absorbing points on every side. Unknowns are numbered row-major over
//! the extended grid, x fastest. A [`Patch`] is a rectangular block of interior
//! points that gets its own collar; the global problem, a layer, and a cell are
//! all patches and share the same stretching convention, so a patch's own rows of
//! the Helmholtz matrix coincide with the parent's.

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    /// Grid spacing in meters.
    pub h: f64,
    pub npml: usize,
}

/// Validating constructor, equivalent to [`Grid::new`].
pub fn build_grid(nx: usize, ny: usize, h: f64, npml: usize) -> Result<Grid> {
    Grid::new(nx, ny, h, npml)
}

impl Grid {
    pub fn new(nx: usize, ny: usize, h: f64, npml: usize) -> Result<Grid> {
        if npml < 2 {
            return Err(Error::InvalidDimension(format!("npml = {npml} < 2")));
        }
        Self::checked(nx, ny, h, npml)
    }

    /// Grid without absorbing collar: homogeneous Dirichlet truncation right
    /// outside the interior. Used for testing the bare stencil.
    pub fn dirichlet(nx: usize, ny: usize, h: f64) -> Result<Grid> {
        Self::checked(nx, ny, h, 0)
    }

    fn checked(nx: usize, ny: usize, h: f64, npml: usize) -> Result<Grid> {
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidDimension(format!("interior {nx}×{ny} is smaller than 4×4")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidDimension(format!("grid spacing h = {h}")));
        }
        Ok(Grid { nx, ny, h, npml })
    }

    pub fn ext_nx(&self) -> usize {
        self.nx + 2 * self.npml
    }

    pub fn ext_ny(&self) -> usize {
        self.ny + 2 * self.npml
    }

    /// Total number of unknowns including the collar.
    pub fn n_total(&self) -> usize {
        self.ext_nx() * self.ext_ny()
    }

    /// Linear index of extended-grid point `(i, j)`; `i` runs along x.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.ext_nx() && j < self.ext_ny());
        j * self.ext_nx() + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.ext_nx(), idx / self.ext_nx())
    }

    /// Linear index of interior point `(ix, iy)`.
    pub fn interior_index(&self, ix: usize, iy: usize) -> usize {
        self.index(ix + self.npml, iy + self.npml)
    }

    /// The patch covering the whole interior.
    pub fn full_patch(&self) -> Patch {
        Patch { x0: 0, x1: self.nx, y0: 0, y1: self.ny }
    }
}

/// Rectangular block `[x0, x1) × [y0, y1)` of interior points.
///
/// The patch's extended grid adds `npml` collar points on every side; its
/// extended coordinates relate to the parent grid's by a shift of `(x0, y0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patch {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Patch {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn ext_nx(&self, npml: usize) -> usize {
        self.width() + 2 * npml
    }

    pub fn ext_ny(&self, npml: usize) -> usize {
        self.height() + 2 * npml
    }

    pub fn len(&self, npml: usize) -> usize {
        self.ext_nx(npml) * self.ext_ny(npml)
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }
}

/// Polynomial absorption profile `σ(t) = sigma_max · t^order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlProfile {
    /// Peak absorption at the outer edge of the collar (1/s).
    pub sigma_max: f64,
    pub order: u32,
}

/// Dimensionless strength of the default profile: `sigma_max = κ c / (npml h)`.
pub const DEFAULT_PML_STRENGTH: f64 = 40.0;

impl PmlProfile {
    pub fn new(sigma_max: f64, order: u32) -> Result<PmlProfile> {
        if !(sigma_max > 0.0) || !sigma_max.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma_max = {sigma_max}")));
        }
        Ok(PmlProfile { sigma_max, order })
    }

    /// Default quadratic profile for a collar of `npml` points and reference
    /// wave speed `c_ref` (m/s).
    pub fn default_for(npml: usize, h: f64, c_ref: f64) -> PmlProfile {
        Self::with_strength(DEFAULT_PML_STRENGTH, npml, h, c_ref)
    }

    /// Quadratic profile with `sigma_max = strength · c_ref / (npml h)`.
    pub fn with_strength(strength: f64, npml: usize, h: f64, c_ref: f64) -> PmlProfile {
        let thickness = npml.max(1) as f64 * h;
        PmlProfile { sigma_max: strength * c_ref / thickness, order: 2 }
    }

    pub fn sigma(&self, depth_fraction: f64) -> f64 {
        self.sigma_max * depth_fraction.powi(self.order as i32)
    }
}

/// Complex coordinate stretch `s = 1 + i σ(t)/ω` at depth fraction `t ∈ [0, 1]`.
pub fn pml_stretch(depth_fraction: f64, profile: &PmlProfile, omega: f64) -> Result<C64> {
    if !(0.0..=1.0).contains(&depth_fraction) {
        return Err(Error::Domain(format!("depth fraction {depth_fraction} outside [0, 1]")));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("angular frequency {omega} must be positive")));
    }
    Ok(stretch_unchecked(depth_fraction, profile, omega))
}

fn stretch_unchecked(depth: f64, profile: &PmlProfile, omega: f64) -> C64 {
    if depth <= 0.0 {
        C64::new(1.0, 0.0)
    } else {
        C64::new(1.0, profile.sigma(depth) / omega)
    }
}

/// Stretch factors along one axis of an extended patch.
///
/// The collar of `npml` points starts half a cell outside the last interior
/// point and ends half a cell beyond the outermost collar point, so the
/// half-point next to the interior is unstretched. This keeps a patch's own rows
/// identical to the parent's when the collar replaces a neighbour.
#[derive(Debug, Clone)]
pub struct AxisStretch {
    nodes: Vec<C64>,
    /// `halves[i]` is the stretch at position `i - 1/2`, for `i = 0..=n`.
    halves: Vec<C64>,
}

impl AxisStretch {
    pub fn new(n_ext: usize, npml: usize, profile: Option<&PmlProfile>, omega: f64) -> Self {
        let depth_at = |pos: f64| -> f64 {
            if npml == 0 {
                return 0.0;
            }
            let p = npml as f64;
            let first = p; // first interior point
            let last = (n_ext - npml) as f64 - 1.0;
            let t = if pos < first {
                first - pos
            } else if pos > last {
                pos - last
            } else {
                0.0
            };
            ((t - 0.5) / p).clamp(0.0, 1.0)
        };
        let s = |pos: f64| match profile {
            Some(prof) if omega > 0.0 => stretch_unchecked(depth_at(pos), prof, omega),
            _ => C64::new(1.0, 0.0),
        };
        let nodes = (0..n_ext).map(|i| s(i as f64)).collect();
        let halves = (0..=n_ext).map(|i| s(i as f64 - 0.5)).collect();
        AxisStretch { nodes, halves }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> C64 {
        self.nodes[i]
    }

    /// Stretch at `i - 1/2`.
    pub fn half_before(&self, i: usize) -> C64 {
        self.halves[i]
    }

    /// Stretch at `i + 1/2`.
    pub fn half_after(&self, i: usize) -> C64 {
        self.halves[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_unknowns_include_collar() {
        let g = build_grid(4, 4, 1.0, 2).unwrap();
        assert_eq!(g.n_total(), 64);
    }

    #[test]
    fn tall_grid_builds() {
        let g = build_grid(88, 425, 10.0, 12).unwrap();
        assert_eq!((g.nx, g.ny), (88, 425));
        assert_eq!(g.n_total(), (88 + 24) * (425 + 24));
    }

    #[test]
    fn rejects_small_or_invalid() {
        assert!(matches!(build_grid(3, 4, 1.0, 2), Err(Error::InvalidDimension(_))));
        assert!(build_grid(4, 4, 0.0, 2).is_err());
        assert!(build_grid(4, 4, 1.0, 1).is_err());
        assert!(Grid::dirichlet(4, 4, 1.0).is_ok());
    }

    #[test]
    fn index_maps_are_bijective() {
        let g = build_grid(5, 7, 1.0, 3).unwrap();
        for idx in 0..g.n_total() {
            let (i, j) = g.coords(idx);
            assert_eq!(g.index(i, j), idx);
        }
        assert_eq!(g.interior_index(0, 0), g.index(3, 3));
    }

    #[test]
    fn stretch_values() {
        let prof = PmlProfile::new(80.0, 2).unwrap();
        assert_eq!(pml_stretch(0.0, &prof, 40.0).unwrap(), C64::new(1.0, 0.0));
        let s1 = pml_stretch(1.0, &prof, 40.0).unwrap();
        assert!((s1 - C64::new(1.0, 2.0)).norm() < 1e-15);
        let s_half = pml_stretch(0.5, &prof, 40.0).unwrap();
        assert!((s_half.im - s1.im / 4.0).abs() < 1e-15);
        assert!(matches!(pml_stretch(1.5, &prof, 40.0), Err(Error::Domain(_))));
        assert!(pml_stretch(-0.1, &prof, 40.0).is_err());
    }

    #[test]
    fn axis_stretch_is_unit_next_to_interior() {
        let prof = PmlProfile::new(50.0, 2).unwrap();
        let ax = AxisStretch::new(4 + 2 * 3, 3, Some(&prof), 10.0);
        // interior points 3..7
        for i in 3..7 {
            assert_eq!(ax.node(i), C64::new(1.0, 0.0));
        }
        assert_eq!(ax.half_before(3), C64::new(1.0, 0.0));
        assert_eq!(ax.half_after(6), C64::new(1.0, 0.0));
        // monotone growth into the collar
        assert!(ax.node(2).im > 0.0);
        assert!(ax.node(0).im > ax.node(1).im);
        assert!(ax.node(9).im > ax.node(8).im);
        // outermost half point reaches full depth
        assert!((ax.half_before(0).im - 5.0).abs() < 1e-12);
        assert!((ax.half_after(9).im - 5.0).abs() < 1e-12);
    }
}

//! Squared-slowness media.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Patch};

/// Squared slowness `m = 1/c²` (s²/m²) on the interior points of a grid.
///
/// The collar is not stored: values outside the interior replicate the nearest
/// edge value, see [`SlownessModel::at_ext`].
#[derive(Debug, Clone, PartialEq)]
pub struct SlownessModel {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl SlownessModel {
    /// Builds a model from interior values in row-major order (x fastest).
    pub fn from_values(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::DimensionMismatch { expected: nx * ny, found: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositive { index, value });
        }
        Ok(SlownessModel { nx, ny, values })
    }

    pub fn from_velocity<F: Fn(usize, usize) -> f64>(grid: &Grid, c: F) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.nx * grid.ny);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let v = c(ix, iy);
                values.push(1.0 / (v * v));
            }
        }
        Self::from_values(grid.nx, grid.ny, values)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.nx == grid.nx && self.ny == grid.ny
    }

    /// Value at extended-patch point `(i, j)`, replicating the patch edge into
    /// its collar.
    pub fn at_ext(&self, patch: &Patch, npml: usize, i: usize, j: usize) -> f64 {
        let clamp = |v: isize, lo: usize, hi: usize| v.clamp(lo as isize, hi as isize - 1) as usize;
        let ix = clamp(patch.x0 as isize + i as isize - npml as isize, patch.x0, patch.x1);
        let iy = clamp(patch.y0 as isize + j as isize - npml as isize, patch.y0, patch.y1);
        self.at(ix, iy)
    }

    /// Full extended array over the grid including the collar.
    pub fn extended_values(&self, grid: &Grid) -> Vec<f64> {
        let patch = grid.full_patch();
        let mut out = Vec::with_capacity(grid.n_total());
        for j in 0..grid.ext_ny() {
            for i in 0..grid.ext_nx() {
                out.push(self.at_ext(&patch, grid.npml, i, j));
            }
        }
        out
    }

    pub fn min_velocity(&self) -> f64 {
        let m_max = self.values.iter().cloned().fold(f64::MIN, f64::max);
        1.0 / m_max.sqrt()
    }

    pub fn max_velocity(&self) -> f64 {
        let m_min = self.values.iter().cloned().fold(f64::MAX, f64::min);
        1.0 / m_min.sqrt()
    }
}

/// Synthetic media used by the tests and the benchmark harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Constant {
        c: f64,
    },
    VerticalGradient {
        c_top: f64,
        c_bottom: f64,
    },
    /// Gaussian low- or high-velocity lens centred in the domain.
    Lens {
        c_background: f64,
        c_lens: f64,
        /// Lens radius as a fraction of the smaller domain dimension.
        radius: f64,
    },
    /// Layered medium with undulating interfaces and seeded roughness; a
    /// stand-in for marine-geology benchmark models.
    RoughLayered {
        seed: u64,
        #[serde(default = "default_c_min")]
        c_min: f64,
        #[serde(default = "default_c_max")]
        c_max: f64,
    },
}

fn default_c_min() -> f64 {
    1500.0
}

fn default_c_max() -> f64 {
    4500.0
}

/// Builds a synthetic model on the interior of `grid`.
pub fn synthetic_model(spec: &ModelSpec, grid: &Grid) -> Result<SlownessModel> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
        }
    };
    let (nx, ny) = (grid.nx as f64, grid.ny as f64);
    match *spec {
        ModelSpec::Constant { c } => {
            positive("c", c)?;
            SlownessModel::from_velocity(grid, |_, _| c)
        }
        ModelSpec::VerticalGradient { c_top, c_bottom } => {
            positive("c_top", c_top)?;
            positive("c_bottom", c_bottom)?;
            SlownessModel::from_velocity(grid, |_, iy| {
                let t = iy as f64 / (ny - 1.0);
                c_top + t * (c_bottom - c_top)
            })
        }
        ModelSpec::Lens { c_background, c_lens, radius } => {
            positive("c_background", c_background)?;
            positive("c_lens", c_lens)?;
            positive("radius", radius)?;
            let r = radius * nx.min(ny);
            SlownessModel::from_velocity(grid, |ix, iy| {
                let dx = ix as f64 - 0.5 * (nx - 1.0);
                let dy = iy as f64 - 0.5 * (ny - 1.0);
                let w = (-(dx * dx + dy * dy) / (r * r)).exp();
                c_background + (c_lens - c_background) * w
            })
        }
        ModelSpec::RoughLayered { seed, c_min, c_max } => {
            positive("c_min", c_min)?;
            positive("c_max", c_max)?;
            if c_max < c_min || c_max > 3.0 * c_min {
                return Err(Error::InvalidParameter(format!(
                    "velocity range [{c_min}, {c_max}] must satisfy c_min ≤ c_max ≤ 3 c_min"
                )));
            }
            rough_layered(grid, seed, c_min, c_max)
        }
    }
}

fn rough_layered(grid: &Grid, seed: u64, c_min: f64, c_max: f64) -> Result<SlownessModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = rng.random_range(6..10usize);

    // Interface depths (fractions of the height), each with a few random undulations.
    struct Interface {
        depth: f64,
        waves: Vec<(f64, f64, f64)>, // amplitude, wavenumber, phase
    }
    let mut interfaces = Vec::with_capacity(n_layers - 1);
    for k in 1..n_layers {
        let depth = (k as f64 + rng.random_range(-0.3..0.3)) / n_layers as f64;
        let waves = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.0..0.04),
                    rng.random_range(1.0..6.0) * std::f64::consts::PI,
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        interfaces.push(Interface { depth, waves });
    }

    // Layer velocities trend upward with depth, with random jumps and inversions.
    let span = c_max - c_min;
    let velocities: Vec<(f64, f64)> = (0..n_layers)
        .map(|k| {
            let trend = (k as f64 + 0.5) / n_layers as f64;
            let c = c_min + span * (0.1 + 0.7 * trend + rng.random_range(-0.12..0.12));
            let gradient = span * rng.random_range(0.0..0.08);
            (c, gradient)
        })
        .collect();

    // Smooth multiplicative roughness from a coarse random lattice.
    const LATTICE: usize = 9;
    let lattice: Vec<f64> = (0..LATTICE * LATTICE).map(|_| rng.random_range(-0.06..0.06)).collect();
    let roughness = |x: f64, y: f64| {
        let gx = x * (LATTICE - 1) as f64;
        let gy = y * (LATTICE - 1) as f64;
        let (i0, j0) = ((gx.floor() as usize).min(LATTICE - 2), (gy.floor() as usize).min(LATTICE - 2));
        let (tx, ty) = (gx - i0 as f64, gy - j0 as f64);
        let v = |i: usize, j: usize| lattice[j * LATTICE + i];
        (1.0 - tx) * (1.0 - ty) * v(i0, j0)
            + tx * (1.0 - ty) * v(i0 + 1, j0)
            + (1.0 - tx) * ty * v(i0, j0 + 1)
            + tx * ty * v(i0 + 1, j0 + 1)
    };

    let (nx, ny) = (grid.nx as f64, grid.ny as f64);
    SlownessModel::from_velocity(grid, |ix, iy| {
        let x = ix as f64 / (nx - 1.0);
        let y = iy as f64 / (ny - 1.0);
        let mut layer = 0;
        let mut top = 0.0;
        for (k, iface) in interfaces.iter().enumerate() {
            let z = iface.depth + iface.waves.iter().map(|(a, kx, ph)| a * (kx * x + ph).sin()).sum::<f64>();
            if y >= z {
                layer = k + 1;
                top = z;
            }
        }
        let (c0, grad) = velocities[layer];
        let c = (c0 + grad * (y - top)) * (1.0 + roughness(x, y));
        c.clamp(c_min, c_max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(24, 20, 10.0, 4).unwrap()
    }

    #[test]
    fn constant_model() {
        let m = synthetic_model(&ModelSpec::Constant { c: 2000.0 }, &grid()).unwrap();
        assert!(m.values().iter().all(|&v| (v - 2.5e-7).abs() < 1e-22));
    }

    #[test]
    fn gradient_is_monotone_in_depth() {
        let g = grid();
        let m = synthetic_model(&ModelSpec::VerticalGradient { c_top: 1500.0, c_bottom: 3000.0 }, &g).unwrap();
        for iy in 1..g.ny {
            assert!(m.at(3, iy) < m.at(3, iy - 1));
        }
    }

    #[test]
    fn rough_layered_is_deterministic_and_bounded() {
        let g = grid();
        let spec = ModelSpec::RoughLayered { seed: 7, c_min: 1500.0, c_max: 4500.0 };
        let a = synthetic_model(&spec, &g).unwrap();
        let b = synthetic_model(&spec, &g).unwrap();
        assert_eq!(a, b);
        assert!(a.min_velocity() >= 1500.0 - 1e-9);
        assert!(a.max_velocity() <= 4500.0 + 1e-9);
        let other = synthetic_model(&ModelSpec::RoughLayered { seed: 8, c_min: 1500.0, c_max: 4500.0 }, &g).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn invalid_parameters() {
        let g = grid();
        assert!(synthetic_model(&ModelSpec::Constant { c: -1.0 }, &g).is_err());
        assert!(synthetic_model(&ModelSpec::RoughLayered { seed: 1, c_min: 1000.0, c_max: 5000.0 }, &g).is_err());
        assert!(matches!(
            SlownessModel::from_values(2, 2, vec![1.0, 0.0, 1.0, 1.0]),
            Err(Error::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn collar_replicates_edges() {
        let g = grid();
        let m = synthetic_model(&ModelSpec::VerticalGradient { c_top: 1500.0, c_bottom: 3000.0 }, &g).unwrap();
        let ext = m.extended_values(&g);
        assert_eq!(ext.len(), g.n_total());
        assert_eq!(ext[g.index(0, 0)], m.at(0, 0));
        assert_eq!(ext[g.index(g.ext_nx() - 1, g.ext_ny() - 1)], m.at(g.nx - 1, g.ny - 1));
        assert_eq!(ext[g.interior_index(5, 6)], m.at(5, 6));
    }
}

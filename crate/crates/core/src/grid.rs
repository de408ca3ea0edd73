//! Cell-centred radial mesh on the ball `B_R ⊂ R^n`.
//!
//! Unknowns live at cell centres, so nothing sits at the origin. The face at
//! `r = 0` carries zero flux by symmetry and the face at `r = R` carries zero
//! flux by the Neumann condition. Cell volumes and face areas are exact, which
//! makes the discrete divergence exactly conservative.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Surface measure of the unit sphere in `R^n`, `2 π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// `Γ(n/2)` for a positive integer `n`.
fn gamma_half_integer(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        // Γ(k) = (k-1)!
        (1..n / 2).map(|j| j as f64).product()
    } else {
        // Γ(k + 1/2) = (2k-1)!! / 2^k · √π
        let k = n / 2;
        let mut acc = PI.sqrt();
        for j in 0..k {
            acc *= (2 * j + 1) as f64 / 2.0;
        }
        acc
    }
}

/// Identifies the grid a field was built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStamp {
    pub dim: usize,
    pub cells: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    radius: f64,
    face_radii: Vec<f64>,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    face_areas: Vec<f64>,
    omega: f64,
}

impl RadialGrid {
    /// Uniform grid with `cells` cells on `[0, radius]` in dimension `dim`.
    pub fn new(dim: usize, radius: f64, cells: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be at least 2, got {dim}"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if cells < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 cells, got {cells}"
            )));
        }
        let h = radius / cells as f64;
        let mut face_radii: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        face_radii[cells] = radius;
        let centers: Vec<f64> = face_radii.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let omega = unit_sphere_area(dim);
        let nf = dim as f64;
        let volumes = face_radii
            .windows(2)
            .map(|w| omega * (w[1].powi(dim as i32) - w[0].powi(dim as i32)) / nf)
            .collect();
        let face_areas = face_radii
            .iter()
            .map(|&r| omega * r.powi(dim as i32 - 1))
            .collect();
        Ok(RadialGrid {
            dim,
            radius,
            face_radii,
            centers,
            volumes,
            face_areas,
            omega,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn face_radii(&self) -> &[f64] {
        &self.face_radii
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// `ω_n r^{n-1}` at every face, including the two boundary faces.
    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    /// `|Ω| = ω_n R^n / n`.
    pub fn total_volume(&self) -> f64 {
        self.omega * self.radius.powi(self.dim as i32) / self.dim as f64
    }

    pub fn stamp(&self) -> GridStamp {
        GridStamp {
            dim: self.dim,
            cells: self.len(),
            radius: self.radius,
        }
    }

    /// Distance between the centres adjacent to interior face `f` (`1 ≤ f ≤ N-1`).
    pub fn center_spacing(&self, f: usize) -> f64 {
        self.centers[f] - self.centers[f - 1]
    }

    /// Quadrature weight of interior face `f` for integrals of squared face
    /// gradients: `A_f · (r_f - r_{f-1})`. With this weight
    /// `Σ_i V_i w_i (div grad v)_i = -Σ_f weight_f (∂w)_f (∂v)_f`,
    /// the discrete Green identity.
    pub fn face_weight(&self, f: usize) -> f64 {
        self.face_areas[f] * self.center_spacing(f)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }

    fn check_field(&self, f: &RadialField) -> Result<()> {
        self.check_len(f.len())?;
        if f.stamp != self.stamp() {
            return Err(Error::InvalidGrid(format!(
                "field bound to {:?}, grid is {:?}",
                f.stamp,
                self.stamp()
            )));
        }
        Ok(())
    }

    /// `Σ_i f_i V_i`.
    pub fn integrate(&self, f: &RadialField) -> Result<f64> {
        self.check_field(f)?;
        Ok(self.integrate_values(&f.values))
    }

    pub(crate) fn integrate_values(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.volumes).map(|(f, v)| f * v).sum()
    }

    /// Conservative `r^{1-n} (r^{n-1} F)_r` from face values of `F`.
    pub fn radial_divergence(&self, face_flux: &[f64]) -> Result<RadialField> {
        if face_flux.len() != self.len() + 1 {
            return Err(Error::LengthMismatch {
                expected: self.len() + 1,
                found: face_flux.len(),
            });
        }
        let values = (0..self.len())
            .map(|i| {
                (self.face_areas[i + 1] * face_flux[i + 1] - self.face_areas[i] * face_flux[i])
                    / self.volumes[i]
            })
            .collect();
        Ok(RadialField {
            values,
            stamp: self.stamp(),
        })
    }

    /// Centred difference at interior faces; both boundary faces are zero.
    pub fn face_gradient(&self, f: &RadialField) -> Result<Vec<f64>> {
        self.check_field(f)?;
        Ok(self.face_gradient_values(&f.values))
    }

    pub(crate) fn face_gradient_values(&self, values: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut g = vec![0.0; n + 1];
        for f in 1..n {
            g[f] = (values[f] - values[f - 1]) / self.center_spacing(f);
        }
        g
    }

    /// `∫|∇f|²` assembled from face gradients.
    pub(crate) fn gradient_energy(&self, values: &[f64]) -> f64 {
        (1..self.len())
            .map(|f| {
                let d = (values[f] - values[f - 1]) / self.center_spacing(f);
                self.face_weight(f) * d * d
            })
            .sum()
    }

    /// Samples `f` at the cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> RadialField {
        RadialField {
            values: self.centers.iter().map(|&r| f(r)).collect(),
            stamp: self.stamp(),
        }
    }

    pub fn constant(&self, c: f64) -> RadialField {
        RadialField {
            values: vec![c; self.len()],
            stamp: self.stamp(),
        }
    }

    /// Wraps raw cell values, checking length and finiteness.
    pub fn field(&self, values: Vec<f64>) -> Result<RadialField> {
        self.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::out_of_range(
                values[i],
                format!("field value at cell {i} is not finite"),
            ));
        }
        Ok(RadialField {
            values,
            stamp: self.stamp(),
        })
    }
}

/// Cell averages of a radial function on a specific grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    values: Vec<f64>,
    stamp: GridStamp,
}

impl RadialField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn stamp(&self) -> GridStamp {
        self.stamp
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn from_parts(values: Vec<f64>, stamp: GridStamp) -> Self {
        RadialField { values, stamp }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RadialField {
        RadialField {
            values: self.values.iter().map(|&x| f(x)).collect(),
            stamp: self.stamp,
        }
    }
}

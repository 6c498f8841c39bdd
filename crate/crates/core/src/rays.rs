//! Uniform spherical ray bundles emitted from vote-cluster centers.
//!
//! The polar range `[0, π]` is cut into `P` bins at `θ_p = πp/(P-1)`. Each
//! bin carries `A_p` rays spaced evenly in azimuth starting at `ψ = 0`, with
//! one ray at each pole and `factor·p` rays per bin growing toward the
//! equator (mirrored on the southern half). With `P = 9` and the default
//! factor of 4 a bundle has 66 rays.
//!
//! Rays are always ordered by `(bin, azimuth index)`; every downstream layout
//! relies on that order.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scene::Box3D;
use crate::{Point3, Vector3};

pub const DEFAULT_AZIMUTH_FACTOR: usize = 4;
pub const DEFAULT_POLAR_BINS: usize = 9;
/// Lower clamp applied to predicted scales before emission (meters).
pub const DEFAULT_MIN_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub polar: f64,
    pub azimuth: f64,
    pub direction: Vector3,
    pub origin: Point3,
    pub far_bound: f64,
    pub bin_index: usize,
    pub azimuth_index: usize,
}

impl Ray {
    /// Point at fraction `t` of the far bound.
    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * (t * self.far_bound)
    }

    pub fn endpoint(&self) -> Point3 {
        self.at(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayBundle {
    pub origin: Point3,
    pub rays: Vec<Ray>,
    pub polar_bins: usize,
    pub scale: f64,
}

impl RayBundle {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }
}

fn check_bins(polar_bins: usize, azimuth_factor: usize) -> Result<()> {
    if polar_bins < 2 {
        return Err(Error::invalid(format!(
            "polar bin count must be at least 2, got {polar_bins}"
        )));
    }
    if azimuth_factor == 0 {
        return Err(Error::invalid("azimuth factor must be positive"));
    }
    Ok(())
}

/// Number of azimuth samples in polar bin `p`. Poles always get one ray.
pub fn azimuth_count(p: usize, polar_bins: usize, azimuth_factor: usize) -> usize {
    let last = polar_bins - 1;
    if p == 0 || p == last {
        1
    } else if 2 * p <= last {
        azimuth_factor * p
    } else {
        azimuth_factor * (last - p)
    }
}

pub fn ray_count(polar_bins: usize) -> Result<usize> {
    ray_count_with(polar_bins, DEFAULT_AZIMUTH_FACTOR)
}

pub fn ray_count_with(polar_bins: usize, azimuth_factor: usize) -> Result<usize> {
    check_bins(polar_bins, azimuth_factor)?;
    Ok((0..polar_bins)
        .map(|p| azimuth_count(p, polar_bins, azimuth_factor))
        .sum())
}

/// `(polar, azimuth)` pairs in canonical order.
pub fn ray_directions(polar_bins: usize) -> Result<Vec<(f64, f64)>> {
    ray_directions_with(polar_bins, DEFAULT_AZIMUTH_FACTOR)
}

pub fn ray_directions_with(polar_bins: usize, azimuth_factor: usize) -> Result<Vec<(f64, f64)>> {
    Ok(angle_table(polar_bins, azimuth_factor)?
        .into_iter()
        .map(|(theta, psi, _, _)| (theta, psi))
        .collect())
}

fn angle_table(polar_bins: usize, azimuth_factor: usize) -> Result<Vec<(f64, f64, usize, usize)>> {
    check_bins(polar_bins, azimuth_factor)?;
    let mut out = Vec::with_capacity(ray_count_with(polar_bins, azimuth_factor)?);
    for p in 0..polar_bins {
        let theta = PI * p as f64 / (polar_bins - 1) as f64;
        let count = azimuth_count(p, polar_bins, azimuth_factor);
        for a in 0..count {
            let psi = 2.0 * PI * a as f64 / count as f64;
            out.push((theta, psi, p, a));
        }
    }
    Ok(out)
}

pub fn unit_direction(polar: f64, azimuth: f64) -> Vector3 {
    let (st, ct) = polar.sin_cos();
    let (sp, cp) = azimuth.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// Half the diagonal of the box: the far bound a positive cluster should regress.
pub fn scale_target(b: &Box3D) -> f64 {
    0.5 * b.size.norm()
}

/// Clamp a predicted scale from below; non-finite predictions map to `min_scale`.
pub fn clamp_scale(predicted: f64, min_scale: f64) -> f64 {
    if predicted.is_finite() {
        predicted.max(min_scale)
    } else {
        min_scale
    }
}

pub fn emit_rays(origin: Point3, scale: f64, polar_bins: usize) -> Result<RayBundle> {
    emit_rays_with(origin, scale, polar_bins, DEFAULT_AZIMUTH_FACTOR)
}

pub fn emit_rays_with(
    origin: Point3,
    scale: f64,
    polar_bins: usize,
    azimuth_factor: usize,
) -> Result<RayBundle> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!(
            "ray scale must be finite and non-negative, got {scale}"
        )));
    }
    let rays = angle_table(polar_bins, azimuth_factor)?
        .into_iter()
        .map(|(polar, azimuth, bin_index, azimuth_index)| Ray {
            polar,
            azimuth,
            direction: unit_direction(polar, azimuth),
            origin,
            far_bound: scale,
            bin_index,
            azimuth_index,
        })
        .collect();
    Ok(RayBundle {
        origin,
        rays,
        polar_bins,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn counts() {
        assert_eq!(ray_count(9).unwrap(), 66);
        assert_eq!(ray_count(2).unwrap(), 2);
        let got: Vec<_> = [3, 5, 7, 11]
            .iter()
            .map(|&p| ray_count(p).unwrap())
            .collect();
        assert_eq!(got, vec![6, 18, 38, 102]);
        assert!(matches!(ray_count(1), Err(Error::InvalidParameter(_))));
        assert!(matches!(ray_count(0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn poles_only() {
        let d = ray_directions(2).unwrap();
        assert_eq!(d, vec![(0.0, 0.0), (PI, 0.0)]);
    }

    #[test]
    fn three_bins_equator() {
        let d = ray_directions(3).unwrap();
        let eq: Vec<_> = d.iter().filter(|(t, _)| *t == PI / 2.0).collect();
        assert_eq!(eq.len(), 4);
        let psis: Vec<f64> = eq.iter().map(|(_, p)| *p).collect();
        for (got, want) in psis.iter().zip([0.0, PI / 2.0, PI, 1.5 * PI]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn nine_bins_equator_has_sixteen() {
        let d = ray_directions(9).unwrap();
        assert_eq!(d.iter().filter(|(t, _)| *t == PI * 4.0 / 8.0).count(), 16);
    }

    #[test]
    fn scale_targets() {
        let unit = Box3D::new(Point3::origin(), Vector3::new(1.0, 1.0, 1.0), 0).unwrap();
        assert_abs_diff_eq!(scale_target(&unit), 3f64.sqrt() / 2.0, epsilon = 1e-15);
        let thin = Box3D::new(Point3::origin(), Vector3::new(2.0, 1e-9, 1e-9), 0).unwrap();
        assert_abs_diff_eq!(scale_target(&thin), 1.0, epsilon = 1e-12);
        let b = Box3D::new(Point3::origin(), Vector3::new(3.0, 4.0, 12.0), 0).unwrap();
        assert_eq!(scale_target(&b), 6.5);
    }

    #[test]
    fn pole_endpoints() {
        let b = emit_rays(Point3::new(1.0, 2.0, 3.0), 1.0, 2).unwrap();
        assert_eq!(b.len(), 2);
        assert_abs_diff_eq!(
            b.rays[0].endpoint(),
            Point3::new(1.0, 2.0, 4.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            b.rays[1].endpoint(),
            Point3::new(1.0, 2.0, 2.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_scale_collapses_to_origin() {
        let o = Point3::new(0.5, -1.0, 2.0);
        let b = emit_rays(o, 0.0, 9).unwrap();
        assert!(b.rays.iter().all(|r| r.endpoint() == o));
    }

    #[test]
    fn bundle_endpoints_on_sphere() {
        let o = Point3::new(0.3, 0.1, -0.2);
        let b = emit_rays(o, 1.7, 9).unwrap();
        assert_eq!(b.len(), 66);
        for r in &b.rays {
            assert!(((r.endpoint() - o).norm() - 1.7).abs() < 1e-9);
            assert_eq!(r.far_bound, 1.7);
        }
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(emit_rays(Point3::origin(), -0.1, 9).is_err());
        assert!(emit_rays(Point3::origin(), f64::NAN, 9).is_err());
        assert!(emit_rays(Point3::origin(), 1.0, 1).is_err());
    }

    #[test]
    fn clamp() {
        assert_eq!(clamp_scale(-1.0, 0.05), 0.05);
        assert_eq!(clamp_scale(0.7, 0.05), 0.7);
        assert_eq!(clamp_scale(f64::NAN, 0.05), 0.05);
    }

    #[test]
    fn canonical_order() {
        let b = emit_rays(Point3::origin(), 1.0, 7).unwrap();
        let keys: Vec<_> = b
            .rays
            .iter()
            .map(|r| (r.bin_index, r.azimuth_index))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn custom_factor_keeps_single_pole_rays() {
        assert_eq!(ray_count_with(3, 6).unwrap(), 1 + 6 + 1);
        assert_eq!(ray_count_with(5, 2).unwrap(), 1 + 2 + 4 + 2 + 1);
    }
}

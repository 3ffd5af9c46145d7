//! Quadrature discretisations of smooth closed surfaces.
//!
//! Every surface is the image of the unit "parameter sphere" under a smooth
//! map X(ŝ). Grids are `resolution` Gauss–Legendre nodes in cos θ times
//! `2·resolution` equispaced longitudes, so no node sits on a pole. Node
//! `i = a * n_phi + b` lives on latitude ring `a` at longitude `b·π/res`.

use crate::error::{check_len, Error, Result};
use crate::harmonics;
use crate::quadrature::gauss_legendre;
use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Point3 = Vector3<f64>;

/// One term `value · Y^R_lm` of a star-shaped radius function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTerm {
    pub l: usize,
    pub m: i64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeDescriptor {
    Sphere {
        radius: f64,
    },
    Ellipsoid {
        semi_axes: [f64; 3],
    },
    /// r(ŝ) = base_radius + Σ value · Y^R_lm(ŝ) (real orthonormal harmonics).
    Star {
        base_radius: f64,
        terms: Vec<RadialTerm>,
    },
}

/// Position, outward unit normal and area Jacobian (relative to the unit
/// sphere measure) of the surface at a parameter point.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub position: Point3,
    pub normal: Point3,
    pub jacobian: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Exterior,
}

impl ShapeDescriptor {
    pub fn sphere(radius: f64) -> Self {
        ShapeDescriptor::Sphere { radius }
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        ShapeDescriptor::Ellipsoid { semi_axes: [a, b, c] }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        match self {
            ShapeDescriptor::Sphere { radius } => {
                if !finite_pos(*radius) {
                    return Err(Error::InvalidShape(format!("sphere radius {radius} must be positive")));
                }
            }
            ShapeDescriptor::Ellipsoid { semi_axes } => {
                if !semi_axes.iter().all(|&v| finite_pos(v)) {
                    return Err(Error::InvalidShape(format!(
                        "ellipsoid semi-axes {semi_axes:?} must be positive"
                    )));
                }
            }
            ShapeDescriptor::Star { base_radius, terms } => {
                if !finite_pos(*base_radius) {
                    return Err(Error::InvalidShape(format!(
                        "star-shaped base radius {base_radius} must be positive"
                    )));
                }
                for t in terms {
                    if t.m.unsigned_abs() as usize > t.l || !t.value.is_finite() {
                        return Err(Error::InvalidShape(format!("bad radial term {t:?}")));
                    }
                }
                let (rmin, _) = self.radius_range();
                if rmin <= 0.0 {
                    return Err(Error::InvalidShape(format!(
                        "star-shaped radius function reaches {rmin:.3e} (must stay positive)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Invariant under rotations about the z axis.
    pub fn is_axisymmetric(&self) -> bool {
        match self {
            ShapeDescriptor::Sphere { .. } => true,
            ShapeDescriptor::Ellipsoid { semi_axes } => semi_axes[0] == semi_axes[1],
            ShapeDescriptor::Star { terms, .. } => terms.iter().all(|t| t.m == 0 || t.value == 0.0),
        }
    }

    fn star_radius(base: f64, terms: &[RadialTerm], s: &Point3) -> (f64, Point3) {
        let mut r = base;
        let mut grad = Point3::zeros();
        for t in terms {
            let (v, g) = harmonics::real_harmonic_with_gradient(t.l, t.m, s);
            r += t.value * v;
            grad += g * t.value;
        }
        (r, grad)
    }

    /// Min and max of |X(ŝ)| (sampled for star shapes).
    fn radius_range(&self) -> (f64, f64) {
        match self {
            ShapeDescriptor::Sphere { radius } => (*radius, *radius),
            ShapeDescriptor::Ellipsoid { semi_axes } => {
                let min = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = semi_axes.iter().cloned().fold(0.0, f64::max);
                (min, max)
            }
            ShapeDescriptor::Star { base_radius, terms } => {
                let (x, _) = gauss_legendre(48);
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for &c in x.iter().chain([-1.0, 1.0].iter()) {
                    for b in 0..96 {
                        let s = harmonics::unit_vector(c, 2.0 * PI * b as f64 / 96.0);
                        let (r, _) = Self::star_radius(*base_radius, terms, &s);
                        min = min.min(r);
                        max = max.max(r);
                    }
                }
                (min, max)
            }
        }
    }

    /// Largest distance from the origin to the surface.
    pub fn circumradius(&self) -> f64 {
        self.radius_range().1
    }

    /// Smallest distance from the origin to the surface.
    pub fn inradius(&self) -> f64 {
        match self {
            // distance from the centre to an ellipsoid is minimised on an axis
            ShapeDescriptor::Ellipsoid { .. } | ShapeDescriptor::Sphere { .. } => self.radius_range().0,
            ShapeDescriptor::Star { .. } => self.radius_range().0,
        }
    }

    /// Evaluate the parameterisation at a unit vector.
    pub fn map(&self, s: &Point3) -> SurfacePoint {
        match self {
            ShapeDescriptor::Sphere { radius } => SurfacePoint {
                position: s * *radius,
                normal: *s,
                jacobian: radius * radius,
            },
            ShapeDescriptor::Ellipsoid { semi_axes: [a, b, c] } => {
                let g = Point3::new(s.x / a, s.y / b, s.z / c);
                let gn = g.norm();
                SurfacePoint {
                    position: Point3::new(a * s.x, b * s.y, c * s.z),
                    normal: g / gn,
                    jacobian: a * b * c * gn,
                }
            }
            ShapeDescriptor::Star { base_radius, terms } => {
                let (r, grad) = Self::star_radius(*base_radius, terms, s);
                let v = s * r - grad;
                let vn = v.norm();
                SurfacePoint {
                    position: s * r,
                    normal: v / vn,
                    jacobian: r * vn,
                }
            }
        }
    }

    /// Closed-form or high-order reference area.
    pub fn reference_area(&self) -> Option<f64> {
        match self {
            ShapeDescriptor::Sphere { radius } => Some(4.0 * PI * radius * radius),
            _ => None,
        }
    }
}

/// Identity of a discretised surface: shape plus resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceId {
    pub shape: ShapeDescriptor,
    pub resolution: usize,
}

#[derive(Clone, Debug)]
pub struct QuadratureSurface {
    shape: ShapeDescriptor,
    resolution: usize,
    n_theta: usize,
    n_phi: usize,
    cos_theta: Vec<f64>,
    theta_weights: Vec<f64>,
    params: Vec<Point3>,
    nodes: Vec<Point3>,
    normals: Vec<Point3>,
    weights: Vec<f64>,
    jacobians: Vec<f64>,
    axisymmetric: bool,
}

/// Build a Gauss–Legendre × trapezoid grid of `resolution × 2·resolution`
/// nodes on the surface described by `descriptor`.
pub fn build_surface(descriptor: &ShapeDescriptor, resolution: usize) -> Result<QuadratureSurface> {
    if resolution < 4 {
        return Err(Error::Usage(format!("resolution {resolution} must be at least 4")));
    }
    descriptor.validate()?;
    let n_theta = resolution;
    let n_phi = 2 * resolution;
    let (cos_theta, theta_weights) = gauss_legendre(n_theta);
    let dphi = PI / resolution as f64;
    let n = n_theta * n_phi;
    let mut params = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut jacobians = Vec::with_capacity(n);
    for (a, &c) in cos_theta.iter().enumerate() {
        for b in 0..n_phi {
            let s = harmonics::unit_vector(c, b as f64 * dphi);
            let p = descriptor.map(&s);
            params.push(s);
            nodes.push(p.position);
            normals.push(p.normal);
            weights.push(theta_weights[a] * dphi * p.jacobian);
            jacobians.push(p.jacobian);
        }
    }
    Ok(QuadratureSurface {
        axisymmetric: descriptor.is_axisymmetric(),
        shape: descriptor.clone(),
        resolution,
        n_theta,
        n_phi,
        cos_theta,
        theta_weights,
        params,
        nodes,
        normals,
        weights,
        jacobians,
    })
}

impl QuadratureSurface {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self) -> &ShapeDescriptor {
        &self.shape
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn id(&self) -> SurfaceId {
        SurfaceId { shape: self.shape.clone(), resolution: self.resolution }
    }

    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn normals(&self) -> &[Point3] {
        &self.normals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Parameter-sphere unit vectors of the nodes.
    pub fn params(&self) -> &[Point3] {
        &self.params
    }

    pub fn jacobians(&self) -> &[f64] {
        &self.jacobians
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn theta_weights(&self) -> &[f64] {
        &self.theta_weights
    }

    pub fn phi(&self, b: usize) -> f64 {
        b as f64 * PI / self.resolution as f64
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.axisymmetric
    }

    /// Largest band degree exactly represented on the grid.
    pub fn band_degree(&self) -> usize {
        self.resolution - 1
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Coarse length scale: meridian spacing at the circumradius.
    pub fn grid_spacing(&self) -> f64 {
        PI * self.shape.circumradius() / self.n_theta as f64
    }

    pub fn circumradius(&self) -> f64 {
        self.shape.circumradius()
    }

    pub fn inradius(&self) -> f64 {
        self.shape.inradius()
    }

    /// Σ w_i f_i. Bilinear: no conjugation.
    pub fn integrate(&self, values: &[Complex64]) -> Result<Complex64> {
        check_len(self.len(), values.len())?;
        Ok(values.iter().zip(&self.weights).map(|(v, &w)| v * w).sum())
    }

    /// sqrt(Σ w_i |f_i|²), the discrete L²(S) norm.
    pub fn h0_norm(&self, values: &[Complex64]) -> Result<f64> {
        check_len(self.len(), values.len())?;
        Ok(values.iter().zip(&self.weights).map(|(v, &w)| w * v.norm_sqr()).sum::<f64>().sqrt())
    }

    /// Hermitian pairing Σ w_i conj(f_i) g_i.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
        check_len(self.len(), f.len())?;
        check_len(self.len(), g.len())?;
        Ok(f.iter().zip(g).zip(&self.weights).map(|((a, b), &w)| a.conj() * b * w).sum())
    }

    /// Distance from `x` to the closest node.
    pub fn distance_to_nodes(&self, x: &Point3) -> f64 {
        self.nodes.iter().map(|p| (p - x).norm()).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prolate_area(a: f64, c: f64) -> f64 {
        let e = (1.0 - a * a / (c * c)).sqrt();
        2.0 * PI * a * a * (1.0 + c / (a * e) * e.asin())
    }

    #[test]
    fn sphere_node_count_and_area() {
        let s = build_surface(&ShapeDescriptor::sphere(1.0), 16).unwrap();
        assert_eq!(s.len(), 512);
        assert!((s.area() - 4.0 * PI).abs() < 1e-10);
        let s2 = build_surface(&ShapeDescriptor::sphere(2.0), 8).unwrap();
        assert!((s2.area() - 16.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn prolate_spheroid_area() {
        let s = build_surface(&ShapeDescriptor::ellipsoid(1.0, 1.0, 2.0), 16).unwrap();
        let exact = prolate_area(1.0, 2.0);
        assert!((s.area() - exact).abs() < 1e-8, "{} vs {}", s.area(), exact);
    }

    #[test]
    fn ellipsoid_area_converges_monotonically() {
        let shape = ShapeDescriptor::ellipsoid(1.0, 1.0, 2.0);
        let areas: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&r| build_surface(&shape, r).unwrap().area())
            .collect();
        let exact = prolate_area(1.0, 2.0);
        let d1 = (areas[1] - areas[0]).abs();
        let d2 = (areas[2] - areas[1]).abs();
        assert!(d2 < d1);
        assert!((areas[2] - exact).abs() < (areas[0] - exact).abs());
    }

    #[test]
    fn integrate_examples() {
        let s = build_surface(&ShapeDescriptor::sphere(1.0), 16).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); s.len()];
        assert!((s.integrate(&ones).unwrap() - 4.0 * PI).norm() < 1e-10);
        let z2: Vec<_> = s.nodes().iter().map(|p| Complex64::new(p.z * p.z, 0.0)).collect();
        assert!((s.integrate(&z2).unwrap().re - 4.0 * PI / 3.0).abs() < 1e-12);
        let zero = vec![Complex64::new(0.0, 0.0); s.len()];
        assert_eq!(s.integrate(&zero).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(s.integrate(&ones[1..]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn h0_norm_examples() {
        let s = build_surface(&ShapeDescriptor::sphere(1.0), 16).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); s.len()];
        assert!((s.h0_norm(&ones).unwrap() - (4.0 * PI).sqrt()).abs() < 1e-12);
        let zero = vec![Complex64::new(0.0, 0.0); s.len()];
        assert_eq!(s.h0_norm(&zero).unwrap(), 0.0);
        let y10: Vec<_> = s
            .params()
            .iter()
            .map(|p| harmonics::ylm_all(1, p)[harmonics::index(1, 0)])
            .collect();
        assert!((s.h0_norm(&y10).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn harmonic_products_integrate_exactly() {
        let res = 10;
        let s = build_surface(&ShapeDescriptor::sphere(1.0), res).unwrap();
        let lmax = res - 2;
        let ys: Vec<Vec<Complex64>> = s.params().iter().map(|p| harmonics::ylm_all(lmax, p)).collect();
        for p in 0..harmonics::count(lmax) {
            for q in [0, 3, p] {
                let f: Vec<_> = ys.iter().map(|y| y[p].conj() * y[q]).collect();
                let v = s.integrate(&f).unwrap();
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((v - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let s = build_surface(&ShapeDescriptor::sphere(1.5), 8).unwrap();
        for (p, n) in s.nodes().iter().zip(s.normals()) {
            assert!((n - p / 1.5).norm() < 1e-12);
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn star_shape_outward_and_unit_normals() {
        let shape = ShapeDescriptor::Star {
            base_radius: 1.0,
            terms: vec![
                RadialTerm { l: 2, m: 0, value: 0.15 },
                RadialTerm { l: 3, m: 2, value: -0.08 },
            ],
        };
        let s = build_surface(&shape, 12).unwrap();
        assert!(!s.is_axisymmetric());
        for (p, n) in s.nodes().iter().zip(s.normals()) {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(p.dot(n) > 0.0);
        }
        assert!(s.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn star_normal_matches_finite_difference_tangents() {
        let shape = ShapeDescriptor::Star {
            base_radius: 1.2,
            terms: vec![RadialTerm { l: 2, m: 1, value: 0.1 }, RadialTerm { l: 1, m: -1, value: 0.05 }],
        };
        let s = Point3::new(0.3, 0.5, 0.8).normalize();
        let p = shape.map(&s);
        let t1 = s.cross(&Point3::x()).normalize();
        let t2 = s.cross(&t1);
        let h = 1e-6;
        for t in [t1, t2] {
            let dp = (shape.map(&(s + t * h).normalize()).position
                - shape.map(&(s - t * h).normalize()).position)
                / (2.0 * h);
            assert!(dp.dot(&p.normal).abs() < 1e-8);
        }
        // Jacobian = |X_1 × X_2| for orthonormal tangents on the unit sphere.
        let d1 = (shape.map(&(s + t1 * h).normalize()).position - shape.map(&(s - t1 * h).normalize()).position)
            / (2.0 * h);
        let d2 = (shape.map(&(s + t2 * h).normalize()).position - shape.map(&(s - t2 * h).normalize()).position)
            / (2.0 * h);
        assert!((d1.cross(&d2).norm() - p.jacobian).abs() < 1e-7);
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(matches!(
            build_surface(&ShapeDescriptor::sphere(0.0), 8),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            build_surface(&ShapeDescriptor::ellipsoid(1.0, -1.0, 1.0), 8),
            Err(Error::InvalidShape(_))
        ));
        let collapsing = ShapeDescriptor::Star {
            base_radius: 0.2,
            terms: vec![RadialTerm { l: 1, m: 0, value: 1.0 }],
        };
        assert!(matches!(build_surface(&collapsing, 8), Err(Error::InvalidShape(_))));
        assert!(matches!(build_surface(&ShapeDescriptor::sphere(1.0), 3), Err(Error::Usage(_))));
    }
}

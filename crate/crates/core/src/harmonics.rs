//! Orthonormal complex spherical harmonics (Condon–Shortley phase) on the
//! unit sphere, their surface gradients, and real harmonics.
//!
//! Harmonics are indexed by `l*l + l + m` for `|m| <= l`.

use nalgebra::Vector3;
use num_complex::Complex64;
use std::f64::consts::PI;

#[inline]
pub fn index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

#[inline]
pub fn count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Inverse of [`index`].
pub fn degree_order(idx: usize) -> (usize, i64) {
    let l = (idx as f64).sqrt().floor() as usize;
    let l = if (l + 1) * (l + 1) <= idx { l + 1 } else { l };
    (l, idx as i64 - (l * l + l) as i64)
}

/// All Y_lm(ŝ) for l ≤ l_max written into `out` (length `count(l_max)`).
/// `s` must be a unit vector. The factor sin^m θ e^{imφ} is built from
/// (x + i y)^m, so the poles need no special treatment.
pub fn ylm_into(l_max: usize, s: &Vector3<f64>, out: &mut [Complex64]) {
    debug_assert_eq!(out.len(), count(l_max));
    let z = s.z;
    let xy = Complex64::new(s.x, s.y);
    let mut ymm = Complex64::new(1.0 / (4.0 * PI).sqrt(), 0.0);
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            ymm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * xy;
        }
        out[index(m, m as i64)] = ymm;
        if m < l_max {
            let mut prev2 = ymm;
            let mut prev1 = ymm * (z * (2.0 * m as f64 + 3.0).sqrt());
            out[index(m + 1, m as i64)] = prev1;
            for l in (m + 2)..=l_max {
                let lf = l as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
                let cur = (prev1 * z - prev2 * b) * a;
                out[index(l, m as i64)] = cur;
                prev2 = prev1;
                prev1 = cur;
            }
        }
    }
    for l in 1..=l_max {
        for m in 1..=l {
            let v = out[index(l, m as i64)].conj();
            out[index(l, -(m as i64))] = if m % 2 == 0 { v } else { -v };
        }
    }
}

pub fn ylm_all(l_max: usize, s: &Vector3<f64>) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); count(l_max)];
    ylm_into(l_max, s, &mut out);
    out
}

/// Surface gradients ∇_S Y_lm(ŝ) for l ≤ l_max, via the angular-momentum
/// ladder: ∇_S Y = -i ŝ × (L Y).
pub fn ylm_gradients(l_max: usize, s: &Vector3<f64>) -> Vec<Vector3<Complex64>> {
    let y = ylm_all(l_max, s);
    let i = Complex64::new(0.0, 1.0);
    let sc = Vector3::new(
        Complex64::new(s.x, 0.0),
        Complex64::new(s.y, 0.0),
        Complex64::new(s.z, 0.0),
    );
    let mut out = Vec::with_capacity(y.len());
    for l in 0..=l_max {
        let lf = l as f64;
        for m in -(l as i64)..=(l as i64) {
            let mf = m as f64;
            let plus = if m < l as i64 {
                y[index(l, m + 1)] * ((lf - mf) * (lf + mf + 1.0)).sqrt()
            } else {
                Complex64::new(0.0, 0.0)
            };
            let minus = if m > -(l as i64) {
                y[index(l, m - 1)] * ((lf + mf) * (lf - mf + 1.0)).sqrt()
            } else {
                Complex64::new(0.0, 0.0)
            };
            let lvec = Vector3::new(
                (plus + minus) * 0.5,
                (plus - minus) / (2.0 * i),
                y[index(l, m)] * mf,
            );
            out.push(sc.cross(&lvec) * (-i));
        }
    }
    out
}

/// Real orthonormal harmonic Y^R_lm and its surface gradient.
pub fn real_harmonic_with_gradient(l: usize, m: i64, s: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let y = ylm_all(l, s);
    let g = ylm_gradients(l, s);
    let am = m.unsigned_abs() as i64;
    let idx = index(l, am);
    let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
    let root2 = std::f64::consts::SQRT_2;
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => (y[idx].re, g[idx].map(|c| c.re)),
        std::cmp::Ordering::Greater => (
            root2 * sign * y[idx].re,
            g[idx].map(|c| root2 * sign * c.re),
        ),
        std::cmp::Ordering::Less => (
            root2 * sign * y[idx].im,
            g[idx].map(|c| root2 * sign * c.im),
        ),
    }
}

/// Unit vector for colatitude θ (given as cos θ) and longitude φ.
pub fn unit_vector(cos_theta: f64, phi: f64) -> Vector3<f64> {
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    Vector3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn low_degree_closed_forms() {
        let s = Vector3::new(0.3, -0.4, 0.5).normalize();
        let y = ylm_all(2, &s);
        let c00 = 1.0 / (4.0 * PI).sqrt();
        assert!((y[index(0, 0)].re - c00).abs() < 1e-15);
        let c10 = (3.0 / (4.0 * PI)).sqrt();
        assert!((y[index(1, 0)] - Complex64::new(c10 * s.z, 0.0)).norm() < 1e-15);
        let c11 = (3.0 / (8.0 * PI)).sqrt();
        assert!((y[index(1, 1)] + Complex64::new(s.x, s.y) * c11).norm() < 1e-15);
        assert!((y[index(1, -1)] - Complex64::new(s.x, -s.y) * c11).norm() < 1e-15);
        let c20 = (5.0 / (16.0 * PI)).sqrt();
        assert!((y[index(2, 0)].re - c20 * (3.0 * s.z * s.z - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_under_product_gauss_rule() {
        let l_max = 6;
        let (x, w) = gauss_legendre(l_max + 2);
        let nphi = 2 * (l_max + 2);
        let n = count(l_max);
        let mut gram = vec![Complex64::new(0.0, 0.0); n * n];
        for (a, &xa) in x.iter().enumerate() {
            for b in 0..nphi {
                let phi = 2.0 * PI * b as f64 / nphi as f64;
                let y = ylm_all(l_max, &unit_vector(xa, phi));
                let wt = w[a] * 2.0 * PI / nphi as f64;
                for p in 0..n {
                    for q in 0..n {
                        gram[p * n + q] += y[p].conj() * y[q] * wt;
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((gram[p * n + q] - expect).norm() < 1e-13, "{p} {q}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = Vector3::new(0.2, 0.7, -0.4).normalize();
        let l_max = 4;
        let g = ylm_gradients(l_max, &s);
        let t1 = s.cross(&Vector3::z()).normalize();
        let t2 = s.cross(&t1);
        let h = 1e-6;
        for t in [t1, t2] {
            let yp = ylm_all(l_max, &(s + t * h).normalize());
            let ym = ylm_all(l_max, &(s - t * h).normalize());
            for idx in 0..count(l_max) {
                let fd = (yp[idx] - ym[idx]) / (2.0 * h);
                let an = g[idx].x * t.x + g[idx].y * t.y + g[idx].z * t.z;
                assert!((fd - an).norm() < 1e-7, "idx={idx} fd={fd} an={an}");
            }
            // tangential
            for gi in &g {
                let radial = gi.x * s.x + gi.y * s.y + gi.z * s.z;
                assert!(radial.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn degree_order_roundtrip() {
        for l in 0..10usize {
            for m in -(l as i64)..=(l as i64) {
                assert_eq!(degree_order(index(l, m)), (l, m));
            }
        }
    }
}

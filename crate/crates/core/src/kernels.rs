//! Point evaluation of the Helmholtz fundamental solution
//! g(x, y) = e^{ik|x−y|} / (4π|x−y|), its normal derivatives and the split
//! g = q0 + q1 into the static part and a bounded remainder.

use crate::error::{Error, Result};
use crate::surface::Point3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const FOUR_PI: f64 = 4.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub k: f64,
}

impl KernelParams {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
        }
        Ok(KernelParams { k })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalSide {
    /// Derivative with respect to the source point s.
    AtSource,
    /// Derivative with respect to the target point x.
    AtTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPart {
    Q0,
    Q1,
}

#[inline]
fn g_of_r(r: f64, k: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (FOUR_PI * r), k * r)
}

/// (e^{ikr} − 1) / (4πr), stable as r → 0.
#[inline]
pub(crate) fn q1_of_r(r: f64, k: f64) -> Complex64 {
    let ik = Complex64::new(0.0, k);
    if r < 1e-12 {
        return ik / FOUR_PI;
    }
    if r < 1e-6 {
        return ik / FOUR_PI * (1.0 + ik * r * 0.5);
    }
    let half = 0.5 * k * r;
    let em1 = Complex64::new(-2.0 * half.sin().powi(2), (k * r).sin());
    em1 / (FOUR_PI * r)
}

/// dg/dr divided by r: g(r)(ik − 1/r)/r. Multiply by a displacement to get
/// a gradient.
#[inline]
pub(crate) fn dg_over_r(r: f64, k: f64) -> Complex64 {
    g_of_r(r, k) * Complex64::new(-1.0 / r, k) / r
}

pub fn helmholtz_g(x: &Point3, y: &Point3, params: KernelParams) -> Result<Complex64> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(g_of_r(r, params.k))
}

/// ∂g(x, s)/∂n with the derivative taken at the source `s` or the target `x`.
pub fn kernel_normal_derivative(
    x: &Point3,
    s: &Point3,
    n: &Point3,
    params: KernelParams,
    side: NormalSide,
) -> Result<Complex64> {
    let d = x - s;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    let proj = match side {
        NormalSide::AtSource => -d.dot(n),
        NormalSide::AtTarget => d.dot(n),
    };
    if proj == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(dg_over_r(r, params.k) * proj)
}

/// Gradient of g(x, s) with respect to x.
pub fn gradient_target(x: &Point3, s: &Point3, params: KernelParams) -> Result<[Complex64; 3]> {
    let d = x - s;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    let f = dg_over_r(r, params.k);
    Ok([f * d.x, f * d.y, f * d.z])
}

pub fn split_kernel(t: &Point3, s: &Point3, params: KernelParams, part: SplitPart) -> Result<Complex64> {
    let r = (t - s).norm();
    match part {
        SplitPart::Q0 => {
            if r == 0.0 {
                Err(Error::SingularEvaluation)
            } else {
                Ok(Complex64::new(1.0 / (FOUR_PI * r), 0.0))
            }
        }
        SplitPart::Q1 => Ok(q1_of_r(r, params.k)),
    }
}

/// Kernels of the boundary operators, as used by assembly. The double-layer
/// kernels carry the factor 2 that makes the traces read
/// w^± = ½(A′ ∓ I)μ and u_N^± = ½(A ± I)σ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelKind {
    Q,
    Q0,
    Q1,
    /// 2 ∂g/∂n_t: normal derivative of the single layer.
    A,
    /// 2 ∂g/∂n_s: double-layer kernel.
    Aprime,
}

impl KernelKind {
    /// Kernel of the transpose operator, K(s, t).
    pub fn transpose(self) -> Self {
        match self {
            KernelKind::A => KernelKind::Aprime,
            KernelKind::Aprime => KernelKind::A,
            other => other,
        }
    }

    /// Whether the kernel has the 1/r singularity.
    pub fn is_single_layer_like(self) -> bool {
        matches!(self, KernelKind::Q | KernelKind::Q0)
    }

    /// Evaluate at distinct points `t` (normal `nt`) and `s` (normal `ns`).
    /// Q1 is also defined at coincidence.
    #[inline]
    pub fn eval(self, t: &Point3, nt: &Point3, s: &Point3, ns: &Point3, k: f64) -> Complex64 {
        let d = t - s;
        let r = d.norm();
        match self {
            KernelKind::Q => g_of_r(r, k),
            KernelKind::Q0 => Complex64::new(1.0 / (FOUR_PI * r), 0.0),
            KernelKind::Q1 => q1_of_r(r, k),
            KernelKind::A => dg_over_r(r, k) * (2.0 * d.dot(nt)),
            KernelKind::Aprime => dg_over_r(r, k) * (-2.0 * d.dot(ns)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(k: f64) -> KernelParams {
        KernelParams::new(k).unwrap()
    }

    #[test]
    fn g_reference_values() {
        let g = helmholtz_g(&Point3::zeros(), &Point3::new(1.0, 0.0, 0.0), p(1.0)).unwrap();
        assert!((g.re - 1f64.cos() / (4.0 * PI)).abs() < 1e-16);
        assert!((g.im - 1f64.sin() / (4.0 * PI)).abs() < 1e-16);
        assert!((g - Complex64::new(0.0429959, 0.0669621)).norm() < 1e-7);
        let g2 = helmholtz_g(&Point3::zeros(), &Point3::new(0.0, 2.0, 0.0), p(PI)).unwrap();
        assert!((g2.re - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert!(g2.im.abs() < 1e-15);
        assert!(matches!(
            helmholtz_g(&Point3::zeros(), &Point3::zeros(), p(1.0)),
            Err(Error::SingularEvaluation)
        ));
    }

    #[test]
    fn wavenumber_must_be_positive() {
        assert!(KernelParams::new(0.0).is_err());
        assert!(KernelParams::new(-1.0).is_err());
        assert!(KernelParams::new(f64::NAN).is_err());
    }

    #[test]
    fn split_examples() {
        let q1 = split_kernel(&Point3::zeros(), &Point3::zeros(), p(2.0), SplitPart::Q1).unwrap();
        assert!(q1.re.abs() < 1e-15 && (q1.im - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let t = Point3::zeros();
        let s = Point3::new(0.0, 0.0, 1.0);
        let sum = split_kernel(&t, &s, p(1.0), SplitPart::Q0).unwrap()
            + split_kernel(&t, &s, p(1.0), SplitPart::Q1).unwrap();
        assert!((sum - helmholtz_g(&t, &s, p(1.0)).unwrap()).norm() < 1e-14);
        let q0 = split_kernel(&t, &Point3::new(0.5, 0.0, 0.0), p(1.0), SplitPart::Q0).unwrap();
        assert!((q0.re - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(split_kernel(&t, &t, p(1.0), SplitPart::Q0).is_err());
    }

    #[test]
    fn q1_small_r_branches_are_continuous() {
        let k = 3.0;
        for r in [5e-7, 1e-6, 2e-6, 1e-5] {
            let exact = (Complex64::new(0.0, k * r).exp() - 1.0) / (FOUR_PI * r);
            assert!((q1_of_r(r, k) - exact).norm() < 1e-9 * exact.norm().max(1.0));
        }
    }

    #[test]
    fn normal_derivative_examples() {
        let x = Point3::new(2.0, 0.0, 0.0);
        let s = Point3::zeros();
        let n = Point3::new(1.0, 0.0, 0.0);
        let v = kernel_normal_derivative(&x, &s, &n, p(1.0), NormalSide::AtSource).unwrap();
        let h = 1e-5;
        let fd = (helmholtz_g(&x, &(s + n * h), p(1.0)).unwrap() - helmholtz_g(&x, &(s - n * h), p(1.0)).unwrap())
            / (2.0 * h);
        assert!((v - fd).norm() < 1e-8);
        let tangent = Point3::new(0.0, 1.0, 0.0);
        let z = kernel_normal_derivative(&x, &s, &tangent, p(1.0), NormalSide::AtSource).unwrap();
        assert_eq!(z, Complex64::new(0.0, 0.0));
        let a = kernel_normal_derivative(&x, &s, &n, p(1.3), NormalSide::AtSource).unwrap();
        let b = kernel_normal_derivative(&s, &x, &n, p(1.3), NormalSide::AtTarget).unwrap();
        assert_eq!(a, b);
        assert!(kernel_normal_derivative(&x, &x, &n, p(1.0), NormalSide::AtTarget).is_err());
    }

    #[test]
    fn operator_kernels_are_transpose_dual() {
        let t = Point3::new(0.3, -0.2, 0.9);
        let s = Point3::new(-0.5, 0.4, 0.1);
        let nt = t.normalize();
        let ns = s.normalize();
        for kind in [KernelKind::Q, KernelKind::Q0, KernelKind::Q1, KernelKind::A, KernelKind::Aprime] {
            let a = kind.eval(&t, &nt, &s, &ns, 1.7);
            let b = kind.transpose().eval(&s, &ns, &t, &nt, 1.7);
            assert!((a - b).norm() < 1e-15 * a.norm().max(1.0));
        }
    }

    fn point() -> impl Strategy<Value = Point3> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c)| Point3::new(a, b, c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn g_is_symmetric(x in point(), y in point(), k in 0.1..10.0f64) {
            prop_assume!((x - y).norm() > 1e-9);
            let a = helmholtz_g(&x, &y, p(k)).unwrap();
            let b = helmholtz_g(&y, &x, p(k)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn split_identity_holds(x in point(), y in point(), k in 0.1..10.0f64) {
            prop_assume!((x - y).norm() > 1e-9);
            let g = helmholtz_g(&x, &y, p(k)).unwrap();
            let s = split_kernel(&x, &y, p(k), SplitPart::Q0).unwrap()
                + split_kernel(&x, &y, p(k), SplitPart::Q1).unwrap();
            prop_assert!((g - s).norm() <= 1e-14 * g.norm());
        }

        #[test]
        fn q1_is_bounded(r in 0.0..1.0f64, k in 0.1..10.0f64) {
            let q = q1_of_r(r, k);
            prop_assert!(q.norm() <= k / FOUR_PI * (1.0 + k * r) * (1.0 + 1e-12));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn normal_derivative_matches_finite_differences(
            x in point(), s in point(), n in point(), k in 0.1..5.0f64, at_source in any::<bool>()
        ) {
            prop_assume!((x - s).norm() > 0.1 && n.norm() > 0.1);
            let n = n.normalize();
            let h = 1e-5;
            let (side, fd) = if at_source {
                (NormalSide::AtSource,
                 (helmholtz_g(&x, &(s + n * h), p(k)).unwrap() - helmholtz_g(&x, &(s - n * h), p(k)).unwrap()) / (2.0 * h))
            } else {
                (NormalSide::AtTarget,
                 (helmholtz_g(&(x + n * h), &s, p(k)).unwrap() - helmholtz_g(&(x - n * h), &s, p(k)).unwrap()) / (2.0 * h))
            };
            let v = kernel_normal_derivative(&x, &s, &n, p(k), side).unwrap();
            let scale = helmholtz_g(&x, &s, p(k)).unwrap().norm() * (k + 1.0 / (x - s).norm());
            prop_assert!((v - fd).norm() <= 1e-7 * scale, "v={} fd={}", v, fd);
        }
    }
}

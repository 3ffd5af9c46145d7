//! Unit-sphere reference values: spherical Bessel functions, modal
//! eigenvalues of the boundary operators and the wavenumbers at which
//! N(Q) or N(A + I) become nontrivial.
//!
//! On the unit sphere every operator is diagonal in the spherical harmonics
//! and its eigenvalue on degree l is λ_l = 2π ∫_0^π K(N, s(θ)) P_l(cos θ) sin θ dθ
//! (Funk–Hecke). That integral is evaluated directly with the assembly
//! kernels and cross-checked against the Bessel closed forms.

use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::quadrature::{gauss_legendre_interval, legendre};
use crate::surface::Point3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MAX_DEGREE: usize = 50;
pub const MAX_MODAL_DEGREE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BesselKind {
    J,
    Y,
    H1,
}

/// j_0..=j_{l_max}(x) by normalised downward recurrence.
fn bessel_j_all(l_max: usize, x: f64) -> Vec<f64> {
    let start = l_max + x.ceil() as usize + 40;
    let mut f = vec![0.0; start + 2];
    f[start] = 1e-30;
    for n in (1..=start).rev() {
        f[n - 1] = (2.0 * n as f64 + 1.0) / x * f[n] - f[n + 1];
        if f[n - 1].abs() > 1e100 {
            for v in f.iter_mut() {
                *v *= 1e-100;
            }
        }
    }
    let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in f.iter_mut() {
        *v /= peak;
    }
    // Σ (2n+1) j_n(x)² = 1
    let norm: f64 = f.iter().enumerate().map(|(n, v)| (2.0 * n as f64 + 1.0) * v * v).sum::<f64>().sqrt();
    // fix the sign with j_0 or j_1, whichever is better conditioned
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let sign = if j0.abs() > j1.abs() { j0.signum() * f[0].signum() } else { j1.signum() * f[1].signum() };
    f.truncate(l_max + 1);
    f.iter().map(|v| sign * v / norm).collect()
}

/// y_0..=y_{l_max}(x) by upward recurrence.
fn bessel_y_all(l_max: usize, x: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(l_max + 1);
    y.push(-x.cos() / x);
    if l_max >= 1 {
        y.push(-x.cos() / (x * x) - x.sin() / x);
    }
    for n in 1..l_max {
        let next = (2.0 * n as f64 + 1.0) / x * y[n] - y[n - 1];
        y.push(next);
    }
    y
}

fn check_args(l: usize, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("spherical Bessel argument must be positive, got {x}")));
    }
    if l > MAX_DEGREE {
        return Err(Error::Domain(format!("degree {l} exceeds {MAX_DEGREE}")));
    }
    Ok(())
}

pub fn spherical_bessel(kind: BesselKind, l: usize, x: f64) -> Result<Complex64> {
    check_args(l, x)?;
    Ok(match kind {
        BesselKind::J => Complex64::new(bessel_j_all(l, x)[l], 0.0),
        BesselKind::Y => Complex64::new(bessel_y_all(l, x)[l], 0.0),
        BesselKind::H1 => Complex64::new(bessel_j_all(l, x)[l], bessel_y_all(l, x)[l]),
    })
}

/// Derivative with respect to x.
pub fn spherical_bessel_derivative(kind: BesselKind, l: usize, x: f64) -> Result<Complex64> {
    check_args(l, x)?;
    let deriv = |f: &[f64]| -> f64 {
        if l == 0 {
            -f[1]
        } else {
            f[l - 1] - (l as f64 + 1.0) / x * f[l]
        }
    };
    let j = || deriv(&bessel_j_all(l + 1, x));
    let y = || deriv(&bessel_y_all(l + 1, x));
    Ok(match kind {
        BesselKind::J => Complex64::new(j(), 0.0),
        BesselKind::Y => Complex64::new(y(), 0.0),
        BesselKind::H1 => Complex64::new(j(), y()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalKind {
    Q,
    Q0,
    A,
    Aprime,
}

impl ModalKind {
    fn kernel(self) -> KernelKind {
        match self {
            ModalKind::Q => KernelKind::Q,
            ModalKind::Q0 => KernelKind::Q0,
            ModalKind::A => KernelKind::A,
            ModalKind::Aprime => KernelKind::Aprime,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalMethod {
    BesselFormula,
    DirectQuadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalEigenvalue {
    pub kind: ModalKind,
    pub l: usize,
    pub k: f64,
    pub value: Complex64,
    pub method: ModalMethod,
    /// The other route's value, kept for diagnostics.
    pub cross_check: Complex64,
}

/// Closed-form eigenvalue on degree l of the unit sphere.
pub fn modal_formula(kind: ModalKind, l: usize, k: f64) -> Result<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    match kind {
        ModalKind::Q0 => Ok(Complex64::new(1.0 / (2.0 * l as f64 + 1.0), 0.0)),
        ModalKind::Q => {
            let j = spherical_bessel(BesselKind::J, l, k)?;
            let h = spherical_bessel(BesselKind::H1, l, k)?;
            Ok(i * k * j * h)
        }
        ModalKind::A | ModalKind::Aprime => {
            let j = spherical_bessel(BesselKind::J, l, k)?;
            let h = spherical_bessel(BesselKind::H1, l, k)?;
            let jp = spherical_bessel_derivative(BesselKind::J, l, k)?;
            let hp = spherical_bessel_derivative(BesselKind::H1, l, k)?;
            Ok(i * k * k * (j * hp + jp * h))
        }
    }
}

/// 2π ∫_0^π K(N, s(θ)) P_l(cos θ) sin θ dθ with the assembly kernels.
pub fn modal_quadrature(kind: ModalKind, l: usize, k: f64) -> Complex64 {
    let (theta, w) = gauss_legendre_interval(160, 0.0, PI);
    let north = Point3::new(0.0, 0.0, 1.0);
    let kernel = kind.kernel();
    let mut acc = Complex64::new(0.0, 0.0);
    for (&t, &wt) in theta.iter().zip(&w) {
        let s = Point3::new(t.sin(), 0.0, t.cos());
        let kv = kernel.eval(&north, &north, &s, &s, k);
        acc += kv * (wt * legendre(l, t.cos()) * t.sin());
    }
    acc * (2.0 * PI)
}

pub fn modal_eigenvalue(kind: ModalKind, l: usize, k: f64) -> Result<ModalEigenvalue> {
    if l > MAX_MODAL_DEGREE {
        return Err(Error::Domain(format!("modal degree {l} exceeds {MAX_MODAL_DEGREE}")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let formula = modal_formula(kind, l, k)?;
    let quad = modal_quadrature(kind, l, k);
    let scale = formula.norm().max(quad.norm());
    if (formula - quad).norm() > 1e-9 * scale + 1e-13 {
        return Err(Error::OracleInconsistency {
            kind: format!("{kind:?}"),
            l,
            k,
            formula: format!("{formula}"),
            quadrature: format!("{quad}"),
        });
    }
    Ok(ModalEigenvalue { kind, l, k, value: quad, method: ModalMethod::DirectQuadrature, cross_check: formula })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceType {
    /// Zero of j_l: N(Q) is nontrivial.
    DirichletLike,
    /// Zero of j_l′: N(A + I) is nontrivial.
    NeumannLike,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub k: f64,
    pub l: usize,
    #[serde(rename = "type")]
    pub kind: ResonanceType,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResonanceTable {
    pub entries: Vec<Resonance>,
}

impl ResonanceTable {
    /// Resonance closest to k, if any.
    pub fn nearest(&self, k: f64) -> Option<&Resonance> {
        self.entries.iter().min_by(|a, b| (a.k - k).abs().total_cmp(&(b.k - k).abs()))
    }

    pub fn of_type(&self, kind: ResonanceType) -> ResonanceTable {
        ResonanceTable { entries: self.entries.iter().filter(|r| r.kind == kind).cloned().collect() }
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a < 1e-14 * m.max(1.0) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Unit-sphere wavenumbers in (k_min, k_max) where Q (zeros of j_l) or
/// A + I (zeros of j_l′) has a nontrivial null space, for l ≤ l_max.
pub fn resonance_scan(k_min: f64, k_max: f64, l_max: usize) -> Result<ResonanceTable> {
    if !(k_min > 0.0 && k_max > k_min && k_max.is_finite()) {
        return Err(Error::Domain(format!("invalid scan range ({k_min}, {k_max})")));
    }
    if l_max > MAX_MODAL_DEGREE {
        return Err(Error::Domain(format!("scan degree {l_max} exceeds {MAX_MODAL_DEGREE}")));
    }
    let steps = ((k_max - k_min) / 0.005).ceil().max(1.0) as usize;
    let h = (k_max - k_min) / steps as f64;
    let mut entries = Vec::new();
    for l in 0..=l_max {
        let fj = |x: f64| spherical_bessel(BesselKind::J, l, x).map(|v| v.re).unwrap_or(f64::NAN);
        let fjp = |x: f64| spherical_bessel_derivative(BesselKind::J, l, x).map(|v| v.re).unwrap_or(f64::NAN);
        for (kind, f) in [
            (ResonanceType::DirichletLike, &fj as &dyn Fn(f64) -> f64),
            (ResonanceType::NeumannLike, &fjp as &dyn Fn(f64) -> f64),
        ] {
            let mut prev = f(k_min);
            for s in 1..=steps {
                let x = k_min + s as f64 * h;
                let cur = f(x);
                if prev != 0.0 && cur != 0.0 && (prev < 0.0) != (cur < 0.0) {
                    let root = bisect(f, x - h, x);
                    if root > k_min && root < k_max {
                        entries.push(Resonance { k: root, l, kind });
                    }
                } else if cur == 0.0 && x < k_max {
                    entries.push(Resonance { k: x, l, kind });
                }
                prev = cur;
            }
        }
    }
    entries.sort_by(|a, b| a.k.total_cmp(&b.k).then(a.l.cmp(&b.l)));
    Ok(ResonanceTable { entries })
}

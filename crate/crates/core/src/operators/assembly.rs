//! Band-limited Nyström assembly.
//!
//! Densities are split into a band part, spanned by B_lm = Y_lm(ŝ)/√J(ŝ) for
//! l ≤ res − 1 (orthonormal in the discrete weighted inner product), and its
//! weighted complement. The kernel action on each B_lm is integrated with a
//! polar rule centred on the target: the target is rotated to the pole of the
//! parameter sphere, where the area element sin θ′ cancels the 1/r
//! singularity and a Gauss rule in θ′ times a trapezoid rule in φ′ converges
//! spectrally. With P the weighted projector onto the band the operator is
//!
//!   M = K P + P K − P K P + (I − P) D (I − P),
//!
//! where K P and P K come from the kernel and its transpose (so that the
//! weighted transpose identities hold exactly) and D is the local self-patch
//! value of the 1/(4πr) singularity on the unresolved complement.

use super::rings::{signed_order, FourierBlocks};
use crate::harmonics;
use crate::kernels::KernelKind;
use crate::quadrature::gauss_legendre_interval;
use crate::surface::{Point3, QuadratureSurface};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Extra Gauss nodes in θ′ beyond the band degree.
const ROTATED_EXTRA: usize = 12;

struct RotatedRule {
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    /// Gauss weight × sin θ′ × Δφ′.
    weight: Vec<f64>,
    cos_p: Vec<f64>,
    sin_p: Vec<f64>,
}

impl RotatedRule {
    fn new(l_max: usize) -> Self {
        let n_t = l_max + 1 + ROTATED_EXTRA;
        let n_p = 2 * n_t;
        let (theta, w) = gauss_legendre_interval(n_t, 0.0, PI);
        let dphi = 2.0 * PI / n_p as f64;
        let phis: Vec<f64> = (0..n_p).map(|q| q as f64 * dphi).collect();
        RotatedRule {
            cos_t: theta.iter().map(|t| t.cos()).collect(),
            sin_t: theta.iter().map(|t| t.sin()).collect(),
            weight: theta.iter().zip(&w).map(|(t, wt)| wt * t.sin() * dphi).collect(),
            cos_p: phis.iter().map(|p| p.cos()).collect(),
            sin_p: phis.iter().map(|p| p.sin()).collect(),
        }
    }
}

fn tangent_frame(t: &Point3) -> (Point3, Point3) {
    let helper = if t.z.abs() < 0.9 { Point3::z() } else { Point3::x() };
    let e1 = helper.cross(t).normalize();
    let e2 = t.cross(&e1);
    (e1, e2)
}

/// C_K[i, p] = ∫ K(t_i, s) B_p(s) dS(s) for the requested kernels and
/// target nodes. Returns one `targets.len() × count(l_max)` matrix per kind.
pub(crate) fn band_columns(
    surface: &QuadratureSurface,
    k: f64,
    kinds: &[KernelKind],
    targets: &[usize],
) -> Vec<DMatrix<Complex64>> {
    let l_max = surface.band_degree();
    let nb = harmonics::count(l_max);
    let rule = RotatedRule::new(l_max);
    let shape = surface.shape();
    let rows: Vec<Vec<Vec<Complex64>>> = targets
        .par_iter()
        .map(|&i| {
            let tp = surface.params()[i];
            let t = surface.nodes()[i];
            let nt = surface.normals()[i];
            let (e1, e2) = tangent_frame(&tp);
            let mut acc = vec![vec![Complex64::new(0.0, 0.0); nb]; kinds.len()];
            let mut ybuf = vec![Complex64::new(0.0, 0.0); nb];
            let mut kv = vec![Complex64::new(0.0, 0.0); kinds.len()];
            for j in 0..rule.cos_t.len() {
                for q in 0..rule.cos_p.len() {
                    let dir = e1 * rule.cos_p[q] + e2 * rule.sin_p[q];
                    let s_hat = tp * rule.cos_t[j] + dir * rule.sin_t[j];
                    let sp = shape.map(&s_hat);
                    let wt = rule.weight[j] * sp.jacobian.sqrt();
                    for (v, kind) in kv.iter_mut().zip(kinds) {
                        *v = kind.eval(&t, &nt, &sp.position, &sp.normal, k) * wt;
                    }
                    harmonics::ylm_into(l_max, &s_hat, &mut ybuf);
                    for (row, &v) in acc.iter_mut().zip(&kv) {
                        for (r, y) in row.iter_mut().zip(&ybuf) {
                            *r += v * y;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    (0..kinds.len())
        .map(|kk| DMatrix::from_fn(targets.len(), nb, |r, p| rows[r][kk][p]))
        .collect()
}

/// Nodal samples of the band basis, n × count(l_max).
pub(crate) fn band_basis(surface: &QuadratureSurface) -> DMatrix<Complex64> {
    let l_max = surface.band_degree();
    let nb = harmonics::count(l_max);
    let mut y = DMatrix::zeros(surface.len(), nb);
    let mut buf = vec![Complex64::new(0.0, 0.0); nb];
    for i in 0..surface.len() {
        harmonics::ylm_into(l_max, &surface.params()[i], &mut buf);
        let s = 1.0 / surface.jacobians()[i].sqrt();
        for p in 0..nb {
            y[(i, p)] = buf[p] * s;
        }
    }
    y
}

/// Self-patch value of 1/(4πr) over a disc with the node's area.
pub(crate) fn complement_diagonal(surface: &QuadratureSurface) -> Vec<f64> {
    surface.weights().iter().map(|w| 0.5 * (w / PI).sqrt()).collect()
}

fn scale_cols(m: &DMatrix<Complex64>, s: &[f64]) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for (j, &v) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(v);
    }
    out
}

fn scale_rows(m: &DMatrix<Complex64>, s: &[f64]) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for (i, &v) in s.iter().enumerate() {
        out.row_mut(i).scale_mut(v);
    }
    out
}

/// Dense assembly on a general surface. `ck` and `ckt` are the band columns
/// of the kernel and of its transpose for every node.
pub(crate) fn dense_operator(
    surface: &QuadratureSurface,
    y: &DMatrix<Complex64>,
    ck: &DMatrix<Complex64>,
    ckt: &DMatrix<Complex64>,
    complement: Option<&[f64]>,
) -> DMatrix<Complex64> {
    let w = surface.weights();
    let yhw = scale_cols(&y.adjoint(), w);
    let ybar = y.conjugate();
    let ytw = scale_cols(&y.transpose(), w);
    let g = (&ytw * ck + (&ytw * ckt).transpose()) * Complex64::new(0.5, 0.0);
    let mut m = ck * &yhw + &ybar * scale_cols(&ckt.transpose(), w) - &ybar * (g * &yhw);
    if let Some(d) = complement {
        // (I − P) D (I − P) with P = Y Yᴴ W
        let yhwd = scale_cols(&yhw, d);
        let dy = scale_rows(y, d);
        let inner = &yhwd * y;
        let corr = y * &yhwd + &dy * &yhw - y * (inner * &yhw);
        m -= corr;
        for (i, &di) in d.iter().enumerate() {
            m[(i, i)] += di;
        }
    }
    m
}

/// Band-basis samples and band columns restricted to one azimuthal order.
struct OrderSlices {
    y: DMatrix<Complex64>,
    ck: DMatrix<Complex64>,
    ckt: DMatrix<Complex64>,
}

fn order_slices(
    y_ring: &DMatrix<f64>,
    ck_ring: &DMatrix<Complex64>,
    ckt_ring: &DMatrix<Complex64>,
    l_max: usize,
    m: i64,
) -> OrderSlices {
    let cols: Vec<usize> = (m.unsigned_abs() as usize..=l_max).map(|l| harmonics::index(l, m)).collect();
    let nt = y_ring.nrows();
    OrderSlices {
        y: DMatrix::from_fn(nt, cols.len(), |a, c| Complex64::new(y_ring[(a, cols[c])], 0.0)),
        ck: DMatrix::from_fn(nt, cols.len(), |a, c| ck_ring[(a, cols[c])]),
        ckt: DMatrix::from_fn(nt, cols.len(), |a, c| ckt_ring[(a, cols[c])]),
    }
}

/// Ring samples y_lm[a] of the band basis at longitude 0 (real).
pub(crate) fn ring_basis(surface: &QuadratureSurface) -> DMatrix<f64> {
    let l_max = surface.band_degree();
    let nb = harmonics::count(l_max);
    let n_phi = surface.n_phi();
    let mut y = DMatrix::zeros(surface.n_theta(), nb);
    let mut buf = vec![Complex64::new(0.0, 0.0); nb];
    for a in 0..surface.n_theta() {
        let i = a * n_phi;
        harmonics::ylm_into(l_max, &surface.params()[i], &mut buf);
        let s = 1.0 / surface.jacobians()[i].sqrt();
        for p in 0..nb {
            y[(a, p)] = buf[p].re * s;
        }
    }
    y
}

/// Fourier-block assembly on a surface of revolution. `ck_ring`/`ckt_ring`
/// are band columns for the longitude-0 node of every ring.
pub(crate) fn ring_operator(
    surface: &QuadratureSurface,
    y_ring: &DMatrix<f64>,
    ck_ring: &DMatrix<Complex64>,
    ckt_ring: &DMatrix<Complex64>,
    complement: Option<&[f64]>,
) -> FourierBlocks {
    let nt = surface.n_theta();
    let np = surface.n_phi();
    let l_max = surface.band_degree() as i64;
    let w_ring: Vec<f64> = (0..nt).map(|a| surface.weights()[a * np]).collect();
    let d_ring: Option<Vec<f64>> = complement.map(|d| (0..nt).map(|a| d[a * np]).collect());
    let npf = Complex64::new(np as f64, 0.0);
    let half_np = Complex64::new(0.5 * np as f64, 0.0);
    let id = DMatrix::<Complex64>::identity(nt, nt);
    let blocks = (0..np)
        .map(|mu| {
            let m = signed_order(mu, np);
            let mut block = DMatrix::zeros(nt, nt);
            let mut proj = DMatrix::zeros(nt, nt);
            if m.abs() <= l_max {
                let sp = order_slices(y_ring, ck_ring, ckt_ring, l_max as usize, m);
                let sn = order_slices(y_ring, ck_ring, ckt_ring, l_max as usize, -m);
                let ymt_w = scale_cols(&sp.y.transpose(), &w_ring);
                let term1 = &sp.ck * &ymt_w;
                let term2 = &sn.y * scale_cols(&sn.ckt.transpose(), &w_ring);
                let ynt_w = scale_cols(&sn.y.transpose(), &w_ring);
                let g = (&ynt_w * &sp.ck + (&ymt_w * &sn.ckt).transpose()) * half_np;
                let term3 = &sn.y * g * &ymt_w;
                block = (term1 + term2 - term3) * npf;
                proj = &sp.y * &ymt_w * npf;
            }
            if let Some(d) = &d_ring {
                let e = &id - &proj;
                block += scale_cols(&e, d) * &e;
            }
            block
        })
        .collect();
    FourierBlocks::new(nt, np, blocks)
}

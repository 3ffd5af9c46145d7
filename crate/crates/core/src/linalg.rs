//! Dense spectral computations in the weighted L²(S) geometry.
//!
//! All decompositions act on W^{1/2} M W^{-1/2}, so that singular vectors
//! are orthonormal in the discrete H⁰ inner product after unweighting. On
//! surfaces of revolution the unitary longitude DFT block-diagonalises the
//! matrix and every decomposition is done block by block.

use crate::error::{check_len, Error, Result};
use crate::operators::rings::{forward, inverse};
use crate::operators::BoundaryOperator;
use crate::surface::QuadratureSurface;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
enum Layout {
    Dense,
    Rings { n_theta: usize, n_phi: usize },
}

#[derive(Clone, Debug)]
struct SvdPart {
    u: DMatrix<Complex64>,
    s: Vec<f64>,
    v: DMatrix<Complex64>,
}

/// Singular value decomposition of W^{1/2} M W^{-1/2}.
#[derive(Clone, Debug)]
pub struct WeightedSvd {
    layout: Layout,
    parts: Vec<SvdPart>,
    sqrt_w: Vec<f64>,
    /// (σ, part, column), σ descending.
    order: Vec<(f64, usize, usize)>,
}

fn sqrt_weights(surface: &QuadratureSurface) -> Vec<f64> {
    surface.weights().iter().map(|w| w.sqrt()).collect()
}

fn weighted_dense(m: &DMatrix<Complex64>, sw: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (sw[i] / sw[j]))
}

fn to_faer(m: &DMatrix<Complex64>) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn svd_part(m: DMatrix<Complex64>) -> Result<SvdPart> {
    let svd = to_faer(&m)
        .svd()
        .map_err(|e| Error::Factorization(format!("SVD did not converge: {e:?}")))?;
    let s = svd.S().column_vector().iter().map(|z| z.re).collect();
    Ok(SvdPart { u: from_faer(svd.U()), s, v: from_faer(svd.V()) })
}

fn singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    to_faer(m)
        .singular_values()
        .map_err(|e| Error::Factorization(format!("SVD did not converge: {e:?}")))
}

fn check_surface(op: &BoundaryOperator, surface: &QuadratureSurface) -> Result<()> {
    if op.surface_id() != &surface.id() {
        return Err(Error::SurfaceMismatch);
    }
    Ok(())
}

/// Ring weights (constant along each ring).
fn ring_sqrt_weights(sw: &[f64], n_theta: usize, n_phi: usize) -> Vec<f64> {
    (0..n_theta).map(|a| sw[a * n_phi]).collect()
}

impl WeightedSvd {
    pub fn new(op: &BoundaryOperator, surface: &QuadratureSurface) -> Result<Self> {
        check_surface(op, surface)?;
        let sqrt_w = sqrt_weights(surface);
        let (layout, parts) = match op.blocks() {
            Some(fb) => {
                let (nt, np) = (fb.n_theta(), fb.n_phi());
                let rw = ring_sqrt_weights(&sqrt_w, nt, np);
                let parts = fb
                    .blocks()
                    .iter()
                    .map(|b| svd_part(weighted_dense(b, &rw)))
                    .collect::<Result<Vec<_>>>()?;
                (Layout::Rings { n_theta: nt, n_phi: np }, parts)
            }
            None => (Layout::Dense, vec![svd_part(weighted_dense(op.matrix(), &sqrt_w))?]),
        };
        let mut order: Vec<(f64, usize, usize)> = parts
            .iter()
            .enumerate()
            .flat_map(|(pi, p)| p.s.iter().enumerate().map(move |(j, &s)| (s, pi, j)))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        Ok(WeightedSvd { layout, parts, sqrt_w, order })
    }

    /// All singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        self.order.iter().map(|o| o.0).collect()
    }

    pub fn sigma_max(&self) -> f64 {
        self.order.first().map(|o| o.0).unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.order.last().map(|o| o.0).unwrap_or(0.0)
    }

    /// Coordinates of a nodal vector in each part (unitary transform).
    fn to_parts(&self, v: &DVector<Complex64>) -> Vec<DVector<Complex64>> {
        match self.layout {
            Layout::Dense => vec![v.clone()],
            Layout::Rings { n_theta, n_phi } => {
                let s = 1.0 / (n_phi as f64).sqrt();
                forward(v, n_theta, n_phi).into_iter().map(|x| x * Complex64::new(s, 0.0)).collect()
            }
        }
    }

    fn join_parts(&self, parts: &[DVector<Complex64>]) -> DVector<Complex64> {
        match self.layout {
            Layout::Dense => parts[0].clone(),
            Layout::Rings { n_theta, n_phi } => inverse(parts, n_theta, n_phi) * Complex64::new((n_phi as f64).sqrt(), 0.0),
        }
    }

    /// Nodal (Euclidean-unit) vector from a column of one part.
    fn expand(&self, part: usize, col: DVector<Complex64>) -> DVector<Complex64> {
        match self.layout {
            Layout::Dense => col,
            Layout::Rings { n_theta, n_phi } => {
                let mut parts = vec![DVector::zeros(n_theta); n_phi];
                parts[part] = col;
                self.join_parts(&parts)
            }
        }
    }

    fn unweight(&self, mut v: DVector<Complex64>) -> DVector<Complex64> {
        for (x, s) in v.iter_mut().zip(&self.sqrt_w) {
            *x /= *s;
        }
        v
    }

    /// W^{-1/2} v_j for every σ_j ≤ threshold, smallest σ first. These are
    /// H⁰-orthonormal null vectors of M.
    pub fn right_vectors_below(&self, threshold: f64) -> Vec<(f64, DVector<Complex64>)> {
        self.order
            .iter()
            .rev()
            .filter(|o| o.0 <= threshold)
            .map(|&(s, pi, j)| (s, self.unweight(self.expand(pi, self.parts[pi].v.column(j).into_owned()))))
            .collect()
    }

    /// W^{-1/2} conj(u_j) for every σ_j ≤ threshold: the densities p with
    /// ∫_S (M x) p ds ≈ 0 for all x (bilinear annihilators of the range).
    pub fn left_vectors_below(&self, threshold: f64) -> Vec<(f64, DVector<Complex64>)> {
        self.order
            .iter()
            .rev()
            .filter(|o| o.0 <= threshold)
            .map(|&(s, pi, j)| {
                let u = self.expand(pi, self.parts[pi].u.column(j).into_owned());
                (s, self.unweight(u.conjugate()))
            })
            .collect()
    }

    /// Minimum-norm least-squares solution of M x = f with singular values
    /// ≤ threshold discarded.
    pub fn pseudo_solve(&self, f: &DVector<Complex64>, threshold: f64) -> Result<DVector<Complex64>> {
        check_len(self.sqrt_w.len(), f.len())?;
        let fw = DVector::from_fn(f.len(), |i, _| f[i] * self.sqrt_w[i]);
        let coords = self.to_parts(&fw);
        let sol: Vec<DVector<Complex64>> = self
            .parts
            .iter()
            .zip(&coords)
            .map(|(p, c)| {
                let mut z = DVector::zeros(p.v.nrows());
                for (j, &s) in p.s.iter().enumerate() {
                    if s > threshold && s > 0.0 {
                        let coef = p.u.column(j).dotc(c) / s;
                        z += p.v.column(j) * coef;
                    }
                }
                z
            })
            .collect();
        let mut x = self.join_parts(&sol);
        for (v, s) in x.iter_mut().zip(&self.sqrt_w) {
            *v /= *s;
        }
        Ok(x)
    }

    /// Rebuild W^{1/2} M W^{-1/2} from the factors.
    pub fn reconstruct_weighted(&self) -> DMatrix<Complex64> {
        let n = self.sqrt_w.len();
        let mut out = DMatrix::zeros(n, n);
        for (pi, p) in self.parts.iter().enumerate() {
            for (j, &s) in p.s.iter().enumerate() {
                let u = self.expand(pi, p.u.column(j).into_owned());
                let v = self.expand(pi, p.v.column(j).into_owned());
                out += u * v.adjoint() * Complex64::new(s, 0.0);
            }
        }
        out
    }
}

/// Weighted singular values only, descending.
pub fn weighted_singular_values(op: &BoundaryOperator, surface: &QuadratureSurface) -> Result<Vec<f64>> {
    check_surface(op, surface)?;
    let sw = sqrt_weights(surface);
    let mut s: Vec<f64> = match op.blocks() {
        Some(fb) => {
            let rw = ring_sqrt_weights(&sw, fb.n_theta(), fb.n_phi());
            let mut all = Vec::with_capacity(op.dim());
            for b in fb.blocks() {
                all.extend(singular_values(&weighted_dense(b, &rw))?);
            }
            all
        }
        None => singular_values(&weighted_dense(op.matrix(), &sw))?,
    };
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Eigenvalues of the Hermitian part of W^{1/2} M W^{-1/2}, ascending.
pub fn weighted_hermitian_eigenvalues(op: &BoundaryOperator, surface: &QuadratureSurface) -> Result<Vec<f64>> {
    check_surface(op, surface)?;
    let sw = sqrt_weights(surface);
    let herm = |m: DMatrix<Complex64>| -> Result<Vec<f64>> {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        to_faer(&h)
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Factorization(format!("eigensolver did not converge: {e:?}")))
    };
    let mut e: Vec<f64> = match op.blocks() {
        Some(fb) => {
            let rw = ring_sqrt_weights(&sw, fb.n_theta(), fb.n_phi());
            let mut all = Vec::with_capacity(op.dim());
            for b in fb.blocks() {
                all.extend(herm(weighted_dense(b, &rw))?);
            }
            all
        }
        None => herm(weighted_dense(op.matrix(), &sw))?,
    };
    e.sort_by(|a, b| a.total_cmp(b));
    Ok(e)
}

/// Solve M x = f by LU factorisation.
pub fn lu_solve(op: &BoundaryOperator, f: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    check_len(op.matrix().nrows(), f.len())?;
    let singular = || Error::Factorization(format!("{} is numerically singular", op.label()));
    match op.blocks() {
        Some(fb) => {
            let (nt, np) = (fb.n_theta(), fb.n_phi());
            let fh = forward(f, nt, np);
            let xs = fb
                .blocks()
                .iter()
                .zip(&fh)
                .map(|(b, r)| b.clone().lu().solve(r).ok_or_else(singular))
                .collect::<Result<Vec<_>>>()?;
            Ok(inverse(&xs, nt, np))
        }
        None => op.matrix().clone().lu().solve(f).ok_or_else(singular),
    }
}

/// Relative residual ‖M x − f‖_W / ‖f‖_W (0 when f = 0 and M x = 0).
pub fn weighted_residual(
    op: &BoundaryOperator,
    surface: &QuadratureSurface,
    x: &DVector<Complex64>,
    f: &DVector<Complex64>,
) -> Result<f64> {
    check_len(surface.len(), x.len())?;
    check_len(surface.len(), f.len())?;
    let r = op.matrix() * x - f;
    let nr = surface.h0_norm(r.as_slice())?;
    let nf = surface.h0_norm(f.as_slice())?;
    Ok(if nf > 0.0 { nr / nf } else { nr })
}

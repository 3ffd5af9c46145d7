//! Dense solves under the Fredholm alternative: null spaces from the
//! weighted SVD, compatibility pairings against the transpose null space,
//! and minimum-norm solutions.

use crate::error::{check_len, Error, Result};
use crate::kernels::KernelParams;
use crate::linalg::{weighted_residual, weighted_singular_values, WeightedSvd};
use crate::operators::{assemble, BoundaryOperator, DensityRole, OperatorKind, SurfaceDensity};
use crate::surface::QuadratureSurface;
use num_complex::Complex64;
use serde::Serialize;

/// Default null-space threshold relative to the largest singular value.
pub const DEFAULT_NULL_THRESHOLD: f64 = 1e-6;

/// Number of smallest singular values kept for diagnostics.
const TAIL_LEN: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct NullSpaceBasis {
    pub operator_kind: OperatorKind,
    pub label: String,
    /// H⁰-orthonormal densities, smallest singular value first.
    pub vectors: Vec<SurfaceDensity>,
    /// Relative threshold: σ_j ≤ threshold_used·σ_max counts as zero.
    pub threshold_used: f64,
    pub sigma_max: f64,
    /// The smallest singular values, ascending.
    pub singular_values_tail: Vec<f64>,
}

impl NullSpaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FredholmSolveReport {
    pub solution: SurfaceDensity,
    /// ‖M x − rhs‖ / ‖rhs‖ in H⁰ (0 for a zero rhs solved exactly).
    pub residual_rel: f64,
    /// Dimension of the discarded (numerical) null space of the operator.
    pub null_dim: usize,
    /// max_j |∫_S rhs·p_j ds| over the transpose null basis.
    pub rhs_incompat_norm: f64,
    pub compatible: bool,
    /// The solution is the minimum-norm one (the operator had a null space).
    pub min_norm: bool,
}

/// Weighted SVD of one operator, reused for null spaces and solves.
pub struct FredholmSolver<'a> {
    op: &'a BoundaryOperator,
    surface: &'a QuadratureSurface,
    svd: WeightedSvd,
}

fn tail(svd: &WeightedSvd) -> Vec<f64> {
    let mut s = svd.singular_values();
    s.reverse();
    s.truncate(TAIL_LEN);
    s
}

fn check_threshold(rel: f64) -> Result<()> {
    if !(rel > 0.0 && rel < 1.0) {
        return Err(Error::Usage(format!("relative threshold {rel} must lie in (0, 1)")));
    }
    Ok(())
}

impl<'a> FredholmSolver<'a> {
    pub fn new(op: &'a BoundaryOperator, surface: &'a QuadratureSurface) -> Result<Self> {
        let svd = WeightedSvd::new(op, surface)?;
        Ok(FredholmSolver { op, surface, svd })
    }

    pub fn svd(&self) -> &WeightedSvd {
        &self.svd
    }

    fn absolute(&self, rel: f64) -> f64 {
        let smax = self.svd.sigma_max();
        // a zero operator: every direction is null
        if smax == 0.0 {
            f64::INFINITY
        } else {
            rel * smax
        }
    }

    fn basis(&self, label: String, rel: f64, vectors: Vec<(f64, nalgebra::DVector<Complex64>)>) -> NullSpaceBasis {
        NullSpaceBasis {
            operator_kind: self.op.kind(),
            label,
            vectors: vectors
                .into_iter()
                .map(|(_, v)| SurfaceDensity { values: v, role: DensityRole::NullVector, surface: self.surface.id() })
                .collect(),
            threshold_used: rel,
            sigma_max: self.svd.sigma_max(),
            singular_values_tail: tail(&self.svd),
        }
    }

    /// Densities x with M x ≈ 0.
    pub fn null_space(&self, rel_threshold: f64) -> Result<NullSpaceBasis> {
        check_threshold(rel_threshold)?;
        let v = self.svd.right_vectors_below(self.absolute(rel_threshold));
        Ok(self.basis(self.op.label().to_string(), rel_threshold, v))
    }

    /// Densities p with ∫_S (M x) p ds ≈ 0 for every x: the null space of
    /// the weighted transpose W⁻¹MᵀW, read off the left singular vectors.
    pub fn adjoint_null_space(&self, rel_threshold: f64) -> Result<NullSpaceBasis> {
        check_threshold(rel_threshold)?;
        let v = self.svd.left_vectors_below(self.absolute(rel_threshold));
        Ok(self.basis(format!("{}^t", self.op.label()), rel_threshold, v))
    }

    /// Solve M x = rhs. Compatibility is judged against `adjoint_null`; the
    /// solution is the truncated-SVD minimum-norm least-squares solution,
    /// which for an incompatible rhs solves the projected system.
    pub fn solve(&self, rhs: &SurfaceDensity, adjoint_null: &NullSpaceBasis, tol: f64) -> Result<FredholmSolveReport> {
        rhs.check_surface(self.surface)?;
        check_len(self.op.dim(), rhs.len())?;
        let rhs_norm = self.surface.h0_norm(rhs.values.as_slice())?;
        let pairings = compatibility_pairing(self.surface, rhs, adjoint_null, false)?;
        let incompat = pairings.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let compatible = incompat <= tol * rhs_norm;
        let thr = self.absolute(adjoint_null.threshold_used);
        let null_dim = self.svd.singular_values().iter().filter(|&&s| s <= thr).count();
        let x = if rhs_norm == 0.0 {
            nalgebra::DVector::zeros(rhs.len())
        } else {
            self.svd.pseudo_solve(&rhs.values, thr)?
        };
        let residual_rel = weighted_residual(self.op, self.surface, &x, &rhs.values)?;
        let role = match rhs.role {
            DensityRole::Sigma => DensityRole::Mu,
            DensityRole::Mu => DensityRole::Sigma,
            _ => DensityRole::Image(format!("solution of {}", self.op.label())),
        };
        Ok(FredholmSolveReport {
            solution: SurfaceDensity { values: x, role, surface: self.surface.id() },
            residual_rel,
            null_dim,
            rhs_incompat_norm: incompat,
            compatible,
            min_norm: null_dim > 0,
        })
    }
}

pub fn null_space(op: &BoundaryOperator, surface: &QuadratureSurface, rel_threshold: f64) -> Result<NullSpaceBasis> {
    FredholmSolver::new(op, surface)?.null_space(rel_threshold)
}

pub fn solve_fredholm(
    op: &BoundaryOperator,
    surface: &QuadratureSurface,
    rhs: &SurfaceDensity,
    adjoint_null: &NullSpaceBasis,
    tol: f64,
) -> Result<FredholmSolveReport> {
    FredholmSolver::new(op, surface)?.solve(rhs, adjoint_null, tol)
}

/// ∫_S f·p ds (or ∫_S f·p̄ ds when `conjugate`) for each basis vector p.
pub fn compatibility_pairing(
    surface: &QuadratureSurface,
    f: &SurfaceDensity,
    basis: &NullSpaceBasis,
    conjugate: bool,
) -> Result<Vec<Complex64>> {
    f.check_surface(surface)?;
    basis
        .vectors
        .iter()
        .map(|p| {
            p.check_surface(surface)?;
            if conjugate {
                surface.inner(f.values.as_slice(), p.values.as_slice())
            } else {
                surface.integrate(f.values.component_mul(&p.values).as_slice())
            }
        })
        .collect()
}

/// Smallest weighted singular value of an operator at k and at k ± offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResonanceDip {
    pub k: f64,
    pub sigma_min: f64,
    pub sigma_min_below: f64,
    pub sigma_min_above: f64,
    /// min(σ_min(k − offset), σ_min(k + offset)) / σ_min(k).
    pub ratio: f64,
}

pub fn smallest_singular_value(surface: &QuadratureSurface, kind: OperatorKind, k: f64) -> Result<f64> {
    let op = assemble(surface, KernelParams::new(k)?, kind)?;
    let s = weighted_singular_values(&op, surface)?;
    Ok(s.last().copied().unwrap_or(0.0))
}

pub fn resonance_dip(surface: &QuadratureSurface, kind: OperatorKind, k: f64, offset: f64) -> Result<ResonanceDip> {
    if !(offset > 0.0 && offset < k) {
        return Err(Error::Usage(format!("offset {offset} must lie in (0, k)")));
    }
    let sigma_min = smallest_singular_value(surface, kind, k)?;
    let below = smallest_singular_value(surface, kind, k - offset)?;
    let above = smallest_singular_value(surface, kind, k + offset)?;
    let ratio = if sigma_min > 0.0 { below.min(above) / sigma_min } else { f64::INFINITY };
    Ok(ResonanceDip { k, sigma_min, sigma_min_below: below, sigma_min_above: above, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::assemble_many;
    use crate::surface::{build_surface, ShapeDescriptor};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(res: usize) -> QuadratureSurface {
        build_surface(&ShapeDescriptor::sphere(1.0), res).unwrap()
    }

    fn q_at(s: &QuadratureSurface, k: f64) -> BoundaryOperator {
        assemble(s, KernelParams::new(k).unwrap(), OperatorKind::Q).unwrap()
    }

    fn constant(s: &QuadratureSurface) -> SurfaceDensity {
        SurfaceDensity::from_fn(s, DensityRole::Sigma, |_, _| Complex64::new(1.0, 0.0))
    }

    fn random_density(s: &QuadratureSurface, rng: &mut ChaCha8Rng, role: DensityRole) -> SurfaceDensity {
        let values = DVector::from_iterator(
            s.len(),
            (0..s.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
        );
        SurfaceDensity::new(s, values, role).unwrap()
    }

    #[test]
    fn q_at_k1_has_no_null_space() {
        let s = sphere(12);
        let q = q_at(&s, 1.0);
        assert_eq!(null_space(&q, &s, 1e-6).unwrap().dim(), 0);
    }

    #[test]
    fn q_at_pi_has_the_constant_mode() {
        let s = sphere(24);
        let q = q_at(&s, std::f64::consts::PI);
        let solver = FredholmSolver::new(&q, &s).unwrap();
        let ns = solver.null_space(1e-3).unwrap();
        assert_eq!(ns.dim(), 1);
        let one = constant(&s);
        let v = &ns.vectors[0].values;
        let corr = s.inner(v.as_slice(), one.values.as_slice()).unwrap().norm()
            / (s.h0_norm(v.as_slice()).unwrap() * s.h0_norm(one.values.as_slice()).unwrap());
        assert!(corr >= 0.99, "{corr}");
        assert!((s.h0_norm(v.as_slice()).unwrap() - 1.0).abs() < 1e-10);
        let qv = q.apply_values(v).unwrap();
        assert!(s.h0_norm(qv.as_slice()).unwrap() <= 1e-3 * ns.sigma_max);

        let adj = solver.adjoint_null_space(1e-3).unwrap();
        let rep = solver.solve(&one, &adj, 1e-6).unwrap();
        assert!(!rep.compatible);
        assert!(rep.min_norm);
        assert!(rep.rhs_incompat_norm > 0.9 * s.h0_norm(one.values.as_slice()).unwrap());
    }

    #[test]
    fn zero_operator_is_all_null() {
        let s = sphere(4);
        let q = q_at(&s, 1.0).affine(0.0, 0.0);
        assert_eq!(null_space(&q, &s, 1e-6).unwrap().dim(), s.len());
    }

    #[test]
    fn nonsingular_solve_matches_lu() {
        let s = build_surface(&ShapeDescriptor::ellipsoid(1.0, 0.9, 0.7), 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = assemble_many(&s, KernelParams::new(1.0).unwrap(), &[OperatorKind::Q, OperatorKind::A]).unwrap();
        for op in [&ops[0], &ops[1].affine(0.5, 0.5)] {
            let f = random_density(&s, &mut rng, DensityRole::Sigma);
            let solver = FredholmSolver::new(op, &s).unwrap();
            let adj = solver.adjoint_null_space(DEFAULT_NULL_THRESHOLD).unwrap();
            assert!(adj.is_empty());
            let rep = solver.solve(&f, &adj, 1e-6).unwrap();
            assert!(rep.compatible && !rep.min_norm);
            assert!(rep.residual_rel <= 1e-8, "{}", rep.residual_rel);
            let x = crate::linalg::lu_solve(op, &f.values).unwrap();
            assert!((&x - &rep.solution.values).norm() <= 1e-8 * x.norm());
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let s = sphere(8);
        let q = q_at(&s, 1.0);
        let adj = FredholmSolver::new(&q, &s).unwrap().adjoint_null_space(1e-6).unwrap();
        let rep = solve_fredholm(&q, &s, &SurfaceDensity::zeros(&s, DensityRole::Sigma), &adj, 1e-6).unwrap();
        assert!(rep.compatible);
        assert_eq!(rep.solution.values, DVector::zeros(s.len()));
        assert_eq!(rep.residual_rel, 0.0);
    }

    #[test]
    fn pairings_at_pi() {
        let s = sphere(16);
        let q = q_at(&s, std::f64::consts::PI);
        let solver = FredholmSolver::new(&q, &s).unwrap();
        let adj = solver.adjoint_null_space(1e-3).unwrap();
        assert_eq!(adj.dim(), 1);
        // zero-mean density
        let f = SurfaceDensity::from_fn(&s, DensityRole::Sigma, |x, _| Complex64::new(x.z, x.x * x.y));
        let fnorm = s.h0_norm(f.values.as_slice()).unwrap();
        for conj in [false, true] {
            let p = compatibility_pairing(&s, &f, &adj, conj).unwrap();
            assert!(p[0].norm() <= 1e-6 * fnorm, "{}", p[0]);
        }
        // p against itself, after rotating p to be real
        let p0 = &adj.vectors[0];
        let phase = p0.values.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        let rot = phase.conj() / phase.norm();
        let real_p = SurfaceDensity { values: &p0.values * rot, ..p0.clone() };
        let rb = NullSpaceBasis { vectors: vec![real_p.clone()], ..adj.clone() };
        let self_pair = compatibility_pairing(&s, &real_p, &rb, false).unwrap()[0];
        assert!((self_pair - Complex64::new(1.0, 0.0)).norm() < 1e-6, "{self_pair}");
        let empty = NullSpaceBasis { vectors: vec![], ..adj };
        assert!(compatibility_pairing(&s, &f, &empty, false).unwrap().is_empty());
    }

    #[test]
    fn transpose_null_space_equals_null_space_for_q() {
        let s = sphere(16);
        let q = q_at(&s, std::f64::consts::PI);
        let solver = FredholmSolver::new(&q, &s).unwrap();
        let ns = solver.null_space(1e-3).unwrap();
        let via_left = solver.adjoint_null_space(1e-3).unwrap();
        let qt = q.weighted_transpose(&s).unwrap();
        let via_transpose = null_space(&qt, &s, 1e-3).unwrap();
        for other in [&via_left, &via_transpose] {
            assert_eq!(other.dim(), ns.dim());
            // principal angle between one-dimensional spans
            let c = s.inner(ns.vectors[0].values.as_slice(), other.vectors[0].values.as_slice()).unwrap().norm();
            assert!((1.0 - c).abs() <= 1e-6, "{c}");
        }
        // the unconjugated pairing with N(Q) and with N(Qᵗ) accept the same
        // right-hand sides
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = &ns.vectors[0];
        for _ in 0..100 {
            let mut f = random_density(&s, &mut rng, DensityRole::Sigma);
            if rng.gen_bool(0.5) {
                // remove the null component so both outcomes occur
                let c = compatibility_pairing(&s, &f, &ns, false).unwrap()[0]
                    / s.integrate(p.values.component_mul(&p.values).as_slice()).unwrap();
                f.values -= &p.values * c;
            }
            let nf = s.h0_norm(f.values.as_slice()).unwrap();
            let a = compatibility_pairing(&s, &f, &ns, false).unwrap()[0].norm() <= 1e-6 * nf;
            let b = compatibility_pairing(&s, &f, &via_transpose, false).unwrap()[0].norm() <= 1e-6 * nf;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn threshold_robust_off_resonance() {
        let s = sphere(12);
        let q = q_at(&s, 2.0);
        let solver = FredholmSolver::new(&q, &s).unwrap();
        let dims: Vec<usize> = [1e-8, 1e-6, 1e-4].iter().map(|&t| solver.null_space(t).unwrap().dim()).collect();
        assert!(dims.iter().all(|&d| d == dims[0]));
        assert!(matches!(solver.null_space(1.5), Err(Error::Usage(_))));
    }

    #[test]
    fn svd_reconstructs_the_weighted_matrix() {
        let s = build_surface(&ShapeDescriptor::ellipsoid(1.0, 0.8, 0.6), 6).unwrap();
        let q = q_at(&s, 1.5);
        let svd = WeightedSvd::new(&q, &s).unwrap();
        let sw: Vec<f64> = s.weights().iter().map(|w| w.sqrt()).collect();
        let m = nalgebra::DMatrix::from_fn(s.len(), s.len(), |i, j| q.matrix()[(i, j)] * (sw[i] / sw[j]));
        let e = (svd.reconstruct_weighted() - &m).norm() / m.norm();
        assert!(e <= 1e-10, "{e}");
        let rings = sphere(8);
        let qr = q_at(&rings, 1.5);
        let svd = WeightedSvd::new(&qr, &rings).unwrap();
        let sw: Vec<f64> = rings.weights().iter().map(|w| w.sqrt()).collect();
        let m = nalgebra::DMatrix::from_fn(rings.len(), rings.len(), |i, j| qr.matrix()[(i, j)] * (sw[i] / sw[j]));
        assert!((svd.reconstruct_weighted() - &m).norm() <= 1e-10 * m.norm());
    }

    #[test]
    fn dips_at_sphere_resonances() {
        let s = sphere(16);
        for k in [std::f64::consts::PI, 4.493409457909064] {
            let d = resonance_dip(&s, OperatorKind::Q, k, 0.2).unwrap();
            assert!(d.ratio >= 10.0, "{k}: {d:?}");
        }
        let d = resonance_dip(&s, OperatorKind::Q, 2.0, 0.2).unwrap();
        assert!(d.ratio < 10.0, "{d:?}");
    }
}

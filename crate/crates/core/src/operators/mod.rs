//! Boundary operators Q, A, A′, Q0, Q1 and the factor B = I + Q1·Q0⁻¹ as
//! dense complex matrices acting on nodal densities, with quadrature weights
//! folded into the columns: (M v)_i ≈ ∫_S K(t_i, s) v(s) ds.

pub(crate) mod assembly;
pub mod rings;

use crate::error::{check_len, Error, Result};
use crate::kernels::{KernelKind, KernelParams};
use crate::surface::{Point3, QuadratureSurface, SurfaceId};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rings::FourierBlocks;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    Q,
    A,
    Aprime,
    Q0,
    Q1,
    FactorB,
    /// Linear combination of the above with the identity.
    Combination,
}

impl OperatorKind {
    /// Tag written into binary matrix dumps.
    pub fn tag(self) -> u64 {
        match self {
            OperatorKind::Q => 0,
            OperatorKind::A => 1,
            OperatorKind::Aprime => 2,
            OperatorKind::Q0 => 3,
            OperatorKind::Q1 => 4,
            OperatorKind::FactorB => 5,
            OperatorKind::Combination => 6,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "Q" | "q" => Ok(OperatorKind::Q),
            "A" | "a" => Ok(OperatorKind::A),
            "Aprime" | "aprime" | "A'" => Ok(OperatorKind::Aprime),
            "Q0" | "q0" => Ok(OperatorKind::Q0),
            "Q1" | "q1" => Ok(OperatorKind::Q1),
            "FactorB" | "factorb" | "B" => Ok(OperatorKind::FactorB),
            other => Err(Error::Usage(format!("unknown operator kind '{other}'"))),
        }
    }

    fn kernels(self) -> Result<(Vec<KernelKind>, bool)> {
        // (base kernels needed, whether the complement carries the self-patch)
        match self {
            OperatorKind::Q => Ok((vec![KernelKind::Q0, KernelKind::Q1], true)),
            OperatorKind::Q0 => Ok((vec![KernelKind::Q0], true)),
            OperatorKind::Q1 => Ok((vec![KernelKind::Q1], false)),
            OperatorKind::A => Ok((vec![KernelKind::A, KernelKind::Aprime], false)),
            OperatorKind::Aprime => Ok((vec![KernelKind::Aprime, KernelKind::A], false)),
            other => Err(Error::Usage(format!("{other} is not assembled from a kernel"))),
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OperatorKind::Q => "Q",
            OperatorKind::A => "A",
            OperatorKind::Aprime => "Aprime",
            OperatorKind::Q0 => "Q0",
            OperatorKind::Q1 => "Q1",
            OperatorKind::FactorB => "FactorB",
            OperatorKind::Combination => "Combination",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityRole {
    Mu,
    Sigma,
    Eta,
    NullVector,
    Trace,
    /// Result of applying an operator.
    Image(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceDensity {
    pub values: DVector<Complex64>,
    pub role: DensityRole,
    pub surface: SurfaceId,
}

impl Serialize for SurfaceDensity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SurfaceDensity", 3)?;
        st.serialize_field("role", &self.role)?;
        st.serialize_field("surface", &self.surface)?;
        st.serialize_field("values", self.values.as_slice())?;
        st.end()
    }
}

impl SurfaceDensity {
    pub fn new(surface: &QuadratureSurface, values: DVector<Complex64>, role: DensityRole) -> Result<Self> {
        check_len(surface.len(), values.len())?;
        Ok(SurfaceDensity { values, role, surface: surface.id() })
    }

    pub fn zeros(surface: &QuadratureSurface, role: DensityRole) -> Self {
        SurfaceDensity { values: DVector::zeros(surface.len()), role, surface: surface.id() }
    }

    /// Sample `f(node, parameter_point)` at every node.
    pub fn from_fn<F>(surface: &QuadratureSurface, role: DensityRole, f: F) -> Self
    where
        F: Fn(&Point3, &Point3) -> Complex64,
    {
        let values = DVector::from_iterator(
            surface.len(),
            surface.nodes().iter().zip(surface.params()).map(|(x, s)| f(x, s)),
        );
        SurfaceDensity { values, role, surface: surface.id() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_role(mut self, role: DensityRole) -> Self {
        self.role = role;
        self
    }

    pub fn check_surface(&self, surface: &QuadratureSurface) -> Result<()> {
        if self.surface != surface.id() {
            return Err(Error::SurfaceMismatch);
        }
        check_len(surface.len(), self.len())
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    kind: OperatorKind,
    label: String,
    surface: SurfaceId,
    k: f64,
    matrix: DMatrix<Complex64>,
    blocks: Option<FourierBlocks>,
    q0_condition: Option<f64>,
}

impl BoundaryOperator {
    fn from_parts(
        kind: OperatorKind,
        label: String,
        surface: SurfaceId,
        k: f64,
        matrix: DMatrix<Complex64>,
        blocks: Option<FourierBlocks>,
    ) -> Self {
        BoundaryOperator { kind, label, surface, k, matrix, blocks, q0_condition: None }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Human-readable description, e.g. "0.5*(Aprime - I)".
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn surface_id(&self) -> &SurfaceId {
        &self.surface
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Longitude Fourier blocks, present on surfaces of revolution.
    pub fn blocks(&self) -> Option<&FourierBlocks> {
        self.blocks.as_ref()
    }

    /// Condition estimate of Q0 recorded by [`build_factor_b`].
    pub fn q0_condition(&self) -> Option<f64> {
        self.q0_condition
    }

    pub fn apply(&self, density: &SurfaceDensity) -> Result<SurfaceDensity> {
        if density.surface != self.surface {
            return Err(Error::SurfaceMismatch);
        }
        check_len(self.dim(), density.len())?;
        Ok(SurfaceDensity {
            values: &self.matrix * &density.values,
            role: DensityRole::Image(self.label.clone()),
            surface: self.surface.clone(),
        })
    }

    pub fn apply_values(&self, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        check_len(self.dim(), v.len())?;
        Ok(&self.matrix * v)
    }

    /// alpha·M + beta·I.
    pub fn affine(&self, alpha: f64, beta: f64) -> BoundaryOperator {
        let a = Complex64::new(alpha, 0.0);
        let b = Complex64::new(beta, 0.0);
        let mut m = &self.matrix * a;
        for i in 0..m.nrows() {
            m[(i, i)] += b;
        }
        let label = match (alpha, beta) {
            (x, 0.0) => format!("{x}*{}", self.label),
            (1.0, y) => format!("({} {} {}*I)", self.label, sign(y), y.abs()),
            (x, y) => format!("{x}*({} {} {}*I)", self.label, sign(y), y.abs() / x.abs()),
        };
        BoundaryOperator::from_parts(
            OperatorKind::Combination,
            label,
            self.surface.clone(),
            self.k,
            m,
            self.blocks.as_ref().map(|fb| fb.affine(a, b)),
        )
    }

    /// Plain matrix transpose.
    pub fn transpose(&self) -> BoundaryOperator {
        BoundaryOperator::from_parts(
            OperatorKind::Combination,
            format!("{}^T", self.label),
            self.surface.clone(),
            self.k,
            self.matrix.transpose(),
            self.blocks.as_ref().map(|fb| fb.transpose()),
        )
    }

    /// Transpose for the bilinear pairing ∫_S f g ds: W⁻¹ Mᵀ W, so that
    /// ∫ (M x) y = ∫ x (Mᵗ y).
    pub fn weighted_transpose(&self, surface: &QuadratureSurface) -> Result<BoundaryOperator> {
        if self.surface != surface.id() {
            return Err(Error::SurfaceMismatch);
        }
        let w = surface.weights();
        let mt = self.matrix.transpose();
        let matrix = DMatrix::from_fn(self.dim(), self.dim(), |i, j| mt[(i, j)] * (w[j] / w[i]));
        let blocks = self.blocks.as_ref().map(|fb| {
            let np = fb.n_phi();
            let rw: Vec<f64> = (0..fb.n_theta()).map(|a| w[a * np]).collect();
            let scaled = fb
                .transpose()
                .blocks()
                .iter()
                .map(|b| DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * (rw[j] / rw[i])))
                .collect();
            FourierBlocks::new(fb.n_theta(), np, scaled)
        });
        Ok(BoundaryOperator::from_parts(
            OperatorKind::Combination,
            format!("{}^t", self.label),
            self.surface.clone(),
            self.k,
            matrix,
            blocks,
        ))
    }

    /// Sum of two operators on the same surface.
    pub fn add(&self, other: &BoundaryOperator) -> Result<BoundaryOperator> {
        if self.surface != other.surface {
            return Err(Error::SurfaceMismatch);
        }
        let blocks = match (&self.blocks, &other.blocks) {
            (Some(a), Some(b)) => Some(a.add(b)),
            _ => None,
        };
        Ok(BoundaryOperator::from_parts(
            OperatorKind::Combination,
            format!("({} + {})", self.label, other.label),
            self.surface.clone(),
            self.k,
            &self.matrix + &other.matrix,
            blocks,
        ))
    }

    /// Write the binary dump: n (u64 LE), kind tag (u64 LE), then the
    /// row-major matrix as interleaved little-endian f64 re/im pairs.
    pub fn write_dump<W: Write>(&self, out: &mut W) -> Result<()> {
        let n = self.dim() as u64;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&self.kind.tag().to_le_bytes())?;
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                let z = self.matrix[(i, j)];
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

fn sign(x: f64) -> char {
    if x < 0.0 {
        '-'
    } else {
        '+'
    }
}

/// Assemble one operator.
pub fn assemble(surface: &QuadratureSurface, params: KernelParams, kind: OperatorKind) -> Result<BoundaryOperator> {
    Ok(assemble_many(surface, params, &[kind])?.remove(0))
}

/// Assemble several operators, sharing the singular quadrature work.
pub fn assemble_many(
    surface: &QuadratureSurface,
    params: KernelParams,
    kinds: &[OperatorKind],
) -> Result<Vec<BoundaryOperator>> {
    assemble_impl(surface, params, kinds, surface.is_axisymmetric())
}

pub(crate) fn assemble_impl(
    surface: &QuadratureSurface,
    params: KernelParams,
    kinds: &[OperatorKind],
    axisymmetric: bool,
) -> Result<Vec<BoundaryOperator>> {
    let mut base: Vec<KernelKind> = Vec::new();
    for kind in kinds {
        for kk in kind.kernels()?.0 {
            if !base.contains(&kk) {
                base.push(kk);
            }
        }
    }
    let targets: Vec<usize> = if axisymmetric {
        (0..surface.n_theta()).map(|a| a * surface.n_phi()).collect()
    } else {
        (0..surface.len()).collect()
    };
    let cols = assembly::band_columns(surface, params.k, &base, &targets);
    let col: BTreeMap<KernelKind, &DMatrix<Complex64>> = base.iter().cloned().zip(cols.iter()).collect();
    let patch = assembly::complement_diagonal(surface);
    let y_dense = if axisymmetric { None } else { Some(assembly::band_basis(surface)) };
    let y_ring = if axisymmetric { Some(assembly::ring_basis(surface)) } else { None };

    let mut out = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let (kernels, with_patch) = kind.kernels()?;
        let (ck, ckt): (DMatrix<Complex64>, DMatrix<Complex64>) = if kind == OperatorKind::Q {
            let c = col[&KernelKind::Q0] + col[&KernelKind::Q1];
            (c.clone(), c)
        } else {
            let ck = col[&kernels[0]].clone();
            let ckt = col[&kernels[kernels.len() - 1]].clone();
            (ck, ckt)
        };
        let complement = if with_patch { Some(patch.as_slice()) } else { None };
        let (matrix, blocks) = if let Some(yr) = &y_ring {
            let fb = assembly::ring_operator(surface, yr, &ck, &ckt, complement);
            (fb.to_dense(), Some(fb))
        } else {
            let y = y_dense.as_ref().expect("dense basis");
            (assembly::dense_operator(surface, y, &ck, &ckt, complement), None)
        };
        out.push(BoundaryOperator::from_parts(
            kind,
            kind.to_string(),
            surface.id(),
            params.k,
            matrix,
            blocks,
        ));
    }
    Ok(out)
}

/// B = I + Q1·Q0⁻¹.
pub fn build_factor_b(q0: &BoundaryOperator, q1: &BoundaryOperator) -> Result<BoundaryOperator> {
    if q0.kind != OperatorKind::Q0 || q1.kind != OperatorKind::Q1 {
        return Err(Error::Usage(format!(
            "factor B needs (Q0, Q1), got ({}, {})",
            q0.kind, q1.kind
        )));
    }
    if q0.surface != q1.surface {
        return Err(Error::SurfaceMismatch);
    }
    let singular = || Error::Factorization("Q0 is numerically singular".into());
    let (matrix, blocks, cond) = match (&q0.blocks, &q1.blocks) {
        (Some(b0), Some(b1)) => {
            let nt = b0.n_theta();
            let id = DMatrix::<Complex64>::identity(nt, nt);
            let mut cond: f64 = 0.0;
            let mut smax: f64 = 0.0;
            let mut smin = f64::INFINITY;
            let mut out = Vec::with_capacity(b0.n_phi());
            for (m0, m1) in b0.blocks().iter().zip(b1.blocks()) {
                let sv = m0.singular_values();
                smax = smax.max(sv.max());
                smin = smin.min(sv.min());
                // X Q0 = Q1  ⇔  Q0ᵀ Xᵀ = Q1ᵀ
                let xt = m0.transpose().lu().solve(&m1.transpose()).ok_or_else(singular)?;
                out.push(&id + xt.transpose());
            }
            if smin > 0.0 {
                cond = smax / smin;
            }
            let fb = FourierBlocks::new(nt, b0.n_phi(), out);
            (fb.to_dense(), Some(fb), if cond > 0.0 { cond } else { f64::INFINITY })
        }
        _ => {
            let inv = q0.matrix.clone().try_inverse().ok_or_else(singular)?;
            let cond = norm1(&q0.matrix) * norm1(&inv);
            let mut b = &q1.matrix * &inv;
            for i in 0..b.nrows() {
                b[(i, i)] += Complex64::new(1.0, 0.0);
            }
            (b, None, cond)
        }
    };
    if !cond.is_finite() || cond > 1e14 {
        return Err(singular());
    }
    let mut op = BoundaryOperator::from_parts(
        OperatorKind::FactorB,
        "FactorB".into(),
        q0.surface.clone(),
        q0.k,
        matrix,
        blocks,
    );
    op.q0_condition = Some(cond);
    Ok(op)
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// ‖W M − (W M)ᵀ‖_F / ‖W M‖_F.
pub fn weighted_symmetry_defect(op: &BoundaryOperator, surface: &QuadratureSurface) -> Result<f64> {
    let wm = weighted_left(op, surface)?;
    let n = wm.norm();
    Ok(if n > 0.0 { (&wm - wm.transpose()).norm() / n } else { 0.0 })
}

/// ‖W A′ − (W A)ᵀ‖_F / ‖W A‖_F.
pub fn transpose_duality_defect(
    aprime: &BoundaryOperator,
    a: &BoundaryOperator,
    surface: &QuadratureSurface,
) -> Result<f64> {
    let wap = weighted_left(aprime, surface)?;
    let wa = weighted_left(a, surface)?;
    let n = wa.norm();
    Ok(if n > 0.0 { (&wap - wa.transpose()).norm() / n } else { 0.0 })
}

fn weighted_left(op: &BoundaryOperator, surface: &QuadratureSurface) -> Result<DMatrix<Complex64>> {
    if op.surface != surface.id() {
        return Err(Error::SurfaceMismatch);
    }
    let w = surface.weights();
    Ok(DMatrix::from_fn(op.dim(), op.dim(), |i, j| op.matrix[(i, j)] * w[i]))
}

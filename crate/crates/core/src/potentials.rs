//! Off-surface evaluation of the single-layer potential u(x, σ) and the
//! double-layer potential w(x, μ), boundary traces, and residual checks
//! (jumps, two-sided normal derivative, Green's identity, radiation).
//!
//! Near-surface accuracy comes from upsampling: the band part of the density
//! (harmonics of degree < res divided by √J) is resynthesised on a finer
//! grid of the same family, chosen so that the evaluation distance is at
//! least four fine grid spacings; the unresolved complement part is summed on
//! the coarse grid.

use crate::error::{check_len, Error, Result};
use crate::harmonics;
use crate::kernels::{dg_over_r, KernelParams};
use crate::operators::assembly::band_basis;
use crate::operators::{BoundaryOperator, DensityRole, OperatorKind, SurfaceDensity};
use crate::surface::{build_surface, Point3, QuadratureSurface};
use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Largest upsampling factor of the evaluation grid.
pub const MAX_UPSAMPLING: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Single,
    Double,
}

/// Side of S a limit is taken from: plus from D (interior), minus from D′.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceQuantity {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    pub side: Side,
    pub quantity: TraceQuantity,
    pub values: DVector<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    /// The point was closer to S than the accuracy guard.
    pub degraded: bool,
}

#[derive(Clone, Copy, Debug)]
enum Probe {
    Value,
    Derivative(Point3),
}

struct FineGrid {
    surface: QuadratureSurface,
    values: OnceLock<Vec<Complex64>>,
    /// S'[a, m + L]: band density on fine ring a, azimuthal order m.
    rings: OnceLock<DMatrix<Complex64>>,
}

/// u(x, σ) or w(x, μ) bound to a surface, density and wavenumber.
pub struct PotentialField {
    layer: Layer,
    k: f64,
    density: SurfaceDensity,
    surface: QuadratureSurface,
    band: DVector<Complex64>,
    complement: DVector<Complex64>,
    /// Most recently used fine grid, keyed by upsampling factor.
    fine: Mutex<Option<(usize, Arc<FineGrid>)>>,
}

#[inline]
fn field_kernel(layer: Layer, probe: Probe, x: &Point3, s: &Point3, ns: &Point3, k: f64) -> Complex64 {
    let d = x - s;
    let r = d.norm();
    match (layer, probe) {
        (Layer::Single, Probe::Value) => Complex64::from_polar(1.0 / (4.0 * PI * r), k * r),
        (Layer::Double, Probe::Value) => dg_over_r(r, k) * (-d.dot(ns)),
        (Layer::Single, Probe::Derivative(dir)) => dg_over_r(r, k) * d.dot(&dir),
        (Layer::Double, Probe::Derivative(dir)) => {
            let g = Complex64::from_polar(1.0 / (4.0 * PI * r), k * r);
            let kr = k * r;
            let f1 = g * Complex64::new(3.0 - kr * kr, -3.0 * kr) / r.powi(4);
            f1 * (d.dot(&dir) * -d.dot(ns)) - dg_over_r(r, k) * ns.dot(&dir)
        }
    }
}

impl PotentialField {
    pub fn new(surface: &QuadratureSurface, layer: Layer, density: SurfaceDensity, params: KernelParams) -> Result<Self> {
        density.check_surface(surface)?;
        let y = band_basis(surface);
        let wv = DVector::from_fn(surface.len(), |i, _| density.values[i] * surface.weights()[i]);
        let band = y.adjoint() * wv;
        let complement = &density.values - &y * &band;
        Ok(PotentialField {
            layer,
            k: params.k,
            density,
            surface: surface.clone(),
            band,
            complement,
            fine: Mutex::new(None),
        })
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn density(&self) -> &SurfaceDensity {
        &self.density
    }

    pub fn surface(&self) -> &QuadratureSurface {
        &self.surface
    }

    /// Points closer to S than this are flagged as degraded.
    pub fn accuracy_guard(&self) -> f64 {
        2.0 * self.surface.grid_spacing() / MAX_UPSAMPLING as f64
    }

    /// Distance to S estimated from the nearest node: the smaller of the node
    /// distance and the offset from that node's tangent plane.
    fn surface_distance(&self, x: &Point3) -> f64 {
        let s = &self.surface;
        let mut best = (f64::INFINITY, 0);
        for (i, t) in s.nodes().iter().enumerate() {
            let d = (x - t).norm_squared();
            if d < best.0 {
                best = (d, i);
            }
        }
        let i = best.1;
        best.0.sqrt().min((x - s.nodes()[i]).dot(&s.normals()[i]).abs())
    }

    fn upsampling_for(&self, dist: f64) -> usize {
        let h = self.surface.grid_spacing();
        let want = (4.0 * h / dist.max(1e-300)).ceil();
        (want as usize).clamp(2, MAX_UPSAMPLING)
    }

    fn fine_grid(&self, up: usize) -> Result<Arc<FineGrid>> {
        let mut cached = self.fine.lock().expect("fine-grid cache poisoned");
        if let Some((u, f)) = cached.as_ref() {
            if *u == up {
                return Ok(f.clone());
            }
        }
        *cached = None;
        let surface = build_surface(self.surface.shape(), self.surface.resolution() * up)?;
        let f = Arc::new(FineGrid { surface, values: OnceLock::new(), rings: OnceLock::new() });
        *cached = Some((up, f.clone()));
        Ok(f)
    }

    fn fine_values<'a>(&self, fine: &'a FineGrid) -> &'a [Complex64] {
        fine.values.get_or_init(|| {
            let l_max = self.surface.band_degree();
            let fs = &fine.surface;
            (0..fs.len())
                .into_par_iter()
                .map(|i| {
                    let y = harmonics::ylm_all(l_max, &fs.params()[i]);
                    let v: Complex64 = y.iter().zip(self.band.iter()).map(|(a, b)| a * b).sum();
                    v / fs.jacobians()[i].sqrt()
                })
                .collect()
        })
    }

    fn fine_rings<'a>(&self, fine: &'a FineGrid) -> &'a DMatrix<Complex64> {
        fine.rings.get_or_init(|| {
            let l_max = self.surface.band_degree();
            let fs = &fine.surface;
            let np = fs.n_phi();
            let mut out = DMatrix::zeros(fs.n_theta(), 2 * l_max + 1);
            for a in 0..fs.n_theta() {
                let i = a * np;
                let y = harmonics::ylm_all(l_max, &fs.params()[i]);
                let sj = 1.0 / fs.jacobians()[i].sqrt();
                for l in 0..=l_max {
                    for m in -(l as i64)..=(l as i64) {
                        let idx = harmonics::index(l, m);
                        out[(a, (m + l_max as i64) as usize)] += self.band[idx] * y[idx].re * sj;
                    }
                }
            }
            out
        })
    }

    fn coarse_complement(&self, probe: Probe, x: &Point3) -> Complex64 {
        let s = &self.surface;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..s.len() {
            let c = self.complement[i];
            if c != Complex64::new(0.0, 0.0) {
                acc += field_kernel(self.layer, probe, x, &s.nodes()[i], &s.normals()[i], self.k) * (c * s.weights()[i]);
            }
        }
        acc
    }

    fn eval_direct(&self, probe: Probe, x: &Point3, fine: &FineGrid) -> Complex64 {
        let vals = self.fine_values(fine);
        let fs = &fine.surface;
        let mut acc = Complex64::new(0.0, 0.0);
        for (((y, n), v), w) in fs.nodes().iter().zip(fs.normals()).zip(vals).zip(fs.weights()) {
            acc += field_kernel(self.layer, probe, x, y, n, self.k) * (v * w);
        }
        acc + self.coarse_complement(probe, x)
    }

    fn evaluate_points(&self, probes: &[(Point3, Probe)]) -> Result<Vec<Evaluation>> {
        if self.density.values.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(vec![Evaluation { value: Complex64::new(0.0, 0.0), degraded: false }; probes.len()]);
        }
        let guard = self.accuracy_guard();
        let dists: Vec<f64> = probes.iter().map(|(x, _)| self.surface_distance(x)).collect();
        let mut out = vec![Evaluation { value: Complex64::new(0.0, 0.0), degraded: false }; probes.len()];
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &d) in dists.iter().enumerate() {
            groups.entry(self.upsampling_for(d)).or_default().push(i);
        }
        for (up, idx) in groups {
            let fine = self.fine_grid(up)?;
            self.fine_values(&fine);
            let vals: Vec<Complex64> = idx
                .par_iter()
                .map(|&i| self.eval_direct(probes[i].1, &probes[i].0, &fine))
                .collect();
            for (&i, v) in idx.iter().zip(vals) {
                out[i].value = v;
            }
        }
        for (i, &d) in dists.iter().enumerate() {
            if d < guard {
                out[i].degraded = true;
                warn!(
                    "evaluation point {:?} is {:.3e} from the surface (guard {:.3e}); accuracy degraded",
                    probes[i].0.as_slice(),
                    d,
                    guard
                );
            }
        }
        Ok(out)
    }

    pub fn eval(&self, x: &Point3) -> Result<Evaluation> {
        Ok(self.evaluate_points(&[(*x, Probe::Value)])?[0])
    }

    pub fn eval_batch(&self, xs: &[Point3]) -> Result<Vec<Evaluation>> {
        let probes: Vec<(Point3, Probe)> = xs.iter().map(|x| (*x, Probe::Value)).collect();
        self.evaluate_points(&probes)
    }

    /// ∇field(x)·d.
    pub fn directional_derivative(&self, x: &Point3, d: &Point3) -> Result<Evaluation> {
        Ok(self.evaluate_points(&[(*x, Probe::Derivative(*d))])?[0])
    }

    /// Field (or its derivative along the node normal) at t_i + δ n_i for
    /// every node i and each signed offset δ.
    fn node_offsets(&self, offsets: &[f64], derivative: bool) -> Result<Vec<DVector<Complex64>>> {
        let s = &self.surface;
        if s.is_axisymmetric() {
            return offsets.iter().map(|&d| self.node_offsets_rings(d, derivative)).collect();
        }
        let mut out = Vec::with_capacity(offsets.len());
        for &delta in offsets {
            let probes: Vec<(Point3, Probe)> = s
                .nodes()
                .iter()
                .zip(s.normals())
                .map(|(t, n)| (t + n * delta, if derivative { Probe::Derivative(*n) } else { Probe::Value }))
                .collect();
            let ev = self.evaluate_points(&probes)?;
            out.push(DVector::from_iterator(ev.len(), ev.iter().map(|e| e.value)));
        }
        Ok(out)
    }

    /// Ring-family evaluation on a surface of revolution: the points
    /// t + δ n of ring a are rotations of the longitude-0 point, so one
    /// kernel sweep over the fine grid plus a longitude DFT gives them all.
    fn node_offsets_rings(&self, delta: f64, derivative: bool) -> Result<DVector<Complex64>> {
        let s = &self.surface;
        let (nt, np) = (s.n_theta(), s.n_phi());
        if self.density.values.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(DVector::zeros(s.len()));
        }
        let dist = (0..nt)
            .map(|a| self.surface_distance(&(s.nodes()[a * np] + s.normals()[a * np] * delta)))
            .fold(f64::INFINITY, f64::min);
        if delta.abs() < self.accuracy_guard() {
            warn!("offset {delta:.3e} is inside the accuracy guard {:.3e}", self.accuracy_guard());
        }
        let up = self.upsampling_for(dist);
        let fine = self.fine_grid(up)?;
        let rings = self.fine_rings(&fine).clone();
        let fs = &fine.surface;
        let (ntf, npf) = (fs.n_theta(), fs.n_phi());
        let l_max = s.band_degree() as i64;
        let n_orders = (2 * l_max + 1) as usize;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(npf);
        let rows: Vec<Vec<Complex64>> = (0..nt)
            .into_par_iter()
            .map(|a| {
                let i0 = a * np;
                let x = s.nodes()[i0] + s.normals()[i0] * delta;
                let probe = if derivative { Probe::Derivative(s.normals()[i0]) } else { Probe::Value };
                // G[m] = Σ_a'' S'[a'', m] Σ_c K(x, s_{a'',c}) w e^{imφ_c}
                let mut g = vec![Complex64::new(0.0, 0.0); n_orders];
                let mut buf = vec![Complex64::new(0.0, 0.0); npf];
                for af in 0..ntf {
                    for (c, v) in buf.iter_mut().enumerate() {
                        let j = af * npf + c;
                        *v = field_kernel(self.layer, probe, &x, &fs.nodes()[j], &fs.normals()[j], self.k) * fs.weights()[j];
                    }
                    fft.process(&mut buf);
                    for (mi, gv) in g.iter_mut().enumerate() {
                        let m = mi as i64 - l_max;
                        *gv += rings[(af, mi)] * buf[m.rem_euclid(npf as i64) as usize];
                    }
                }
                // complement on the coarse grid: circular correlation over longitude
                let mut kc = vec![Complex64::new(0.0, 0.0); s.len()];
                for (j, v) in kc.iter_mut().enumerate() {
                    *v = field_kernel(self.layer, probe, &x, &s.nodes()[j], &s.normals()[j], self.k) * s.weights()[j];
                }
                (0..np)
                    .map(|b| {
                        let phi = s.phi(b);
                        let mut v = Complex64::new(0.0, 0.0);
                        for (mi, gv) in g.iter().enumerate() {
                            let m = (mi as i64 - l_max) as f64;
                            v += gv * Complex64::from_polar(1.0, m * phi);
                        }
                        for ap in 0..nt {
                            for c in 0..np {
                                v += kc[ap * np + c] * self.complement[ap * np + (c + b) % np];
                            }
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        Ok(DVector::from_iterator(s.len(), rows.into_iter().flatten()))
    }
}

/// Boundary traces from the assembled matrices:
/// w^± = ½(A′ ∓ I)μ, u_N^± = ½(A ± I)σ, and u^± = Qσ.
pub fn trace(op: &BoundaryOperator, density: &SurfaceDensity, side: Side, quantity: TraceQuantity) -> Result<BoundaryTrace> {
    if density.surface != *op.surface_id() {
        return Err(Error::SurfaceMismatch);
    }
    let applied = op.apply_values(&density.values)?;
    let v = &density.values;
    let values = match (op.kind(), quantity, &density.role) {
        (OperatorKind::Aprime, TraceQuantity::Dirichlet, DensityRole::Mu) => match side {
            Side::Plus => (applied - v) * Complex64::new(0.5, 0.0),
            Side::Minus => (applied + v) * Complex64::new(0.5, 0.0),
        },
        (OperatorKind::A, TraceQuantity::Neumann, DensityRole::Sigma) => match side {
            Side::Plus => (applied + v) * Complex64::new(0.5, 0.0),
            Side::Minus => (applied - v) * Complex64::new(0.5, 0.0),
        },
        (OperatorKind::Q, TraceQuantity::Dirichlet, DensityRole::Sigma) => applied,
        (kind, q, role) => {
            return Err(Error::Usage(format!(
                "no {q:?} trace from operator {kind} with a {role:?} density"
            )))
        }
    };
    Ok(BoundaryTrace { side, quantity, values })
}

/// Polynomial extrapolation of (x_j, f_j) to x = 0 (Neville).
pub fn extrapolate_to_zero(xs: &[f64], fs: &[Complex64]) -> Complex64 {
    let n = xs.len();
    let mut p: Vec<Complex64> = fs.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            let (xi, xj) = (xs[i], xs[i + m]);
            p[i] = (p[i] * xj - p[i + 1] * xi) / (xj - xi);
        }
    }
    p[0]
}

/// Derivative at 0 of the interpolating polynomial through (x_j, f_j).
pub fn derivative_at_zero(xs: &[f64], fs: &[Complex64]) -> Complex64 {
    // Newton divided differences, then differentiate the Newton form at 0.
    let n = xs.len();
    let mut c: Vec<Complex64> = fs.to_vec();
    for j in 1..n {
        for i in (j..n).rev() {
            c[i] = (c[i] - c[i - 1]) / (xs[i] - xs[i - j]);
        }
    }
    // p(x) = Σ c_j Π_{i<j}(x − x_i); evaluate p and p' at 0 by Horner.
    let mut p = c[n - 1];
    let mut dp = Complex64::new(0.0, 0.0);
    for j in (0..n - 1).rev() {
        dp = dp * (-xs[j]) + p;
        p = p * (-xs[j]) + c[j];
    }
    dp
}

fn max_rel(a: &[DVector<Complex64>], b: &DVector<Complex64>) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let worst = a[0].iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Evaluate the field at t ∓ ε n (plus side: into D, minus side: into D′)
/// for each ε, extrapolate ε → 0 and return the largest deviation from the
/// claimed trace relative to its largest value.
pub fn offsurface_limit_check(field: &PotentialField, trace: &BoundaryTrace, eps_sequence: &[f64]) -> Result<f64> {
    check_len(field.surface.len(), trace.values.len())?;
    if eps_sequence.is_empty() || eps_sequence.iter().any(|&e| e <= 0.0) {
        return Err(Error::Usage("offsets must be positive".into()));
    }
    if field.density.values.iter().all(|z| *z == Complex64::new(0.0, 0.0))
        && trace.values.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    {
        return Ok(0.0);
    }
    let sign = match trace.side {
        Side::Plus => -1.0,
        Side::Minus => 1.0,
    };
    let offsets: Vec<f64> = eps_sequence.iter().map(|e| sign * e).collect();
    let derivative = trace.quantity == TraceQuantity::Neumann;
    if derivative && field.layer == Layer::Double {
        return Err(Error::Usage("normal derivative of the double layer is checked by wn_two_sided_check".into()));
    }
    let samples = field.node_offsets(&offsets, derivative)?;
    let n = trace.values.len();
    let extrap = DVector::from_fn(n, |i, _| {
        let fs: Vec<Complex64> = samples.iter().map(|s| s[i]).collect();
        extrapolate_to_zero(eps_sequence, &fs)
    });
    Ok(max_rel(&[extrap], &trace.values))
}

/// One-sided normal derivatives of w from D and from D′, each obtained by
/// differentiating the polynomial through samples at offsets 0.2ε, …, ε;
/// returns the largest mismatch relative to the largest derivative.
pub fn wn_two_sided_check(field: &PotentialField, eps: f64) -> Result<f64> {
    if field.layer != Layer::Double {
        return Err(Error::Usage("two-sided normal derivative check needs a double layer".into()));
    }
    if eps <= 0.0 {
        return Err(Error::Usage("offset must be positive".into()));
    }
    if field.density.values.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    let ds: Vec<f64> = (1..=5).map(|j| eps * j as f64 / 5.0).collect();
    let mut offsets: Vec<f64> = ds.iter().map(|d| -d).collect();
    offsets.extend(ds.iter());
    let samples = field.node_offsets(&offsets, false)?;
    let n = field.surface.len();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        let plus: Vec<Complex64> = samples[..5].iter().map(|s| s[i]).collect();
        let minus: Vec<Complex64> = samples[5..].iter().map(|s| s[i]).collect();
        // w(t − δn) from D: ∂w/∂n = −d/dδ
        let wn_plus = -derivative_at_zero(&ds, &plus);
        let wn_minus = derivative_at_zero(&ds, &minus);
        worst = worst.max((wn_plus - wn_minus).norm());
        scale = scale.max(0.5 * (wn_plus + wn_minus).norm());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenResidual {
    pub residual: Complex64,
    /// ‖u₁‖·‖u₂N‖ + ‖u₂‖·‖u₁N‖ in H⁰.
    pub scale: f64,
}

/// ∫_S (u₁ u₂N⁺ − u₂ u₁N⁺) ds with u_i = Qσ_i and u_iN⁺ = ½(A + I)σ_i.
pub fn green_identity_residual(
    surface: &QuadratureSurface,
    q: &BoundaryOperator,
    a: &BoundaryOperator,
    sigma1: &SurfaceDensity,
    sigma2: &SurfaceDensity,
) -> Result<GreenResidual> {
    if q.kind() != OperatorKind::Q || a.kind() != OperatorKind::A {
        return Err(Error::Usage("Green identity needs Q and A".into()));
    }
    if q.k() != a.k() {
        return Err(Error::Usage("operators assembled with different wavenumbers".into()));
    }
    sigma1.check_surface(surface)?;
    sigma2.check_surface(surface)?;
    let u1 = q.apply_values(&sigma1.values)?;
    let u2 = q.apply_values(&sigma2.values)?;
    let half = Complex64::new(0.5, 0.0);
    let u1n = (a.apply_values(&sigma1.values)? + &sigma1.values) * half;
    let u2n = (a.apply_values(&sigma2.values)? + &sigma2.values) * half;
    let integrand: Vec<Complex64> = (0..surface.len()).map(|i| u1[i] * u2n[i] - u2[i] * u1n[i]).collect();
    let residual = surface.integrate(&integrand)?;
    let norm = |v: &DVector<Complex64>| surface.h0_norm(v.as_slice());
    let scale = norm(&u1)? * norm(&u2n)? + norm(&u2)? * norm(&u1n)?;
    Ok(GreenResidual { residual, scale })
}

/// Deterministic, nearly uniform directions (Fibonacci lattice).
pub fn sphere_directions(count: usize) -> Vec<Point3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Point3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// max over sample directions of |∂u/∂r − iku|·radius, with a central
/// difference radial derivative.
pub fn radiation_residual(field: &PotentialField, radius: f64, sample_count: usize) -> Result<f64> {
    let rc = field.surface.circumradius();
    if radius < 5.0 * rc {
        return Err(Error::Usage(format!("radius {radius} must be at least 5× the circumradius {rc}")));
    }
    if sample_count == 0 {
        return Err(Error::Usage("sample count must be positive".into()));
    }
    let dirs = sphere_directions(sample_count);
    let h = 1e-2;
    let mut pts = Vec::with_capacity(3 * dirs.len());
    for d in &dirs {
        pts.push(d * (radius - h));
        pts.push(d * radius);
        pts.push(d * (radius + h));
    }
    let ev = field.eval_batch(&pts)?;
    let ik = Complex64::new(0.0, field.k);
    let mut worst: f64 = 0.0;
    for c in ev.chunks(3) {
        let dudr = (c[2].value - c[0].value) / (2.0 * h);
        worst = worst.max((dudr - ik * c[1].value).norm() * radius);
    }
    Ok(worst)
}

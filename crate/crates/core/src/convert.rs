//! Conversion between double-layer and single-layer representations of the
//! same Helmholtz field, inside or outside S, with independent verification
//! by off-surface evaluation of both potentials.
//!
//! | mode            | solve                      | for |
//! |-----------------|----------------------------|-----|
//! | dl2sl_interior  | Q σ = ½(A′ − I) μ          | σ   |
//! | sl2dl_interior  | ½(A′ − I) μ = Q σ          | μ   |
//! | dl2sl_exterior  | Q σ = ½(A′ + I) μ          | σ   |
//! | sl2dl_exterior  | ½(A′ + I) μ = Q σ          | μ   |

use crate::density::DensitySource;
use crate::error::{Error, Result};
use crate::fredholm::{FredholmSolveReport, FredholmSolver, DEFAULT_NULL_THRESHOLD};
use crate::harmonics;
use crate::kernels::KernelParams;
use crate::linalg::{lu_solve, weighted_residual};
use crate::operators::assembly::band_basis;
use crate::operators::{assemble_many, build_factor_b, BoundaryOperator, DensityRole, OperatorKind, SurfaceDensity};
use crate::oracle::{resonance_scan, ResonanceType, MAX_MODAL_DEGREE};
use crate::potentials::{Layer, PotentialField};
use crate::surface::{build_surface, Point3, QuadratureSurface, Region, ShapeDescriptor};
use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversionMode {
    Dl2slInterior,
    Sl2dlInterior,
    Dl2slExterior,
    Sl2dlExterior,
}

impl ConversionMode {
    pub const ALL: [ConversionMode; 4] = [
        ConversionMode::Dl2slInterior,
        ConversionMode::Sl2dlInterior,
        ConversionMode::Dl2slExterior,
        ConversionMode::Sl2dlExterior,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name.replace('-', "_").as_str() {
            "dl2sl_interior" | "dl2sl_int" => Ok(ConversionMode::Dl2slInterior),
            "sl2dl_interior" | "sl2dl_int" => Ok(ConversionMode::Sl2dlInterior),
            "dl2sl_exterior" | "dl2sl_ext" => Ok(ConversionMode::Dl2slExterior),
            "sl2dl_exterior" | "sl2dl_ext" => Ok(ConversionMode::Sl2dlExterior),
            _ => Err(Error::Usage(format!("unknown conversion mode '{name}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConversionMode::Dl2slInterior => "dl2sl_interior",
            ConversionMode::Sl2dlInterior => "sl2dl_interior",
            ConversionMode::Dl2slExterior => "dl2sl_exterior",
            ConversionMode::Sl2dlExterior => "sl2dl_exterior",
        }
    }

    pub fn region(self) -> Region {
        match self {
            ConversionMode::Dl2slInterior | ConversionMode::Sl2dlInterior => Region::Interior,
            ConversionMode::Dl2slExterior | ConversionMode::Sl2dlExterior => Region::Exterior,
        }
    }

    /// The input is a double-layer density μ.
    pub fn from_double_layer(self) -> bool {
        matches!(self, ConversionMode::Dl2slInterior | ConversionMode::Dl2slExterior)
    }

    pub fn input_role(self) -> DensityRole {
        if self.from_double_layer() {
            DensityRole::Mu
        } else {
            DensityRole::Sigma
        }
    }

    pub fn output_role(self) -> DensityRole {
        if self.from_double_layer() {
            DensityRole::Sigma
        } else {
            DensityRole::Mu
        }
    }

    pub fn input_layer(self) -> Layer {
        if self.from_double_layer() {
            Layer::Double
        } else {
            Layer::Single
        }
    }

    pub fn output_layer(self) -> Layer {
        if self.from_double_layer() {
            Layer::Single
        } else {
            Layer::Double
        }
    }

    /// Sign s in ½(A′ + s I): −1 inside, +1 outside.
    fn identity_sign(self) -> f64 {
        match self.region() {
            Region::Interior => -1.0,
            Region::Exterior => 1.0,
        }
    }

    /// Resonances at which the operator being inverted has a null space.
    fn critical_resonances(self) -> ResonanceType {
        match self {
            ConversionMode::Sl2dlExterior => ResonanceType::NeumannLike,
            _ => ResonanceType::DirichletLike,
        }
    }
}

impl fmt::Display for ConversionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvertOptions {
    /// Null-space threshold relative to σ_max.
    pub null_threshold: f64,
    /// Compatibility tolerance relative to ‖rhs‖.
    pub compat_tol: f64,
    /// Solve the Q-equation through B η = rhs, σ = Q0⁻¹ η.
    pub factorized: bool,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions { null_threshold: DEFAULT_NULL_THRESHOLD, compat_tol: 1e-6, factorized: false }
    }
}

impl ConvertOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("null threshold", self.null_threshold), ("compatibility tolerance", self.compat_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConversionReport {
    pub mode: ConversionMode,
    pub region: Region,
    pub k: f64,
    pub input_density: SurfaceDensity,
    pub output_density: SurfaceDensity,
    pub solve_report: FredholmSolveReport,
    pub field_equality_error: f64,
    pub verification_points: Vec<[f64; 3]>,
    /// The solved operator had a numerical null space (minimum-norm output).
    pub degenerate: bool,
    pub factorized: bool,
}

/// The 26 directions to the neighbours of a cube cell, normalised.
fn cube_directions() -> Vec<Point3> {
    let mut out = Vec::with_capacity(26);
    for i in -1i32..=1 {
        for j in -1i32..=1 {
            for k in -1i32..=1 {
                if (i, j, k) != (0, 0, 0) {
                    out.push(Point3::new(i as f64, j as f64, k as f64).normalize());
                }
            }
        }
    }
    out
}

/// Interior: 26 points at 0.5× the inradius plus the centre. Exterior: 26
/// directions at 1.5, 2 and 3× the circumradius.
pub fn verification_points(surface: &QuadratureSurface, region: Region) -> Vec<Point3> {
    let dirs = cube_directions();
    match region {
        Region::Interior => {
            let r = 0.5 * surface.inradius();
            let mut pts: Vec<Point3> = dirs.iter().map(|d| d * r).collect();
            pts.push(Point3::zeros());
            pts
        }
        Region::Exterior => {
            let rc = surface.circumradius();
            [1.5, 2.0, 3.0].iter().flat_map(|f| dirs.iter().map(move |d| d * (f * rc))).collect()
        }
    }
}

/// max over points of |a(x) − b(x)| / max(|a(x)|, 1e-12·max|a|).
pub fn verify_equality(a: &PotentialField, b: &PotentialField, points: &[Point3]) -> Result<f64> {
    if a.k() != b.k() {
        warn!("comparing fields with different wavenumbers ({} vs {})", a.k(), b.k());
    }
    if a.surface().id() != b.surface().id() {
        warn!("comparing fields defined on different surfaces");
    }
    let va = a.eval_batch(points)?;
    let vb = b.eval_batch(points)?;
    let amax = va.iter().map(|e| e.value.norm()).fold(0.0, f64::max);
    if amax == 0.0 {
        return Ok(vb.iter().map(|e| e.value.norm()).fold(0.0, f64::max));
    }
    let floor = 1e-12 * amax;
    Ok(va
        .iter()
        .zip(&vb)
        .map(|(x, y)| (x.value - y.value).norm() / x.value.norm().max(floor))
        .fold(0.0, f64::max))
}

/// Right-hand side and the operator to invert.
fn system(
    mode: ConversionMode,
    q: &BoundaryOperator,
    aprime: &BoundaryOperator,
    input: &SurfaceDensity,
) -> Result<(SurfaceDensity, BoundaryOperator)> {
    let jump = aprime.affine(0.5, 0.5 * mode.identity_sign());
    let (rhs, op) = if mode.from_double_layer() {
        (jump.apply_values(&input.values)?, q.clone())
    } else {
        (q.apply_values(&input.values)?, jump)
    };
    Ok((SurfaceDensity { values: rhs, role: DensityRole::Trace, surface: input.surface.clone() }, op))
}

/// Q σ = rhs through B η = rhs and σ = Q0⁻¹ η, with B = I + Q1·Q0⁻¹.
pub fn solve_factorized(
    surface: &QuadratureSurface,
    params: KernelParams,
    rhs: &SurfaceDensity,
    options: &ConvertOptions,
) -> Result<(SurfaceDensity, FredholmSolveReport)> {
    let ops = assemble_many(surface, params, &[OperatorKind::Q0, OperatorKind::Q1])?;
    let b = build_factor_b(&ops[0], &ops[1])?;
    let solver = FredholmSolver::new(&b, surface)?;
    let adj = solver.adjoint_null_space(options.null_threshold)?;
    let mut report = solver.solve(rhs, &adj, options.compat_tol)?;
    let eta = report.solution.values.clone();
    let sigma = lu_solve(&ops[0], &eta)?;
    let q = ops[0].add(&ops[1])?;
    report.residual_rel = weighted_residual(&q, surface, &sigma, &rhs.values)?;
    let sigma = SurfaceDensity { values: sigma, role: DensityRole::Sigma, surface: surface.id() };
    report.solution = sigma.clone();
    Ok((sigma, report))
}

pub fn convert(
    mode: ConversionMode,
    input: &SurfaceDensity,
    surface: &QuadratureSurface,
    params: KernelParams,
    options: &ConvertOptions,
) -> Result<ConversionReport> {
    options.validate()?;
    input.check_surface(surface)?;
    if input.role != mode.input_role() {
        return Err(Error::Usage(format!(
            "{mode} takes a {:?} density, got {:?}",
            mode.input_role(),
            input.role
        )));
    }
    if options.factorized && !mode.from_double_layer() {
        return Err(Error::Usage(format!("the factorized path solves for σ; {mode} solves for μ")));
    }
    let ops = assemble_many(surface, params, &[OperatorKind::Q, OperatorKind::Aprime])?;
    let (rhs, op) = system(mode, &ops[0], &ops[1], input)?;
    let solve_report = if options.factorized {
        let (_, mut rep) = solve_factorized(surface, params, &rhs, options)?;
        // compatibility is a property of the Q-equation
        let solver = FredholmSolver::new(&op, surface)?;
        let adj = solver.adjoint_null_space(options.null_threshold)?;
        let direct = solver.solve(&rhs, &adj, options.compat_tol)?;
        rep.rhs_incompat_norm = direct.rhs_incompat_norm;
        rep.compatible = direct.compatible;
        rep.null_dim = direct.null_dim;
        rep.min_norm = direct.min_norm;
        rep
    } else {
        let solver = FredholmSolver::new(&op, surface)?;
        let adj = solver.adjoint_null_space(options.null_threshold)?;
        solver.solve(&rhs, &adj, options.compat_tol)?
    };
    let output = solve_report.solution.clone().with_role(mode.output_role());
    let points = verification_points(surface, mode.region());
    let field_in = PotentialField::new(surface, mode.input_layer(), input.clone(), params)?;
    let field_out = PotentialField::new(surface, mode.output_layer(), output.clone(), params)?;
    let field_equality_error = verify_equality(&field_in, &field_out, &points)?;
    Ok(ConversionReport {
        mode,
        region: mode.region(),
        k: params.k,
        input_density: input.clone(),
        output_density: output,
        degenerate: solve_report.null_dim > 0,
        solve_report,
        field_equality_error,
        verification_points: points.iter().map(|p| [p.x, p.y, p.z]).collect(),
        factorized: options.factorized,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub mode: ConversionMode,
    pub k: f64,
    pub resolutions: [usize; 2],
    /// Relative H⁰ distance between the coarse solution (resampled through
    /// its band expansion) and the fine solution, on the fine grid.
    pub resolution_distance: f64,
    /// Relative H⁰ distance between the SVD and LU solutions on the fine grid.
    pub path_distance: f64,
    pub seed: u64,
}

/// Resample a density through its band expansion onto another grid of the
/// same surface.
pub fn resample(density: &SurfaceDensity, from: &QuadratureSurface, to: &QuadratureSurface) -> Result<SurfaceDensity> {
    density.check_surface(from)?;
    if from.shape() != to.shape() {
        return Err(Error::SurfaceMismatch);
    }
    let y = band_basis(from);
    let wv = DVector::from_fn(from.len(), |i, _| density.values[i] * from.weights()[i]);
    let coeffs = y.adjoint() * wv;
    let l_max = from.band_degree();
    let mut buf = vec![Complex64::new(0.0, 0.0); harmonics::count(l_max)];
    let values = DVector::from_iterator(
        to.len(),
        to.params().iter().zip(to.jacobians()).map(|(p, j)| {
            harmonics::ylm_into(l_max, p, &mut buf);
            buf.iter().zip(coeffs.iter()).map(|(a, b)| a * b).sum::<Complex64>() / j.sqrt()
        }),
    );
    SurfaceDensity::new(to, values, density.role.clone())
}

fn relative_distance(surface: &QuadratureSurface, a: &DVector<Complex64>, b: &DVector<Complex64>) -> Result<f64> {
    let d = surface.h0_norm((a - b).as_slice())?;
    let n = surface.h0_norm(b.as_slice())?;
    Ok(if n > 0.0 { d / n } else { d })
}

/// Refuse when k·R is within this distance of a sphere resonance.
const RESONANCE_WINDOW: f64 = 1e-2;

/// Solve one conversion at two resolutions and by two solvers (truncated
/// SVD and LU) and report how far apart the solutions are. The input must be
/// resolution independent (harmonic or random); `seed` replaces the seed of a
/// random source. On a sphere the probe refuses at resonant k, where the
/// solution is not unique.
pub fn uniqueness_probe(
    mode: ConversionMode,
    input: &DensitySource,
    shape: &ShapeDescriptor,
    params: KernelParams,
    seed: u64,
    resolutions: [usize; 2],
) -> Result<UniquenessReport> {
    if let ShapeDescriptor::Sphere { radius } = shape {
        let kr = params.k * radius;
        let lo = (kr - 5.0 * RESONANCE_WINDOW).max(1e-3);
        let table = resonance_scan(lo, kr + 5.0 * RESONANCE_WINDOW, MAX_MODAL_DEGREE)?;
        if let Some(r) = table.of_type(mode.critical_resonances()).nearest(kr) {
            if (r.k - kr).abs() < RESONANCE_WINDOW {
                return Err(Error::Resonant { k: params.k, k_res: r.k / radius, l: r.l });
            }
        }
    }
    let source = match input {
        DensitySource::Random { l_max, .. } => DensitySource::Random { seed, l_max: *l_max },
        DensitySource::Nodal { .. } => {
            return Err(Error::Usage("the uniqueness probe needs a harmonic or random density".into()))
        }
        other => other.clone(),
    };
    let options = ConvertOptions::default();
    let mut solutions = Vec::with_capacity(2);
    let mut surfaces = Vec::with_capacity(2);
    for &res in &resolutions {
        let surface = build_surface(shape, res)?;
        let density = source.sample(&surface, mode.input_role())?;
        let ops = assemble_many(&surface, params, &[OperatorKind::Q, OperatorKind::Aprime])?;
        let (rhs, op) = system(mode, &ops[0], &ops[1], &density)?;
        let solver = FredholmSolver::new(&op, &surface)?;
        let adj = solver.adjoint_null_space(options.null_threshold)?;
        let svd_solution = solver.solve(&rhs, &adj, options.compat_tol)?.solution;
        let lu_solution = lu_solve(&op, &rhs.values)?;
        solutions.push((svd_solution, lu_solution));
        surfaces.push(surface);
    }
    let coarse = resample(&solutions[0].0, &surfaces[0], &surfaces[1])?;
    let resolution_distance = relative_distance(&surfaces[1], &coarse.values, &solutions[1].0.values)?;
    let path_distance = relative_distance(&surfaces[1], &solutions[1].1, &solutions[1].0.values)?;
    Ok(UniquenessReport { mode, k: params.k, resolutions, resolution_distance, path_distance, seed })
}

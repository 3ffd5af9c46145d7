//! The subcommands. Each one produces the text of its report and an exit
//! status; writing the text is left to the caller.

use super::config::{config_error, DensityInput, RunConfig};
use super::json;
use crate::convert::{self as conv, uniqueness_probe, verification_points, verify_equality, ConversionMode, UniquenessReport};
use crate::density::{DensitySource, DEFAULT_RANDOM_DEGREE};
use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::linalg::weighted_singular_values;
use crate::operators::{
    assemble, assemble_many, build_factor_b, transpose_duality_defect, weighted_symmetry_defect, BoundaryOperator,
    OperatorKind, SurfaceDensity,
};
use crate::oracle::{self, ResonanceType, MAX_MODAL_DEGREE};
use crate::potentials::PotentialField;
use crate::surface::{build_surface, QuadratureSurface, Region, ShapeDescriptor};
use log::{info, warn};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INCOMPATIBLE: i32 = 2;
pub const EXIT_RESONANT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub status: i32,
}

/// Wall-clock milliseconds per phase, recorded only when requested.
struct Timings(Option<BTreeMap<&'static str, f64>>);

impl Timings {
    fn new(enabled: bool) -> Self {
        Timings(enabled.then(BTreeMap::new))
    }

    fn record(&mut self, phase: &'static str, since: Instant) {
        if let Some(t) = &mut self.0 {
            t.insert(phase, since.elapsed().as_secs_f64() * 1e3);
        }
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings_ms: Option<BTreeMap<&'static str, f64>>,
}

fn render<T: Serialize>(command: &'static str, config: &RunConfig, body: T, timings: Timings) -> Result<String> {
    json::to_string(&Report { command, version: VERSION, config, body, timings_ms: timings.0 })
}

fn require_mode(config: &RunConfig) -> Result<ConversionMode> {
    config.mode.ok_or_else(|| Error::Config("a conversion mode is required (--mode)".into()))
}

/// The configured density, or a random one drawn from the run seed.
fn resolve_density(config: &mut RunConfig) -> Result<DensitySource> {
    let input = config
        .density
        .get_or_insert(DensityInput::Random { seed: config.seed, l_max: DEFAULT_RANDOM_DEGREE });
    input.resolve()
}

fn resolution_independent(source: &DensitySource, what: &str) -> Result<()> {
    if matches!(source, DensitySource::Nodal { .. }) {
        return Err(Error::Config(format!("{what} needs a harmonic or random density, not nodal values")));
    }
    Ok(())
}

/// Assemble the requested kinds, building B from Q0 and Q1 when asked.
fn assemble_kinds(
    surface: &QuadratureSurface,
    params: KernelParams,
    kinds: &[OperatorKind],
) -> Result<Vec<BoundaryOperator>> {
    let mut base: Vec<OperatorKind> = Vec::new();
    for &kind in kinds {
        let needs = if kind == OperatorKind::FactorB { vec![OperatorKind::Q0, OperatorKind::Q1] } else { vec![kind] };
        for k in needs {
            if !base.contains(&k) {
                base.push(k);
            }
        }
    }
    let ops = assemble_many(surface, params, &base)?;
    let find = |k: OperatorKind| &ops[base.iter().position(|b| *b == k).expect("assembled")];
    kinds
        .iter()
        .map(|&kind| match kind {
            OperatorKind::FactorB => build_factor_b(find(OperatorKind::Q0), find(OperatorKind::Q1)),
            other => Ok(find(other).clone()),
        })
        .collect()
}

#[derive(Serialize)]
struct OperatorSummary {
    kind: OperatorKind,
    label: String,
    dim: usize,
    k: f64,
    /// Relative defect of W·M from symmetry (single-layer family only).
    #[serde(skip_serializing_if = "Option::is_none")]
    weighted_symmetry_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q0_condition: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dump: Option<PathBuf>,
}

#[derive(Serialize)]
struct AssembleBody {
    nodes: usize,
    operators: Vec<OperatorSummary>,
    /// ‖W A′ − (W A)ᵀ‖ / ‖W A‖ when both double-layer operators were assembled.
    #[serde(skip_serializing_if = "Option::is_none")]
    transpose_duality_defect: Option<f64>,
}

pub fn assemble_cmd(config: &RunConfig, dump: Option<&Path>, timings: bool) -> Result<Outcome> {
    let mut clock = Timings::new(timings);
    let t = Instant::now();
    let surface = build_surface(&config.surface, config.resolution)?;
    let params = KernelParams::new(config.k)?;
    let kinds = if config.operators.is_empty() { vec![OperatorKind::Q] } else { config.operators.clone() };
    let ops = assemble_kinds(&surface, params, &kinds)?;
    clock.record("assemble", t);
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir)?;
    }
    let mut operators = Vec::with_capacity(ops.len());
    for op in &ops {
        let symmetric = matches!(op.kind(), OperatorKind::Q | OperatorKind::Q0 | OperatorKind::Q1);
        let dump = match dump {
            Some(dir) => {
                let path = dir.join(format!("{}.bin", op.kind()));
                let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
                op.write_dump(&mut w)?;
                w.flush()?;
                info!("wrote {}", path.display());
                Some(path)
            }
            None => None,
        };
        operators.push(OperatorSummary {
            kind: op.kind(),
            label: op.label().to_string(),
            dim: op.dim(),
            k: op.k(),
            weighted_symmetry_defect: if symmetric { Some(weighted_symmetry_defect(op, &surface)?) } else { None },
            q0_condition: op.q0_condition(),
            dump,
        });
    }
    let pos = |k: OperatorKind| kinds.iter().position(|x| *x == k);
    let transpose_duality_defect = match (pos(OperatorKind::Aprime), pos(OperatorKind::A)) {
        (Some(i), Some(j)) => Some(transpose_duality_defect(&ops[i], &ops[j], &surface)?),
        _ => None,
    };
    let body = AssembleBody { nodes: surface.len(), operators, transpose_duality_defect };
    Ok(Outcome { text: render("assemble", config, body, clock)?, status: EXIT_OK })
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
enum ProbeOutcome {
    Completed(UniquenessReport),
    Refused { k: f64, k_res: f64, l: usize },
}

#[derive(Serialize)]
struct ConvertBody<'a> {
    mode: ConversionMode,
    region: Region,
    k: f64,
    null_dim: usize,
    compatible: bool,
    rhs_incompat_norm: f64,
    residual_rel: f64,
    min_norm: bool,
    field_equality_error: f64,
    degenerate: bool,
    factorized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniqueness: Option<ProbeOutcome>,
    verification_points: &'a [[f64; 3]],
    input_density: &'a SurfaceDensity,
    output_density: &'a SurfaceDensity,
}

pub fn convert_cmd(config: &RunConfig, probe: bool, timings: bool) -> Result<Outcome> {
    let mut config = config.clone();
    let mode = require_mode(&config)?;
    let source = resolve_density(&mut config)?;
    if probe {
        resolution_independent(&source, "the uniqueness probe")?;
    }
    let surface = build_surface(&config.surface, config.resolution)?;
    let input = source.sample(&surface, mode.input_role()).map_err(config_error)?;
    let params = KernelParams::new(config.k)?;
    let mut clock = Timings::new(timings);
    let t = Instant::now();
    let rep = conv::convert(mode, &input, &surface, params, &config.convert_options())?;
    clock.record("convert", t);
    let uniqueness = if probe {
        let t = Instant::now();
        let res = [config.resolution, config.resolution + config.resolution / 2];
        let out = match uniqueness_probe(mode, &source, &config.surface, params, config.seed, res) {
            Ok(r) => ProbeOutcome::Completed(r),
            Err(Error::Resonant { k, k_res, l }) => {
                warn!("uniqueness probe refused: k = {k} is resonant (k_res = {k_res}, l = {l})");
                ProbeOutcome::Refused { k, k_res, l }
            }
            Err(e) => return Err(e),
        };
        clock.record("uniqueness_probe", t);
        Some(out)
    } else {
        None
    };
    let status = if matches!(uniqueness, Some(ProbeOutcome::Refused { .. })) {
        EXIT_RESONANT
    } else if !rep.solve_report.compatible {
        warn!(
            "{mode}: right-hand side is incompatible (pairing {:.3e}); the minimum-norm projection is reported",
            rep.solve_report.rhs_incompat_norm
        );
        EXIT_INCOMPATIBLE
    } else {
        EXIT_OK
    };
    let sr = &rep.solve_report;
    let body = ConvertBody {
        mode,
        region: rep.region,
        k: rep.k,
        null_dim: sr.null_dim,
        compatible: sr.compatible,
        rhs_incompat_norm: sr.rhs_incompat_norm,
        residual_rel: sr.residual_rel,
        min_norm: sr.min_norm,
        field_equality_error: rep.field_equality_error,
        degenerate: rep.degenerate,
        factorized: rep.factorized,
        uniqueness,
        verification_points: &rep.verification_points,
        input_density: &rep.input_density,
        output_density: &rep.output_density,
    };
    Ok(Outcome { text: render("convert", &config, body, clock)?, status })
}

#[derive(Deserialize)]
struct StoredDensity {
    values: Vec<Complex64>,
}

#[derive(Deserialize)]
struct StoredConversion {
    config: RunConfig,
    mode: ConversionMode,
    field_equality_error: Option<f64>,
    input_density: StoredDensity,
    output_density: StoredDensity,
}

#[derive(Serialize)]
struct VerifyBody<'a> {
    report: &'a Path,
    mode: ConversionMode,
    stored_field_equality_error: Option<f64>,
    field_equality_error: f64,
    verify_tol: f64,
    passed: bool,
}

/// Recompute the field-equality error of a stored conversion report.
/// `verify_tol` overrides the tolerance recorded in the report.
pub fn verify_cmd(path: &Path, verify_tol: Option<f64>, timings: bool) -> Result<Outcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read report {}: {e}", path.display())))?;
    let stored: StoredConversion = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{} is not a conversion report: {e}", path.display())))?;
    let mut config = stored.config;
    if let Some(tol) = verify_tol {
        config.verify_tol = tol;
    }
    config.validate()?;
    let mode = stored.mode;
    let mut clock = Timings::new(timings);
    let t = Instant::now();
    let surface = build_surface(&config.surface, config.resolution)?;
    let params = KernelParams::new(config.k)?;
    let density = |d: StoredDensity, role| {
        SurfaceDensity::new(&surface, DVector::from_vec(d.values), role).map_err(config_error)
    };
    let input = density(stored.input_density, mode.input_role())?;
    let output = density(stored.output_density, mode.output_role())?;
    let a = PotentialField::new(&surface, mode.input_layer(), input, params)?;
    let b = PotentialField::new(&surface, mode.output_layer(), output, params)?;
    let err = verify_equality(&a, &b, &verification_points(&surface, mode.region()))?;
    clock.record("verify", t);
    let passed = err <= config.verify_tol;
    if !passed {
        warn!("field equality error {err:.3e} exceeds {:.3e}", config.verify_tol);
    }
    let body = VerifyBody {
        report: path,
        mode,
        stored_field_equality_error: stored.field_equality_error,
        field_equality_error: err,
        verify_tol: config.verify_tol,
        passed,
    };
    let status = if passed { EXIT_OK } else { EXIT_FAILURE };
    Ok(Outcome { text: render("verify", &config, body, clock)?, status })
}

#[derive(Serialize)]
struct Dip {
    k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<usize>,
    #[serde(rename = "type")]
    kind: ResonanceType,
    /// Operator whose smallest singular value is tracked.
    operator: &'static str,
    sigma_min: f64,
    sigma_min_below: f64,
    sigma_min_above: f64,
    /// min(σ_min(k − offset), σ_min(k + offset)) / σ_min(k).
    ratio: f64,
}

#[derive(Serialize)]
struct ProfilePoint {
    k: f64,
    sigma_min: f64,
}

#[derive(Serialize)]
struct ScanBody {
    k_range: [f64; 2],
    dip_offset: f64,
    table: oracle::ResonanceTable,
    dips: Vec<Dip>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<Vec<ProfilePoint>>,
}

/// Smallest weighted singular value of Q (Dirichlet-like) or A + I
/// (Neumann-like) at wavenumber k.
fn sigma_min(surface: &QuadratureSurface, kind: ResonanceType, k: f64) -> Result<f64> {
    let params = KernelParams::new(k)?;
    let op = match kind {
        ResonanceType::DirichletLike => assemble(surface, params, OperatorKind::Q)?,
        ResonanceType::NeumannLike => assemble(surface, params, OperatorKind::A)?.affine(1.0, 1.0),
    };
    Ok(weighted_singular_values(&op, surface)?.into_iter().fold(f64::INFINITY, f64::min))
}

fn dip(surface: &QuadratureSurface, kind: ResonanceType, k: f64, l: Option<usize>, offset: f64) -> Result<Dip> {
    let s = sigma_min(surface, kind, k)?;
    let below = sigma_min(surface, kind, k - offset)?;
    let above = sigma_min(surface, kind, k + offset)?;
    Ok(Dip {
        k,
        l,
        kind,
        operator: match kind {
            ResonanceType::DirichletLike => "Q",
            ResonanceType::NeumannLike => "A+I",
        },
        sigma_min: s,
        sigma_min_below: below,
        sigma_min_above: above,
        ratio: if s > 0.0 { below.min(above) / s } else { f64::INFINITY },
    })
}

/// On a sphere of radius R the resonances come from the Bessel-zero oracle
/// (scaled by 1/R) and each is confirmed by a singular-value dip. On other
/// surfaces σ_min(Q) is profiled with step `k_step` and its local minima are
/// reported as dips.
pub fn resonance_scan_cmd(config: &RunConfig, dip_offset: f64, k_step: f64, timings: bool) -> Result<Outcome> {
    let [a, b] = config.k_range.ok_or_else(|| Error::Config("a k range is required (--k-range a:b)".into()))?;
    if !(dip_offset > 0.0 && dip_offset < a) {
        return Err(Error::Config(format!("dip offset {dip_offset} must lie in (0, {a})")));
    }
    if !(k_step > 0.0 && k_step < b - a) {
        return Err(Error::Config(format!("k step {k_step} must lie in (0, {})", b - a)));
    }
    let surface = build_surface(&config.surface, config.resolution)?;
    let mut clock = Timings::new(timings);
    let t = Instant::now();
    let (table, dips, profile) = match config.surface {
        ShapeDescriptor::Sphere { radius } => {
            let mut table = oracle::resonance_scan(a * radius, b * radius, MAX_MODAL_DEGREE)?;
            for r in &mut table.entries {
                r.k /= radius;
            }
            let dips = table
                .entries
                .iter()
                .map(|r| dip(&surface, r.kind, r.k, Some(r.l), dip_offset))
                .collect::<Result<Vec<_>>>()?;
            (table, dips, None)
        }
        _ => {
            warn!("no resonance oracle for {:?}; profiling the smallest singular value of Q", config.surface);
            let steps = ((b - a) / k_step).round() as usize;
            let profile = (0..=steps)
                .map(|i| {
                    let k = a + (b - a) * i as f64 / steps as f64;
                    sigma_min(&surface, ResonanceType::DirichletLike, k).map(|s| ProfilePoint { k, sigma_min: s })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut dips = Vec::new();
            for w in profile.windows(3) {
                if w[1].sigma_min < w[0].sigma_min && w[1].sigma_min < w[2].sigma_min {
                    dips.push(dip(&surface, ResonanceType::DirichletLike, w[1].k, None, dip_offset)?);
                }
            }
            (oracle::ResonanceTable::default(), dips, Some(profile))
        }
    };
    clock.record("scan", t);
    let body = ScanBody { k_range: [a, b], dip_offset, table, dips, profile };
    Ok(Outcome { text: render("resonance-scan", config, body, clock)?, status: EXIT_OK })
}

/// Run one conversion per ladder resolution and emit a CSV table of the
/// field-equality error against resolution.
pub fn convergence_cmd(config: &RunConfig, timings: bool) -> Result<Outcome> {
    let mut config = config.clone();
    let mode = require_mode(&config)?;
    let source = resolve_density(&mut config)?;
    resolution_independent(&source, "a convergence study")?;
    let params = KernelParams::new(config.k)?;
    let mut header = vec![
        "resolution",
        "nodes",
        "field_equality_error",
        "residual_rel",
        "null_dim",
        "compatible",
        "rhs_incompat_norm",
    ];
    if timings {
        header.push("elapsed_ms");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;
    let mut status = EXIT_OK;
    for &res in &config.resolutions {
        let t = Instant::now();
        let surface = build_surface(&config.surface, res)?;
        let input = source.sample(&surface, mode.input_role())?;
        let rep = conv::convert(mode, &input, &surface, params, &config.convert_options())?;
        let sr = &rep.solve_report;
        if !sr.compatible {
            status = EXIT_INCOMPATIBLE;
        }
        info!("{mode} at resolution {res}: field equality error {:.3e}", rep.field_equality_error);
        let mut row = vec![
            res.to_string(),
            surface.len().to_string(),
            format!("{:.16e}", rep.field_equality_error),
            format!("{:.16e}", sr.residual_rel),
            sr.null_dim.to_string(),
            sr.compatible.to_string(),
            format!("{:.16e}", sr.rhs_incompat_norm),
        ];
        if timings {
            row.push(format!("{:.3}", t.elapsed().as_secs_f64() * 1e3));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(Outcome { text: String::from_utf8(bytes).expect("CSV of ASCII fields"), status })
}

#[derive(Serialize)]
struct SpectrumBody {
    operator: OperatorKind,
    /// The matrix whose singular values are listed (B − I for the factor B).
    label: String,
    n: usize,
    sigma_max: f64,
    sigma_min: f64,
    /// Weighted singular values, descending.
    singular_values: Vec<f64>,
}

pub fn spectrum_cmd(config: &RunConfig, timings: bool) -> Result<Outcome> {
    let kind = config.operators.first().copied().unwrap_or(OperatorKind::Q);
    if config.operators.len() > 1 {
        warn!("spectrum uses only the first operator ({kind})");
    }
    let mut clock = Timings::new(timings);
    let t = Instant::now();
    let surface = build_surface(&config.surface, config.resolution)?;
    let params = KernelParams::new(config.k)?;
    let mut op = assemble_kinds(&surface, params, &[kind])?.remove(0);
    if kind == OperatorKind::FactorB {
        op = op.affine(1.0, -1.0);
    }
    let mut s = weighted_singular_values(&op, &surface)?;
    s.sort_by(|a, b| b.total_cmp(a));
    clock.record("spectrum", t);
    let body = SpectrumBody {
        operator: kind,
        label: op.label().to_string(),
        n: s.len(),
        sigma_max: s.first().copied().unwrap_or(0.0),
        sigma_min: s.last().copied().unwrap_or(0.0),
        singular_values: s,
    };
    Ok(Outcome { text: render("spectrum", config, body, clock)?, status: EXIT_OK })
}

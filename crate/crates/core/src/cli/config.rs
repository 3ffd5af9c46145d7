//! Run configuration and the textual formats accepted on the command line.

use crate::convert::{ConversionMode, ConvertOptions};
use crate::density::{DensitySource, HarmonicTerm, DEFAULT_RANDOM_DEGREE};
use crate::error::{Error, Result};
use crate::operators::OperatorKind;
use crate::surface::{RadialTerm, ShapeDescriptor};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Where a density comes from, as written in a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DensityInput {
    Harmonics { terms: Vec<HarmonicTerm> },
    Random { seed: u64, l_max: usize },
    /// One value per node, `re,im` (or just `re`) per line.
    Csv { path: PathBuf },
}

impl DensityInput {
    pub fn resolve(&self) -> Result<DensitySource> {
        let src = match self {
            DensityInput::Harmonics { terms } => DensitySource::Harmonics { terms: terms.clone() },
            DensityInput::Random { seed, l_max } => DensitySource::Random { seed: *seed, l_max: *l_max },
            DensityInput::Csv { path } => DensitySource::Nodal { values: read_nodal_csv(path)? },
        };
        src.validate()?;
        Ok(src)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: ShapeDescriptor,
    pub k: f64,
    pub resolution: usize,
    /// Resolution ladder of the convergence command.
    pub resolutions: Vec<usize>,
    pub mode: Option<ConversionMode>,
    pub density: Option<DensityInput>,
    /// Operators for assemble (all) and spectrum (the first).
    pub operators: Vec<OperatorKind>,
    pub k_range: Option<[f64; 2]>,
    pub null_threshold: f64,
    pub compat_tol: f64,
    pub verify_tol: f64,
    pub factorized: bool,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let opts = ConvertOptions::default();
        RunConfig {
            surface: ShapeDescriptor::sphere(1.0),
            k: 1.0,
            resolution: 16,
            resolutions: vec![8, 12, 16],
            mode: None,
            density: None,
            operators: Vec::new(),
            k_range: None,
            null_threshold: opts.null_threshold,
            compat_tol: opts.compat_tol,
            verify_tol: 5e-3,
            factorized: false,
            seed: 0,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.surface.validate().map_err(config_error)?;
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("k = {} must be positive", self.k)));
        }
        for &r in std::iter::once(&self.resolution).chain(&self.resolutions) {
            if r < 4 {
                return Err(Error::Config(format!("resolution {r} must be at least 4")));
            }
        }
        for (name, v) in [
            ("null_threshold", self.null_threshold),
            ("compat_tol", self.compat_tol),
            ("verify_tol", self.verify_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if let Some([a, b]) = self.k_range {
            if !(a > 0.0 && b > a) {
                return Err(Error::Config(format!("k range {a}:{b} must satisfy 0 < a < b")));
            }
        }
        if self.operators.contains(&OperatorKind::Combination) {
            return Err(Error::Config("operators must be Q, A, Aprime, Q0, Q1 or FactorB".into()));
        }
        if let Some(DensityInput::Harmonics { terms }) = &self.density {
            DensitySource::Harmonics { terms: terms.clone() }.validate()?;
        }
        Ok(())
    }

    pub fn convert_options(&self) -> ConvertOptions {
        ConvertOptions { null_threshold: self.null_threshold, compat_tol: self.compat_tol, factorized: self.factorized }
    }
}

/// Re-tag a library error as a configuration error without repeating the
/// category in the message.
pub(crate) fn config_error(e: Error) -> Error {
    match e {
        Error::Config(m) | Error::Usage(m) | Error::InvalidShape(m) => Error::Config(m),
        other => Error::Config(other.to_string()),
    }
}

fn number(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Config(format!("'{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("'{s}' is not finite")));
    }
    Ok(v)
}

/// `sphere:R`, `ellipsoid:a,b,c` or `star:base,(l,m,c),(l,m,c),...`.
pub fn parse_surface(text: &str) -> Result<ShapeDescriptor> {
    let (kind, args) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("surface '{text}' must look like kind:parameters")))?;
    let shape = match kind.trim() {
        "sphere" => ShapeDescriptor::sphere(number(args)?),
        "ellipsoid" => {
            let v: Vec<f64> = args.split(',').map(number).collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::Config(format!("ellipsoid needs three semi-axes, got '{args}'")));
            }
            ShapeDescriptor::ellipsoid(v[0], v[1], v[2])
        }
        "star" => {
            let (base, rest) = match args.split_once(',') {
                Some((b, r)) => (b, r),
                None => (args, ""),
            };
            let terms = tuples(rest)?
                .into_iter()
                .map(|t| {
                    if t.len() != 3 {
                        return Err(Error::Config(format!("star term '({})' needs l,m,c", t.join(","))));
                    }
                    Ok(RadialTerm { l: integer(&t[0])? as usize, m: integer(&t[1])?, value: number(&t[2])? })
                })
                .collect::<Result<Vec<_>>>()?;
            ShapeDescriptor::Star { base_radius: number(base)?, terms }
        }
        other => return Err(Error::Config(format!("unknown surface kind '{other}'"))),
    };
    shape.validate().map_err(config_error)?;
    Ok(shape)
}

fn integer(s: &str) -> Result<i64> {
    s.trim().parse().map_err(|_| Error::Config(format!("'{s}' is not an integer")))
}

/// Split `(a,b,c),(d,e,f)` (optionally inside brackets) into field lists.
fn tuples(s: &str) -> Result<Vec<Vec<String>>> {
    let s = s.trim();
    let s = s.strip_prefix('[').map(|x| x.strip_suffix(']').unwrap_or(x)).unwrap_or(s);
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let open = rest
            .strip_prefix('(')
            .ok_or_else(|| Error::Config(format!("expected '(' at '{rest}'")))?;
        let close = open.find(')').ok_or_else(|| Error::Config(format!("unclosed '(' at '{rest}'")))?;
        out.push(open[..close].split(',').map(|x| x.trim().to_string()).collect());
        rest = open[close + 1..].trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        } else if !rest.is_empty() {
            return Err(Error::Config(format!("expected ',' at '{rest}'")));
        }
    }
    Ok(out)
}

/// `1.5`, `-2e-3`, `0.5i`, `-i`, `1+2i`, `1.5e-3-2.5i`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("'{s}' is not a complex number"));
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return Ok(Complex64::new(number(&t).map_err(|_| bad())?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&p| (bytes[p] == b'+' || bytes[p] == b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
    let imag = |x: &str| -> Result<f64> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            v => number(v).map_err(|_| bad()),
        }
    };
    match split {
        Some(p) => Ok(Complex64::new(number(&body[..p]).map_err(|_| bad())?, imag(&body[p..])?)),
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

/// `harmonics:[(l,m,c),...]`, `random:SEED[:LMAX]` or `csv:PATH`.
pub fn parse_density(text: &str) -> Result<DensityInput> {
    let (kind, args) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("density '{text}' must look like kind:arguments")))?;
    match kind.trim() {
        "harmonics" => {
            let terms = tuples(args)?
                .into_iter()
                .map(|t| {
                    if t.len() != 3 {
                        return Err(Error::Config(format!("harmonic term '({})' needs l,m,c", t.join(","))));
                    }
                    let l = integer(&t[0])?;
                    if l < 0 {
                        return Err(Error::Config(format!("negative degree {l}")));
                    }
                    Ok(HarmonicTerm { l: l as usize, m: integer(&t[1])?, coeff: parse_complex(&t[2])? })
                })
                .collect::<Result<Vec<_>>>()?;
            if terms.is_empty() {
                return Err(Error::Config("empty harmonic list".into()));
            }
            let input = DensityInput::Harmonics { terms };
            input.resolve()?;
            Ok(input)
        }
        "random" => {
            let mut parts = args.split(':');
            let seed = parts
                .next()
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad random seed in '{text}'")))?;
            let l_max = match parts.next() {
                Some(l) => l.trim().parse().map_err(|_| Error::Config(format!("bad degree in '{text}'")))?,
                None => DEFAULT_RANDOM_DEGREE,
            };
            Ok(DensityInput::Random { seed, l_max })
        }
        "csv" => Ok(DensityInput::Csv { path: PathBuf::from(args) }),
        other => Err(Error::Config(format!("unknown density kind '{other}'"))),
    }
}

pub fn read_nodal_csv(path: &Path) -> Result<Vec<Complex64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read density file {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        let at = |e: Error| match config_error(e) {
            Error::Config(m) => Error::Config(format!("{} record {}: {m}", path.display(), line + 1)),
            other => other,
        };
        let z = match fields.as_slice() {
            [] => continue,
            [re] => Complex64::new(number(re).map_err(at)?, 0.0),
            [re, im] => Complex64::new(number(re).map_err(at)?, number(im).map_err(at)?),
            _ => return Err(at(Error::Config("expected 're' or 're,im'".into()))),
        };
        out.push(z);
    }
    if out.is_empty() {
        return Err(Error::Config(format!("density file {} has no values", path.display())));
    }
    Ok(out)
}

/// `a:b`.
pub fn parse_k_range(text: &str) -> Result<[f64; 2]> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("k range '{text}' must look like a:b")))?;
    Ok([number(a)?, number(b)?])
}

/// `Q,Aprime,B`.
pub fn parse_operators(text: &str) -> Result<Vec<OperatorKind>> {
    text.split(',')
        .map(|s| OperatorKind::parse(s.trim()).map_err(config_error))
        .collect()
}

/// `8,12,16`.
pub fn parse_ladder(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad resolution '{s}'"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complex_literals() {
        let c = |s| parse_complex(s).unwrap();
        assert_eq!(c("1.0"), Complex64::new(1.0, 0.0));
        assert_eq!(c("0.5i"), Complex64::new(0.0, 0.5));
        assert_eq!(c("-i"), Complex64::new(0.0, -1.0));
        assert_eq!(c("1+2i"), Complex64::new(1.0, 2.0));
        assert_eq!(c("1.5e-3-2.5e+1i"), Complex64::new(1.5e-3, -25.0));
        assert_eq!(c("-2e-3"), Complex64::new(-2e-3, 0.0));
        assert!(parse_complex("1+").is_err());
        assert!(parse_complex("abc").is_err());
    }

    proptest! {
        #[test]
        fn complex_literals_round_trip(re in -1e6f64..1e6, im in -1e6f64..1e6) {
            let s = format!("{re:e}{}{:e}i", if im < 0.0 { "-" } else { "+" }, im.abs());
            prop_assert_eq!(parse_complex(&s).unwrap(), Complex64::new(re, im));
        }
    }

    #[test]
    fn surfaces() {
        assert_eq!(parse_surface("sphere:1.0").unwrap(), ShapeDescriptor::sphere(1.0));
        assert_eq!(parse_surface("ellipsoid:1,0.8,0.6").unwrap(), ShapeDescriptor::ellipsoid(1.0, 0.8, 0.6));
        match parse_surface("star:1.0,(2,0,0.1),(3,-1,0.05)").unwrap() {
            ShapeDescriptor::Star { base_radius, terms } => {
                assert_eq!(base_radius, 1.0);
                assert_eq!(terms.len(), 2);
                assert_eq!((terms[1].l, terms[1].m, terms[1].value), (3, -1, 0.05));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_surface("sphere:-1").is_err());
        assert!(parse_surface("cube:1").is_err());
        assert!(parse_surface("ellipsoid:1,2").is_err());
    }

    #[test]
    fn densities() {
        match parse_density("harmonics:[(0,0,1.0),(2,1,0.5i)]").unwrap() {
            DensityInput::Harmonics { terms } => {
                assert_eq!(terms.len(), 2);
                assert_eq!(terms[1], HarmonicTerm { l: 2, m: 1, coeff: Complex64::new(0.0, 0.5) });
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_density("random:7").unwrap(), DensityInput::Random { seed: 7, l_max: DEFAULT_RANDOM_DEGREE });
        assert_eq!(parse_density("random:7:5").unwrap(), DensityInput::Random { seed: 7, l_max: 5 });
        assert!(parse_density("harmonics:[(1,2,1.0)]").is_err());
        assert!(parse_density("harmonics:[(1,0)]").is_err());
        assert!(parse_density("harmonics:(1,0,1").is_err());
        assert!(parse_density("nope:1").is_err());
    }

    #[test]
    fn nodal_csv() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.csv");
        std::fs::write(&good, "# values\n1.0, 2.0\n-0.5\n\n3e-1,-1\n").unwrap();
        let v = read_nodal_csv(&good).unwrap();
        assert_eq!(v, vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0), Complex64::new(0.3, -1.0)]);
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "1.0,x\n").unwrap();
        assert!(matches!(read_nodal_csv(&bad), Err(Error::Config(_))));
        assert!(matches!(read_nodal_csv(&dir.path().join("missing.csv")), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.k = 0.0;
        assert!(c.validate().is_err());
        c = RunConfig { resolution: 3, ..RunConfig::default() };
        assert!(c.validate().is_err());
        c = RunConfig { compat_tol: 1.0, ..RunConfig::default() };
        assert!(c.validate().is_err());
        let json = serde_json::to_string(&RunConfig::default()).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, RunConfig::default());
        assert!(serde_json::from_str::<RunConfig>("{\"kk\": 1}").is_err());
    }
}

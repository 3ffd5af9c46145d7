//! Density sources that can be sampled on any grid of a surface: spherical
//! harmonic expansions in the parameter direction, seeded random
//! band-limited densities, and raw nodal values.

use crate::error::{check_len, Error, Result};
use crate::harmonics;
use crate::operators::{DensityRole, SurfaceDensity};
use crate::surface::QuadratureSurface;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default degree of random band-limited densities.
pub const DEFAULT_RANDOM_DEGREE: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub l: usize,
    pub m: i64,
    pub coeff: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DensitySource {
    /// Σ c·Y_lm(ŝ) at the parameter direction ŝ of each node.
    Harmonics { terms: Vec<HarmonicTerm> },
    /// Coefficients for every (l, m) with l ≤ l_max drawn uniformly from the
    /// unit square of the complex plane.
    Random { seed: u64, l_max: usize },
    /// Values at the nodes of one specific grid.
    Nodal { values: Vec<Complex64> },
}

impl DensitySource {
    pub fn validate(&self) -> Result<()> {
        match self {
            DensitySource::Harmonics { terms } => {
                for t in terms {
                    if t.m.unsigned_abs() as usize > t.l {
                        return Err(Error::Config(format!("harmonic ({}, {}) has |m| > l", t.l, t.m)));
                    }
                    if t.l > crate::oracle::MAX_DEGREE {
                        return Err(Error::Config(format!("harmonic degree {} is too large", t.l)));
                    }
                    if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                        return Err(Error::Config("non-finite harmonic coefficient".into()));
                    }
                }
                Ok(())
            }
            DensitySource::Random { l_max, .. } => {
                if *l_max > crate::oracle::MAX_DEGREE {
                    return Err(Error::Config(format!("random density degree {l_max} is too large")));
                }
                Ok(())
            }
            DensitySource::Nodal { values } => {
                if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                    return Err(Error::Config("non-finite nodal value".into()));
                }
                Ok(())
            }
        }
    }

    /// Expansion terms, if the source is resolution independent.
    pub fn terms(&self) -> Option<Vec<HarmonicTerm>> {
        match self {
            DensitySource::Harmonics { terms } => Some(terms.clone()),
            DensitySource::Random { seed, l_max } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(harmonics::count(*l_max));
                for l in 0..=*l_max {
                    for m in -(l as i64)..=(l as i64) {
                        let coeff = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        out.push(HarmonicTerm { l, m, coeff });
                    }
                }
                Some(out)
            }
            DensitySource::Nodal { .. } => None,
        }
    }

    pub fn sample(&self, surface: &QuadratureSurface, role: DensityRole) -> Result<SurfaceDensity> {
        self.validate()?;
        if let DensitySource::Nodal { values } = self {
            check_len(surface.len(), values.len())?;
            return SurfaceDensity::new(surface, DVector::from_column_slice(values), role);
        }
        let terms = self.terms().unwrap_or_default();
        let l_max = terms.iter().map(|t| t.l).max().unwrap_or(0);
        let mut buf = vec![Complex64::new(0.0, 0.0); harmonics::count(l_max)];
        let values = DVector::from_iterator(
            surface.len(),
            surface.params().iter().map(|p| {
                harmonics::ylm_into(l_max, p, &mut buf);
                terms.iter().map(|t| t.coeff * buf[harmonics::index(t.l, t.m)]).sum::<Complex64>()
            }),
        );
        SurfaceDensity::new(surface, values, role)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_surface, ShapeDescriptor};

    #[test]
    fn random_sources_are_reproducible() {
        let s = build_surface(&ShapeDescriptor::sphere(1.0), 8).unwrap();
        let a = DensitySource::Random { seed: 5, l_max: 3 }.sample(&s, DensityRole::Mu).unwrap();
        let b = DensitySource::Random { seed: 5, l_max: 3 }.sample(&s, DensityRole::Mu).unwrap();
        let c = DensitySource::Random { seed: 6, l_max: 3 }.sample(&s, DensityRole::Mu).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn harmonic_source_is_band_limited() {
        let s = build_surface(&ShapeDescriptor::sphere(2.0), 8).unwrap();
        let src = DensitySource::Harmonics {
            terms: vec![HarmonicTerm { l: 2, m: 1, coeff: Complex64::new(0.0, 0.5) }],
        };
        let d = src.sample(&s, DensityRole::Sigma).unwrap();
        // ∫ |c Y|² dΩ = |c|² on the parameter sphere, and dS = R² dΩ
        let n2 = s.h0_norm(d.values.as_slice()).unwrap().powi(2);
        assert!((n2 - 0.25 * 4.0).abs() < 1e-12, "{n2}");
    }

    #[test]
    fn invalid_sources_are_rejected() {
        let s = build_surface(&ShapeDescriptor::sphere(1.0), 4).unwrap();
        let bad = DensitySource::Harmonics { terms: vec![HarmonicTerm { l: 1, m: 2, coeff: Complex64::new(1.0, 0.0) }] };
        assert!(matches!(bad.sample(&s, DensityRole::Mu), Err(Error::Config(_))));
        let short = DensitySource::Nodal { values: vec![Complex64::new(1.0, 0.0); 3] };
        assert!(matches!(short.sample(&s, DensityRole::Mu), Err(Error::Dimension { .. })));
    }
}

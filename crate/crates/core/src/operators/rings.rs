//! Block-circulant structure of operators on surfaces of revolution.
//!
//! Nodes are ordered `a * n_phi + b` (ring `a`, longitude `b`). An operator
//! that commutes with rotations by 2π/n_phi about the z axis satisfies
//! M[(a,b),(a',b')] = r_{aa'}[(b' − b) mod n_phi] and is diagonalised by the
//! longitude DFT: block μ is M̂_μ[a,a'] = Σ_c M[(a,0),(a',c)] e^{iμφ_c}.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

#[derive(Clone, Debug)]
pub struct FourierBlocks {
    n_theta: usize,
    n_phi: usize,
    blocks: Vec<DMatrix<Complex64>>,
}

impl FourierBlocks {
    pub fn new(n_theta: usize, n_phi: usize, blocks: Vec<DMatrix<Complex64>>) -> Self {
        assert_eq!(blocks.len(), n_phi);
        assert!(blocks.iter().all(|b| b.nrows() == n_theta && b.ncols() == n_theta));
        FourierBlocks { n_theta, n_phi, blocks }
    }

    pub fn identity(n_theta: usize, n_phi: usize) -> Self {
        Self::new(n_theta, n_phi, vec![DMatrix::identity(n_theta, n_theta); n_phi])
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    pub fn block(&self, mu: usize) -> &DMatrix<Complex64> {
        &self.blocks[mu]
    }

    /// Signed azimuthal order of block `mu`, in (−n_phi/2, n_phi/2].
    pub fn signed_order(&self, mu: usize) -> i64 {
        signed_order(mu, self.n_phi)
    }

    /// Extract the blocks of a dense rotation-invariant matrix from its
    /// b = 0 rows.
    pub fn from_dense(m: &DMatrix<Complex64>, n_theta: usize, n_phi: usize) -> Self {
        let mut blocks = vec![DMatrix::zeros(n_theta, n_theta); n_phi];
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(n_phi);
        let mut buf = vec![Complex64::new(0.0, 0.0); n_phi];
        for a in 0..n_theta {
            for ap in 0..n_theta {
                for (c, v) in buf.iter_mut().enumerate() {
                    *v = m[(a * n_phi, ap * n_phi + c)];
                }
                fft.process(&mut buf);
                for (mu, v) in buf.iter().enumerate() {
                    blocks[mu][(a, ap)] = *v;
                }
            }
        }
        Self::new(n_theta, n_phi, blocks)
    }

    /// Materialise the full n×n matrix.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let (nt, np) = (self.n_theta, self.n_phi);
        let n = nt * np;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(np);
        let scale = 1.0 / np as f64;
        let mut out = DMatrix::zeros(n, n);
        let mut buf = vec![Complex64::new(0.0, 0.0); np];
        for a in 0..nt {
            for ap in 0..nt {
                for (mu, v) in buf.iter_mut().enumerate() {
                    *v = self.blocks[mu][(a, ap)];
                }
                fft.process(&mut buf);
                for b in 0..np {
                    for bp in 0..np {
                        out[(a * np + b, ap * np + bp)] = buf[(bp + np - b) % np] * scale;
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let vh = forward(v, self.n_theta, self.n_phi);
        let out: Vec<DVector<Complex64>> = self.blocks.iter().zip(&vh).map(|(m, x)| m * x).collect();
        inverse(&out, self.n_theta, self.n_phi)
    }

    pub fn mul(&self, other: &FourierBlocks) -> FourierBlocks {
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect();
        Self::new(self.n_theta, self.n_phi, blocks)
    }

    /// alpha·self + beta·I.
    pub fn affine(&self, alpha: Complex64, beta: Complex64) -> FourierBlocks {
        let id = DMatrix::<Complex64>::identity(self.n_theta, self.n_theta);
        let blocks = self.blocks.iter().map(|m| m * alpha + &id * beta).collect();
        Self::new(self.n_theta, self.n_phi, blocks)
    }

    pub fn add(&self, other: &FourierBlocks) -> FourierBlocks {
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect();
        Self::new(self.n_theta, self.n_phi, blocks)
    }

    pub fn sub(&self, other: &FourierBlocks) -> FourierBlocks {
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect();
        Self::new(self.n_theta, self.n_phi, blocks)
    }

    /// Blocks of the plain transpose: (Mᵀ)^_μ = (M̂_{−μ})ᵀ.
    pub fn transpose(&self) -> FourierBlocks {
        let np = self.n_phi;
        let blocks = (0..np).map(|mu| self.blocks[(np - mu) % np].transpose()).collect();
        Self::new(self.n_theta, np, blocks)
    }
}

pub fn signed_order(mu: usize, n_phi: usize) -> i64 {
    if 2 * mu <= n_phi {
        mu as i64
    } else {
        mu as i64 - n_phi as i64
    }
}

/// v̂_μ[a] = Σ_b v[a,b] e^{−iμφ_b}.
pub fn forward(v: &DVector<Complex64>, n_theta: usize, n_phi: usize) -> Vec<DVector<Complex64>> {
    assert_eq!(v.len(), n_theta * n_phi);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_phi);
    let mut out = vec![DVector::zeros(n_theta); n_phi];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_phi];
    for (a, ring) in v.as_slice().chunks(n_phi).enumerate() {
        buf.copy_from_slice(ring);
        fft.process(&mut buf);
        for (mu, x) in buf.iter().enumerate() {
            out[mu][a] = *x;
        }
    }
    out
}

/// v[a,b] = (1/n_phi) Σ_μ v̂_μ[a] e^{iμφ_b}.
pub fn inverse(vh: &[DVector<Complex64>], n_theta: usize, n_phi: usize) -> DVector<Complex64> {
    assert_eq!(vh.len(), n_phi);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n_phi);
    let mut out = DVector::zeros(n_theta * n_phi);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_phi];
    let scale = 1.0 / n_phi as f64;
    for a in 0..n_theta {
        for (mu, x) in buf.iter_mut().enumerate() {
            *x = vh[mu][a];
        }
        fft.process(&mut buf);
        for (b, x) in buf.iter().enumerate() {
            out[a * n_phi + b] = x * scale;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_blocks(nt: usize, np: usize, seed: u64) -> FourierBlocks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = (0..np)
            .map(|_| DMatrix::from_fn(nt, nt, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        FourierBlocks::new(nt, np, blocks)
    }

    fn random_vec(n: usize, seed: u64) -> DVector<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn dense_roundtrip_and_apply() {
        let fb = random_blocks(3, 8, 1);
        let dense = fb.to_dense();
        let back = FourierBlocks::from_dense(&dense, 3, 8);
        for (x, y) in fb.blocks().iter().zip(back.blocks()) {
            assert!((x - y).norm() < 1e-12);
        }
        let v = random_vec(24, 2);
        assert!((fb.apply(&v) - &dense * &v).norm() < 1e-12);
    }

    #[test]
    fn products_and_transposes_match_dense() {
        let a = random_blocks(3, 6, 3);
        let b = random_blocks(3, 6, 4);
        let (da, db) = (a.to_dense(), b.to_dense());
        assert!((a.mul(&b).to_dense() - &da * &db).norm() < 1e-11);
        assert!((a.transpose().to_dense() - da.transpose()).norm() < 1e-12);
        let two = Complex64::new(2.0, 0.0);
        let id = DMatrix::<Complex64>::identity(18, 18);
        assert!((a.affine(two, -two).to_dense() - (&da * two - id * two)).norm() < 1e-12);
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let v = random_vec(20, 5);
        let back = inverse(&forward(&v, 4, 5), 4, 5);
        assert!((back - v).norm() < 1e-13);
    }

    #[test]
    fn signed_orders() {
        let orders: Vec<i64> = (0..6).map(|mu| signed_order(mu, 6)).collect();
        assert_eq!(orders, vec![0, 1, 2, 3, -2, -1]);
    }
}

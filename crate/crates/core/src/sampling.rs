//! Random matrices: Haar unitaries, Ginibre-based Hermitian operators and
//! density matrices, and states of prescribed purity.
//!
//! All samplers take a caller-owned RNG.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, diag, hermitian_part, real, trace, ComplexMatrix};

/// Seeded generator used throughout the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix of i.i.d. standard complex Gaussians (variance 1 per entry).
pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of R's
/// diagonal pushed back into Q.
pub fn haar_random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    assert!(dim >= 1, "unitary dimension must be positive");
    let z = ginibre(dim, rng);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { real(1.0) };
        q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

pub fn haar_random_unitary_seeded(dim: usize, seed: u64) -> ComplexMatrix {
    haar_random_unitary(dim, &mut seeded_rng(seed))
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    hermitian_part(&ginibre(dim, rng))
}

/// Hilbert–Schmidt random density matrix (full rank almost surely).
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(dim, rng);
    let rho = &g * g.adjoint();
    let tr = trace(&rho).re;
    hermitian_part(&(rho / real(tr)))
}

/// Random pure state |ψ⟩⟨ψ|.
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let u = haar_random_unitary(dim, rng);
    let psi = u.column(0).into_owned();
    &psi * psi.adjoint()
}

/// Spectrum `x e_0 + (1-x) I/d` whose purity equals `purity`.
pub fn spectrum_with_purity(dim: usize, purity: f64) -> Vec<f64> {
    let d = dim as f64;
    let x = ((purity - 1.0 / d) / (1.0 - 1.0 / d)).max(0.0).sqrt();
    let mut p = vec![(1.0 - x) / d; dim];
    p[0] += x;
    p
}

/// Diagonal density matrix with the given purity.
pub fn diagonal_state_with_purity(dim: usize, purity: f64) -> ComplexMatrix {
    diag(&spectrum_with_purity(dim, purity))
}

/// U ρ U†
pub fn conjugate(u: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    u * m * u.adjoint()
}

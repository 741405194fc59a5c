//! Operators of the form Σ_k c_k A_k ⊗ B_k on a bipartite space, applied to
//! state vectors without materializing the full matrix.
//!
//! A vector ψ on S⊗E is indexed `i * d_e + j`. Viewing it as a d_s×d_e matrix
//! Ψ, (A⊗B)ψ corresponds to A Ψ Bᵀ.

use nalgebra::DVector;

use crate::linalg::{self, commutator, identity, kron, ComplexMatrix, LinalgError, C64};

/// Dense matrix plus its nonzero triplets, for cheap application of banded
/// subsystem operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemOp {
    dense: ComplexMatrix,
    nonzeros: Vec<(usize, usize, C64)>,
}

impl SubsystemOp {
    pub fn new(dense: ComplexMatrix) -> Self {
        let mut nonzeros = Vec::new();
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                let z = dense[(i, j)];
                if z != C64::new(0.0, 0.0) {
                    nonzeros.push((i, j, z));
                }
            }
        }
        Self { dense, nonzeros }
    }

    pub fn dense(&self) -> &ComplexMatrix {
        &self.dense
    }

    pub fn dim(&self) -> usize {
        self.dense.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.nonzeros.len()
    }
}

/// One term c · A ⊗ B. `None` stands for the identity on that factor.
#[derive(Debug, Clone, PartialEq)]
pub struct KronTerm {
    pub coef: C64,
    pub left: Option<SubsystemOp>,
    pub right: Option<SubsystemOp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KronSum {
    d_s: usize,
    d_e: usize,
    terms: Vec<KronTerm>,
}

impl KronSum {
    pub fn zero(d_s: usize, d_e: usize) -> Self {
        Self { d_s, d_e, terms: Vec::new() }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_s, self.d_e)
    }

    pub fn dim(&self) -> usize {
        self.d_s * self.d_e
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// c · A ⊗ I
    pub fn push_left(&mut self, coef: C64, a: &ComplexMatrix) -> Result<(), LinalgError> {
        self.check(Some(a), None)?;
        self.terms.push(KronTerm { coef, left: Some(SubsystemOp::new(a.clone())), right: None });
        Ok(())
    }

    /// c · I ⊗ B
    pub fn push_right(&mut self, coef: C64, b: &ComplexMatrix) -> Result<(), LinalgError> {
        self.check(None, Some(b))?;
        self.terms.push(KronTerm { coef, left: None, right: Some(SubsystemOp::new(b.clone())) });
        Ok(())
    }

    /// c · A ⊗ B
    pub fn push_product(&mut self, coef: C64, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<(), LinalgError> {
        self.check(Some(a), Some(b))?;
        self.terms.push(KronTerm {
            coef,
            left: Some(SubsystemOp::new(a.clone())),
            right: Some(SubsystemOp::new(b.clone())),
        });
        Ok(())
    }

    pub fn push_identity(&mut self, coef: C64) {
        self.terms.push(KronTerm { coef, left: None, right: None });
    }

    fn check(&self, a: Option<&ComplexMatrix>, b: Option<&ComplexMatrix>) -> Result<(), LinalgError> {
        if let Some(a) = a {
            let d = linalg::ensure_square(a)?;
            if d != self.d_s {
                return Err(LinalgError::DimensionMismatch { left: self.d_s, right: d });
            }
        }
        if let Some(b) = b {
            let d = linalg::ensure_square(b)?;
            if d != self.d_e {
                return Err(LinalgError::DimensionMismatch { left: self.d_e, right: d });
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.coef *= factor);
        out
    }

    pub fn plus(&self, other: &KronSum) -> Result<Self, LinalgError> {
        if self.dims() != other.dims() {
            return Err(LinalgError::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim(), self.dim());
        for t in &self.terms {
            let a = t.left.as_ref().map(|o| o.dense.clone()).unwrap_or_else(|| identity(self.d_s));
            let b = t.right.as_ref().map(|o| o.dense.clone()).unwrap_or_else(|| identity(self.d_e));
            m += kron(&a, &b) * t.coef;
        }
        m
    }

    /// out = K ψ
    pub fn apply_into(&self, psi: &[C64], out: &mut [C64]) {
        let (d_s, d_e) = (self.d_s, self.d_e);
        assert_eq!(psi.len(), d_s * d_e);
        assert_eq!(out.len(), d_s * d_e);
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        let mut tmp = vec![C64::new(0.0, 0.0); d_s * d_e];
        for term in &self.terms {
            // tmp = Ψ Bᵀ
            let src: &[C64] = match &term.right {
                None => psi,
                Some(b) => {
                    tmp.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                    for &(j, l, v) in &b.nonzeros {
                        for k in 0..d_s {
                            tmp[k * d_e + j] += v * psi[k * d_e + l];
                        }
                    }
                    &tmp
                }
            };
            match &term.left {
                None => {
                    for (o, s) in out.iter_mut().zip(src.iter()) {
                        *o += term.coef * s;
                    }
                }
                Some(a) => {
                    for &(i, k, v) in &a.nonzeros {
                        let w = term.coef * v;
                        let (row_out, row_src) = (i * d_e, k * d_e);
                        for j in 0..d_e {
                            out[row_out + j] += w * src[row_src + j];
                        }
                    }
                }
            }
        }
    }

    pub fn apply(&self, psi: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(psi.len());
        self.apply_into(psi.as_slice(), out.as_mut_slice());
        out
    }

    /// ⟨ψ|K|ψ⟩ for a normalized ψ.
    pub fn expectation(&self, psi: &DVector<C64>) -> C64 {
        psi.dotc(&self.apply(psi))
    }

    /// −(i/ħ)[H ⊗ I, K] = Σ_k −(i/ħ) c_k [H, A_k] ⊗ B_k
    pub fn left_commutator(&self, h: &ComplexMatrix, prefactor: C64) -> Result<Self, LinalgError> {
        self.check(Some(h), None)?;
        let mut out = KronSum::zero(self.d_s, self.d_e);
        for t in &self.terms {
            let Some(a) = &t.left else { continue };
            let ca = commutator(h, &a.dense)?;
            out.terms.push(KronTerm {
                coef: t.coef * prefactor,
                left: Some(SubsystemOp::new(ca)),
                right: t.right.clone(),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, pauli_x, pauli_y, pauli_z, real};
    use crate::sampling::{random_hermitian, seeded_rng};

    fn random_vector(n: usize, seed: u64) -> DVector<C64> {
        let mut rng = seeded_rng(seed);
        let h = random_hermitian(n, &mut rng);
        DVector::from_fn(n, |i, _| h[(i, 0)] + c(0.1 * i as f64, 0.0))
    }

    #[test]
    fn apply_matches_dense_product() {
        let mut rng = seeded_rng(3);
        let (d_s, d_e) = (3, 4);
        let a = random_hermitian(d_s, &mut rng);
        let b = random_hermitian(d_e, &mut rng);
        let hs = random_hermitian(d_s, &mut rng);
        let he = random_hermitian(d_e, &mut rng);
        let mut k = KronSum::zero(d_s, d_e);
        k.push_product(c(0.7, -0.2), &a, &b).unwrap();
        k.push_left(real(1.3), &hs).unwrap();
        k.push_right(real(-0.4), &he).unwrap();
        k.push_identity(real(2.0));
        let psi = random_vector(d_s * d_e, 4);
        let got = k.apply(&psi);
        let want = k.to_dense() * &psi;
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn dense_form_matches_explicit_kron() {
        let mut k = KronSum::zero(2, 2);
        k.push_product(real(1.0), &pauli_z(), &pauli_z()).unwrap();
        let want = linalg::diag(&[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(k.to_dense(), want);
    }

    #[test]
    fn left_commutator_matches_dense() {
        let mut v = KronSum::zero(2, 2);
        v.push_product(real(1.0), &pauli_z(), &pauli_z()).unwrap();
        let q = v.left_commutator(&pauli_x(), c(0.0, -1.0)).unwrap();
        // −i[σx, σz] ⊗ σz = −2 σy ⊗ σz
        let want = kron(&pauli_y(), &pauli_z()) * real(-2.0);
        assert!((q.to_dense() - want).norm() < 1e-14);
    }

    #[test]
    fn rejects_wrong_factor_dims() {
        let mut k = KronSum::zero(2, 3);
        assert!(k.push_left(real(1.0), &identity(3)).is_err());
        assert!(k.push_right(real(1.0), &identity(2)).is_err());
    }
}

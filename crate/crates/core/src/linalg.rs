//! Dense complex-matrix substrate.
//!
//! Operators are `nalgebra` dense matrices of `Complex64`. Multipartite
//! operators carry a [`DimSignature`]; the leftmost subsystem is the
//! slowest-varying index, which is the ordering produced by [`kron`] and
//! assumed by [`partial_trace`] and [`partial_transpose`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Elementwise Hermiticity tolerance accepted by [`eigh`].
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Ordered subsystem dimensions of a multipartite operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DimSignature(Vec<usize>);

impl DimSignature {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSignature("empty signature".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidSignature(format!("subsystem dimension {d}")));
        }
        Ok(Self(dims))
    }

    /// Single-system signature `[d]`.
    pub fn single(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        Self(vec![d])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total Hilbert-space dimension.
    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    pub fn subsystem(&self, i: usize) -> usize {
        self.0[i]
    }

    /// Signature of the concatenated system `self ⊗ other`.
    pub fn join(&self, other: &DimSignature) -> DimSignature {
        let mut dims = self.0.clone();
        dims.extend_from_slice(&other.0);
        DimSignature(dims)
    }

    /// Signature restricted to the (sorted, deduplicated) `keep` subsystems.
    pub fn restrict(&self, keep: &[usize]) -> Result<DimSignature> {
        let keep = self.normalize_keep(keep)?;
        Ok(DimSignature(keep.iter().map(|&i| self.0[i]).collect()))
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if self.total() != dim {
            return Err(Error::InvalidSignature(format!(
                "signature {:?} has total dimension {} but the operator has dimension {dim}",
                self.0,
                self.total()
            )));
        }
        Ok(())
    }

    fn normalize_keep(&self, keep: &[usize]) -> Result<Vec<usize>> {
        if keep.is_empty() {
            return Err(Error::InvalidSignature("no subsystems kept".into()));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&bad) = keep.iter().find(|&&i| i >= self.0.len()) {
            return Err(Error::InvalidSignature(format!(
                "subsystem index {bad} out of range for {} subsystems",
                self.0.len()
            )));
        }
        Ok(keep)
    }
}

impl TryFrom<Vec<usize>> for DimSignature {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        DimSignature::new(dims)
    }
}

impl From<DimSignature> for Vec<usize> {
    fn from(sig: DimSignature) -> Self {
        sig.0
    }
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    /// `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Largest elementwise modulus of `m - m†`.
pub fn max_asymmetry(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    max_asymmetry(m) <= tol
}

/// `(m + m†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * real(0.5)
}

/// Hermitian eigendecomposition with the default tolerance.
pub fn eigh(m: &CMatrix) -> Result<Eigh> {
    eigh_with_tol(m, HERMITIAN_TOL)
}

pub fn eigh_with_tol(m: &CMatrix, tol: f64) -> Result<Eigh> {
    let asym = max_asymmetry(m);
    if asym > tol {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(eigh_unchecked(m))
}

/// Eigendecomposition of the Hermitian part of `m`, skipping validation.
pub fn eigh_unchecked(m: &CMatrix) -> Eigh {
    let n = m.nrows();
    if n == 0 {
        return Eigh { values: Vec::new(), vectors: CMatrix::zeros(0, 0) };
    }
    let sym = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sym.eigenvalues[a].total_cmp(&sym.eigenvalues[b]));
    let values = order.iter().map(|&k| sym.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| sym.eigenvectors[(i, order[j])]);
    Eigh { values, vectors }
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Kronecker product; `a` indexes the slow (most significant) factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// `|v⟩⟨v|`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Basis vector `|k⟩` in dimension `d`.
pub fn basis(d: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[k] = ONE;
    v
}

/// Mixed-radix digits of `index` for the given dimensions, most significant first.
fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
}

fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Reduced operator on the `keep` subsystems (output ordered as in `sig`).
pub fn partial_trace(m: &CMatrix, sig: &DimSignature, keep: &[usize]) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::InvalidSignature(format!(
            "partial trace of a non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    sig.check(m.nrows())?;
    let keep = sig.normalize_keep(keep)?;
    let dims = sig.dims();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let dk: usize = keep_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // Full index for every (kept index, traced index) pair.
    let mut full = vec![0usize; dk * dt];
    let mut kd = vec![0usize; keep.len()];
    let mut td = vec![0usize; traced.len()];
    let mut all = vec![0usize; dims.len()];
    for k in 0..dk {
        digits(k, &keep_dims, &mut kd);
        for t in 0..dt {
            digits(t, &traced_dims, &mut td);
            for (slot, &sys) in keep.iter().enumerate() {
                all[sys] = kd[slot];
            }
            for (slot, &sys) in traced.iter().enumerate() {
                all[sys] = td[slot];
            }
            full[k * dt + t] = compose(&all, dims);
        }
    }

    let mut out = CMatrix::zeros(dk, dk);
    for r in 0..dk {
        for c in 0..dk {
            let mut acc = ZERO;
            for t in 0..dt {
                acc += m[(full[r * dt + t], full[c * dt + t])];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Transpose on the listed subsystems only.
pub fn partial_transpose(m: &CMatrix, sig: &DimSignature, systems: &[usize]) -> Result<CMatrix> {
    sig.check(m.nrows())?;
    let dims = sig.dims();
    if let Some(&bad) = systems.iter().find(|&&s| s >= dims.len()) {
        return Err(Error::InvalidSignature(format!("subsystem index {bad} out of range")));
    }
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    let mut rd = vec![0usize; dims.len()];
    let mut cd = vec![0usize; dims.len()];
    for r in 0..n {
        digits(r, dims, &mut rd);
        for c in 0..n {
            digits(c, dims, &mut cd);
            let (mut r2, mut c2) = (rd.clone(), cd.clone());
            for &s in systems {
                std::mem::swap(&mut r2[s], &mut c2[s]);
            }
            out[(compose(&r2, dims), compose(&c2, dims))] = m[(r, c)];
        }
    }
    Ok(out)
}

/// Row-major vectorisation, `vec(A X B) = (A ⊗ Bᵀ) vec(X)`.
pub fn vec_row(m: &CMatrix) -> CVector {
    CVector::from_iterator(m.nrows() * m.ncols(), m.transpose().iter().copied())
}

pub fn unvec_row(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_row_slice(rows, cols, v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        hermitize(&gaussian(n, n, rng))
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = gaussian(n, n, rng);
        let p = &g * g.adjoint();
        let t = p.trace();
        p / t
    }

    #[test]
    fn eigh_identity_and_diagonal() {
        let e = eigh(&identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![real(0.75), real(0.25)]));
        let e = eigh(&d).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(e.values[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 4, 7, 16] {
            for _ in 0..20 {
                let m = random_hermitian(n, &mut rng);
                let e = eigh(&m).unwrap();
                assert!(frobenius(&(e.reconstruct() - &m)) < 1e-9);
                let vv = e.vectors.adjoint() * &e.vectors;
                assert!(frobenius(&(vv - identity(n))) < 1e-10);
                assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut m = identity(2);
        m[(0, 1)] = real(0.5);
        match eigh(&m) {
            Err(Error::NotHermitian { asymmetry }) => assert_abs_diff_eq!(asymmetry, 0.5),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn kron_basic_cases() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        let p0 = outer(&basis(2, 0));
        let p1 = outer(&basis(2, 1));
        assert_eq!(kron(&p0, &p1), outer(&basis(4, 1)));
    }

    #[test]
    fn kron_mixed_product_and_associativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (a, b, c, d) = (
                gaussian(2, 2, &mut rng),
                gaussian(2, 2, &mut rng),
                gaussian(2, 2, &mut rng),
                gaussian(2, 2, &mut rng),
            );
            let lhs = kron(&a, &b) * kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            assert!(frobenius(&(lhs - rhs)) < 1e-12);
            let l = kron(&kron(&a, &b), &c);
            let r = kron(&a, &kron(&b, &c));
            assert!(frobenius(&(l - r)) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_state(2, &mut rng);
        let b = random_state(3, &mut rng);
        let sig = DimSignature::new(vec![2, 3]).unwrap();
        let ab = kron(&a, &b);
        assert!(frobenius(&(partial_trace(&ab, &sig, &[0]).unwrap() - &a)) < 1e-12);
        assert!(frobenius(&(partial_trace(&ab, &sig, &[1]).unwrap() - &b)) < 1e-12);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let s = 1.0 / 2f64.sqrt();
        let v = CVector::from_vec(vec![real(s), ZERO, ZERO, real(s)]);
        let sig = DimSignature::new(vec![2, 2]).unwrap();
        let red = partial_trace(&outer(&v), &sig, &[0]).unwrap();
        assert!(frobenius(&(red - identity(2) * real(0.5))) < 1e-15);
    }

    /// Explicit index-summation oracle for keeping the middle factor of [2,2,2].
    #[test]
    fn partial_trace_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_state(8, &mut rng);
        let sig = DimSignature::new(vec![2, 2, 2]).unwrap();
        let got = partial_trace(&rho, &sig, &[1]).unwrap();
        let mut want = CMatrix::zeros(2, 2);
        for b in 0..2 {
            for b2 in 0..2 {
                for a in 0..2 {
                    for c in 0..2 {
                        want[(b, b2)] += rho[(a * 4 + b * 2 + c, a * 4 + b2 * 2 + c)];
                    }
                }
            }
        }
        assert!(frobenius(&(got - want)) < 1e-12);
    }

    #[test]
    fn partial_trace_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_state(12, &mut rng);
        let sig = DimSignature::new(vec![2, 3, 2]).unwrap();
        let one_shot = partial_trace(&rho, &sig, &[0]).unwrap();
        let drop_c = partial_trace(&rho, &sig, &[0, 1]).unwrap();
        let two_step =
            partial_trace(&drop_c, &DimSignature::new(vec![2, 3]).unwrap(), &[0]).unwrap();
        assert!(frobenius(&(one_shot - two_step)) < 1e-12);
    }

    #[test]
    fn partial_trace_preserves_trace_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sig = DimSignature::new(vec![2, 2, 3]).unwrap();
        for _ in 0..20 {
            let rho = random_state(12, &mut rng);
            for keep in [&[0usize][..], &[1], &[2], &[0, 2], &[1, 2]] {
                let red = partial_trace(&rho, &sig, keep).unwrap();
                assert_abs_diff_eq!(red.trace().re, 1.0, epsilon = 1e-12);
                assert!(eigvalsh(&red)[0] >= -1e-10);
            }
        }
    }

    #[test]
    fn partial_trace_rejects_bad_signature() {
        let m = identity(4);
        assert!(partial_trace(&m, &DimSignature::new(vec![2, 3]).unwrap(), &[0]).is_err());
        assert!(partial_trace(&m, &DimSignature::new(vec![2, 2]).unwrap(), &[]).is_err());
        assert!(partial_trace(&m, &DimSignature::new(vec![2, 2]).unwrap(), &[2]).is_err());
        assert!(DimSignature::new(vec![2, 0]).is_err());
    }

    #[test]
    fn partial_transpose_of_product_is_local_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = gaussian(2, 2, &mut rng);
        let b = gaussian(3, 3, &mut rng);
        let sig = DimSignature::new(vec![2, 3]).unwrap();
        let pt = partial_transpose(&kron(&a, &b), &sig, &[1]).unwrap();
        assert!(frobenius(&(pt - kron(&a, &b.transpose()))) < 1e-12);
    }

    #[test]
    fn row_vectorisation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let (a, x, b) = (gaussian(2, 3, &mut rng), gaussian(3, 3, &mut rng), gaussian(3, 2, &mut rng));
        let lhs = vec_row(&(&a * &x * &b));
        let rhs = kron(&a, &b.transpose()) * vec_row(&x);
        assert!((lhs - rhs).norm() < 1e-12);
        assert_eq!(unvec_row(&vec_row(&x), 3, 3), x);
    }
}

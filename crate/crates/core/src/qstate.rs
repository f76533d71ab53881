//! Quantum states: density operators, pure states, ensembles and purifications.
//!
//! Random sampling goes through [`RngStream`], a `(seed, stream id)` pair
//! that always reproduces the same draws. Parallel callers take one stream
//! id per trial, so results do not depend on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, CVector, DimSignature, Eigh, C64};

/// Tolerances applied when validating states.
pub mod tol {
    pub const HERMITIAN: f64 = 1e-10;
    /// Eigenvalues in `[-CLIP, 0)` are clipped to zero.
    pub const CLIP: f64 = 1e-10;
    pub const TRACE: f64 = 1e-10;
    pub const NORM: f64 = 1e-12;
    pub const PROBABILITY_SUM: f64 = 1e-10;
    /// Eigenvalue threshold used to count rank.
    pub const RANK: f64 = 1e-10;
}

/// Positive semidefinite, unit-trace operator with a subsystem signature.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    sig: DimSignature,
}

impl DensityOperator {
    /// Validates `m` as a state. Small negative eigenvalues are clipped and
    /// the result renormalised; anything beyond the tolerances is rejected.
    pub fn new(m: CMatrix, sig: DimSignature) -> Result<Self> {
        Self::with_clip(m, sig, tol::CLIP)
    }

    pub fn with_clip(m: CMatrix, sig: DimSignature, clip: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        sig.check(m.nrows())?;
        let eig = linalg::eigh_with_tol(&m, tol::HERMITIAN)?;
        if eig.min() < -clip {
            return Err(Error::NotPositive { min_eigenvalue: eig.min() });
        }
        let tr: f64 = eig.values.iter().sum();
        if (tr - 1.0).abs() > tol::TRACE {
            return Err(Error::WrongTrace { trace: tr });
        }
        let matrix = if eig.min() < 0.0 {
            let clipped: f64 = eig.values.iter().map(|&x| x.max(0.0)).sum();
            eig.map(|x| x.max(0.0) / clipped)
        } else {
            linalg::hermitize(&m)
        };
        Ok(Self { matrix, sig })
    }

    /// Single-system state; shorthand for `new(m, [dim])`.
    pub fn single(m: CMatrix) -> Result<Self> {
        let d = m.nrows();
        Self::new(m, DimSignature::single(d))
    }

    /// Normalises a PSD matrix without further checks on scale.
    pub(crate) fn from_psd_unnormalized(m: CMatrix, sig: DimSignature) -> Self {
        let tr = m.trace().re;
        Self { matrix: linalg::hermitize(&(m / real(tr))), sig }
    }

    /// Trusted constructor for matrices produced by trace-preserving maps.
    pub(crate) fn from_trusted(m: CMatrix, sig: DimSignature) -> Self {
        Self { matrix: linalg::hermitize(&m), sig }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: linalg::identity(d) * real(1.0 / d as f64),
            sig: DimSignature::single(d),
        }
    }

    /// `|k⟩⟨k|` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Self {
        Self { matrix: linalg::outer(&linalg::basis(d, k)), sig: DimSignature::single(d) }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            probs.len(),
            probs.iter().map(|&p| real(p)),
        ));
        Self::single(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn sig(&self) -> &DimSignature {
        &self.sig
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigh(&self) -> Eigh {
        linalg::eigh_unchecked(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    /// Number of eigenvalues above [`tol::RANK`].
    pub fn rank(&self) -> usize {
        self.eigenvalues().iter().filter(|&&x| x > tol::RANK).count()
    }

    /// Reduced state on `keep`.
    pub fn reduce(&self, keep: &[usize]) -> Result<Self> {
        let m = linalg::partial_trace(&self.matrix, &self.sig, keep)?;
        Ok(Self { matrix: linalg::hermitize(&m), sig: self.sig.restrict(keep)? })
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &DensityOperator) -> Self {
        Self {
            matrix: linalg::kron(&self.matrix, &other.matrix),
            sig: self.sig.join(&other.sig),
        }
    }

    /// Same operator under a different factorisation of the same dimension.
    pub fn with_sig(mut self, sig: DimSignature) -> Result<Self> {
        sig.check(self.dim())?;
        self.sig = sig;
        Ok(self)
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &CMatrix) -> Self {
        Self::from_trusted(u * &self.matrix * u.adjoint(), self.sig.clone())
    }

    /// Convex combination `Σ p_i ρ_i`.
    pub fn mix(probs: &[f64], states: &[DensityOperator]) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        if probs.len() != states.len() {
            return Err(Error::DimensionMismatch { expected: states.len(), found: probs.len() });
        }
        let mut acc = CMatrix::zeros(first.dim(), first.dim());
        for (p, s) in probs.iter().zip(states) {
            if s.sig != first.sig {
                return Err(Error::InvalidSignature("mixture members differ in signature".into()));
            }
            acc += s.matrix() * real(*p);
        }
        Ok(Self::from_trusted(acc, first.sig.clone()))
    }
}

/// Unit vector with a subsystem signature.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    vector: CVector,
    sig: DimSignature,
}

impl PureState {
    pub fn new(vector: CVector, sig: DimSignature) -> Result<Self> {
        sig.check(vector.len())?;
        let norm = vector.norm();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::InvalidParameter(format!("state vector has norm {norm}")));
        }
        Ok(Self { vector, sig })
    }

    /// Rescales a non-zero vector to unit norm.
    pub fn normalized(vector: CVector, sig: DimSignature) -> Result<Self> {
        let norm = vector.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter("cannot normalise a zero vector".into()));
        }
        Self::new(vector / real(norm), sig)
    }

    pub fn basis(d: usize, k: usize) -> Self {
        Self { vector: linalg::basis(d, k), sig: DimSignature::single(d) }
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn sig(&self) -> &DimSignature {
        &self.sig
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DensityOperator {
        DensityOperator { matrix: linalg::outer(&self.vector), sig: self.sig.clone() }
    }

    pub fn tensor(&self, other: &PureState) -> Self {
        Self {
            vector: linalg::kron_vec(&self.vector, &other.vector),
            sig: self.sig.join(&other.sig),
        }
    }

    /// Reduced state on `keep`.
    pub fn reduce(&self, keep: &[usize]) -> Result<DensityOperator> {
        self.density().reduce(keep)
    }
}

/// Probability vector with equally-shaped member states.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    probs: Vec<f64>,
    states: Vec<DensityOperator>,
}

impl Ensemble {
    pub fn new(probs: Vec<f64>, states: Vec<DensityOperator>) -> Result<Self> {
        validate_probs(&probs, states.len())?;
        let sig = states[0].sig();
        if states.iter().any(|s| s.sig() != sig) {
            return Err(Error::InvalidSignature("ensemble members differ in signature".into()));
        }
        Ok(Self { probs, states })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn sig(&self) -> &DimSignature {
        self.states[0].sig()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// `Σ p_i ρ_i`.
    pub fn average(&self) -> DensityOperator {
        DensityOperator::mix(&self.probs, &self.states).expect("validated ensemble")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &DensityOperator)> {
        self.probs.iter().copied().zip(&self.states)
    }
}

/// Ensemble of pure states `{q_j, |ψ_j⟩}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureEnsemble {
    probs: Vec<f64>,
    states: Vec<PureState>,
}

impl PureEnsemble {
    pub fn new(probs: Vec<f64>, states: Vec<PureState>) -> Result<Self> {
        validate_probs(&probs, states.len())?;
        let sig = states[0].sig();
        if states.iter().any(|s| s.sig() != sig) {
            return Err(Error::InvalidSignature("ensemble members differ in signature".into()));
        }
        Ok(Self { probs, states })
    }

    /// Extracts vectors from an ensemble whose members are all rank one.
    pub fn from_ensemble(ens: &Ensemble) -> Result<Self> {
        let mut states = Vec::with_capacity(ens.len());
        for rho in ens.states() {
            let eig = rho.eigh();
            let second = if eig.values.len() > 1 { eig.values[eig.values.len() - 2] } else { 0.0 };
            if second > tol::RANK || (eig.max() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "ensemble member is not pure (largest eigenvalue {}, next {second:e})",
                    eig.max()
                )));
            }
            let v = eig.vectors.column(eig.values.len() - 1).into_owned();
            states.push(PureState::normalized(v, rho.sig().clone())?);
        }
        Self::new(ens.probs().to_vec(), states)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn to_ensemble(&self) -> Ensemble {
        Ensemble {
            probs: self.probs.clone(),
            states: self.states.iter().map(PureState::density).collect(),
        }
    }

    pub fn average(&self) -> DensityOperator {
        self.to_ensemble().average()
    }

    /// Pairwise tensor products, `{p_a q_b, |ψ_a⟩|φ_b⟩}`.
    pub fn tensor(&self, other: &PureEnsemble) -> PureEnsemble {
        let mut probs = Vec::with_capacity(self.len() * other.len());
        let mut states = Vec::with_capacity(self.len() * other.len());
        for (p, a) in self.probs.iter().zip(&self.states) {
            for (q, b) in other.probs.iter().zip(&other.states) {
                probs.push(p * q);
                states.push(a.tensor(b));
            }
        }
        PureEnsemble { probs, states }
    }
}

fn validate_probs(probs: &[f64], members: usize) -> Result<()> {
    if members == 0 {
        return Err(Error::InvalidParameter("ensemble has no members".into()));
    }
    if probs.len() != members {
        return Err(Error::DimensionMismatch { expected: members, found: probs.len() });
    }
    if let Some(p) = probs.iter().find(|p| p.is_nan() || **p < 0.0) {
        return Err(Error::InvalidParameter(format!("negative probability {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol::PROBABILITY_SUM {
        return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// Reproducible source of random draws identified by `(seed, stream)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Matrix of independent standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Hilbert–Schmidt-type sample `GG†/Tr(GG†)` with `G` of shape `dim × rank`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<DensityOperator> {
    if rank == 0 || rank > dim {
        return Err(Error::InvalidParameter(format!("rank {rank} outside 1..={dim}")));
    }
    let g = ginibre(dim, rank, rng);
    Ok(DensityOperator::from_psd_unnormalized(&g * g.adjoint(), DimSignature::single(dim)))
}

/// Random state on a multipartite signature with the given rank.
pub fn random_density_sig<R: Rng + ?Sized>(
    sig: &DimSignature,
    rank: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    random_density(sig.total(), rank, rng)?.with_sig(sig.clone())
}

/// Random state whose rank is drawn uniformly from `1..=dim`.
pub fn random_density_any_rank<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let rank = rng.random_range(1..=dim);
    random_density(dim, rank, rng).expect("rank in range")
}

pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    let g = ginibre(dim, 1, rng);
    PureState::normalized(g.column(0).into_owned(), DimSignature::single(dim))
        .expect("Gaussian vector is non-zero")
}

/// Point on the probability simplex from normalised exponentials of Gaussians.
pub fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `k` random states of dimension `dim`, each with a uniformly drawn rank.
pub fn random_ensemble<R: Rng + ?Sized>(dim: usize, k: usize, rng: &mut R) -> Result<Ensemble> {
    if dim == 0 || k == 0 {
        return Err(Error::InvalidParameter("ensemble needs dim >= 1 and k >= 1".into()));
    }
    let probs = random_simplex(k, rng);
    let states = (0..k).map(|_| random_density_any_rank(dim, rng)).collect();
    Ensemble::new(probs, states)
}

/// Haar-random `rows × cols` isometry (`rows >= cols`).
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    // Fix the phase ambiguity of QR so the distribution is Haar.
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / real(d.norm()) } else { linalg::ONE };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `|Ψ⟩ = Σ_k √λ_k |v_k⟩|k⟩` on `[d, d]`.
pub fn purify(rho: &DensityOperator) -> Result<PureState> {
    if rho.sig().len() != 1 {
        return Err(Error::InvalidSignature("purify expects a single-system state".into()));
    }
    let eig = rho.eigh();
    Ok(purify_from_eigh(&eig))
}

pub(crate) fn purify_from_eigh(eig: &Eigh) -> PureState {
    let d = eig.values.len();
    let mut psi = CVector::zeros(d * d);
    for (k, &lam) in eig.values.iter().enumerate() {
        let w = lam.max(0.0).sqrt();
        if w == 0.0 {
            continue;
        }
        for i in 0..d {
            psi[i * d + k] += eig.vectors[(i, k)] * w;
        }
    }
    let norm = psi.norm();
    PureState { vector: psi / real(norm), sig: DimSignature::new(vec![d, d]).expect("d >= 1") }
}

/// `Σ_j √q_j |ψ_j⟩|j⟩|j⟩` on `[d, k, k]`.
pub fn flag_purify(decomp: &Ensemble) -> Result<PureState> {
    Ok(flag_purify_pure(&PureEnsemble::from_ensemble(decomp)?))
}

pub fn flag_purify_pure(decomp: &PureEnsemble) -> PureState {
    let d = decomp.dim();
    let k = decomp.len();
    let mut psi = CVector::zeros(d * k * k);
    for (j, (q, state)) in decomp.probs().iter().zip(decomp.states()).enumerate() {
        let w = q.sqrt();
        for i in 0..d {
            psi[i * k * k + j * k + j] = state.vector()[i] * w;
        }
    }
    let norm = psi.norm();
    PureState { vector: psi / real(norm), sig: DimSignature::new(vec![d, k, k]).expect("d, k >= 1") }
}

/// How [`pure_decompositions`] splits a state into pure members.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decomposition {
    /// Eigenvectors weighted by eigenvalues; zero eigenvalues dropped.
    Eigen,
    /// Eigenvectors mixed by a Haar-random isometry into `members` states.
    /// `members` is raised to the rank when smaller.
    Randomized { members: usize },
}

/// Eigenvalues at or below this are dropped from decompositions.
const DECOMPOSITION_CUTOFF: f64 = 1e-14;

/// Pure-state decomposition `ρ = Σ_j q_j |ψ_j⟩⟨ψ_j|`.
pub fn pure_decompositions<R: Rng + ?Sized>(
    rho: &DensityOperator,
    kind: Decomposition,
    rng: &mut R,
) -> Result<PureEnsemble> {
    if rho.sig().len() != 1 {
        return Err(Error::InvalidSignature("decomposition expects a single-system state".into()));
    }
    let eig = rho.eigh();
    let d = rho.dim();
    let support: Vec<usize> =
        (0..d).filter(|&k| eig.values[k] > DECOMPOSITION_CUTOFF).collect();
    let sig = DimSignature::single(d);
    let column = |k: usize| eig.vectors.column(k).into_owned();

    match kind {
        Decomposition::Eigen => {
            let total: f64 = support.iter().map(|&k| eig.values[k]).sum();
            let probs = support.iter().map(|&k| eig.values[k] / total).collect();
            let states = support
                .iter()
                .map(|&k| PureState::normalized(column(k), sig.clone()))
                .collect::<Result<_>>()?;
            PureEnsemble::new(probs, states)
        }
        Decomposition::Randomized { members } => {
            let r = support.len();
            let members = members.max(r);
            // Rows u_j of a Haar isometry satisfy Σ_j u_j u_j† = I, so
            // ψ̃_j = Σ_k U_jk √λ_k |v_k⟩ mixes back to ρ.
            let u = random_isometry(members, r, rng);
            let mut probs = Vec::with_capacity(members);
            let mut states = Vec::with_capacity(members);
            for j in 0..members {
                let mut v = CVector::zeros(d);
                for (slot, &k) in support.iter().enumerate() {
                    v += column(k) * (u[(j, slot)] * eig.values[k].sqrt());
                }
                let q = v.norm_squared();
                if q > DECOMPOSITION_CUTOFF {
                    probs.push(q);
                    states.push(PureState::normalized(v, sig.clone())?);
                }
            }
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|q| *q /= total);
            PureEnsemble::new(probs, states)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, identity, partial_trace};
    use approx::assert_abs_diff_eq;

    fn rng(stream: u64) -> ChaCha8Rng {
        RngStream::new(42, stream).rng()
    }

    #[test]
    fn make_density_accepts_maximally_mixed() {
        let rho = DensityOperator::single(identity(2) * real(0.5)).unwrap();
        assert_eq!(rho.sig().dims(), &[2]);
    }

    #[test]
    fn make_density_rejects_negative_eigenvalue() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![real(1.001), real(-1e-3)]));
        match DensityOperator::single(m) {
            Err(Error::NotPositive { min_eigenvalue }) => {
                assert_abs_diff_eq!(min_eigenvalue, -1e-3, epsilon = 1e-12)
            }
            other => panic!("expected NotPositive, got {other:?}"),
        }
    }

    #[test]
    fn make_density_rejects_wrong_trace_and_asymmetry() {
        assert!(matches!(
            DensityOperator::single(identity(2)),
            Err(Error::WrongTrace { .. })
        ));
        let mut m = identity(2) * real(0.5);
        m[(0, 1)] = real(0.1);
        assert!(matches!(DensityOperator::single(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn make_density_clips_tiny_negatives() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![real(1.0 + 5e-11), real(-5e-11)]));
        let rho = DensityOperator::single(m).unwrap();
        assert!(rho.eigenvalues()[0] >= 0.0);
        assert_abs_diff_eq!(rho.matrix().trace().re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ginibre_states_always_accepted() {
        let mut r = rng(0);
        for i in 0..1000 {
            let dim = 2 + i % 4;
            let g = ginibre(dim, dim, &mut r);
            let p = &g * g.adjoint();
            let t = p.trace();
            DensityOperator::single(p / t).unwrap();
        }
    }

    #[test]
    fn random_density_rank() {
        let mut r = rng(1);
        let pure = random_density(2, 1, &mut r).unwrap();
        assert_eq!(pure.rank(), 1);
        let full = random_density(4, 4, &mut r).unwrap();
        assert_eq!(full.rank(), 4);
        assert_eq!(random_density(3, 2, &mut r).unwrap().rank(), 2);
        assert!(random_density(3, 0, &mut r).is_err());
        assert!(random_density(3, 4, &mut r).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = random_density(3, 2, &mut rng(5)).unwrap();
        let b = random_density(3, 2, &mut rng(5)).unwrap();
        assert_eq!(a, b);
        let c = random_density(3, 2, &mut rng(6)).unwrap();
        assert_ne!(a, c);
        let e1 = random_ensemble(2, 3, &mut rng(7)).unwrap();
        let e2 = random_ensemble(2, 3, &mut rng(7)).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn random_pure_and_ensemble_normalized() {
        let mut r = rng(2);
        assert_abs_diff_eq!(random_pure(2, &mut r).vector().norm(), 1.0, epsilon = 1e-12);
        let ens = random_ensemble(2, 3, &mut r).unwrap();
        assert_abs_diff_eq!(ens.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(ens.probs().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn isometry_is_orthonormal() {
        let u = random_isometry(5, 3, &mut rng(3));
        assert!(frobenius(&(u.adjoint() * &u - identity(3))) < 1e-12);
    }

    fn assert_purifies(rho: &DensityOperator, psi: &PureState) {
        let red = psi.reduce(&[0]).unwrap();
        assert!(frobenius(&(red.matrix() - rho.matrix())) < 1e-10);
    }

    #[test]
    fn purify_pure_state() {
        let rho = DensityOperator::basis(2, 0);
        let psi = purify(&rho).unwrap();
        assert_purifies(&rho, &psi);
        // |0⟩|k⟩ for some k, up to phase.
        let overlap: f64 = (0..2).map(|k| psi.vector()[k].norm_sqr()).sum();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn purify_maximally_mixed_is_maximally_entangled() {
        let rho = DensityOperator::maximally_mixed(2);
        let psi = purify(&rho).unwrap();
        assert_purifies(&rho, &psi);
        let other = psi.reduce(&[1]).unwrap();
        assert!(frobenius(&(other.matrix() - rho.matrix())) < 1e-12);
    }

    #[test]
    fn purify_random_rank_two_qutrit() {
        let rho = random_density(3, 2, &mut rng(4)).unwrap();
        let psi = purify(&rho).unwrap();
        assert_eq!(psi.sig().dims(), &[3, 3]);
        assert_purifies(&rho, &psi);
    }

    #[test]
    fn flag_purify_single_member() {
        let psi_a = random_pure(2, &mut rng(8));
        let ens = PureEnsemble::new(vec![1.0], vec![psi_a.clone()]).unwrap();
        let flagged = flag_purify_pure(&ens);
        let want = psi_a.tensor(&PureState::basis(1, 0)).tensor(&PureState::basis(1, 0));
        assert!((flagged.vector() - want.vector()).norm() < 1e-12);
    }

    #[test]
    fn flag_purify_ghz_type() {
        let ens = Ensemble::new(
            vec![0.5, 0.5],
            vec![DensityOperator::basis(2, 0), DensityOperator::basis(2, 1)],
        )
        .unwrap();
        let psi = flag_purify(&ens).unwrap();
        assert_eq!(psi.sig().dims(), &[2, 2, 2]);
        let s = 0.5f64.sqrt();
        assert_abs_diff_eq!(psi.vector()[0].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(psi.vector()[7].re, s, epsilon = 1e-12);
        let a = psi.reduce(&[0]).unwrap();
        assert!(frobenius(&(a.matrix() - identity(2) * real(0.5))) < 1e-12);
    }

    #[test]
    fn flag_purify_rejects_mixed_member() {
        let ens = Ensemble::new(vec![1.0], vec![DensityOperator::maximally_mixed(2)]).unwrap();
        assert!(flag_purify(&ens).is_err());
    }

    #[test]
    fn flag_purify_random_decomposition() {
        let mut r = rng(9);
        let rho = random_density(2, 2, &mut r).unwrap();
        let decomp = pure_decompositions(&rho, Decomposition::Randomized { members: 3 }, &mut r).unwrap();
        assert_eq!(decomp.len(), 3);
        let psi = flag_purify_pure(&decomp);
        let a = psi.reduce(&[0]).unwrap();
        assert!(frobenius(&(a.matrix() - rho.matrix())) < 1e-10);
        let c = psi.reduce(&[2]).unwrap();
        let diag = DensityOperator::diagonal(decomp.probs()).unwrap();
        assert!(frobenius(&(c.matrix() - diag.matrix())) < 1e-10);
        // B and C carry the same classical flag.
        let sig = psi.sig().clone();
        let bc = partial_trace(&psi.density().into_matrix(), &sig, &[1, 2]).unwrap();
        let k = decomp.len();
        for j in 0..k {
            assert_abs_diff_eq!(bc[(j * k + j, j * k + j)].re, decomp.probs()[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn eigen_decomposition_of_maximally_mixed() {
        let d = pure_decompositions(&DensityOperator::maximally_mixed(2), Decomposition::Eigen, &mut rng(0))
            .unwrap();
        assert_eq!(d.len(), 2);
        for &q in d.probs() {
            assert_abs_diff_eq!(q, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn decomposition_of_pure_state_has_one_member() {
        let rho = random_density(3, 1, &mut rng(10)).unwrap();
        let d = pure_decompositions(&rho, Decomposition::Eigen, &mut rng(0)).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn randomized_decomposition_reconstructs() {
        let mut r = rng(11);
        for _ in 0..20 {
            let rho = random_density_any_rank(3, &mut r);
            let d = pure_decompositions(&rho, Decomposition::Randomized { members: 5 }, &mut r).unwrap();
            assert!(frobenius(&(d.average().into_matrix() - rho.matrix())) < 1e-10);
        }
    }

    #[test]
    fn two_purifications_share_reduced_state() {
        let mut r = rng(12);
        let rho = random_density(3, 3, &mut r).unwrap();
        let p1 = purify(&rho).unwrap();
        let decomp = pure_decompositions(&rho, Decomposition::Randomized { members: 4 }, &mut r).unwrap();
        let p2 = flag_purify_pure(&decomp);
        let a1 = p1.reduce(&[0]).unwrap();
        let a2 = p2.reduce(&[0]).unwrap();
        assert!(frobenius(&(a1.matrix() - a2.matrix())) < 1e-10);
    }
}

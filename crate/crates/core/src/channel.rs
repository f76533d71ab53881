//! CPTP maps.
//!
//! Two representations are provided: [`KrausChannel`] for general maps and
//! [`MeasurePrepareChannel`] for entanglement-breaking maps built as
//! `ρ ↦ Σ_k Tr(M_k ρ) σ_k`. Entanglement breaking is represented by
//! construction only; [`is_ppt`] on the Choi state is a necessary-condition
//! diagnostic, not a detector.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, DimSignature, C64};
use crate::qstate::{self, DensityOperator};

/// Completeness tolerance for `Σ K†K = I` and `Σ M = I`.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Minimum eigenvalue accepted for POVM elements and PPT checks.
pub const PSD_TOL: f64 = 1e-10;

/// Operations shared by every channel representation.
pub trait QuantumChannel {
    fn d_in(&self) -> usize;
    fn d_out(&self) -> usize;

    /// Channel action on a raw `d_in × d_in` matrix.
    fn apply_matrix(&self, rho: &CMatrix) -> CMatrix;

    /// `(Φ ⊗ I_ref)` on an operator over `[d_in, d_ref]`.
    fn apply_extended(&self, m: &CMatrix, d_ref: usize) -> CMatrix;

    fn to_kraus(&self) -> KrausChannel;

    fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.d_in() {
            return Err(Error::DimensionMismatch { expected: self.d_in(), found: rho.dim() });
        }
        Ok(DensityOperator::from_trusted(
            self.apply_matrix(rho.matrix()),
            DimSignature::single(self.d_out()),
        ))
    }

    /// `(Φ ⊗ I)` on a bipartite state whose first factor is the channel input.
    fn apply_left(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let dims = rho.sig().dims();
        if dims.len() != 2 || dims[0] != self.d_in() {
            return Err(Error::InvalidSignature(format!(
                "expected [{}, d_ref], got {dims:?}",
                self.d_in()
            )));
        }
        let d_ref = dims[1];
        Ok(DensityOperator::from_trusted(
            self.apply_extended(rho.matrix(), d_ref),
            DimSignature::new(vec![self.d_out(), d_ref])?,
        ))
    }
}

/// Channel in Kraus form, `ρ ↦ Σ_k K_k ρ K_k†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<CMatrix>,
    d_in: usize,
    d_out: usize,
}

impl KrausChannel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidParameter("channel needs at least one Kraus operator".into()))?;
        let (d_out, d_in) = first.shape();
        for k in &kraus {
            if k.shape() != (d_out, d_in) {
                return Err(Error::InvalidParameter(format!(
                    "Kraus operator of shape {:?}, expected {:?}",
                    k.shape(),
                    (d_out, d_in)
                )));
            }
        }
        let ch = Self { kraus, d_in, d_out };
        let residual = ch.completeness_residual();
        if residual > COMPLETENESS_TOL {
            return Err(Error::InvalidParameter(format!(
                "Kraus operators are not trace preserving: |Σ K†K - I| = {residual:e}"
            )));
        }
        Ok(ch)
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Largest entry of `|Σ K†K − I|`.
    pub fn completeness_residual(&self) -> f64 {
        let mut acc = CMatrix::zeros(self.d_in, self.d_in);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        (acc - linalg::identity(self.d_in)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Heisenberg-picture map `X ↦ Σ_k K_k† X K_k`.
    pub fn adjoint_apply(&self, x: &CMatrix) -> CMatrix {
        let mut acc = CMatrix::zeros(self.d_in, self.d_in);
        for k in &self.kraus {
            acc += k.adjoint() * x * k;
        }
        acc
    }

    /// Superoperator `S = Σ K ⊗ K̄` acting on row-major vectorisations.
    pub fn superoperator(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.d_out * self.d_out, self.d_in * self.d_in);
        for k in &self.kraus {
            s += linalg::kron(k, &k.map(|z| z.conj()));
        }
        s
    }
}

impl QuantumChannel for KrausChannel {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let mut acc = CMatrix::zeros(self.d_out, self.d_out);
        for k in &self.kraus {
            acc += k * rho * k.adjoint();
        }
        acc
    }

    fn apply_extended(&self, m: &CMatrix, d_ref: usize) -> CMatrix {
        let id = linalg::identity(d_ref);
        let n = self.d_out * d_ref;
        let mut acc = CMatrix::zeros(n, n);
        for k in &self.kraus {
            let big = linalg::kron(k, &id);
            acc += &big * m * big.adjoint();
        }
        acc
    }

    fn to_kraus(&self) -> KrausChannel {
        self.clone()
    }
}

/// Entanglement-breaking channel `ρ ↦ Σ_k Tr(M_k ρ) σ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurePrepareChannel {
    povm: Vec<CMatrix>,
    outputs: Vec<DensityOperator>,
    d_in: usize,
    d_out: usize,
}

impl MeasurePrepareChannel {
    pub fn new(povm: Vec<CMatrix>, outputs: Vec<DensityOperator>) -> Result<Self> {
        if povm.is_empty() {
            return Err(Error::InvalidParameter("POVM has no elements".into()));
        }
        if povm.len() != outputs.len() {
            return Err(Error::DimensionMismatch { expected: povm.len(), found: outputs.len() });
        }
        let d_in = povm[0].nrows();
        let d_out = outputs[0].dim();
        let mut total = CMatrix::zeros(d_in, d_in);
        for m in &povm {
            if m.shape() != (d_in, d_in) {
                return Err(Error::DimensionMismatch { expected: d_in, found: m.nrows() });
            }
            let min = linalg::eigh(m)?.min();
            if min < -PSD_TOL {
                return Err(Error::NotPositive { min_eigenvalue: min });
            }
            total += m;
        }
        let residual =
            (total - linalg::identity(d_in)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if residual > COMPLETENESS_TOL {
            return Err(Error::InvalidParameter(format!(
                "POVM elements do not sum to the identity: residual {residual:e}"
            )));
        }
        if let Some(bad) = outputs.iter().find(|s| s.dim() != d_out || s.sig().len() != 1) {
            return Err(Error::DimensionMismatch { expected: d_out, found: bad.dim() });
        }
        Ok(Self { povm, outputs, d_in, d_out })
    }

    pub fn povm(&self) -> &[CMatrix] {
        &self.povm
    }

    pub fn outputs(&self) -> &[DensityOperator] {
        &self.outputs
    }

    /// Kraus operators `√μ_{k,a} √ν_{k,b} |φ_{k,a}⟩⟨m_{k,b}|` from the
    /// spectral decompositions of `σ_k` and `M_k`.
    pub fn mp_to_kraus(&self) -> KrausChannel {
        const CUTOFF: f64 = 1e-15;
        let mut kraus = Vec::new();
        for (m, sigma) in self.povm.iter().zip(&self.outputs) {
            let em = linalg::eigh_unchecked(m);
            let es = sigma.eigh();
            for (a, &mu) in es.values.iter().enumerate() {
                if mu <= CUTOFF {
                    continue;
                }
                let phi = es.vectors.column(a);
                for (b, &nu) in em.values.iter().enumerate() {
                    if nu <= CUTOFF {
                        continue;
                    }
                    let mvec = em.vectors.column(b);
                    kraus.push(phi * mvec.adjoint() * real((mu * nu).sqrt()));
                }
            }
        }
        if kraus.is_empty() {
            kraus.push(CMatrix::zeros(self.d_out, self.d_in));
        }
        KrausChannel { kraus, d_in: self.d_in, d_out: self.d_out }
    }
}

impl QuantumChannel for MeasurePrepareChannel {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let mut acc = CMatrix::zeros(self.d_out, self.d_out);
        for (m, sigma) in self.povm.iter().zip(&self.outputs) {
            let p = (m * rho).trace();
            acc += sigma.matrix() * p;
        }
        acc
    }

    /// `Σ_k σ_k ⊗ Tr_in[(M_k ⊗ I) m]`, the explicitly separable output.
    fn apply_extended(&self, m: &CMatrix, d_ref: usize) -> CMatrix {
        let sig = DimSignature::new(vec![self.d_in, d_ref]).expect("positive dims");
        let id = linalg::identity(d_ref);
        let n = self.d_out * d_ref;
        let mut acc = CMatrix::zeros(n, n);
        for (povm, sigma) in self.povm.iter().zip(&self.outputs) {
            let weighted = linalg::kron(povm, &id) * m;
            let ref_part = linalg::partial_trace(&weighted, &sig, &[1]).expect("consistent signature");
            acc += linalg::kron(sigma.matrix(), &ref_part);
        }
        acc
    }

    fn to_kraus(&self) -> KrausChannel {
        self.mp_to_kraus()
    }
}

/// Either channel representation.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Kraus(KrausChannel),
    MeasurePrepare(MeasurePrepareChannel),
}

impl Channel {
    fn inner(&self) -> &dyn QuantumChannel {
        match self {
            Channel::Kraus(c) => c,
            Channel::MeasurePrepare(c) => c,
        }
    }
}

impl QuantumChannel for Channel {
    fn d_in(&self) -> usize {
        self.inner().d_in()
    }

    fn d_out(&self) -> usize {
        self.inner().d_out()
    }

    fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        self.inner().apply_matrix(rho)
    }

    fn apply_extended(&self, m: &CMatrix, d_ref: usize) -> CMatrix {
        self.inner().apply_extended(m, d_ref)
    }

    fn to_kraus(&self) -> KrausChannel {
        self.inner().to_kraus()
    }
}

impl From<KrausChannel> for Channel {
    fn from(c: KrausChannel) -> Self {
        Channel::Kraus(c)
    }
}

impl From<MeasurePrepareChannel> for Channel {
    fn from(c: MeasurePrepareChannel) -> Self {
        Channel::MeasurePrepare(c)
    }
}

/// `a ⊗ b`, Kraus set of all pairwise Kronecker products.
pub fn tensor_channels(a: &KrausChannel, b: &KrausChannel) -> KrausChannel {
    let mut kraus = Vec::with_capacity(a.kraus.len() * b.kraus.len());
    for ka in &a.kraus {
        for kb in &b.kraus {
            kraus.push(linalg::kron(ka, kb));
        }
    }
    KrausChannel { kraus, d_in: a.d_in * b.d_in, d_out: a.d_out * b.d_out }
}

/// `I_d ⊗ ch`.
pub fn extend_left(ch: &KrausChannel, d: usize) -> KrausChannel {
    tensor_channels(&identity(d), ch)
}

/// `ch ⊗ I_d`.
pub fn extend_right(ch: &KrausChannel, d: usize) -> KrausChannel {
    tensor_channels(ch, &identity(d))
}

/// Choi state `(Φ ⊗ I)|Φ⁺⟩⟨Φ⁺|` with `|Φ⁺⟩ = Σ_k |k⟩|k⟩/√d`, on `[d_out, d_in]`.
pub fn choi<C: QuantumChannel + ?Sized>(ch: &C) -> DensityOperator {
    let d = ch.d_in();
    let mut phi = linalg::CVector::zeros(d * d);
    for k in 0..d {
        phi[k * d + k] = real(1.0 / (d as f64).sqrt());
    }
    let out = ch.apply_extended(&linalg::outer(&phi), d);
    DensityOperator::from_trusted(out, DimSignature::new(vec![ch.d_out(), d]).expect("positive dims"))
}

/// Positive-partial-transpose test on a bipartite state.
pub fn is_ppt(rho: &DensityOperator) -> Result<bool> {
    if rho.sig().len() != 2 {
        return Err(Error::InvalidSignature("PPT test needs a bipartite state".into()));
    }
    let pt = linalg::partial_transpose(rho.matrix(), rho.sig(), &[1])?;
    Ok(linalg::eigvalsh(&pt)[0] >= -PSD_TOL)
}

pub fn identity(d: usize) -> KrausChannel {
    KrausChannel { kraus: vec![linalg::identity(d)], d_in: d, d_out: d }
}

/// Weyl operator `X^a Z^b` with `X|j⟩ = |j+1⟩`, `Z|j⟩ = ω^j |j⟩`.
pub fn weyl(d: usize, a: usize, b: usize) -> CMatrix {
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    let mut w = CMatrix::zeros(d, d);
    for j in 0..d {
        w[((j + a) % d, j)] = C64::from_polar(1.0, omega * ((b * j) % d) as f64);
    }
    w
}

/// `ρ ↦ (1 − p) ρ + p I/d`, as a Weyl-unitary mixture.
pub fn depolarizing(d: usize, p: f64) -> Result<KrausChannel> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("depolarizing parameter {p} outside [0, 1]")));
    }
    let d2 = (d * d) as f64;
    let mut kraus = vec![linalg::identity(d) * real((1.0 - p + p / d2).sqrt())];
    if p > 0.0 {
        let w = real((p / d2).sqrt());
        for a in 0..d {
            for b in 0..d {
                if (a, b) != (0, 0) {
                    kraus.push(weyl(d, a, b) * w);
                }
            }
        }
    }
    Ok(KrausChannel { kraus, d_in: d, d_out: d })
}

/// Complete dephasing in the computational basis.
pub fn dephasing(d: usize) -> KrausChannel {
    let kraus = (0..d).map(|k| linalg::outer(&linalg::basis(d, k))).collect();
    KrausChannel { kraus, d_in: d, d_out: d }
}

fn computational_povm(d: usize) -> Vec<CMatrix> {
    (0..d).map(|k| linalg::outer(&linalg::basis(d, k))).collect()
}

/// Classical-quantum channel: measure in the computational basis, prepare `states[k]`.
pub fn cq_channel(states: Vec<DensityOperator>) -> Result<MeasurePrepareChannel> {
    MeasurePrepareChannel::new(computational_povm(states.len()), states)
}

/// Quantum-classical channel: measure `povm`, record the outcome as `|k⟩`.
pub fn qc_channel(povm: Vec<CMatrix>) -> Result<MeasurePrepareChannel> {
    let k = povm.len();
    let outputs = (0..k).map(|j| DensityOperator::basis(k, j)).collect();
    MeasurePrepareChannel::new(povm, outputs)
}

/// Replacement channel `ρ ↦ σ` on inputs of dimension `d_in`.
pub fn constant(d_in: usize, sigma: DensityOperator) -> Result<MeasurePrepareChannel> {
    MeasurePrepareChannel::new(vec![linalg::identity(d_in)], vec![sigma])
}

/// Haar-random Stinespring isometry sliced into `kraus_count` blocks.
pub fn random_channel<R: Rng + ?Sized>(
    d_in: usize,
    d_out: usize,
    kraus_count: usize,
    rng: &mut R,
) -> Result<KrausChannel> {
    if d_in == 0 || d_out == 0 || kraus_count == 0 {
        return Err(Error::InvalidParameter("dimensions and Kraus count must be positive".into()));
    }
    if d_out * kraus_count < d_in {
        return Err(Error::InvalidParameter(format!(
            "{kraus_count} Kraus operators of shape {d_out}x{d_in} cannot be trace preserving"
        )));
    }
    let v = qstate::random_isometry(d_out * kraus_count, d_in, rng);
    let kraus = (0..kraus_count).map(|k| v.rows(k * d_out, d_out).into_owned()).collect();
    Ok(KrausChannel { kraus, d_in, d_out })
}

/// Random measure-and-prepare channel with `k` outcomes.
///
/// POVM elements are `B^{-1/2} A_k B^{-1/2}` for Ginibre-sampled PSD `A_k`
/// and `B = Σ A_k`; prepared states are random with uniformly drawn rank.
pub fn random_mp_channel<R: Rng + ?Sized>(
    d_in: usize,
    d_out: usize,
    k: usize,
    rng: &mut R,
) -> Result<MeasurePrepareChannel> {
    if d_in == 0 || d_out == 0 || k == 0 {
        return Err(Error::InvalidParameter("dimensions and outcome count must be positive".into()));
    }
    let parts: Vec<CMatrix> = (0..k)
        .map(|_| {
            let g = qstate::ginibre(d_in, d_in, rng);
            &g * g.adjoint()
        })
        .collect();
    let mut b = CMatrix::zeros(d_in, d_in);
    for a in &parts {
        b += a;
    }
    let b_inv_sqrt = linalg::eigh_unchecked(&b).map(|x| 1.0 / x.sqrt());
    let mut povm: Vec<CMatrix> =
        parts.iter().map(|a| linalg::hermitize(&(&b_inv_sqrt * a * &b_inv_sqrt))).collect();
    // Absorb the rounding residual into the last element.
    let mut total = CMatrix::zeros(d_in, d_in);
    for m in &povm[..k - 1] {
        total += m;
    }
    povm[k - 1] = linalg::hermitize(&(linalg::identity(d_in) - total));
    let outputs = (0..k).map(|_| qstate::random_density_any_rank(d_out, rng)).collect();
    MeasurePrepareChannel::new(povm, outputs)
}

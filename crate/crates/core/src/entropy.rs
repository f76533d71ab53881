//! Entropy functionals, in bits.

use serde::{Deserialize, Serialize};

use crate::channel::QuantumChannel;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qstate::{self, DensityOperator, PureState};

/// Eigenvalues at or below this contribute nothing (`0 log 0 = 0`).
pub const ZERO_EIGENVALUE: f64 = 1e-12;
/// Kernel mass of `ρ` outside `supp σ` above which `S(ρ‖σ) = +∞`.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Entropy in bits; relative entropies may be `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    #[serde(with = "crate::json::ext_real")]
    pub value: f64,
    pub finite: bool,
}

impl EntropyValue {
    pub fn finite(value: f64) -> Self {
        Self { value, finite: true }
    }

    pub fn infinite() -> Self {
        Self { value: f64::INFINITY, finite: false }
    }

    pub fn is_finite(&self) -> bool {
        self.finite
    }
}

/// Shannon entropy of a spectrum, ignoring eigenvalues below [`ZERO_EIGENVALUE`].
pub fn spectrum_entropy(values: &[f64]) -> f64 {
    spectrum_entropy_with(values, ZERO_EIGENVALUE)
}

pub fn spectrum_entropy_with(values: &[f64], cutoff: f64) -> f64 {
    values.iter().filter(|&&x| x > cutoff).map(|&x| -x * x.log2()).sum::<f64>().max(0.0)
}

/// `S(ρ) = −Tr ρ log₂ ρ`.
pub fn von_neumann(rho: &DensityOperator) -> f64 {
    spectrum_entropy(&rho.eigenvalues())
}

/// [`von_neumann`] with an explicit zero-eigenvalue cutoff.
pub fn von_neumann_with_cutoff(rho: &DensityOperator, cutoff: f64) -> f64 {
    spectrum_entropy_with(&rho.eigenvalues(), cutoff)
}

/// Entropy of a Hermitian matrix treated as a state (no validation).
pub fn matrix_entropy(m: &CMatrix) -> f64 {
    spectrum_entropy(&linalg::eigvalsh(m))
}

/// `S(ρ‖σ) = Tr ρ (log₂ ρ − log₂ σ)`, evaluated in σ's eigenbasis.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<EntropyValue> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    Ok(relative_entropy_matrix(rho.matrix(), sigma.matrix(), ZERO_EIGENVALUE))
}

/// [`relative_entropy`] with an explicit zero-eigenvalue cutoff.
pub fn relative_entropy_with_cutoff(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    cutoff: f64,
) -> Result<EntropyValue> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    Ok(relative_entropy_matrix(rho.matrix(), sigma.matrix(), cutoff))
}

pub(crate) fn relative_entropy_matrix(rho: &CMatrix, sigma: &CMatrix, cutoff: f64) -> EntropyValue {
    let er = linalg::eigh_unchecked(rho);
    let es = linalg::eigh_unchecked(sigma);
    // overlap[(j, k)] = |⟨u_j|v_k⟩|²
    let overlap = (er.vectors.adjoint() * &es.vectors).map(|z| z.norm_sqr());

    let kernel_mass: f64 = (0..es.values.len())
        .filter(|&k| es.values[k] <= cutoff)
        .map(|k| {
            (0..er.values.len())
                .filter(|&j| er.values[j] > 0.0)
                .map(|j| er.values[j] * overlap[(j, k)])
                .sum::<f64>()
        })
        .sum();
    if kernel_mass > SUPPORT_TOL {
        return EntropyValue::infinite();
    }

    let mut value = 0.0;
    for (j, &lam) in er.values.iter().enumerate() {
        if lam <= cutoff {
            continue;
        }
        let log_lam = lam.log2();
        for (k, &mu) in es.values.iter().enumerate() {
            if mu <= cutoff {
                continue;
            }
            value += overlap[(j, k)] * lam * (log_lam - mu.log2());
        }
    }
    EntropyValue::finite(value)
}

/// `S(ρ_AB) − S(ρ_B)` for a bipartite state.
pub fn conditional_entropy(rho_ab: &DensityOperator) -> Result<f64> {
    if rho_ab.sig().len() != 2 {
        return Err(Error::InvalidSignature(format!(
            "conditional entropy needs a bipartite state, got {:?}",
            rho_ab.sig().dims()
        )));
    }
    Ok(von_neumann(rho_ab) - von_neumann(&rho_ab.reduce(&[1])?))
}

/// `S(ρ) + S(Φ(ρ)) − S((Φ ⊗ I)|Ψ⟩⟨Ψ|)` with `|Ψ⟩` the canonical purification.
pub fn channel_mutual_information<C: QuantumChannel + ?Sized>(
    rho: &DensityOperator,
    ch: &C,
) -> Result<f64> {
    let psi = qstate::purify(rho)?;
    channel_mutual_information_with(rho, &psi, ch)
}

/// Mutual information using a caller-supplied purification of `rho`.
///
/// The purification may carry any reference signature; all reference
/// factors are treated as one system.
pub fn channel_mutual_information_with<C: QuantumChannel + ?Sized>(
    rho: &DensityOperator,
    purification: &PureState,
    ch: &C,
) -> Result<f64> {
    if rho.dim() != ch.d_in() {
        return Err(Error::DimensionMismatch { expected: ch.d_in(), found: rho.dim() });
    }
    let total = purification.dim();
    if purification.sig().subsystem(0) != rho.dim() || !total.is_multiple_of(rho.dim()) {
        return Err(Error::InvalidSignature(format!(
            "purification signature {:?} does not start with the input dimension {}",
            purification.sig().dims(),
            rho.dim()
        )));
    }
    let d_ref = total / rho.dim();
    let global = ch.apply_extended(&linalg::outer(purification.vector()), d_ref);
    let output = ch.apply_matrix(rho.matrix());
    Ok(von_neumann(rho) + matrix_entropy(&output) - matrix_entropy(&global))
}

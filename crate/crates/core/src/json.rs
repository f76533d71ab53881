//! JSON documents for states, ensembles and channels.
//!
//! Matrices are stored row-major with real and imaginary parts interleaved:
//! `[re(0,0), im(0,0), re(0,1), im(0,1), ...]`. Vectors use the same
//! interleaving. Every document carries a tag (`"type"` for states,
//! `"kind"` for channels) and the subsystem dimensions.
//!
//! ```json
//! {"type": "density", "dims": [2], "entries": [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0]}
//! {"type": "pure", "dims": [2], "entries": [1.0, 0.0, 0.0, 0.0]}
//! {"type": "ensemble", "dims": [2], "probs": [0.5, 0.5], "states": [[...], [...]]}
//! {"kind": "kraus", "d_in": 2, "d_out": 2, "kraus": [[...], ...]}
//! {"kind": "measure_prepare", "d_in": 2, "d_out": 2, "povm": [[...]], "outputs": [[...]]}
//! ```
//!
//! Non-finite reals (infinite relative entropies, slacks) are written as the
//! strings `"inf"`, `"-inf"` and `"nan"`.

use std::fs;
use std::path::Path;

use serde::de::{self, DeserializeOwned, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, KrausChannel, MeasurePrepareChannel, QuantumChannel};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, DimSignature, C64};
use crate::qstate::{DensityOperator, Ensemble, PureEnsemble, PureState};

/// Serde adapter for reals that may be infinite.
pub mod ext_real {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

/// `Vec<f64>` variant of [`ext_real`].
pub mod ext_real_vec {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "ext_real")] f64);

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|&x| Wrapped(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrapped>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

pub fn matrix_entries(m: &CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

pub fn vector_entries(v: &CVector) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn complex_entries(entries: &[f64], expected: usize) -> Result<Vec<C64>> {
    if entries.len() != 2 * expected {
        return Err(Error::Malformed(format!(
            "expected {} interleaved reals, found {}",
            2 * expected,
            entries.len()
        )));
    }
    Ok(entries.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
}

pub fn matrix_from_entries(entries: &[f64], rows: usize, cols: usize) -> Result<CMatrix> {
    Ok(CMatrix::from_row_slice(rows, cols, &complex_entries(entries, rows * cols)?))
}

pub fn vector_from_entries(entries: &[f64], len: usize) -> Result<CVector> {
    Ok(CVector::from_vec(complex_entries(entries, len)?))
}

/// Tagged state document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StateDoc {
    Density { dims: Vec<usize>, entries: Vec<f64> },
    Pure { dims: Vec<usize>, entries: Vec<f64> },
    Ensemble { dims: Vec<usize>, probs: Vec<f64>, states: Vec<Vec<f64>> },
}

/// Tagged channel document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelDoc {
    Kraus { d_in: usize, d_out: usize, kraus: Vec<Vec<f64>> },
    MeasurePrepare { d_in: usize, d_out: usize, povm: Vec<Vec<f64>>, outputs: Vec<Vec<f64>> },
}

impl From<&DensityOperator> for StateDoc {
    fn from(rho: &DensityOperator) -> Self {
        StateDoc::Density { dims: rho.sig().dims().to_vec(), entries: matrix_entries(rho.matrix()) }
    }
}

impl From<&PureState> for StateDoc {
    fn from(psi: &PureState) -> Self {
        StateDoc::Pure { dims: psi.sig().dims().to_vec(), entries: vector_entries(psi.vector()) }
    }
}

impl From<&Ensemble> for StateDoc {
    fn from(ens: &Ensemble) -> Self {
        StateDoc::Ensemble {
            dims: ens.sig().dims().to_vec(),
            probs: ens.probs().to_vec(),
            states: ens.states().iter().map(|s| matrix_entries(s.matrix())).collect(),
        }
    }
}

impl From<&PureEnsemble> for StateDoc {
    fn from(ens: &PureEnsemble) -> Self {
        StateDoc::from(&ens.to_ensemble())
    }
}

impl StateDoc {
    pub fn to_density(&self) -> Result<DensityOperator> {
        match self {
            StateDoc::Density { dims, entries } => density_from(dims, entries),
            StateDoc::Pure { .. } => Ok(self.to_pure()?.density()),
            StateDoc::Ensemble { .. } => Ok(self.to_ensemble()?.average()),
        }
    }

    pub fn to_pure(&self) -> Result<PureState> {
        match self {
            StateDoc::Pure { dims, entries } => {
                let sig = DimSignature::new(dims.clone())?;
                PureState::new(vector_from_entries(entries, sig.total())?, sig)
            }
            _ => Err(Error::Malformed("expected a pure-state document".into())),
        }
    }

    pub fn to_ensemble(&self) -> Result<Ensemble> {
        match self {
            StateDoc::Ensemble { dims, probs, states } => {
                let states = states.iter().map(|e| density_from(dims, e)).collect::<Result<_>>()?;
                Ensemble::new(probs.clone(), states)
            }
            _ => Err(Error::Malformed("expected an ensemble document".into())),
        }
    }
}

fn density_from(dims: &[usize], entries: &[f64]) -> Result<DensityOperator> {
    let sig = DimSignature::new(dims.to_vec())?;
    let n = sig.total();
    DensityOperator::new(matrix_from_entries(entries, n, n)?, sig)
}

impl From<&KrausChannel> for ChannelDoc {
    fn from(ch: &KrausChannel) -> Self {
        ChannelDoc::Kraus {
            d_in: ch.d_in(),
            d_out: ch.d_out(),
            kraus: ch.kraus().iter().map(matrix_entries).collect(),
        }
    }
}

impl From<&MeasurePrepareChannel> for ChannelDoc {
    fn from(ch: &MeasurePrepareChannel) -> Self {
        ChannelDoc::MeasurePrepare {
            d_in: ch.d_in(),
            d_out: ch.d_out(),
            povm: ch.povm().iter().map(matrix_entries).collect(),
            outputs: ch.outputs().iter().map(|s| matrix_entries(s.matrix())).collect(),
        }
    }
}

impl From<&Channel> for ChannelDoc {
    fn from(ch: &Channel) -> Self {
        match ch {
            Channel::Kraus(c) => c.into(),
            Channel::MeasurePrepare(c) => c.into(),
        }
    }
}

impl ChannelDoc {
    pub fn to_channel(&self) -> Result<Channel> {
        match self {
            ChannelDoc::Kraus { d_in, d_out, kraus } => {
                let ops = kraus
                    .iter()
                    .map(|e| matrix_from_entries(e, *d_out, *d_in))
                    .collect::<Result<_>>()?;
                Ok(KrausChannel::new(ops)?.into())
            }
            ChannelDoc::MeasurePrepare { d_in, d_out, povm, outputs } => {
                let povm = povm
                    .iter()
                    .map(|e| matrix_from_entries(e, *d_in, *d_in))
                    .collect::<Result<_>>()?;
                let outputs = outputs
                    .iter()
                    .map(|e| density_from(&[*d_out], e))
                    .collect::<Result<_>>()?;
                Ok(MeasurePrepareChannel::new(povm, outputs)?.into())
            }
        }
    }
}

macro_rules! serde_via_doc {
    ($ty:ty, $doc:ty, $convert:expr) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                <$doc>::from(self).serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let doc = <$doc>::deserialize(d)?;
                let convert: fn(&$doc) -> Result<$ty> = $convert;
                convert(&doc).map_err(de::Error::custom)
            }
        }
    };
}

serde_via_doc!(DensityOperator, StateDoc, StateDoc::to_density);
serde_via_doc!(PureState, StateDoc, StateDoc::to_pure);
serde_via_doc!(Ensemble, StateDoc, StateDoc::to_ensemble);
serde_via_doc!(PureEnsemble, StateDoc, |doc| PureEnsemble::from_ensemble(&doc.to_ensemble()?));
serde_via_doc!(Channel, ChannelDoc, ChannelDoc::to_channel);
serde_via_doc!(KrausChannel, ChannelDoc, |doc| Ok(doc.to_channel()?.to_kraus()));
serde_via_doc!(MeasurePrepareChannel, ChannelDoc, |doc| match doc.to_channel()? {
    Channel::MeasurePrepare(c) => Ok(c),
    Channel::Kraus(_) => Err(Error::Malformed("expected a measure_prepare channel".into())),
});

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `value` to `path`, creating parent directories.
pub fn write_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, to_pretty(value)?)?;
    Ok(())
}

pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{dephasing, random_mp_channel};
    use crate::qstate::{random_density, random_ensemble, random_pure, RngStream};
    use proptest::prelude::*;

    #[test]
    fn density_document_layout() {
        let rho = DensityOperator::maximally_mixed(2);
        let v = serde_json::to_value(&rho).unwrap();
        assert_eq!(v["type"], "density");
        assert_eq!(v["dims"], serde_json::json!([2]));
        assert_eq!(v["entries"], serde_json::json!([0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0]));
    }

    #[test]
    fn channel_document_layout() {
        let v = serde_json::to_value(Channel::from(dephasing(2))).unwrap();
        assert_eq!(v["kind"], "kraus");
        assert_eq!(v["kraus"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn malformed_documents_rejected() {
        let bad = r#"{"type": "density", "dims": [2], "entries": [1.0, 0.0]}"#;
        assert!(serde_json::from_str::<DensityOperator>(bad).is_err());
        let not_psd = r#"{"type": "density", "dims": [2], "entries": [1.5,0,0,0,0,0,-0.5,0]}"#;
        assert!(serde_json::from_str::<DensityOperator>(not_psd).is_err());
        let bad_channel = r#"{"kind": "kraus", "d_in": 2, "d_out": 2, "kraus": [[0.5,0,0,0,0,0,0.5,0]]}"#;
        assert!(serde_json::from_str::<Channel>(bad_channel).is_err());
    }

    #[test]
    fn infinite_values_round_trip() {
        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "ext_real")] f64);
        let s = serde_json::to_string(&W(f64::INFINITY)).unwrap();
        assert_eq!(s, "\"inf\"");
        assert_eq!(serde_json::from_str::<W>(&s).unwrap().0, f64::INFINITY);
        assert_eq!(serde_json::from_str::<W>("-1.5").unwrap().0, -1.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn states_round_trip_exactly(seed in any::<u64>(), d in 1usize..5, k in 1usize..4) {
            let mut r = RngStream::new(seed, 0).rng();
            let rho = random_density(d, d, &mut r).unwrap();
            let back: DensityOperator = serde_json::from_str(&serde_json::to_string(&rho).unwrap()).unwrap();
            prop_assert!(crate::linalg::frobenius(&(back.matrix() - rho.matrix())) < 1e-15);
            let psi = random_pure(d, &mut r);
            let back: PureState = serde_json::from_str(&serde_json::to_string(&psi).unwrap()).unwrap();
            prop_assert_eq!(back, psi);
            let ens = random_ensemble(d, k, &mut r).unwrap();
            let back: Ensemble = serde_json::from_str(&serde_json::to_string(&ens).unwrap()).unwrap();
            prop_assert_eq!(back.probs(), ens.probs());
        }

        #[test]
        fn channels_round_trip(seed in any::<u64>(), d in 2usize..4, k in 1usize..4) {
            let mut r = RngStream::new(seed, 1).rng();
            let ch = Channel::from(random_mp_channel(d, d, k, &mut r).unwrap());
            let back: Channel = serde_json::from_str(&serde_json::to_string(&ch).unwrap()).unwrap();
            let rho = random_density(d, d, &mut r).unwrap();
            let diff = back.apply_matrix(rho.matrix()) - ch.apply_matrix(rho.matrix());
            prop_assert!(crate::linalg::frobenius(&diff) < 1e-12);
        }
    }
}

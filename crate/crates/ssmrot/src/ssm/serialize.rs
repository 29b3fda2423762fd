//! SSM model serialization: JSON with complex numbers as [re, im] pairs and
//! multi-indices as integer arrays. Coefficient maps serialize in
//! lexicographic multi-index order, so load → re-serialize is byte-stable.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, CVector};
use crate::spectral::{EigenPair, MasterSubspace};
use crate::ssm::{MultiIndex, NonAutonomous, PolynomialMap, SSMModel, SsmOptions};

type CPair = [f64; 2];

fn to_pairs(v: &CVector) -> Vec<CPair> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(p: &[CPair]) -> CVector {
    DVector::from_iterator(p.len(), p.iter().map(|c| C64::new(c[0], c[1])))
}

#[derive(Serialize, Deserialize)]
struct CoeffEntry {
    index: Vec<u8>,
    value: Vec<CPair>,
}

#[derive(Serialize, Deserialize)]
struct MapDoc {
    dim_in: usize,
    vector_len: usize,
    coeffs: Vec<CoeffEntry>,
}

#[derive(Serialize, Deserialize)]
struct PairDoc {
    lambda: CPair,
    v: Vec<CPair>,
    w: Vec<CPair>,
}

#[derive(Serialize, Deserialize)]
struct MasterDoc {
    pairs: Vec<PairDoc>,
    eta: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct NonAutoDoc {
    omega: f64,
    x0_plus: Vec<CPair>,
    x0_minus: Vec<CPair>,
    s0_plus: Vec<CPair>,
    s0_minus: Vec<CPair>,
    resonant_pairs: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SsmDoc {
    format: String,
    style: String,
    order: u32,
    eps: f64,
    options: SsmOptions,
    model_hash: String,
    master: MasterDoc,
    w: MapDoc,
    r: MapDoc,
    nonauto: Option<NonAutoDoc>,
    probe_calls: u64,
}

fn map_to_doc(m: &PolynomialMap) -> MapDoc {
    MapDoc {
        dim_in: m.dim_in,
        vector_len: m.vector_len,
        coeffs: m
            .coeffs
            .iter()
            .map(|(idx, val)| CoeffEntry {
                index: idx.0.clone(),
                value: to_pairs(val),
            })
            .collect(),
    }
}

fn doc_to_map(d: &MapDoc) -> PolynomialMap {
    let mut m = PolynomialMap::new(d.dim_in, d.vector_len);
    for e in &d.coeffs {
        m.insert(MultiIndex(e.index.clone()), from_pairs(&e.value));
    }
    m
}

/// Serialize to the ssm.json document. `model_hash` identifies the source
/// model (content hash recorded for reproducibility).
pub fn to_json(ssm: &SSMModel, model_hash: &str) -> Result<String> {
    let doc = SsmDoc {
        format: "ssmrot/ssm-v1".into(),
        style: "normal-form".into(),
        order: ssm.order,
        eps: ssm.eps,
        options: ssm.options.clone(),
        model_hash: model_hash.into(),
        master: MasterDoc {
            pairs: ssm
                .master
                .pairs
                .iter()
                .map(|p| PairDoc {
                    lambda: [p.lambda.re, p.lambda.im],
                    v: to_pairs(&p.v),
                    w: to_pairs(&p.w),
                })
                .collect(),
            eta: ssm.master.eta.clone(),
        },
        w: map_to_doc(&ssm.w),
        r: map_to_doc(&ssm.r),
        nonauto: ssm.nonauto.as_ref().map(|na| NonAutoDoc {
            omega: na.omega,
            x0_plus: to_pairs(&na.x0_plus),
            x0_minus: to_pairs(&na.x0_minus),
            s0_plus: to_pairs(&na.s0_plus),
            s0_minus: to_pairs(&na.s0_minus),
            resonant_pairs: na.resonant_pairs.clone(),
        }),
        probe_calls: ssm.probe_calls,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Load an ssm.json document. Returns the model and the recorded hash.
pub fn from_json(text: &str) -> Result<(SSMModel, String)> {
    let doc: SsmDoc = serde_json::from_str(text)?;
    if doc.format != "ssmrot/ssm-v1" {
        return Err(Error::Config(format!("unknown ssm.json format `{}`", doc.format)));
    }
    let master = MasterSubspace {
        pairs: doc
            .master
            .pairs
            .iter()
            .map(|p| EigenPair {
                lambda: C64::new(p.lambda[0], p.lambda[1]),
                v: from_pairs(&p.v),
                w: from_pairs(&p.w),
            })
            .collect(),
        eta: doc.master.eta.clone(),
    };
    let ssm = SSMModel {
        master,
        order: doc.order,
        w: doc_to_map(&doc.w),
        r: doc_to_map(&doc.r),
        nonauto: doc.nonauto.as_ref().map(|na| NonAutonomous {
            omega: na.omega,
            x0_plus: from_pairs(&na.x0_plus),
            x0_minus: from_pairs(&na.x0_minus),
            s0_plus: from_pairs(&na.s0_plus),
            s0_minus: from_pairs(&na.s0_minus),
            resonant_pairs: na.resonant_pairs.clone(),
        }),
        eps: doc.eps,
        options: doc.options,
        probe_calls: doc.probe_calls,
    };
    Ok((ssm, doc.model_hash))
}

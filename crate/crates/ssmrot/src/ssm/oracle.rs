//! Brute-force composition oracle for tensor-backed models.
//!
//! Substitutes the truncated expansion W(p) into the explicit quadratic and
//! cubic tensors of the displacement-space nonlinearity and collects the
//! p^m coefficient by exhaustively enumerating ordered tuples of stored
//! multi-indices. No polarization, no probing: this is the independent
//! route that [`crate::ssm::composition_coefficient`] is checked against.

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::model::tensor::{CubicEntry, QuadEntry};
use crate::ssm::multi_index::MultiIndex;
use crate::ssm::PolynomialMap;

/// Composition coefficient (F∘W)|_m for F(z) = (−g_nl(u), 0) with
/// g_nl(u) = Σ Q_{ijk} u_j u_k + Σ T_{ijkl} u_j u_k u_l.
///
/// `w` stores 2n-dimensional coefficient vectors whose first n entries are
/// the displacement half. The tensors must describe the nonlinearity about
/// the expansion point (for models built about their own equilibrium the
/// raw file tensors apply directly).
pub fn tensor_oracle_composition(
    quadratic: &[QuadEntry],
    cubic: &[CubicEntry],
    n: usize,
    w: &PolynomialMap,
    m: &MultiIndex,
) -> Result<CVector> {
    let stored: Vec<(&MultiIndex, &CVector)> = w.coeffs.iter().collect();
    let n_stored = stored.len();
    let pair_tuples = n_stored * n_stored * quadratic.len().max(1);
    let triple_tuples = n_stored * n_stored * n_stored * cubic.len().max(1);
    if pair_tuples.saturating_add(triple_tuples) > 10_000_000 {
        return Err(Error::InvalidSpec(format!(
            "oracle tuple budget exceeded: {} pair and {} triple tuples",
            pair_tuples, triple_tuples
        )));
    }

    let dim_out = w.vector_len();
    assert_eq!(dim_out, 2 * n, "W stores 2n-dimensional coefficients");
    let mut out = CVector::zeros(dim_out);

    // Ordered pairs (ma, mb) with ma + mb = m.
    for (ma, wa) in &stored {
        for (mb, wb) in &stored {
            if ma.add(mb) != *m {
                continue;
            }
            for e in quadratic {
                let val = wa[e.j] * wb[e.k] * e.value;
                out[e.i] -= val;
            }
        }
    }
    // Ordered triples.
    for (ma, wa) in &stored {
        for (mb, wb) in &stored {
            let ab = ma.add(mb);
            if m.checked_sub(&ab).is_none() {
                continue;
            }
            for (mc, wc) in &stored {
                if ab.add(mc) != *m {
                    continue;
                }
                for e in cubic {
                    let val = wa[e.j] * wb[e.k] * wc[e.l] * e.value;
                    out[e.i] -= val;
                }
            }
        }
    }
    Ok(out)
}


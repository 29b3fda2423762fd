//! Non-intrusive polarization probing.
//!
//! The first-order nonlinearity F contains only quadratic and cubic terms,
//! so its symmetric multilinear forms are recoverable from point
//! evaluations:
//!
//! F₂(x,x) = [F(x) + F(−x)]/2,            F₃(x,x,x) = [F(x) − F(−x)]/2,
//! F₂(a,b) = [F₂(a+b,a+b) − F₂(a,a) − F₂(b,b)]/2,
//! F₃(a,a,b) = [F₃(a+b) − F₃(a−b) − 2 F₃(b)]/6,
//! F₃(a,b,c) = [F₃(a+b+c) − F₃(a+b) − F₃(a+c) − F₃(b+c) + F₃(a) + F₃(b) + F₃(c)]/6,
//!
//! with F₃(x) short for F₃(x,x,x). Each distinct probe vector costs two
//! evaluator calls (±x) and yields both the even and odd part; the engine
//! memoizes probes by the multi-indices that define them, so one order
//! sweep touches each probe vector once.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::linalg::{C64, CVector};
use crate::ssm::multi_index::MultiIndex;
use crate::ssm::PolynomialMap;

/// Complex-capable evaluator of the first-order nonlinearity.
pub trait ComplexEvaluator: Sync {
    fn dim_out(&self) -> usize;
    fn eval(&self, z: &CVector) -> CVector;
}

impl ComplexEvaluator for crate::spectral::FirstOrderSystem {
    fn dim_out(&self) -> usize {
        self.dim()
    }

    fn eval(&self, z: &CVector) -> CVector {
        self.eval_force(z)
    }
}

/// Counts evaluator calls (the probe budget regression hook).
pub struct CountingEvaluator<'a> {
    inner: &'a dyn ComplexEvaluator,
    calls: AtomicU64,
}

impl<'a> CountingEvaluator<'a> {
    pub fn new(inner: &'a dyn ComplexEvaluator) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ComplexEvaluator for CountingEvaluator<'_> {
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }

    fn eval(&self, z: &CVector) -> CVector {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(z)
    }
}

/// Identity of a probe vector in terms of stored expansion coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProbeKey {
    /// W_m
    Single(MultiIndex),
    /// W_a + W_b, a ≤ b
    Sum2(MultiIndex, MultiIndex),
    /// W_a − W_b, a < b (the b < a case uses oddness of F₃)
    Diff(MultiIndex, MultiIndex),
    /// W_a + W_b + W_c, a ≤ b ≤ c
    Sum3(MultiIndex, MultiIndex, MultiIndex),
}

impl ProbeKey {
    /// Probe vector over unit-normalized coefficients: Ŵ_m = W_m/‖W_m‖.
    /// Polarization over balanced magnitudes keeps the differencing
    /// cancellation at machine level even when coefficient norms span
    /// orders of magnitude; callers scale the multilinear values back by
    /// the norms afterwards.
    fn build(&self, w: &PolynomialMap) -> CVector {
        let unit = |m: &MultiIndex| -> CVector {
            let c = w.coeff(m);
            let n = c.norm();
            if n > 0.0 {
                c / C64::new(n, 0.0)
            } else {
                c.clone()
            }
        };
        match self {
            ProbeKey::Single(a) => unit(a),
            ProbeKey::Sum2(a, b) => unit(a) + unit(b),
            ProbeKey::Diff(a, b) => unit(a) - unit(b),
            ProbeKey::Sum3(a, b, c) => unit(a) + unit(b) + unit(c),
        }
    }
}

/// Probe keys needed for one unordered pair {a, b}.
pub fn keys_for_pair(a: &MultiIndex, b: &MultiIndex) -> Vec<ProbeKey> {
    if a == b {
        vec![ProbeKey::Single(a.clone())]
    } else {
        vec![
            ProbeKey::Sum2(a.clone(), b.clone()),
            ProbeKey::Single(a.clone()),
            ProbeKey::Single(b.clone()),
        ]
    }
}

/// Probe keys needed for one unordered triple {a ≤ b ≤ c}.
pub fn keys_for_triple(a: &MultiIndex, b: &MultiIndex, c: &MultiIndex) -> Vec<ProbeKey> {
    if a == b && b == c {
        vec![ProbeKey::Single(a.clone())]
    } else if a == b {
        // F₃(a, a, c)
        vec![
            ProbeKey::Sum2(a.clone(), c.clone()),
            ProbeKey::Diff(a.clone(), c.clone()),
            ProbeKey::Single(c.clone()),
        ]
    } else if b == c {
        // F₃(b, b, a)
        vec![
            ProbeKey::Sum2(a.clone(), b.clone()),
            ProbeKey::Diff(a.clone(), b.clone()),
            ProbeKey::Single(a.clone()),
        ]
    } else {
        vec![
            ProbeKey::Sum3(a.clone(), b.clone(), c.clone()),
            ProbeKey::Sum2(a.clone(), b.clone()),
            ProbeKey::Sum2(a.clone(), c.clone()),
            ProbeKey::Sum2(b.clone(), c.clone()),
            ProbeKey::Single(a.clone()),
            ProbeKey::Single(b.clone()),
            ProbeKey::Single(c.clone()),
        ]
    }
}

/// Memoized even/odd probe store over one expansion sweep.
pub struct ProbeEngine<'a> {
    eval: &'a dyn ComplexEvaluator,
    memo: BTreeMap<ProbeKey, (CVector, CVector)>,
}

impl<'a> ProbeEngine<'a> {
    pub fn new(eval: &'a dyn ComplexEvaluator) -> Self {
        Self {
            eval,
            memo: BTreeMap::new(),
        }
    }

    pub fn probes_used(&self) -> usize {
        self.memo.len()
    }

    /// (even, odd) parts of F along the probe vector for `key`.
    fn even_odd(&mut self, key: ProbeKey, w: &PolynomialMap) -> (CVector, CVector) {
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        let x = key.build(w);
        let fp = self.eval.eval(&x);
        let fm = self.eval.eval(&(-&x));
        let even = (&fp + &fm) * C64::new(0.5, 0.0);
        let odd = (fp - fm) * C64::new(0.5, 0.0);
        self.memo.insert(key, (even.clone(), odd.clone()));
        (even, odd)
    }

    /// Symmetric bilinear value F₂(W_a, W_b).
    pub fn pair_value(&mut self, a: &MultiIndex, b: &MultiIndex, w: &PolynomialMap) -> CVector {
        let na = w.coeff(a).norm();
        let nb = w.coeff(b).norm();
        if na == 0.0 || nb == 0.0 {
            return CVector::zeros(w.vector_len());
        }
        if a == b {
            self.even_odd(ProbeKey::Single(a.clone()), w).0 * C64::new(na * nb, 0.0)
        } else {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let e_sum = self
                .even_odd(ProbeKey::Sum2(lo.clone(), hi.clone()), w)
                .0;
            let e_a = self.even_odd(ProbeKey::Single(lo.clone()), w).0;
            let e_b = self.even_odd(ProbeKey::Single(hi.clone()), w).0;
            (e_sum - e_a - e_b) * C64::new(0.5 * na * nb, 0.0)
        }
    }

    /// Symmetric trilinear value F₃(W_a, W_b, W_c) for a ≤ b ≤ c.
    pub fn triple_value(
        &mut self,
        a: &MultiIndex,
        b: &MultiIndex,
        c: &MultiIndex,
        w: &PolynomialMap,
    ) -> CVector {
        let scale = w.coeff(a).norm() * w.coeff(b).norm() * w.coeff(c).norm();
        if scale == 0.0 {
            return CVector::zeros(w.vector_len());
        }
        let raw = self.triple_value_unit(a, b, c, w);
        raw * C64::new(scale, 0.0)
    }

    /// F₃ over the unit-normalized coefficients.
    fn triple_value_unit(
        &mut self,
        a: &MultiIndex,
        b: &MultiIndex,
        c: &MultiIndex,
        w: &PolynomialMap,
    ) -> CVector {
        if a == b && b == c {
            self.even_odd(ProbeKey::Single(a.clone()), w).1
        } else if a == b {
            // F₃(a,a,c) = [F₃(a+c) − F₃(a−c) − 2 F₃(c)]/6
            let o_sum = self
                .even_odd(ProbeKey::Sum2(a.clone(), c.clone()), w)
                .1;
            let o_diff = self
                .even_odd(ProbeKey::Diff(a.clone(), c.clone()), w)
                .1;
            let o_c = self.even_odd(ProbeKey::Single(c.clone()), w).1;
            (o_sum - o_diff - o_c * C64::new(2.0, 0.0)) * C64::new(1.0 / 6.0, 0.0)
        } else if b == c {
            // F₃(b,b,a) with the stored difference W_a − W_b: F₃(b−a) = −F₃(a−b).
            let o_sum = self
                .even_odd(ProbeKey::Sum2(a.clone(), b.clone()), w)
                .1;
            let o_diff = self
                .even_odd(ProbeKey::Diff(a.clone(), b.clone()), w)
                .1;
            let o_a = self.even_odd(ProbeKey::Single(a.clone()), w).1;
            // F₃(b,b,a) = [F₃(b+a) − F₃(b−a) − 2F₃(a)]/6 = [F₃(a+b) + F₃(a−b) − 2F₃(a)]/6
            (o_sum + o_diff - o_a * C64::new(2.0, 0.0)) * C64::new(1.0 / 6.0, 0.0)
        } else {
            let o_abc = self
                .even_odd(ProbeKey::Sum3(a.clone(), b.clone(), c.clone()), w)
                .1;
            let o_ab = self
                .even_odd(ProbeKey::Sum2(a.clone(), b.clone()), w)
                .1;
            let o_ac = self
                .even_odd(ProbeKey::Sum2(a.clone(), c.clone()), w)
                .1;
            let o_bc = self
                .even_odd(ProbeKey::Sum2(b.clone(), c.clone()), w)
                .1;
            let o_a = self.even_odd(ProbeKey::Single(a.clone()), w).1;
            let o_b = self.even_odd(ProbeKey::Single(b.clone()), w).1;
            let o_c = self.even_odd(ProbeKey::Single(c.clone()), w).1;
            (o_abc - o_ab - o_ac - o_bc + o_a + o_b + o_c) * C64::new(1.0 / 6.0, 0.0)
        }
    }
}

/// Composition coefficient F∘W|_m: the sum over all ordered 2- and 3-part
/// partitions of m into stored multi-indices.
pub fn composition_coefficient(
    engine: &mut ProbeEngine<'_>,
    w: &PolynomialMap,
    m: &MultiIndex,
) -> CVector {
    let dim_out = w.vector_len();
    let mut acc = CVector::zeros(dim_out);
    for (a, b, mult) in m.partitions2() {
        let val = engine.pair_value(&a, &b, w);
        acc += val * C64::new(mult as f64, 0.0);
    }
    for (a, b, c, mult) in m.partitions3() {
        let val = engine.triple_value(&a, &b, &c, w);
        acc += val * C64::new(mult as f64, 0.0);
    }
    acc
}

/// Standalone multilinear probes against an arbitrary evaluator: the
/// building blocks above exposed for direct use (tests, diagnostics).
pub fn probe_bilinear(eval: &dyn ComplexEvaluator, a: &CVector, b: &CVector) -> CVector {
    let even = |x: &CVector| -> CVector {
        let fp = eval.eval(x);
        let fm = eval.eval(&(-x));
        (fp + fm) * C64::new(0.5, 0.0)
    };
    if a == b {
        even(a)
    } else {
        (even(&(a + b)) - even(a) - even(b)) * C64::new(0.5, 0.0)
    }
}

pub fn probe_trilinear(
    eval: &dyn ComplexEvaluator,
    a: &CVector,
    b: &CVector,
    c: &CVector,
) -> CVector {
    let odd = |x: &CVector| -> CVector {
        let fp = eval.eval(x);
        let fm = eval.eval(&(-x));
        (fp - fm) * C64::new(0.5, 0.0)
    };
    let sixth = C64::new(1.0 / 6.0, 0.0);
    if a == b && b == c {
        odd(a)
    } else if a == b {
        (odd(&(a + c)) - odd(&(a - c)) - odd(c) * C64::new(2.0, 0.0)) * sixth
    } else if b == c {
        (odd(&(a + b)) + odd(&(a - b)) - odd(a) * C64::new(2.0, 0.0)) * sixth
    } else {
        (odd(&(a + b + c)) - odd(&(a + b)) - odd(&(a + c)) - odd(&(b + c)) + odd(a) + odd(b)
            + odd(c))
            * sixth
    }
}

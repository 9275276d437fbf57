//! Operation tape for reverse-mode differentiation.
//!
//! Every differentiable operation is a method on [`Tape`]. The forward value
//! is computed eagerly; a backward rule closure is recorded so that
//! [`Tape::backward`] can replay the tape in reverse and accumulate
//! vector-Jacobian products into each input's gradient buffer.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Maps the upstream gradient of an operation's output to per-input
/// gradient contributions (`None` marks an input the rule never touches).
type Rule<S> = Box<dyn Fn(&[S]) -> Vec<Option<Vec<S>>>>;

struct Recorded<S: Scalar> {
    inputs: Vec<Tensor<S>>,
    output: Tensor<S>,
    rule: Rule<S>,
}

/// How [`Tape::gradient_gate`] produces its forward value. `Live` copies the
/// input. The other two modes exist for finite-difference checking, where a
/// gated branch must be held constant: `Record` captures each gate output in
/// call order, `Replay` substitutes those captured values so that numeric
/// perturbations do not leak through the gate.
enum GateMode<S> {
    Live,
    Record(Vec<Vec<S>>),
    Replay { cache: Vec<Vec<S>>, next: usize },
}

/// Records operations in forward order; backward visits each exactly once,
/// in reverse. One tape per forward pass; single-threaded by construction.
pub struct Tape<S: Scalar> {
    records: RefCell<Vec<Recorded<S>>>,
    recording: bool,
    gate_mode: RefCell<GateMode<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            records: RefCell::new(Vec::new()),
            recording: true,
            gate_mode: RefCell::new(GateMode::Live),
        }
    }

    /// A tape that records nothing; forward values only.
    pub fn inference() -> Self {
        Tape {
            records: RefCell::new(Vec::new()),
            recording: false,
            gate_mode: RefCell::new(GateMode::Live),
        }
    }

    /// Recording tape that additionally captures every gate output, for use
    /// as the linearization point of a finite-difference check.
    pub(crate) fn with_gate_recording() -> Self {
        let t = Tape::new();
        *t.gate_mode.borrow_mut() = GateMode::Record(Vec::new());
        t
    }

    pub(crate) fn take_gate_cache(&self) -> Vec<Vec<S>> {
        match std::mem::replace(&mut *self.gate_mode.borrow_mut(), GateMode::Live) {
            GateMode::Record(cache) => cache,
            _ => Vec::new(),
        }
    }

    /// Forward-only tape whose gates emit the cached values instead of their
    /// inputs, freezing gated branches at the linearization point.
    pub(crate) fn inference_with_gate_replay(cache: Vec<Vec<S>>) -> Self {
        let t = Tape::inference();
        *t.gate_mode.borrow_mut() = GateMode::Replay { cache, next: 0 };
        t
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn num_recorded(&self) -> usize {
        self.records.borrow().len()
    }

    pub(crate) fn push(
        &self,
        inputs: &[&Tensor<S>],
        out_data: Vec<S>,
        out_shape: &[usize],
        rule: impl Fn(&[S]) -> Vec<Option<Vec<S>>> + 'static,
    ) -> Tensor<S> {
        let out = Tensor::from_vec(out_data, out_shape);
        let needs_grad = inputs.iter().any(|t| t.requires_grad());
        out.set_requires_grad(needs_grad);
        if self.recording && needs_grad {
            self.records.borrow_mut().push(Recorded {
                inputs: inputs.iter().map(|t| (*t).clone()).collect(),
                output: out.clone(),
                rule: Box::new(rule),
            });
        }
        out
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate additively into
    /// every `requires_grad` tensor reachable from `loss`; call
    /// [`Tensor::zero_grad`] (or [`Tensor::clear_grad`]) between steps.
    pub fn backward(&self, loss: &Tensor<S>) -> Result<()> {
        if loss.numel() != 1 {
            return Err(Error::NonScalarLoss { numel: loss.numel() });
        }
        loss.accumulate_grad(&[S::ONE]);
        let records = self.records.borrow();
        for rec in records.iter().rev() {
            let upstream = match rec.output.grad() {
                Some(g) => g,
                None => continue, // not reachable from the loss
            };
            let contributions = (rec.rule)(&upstream);
            debug_assert_eq!(contributions.len(), rec.inputs.len());
            for (input, contribution) in rec.inputs.iter().zip(contributions) {
                if let Some(c) = contribution {
                    if input.requires_grad() {
                        input.accumulate_grad(&c);
                    }
                }
            }
        }
        Ok(())
    }

    // ---- shape checks ------------------------------------------------------

    pub(crate) fn want_same_shape(op: &'static str, a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch {
                op,
                detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
            });
        }
        Ok(())
    }

    pub(crate) fn want_matrix(op: &'static str, t: &Tensor<S>) -> Result<(usize, usize)> {
        let s = t.shape();
        if s.len() != 2 {
            return Err(Error::ShapeMismatch { op, detail: format!("expected matrix, got {s:?}") });
        }
        Ok((s[0], s[1]))
    }

    // ---- elementwise -------------------------------------------------------

    pub fn add(&self, a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
        Self::want_same_shape("add", a, b)?;
        let out: Vec<S> = a.data().iter().zip(b.data().iter()).map(|(x, y)| *x + *y).collect();
        let shape = a.shape();
        Ok(self.push(&[a, b], out, &shape, |g| {
            vec![Some(g.to_vec()), Some(g.to_vec())]
        }))
    }

    pub fn sub(&self, a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
        Self::want_same_shape("sub", a, b)?;
        let out: Vec<S> = a.data().iter().zip(b.data().iter()).map(|(x, y)| *x - *y).collect();
        let shape = a.shape();
        Ok(self.push(&[a, b], out, &shape, |g| {
            vec![Some(g.to_vec()), Some(g.iter().map(|v| -*v).collect())]
        }))
    }

    pub fn mul(&self, a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
        Self::want_same_shape("mul", a, b)?;
        let out: Vec<S> = a.data().iter().zip(b.data().iter()).map(|(x, y)| *x * *y).collect();
        let shape = a.shape();
        let (ah, bh) = (a.clone(), b.clone());
        Ok(self.push(&[a, b], out, &shape, move |g| {
            let da: Vec<S> = g.iter().zip(bh.data().iter()).map(|(gi, bi)| *gi * *bi).collect();
            let db: Vec<S> = g.iter().zip(ah.data().iter()).map(|(gi, ai)| *gi * *ai).collect();
            vec![Some(da), Some(db)]
        }))
    }

    pub fn scale(&self, a: &Tensor<S>, factor: S) -> Result<Tensor<S>> {
        let out: Vec<S> = a.data().iter().map(|x| *x * factor).collect();
        let shape = a.shape();
        Ok(self.push(&[a], out, &shape, move |g| {
            vec![Some(g.iter().map(|v| *v * factor).collect())]
        }))
    }

    pub fn relu(&self, a: &Tensor<S>) -> Result<Tensor<S>> {
        let out: Vec<S> = a.data().iter().map(|x| x.maximum(S::ZERO)).collect();
        let shape = a.shape();
        let ah = a.clone();
        Ok(self.push(&[a], out, &shape, move |g| {
            let dx: Vec<S> = g
                .iter()
                .zip(ah.data().iter())
                .map(|(gi, xi)| if *xi > S::ZERO { *gi } else { S::ZERO })
                .collect();
            vec![Some(dx)]
        }))
    }

    /// Identity in the forward direction, zero in the backward direction.
    ///
    /// The output is a bit-exact copy of the input; the recorded rule hands
    /// the input an all-zeros contribution no matter what arrives from
    /// upstream, so nothing behind the gate receives gradient through it.
    pub fn gradient_gate(&self, a: &Tensor<S>) -> Result<Tensor<S>> {
        let out = match &mut *self.gate_mode.borrow_mut() {
            GateMode::Live => a.to_vec(),
            GateMode::Record(cache) => {
                let v = a.to_vec();
                cache.push(v.clone());
                v
            }
            GateMode::Replay { cache, next } => {
                assert!(*next < cache.len(), "gate replay ran past the recorded cache");
                let v = cache[*next].clone();
                assert_eq!(v.len(), a.numel(), "gate replay shape drift");
                *next += 1;
                v
            }
        };
        let shape = a.shape();
        let n = out.len();
        Ok(self.push(&[a], out, &shape, move |_g| vec![Some(vec![S::ZERO; n])]))
    }

    pub fn reshape(&self, a: &Tensor<S>, new_shape: &[usize]) -> Result<Tensor<S>> {
        let numel: usize = new_shape.iter().product();
        if numel != a.numel() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                detail: format!("{:?} ({} elems) -> {:?} ({} elems)", a.shape(), a.numel(), new_shape, numel),
            });
        }
        let out = a.to_vec();
        Ok(self.push(&[a], out, new_shape, |g| vec![Some(g.to_vec())]))
    }

    /// Flatten to `[batch, rest]`.
    pub fn flatten(&self, a: &Tensor<S>) -> Result<Tensor<S>> {
        let s = a.shape();
        if s.is_empty() {
            return Err(Error::ShapeMismatch { op: "flatten", detail: "rank-0 tensor".into() });
        }
        let rest: usize = s[1..].iter().product();
        self.reshape(a, &[s[0], rest])
    }

    pub fn sum(&self, a: &Tensor<S>) -> Result<Tensor<S>> {
        let mut acc = S::ZERO;
        for v in a.data().iter() {
            acc += *v;
        }
        let n = a.numel();
        Ok(self.push(&[a], vec![acc], &[1], move |g| vec![Some(vec![g[0]; n])]))
    }

    // ---- linear algebra ----------------------------------------------------

    pub fn matmul(&self, a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
        let (n, k) = Self::want_matrix("matmul", a)?;
        let (k2, m) = Self::want_matrix("matmul", b)?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                detail: format!("lhs [{n},{k}] incompatible with rhs [{k2},{m}]"),
            });
        }
        let out = mm_nn(&a.data(), &b.data(), n, k, m);
        let (ah, bh) = (a.clone(), b.clone());
        Ok(self.push(&[a, b], out, &[n, m], move |g| {
            let da = mm_nt(g, &bh.data(), n, m, k); // g[N,M] * b^T[M,K]
            let db = mm_tn(&ah.data(), g, n, k, m); // a^T[K,N] * g[N,M]
            vec![Some(da), Some(db)]
        }))
    }

    /// Row-broadcast add: `[N,D] + [D]`.
    pub fn add_bias(&self, x: &Tensor<S>, bias: &Tensor<S>) -> Result<Tensor<S>> {
        let (n, d) = Self::want_matrix("add_bias", x)?;
        if bias.shape() != [d] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                detail: format!("input [{n},{d}] vs bias {:?}", bias.shape()),
            });
        }
        let bd = bias.to_vec();
        let out: Vec<S> =
            x.data().iter().enumerate().map(|(i, v)| *v + bd[i % d]).collect();
        Ok(self.push(&[x, bias], out, &[n, d], move |g| {
            let mut db = vec![S::ZERO; d];
            for (i, gi) in g.iter().enumerate() {
                db[i % d] += *gi;
            }
            vec![Some(g.to_vec()), Some(db)]
        }))
    }

    /// Row-broadcast multiply: `[N,D] * [D]`.
    pub fn row_mul(&self, x: &Tensor<S>, scale: &Tensor<S>) -> Result<Tensor<S>> {
        let (n, d) = Self::want_matrix("row_mul", x)?;
        if scale.shape() != [d] {
            return Err(Error::ShapeMismatch {
                op: "row_mul",
                detail: format!("input [{n},{d}] vs scale {:?}", scale.shape()),
            });
        }
        let sd = scale.to_vec();
        let out: Vec<S> =
            x.data().iter().enumerate().map(|(i, v)| *v * sd[i % d]).collect();
        let xh = x.clone();
        Ok(self.push(&[x, scale], out, &[n, d], move |g| {
            let dx: Vec<S> = g.iter().enumerate().map(|(i, gi)| *gi * sd[i % d]).collect();
            let mut ds = vec![S::ZERO; d];
            for (i, (gi, xi)) in g.iter().zip(xh.data().iter()).enumerate() {
                ds[i % d] += *gi * *xi;
            }
            vec![Some(dx), Some(ds)]
        }))
    }
}

// Plain matrix kernels shared by forward and backward rules.

/// `a[n,k] * b[k,m]`
pub(crate) fn mm_nn<S: Scalar>(a: &[S], b: &[S], n: usize, k: usize, m: usize) -> Vec<S> {
    let mut out = vec![S::ZERO; n * m];
    for i in 0..n {
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * m..(p + 1) * m];
            let orow = &mut out[i * m..(i + 1) * m];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * *bv;
            }
        }
    }
    out
}

/// `g[n,m] * b^T` where `b` is `[k,m]`; result `[n,k]`.
fn mm_nt<S: Scalar>(g: &[S], b: &[S], n: usize, m: usize, k: usize) -> Vec<S> {
    let mut out = vec![S::ZERO; n * k];
    for i in 0..n {
        for p in 0..k {
            let mut acc = S::ZERO;
            for j in 0..m {
                acc += g[i * m + j] * b[p * m + j];
            }
            out[i * k + p] = acc;
        }
    }
    out
}

/// `a^T * g` where `a` is `[n,k]`, `g` is `[n,m]`; result `[k,m]`.
fn mm_tn<S: Scalar>(a: &[S], g: &[S], n: usize, k: usize, m: usize) -> Vec<S> {
    let mut out = vec![S::ZERO; k * m];
    for i in 0..n {
        for p in 0..k {
            let av = a[i * k + p];
            let grow = &g[i * m..(i + 1) * m];
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, gv) in orow.iter_mut().zip(grow) {
                *o += av * *gv;
            }
        }
    }
    out
}

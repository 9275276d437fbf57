//! Fused softmax cross-entropy, stabilized by per-row max subtraction.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tape::Tape;
use super::tensor::Tensor;

/// Row-wise softmax on plain data, max-subtracted. Scoring helper for
/// acquisition and evaluation; not recorded on any tape.
pub fn softmax_rows<S: Scalar>(logits: &[S], classes: usize) -> Vec<S> {
    assert_eq!(logits.len() % classes, 0, "ragged logits");
    let mut out = vec![S::ZERO; logits.len()];
    for (row, orow) in logits.chunks_exact(classes).zip(out.chunks_exact_mut(classes)) {
        let mut mx = row[0];
        for v in row {
            mx = mx.maximum(*v);
        }
        let mut denom = S::ZERO;
        for (o, v) in orow.iter_mut().zip(row) {
            *o = (*v - mx).exp();
            denom += *o;
        }
        for o in orow.iter_mut() {
            *o /= denom;
        }
    }
    out
}

impl<S: Scalar> Tape<S> {
    /// Mean over the batch of `-log softmax(logits)[label]`.
    ///
    /// The gradient is the classic `(softmax - onehot) / N`.
    pub fn softmax_cross_entropy(
        &self,
        logits: &Tensor<S>,
        labels: &[usize],
    ) -> Result<Tensor<S>> {
        let (n, c) = Self::want_matrix("softmax_cross_entropy", logits)?;
        if labels.len() != n {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy",
                detail: format!("{n} logit rows vs {} labels", labels.len()),
            });
        }
        for &y in labels {
            if y >= c {
                return Err(Error::LabelOutOfRange { label: y, classes: c });
            }
        }

        let probs = softmax_rows(&logits.data(), c);
        let mut loss = S::ZERO;
        {
            let ld = logits.data();
            for (r, &y) in labels.iter().enumerate() {
                let row = &ld[r * c..(r + 1) * c];
                let mut mx = row[0];
                for v in row {
                    mx = mx.maximum(*v);
                }
                let mut denom = S::ZERO;
                for v in row {
                    denom += (*v - mx).exp();
                }
                loss += -(row[y] - mx - denom.ln());
            }
        }
        let inv_n = S::ONE / S::from_usize(n);
        loss *= inv_n;

        let label_vec = labels.to_vec();
        Ok(self.push(&[logits], vec![loss], &[1], move |g| {
            let scale = g[0] * inv_n;
            let mut dl = vec![S::ZERO; n * c];
            for (r, &y) in label_vec.iter().enumerate() {
                for j in 0..c {
                    let onehot = if j == y { S::ONE } else { S::ZERO };
                    dl[r * c + j] = scale * (probs[r * c + j] - onehot);
                }
            }
            vec![Some(dl)]
        }))
    }
}

use std::cell::{Ref, RefCell};
use std::rc::Rc;

use crate::scalar::Scalar;

struct TensorData<S: Scalar> {
    shape: Vec<usize>,
    data: Vec<S>,
    requires_grad: bool,
    grad: Option<Vec<S>>,
}

/// Dense n-dimensional array with an optional gradient buffer.
///
/// A `Tensor` is a cheap shared handle: clones alias the same storage, which
/// is how recorded operations, layers and the optimizer all see the same
/// parameter. Values are immutable once a tensor participates in a forward
/// pass; only the gradient buffer (and, for parameters, optimizer updates
/// between steps) mutate in place.
pub struct Tensor<S: Scalar> {
    inner: Rc<RefCell<TensorData<S>>>,
}

impl<S: Scalar> Clone for Tensor<S> {
    fn clone(&self) -> Self {
        Tensor { inner: Rc::clone(&self.inner) }
    }
}

impl<S: Scalar> Tensor<S> {
    pub fn from_vec(data: Vec<S>, shape: &[usize]) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            inner: Rc::new(RefCell::new(TensorData {
                shape: shape.to_vec(),
                data,
                requires_grad: false,
                grad: None,
            })),
        }
    }

    /// A trainable leaf: `requires_grad` is set.
    pub fn param(data: Vec<S>, shape: &[usize]) -> Self {
        let t = Tensor::from_vec(data, shape);
        t.inner.borrow_mut().requires_grad = true;
        t
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::from_vec(vec![S::ZERO; shape.iter().product()], shape)
    }

    pub fn filled(shape: &[usize], value: S) -> Self {
        Tensor::from_vec(vec![value; shape.iter().product()], shape)
    }

    pub fn scalar(value: S) -> Self {
        Tensor::from_vec(vec![value], &[1])
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    pub fn set_requires_grad(&self, flag: bool) {
        self.inner.borrow_mut().requires_grad = flag;
    }

    /// Borrow the value buffer.
    pub fn data(&self) -> Ref<'_, Vec<S>> {
        Ref::map(self.inner.borrow(), |d| &d.data)
    }

    pub fn to_vec(&self) -> Vec<S> {
        self.inner.borrow().data.clone()
    }

    /// Replace the value buffer in place. Length must match.
    pub fn set_data(&self, new: &[S]) {
        let mut d = self.inner.borrow_mut();
        assert_eq!(new.len(), d.data.len(), "set_data length mismatch");
        d.data.copy_from_slice(new);
    }

    /// Apply an in-place update to the value buffer (optimizer steps).
    pub fn update_data(&self, f: impl FnOnce(&mut [S])) {
        f(&mut self.inner.borrow_mut().data);
    }

    pub fn grad(&self) -> Option<Vec<S>> {
        self.inner.borrow().grad.clone()
    }

    pub fn has_grad(&self) -> bool {
        self.inner.borrow().grad.is_some()
    }

    /// Add `contribution` into the gradient buffer, materializing zeros first
    /// if no buffer exists. Repeated calls accumulate.
    pub fn accumulate_grad(&self, contribution: &[S]) {
        let mut d = self.inner.borrow_mut();
        let n = d.data.len();
        assert_eq!(contribution.len(), n, "gradient length mismatch");
        let grad = d.grad.get_or_insert_with(|| vec![S::ZERO; n]);
        for (g, c) in grad.iter_mut().zip(contribution) {
            *g += *c;
        }
    }

    /// Reset the gradient to all-zeros (allocating the buffer if absent).
    pub fn zero_grad(&self) {
        let mut d = self.inner.borrow_mut();
        let n = d.data.len();
        match &mut d.grad {
            Some(g) => g.iter_mut().for_each(|v| *v = S::ZERO),
            None => d.grad = Some(vec![S::ZERO; n]),
        }
    }

    /// Drop the gradient buffer entirely.
    pub fn clear_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    /// True when both tensors are the same storage.
    pub fn same_storage(&self, other: &Tensor<S>) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    /// Bitwise equality of the value buffers.
    pub fn bit_eq(&self, other: &Tensor<S>) -> bool {
        let a = self.inner.borrow();
        let b = other.inner.borrow();
        a.shape == b.shape
            && a.data.len() == b.data.len()
            && a.data.iter().zip(b.data.iter()).all(|(x, y)| x.bits() == y.bits())
    }
}

impl<S: Scalar> std::fmt::Debug for Tensor<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("shape", &d.shape)
            .field("requires_grad", &d.requires_grad)
            .field("data", &d.data)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_matches_data_len() {
        let t = Tensor::<f32>::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        assert_eq!(t.numel(), 6);
        assert_eq!(t.shape(), vec![2, 3]);
    }

    #[test]
    #[should_panic(expected = "does not match shape")]
    fn shape_mismatch_panics() {
        let _ = Tensor::<f32>::from_vec(vec![1.0, 2.0], &[3]);
    }

    #[test]
    fn zero_grad_leaves_all_zeros() {
        let t = Tensor::<f64>::param(vec![1.0, 2.0], &[2]);
        t.accumulate_grad(&[0.5, 0.25]);
        t.zero_grad();
        assert_eq!(t.grad().unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn accumulation_is_additive() {
        let t = Tensor::<f64>::param(vec![0.0; 3], &[3]);
        t.accumulate_grad(&[1.0, 2.0, 3.0]);
        t.accumulate_grad(&[1.0, 1.0, 1.0]);
        assert_eq!(t.grad().unwrap(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn clones_alias_storage() {
        let t = Tensor::<f32>::param(vec![1.0], &[1]);
        let u = t.clone();
        u.update_data(|d| d[0] = 5.0);
        assert_eq!(t.to_vec(), vec![5.0]);
        assert!(t.same_storage(&u));
    }
}

use super::*;
use crate::error::Error;

fn t64(data: Vec<f64>, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_vec(data, shape)
}

fn p64(data: Vec<f64>, shape: &[usize]) -> Tensor<f64> {
    Tensor::param(data, shape)
}

#[test]
fn matmul_identity_passthrough() {
    let tape = Tape::new();
    let a = t64(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]);
    let eye = t64(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]);
    let y = tape.matmul(&a, &eye).unwrap();
    assert_eq!(y.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn matmul_shape_error_names_op_and_dims() {
    let tape = Tape::<f64>::new();
    let a = t64(vec![0.0; 6], &[2, 3]);
    let b = t64(vec![0.0; 10], &[2, 5]);
    match tape.matmul(&a, &b) {
        Err(Error::ShapeMismatch { op, detail }) => {
            assert_eq!(op, "matmul");
            assert!(detail.contains('3') && detail.contains('2'), "{detail}");
        }
        other => panic!("expected shape mismatch, got {other:?}"),
    }
}

#[test]
fn relu_definition() {
    let tape = Tape::new();
    let x = t64(vec![-1.0, 0.0, 2.0], &[3]);
    let y = tape.relu(&x).unwrap();
    assert_eq!(y.to_vec(), vec![0.0, 0.0, 2.0]);
}

#[test]
fn conv2d_scalar_kernel_scales_input() {
    let tape = Tape::new();
    let x = t64((1..=9).map(f64::from).collect(), &[1, 1, 3, 3]);
    let w = t64(vec![2.0], &[1, 1, 1, 1]);
    let y = tape.conv2d(&x, &w, 1, 0).unwrap();
    assert_eq!(y.shape(), vec![1, 1, 3, 3]);
    assert_eq!(y.to_vec(), (1..=9).map(|v| 2.0 * f64::from(v)).collect::<Vec<_>>());
}

#[test]
fn gradient_gate_forward_is_identity() {
    let tape = Tape::new();
    let x = t64(vec![3.5, -1.0], &[2]);
    let y = tape.gradient_gate(&x).unwrap();
    assert!(y.bit_eq(&x));
}

#[test]
fn gradient_gate_backward_is_zero() {
    // Upstream gradient of 7 on every coordinate; the gate delivers zeros.
    let tape = Tape::new();
    let x = p64(vec![1.0, 2.0], &[2]);
    let y = tape.gradient_gate(&x).unwrap();
    let scaled = tape.scale(&y, 7.0).unwrap();
    let loss = tape.sum(&scaled).unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![0.0, 0.0]);
}

#[test]
fn gate_times_x_differentiates_to_x() {
    // y = gate(x) * x; d sum(y) / dx = gate(x) = x since the gate branch
    // contributes nothing.
    let tape = Tape::new();
    let x = p64(vec![0.5, -2.0, 3.0], &[3]);
    let gated = tape.gradient_gate(&x).unwrap();
    let prod = tape.mul(&gated, &x).unwrap();
    let loss = tape.sum(&prod).unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![0.5, -2.0, 3.0]);
}

#[test]
fn backward_sum_of_squares() {
    let tape = Tape::new();
    let x = p64(vec![1.0, 2.0, 3.0], &[3]);
    let sq = tape.mul(&x, &x).unwrap();
    let loss = tape.sum(&sq).unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0, 4.0, 6.0]);
}

#[test]
fn backward_through_gate_only_path_populates_zeros() {
    let tape = Tape::new();
    let x = p64(vec![4.0, -4.0, 0.25], &[3]);
    let y = tape.gradient_gate(&x).unwrap();
    let loss = tape.sum(&y).unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![0.0, 0.0, 0.0]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let tape = Tape::new();
    let x = p64(vec![1.0, 2.0], &[2]);
    let y = tape.mul(&x, &x).unwrap();
    assert!(matches!(tape.backward(&y), Err(Error::NonScalarLoss { numel: 2 })));
}

#[test]
fn two_branch_gradients_accumulate() {
    // loss = sum(x*a) + sum(x*b) => grad x = a + b.
    let tape = Tape::new();
    let x = p64(vec![1.0, 1.0], &[2]);
    let a = t64(vec![2.0, 3.0], &[2]);
    let b = t64(vec![10.0, 20.0], &[2]);
    let br1 = tape.mul(&x, &a).unwrap();
    let br2 = tape.mul(&x, &b).unwrap();
    let joined = tape.add(&br1, &br2).unwrap();
    let loss = tape.sum(&joined).unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![12.0, 23.0]);
}

#[test]
fn three_layer_composition_matches_finite_differences() {
    // Random-ish fixed weights; checks the whole chain rule in one go.
    let w1 = t64(vec![0.3, -0.2, 0.7, 0.1, -0.5, 0.4], &[2, 3]);
    let w2 = t64(vec![0.6, -0.1, 0.2, 0.9, -0.3, 0.5], &[3, 2]);
    let x = t64(vec![0.8, -1.2], &[1, 2]);
    let err = finite_difference_check(
        |tape, x| {
            let h1 = tape.matmul(x, &w1)?;
            let a1 = tape.relu(&h1)?;
            let h2 = tape.matmul(&a1, &w2)?;
            let sq = tape.mul(&h2, &h2)?;
            tape.sum(&sq)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn replay_is_deterministic() {
    // Same inputs, same ops, twice: bit-identical forward and backward.
    let run = || {
        let tape = Tape::new();
        let x = p64(vec![0.1, 0.2, 0.3, 0.4], &[2, 2]);
        let w = p64(vec![1.5, -0.5, 2.0, 0.25], &[2, 2]);
        let y = tape.matmul(&x, &w).unwrap();
        let r = tape.relu(&y).unwrap();
        let loss = tape.sum(&r).unwrap();
        tape.backward(&loss).unwrap();
        (loss.to_vec()[0].to_bits(), x.grad().unwrap(), w.grad().unwrap())
    };
    let (l1, gx1, gw1) = run();
    let (l2, gx2, gw2) = run();
    assert_eq!(l1, l2);
    assert!(gx1.iter().zip(&gx2).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(gw1.iter().zip(&gw2).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn max_pool_takes_window_max() {
    let tape = Tape::new();
    let x = t64(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
    let y = tape.max_pool2d(&x, 2, 2).unwrap();
    assert_eq!(y.shape(), vec![1, 1, 1, 1]);
    assert_eq!(y.to_vec(), vec![4.0]);
}

#[test]
fn global_avg_pool_of_constant_map_is_constant() {
    let tape = Tape::new();
    let x = t64(vec![2.5; 2 * 3 * 4 * 4], &[2, 3, 4, 4]);
    let y = tape.global_avg_pool(&x).unwrap();
    assert_eq!(y.shape(), vec![2, 3]);
    assert!(y.to_vec().iter().all(|v| (v - 2.5).abs() < 1e-12));
}

#[test]
fn softmax_cross_entropy_uniform_logits() {
    let tape = Tape::new();
    let logits = t64(vec![0.0; 2 * 10], &[2, 10]);
    let loss = tape.softmax_cross_entropy(&logits, &[3, 7]).unwrap();
    assert!((loss.to_vec()[0] - 10.0f64.ln()).abs() < 1e-12);
}

#[test]
fn softmax_cross_entropy_saturated_correct_logit() {
    let tape = Tape::new();
    let mut row = vec![0.0; 10];
    row[4] = 1e6;
    let logits = t64(row, &[1, 10]);
    let loss = tape.softmax_cross_entropy(&logits, &[4]).unwrap();
    assert!(loss.to_vec()[0].abs() < 1e-9, "loss {}", loss.to_vec()[0]);
}

#[test]
fn softmax_cross_entropy_rejects_bad_label() {
    let tape = Tape::new();
    let logits = t64(vec![0.0; 4], &[1, 4]);
    assert!(matches!(
        tape.softmax_cross_entropy(&logits, &[4]),
        Err(Error::LabelOutOfRange { label: 4, classes: 4 })
    ));
}

#[test]
fn softmax_cross_entropy_gradient_formula() {
    // d loss / d logits = (softmax - onehot) / N, checked against both the
    // closed form and finite differences.
    let data = vec![0.2, -0.4, 1.1, 0.7, 0.0, -0.9];
    let logits = p64(data.clone(), &[2, 3]);
    let labels = [2usize, 0];

    let tape = Tape::new();
    let loss = tape.softmax_cross_entropy(&logits, &labels).unwrap();
    tape.backward(&loss).unwrap();
    let grad = logits.grad().unwrap();

    let probs = softmax_rows(&data, 3);
    for r in 0..2 {
        for j in 0..3 {
            let onehot = if labels[r] == j { 1.0 } else { 0.0 };
            let expect = (probs[r * 3 + j] - onehot) / 2.0;
            assert!((grad[r * 3 + j] - expect).abs() < 1e-12);
        }
    }

    let probe = Tensor::from_vec(data, &[2, 3]);
    let err = finite_difference_check(
        |tape, x| tape.softmax_cross_entropy(x, &labels),
        &probe,
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-4, "relative error {err}");
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn gate_forward_identity_on_arbitrary_tensors(
            values in proptest::collection::vec(-1e6f64..1e6, 1..64)
        ) {
            let tape = Tape::new();
            let shape = [values.len()];
            let x = Tensor::from_vec(values, &shape);
            let y = tape.gradient_gate(&x).unwrap();
            prop_assert!(y.bit_eq(&x));
        }

        #[test]
        fn shared_input_grad_is_sum_of_branch_grads(
            values in proptest::collection::vec(-10.0f64..10.0, 2..16)
        ) {
            // x feeds two branches summed into the loss; grad(x) must equal
            // the sum of the grads from each branch computed separately.
            let shape = [values.len()];

            let joint = {
                let tape = Tape::new();
                let x = Tensor::param(values.clone(), &shape);
                let b1 = tape.mul(&x, &x).unwrap();
                let b2 = tape.scale(&x, 3.0).unwrap();
                let s = tape.add(&b1, &b2).unwrap();
                let loss = tape.sum(&s).unwrap();
                tape.backward(&loss).unwrap();
                x.grad().unwrap()
            };

            let solo = |which: usize| {
                let tape = Tape::new();
                let x = Tensor::param(values.clone(), &shape);
                let b = if which == 0 {
                    tape.mul(&x, &x).unwrap()
                } else {
                    tape.scale(&x, 3.0).unwrap()
                };
                let loss = tape.sum(&b).unwrap();
                tape.backward(&loss).unwrap();
                x.grad().unwrap()
            };
            let (g1, g2) = (solo(0), solo(1));
            for i in 0..joint.len() {
                prop_assert!((joint[i] - (g1[i] + g2[i])).abs() < 1e-12);
            }
        }
    }
}

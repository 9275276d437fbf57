//! The gradient gate: identity forward, zero backward.
//!
//! The gate is what lets the training-time network carry an extra head
//! without that head ever steering the backbone: its loss backpropagates
//! only as far as the gate.
//!
//! ```bash
//! cargo run --release --example gradient_gate
//! ```

use frnet::autodiff::{Tape, Tensor};

fn main() {
    let tape = Tape::new();
    let x = Tensor::param(vec![3.5f64, -1.0, 0.25], &[3]);

    // Forward: bit-exact identity.
    let gated = tape.gradient_gate(&x).unwrap();
    println!("x         = {:?}", x.to_vec());
    println!("gate(x)   = {:?}  (bit-exact: {})", gated.to_vec(), gated.bit_eq(&x));

    // Backward through the gate alone: the upstream gradient is scaled by 7,
    // but the gate delivers exactly zero to x.
    let scaled = tape.scale(&gated, 7.0).unwrap();
    let loss = tape.sum(&scaled).unwrap();
    tape.backward(&loss).unwrap();
    println!("d loss/dx through gate      = {:?}", x.grad().unwrap());

    // A two-branch composition: y = gate(x) * x. Only the ungated branch
    // contributes, so the derivative is gate(x) = x, not 2x.
    let tape = Tape::new();
    let x = Tensor::param(vec![0.5f64, -2.0, 3.0], &[3]);
    let gated = tape.gradient_gate(&x).unwrap();
    let prod = tape.mul(&gated, &x).unwrap();
    let loss = tape.sum(&prod).unwrap();
    tape.backward(&loss).unwrap();
    println!("d sum(gate(x) * x) / dx     = {:?}  (equals x)", x.grad().unwrap());
}

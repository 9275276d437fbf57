//! Finite-difference gradient checking for every layer, in f64.
//!
//! ```bash
//! cargo run --release --example gradcheck
//! ```

use frnet::autodiff::{finite_difference_check, Tensor};
use frnet::nn::suite::{run_layer_suite, SUITE_TOLERANCE};

fn main() {
    // The single-function form: f(x) = sum(x^2) has gradient 2x, and the
    // central difference at eps = 1e-5 agrees to ~1e-10.
    let x = Tensor::from_vec(vec![1.0f64, 2.0], &[2]);
    let err = finite_difference_check(
        |tape, x| {
            let sq = tape.mul(x, x)?;
            tape.sum(&sq)
        },
        &x,
        1e-5,
    )
    .unwrap();
    println!("sum(x^2) at x=[1,2]: max relative error {err:.3e}\n");

    // The full layer suite, 20 random instances per layer family.
    println!("{:<24} {:>9} {:>16}", "layer", "instances", "max rel error");
    let mut worst = 0.0f64;
    for report in run_layer_suite(0xF00D, 20).unwrap() {
        println!(
            "{:<24} {:>9} {:>16.3e}  {}",
            report.layer,
            report.instances,
            report.max_rel_error,
            if report.passed() { "ok" } else { "FAIL" }
        );
        worst = worst.max(report.max_rel_error);
    }
    println!("\nworst case {worst:.3e} against tolerance {SUITE_TOLERANCE:.0e}");
}

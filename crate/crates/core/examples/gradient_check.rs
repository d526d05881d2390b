//! Compare backpropagation-through-time gradients with central finite
//! differences, tensor by tensor.
//!
//!     cargo run --release --example gradient_check

use npad::model::{Dims, ModelParams};
use npad::training::{grad_check, SequencePair};

fn main() -> npad::Result<()> {
    let dims = Dims {
        src_vocab: 6,
        tgt_vocab: 7,
        d_emb: 4,
        d_hid: 6,
    };
    let params = ModelParams::random(dims, 0.5, 3)?;
    let pair = SequencePair::new(vec![3, 5, 4, 3], vec![4, 6, 3])?;
    let report = grad_check(&params, &pair, 1e-4)?;
    println!("{} parameters", params.num_parameters());
    for (name, err) in &report.per_tensor {
        println!("{name:<10} {err:.3e}");
    }
    println!(
        "max relative error {:.3e}: {}",
        report.max_error(),
        if report.passed() { "ok" } else { "FAILED" }
    );
    Ok(())
}

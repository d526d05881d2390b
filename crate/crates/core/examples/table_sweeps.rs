//! Regenerate the noise, chain-count, NPAD+beam and diverse-decoding
//! comparison tables on a desk-scale model and print them.
//!
//!     cargo run --release --example table_sweeps

use npad::eval::{canonical_cells, render_report, run_cells, BleuConfig, CanonicalTable};
use npad::model::{Dims, ModelParams};
use npad::training::{gen_splits, train, TaskKind, TaskSpec, TrainConfig};

fn main() -> npad::Result<()> {
    let task = TaskSpec {
        kind: TaskKind::LexicalTranslate,
        src_symbols: 30,
        tgt_symbols: 30,
        min_len: 2,
        max_len: 15,
        count: 0,
        seed: 11,
    };
    let [train_set, valid_set, test_set] = gen_splits(&task, [2000, 200, 200])?;
    let dims = Dims {
        src_vocab: 33,
        tgt_vocab: 33,
        d_emb: 16,
        d_hid: 32,
    };
    let cfg = TrainConfig {
        epochs: 6,
        learning_rate: 0.003,
        lr_decay: 0.8,
        patience: None,
        ..TrainConfig::default()
    };
    let params = train(
        &ModelParams::init_uniform(dims, 0.1, 1)?,
        &train_set,
        &valid_set,
        &cfg,
    )?
    .params;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());

    for (title, table) in [
        (
            "Effect of noise injection (50 chains)",
            CanonicalTable::NoiseSweep,
        ),
        (
            "Effect of the number of chains (σ0 = 0.3)",
            CanonicalTable::ChainSweep,
        ),
        ("NPAD with beam search", CanonicalTable::NpadBeam),
        ("NPAD vs. diverse decoding", CanonicalTable::NpadVsDiverse),
    ] {
        let out = run_cells(
            &params,
            &test_set,
            &canonical_cells(table),
            7,
            None,
            BleuConfig::default(),
            workers,
        )?;
        println!("{title}\n{}", render_report(&out.rows));
    }
    Ok(())
}

//! Show how the diversity penalty reshapes the finished beam of a briefly
//! trained model. With η = 0 the search is plain beam search; larger η
//! makes siblings compete against other parents' children.
//!
//!     cargo run --release --example diverse_beams

use npad::decode::{beam_decode, diverse_beam_decode, DecodeLimits, NoiseSource, SourceModel};
use npad::model::{Dims, ModelParams};
use npad::training::{gen_splits, task_vocabs, train, TaskKind, TaskSpec, TrainConfig};

fn main() -> npad::Result<()> {
    let task = TaskSpec {
        kind: TaskKind::Reverse,
        src_symbols: 10,
        tgt_symbols: 10,
        min_len: 3,
        max_len: 8,
        count: 0,
        seed: 8,
    };
    let (src, tgt) = task_vocabs(task.kind, 10, 10)?;
    let [train_set, valid_set, test_set] = gen_splits(&task, [800, 100, 1])?;
    let dims = Dims {
        src_vocab: src.len(),
        tgt_vocab: tgt.len(),
        d_emb: 8,
        d_hid: 16,
    };
    let cfg = TrainConfig {
        epochs: 8,
        learning_rate: 0.005,
        ..TrainConfig::default()
    };
    let params = train(
        &ModelParams::init_uniform(dims, 0.1, 3)?,
        &train_set,
        &valid_set,
        &cfg,
    )?
    .params;

    let pair = &test_set[0];
    let model = SourceModel::new(&params, &pair.source)?;
    let limits = DecodeLimits::for_source(pair.source.len());
    println!("source {}\n", src.decode_tokens(&pair.source)?);

    let beam = beam_decode(&model, 5, &mut NoiseSource::Silent, limits)?;
    for eta in [0.0, 0.1, 1.0, 10.0] {
        let out = diverse_beam_decode(&model, 5, eta, &mut NoiseSource::Silent, limits)?;
        if eta == 0.0 {
            assert_eq!(out.completed, beam.completed);
        }
        println!("η = {eta}: best logp {:.4}", out.best.logp);
        for h in &out.completed {
            println!("    {:8.4}  {}", h.logp, tgt.decode_tokens(&h.tokens)?);
        }
    }
    Ok(())
}

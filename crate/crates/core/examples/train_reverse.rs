//! Train a small model on the reverse task, save it, load it back and
//! greedy-decode a few held-out sentences.
//!
//!     cargo run --release --example train_reverse

use npad::decode::{greedy_decode, DecodeLimits, NoiseSource, SourceModel};
use npad::model::{load_model, save_model, Dims, ModelParams};
use npad::training::{gen_splits, task_vocabs, train, TaskKind, TaskSpec, TrainConfig};

fn main() -> npad::Result<()> {
    let task = TaskSpec {
        kind: TaskKind::Reverse,
        src_symbols: 12,
        tgt_symbols: 12,
        min_len: 2,
        max_len: 8,
        count: 0,
        seed: 1,
    };
    let (src, tgt) = task_vocabs(task.kind, task.src_symbols, task.tgt_symbols)?;
    let [train_set, valid_set, test_set] = gen_splits(&task, [1500, 150, 5])?;

    let dims = Dims {
        src_vocab: src.len(),
        tgt_vocab: tgt.len(),
        d_emb: 12,
        d_hid: 24,
    };
    let init = ModelParams::init_uniform(dims, 0.1, 7)?;
    println!("{} parameters", init.num_parameters());
    let cfg = TrainConfig {
        epochs: 8,
        learning_rate: 0.004,
        ..TrainConfig::default()
    };
    let out = train(&init, &train_set, &valid_set, &cfg)?;
    for s in &out.trace {
        println!(
            "epoch {:2}  train {:.4}  valid {:.4}",
            s.epoch, s.train_nll, s.valid_nll
        );
    }

    let dir = std::env::temp_dir().join("npad-train-reverse");
    std::fs::create_dir_all(&dir).map_err(|e| npad::Error::Config(e.to_string()))?;
    let path = dir.join("model.bin");
    save_model(&out.params, &path)?;
    let params = load_model(&path)?;
    assert_eq!(params.num_parameters(), out.params.num_parameters());

    for pair in &test_set {
        let model = SourceModel::new(&params, &pair.source)?;
        let limits = DecodeLimits::for_source(pair.source.len());
        let hyp = greedy_decode(&model, &mut NoiseSource::Silent, limits)?.best;
        println!(
            "{:<24} -> {:<28} logp {:.3}",
            src.decode_tokens(&pair.source)?,
            tgt.decode_tokens(&hyp.tokens)?,
            hyp.logp
        );
    }
    Ok(())
}

//! Run NPAD on a freshly trained lexical-translation model and show what
//! each chain produced before and after rescoring.
//!
//!     cargo run --release --example npad_chains

use npad::decode::{greedy_decode, DecodeLimits, NoiseSource, SourceModel};
use npad::model::{Dims, ModelParams};
use npad::npad::{npad_decode, InnerDecoder, NpadConfig};
use npad::training::{gen_splits, task_vocabs, train, TaskKind, TaskSpec, TrainConfig};

fn main() -> npad::Result<()> {
    let task = TaskSpec {
        kind: TaskKind::LexicalTranslate,
        src_symbols: 20,
        tgt_symbols: 20,
        min_len: 4,
        max_len: 12,
        count: 0,
        seed: 4,
    };
    let (src, tgt) = task_vocabs(task.kind, 20, 20)?;
    let [train_set, valid_set, test_set] = gen_splits(&task, [1500, 150, 20])?;
    let dims = Dims {
        src_vocab: src.len(),
        tgt_vocab: tgt.len(),
        d_emb: 16,
        d_hid: 32,
    };
    let cfg = TrainConfig {
        epochs: 5,
        learning_rate: 0.003,
        lr_decay: 0.8,
        ..TrainConfig::default()
    };
    let params = train(
        &ModelParams::init_uniform(dims, 0.1, 2)?,
        &train_set,
        &valid_set,
        &cfg,
    )?
    .params;

    // pick the test sentence where NPAD gains the most over greedy
    let mut best = None;
    for pair in &test_set {
        let model = SourceModel::new(&params, &pair.source)?;
        let limits = DecodeLimits::for_source(pair.source.len());
        let greedy = greedy_decode(&model, &mut NoiseSource::Silent, limits)?.best;
        let cfg = NpadConfig::new(12, 0.5, InnerDecoder::Greedy, 99, limits)?;
        let out = npad_decode(&model, &cfg)?;
        let gain = out.selected().rescored_logp - greedy.logp;
        if best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
            best = Some((gain, pair.clone(), out));
        }
    }
    let (gain, pair, out) = best.expect("non-empty test set");
    println!("source     {}", src.decode_tokens(&pair.source)?);
    println!("reference  {}\n", tgt.decode_tokens(&pair.target)?);
    println!("chain  σ0    noisy logp  rescored  output");
    for c in &out.chains {
        let mark = if c.chain_index == out.best { "*" } else { " " };
        println!(
            "{mark}{:4}  {:.1}  {:10.3}  {:8.3}  {}",
            c.chain_index,
            c.sigma0_effective,
            c.noisy_logp,
            c.rescored_logp,
            tgt.decode_tokens(c.tokens())?
        );
    }
    println!("\nchain 0 is the noiseless greedy run; NPAD gained {gain:.3} nats over it");
    Ok(())
}

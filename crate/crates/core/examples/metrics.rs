//! Corpus BLEU and sentence-level NLL on hand-made data.
//!
//!     cargo run --example metrics

use npad::eval::{corpus_bleu, mean_nll, mean_nll_per_token, BleuConfig, EvalRecord};

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn main() -> npad::Result<()> {
    let refs = vec![words("the cat sat on the mat"), words("a b c d e")];
    let hyps = vec![words("the cat sat on a mat"), words("a b c d")];
    let plain = corpus_bleu(&hyps, &refs, BleuConfig::default())?;
    let smoothed = corpus_bleu(
        &hyps,
        &refs,
        BleuConfig {
            max_n: 4,
            smoothing: true,
        },
    )?;
    println!("BLEU {plain:.4} (smoothed {smoothed:.4})");
    println!(
        "BLEU of a corpus against itself: {}",
        corpus_bleu(&refs, &refs, BleuConfig::default())?
    );
    let short = corpus_bleu(
        &[words("a b c d")],
        &[words("a b c d e")],
        BleuConfig::default(),
    )?;
    println!("brevity penalty only: {short:.6} = exp(-0.25)");

    let records: Vec<EvalRecord> = [(-3.0, 4), (-5.5, 6)]
        .into_iter()
        .enumerate()
        .map(|(i, (logp, len))| EvalRecord {
            input_id: i,
            strategy: "greedy".into(),
            tokens: vec![3; len],
            rescored_logp: logp,
            reference: vec![3; len],
        })
        .collect();
    println!(
        "mean NLL {:.3} per sentence, {:.3} per token",
        mean_nll(&records)?,
        mean_nll_per_token(&records)?
    );
    Ok(())
}

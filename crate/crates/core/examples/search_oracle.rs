//! Compare greedy, beam and NPAD against exhaustive search on tiny random
//! models, where the exact optimum is computable.
//!
//!     cargo run --release --example search_oracle

use npad::decode::{
    beam_decode, exact_decode, greedy_decode, DecodeLimits, NoiseSource, SourceModel,
};
use npad::model::{Dims, ModelParams};
use npad::npad::{npad_decode, InnerDecoder, NpadConfig};

fn main() -> npad::Result<()> {
    let dims = Dims {
        src_vocab: 6,
        tgt_vocab: 6,
        d_emb: 3,
        d_hid: 4,
    };
    let limits = DecodeLimits::new(5)?;
    let source = [3, 5, 4];
    let (mut models, mut greedy_hits, mut beam_hits, mut npad_hits) = (0, 0, 0, 0);
    for seed in 0..300 {
        let params = ModelParams::random(dims, 1.5, seed)?;
        let model = SourceModel::new(&params, &source)?;
        let exact = exact_decode(&model, limits)?.best;
        let greedy = greedy_decode(&model, &mut NoiseSource::Silent, limits)?.best;
        if !greedy.complete {
            continue;
        }
        models += 1;
        let beam = beam_decode(&model, 3, &mut NoiseSource::Silent, limits)?.best;
        let cfg = NpadConfig::new(20, 0.5, InnerDecoder::Greedy, seed, limits)?;
        let npad = npad_decode(&model, &cfg)?;
        let hit = |tokens: &[usize]| tokens == exact.tokens.as_slice();
        greedy_hits += hit(&greedy.tokens) as usize;
        beam_hits += hit(&beam.tokens) as usize;
        npad_hits += hit(npad.selected().tokens()) as usize;
        if !hit(&greedy.tokens) && models <= 40 {
            println!(
                "model {seed:3}: exact {:?} ({:.3})  greedy {:?} ({:.3})  NPAD {:?} ({:.3})",
                exact.tokens,
                exact.logp,
                greedy.tokens,
                greedy.logp,
                npad.selected().tokens(),
                npad.selected().rescored_logp
            );
        }
    }
    println!("\nfound the exact optimum on {models} models:");
    println!("  greedy          {greedy_hits}");
    println!("  beam K=3        {beam_hits}");
    println!("  NPAD 20 chains  {npad_hits}");
    Ok(())
}

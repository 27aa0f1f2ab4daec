use tracelab::grammar::{build_grammar, generate_dataset, Variant, Vocabulary};
use tracelab::spcn::*;

fn main() {
    let vocab = Vocabulary::full();
    let dims = [16usize, 12, 8, 8];
    let mut fwd = init_hierarchy(&dims, vocab.len(), 31).unwrap();
    let g = build_grammar(Variant::A, 31);
    let corpus = generate_dataset(&g, 200, 31);
    'outer: for (si, s) in corpus.iter().enumerate() {
        fwd.reset_sentence_state();
        for (ti, tok) in s.tokens.iter().enumerate() {
            let id = vocab.id(tok).unwrap() as usize;
            fwd.process_token(id, true);
            for l in 0..4 {
                let xmax = fwd.state(l).x.iter().cloned().fold(0.0f32, f32::max);
                let wmax = fwd.weights(l).w_fb_t.as_ref().map(|w| w.data().iter().cloned().fold(f32::MIN, f32::max)).unwrap_or(0.0);
                if si < 8 && ti < 3 || xmax > 10.0 {
                    println!("s{si} t{ti} L{l}: xmax={xmax:.3e} wfb_max={wmax:.3e}");
                }
                if !xmax.is_finite() { println!("EXPLODED s{si} t{ti} L{l}"); break 'outer; }
            }
        }
    }
}

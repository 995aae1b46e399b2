//! Trains the desk-scale model on the synthetic corpus and prints held-out
//! metrics plus a few reconstructions.
//!
//! cargo run --release --example train_toy

use latent_sentiment::data::generate_toy_corpus;
use latent_sentiment::encoder::EncoderConfig;
use latent_sentiment::pipeline::{build_model, train_all, TrainPlan};

fn main() -> latent_sentiment::Result<()> {
    let corpus = generate_toy_corpus(7, 28);
    let (train, test) = corpus.split(7);
    let plan = TrainPlan::default();
    let mut model = build_model(&train, EncoderConfig::desk(), 30, None, plan.seed)?;
    println!("vocabulary {} tokens, {} train / {} test", model.vocab.len(), train.len(), test.len());

    let outcome = train_all(&mut model, &train, &test, &plan, 7, &mut |e| println!("{e}"))?;
    println!("train {:?}", outcome.train_metrics);
    println!("test  {:?}", outcome.test_metrics);

    for ex in test.examples.iter().take(5) {
        let z = model.encode_text(&ex.text)?.z;
        println!("{:>40}  ->  {}", ex.text, model.decode_text(&z)?);
    }
    Ok(())
}

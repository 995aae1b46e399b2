//! Flips the sentiment of toy sentences with a trained model.
//!
//! cargo run --release --example transform [checkpoint]
//!
//! Trains and caches a model in the temp directory when no checkpoint exists.

mod common;

use latent_sentiment::transfer::{TransferSettings, Transformer};

fn main() -> latent_sentiment::Result<()> {
    let model = common::load_or_train(&common::checkpoint_arg())?;
    let (train, test) = common::toy_split();
    let transformer = Transformer::new(&model, &train, TransferSettings::default())?;
    for ex in &test.examples {
        let t = transformer.transform(&ex.text)?;
        println!("original:      {}", t.original);
        println!("regenerated:   {}", t.reconstruction);
        println!("{} -> {}:    {}", t.from.short_name(), t.to.short_name(), t.transformed);
        println!("               {}\n", t.report);
    }
    Ok(())
}

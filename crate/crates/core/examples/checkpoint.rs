//! Saves an untrained model to a checkpoint, reads it back and checks that
//! the round trip is exact.
//!
//! cargo run --example checkpoint

use latent_sentiment::data::{checkpoint_bytes, generate_toy_corpus, load_checkpoint, save_checkpoint, Checkpoint, TrainingMeta};
use latent_sentiment::encoder::EncoderConfig;
use latent_sentiment::numerics::ParamTensors;
use latent_sentiment::pipeline::build_model;
use latent_sentiment::traversal::TraversalDefaults;

fn main() -> latent_sentiment::Result<()> {
    let (train, _) = generate_toy_corpus(1, 10).split(1);
    let model = build_model(&train, EncoderConfig::desk(), 30, None, 1)?;
    let ckpt = Checkpoint {
        model,
        traversal: TraversalDefaults::default(),
        meta: TrainingMeta::default(),
    };
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &ckpt)?;
    let back = load_checkpoint(&path)?;
    println!(
        "{} bytes: vocabulary {}, encoder {} params, decoder {} params",
        std::fs::metadata(&path)?.len(),
        back.model.vocab.len(),
        back.model.encoder.num_params(),
        back.model.decoder.num_params()
    );
    println!("identical after reload: {}", checkpoint_bytes(&back)? == checkpoint_bytes(&ckpt)?);
    Ok(())
}

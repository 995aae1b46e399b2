//! Shared by the examples that need a trained model.

use std::path::Path;

use latent_sentiment::data::{generate_toy_corpus, load_checkpoint, save_checkpoint, Checkpoint, Corpus};
use latent_sentiment::encoder::EncoderConfig;
use latent_sentiment::pipeline::{build_model, train_all, TrainPlan};
use latent_sentiment::traversal::TraversalDefaults;
use latent_sentiment::Model;

pub const SPLIT_SEED: u64 = 7;

/// The toy corpus split the way `train_toy` splits it.
pub fn toy_split() -> (Corpus, Corpus) {
    generate_toy_corpus(7, 28).split(SPLIT_SEED)
}

/// Loads `path`, or trains the default desk-scale model and caches it there.
pub fn load_or_train(path: &Path) -> latent_sentiment::Result<Model> {
    if path.exists() {
        return Ok(load_checkpoint(path)?.model);
    }
    eprintln!("no checkpoint at {}, training one (about half a minute in release mode)", path.display());
    let (train, test) = toy_split();
    let plan = TrainPlan::default();
    let mut model = build_model(&train, EncoderConfig::desk(), 30, None, plan.seed)?;
    let outcome = train_all(&mut model, &train, &test, &plan, SPLIT_SEED, &mut |_| {})?;
    save_checkpoint(
        path,
        &Checkpoint {
            model: model.clone(),
            traversal: TraversalDefaults::default(),
            meta: outcome.meta,
        },
    )?;
    Ok(model)
}

pub fn checkpoint_arg() -> std::path::PathBuf {
    std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("latent-sentiment-toy.ckpt"))
}

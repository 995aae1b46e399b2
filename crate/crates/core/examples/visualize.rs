//! PCA coordinates of toy encodings plus traversed neg/movie and pos/phone
//! vectors, as CSV on stdout.
//!
//! cargo run --release --example visualize [checkpoint] > pca.csv

mod common;

use latent_sentiment::data::{Sentiment, TOPICS};
use latent_sentiment::pca::write_pca_csv;
use latent_sentiment::transfer::{visualize, TransferSettings, Transformer, TraverseCell};

fn main() -> latent_sentiment::Result<()> {
    let model = common::load_or_train(&common::checkpoint_arg())?;
    let (train, _) = common::toy_split();
    let transformer = Transformer::new(&model, &train, TransferSettings::default())?;
    let cells = [
        TraverseCell {
            label: Sentiment::Negative,
            topic: "movie".into(),
        },
        TraverseCell {
            label: Sentiment::Positive,
            topic: "phone".into(),
        },
    ];
    let rows = visualize(&model, &train, &TOPICS, &cells, &transformer)?;
    write_pca_csv(std::io::stdout().lock(), &rows)
}

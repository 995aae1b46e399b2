//! Sentence-level sentiment transfer: encode, traverse, decode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Corpus, Sentiment};
use crate::error::{Error, Result};
use crate::kernels::{median_heuristic_sigma, KernelConfig, SampleSet};
use crate::model::Model;
use crate::numerics::Vector;
use crate::optim::BfgsConfig;
use crate::pca::{fit_pca, project, PcaRow, PointKind};
use crate::traversal::{
    sample_points, traversal_report, traverse, TraversalDefaults, TraversalProblem, TraversalReport,
    TraversalResult,
};

#[derive(Clone, Debug, PartialEq)]
pub struct TransferSettings {
    pub lambda: f64,
    /// `None`: median heuristic over source ∪ target.
    pub sigma: Option<f64>,
    pub set_size: usize,
    /// Group reference vectors by gold label instead of the encoder's prediction.
    pub use_gold_labels: bool,
    /// Force the target sentiment; by default the predicted one is flipped.
    pub direction: Option<Sentiment>,
    /// Seed for subsampling the reference sets.
    pub seed: u64,
    pub bfgs: BfgsConfig,
}

impl Default for TransferSettings {
    fn default() -> Self {
        Self::from_defaults(TraversalDefaults::default())
    }
}

impl TransferSettings {
    pub fn from_defaults(d: TraversalDefaults) -> Self {
        Self {
            lambda: d.lambda,
            sigma: d.sigma,
            set_size: d.set_size,
            use_gold_labels: false,
            direction: None,
            seed: 0,
            bfgs: BfgsConfig::default(),
        }
    }
}

/// A corpus sentence with its encoding.
#[derive(Clone, Debug)]
pub struct EncodedExample {
    pub text: String,
    pub label: Sentiment,
    pub predicted: Sentiment,
    pub z: Vector,
}

pub fn encode_corpus(model: &Model, corpus: &Corpus) -> Result<Vec<EncodedExample>> {
    corpus
        .examples
        .iter()
        .map(|ex| {
            let enc = model.encode_tokens(&ex.tokens)?;
            Ok(EncodedExample {
                text: ex.text.clone(),
                label: ex.label,
                predicted: enc.predicted_label,
                z: enc.z,
            })
        })
        .collect()
}

struct DirectionSets {
    source: SampleSet,
    target: SampleSet,
    kernel: KernelConfig,
}

/// Holds the sampled source/target sets for both directions so that every
/// sentence is moved against the same reference distributions.
pub struct Transformer<'m> {
    model: &'m Model,
    settings: TransferSettings,
    /// Indexed by source sentiment.
    sets: [Option<DirectionSets>; 2],
}

/// One transformed sentence: the original, its reconstruction from `z`, and
/// the sentence decoded from the traversed `z*`.
#[derive(Clone, Debug)]
pub struct SentenceTransfer {
    pub original: String,
    pub reconstruction: String,
    pub transformed: String,
    pub from: Sentiment,
    pub to: Sentiment,
    pub traversal: TraversalResult,
    pub report: TraversalReport,
}

impl<'m> Transformer<'m> {
    /// `reference` supplies the source and target vectors, normally the
    /// training split.
    pub fn new(model: &'m Model, reference: &Corpus, settings: TransferSettings) -> Result<Self> {
        if settings.set_size == 0 {
            return Err(Error::Input("set size must be at least 1".into()));
        }
        if let Some(s) = settings.sigma {
            KernelConfig::new(s)?;
        }
        settings.bfgs.validate()?;
        let encoded = encode_corpus(model, reference)?;
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let mut by_label: [Vec<Vector>; 2] = [Vec::new(), Vec::new()];
        for e in &encoded {
            let label = if settings.use_gold_labels { e.label } else { e.predicted };
            by_label[label.index()].push(e.z.clone());
        }
        let sampled = [
            sample_points(&by_label[0], settings.set_size, &mut rng),
            sample_points(&by_label[1], settings.set_size, &mut rng),
        ];
        let make = |from: Sentiment| -> Result<Option<DirectionSets>> {
            let (s, t) = (&sampled[from.index()], &sampled[from.opposite().index()]);
            if s.is_empty() || t.is_empty() {
                return Ok(None);
            }
            let source = SampleSet::new(s.clone())?;
            let target = SampleSet::new(t.clone())?;
            let sigma = match settings.sigma {
                Some(s) => s,
                None => median_heuristic_sigma(&source.union(&target)?)?,
            };
            Ok(Some(DirectionSets {
                source,
                target,
                kernel: KernelConfig::new(sigma)?,
            }))
        };
        let sets = [make(Sentiment::Negative)?, make(Sentiment::Positive)?];
        Ok(Self {
            model,
            settings,
            sets,
        })
    }

    pub fn settings(&self) -> &TransferSettings {
        &self.settings
    }

    /// Bandwidth used when moving away from `from`.
    pub fn sigma(&self, from: Sentiment) -> Option<f64> {
        self.sets[from.index()].as_ref().map(|d| d.kernel.sigma())
    }

    /// Moves `z` from the `from` distribution toward the opposite one.
    pub fn traverse_z(&self, z: &Vector, from: Sentiment) -> Result<TraversalResult> {
        let sets = self.sets[from.index()].as_ref().ok_or_else(|| {
            Error::Input(format!(
                "the reference corpus has no vectors on one side of the {} -> {} direction",
                from.short_name(),
                from.opposite().short_name()
            ))
        })?;
        let problem = TraversalProblem::new(
            z.clone(),
            sets.source.clone(),
            sets.target.clone(),
            self.settings.lambda,
            sets.kernel,
        )?;
        traverse(&problem, &self.settings.bfgs)
    }

    pub fn transform(&self, text: &str) -> Result<SentenceTransfer> {
        let enc = self.model.encode_text(text)?;
        let to = self
            .settings
            .direction
            .unwrap_or_else(|| enc.predicted_label.opposite());
        let from = to.opposite();
        let traversal = self.traverse_z(&enc.z, from)?;
        Ok(SentenceTransfer {
            original: text.to_string(),
            reconstruction: self.model.decode_text(&enc.z)?,
            transformed: self.model.decode_text(&traversal.z_star)?,
            from,
            to,
            report: traversal_report(&traversal),
            traversal,
        })
    }
}

/// First word of `topics` that occurs in the sentence.
pub fn topic_of<'a>(tokens: &[String], topics: &[&'a str]) -> Option<&'a str> {
    topics.iter().copied().find(|t| tokens.iter().any(|w| w == t))
}

/// A (sentiment, topic) cell whose members are traversed for plotting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraverseCell {
    pub label: Sentiment,
    pub topic: String,
}

/// PCA rows for every topic-bearing example of `corpus`, plus original and
/// traversed rows for the members of `cells`. The projection is fitted on
/// the example vectors only.
pub fn visualize(
    model: &Model,
    corpus: &Corpus,
    topics: &[&str],
    cells: &[TraverseCell],
    transformer: &Transformer<'_>,
) -> Result<Vec<PcaRow>> {
    let mut examples = Vec::new();
    for ex in &corpus.examples {
        if let Some(topic) = topic_of(&ex.tokens, topics) {
            examples.push((ex.label, topic, model.encode_tokens(&ex.tokens)?.z));
        }
    }
    if examples.len() < 3 {
        return Err(Error::Input(format!(
            "the topic filter {topics:?} matches {} sentences; at least 3 are needed",
            examples.len()
        )));
    }
    let points: Vec<Vector> = examples.iter().map(|(_, _, z)| z.clone()).collect();
    let projection = fit_pca(&SampleSet::new(points.clone())?)?;
    let coords = project(&points, &projection)?;

    let mut rows: Vec<PcaRow> = examples
        .iter()
        .zip(&coords)
        .map(|((label, topic, _), &(pc1, pc2))| PcaRow {
            pc1,
            pc2,
            label: label.short_name().into(),
            topic: (*topic).into(),
            kind: PointKind::Example,
        })
        .collect();
    for cell in cells {
        for (label, topic, z) in &examples {
            if *label != cell.label || *topic != cell.topic {
                continue;
            }
            let result = transformer.traverse_z(z, *label)?;
            let moved = project(&[z.clone(), result.z_star], &projection)?;
            for ((pc1, pc2), kind) in moved.into_iter().zip([PointKind::Original, PointKind::Traversed]) {
                rows.push(PcaRow {
                    pc1,
                    pc2,
                    label: label.short_name().into(),
                    topic: (*topic).into(),
                    kind,
                });
            }
        }
    }
    Ok(rows)
}

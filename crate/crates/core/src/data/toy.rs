//! Synthetic two-topic, two-sentiment corpus.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::{Corpus, Example, Sentiment};

pub const TOPICS: [&str; 2] = ["movie", "phone"];

const POSITIVE_ADJ: [&str; 6] = ["good", "great", "excellent", "wonderful", "amazing", "fantastic"];
const NEGATIVE_ADJ: [&str; 6] = ["bad", "terrible", "awful", "boring", "poor", "horrible"];
const POSITIVE_VERB: [&str; 3] = ["love", "like", "enjoy"];
const NEGATIVE_VERB: [&str; 3] = ["hate", "dislike", "regret"];

pub const POSITIVE_LEXICON: [&str; 9] = [
    "good", "great", "excellent", "wonderful", "amazing", "fantastic", "love", "like", "enjoy",
];
pub const NEGATIVE_LEXICON: [&str; 9] = [
    "bad", "terrible", "awful", "boring", "poor", "horrible", "hate", "dislike", "regret",
];

const INTENSIFIERS: [&str; 4] = ["really", "very", "truly", "so"];
const MOVIE_ASPECTS: [&str; 4] = ["plot", "acting", "story", "ending"];
const PHONE_ASPECTS: [&str; 4] = ["battery", "screen", "camera", "charger"];

// Placeholders: A aspect, S adjective, S2 second adjective, V verb,
// I intensifier. Each topic has its own phrasing so that the topics differ
// in more than the topic word, as reviews of unrelated products do.
const MOVIE_TEMPLATES: [&str; 5] = [
    "this movie is I S",
    "the A of this movie was S",
    "i V this movie",
    "what a S movie",
    "the movie was S and S2",
];
const PHONE_TEMPLATES: [&str; 5] = [
    "i V this S phone",
    "my phone has a S A",
    "the A on my new phone is S",
    "this phone is a S buy",
    "my new phone feels I S",
];

/// `n_per_cell` templated sentences for each (topic, sentiment) pair,
/// deterministic in `seed`. Cells are emitted in the order
/// movie/neg, movie/pos, phone/neg, phone/pos.
pub fn generate_toy_corpus(seed: u64, n_per_cell: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(4 * n_per_cell);
    for topic in TOPICS {
        let (aspects, templates) = if topic == "movie" {
            (&MOVIE_ASPECTS, &MOVIE_TEMPLATES)
        } else {
            (&PHONE_ASPECTS, &PHONE_TEMPLATES)
        };
        for label in [Sentiment::Negative, Sentiment::Positive] {
            let (adjs, verbs) = match label {
                Sentiment::Positive => (&POSITIVE_ADJ, &POSITIVE_VERB),
                Sentiment::Negative => (&NEGATIVE_ADJ, &NEGATIVE_VERB),
            };
            for _ in 0..n_per_cell {
                let template = templates[rng.random_range(0..templates.len())];
                let first = *adjs.choose(&mut rng).expect("nonempty");
                let second = loop {
                    let a = *adjs.choose(&mut rng).expect("nonempty");
                    if a != first {
                        break a;
                    }
                };
                let words: Vec<&str> = template
                    .split(' ')
                    .map(|slot| match slot {
                        "A" => *aspects.choose(&mut rng).expect("nonempty"),
                        "S" => first,
                        "S2" => second,
                        "V" => *verbs.choose(&mut rng).expect("nonempty"),
                        "I" => *INTENSIFIERS.choose(&mut rng).expect("nonempty"),
                        w => w,
                    })
                    .collect();
                examples.push(Example::new(words.join(" "), label));
            }
        }
    }
    Corpus::new(examples)
}

//! The joint encoder/decoder model and its shared embedding table.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{pad_and_index, tokenize, Vocabulary, PAD};
use crate::decoder::{decode_greedy, DecoderConfig, DecoderParams};
use crate::encoder::{encode, EncoderConfig, EncoderParams, Encoding};
use crate::error::{shape, Error, Result};
use crate::numerics::{Matrix, ParamTensors};

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub vocab: Vocabulary,
    /// `V × d` word embeddings; encoder input and (when tied) decoder input.
    pub embeddings: Matrix,
    pub encoder_config: EncoderConfig,
    pub decoder_config: DecoderConfig,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

impl Model {
    /// Fresh parameters around the given vocabulary and embeddings. The
    /// decoder state size is the encoder's feature dimension.
    pub fn init(
        vocab: Vocabulary,
        embeddings: Matrix,
        encoder_config: EncoderConfig,
        max_len: usize,
        tie_input_embeddings: bool,
        seed: u64,
    ) -> Result<Self> {
        encoder_config.validate()?;
        let decoder_config = DecoderConfig {
            max_len,
            tie_input_embeddings,
            ..DecoderConfig::new(encoder_config.feature_dim(), encoder_config.embed_dim)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderParams::init(&encoder_config, &mut rng);
        let decoder = DecoderParams::init(&decoder_config, vocab.len(), &mut rng);
        let model = Self {
            vocab,
            embeddings,
            encoder_config,
            decoder_config,
            encoder,
            decoder,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder_config.validate()?;
        self.decoder_config.validate()?;
        if self.embeddings.shape() != (self.vocab.len(), self.encoder_config.embed_dim) {
            return Err(shape(format!(
                "embedding table is {:?}, expected {:?}",
                self.embeddings.shape(),
                (self.vocab.len(), self.encoder_config.embed_dim)
            )));
        }
        if self.decoder_config.state_dim != self.encoder_config.feature_dim() {
            return Err(shape("decoder state size must equal the encoder feature dimension"));
        }
        if self.decoder_config.max_len < self.encoder_config.max_height() {
            return Err(Error::Input(
                "max_len must be at least the tallest filter height".into(),
            ));
        }
        if self.embeddings.row(PAD).iter().any(|v| *v != 0.0) {
            return Err(Error::Input("PAD embedding must be the zero vector".into()));
        }
        self.encoder.check(&self.encoder_config)?;
        self.decoder.check(&self.decoder_config, &self.embeddings)?;
        if !(self.embeddings.is_finite()
            && self.encoder.flatten().iter().all(|v| v.is_finite())
            && self.decoder.flatten().iter().all(|v| v.is_finite()))
        {
            return Err(Error::Input("model contains non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn max_len(&self) -> usize {
        self.decoder_config.max_len
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder_config.feature_dim()
    }

    pub fn encode_tokens(&self, tokens: &[String]) -> Result<Encoding> {
        let ids = pad_and_index(tokens, &self.vocab, self.max_len()).encoder;
        encode(&ids, &self.embeddings, &self.encoder, &self.encoder_config)
    }

    pub fn encode_text(&self, text: &str) -> Result<Encoding> {
        self.encode_tokens(&tokenize(text))
    }

    pub fn decode_ids(&self, z: &[f64]) -> Result<Vec<usize>> {
        decode_greedy(z, &self.decoder, &self.embeddings, &self.decoder_config, &self.vocab)
    }

    /// Greedy decoding rendered as space-separated words.
    pub fn decode_text(&self, z: &[f64]) -> Result<String> {
        Ok(self.vocab.render(&self.decode_ids(z)?))
    }
}

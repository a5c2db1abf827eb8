//! Recurrent encoders: the LSTM cell, word and sentence encoders for both
//! sides of the model, and pretrained vector loading.

mod lstm;
mod pretrained;
mod stack;

pub use lstm::{lstm_step, run_lstm, run_lstm_batch, LstmParams, LstmState, LstmTrace};
pub use pretrained::{load_pretrained_vectors, PretrainedVectors};
pub use stack::{
    average_encode, encode_code_titles, encode_sentence, encode_word, EncoderStack, EncoderVariant, SideTrace,
    StackDims, Vocabs,
};

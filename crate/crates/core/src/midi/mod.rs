//! MIDI parsing, event tokenization, and token-file serialization.

mod smf;
mod token_io;
mod tokenize;
mod vocab;

pub use smf::{parse_midi, write_midi, ParsedMidi};
pub use token_io::{
    read_tokens_binary, read_tokens_jsonl, write_tokens_binary, write_tokens_jsonl,
};
pub use tokenize::{detokenize, tokenize, Detokenized};
pub use vocab::{Event, TokenVocab, MAX_TIME_SHIFT_STEPS, PAD, SECONDS_PER_STEP, TOKEN_END, VOCAB_SIZE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("malformed SMF at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("unsupported SMF feature: {0}")]
    Unsupported(String),
    #[error("token index {0} outside vocabulary")]
    BadToken(u16),
    #[error("invalid note: {0}")]
    BadNote(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("token file malformed: {0}")]
    TokenFile(String),
}

/// A timed note. Times are seconds from the start of the piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidiNote {
    pub pitch: u8,
    pub onset: f64,
    pub offset: f64,
    pub velocity: u8,
}

impl MidiNote {
    pub fn new(pitch: u8, onset: f64, offset: f64, velocity: u8) -> Result<Self, MidiError> {
        if pitch > 127 {
            return Err(MidiError::BadNote(format!("pitch {pitch} > 127")));
        }
        if velocity > 127 {
            return Err(MidiError::BadNote(format!("velocity {velocity} > 127")));
        }
        if !(onset.is_finite() && offset.is_finite()) || onset < 0.0 || offset <= onset {
            return Err(MidiError::BadNote(format!(
                "bad times onset={onset} offset={offset}"
            )));
        }
        Ok(Self { pitch, onset, offset, velocity })
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }
}

/// Sort notes by (onset, pitch); the canonical piece order.
pub fn sort_notes(notes: &mut [MidiNote]) {
    notes.sort_by(|a, b| {
        a.onset
            .partial_cmp(&b.onset)
            .unwrap()
            .then(a.pitch.cmp(&b.pitch))
            .then(a.offset.partial_cmp(&b.offset).unwrap())
    });
}

/// A piece as vocabulary indices plus an identifier for provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub source_id: String,
    pub tokens: Vec<u16>,
}

impl TokenSequence {
    pub fn new(source_id: impl Into<String>, tokens: Vec<u16>) -> Self {
        Self { source_id: source_id.into(), tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

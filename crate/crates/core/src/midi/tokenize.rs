//! Conversion between timed notes and the event-token vocabulary.
//!
//! Time is quantized to 10 ms steps (nearest, ties up). Gaps longer than one
//! second decompose greedily into maximal TIME_SHIFT(100) tokens. A VELOCITY
//! token is emitted only when the 4-wide velocity bin changes. At equal
//! timestamps NOTE_OFFs precede NOTE_ONs, ascending pitch within each group.

use super::vocab::{velocity_bin, velocity_from_bin, Event, TokenVocab, MAX_TIME_SHIFT_STEPS, SECONDS_PER_STEP};
use super::{MidiError, MidiNote, TokenSequence};

/// Quantize seconds to 10 ms steps, nearest with ties rounding up.
fn to_steps(seconds: f64) -> u64 {
    (seconds * 100.0 + 0.5).floor() as u64
}

/// Encode sorted notes as a token sequence ending with TOKEN_END.
pub fn tokenize(notes: &[MidiNote], source_id: impl Into<String>) -> TokenSequence {
    let vocab = TokenVocab;
    #[derive(Clone, Copy)]
    struct Ev {
        step: u64,
        on: bool,
        pitch: u8,
        velocity: u8,
    }
    let mut events = Vec::with_capacity(notes.len() * 2);
    for note in notes {
        let on = to_steps(note.onset);
        // a note never collapses to zero length
        let off = to_steps(note.offset).max(on + 1);
        events.push(Ev { step: on, on: true, pitch: note.pitch, velocity: note.velocity });
        events.push(Ev { step: off, on: false, pitch: note.pitch, velocity: 0 });
    }
    // offs before velocity/on tokens at the same step, ascending pitch within groups
    events.sort_by_key(|e| (e.step, e.on, e.pitch));

    let mut tokens = Vec::with_capacity(events.len() * 2 + 1);
    let mut clock: u64 = 0;
    let mut last_bin: Option<u8> = None;
    for e in &events {
        let mut gap = e.step - clock;
        while gap > 0 {
            let chunk = gap.min(MAX_TIME_SHIFT_STEPS as u64);
            tokens.push(vocab.time_shift(chunk as u16));
            gap -= chunk;
        }
        clock = e.step;
        if e.on {
            let bin = velocity_bin(e.velocity);
            if last_bin != Some(bin) {
                tokens.push(vocab.velocity(bin));
                last_bin = Some(bin);
            }
            tokens.push(vocab.note_on(e.pitch));
        } else {
            tokens.push(vocab.note_off(e.pitch));
        }
    }
    tokens.push(vocab.encode(Event::TokenEnd));
    TokenSequence::new(source_id, tokens)
}

/// Output of [`detokenize`]: notes plus non-fatal anomaly counts.
#[derive(Debug, Clone, Default)]
pub struct Detokenized {
    pub notes: Vec<MidiNote>,
    /// NOTE_OFF tokens with no open note; skipped.
    pub dangling_note_offs: u32,
}

/// Decode a token sequence back into notes. NOTE_ONs left open at the end of
/// the stream are closed at the final clock time.
pub fn detokenize(seq: &TokenSequence) -> Result<Detokenized, MidiError> {
    let vocab = TokenVocab;
    let mut clock_steps: u64 = 0;
    let mut velocity: u8 = 64;
    // open[pitch] = (onset_steps, velocity)
    let mut open: Vec<Option<(u64, u8)>> = vec![None; 128];
    let mut notes = Vec::new();
    let mut dangling = 0u32;

    let close = |pitch: usize, onset: u64, vel: u8, now: u64, notes: &mut Vec<MidiNote>| {
        let off = now.max(onset + 1);
        notes.push(MidiNote {
            pitch: pitch as u8,
            onset: onset as f64 * SECONDS_PER_STEP,
            offset: off as f64 * SECONDS_PER_STEP,
            velocity: vel,
        });
    };

    for &token in &seq.tokens {
        match vocab.decode(token)? {
            Event::Pad => {}
            Event::TimeShift(steps) => clock_steps += steps as u64,
            Event::Velocity(bin) => velocity = velocity_from_bin(bin),
            Event::NoteOn(pitch) => {
                if let Some((onset, vel)) = open[pitch as usize].take() {
                    close(pitch as usize, onset, vel, clock_steps, &mut notes);
                }
                open[pitch as usize] = Some((clock_steps, velocity));
            }
            Event::NoteOff(pitch) => match open[pitch as usize].take() {
                Some((onset, vel)) => close(pitch as usize, onset, vel, clock_steps, &mut notes),
                None => dangling += 1,
            },
            Event::TokenEnd => break,
        }
    }
    for pitch in 0..128 {
        if let Some((onset, vel)) = open[pitch].take() {
            close(pitch, onset, vel, clock_steps, &mut notes);
        }
    }
    super::sort_notes(&mut notes);
    Ok(Detokenized { notes, dangling_note_offs: dangling })
}

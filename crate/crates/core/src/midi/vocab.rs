//! Fixed event vocabulary.
//!
//! Index layout (size 390):
//!   0           PAD
//!   1..=128     NOTE_ON pitch 0..=127
//!   129..=256   NOTE_OFF pitch 0..=127
//!   257..=356   TIME_SHIFT of 1..=100 steps (10 ms each)
//!   357..=388   VELOCITY bin 0..=31 (bin = velocity / 4)
//!   389         TOKEN_END

use super::MidiError;

pub const PAD: u16 = 0;
pub const TOKEN_END: u16 = 389;
pub const VOCAB_SIZE: u16 = 390;
pub const MAX_TIME_SHIFT_STEPS: u16 = 100;
pub const SECONDS_PER_STEP: f64 = 0.01;

const NOTE_ON_BASE: u16 = 1;
const NOTE_OFF_BASE: u16 = 129;
const TIME_SHIFT_BASE: u16 = 257;
const VELOCITY_BASE: u16 = 357;

/// One decoded vocabulary entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Pad,
    NoteOn(u8),
    NoteOff(u8),
    /// 1..=100 steps of 10 ms.
    TimeShift(u16),
    /// 0..=31.
    Velocity(u8),
    TokenEnd,
}

/// The fixed vocabulary. Stateless; all methods are total over valid inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenVocab;

impl TokenVocab {
    pub fn size(&self) -> u16 {
        VOCAB_SIZE
    }

    pub fn note_on(&self, pitch: u8) -> u16 {
        debug_assert!(pitch <= 127);
        NOTE_ON_BASE + pitch as u16
    }

    pub fn note_off(&self, pitch: u8) -> u16 {
        debug_assert!(pitch <= 127);
        NOTE_OFF_BASE + pitch as u16
    }

    pub fn time_shift(&self, steps: u16) -> u16 {
        debug_assert!((1..=MAX_TIME_SHIFT_STEPS).contains(&steps));
        TIME_SHIFT_BASE + steps - 1
    }

    pub fn velocity(&self, bin: u8) -> u16 {
        debug_assert!(bin <= 31);
        VELOCITY_BASE + bin as u16
    }

    /// Decode an index; every index in [0, 389] maps to exactly one event kind.
    pub fn decode(&self, index: u16) -> Result<Event, MidiError> {
        match index {
            PAD => Ok(Event::Pad),
            i if (NOTE_ON_BASE..NOTE_OFF_BASE).contains(&i) => {
                Ok(Event::NoteOn((i - NOTE_ON_BASE) as u8))
            }
            i if (NOTE_OFF_BASE..TIME_SHIFT_BASE).contains(&i) => {
                Ok(Event::NoteOff((i - NOTE_OFF_BASE) as u8))
            }
            i if (TIME_SHIFT_BASE..VELOCITY_BASE).contains(&i) => {
                Ok(Event::TimeShift(i - TIME_SHIFT_BASE + 1))
            }
            i if (VELOCITY_BASE..TOKEN_END).contains(&i) => {
                Ok(Event::Velocity((i - VELOCITY_BASE) as u8))
            }
            TOKEN_END => Ok(Event::TokenEnd),
            other => Err(MidiError::BadToken(other)),
        }
    }

    pub fn encode(&self, event: Event) -> u16 {
        match event {
            Event::Pad => PAD,
            Event::NoteOn(p) => self.note_on(p),
            Event::NoteOff(p) => self.note_off(p),
            Event::TimeShift(s) => self.time_shift(s),
            Event::Velocity(b) => self.velocity(b),
            Event::TokenEnd => TOKEN_END,
        }
    }
}

/// Velocity bin for a raw MIDI velocity (width-4 bins over 0..=127).
pub fn velocity_bin(velocity: u8) -> u8 {
    velocity / 4
}

/// Representative velocity for a bin (bin midpoint).
pub fn velocity_from_bin(bin: u8) -> u8 {
    bin * 4 + 2
}

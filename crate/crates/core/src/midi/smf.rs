//! Standard MIDI File reader/writer.
//!
//! Reads format 0 and 1 files, resolves the tempo map to seconds, applies
//! sustain-pedal (CC64) extension to note durations, and discards the pedal
//! events afterwards. Writes format-0 files at a fixed division where one
//! tick is exactly one millisecond.

use std::collections::HashMap;

use super::{sort_notes, MidiError, MidiNote};

/// Output of [`parse_midi`]: notes plus non-fatal anomaly counts.
#[derive(Debug, Clone, Default)]
pub struct ParsedMidi {
    pub notes: Vec<MidiNote>,
    /// Note-off events with no matching note-on; ignored.
    pub dangling_note_offs: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RawKind {
    NoteOn { pitch: u8, velocity: u8 },
    NoteOff { pitch: u8 },
    Sustain { down: bool },
}

#[derive(Debug, Clone, Copy)]
struct RawEvent {
    tick: u64,
    /// Tie-break so same-tick events keep file order within a track.
    order: u64,
    kind: RawKind,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> MidiError {
        MidiError::Parse { offset: self.pos, reason: reason.into() }
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        let b = *self.data.get(self.pos).ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(b)
    }

    fn peek(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    fn bytes(&mut self, len: usize) -> Result<&'a [u8], MidiError> {
        if self.pos + len > self.data.len() {
            return Err(self.err(format!("expected {len} bytes")));
        }
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u16_be(&mut self) -> Result<u16, MidiError> {
        let b = self.bytes(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32_be(&mut self) -> Result<u32, MidiError> {
        let b = self.bytes(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most 4 bytes.
    fn vlq(&mut self) -> Result<u32, MidiError> {
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(self.err("variable-length quantity longer than 4 bytes"))
    }
}

/// Ticks-to-seconds conversion over a set of tempo changes.
struct TempoMap {
    /// (tick, microseconds per quarter note), sorted by tick, starting at 0.
    changes: Vec<(u64, u32)>,
    ticks_per_quarter: f64,
}

impl TempoMap {
    fn new(mut changes: Vec<(u64, u32)>, ticks_per_quarter: u16) -> Self {
        changes.sort_by_key(|&(tick, _)| tick);
        if changes.first().map(|&(t, _)| t != 0).unwrap_or(true) {
            changes.insert(0, (0, 500_000)); // SMF default: 120 bpm
        }
        Self { changes, ticks_per_quarter: ticks_per_quarter as f64 }
    }

    fn seconds_at(&self, tick: u64) -> f64 {
        let mut seconds = 0.0;
        let mut prev_tick = 0u64;
        let mut tempo = self.changes[0].1;
        for &(change_tick, change_tempo) in &self.changes {
            if change_tick >= tick {
                break;
            }
            seconds += (change_tick - prev_tick) as f64 * tempo as f64 * 1e-6 / self.ticks_per_quarter;
            prev_tick = change_tick;
            tempo = change_tempo;
        }
        seconds + (tick - prev_tick) as f64 * tempo as f64 * 1e-6 / self.ticks_per_quarter
    }
}

/// Parse an SMF byte buffer into pedal-resolved notes sorted by (onset, pitch).
pub fn parse_midi(bytes: &[u8]) -> Result<ParsedMidi, MidiError> {
    let mut cur = Cursor { data: bytes, pos: 0 };
    if cur.bytes(4)? != b"MThd" {
        return Err(MidiError::Parse { offset: 0, reason: "missing MThd header".into() });
    }
    let header_len = cur.u32_be()?;
    if header_len < 6 {
        return Err(cur.err(format!("header length {header_len} < 6")));
    }
    let format = cur.u16_be()?;
    if format > 1 {
        return Err(MidiError::Unsupported(format!("SMF format {format}")));
    }
    let n_tracks = cur.u16_be()?;
    let division = cur.u16_be()?;
    if division & 0x8000 != 0 {
        return Err(MidiError::Unsupported("SMPTE time division".into()));
    }
    if division == 0 {
        return Err(cur.err("zero time division"));
    }
    cur.bytes(header_len as usize - 6)?;

    let mut events: Vec<RawEvent> = Vec::new();
    let mut tempo_changes: Vec<(u64, u32)> = Vec::new();
    let mut order: u64 = 0;

    for _ in 0..n_tracks {
        if cur.bytes(4)? != b"MTrk" {
            return Err(MidiError::Parse { offset: cur.pos - 4, reason: "missing MTrk chunk".into() });
        }
        let track_len = cur.u32_be()? as usize;
        let track_end = cur.pos + track_len;
        if track_end > bytes.len() {
            return Err(cur.err(format!("track length {track_len} overruns file")));
        }
        let mut tick: u64 = 0;
        let mut running_status: Option<u8> = None;
        while cur.pos < track_end {
            tick += cur.vlq()? as u64;
            let status = match cur.peek() {
                Some(b) if b >= 0x80 => {
                    cur.pos += 1;
                    if b < 0xf0 {
                        running_status = Some(b);
                    }
                    b
                }
                Some(_) => running_status.ok_or_else(|| cur.err("data byte without running status"))?,
                None => return Err(cur.err("truncated track")),
            };
            order += 1;
            match status & 0xf0 {
                0x80 => {
                    let pitch = cur.u8()? & 0x7f;
                    let _velocity = cur.u8()?;
                    events.push(RawEvent { tick, order, kind: RawKind::NoteOff { pitch } });
                }
                0x90 => {
                    let pitch = cur.u8()? & 0x7f;
                    let velocity = cur.u8()? & 0x7f;
                    let kind = if velocity == 0 {
                        RawKind::NoteOff { pitch }
                    } else {
                        RawKind::NoteOn { pitch, velocity }
                    };
                    events.push(RawEvent { tick, order, kind });
                }
                0xa0 => {
                    cur.bytes(2)?;
                }
                0xb0 => {
                    let controller = cur.u8()?;
                    let value = cur.u8()?;
                    if controller == 64 {
                        events.push(RawEvent {
                            tick,
                            order,
                            kind: RawKind::Sustain { down: value >= 64 },
                        });
                    }
                }
                0xc0 | 0xd0 => {
                    cur.u8()?;
                }
                0xe0 => {
                    cur.bytes(2)?;
                }
                0xf0 => match status {
                    0xff => {
                        let meta_type = cur.u8()?;
                        let len = cur.vlq()? as usize;
                        let payload = cur.bytes(len)?;
                        if meta_type == 0x51 {
                            if len != 3 {
                                return Err(cur.err("tempo meta event must be 3 bytes"));
                            }
                            let us = ((payload[0] as u32) << 16)
                                | ((payload[1] as u32) << 8)
                                | payload[2] as u32;
                            tempo_changes.push((tick, us));
                        }
                        // 0x2f end-of-track carried by track_len; nothing to do
                    }
                    0xf0 | 0xf7 => {
                        let len = cur.vlq()? as usize;
                        cur.bytes(len)?;
                    }
                    other => {
                        return Err(cur.err(format!("unexpected status byte {other:#04x}")));
                    }
                },
                _ => unreachable!("status bytes are >= 0x80"),
            }
        }
        if cur.pos != track_end {
            return Err(cur.err("track events overran declared track length"));
        }
    }

    let tempo = TempoMap::new(tempo_changes, division);
    // CC before note-offs before note-ons at equal ticks, file order within kinds
    events.sort_by_key(|e| {
        let rank = match e.kind {
            RawKind::Sustain { .. } => 0u8,
            RawKind::NoteOff { .. } => 1,
            RawKind::NoteOn { .. } => 2,
        };
        (e.tick, rank, e.order)
    });

    Ok(resolve_pedal(&events, &tempo))
}

/// Replay the event stream, extending note offsets to the pedal release when
/// the pedal is down at the nominal note-off, and truncating a still-sounding
/// note when its pitch is re-struck.
fn resolve_pedal(events: &[RawEvent], tempo: &TempoMap) -> ParsedMidi {
    struct Sounding {
        onset: f64,
        velocity: u8,
    }
    let mut pedal_down = false;
    // key still held
    let mut active: HashMap<u8, Sounding> = HashMap::new();
    // key released, pedal holding the note open
    let mut sustained: HashMap<u8, Sounding> = HashMap::new();
    let mut notes: Vec<MidiNote> = Vec::new();
    let mut dangling = 0u32;
    let mut last_time = 0.0f64;

    let mut emit = |s: Sounding, pitch: u8, offset: f64| {
        let offset = if offset > s.onset { offset } else { s.onset + 1e-9 };
        notes.push(MidiNote { pitch, onset: s.onset, offset, velocity: s.velocity });
    };

    for event in events {
        let time = tempo.seconds_at(event.tick);
        last_time = last_time.max(time);
        match event.kind {
            RawKind::Sustain { down } => {
                if !down && pedal_down {
                    for (pitch, s) in sustained.drain() {
                        emit(s, pitch, time);
                    }
                }
                pedal_down = down;
            }
            RawKind::NoteOn { pitch, velocity } => {
                // re-strike truncates whatever instance is still sounding
                if let Some(s) = active.remove(&pitch) {
                    emit(s, pitch, time);
                } else if let Some(s) = sustained.remove(&pitch) {
                    emit(s, pitch, time);
                }
                active.insert(pitch, Sounding { onset: time, velocity });
            }
            RawKind::NoteOff { pitch } => match active.remove(&pitch) {
                Some(s) => {
                    if pedal_down {
                        sustained.insert(pitch, s);
                    } else {
                        emit(s, pitch, time);
                    }
                }
                None => {
                    if !sustained.contains_key(&pitch) {
                        dangling += 1;
                    }
                    // a second off for a sustained pitch changes nothing
                }
            },
        }
    }
    // close anything still sounding at the end of the event stream
    for (pitch, s) in active.drain() {
        let end = last_time.max(s.onset);
        emit(s, pitch, end);
    }
    for (pitch, s) in sustained.drain() {
        let end = last_time.max(s.onset);
        emit(s, pitch, end);
    }

    sort_notes(&mut notes);
    ParsedMidi { notes, dangling_note_offs: dangling }
}

const WRITE_DIVISION: u16 = 500;
const WRITE_TEMPO_US: u32 = 500_000; // with division 500: 1 tick = 1 ms

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut stack = [0u8; 4];
    let mut i = 0;
    loop {
        stack[i] = (value & 0x7f) as u8;
        value >>= 7;
        i += 1;
        if value == 0 {
            break;
        }
    }
    while i > 1 {
        i -= 1;
        out.push(stack[i] | 0x80);
    }
    out.push(stack[0]);
}

/// Serialize notes as a single-track format-0 SMF. One tick is one
/// millisecond, so a parse of the output reproduces the input within 1 tick.
pub fn write_midi(notes: &[MidiNote]) -> Result<Vec<u8>, MidiError> {
    #[derive(Clone, Copy)]
    struct Out {
        tick: u64,
        off_first: bool,
        pitch: u8,
        on: bool,
        velocity: u8,
    }
    let mut events = Vec::with_capacity(notes.len() * 2);
    for note in notes {
        if note.pitch > 127 || note.velocity > 127 || !(note.offset > note.onset) {
            return Err(MidiError::BadNote(format!("{note:?}")));
        }
        let on_tick = (note.onset * 1000.0).round() as u64;
        let off_tick = ((note.offset * 1000.0).round() as u64).max(on_tick + 1);
        events.push(Out { tick: on_tick, off_first: false, pitch: note.pitch, on: true, velocity: note.velocity });
        events.push(Out { tick: off_tick, off_first: true, pitch: note.pitch, on: false, velocity: 64 });
    }
    // offs before ons at equal ticks, ascending pitch within each group
    events.sort_by_key(|e| (e.tick, !e.off_first, e.pitch));

    let mut track: Vec<u8> = Vec::new();
    // tempo meta at tick 0
    push_vlq(&mut track, 0);
    track.extend_from_slice(&[0xff, 0x51, 0x03]);
    track.extend_from_slice(&WRITE_TEMPO_US.to_be_bytes()[1..]);
    let mut prev_tick = 0u64;
    for e in &events {
        let delta = e.tick - prev_tick;
        if delta > 0x0fff_ffff {
            return Err(MidiError::BadNote("note time exceeds representable delta".into()));
        }
        push_vlq(&mut track, delta as u32);
        prev_tick = e.tick;
        if e.on {
            track.extend_from_slice(&[0x90, e.pitch, e.velocity.max(1)]);
        } else {
            track.extend_from_slice(&[0x80, e.pitch, 64]);
        }
    }
    // end of track
    push_vlq(&mut track, 0);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(14 + 8 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&WRITE_DIVISION.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

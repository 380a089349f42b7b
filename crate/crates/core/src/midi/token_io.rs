//! Token-sequence serialization.
//!
//! Two formats:
//! - JSON lines: one `{"source_id": ..., "tokens": [...]}` object per line.
//! - Compact binary: per record, little-endian
//!   `[u16 id_len][id utf-8][u32 token_count][u16 token]*`.

use std::io::{BufRead, Read, Write};

use super::{MidiError, TokenSequence};

pub fn write_tokens_jsonl<W: Write>(mut w: W, seqs: &[TokenSequence]) -> Result<(), MidiError> {
    for seq in seqs {
        let line = serde_json::to_string(seq)
            .map_err(|e| MidiError::TokenFile(format!("serialize: {e}")))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_tokens_jsonl<R: BufRead>(r: R) -> Result<Vec<TokenSequence>, MidiError> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: TokenSequence = serde_json::from_str(&line)
            .map_err(|e| MidiError::TokenFile(format!("line {}: {e}", lineno + 1)))?;
        out.push(seq);
    }
    Ok(out)
}

pub fn write_tokens_binary<W: Write>(mut w: W, seqs: &[TokenSequence]) -> Result<(), MidiError> {
    for seq in seqs {
        let id = seq.source_id.as_bytes();
        if id.len() > u16::MAX as usize {
            return Err(MidiError::TokenFile("source_id longer than 65535 bytes".into()));
        }
        w.write_all(&(id.len() as u16).to_le_bytes())?;
        w.write_all(id)?;
        w.write_all(&(seq.tokens.len() as u32).to_le_bytes())?;
        for &t in &seq.tokens {
            w.write_all(&t.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tokens_binary<R: Read>(mut r: R) -> Result<Vec<TokenSequence>, MidiError> {
    let mut out = Vec::new();
    loop {
        let mut len_buf = [0u8; 2];
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let id_len = u16::from_le_bytes(len_buf) as usize;
        let mut id_bytes = vec![0u8; id_len];
        r.read_exact(&mut id_bytes)?;
        let source_id = String::from_utf8(id_bytes)
            .map_err(|_| MidiError::TokenFile("source_id is not valid utf-8".into()))?;
        let mut count_buf = [0u8; 4];
        r.read_exact(&mut count_buf)?;
        let count = u32::from_le_bytes(count_buf) as usize;
        let mut raw = vec![0u8; count * 2];
        r.read_exact(&mut raw)?;
        let tokens = raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        out.push(TokenSequence { source_id, tokens });
    }
    Ok(out)
}

//! Vocabulary and merge files.
//!
//! Both are UTF-8, one tab-separated record per line, behind a version
//! header. Decodings are escaped so whitespace survives verbatim:
//! `\\` backslash, `\s` space, `\t` tab, `\n` newline, `\r` carriage
//! return, `\u{XXXX}` any other whitespace character.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{Codec, CodecError, Merge, TokenId};

pub const VOCAB_HEADER: &str = "#charsurp-vocab\tv1";
pub const MERGES_HEADER: &str = "#charsurp-merges\tv1";

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c if c.is_whitespace() => {
                let _ = write!(out, "\\u{{{:X}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            if c.is_whitespace() {
                return Err(format!("unescaped whitespace {c:?}"));
            }
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('s') => out.push(' '),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('u') => {
                if chars.next() != Some('{') {
                    return Err("malformed \\u escape".into());
                }
                let hex: String = chars.by_ref().take_while(|&c| c != '}').collect();
                let ch = u32::from_str_radix(&hex, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| format!("bad code point {hex:?}"))?;
                out.push(ch);
            }
            other => return Err(format!("unknown escape \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

pub fn write_vocab<W: Write>(codec: &Codec, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{VOCAB_HEADER}")?;
    for (id, d) in codec.decodings().iter().enumerate() {
        writeln!(w, "{id}\t{}", escape(d))?;
    }
    Ok(())
}

pub fn write_merges<W: Write>(codec: &Codec, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MERGES_HEADER}")?;
    for m in codec.merges() {
        writeln!(w, "{}\t{}", m.left, m.right)?;
    }
    Ok(())
}

fn records<R: BufRead>(r: R, header: &str) -> Result<Vec<(usize, Vec<String>)>, CodecError> {
    let mut out = Vec::new();
    let mut lines = r.lines();
    let first = lines.next().transpose()?;
    if first.as_deref() != Some(header) {
        return Err(CodecError::Format { line: 1, msg: format!("expected header {header:?}") });
    }
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        out.push((i + 2, line.split('\t').map(str::to_string).collect()));
    }
    Ok(out)
}

pub fn read_vocab<R: BufRead>(r: R) -> Result<Vec<String>, CodecError> {
    let mut decodings = Vec::new();
    for (line, fields) in records(r, VOCAB_HEADER)? {
        let err = |msg: String| CodecError::Format { line, msg };
        if fields.len() != 2 {
            return Err(err(format!("expected 2 fields, found {}", fields.len())));
        }
        let id: usize = fields[0].parse().map_err(|_| err(format!("bad id {:?}", fields[0])))?;
        if id != decodings.len() {
            return Err(err(format!("id {id} out of sequence, expected {}", decodings.len())));
        }
        decodings.push(unescape(&fields[1]).map_err(err)?);
    }
    Ok(decodings)
}

pub fn read_merges<R: BufRead>(r: R) -> Result<Vec<Merge>, CodecError> {
    let mut merges = Vec::new();
    for (line, fields) in records(r, MERGES_HEADER)? {
        let err = |msg: String| CodecError::Format { line, msg };
        if fields.len() != 2 {
            return Err(err(format!("expected 2 fields, found {}", fields.len())));
        }
        let parse = |s: &str| s.parse::<TokenId>().map_err(|_| err(format!("bad token id {s:?}")));
        merges.push(Merge { left: parse(&fields[0])?, right: parse(&fields[1])? });
    }
    Ok(merges)
}

impl Codec {
    pub fn load<R1: BufRead, R2: BufRead>(vocab: R1, merges: R2) -> Result<Self, CodecError> {
        Codec::new(read_vocab(vocab)?, read_merges(merges)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::train_bpe;
    use proptest::prelude::*;

    #[test]
    fn files_round_trip_bit_exactly() {
        let codec = train_bpe(&["a b\tc\\d a b\u{3000}x", "a b a b\\d"], 20).unwrap();
        let (mut v, mut m) = (Vec::new(), Vec::new());
        write_vocab(&codec, &mut v).unwrap();
        write_merges(&codec, &mut m).unwrap();
        let back = Codec::load(&v[..], &m[..]).unwrap();
        assert_eq!(back, codec);
        let (mut v2, mut m2) = (Vec::new(), Vec::new());
        write_vocab(&back, &mut v2).unwrap();
        write_merges(&back, &mut m2).unwrap();
        assert_eq!(v, v2);
        assert_eq!(m, m2);
        assert!(String::from_utf8(v).unwrap().contains("\\s"));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_vocab(&b"0\ta\n"[..]).is_err());
        assert!(read_vocab(format!("{VOCAB_HEADER}\n1\ta\n").as_bytes()).is_err());
        assert!(read_vocab(format!("{VOCAB_HEADER}\n0\ta b\n").as_bytes()).is_err());
        assert!(read_merges(format!("{MERGES_HEADER}\n0\n").as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn escape_inverts(s in "\\PC*|[ \t\n\r\\\\\u{a0}\u{2028}]*") {
            prop_assert_eq!(unescape(&escape(&s)).unwrap(), s);
        }
    }
}

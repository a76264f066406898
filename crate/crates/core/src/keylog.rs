//! Keystroke log ingestion.
//!
//! Logs are CSV with the header
//! `key,press_ms,release_ms,virtual_code,scan_code,caps,shift`, one row per
//! keypress, times in milliseconds from the start of the session.
//!
//! The `key` column holds a letter (either case), `SPACE`, `ENTER`, or any
//! other label (which becomes [`KeyLabel::Other`]). When it is empty the
//! Windows virtual-key code decides: `0x41..=0x5A` are letters, `0x20` is
//! space and `0x0D` is enter. Logs exported as .NET `TimeSpan` dumps convert
//! by taking `TotalMilliseconds` of the press and release stamps relative to
//! the first press of the session and copying the remaining columns as-is.

use std::fmt;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::key::{KeyPair, Letter};
use crate::model::Observation;

pub const HEADER: [&str; 7] = [
    "key",
    "press_ms",
    "release_ms",
    "virtual_code",
    "scan_code",
    "caps",
    "shift",
];

#[derive(Debug, Error)]
pub enum KeylogError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("bad header, expected `{}`", HEADER.join(","))]
    BadHeader,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyLabel {
    Letter(Letter),
    Space,
    Enter,
    Other,
}

impl KeyLabel {
    pub fn parse(label: &str, virtual_code: u32) -> Self {
        let label = label.trim();
        if label.is_empty() {
            return Self::from_virtual_code(virtual_code);
        }
        let mut chars = label.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if let Some(l) = Letter::new(c) {
                return KeyLabel::Letter(l);
            }
            if c == ' ' {
                return KeyLabel::Space;
            }
        }
        match label.to_ascii_uppercase().as_str() {
            "SPACE" => KeyLabel::Space,
            "ENTER" | "RETURN" => KeyLabel::Enter,
            _ => KeyLabel::Other,
        }
    }

    pub fn from_virtual_code(vk: u32) -> Self {
        match vk {
            0x41..=0x5A => KeyLabel::Letter(Letter::ALL[(vk - 0x41) as usize]),
            0x20 => KeyLabel::Space,
            0x0D => KeyLabel::Enter,
            _ => KeyLabel::Other,
        }
    }

    pub fn letter(self) -> Option<Letter> {
        match self {
            KeyLabel::Letter(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for KeyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyLabel::Letter(l) => write!(f, "{l}"),
            KeyLabel::Space => f.write_str("SPACE"),
            KeyLabel::Enter => f.write_str("ENTER"),
            KeyLabel::Other => f.write_str("OTHER"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeystrokeEvent {
    pub key: KeyLabel,
    pub press_ms: f64,
    pub release_ms: f64,
    pub virtual_code: u32,
    pub scan_code: u32,
    pub caps: bool,
    pub shift: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypingSession {
    pub session_id: String,
    events: Vec<KeystrokeEvent>,
}

impl TypingSession {
    /// Sorts `events` by press time (stable for equal stamps).
    pub fn new(session_id: impl Into<String>, mut events: Vec<KeystrokeEvent>) -> Self {
        events.sort_by(|a, b| a.press_ms.total_cmp(&b.press_ms));
        Self {
            session_id: session_id.into(),
            events,
        }
    }

    pub fn events(&self) -> &[KeystrokeEvent] {
        &self.events
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" | "" => Some(false),
        _ => None,
    }
}

fn parse_code(s: &str) -> Option<u32> {
    let s = s.trim();
    if s.is_empty() {
        Some(0)
    } else if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u32::from_str_radix(hex, 16).ok()
    } else {
        s.parse().ok()
    }
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<KeystrokeEvent, KeylogError> {
    let bad = |reason: String| KeylogError::MalformedRow { line, reason };
    if record.len() != HEADER.len() {
        return Err(bad(format!(
            "expected {} columns, found {}",
            HEADER.len(),
            record.len()
        )));
    }
    let time = |i: usize| -> Result<f64, KeylogError> {
        let v: f64 = record[i]
            .trim()
            .parse()
            .map_err(|_| bad(format!("{}: not a number: {:?}", HEADER[i], &record[i])))?;
        if !v.is_finite() || v < 0.0 {
            return Err(bad(format!("{} must be a non-negative time", HEADER[i])));
        }
        Ok(v)
    };
    let press_ms = time(1)?;
    let release_ms = time(2)?;
    if release_ms < press_ms {
        return Err(bad(format!(
            "release_ms {release_ms} precedes press_ms {press_ms}"
        )));
    }
    let code = |i: usize| {
        parse_code(&record[i])
            .ok_or_else(|| bad(format!("{}: bad code {:?}", HEADER[i], &record[i])))
    };
    let flag = |i: usize| {
        parse_bool(&record[i])
            .ok_or_else(|| bad(format!("{}: bad flag {:?}", HEADER[i], &record[i])))
    };
    let virtual_code = code(3)?;
    Ok(KeystrokeEvent {
        key: KeyLabel::parse(&record[0], virtual_code),
        press_ms,
        release_ms,
        virtual_code,
        scan_code: code(4)?,
        caps: flag(5)?,
        shift: flag(6)?,
    })
}

/// Reads a keystroke log from any CSV source.
pub fn read_keylog<R: io::Read>(
    reader: R,
    session_id: impl Into<String>,
) -> Result<TypingSession, KeylogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let header_ok = header.len() == HEADER.len()
        && header
            .iter()
            .zip(HEADER)
            .all(|(got, want)| got.trim().eq_ignore_ascii_case(want));
    if !header_ok {
        return Err(KeylogError::BadHeader);
    }
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        events.push(parse_row(&record, line)?);
    }
    Ok(TypingSession::new(session_id, events))
}

/// Reads a keystroke log file; the session id is the file stem.
pub fn parse_keylog(path: impl AsRef<Path>) -> Result<TypingSession, KeylogError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| KeylogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_keylog(io::BufReader::new(file), id)
}

pub fn write_keylog<W: io::Write>(out: W, session: &TypingSession) -> Result<(), KeylogError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for e in &session.events {
        w.write_record([
            e.key.to_string(),
            e.press_ms.to_string(),
            e.release_ms.to_string(),
            e.virtual_code.to_string(),
            e.scan_code.to_string(),
            e.caps.to_string(),
            e.shift.to_string(),
        ])?;
    }
    w.flush().map_err(|source| KeylogError::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

/// Press-to-press intervals between adjacent letters of the same word.
///
/// Any non-letter key resets adjacency, and pairs whose presses share a
/// timestamp are dropped.
pub fn session_to_pairs(session: &TypingSession) -> Vec<Observation> {
    let mut out = Vec::new();
    let mut prev: Option<(Letter, f64)> = None;
    for e in &session.events {
        match e.key.letter() {
            Some(l) => {
                if let Some((p, t)) = prev {
                    let delta_ms = e.press_ms - t;
                    if delta_ms > 0.0 {
                        out.push(Observation {
                            pair: KeyPair::new(p, l),
                            delta_ms,
                        });
                    }
                }
                prev = Some((l, e.press_ms));
            }
            None => prev = None,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HDR: &str = "key,press_ms,release_ms,virtual_code,scan_code,caps,shift\n";

    fn read(body: &str) -> Result<TypingSession, KeylogError> {
        read_keylog(format!("{HDR}{body}").as_bytes(), "t")
    }

    fn letters(s: &TypingSession) -> String {
        s.events()
            .iter()
            .map(|e| e.key.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn parses_rows_in_order() {
        let s = read("t,0,80,84,20,0,0\no,300,390,79,24,0,0\np,700,805,80,25,0,0\n").unwrap();
        assert_eq!(s.events().len(), 3);
        assert_eq!(letters(&s), "t o p");
        assert_eq!(s.events()[2].release_ms, 805.0);
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let s = read("p,700,805,0,0,0,0\nt,0,80,0,0,0,0\no,300,390,0,0,0,0\n").unwrap();
        assert_eq!(letters(&s), "t o p");
    }

    #[test]
    fn release_before_press_is_malformed() {
        let err = read("t,0,80,0,0,0,0\no,300,290,0,0,0,0\n").unwrap_err();
        match err {
            KeylogError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_columns_and_numbers() {
        assert!(matches!(
            read("t,0,80\n"),
            Err(KeylogError::MalformedRow { .. })
        ));
        assert!(matches!(
            read("t,zero,80,0,0,0,0\n"),
            Err(KeylogError::MalformedRow { .. })
        ));
        assert!(matches!(
            read_keylog("a,b,c\n".as_bytes(), "x"),
            Err(KeylogError::BadHeader)
        ));
    }

    #[test]
    fn labels_and_codes() {
        let s = read(
            "T,0,1,0,0,0,1\nSPACE,5,6,0,0,0,0\n,10,11,0x41,0,1,0\n,20,21,32,0,0,0\nenter,30,31,0,0,0,0\n1,40,41,49,0,0,0\n",
        )
        .unwrap();
        assert_eq!(letters(&s), "t SPACE a SPACE ENTER OTHER");
        assert!(s.events()[0].shift);
        assert!(s.events()[2].caps);
    }

    #[test]
    fn crlf_accepted() {
        let s = read_keylog(
            "key,press_ms,release_ms,virtual_code,scan_code,caps,shift\r\nt,0,80,0,0,false,false\r\n"
                .as_bytes(),
            "x",
        )
        .unwrap();
        assert_eq!(s.events().len(), 1);
    }

    #[test]
    fn pairs_from_press_times() {
        let s = read("t,0,80,0,0,0,0\no,300,390,0,0,0,0\np,700,805,0,0,0,0\n").unwrap();
        let pairs = session_to_pairs(&s);
        let got: Vec<(String, f64)> = pairs
            .iter()
            .map(|o| (o.pair.to_string(), o.delta_ms))
            .collect();
        assert_eq!(got, vec![("to".into(), 300.0), ("op".into(), 400.0)]);
    }

    #[test]
    fn pairs_edge_cases() {
        let s = read("t,0,80,0,0,0,0\n").unwrap();
        assert!(session_to_pairs(&s).is_empty());
        let s = read("t,0,80,0,0,0,0\nSPACE,200,250,0,0,0,0\no,500,580,0,0,0,0\n").unwrap();
        assert!(session_to_pairs(&s).is_empty());
    }

    #[test]
    fn write_then_read() {
        let s = read("t,0,80,84,20,0,1\nSPACE,200,250,32,57,0,0\no,500.5,580,79,24,1,0\n").unwrap();
        let mut buf = Vec::new();
        write_keylog(&mut buf, &s).unwrap();
        let back = read_keylog(buf.as_slice(), "t").unwrap();
        assert_eq!(back, s);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn label() -> impl Strategy<Value = String> {
            prop_oneof![
                8 => proptest::char::range('a', 'z').prop_map(|c| c.to_string()),
                1 => Just("SPACE".to_string()),
                1 => Just("OTHER".to_string()),
            ]
        }

        proptest! {
            #[test]
            fn pair_count_and_positivity(rows in proptest::collection::vec((label(), 0u32..5000), 0..40)) {
                let body: String = rows
                    .iter()
                    .map(|(k, t)| format!("{k},{t},{t},0,0,0,0\n"))
                    .collect();
                let s = read(&body).unwrap();
                let pairs = session_to_pairs(&s);
                let n_letters = s.events().iter().filter(|e| e.key.letter().is_some()).count();
                prop_assert!(pairs.len() <= n_letters.saturating_sub(1));
                prop_assert!(pairs.iter().all(|o| o.delta_ms > 0.0));
            }
        }
    }
}

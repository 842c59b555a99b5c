//! On-disk formats.
//!
//! - Sync string, text: header `QSYNC1 L N1 L1 lambda seed`, then `L` symbols
//!   from `{+, -}`, wrapped at 80 per line.
//! - Sync string, binary: header `QSYNC1B L N1 L1 lambda seed` and a newline,
//!   then `⌈L/8⌉` bytes, most significant bit first, bit `1` meaning `+1`.
//! - Timestamps: CSV `t_seconds,outcome`.
//! - Truth sidecar: CSV `t_seconds,emitted_index,is_background`, with an empty
//!   index for background counts.
//! - Ternary receiver string: CSV with a `symbol` header and one of `-1, 0, 1`
//!   per row.

use std::fmt::Write as _;

use qsync_core::channel::{Outcome, Truth};
use qsync_core::fast_xcorr::OffsetResult;
use qsync_core::period::PeriodEstimate;
use qsync_core::pipeline::WindowReport;
use qsync_core::sync_string::{StringParams, SyncString};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("expected {expected} symbols, found {found}")]
    Count { expected: usize, found: usize },
    #[error("invalid string: {0}")]
    String(#[from] qsync_core::sync_string::StringError),
}

const TEXT_MAGIC: &str = "QSYNC1";
const BINARY_MAGIC: &str = "QSYNC1B";
const LINE_WIDTH: usize = 80;

fn header(magic: &str, p: &StringParams) -> String {
    format!("{magic} {} {} {} {} {}\n", p.len, p.blocks, p.block_len, p.lambda, p.seed)
}

fn parse_header(line: &str, magic: &str) -> Result<StringParams, FormatError> {
    let bad = || FormatError::Header(line.to_string());
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != magic {
        return Err(bad());
    }
    let len: usize = fields[1].parse().map_err(|_| bad())?;
    let blocks: usize = fields[2].parse().map_err(|_| bad())?;
    let block_len: usize = fields[3].parse().map_err(|_| bad())?;
    let lambda: f64 = fields[4].parse().map_err(|_| bad())?;
    let seed: u64 = fields[5].parse().map_err(|_| bad())?;
    let params = StringParams::new(len, blocks, lambda, seed)?;
    if params.block_len != block_len {
        return Err(bad());
    }
    Ok(params)
}

pub fn string_to_text(s: &SyncString) -> String {
    let mut out = header(TEXT_MAGIC, s.params());
    for chunk in s.symbols().chunks(LINE_WIDTH) {
        out.extend(chunk.iter().map(|&v| if v > 0 { '+' } else { '-' }));
        out.push('\n');
    }
    out
}

pub fn string_from_text(text: &str) -> Result<SyncString, FormatError> {
    let mut lines = text.lines();
    let params = parse_header(lines.next().unwrap_or(""), TEXT_MAGIC)?;
    let mut symbols = Vec::with_capacity(params.len);
    for (i, line) in lines.enumerate() {
        for c in line.trim_end().chars() {
            symbols.push(match c {
                '+' => 1,
                '-' => -1,
                other => return Err(FormatError::Line { line: i + 2, msg: format!("unexpected {other:?}") }),
            });
        }
    }
    if symbols.len() != params.len {
        return Err(FormatError::Count { expected: params.len, found: symbols.len() });
    }
    Ok(SyncString::from_symbols(params, symbols)?)
}

pub fn string_to_binary(s: &SyncString) -> Vec<u8> {
    let mut out = header(BINARY_MAGIC, s.params()).into_bytes();
    for chunk in s.symbols().chunks(8) {
        let mut byte = 0u8;
        for (k, &v) in chunk.iter().enumerate() {
            if v > 0 {
                byte |= 0x80 >> k;
            }
        }
        out.push(byte);
    }
    out
}

pub fn string_from_binary(bytes: &[u8]) -> Result<SyncString, FormatError> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| FormatError::Header("missing newline".into()))?;
    let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| FormatError::Header("not utf-8".into()))?;
    let params = parse_header(line, BINARY_MAGIC)?;
    let body = &bytes[nl + 1..];
    let expected = params.len.div_ceil(8);
    if body.len() != expected {
        return Err(FormatError::Count { expected: params.len, found: body.len() * 8 });
    }
    let symbols = (0..params.len).map(|n| if body[n / 8] & (0x80 >> (n % 8)) != 0 { 1 } else { -1 }).collect();
    Ok(SyncString::from_symbols(params, symbols)?)
}

/// Reads either string format, chosen by the magic word.
pub fn string_from_bytes(bytes: &[u8]) -> Result<SyncString, FormatError> {
    if bytes.starts_with(format!("{BINARY_MAGIC} ").as_bytes()) {
        string_from_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| FormatError::Header("not utf-8".into()))?;
        string_from_text(text)
    }
}

/// Splits a CSV body into trimmed fields, skipping the header and blank lines.
fn rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>, FormatError> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("").trim();
    if first != header {
        return Err(FormatError::Header(format!("expected {header:?}, found {first:?}")));
    }
    Ok(lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 2, l.split(',').map(str::trim).collect())))
}

fn field<T: std::str::FromStr>(line: usize, value: &str, what: &str) -> Result<T, FormatError> {
    value.parse().map_err(|_| FormatError::Line { line, msg: format!("bad {what} {value:?}") })
}

pub fn timestamps_to_csv(ts: &[f64], outcomes: &[Outcome]) -> String {
    let mut out = String::from("t_seconds,outcome\n");
    for (t, o) in ts.iter().zip(outcomes) {
        let _ = writeln!(out, "{t:e},{}", o.as_str());
    }
    out
}

pub fn timestamps_from_csv(text: &str) -> Result<(Vec<f64>, Vec<Outcome>), FormatError> {
    let mut ts = Vec::new();
    let mut outcomes = Vec::new();
    for (line, f) in rows(text, "t_seconds,outcome")? {
        if f.len() != 2 {
            return Err(FormatError::Line { line, msg: "expected 2 fields".into() });
        }
        ts.push(field(line, f[0], "time")?);
        outcomes.push(f[1].parse().map_err(|msg| FormatError::Line { line, msg })?);
    }
    Ok((ts, outcomes))
}

pub fn truth_to_csv(ts: &[f64], truth: &[Truth]) -> String {
    let mut out = String::from("t_seconds,emitted_index,is_background\n");
    for (t, tr) in ts.iter().zip(truth) {
        let index = tr.emitted_index.map(|n| n.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{t:e},{index},{}", tr.is_background);
    }
    out
}

pub fn truth_from_csv(text: &str) -> Result<Vec<Truth>, FormatError> {
    let mut truth = Vec::new();
    for (line, f) in rows(text, "t_seconds,emitted_index,is_background")? {
        if f.len() != 3 {
            return Err(FormatError::Line { line, msg: "expected 3 fields".into() });
        }
        let emitted_index = if f[1].is_empty() { None } else { Some(field(line, f[1], "index")?) };
        truth.push(Truth { emitted_index, is_background: field(line, f[2], "flag")? });
    }
    Ok(truth)
}

pub fn ternary_to_csv(symbols: &[f64]) -> String {
    let mut out = String::from("symbol\n");
    for &v in symbols {
        let _ = writeln!(out, "{}", v as i8);
    }
    out
}

pub fn ternary_from_csv(text: &str) -> Result<Vec<f64>, FormatError> {
    rows(text, "symbol")?
        .map(|(line, f)| match f.first().copied() {
            Some("1") | Some("+1") => Ok(1.0),
            Some("0") => Ok(0.0),
            Some("-1") => Ok(-1.0),
            other => Err(FormatError::Line { line, msg: format!("bad symbol {other:?}") }),
        })
        .collect()
}

pub const OFFSET_HEADER: &str = "m_opt,u_opt,j_opt,peak,delta,success";

pub fn offset_row(r: &OffsetResult) -> String {
    format!("{},{},{},{},{},{}", r.m_opt, r.u_opt, r.j_opt, r.peak_value, r.distinguishability, r.success)
}

pub const PERIOD_HEADER: &str = "window,start,t_acq,detections,tau_b,tau_guess,slope,rms_tie,phase,ok";

pub fn period_row(window: usize, start: f64, t_acq: f64, detections: usize, e: &PeriodEstimate) -> String {
    format!(
        "{window},{start:e},{t_acq:e},{detections},{:e},{:e},{:e},{:e},{:e},{}",
        e.tau_b, e.tau_guess, e.slope, e.rms_tie, e.phase, e.ok
    )
}

pub fn windows_csv(windows: &[WindowReport]) -> String {
    let mut out = format!("{PERIOD_HEADER}\n");
    for (i, w) in windows.iter().enumerate() {
        out.push_str(&period_row(i, w.start, w.t_acq, w.detections, &w.estimate));
        out.push('\n');
    }
    out
}

/// `t_seconds,absolute_index`, empty index when unassigned.
pub fn alignment_csv(ts: &[f64], index: &[Option<i64>]) -> String {
    let mut out = String::from("t_seconds,absolute_index\n");
    for (t, n) in ts.iter().zip(index) {
        let _ = writeln!(out, "{t:e},{}", n.map(|n| n.to_string()).unwrap_or_default());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsync_core::sync_string::generate_string;

    fn sample() -> SyncString {
        generate_string(StringParams::new(203 * 5, 5, 0.7, 9).unwrap()).unwrap()
    }

    #[test]
    fn text_round_trip() {
        let s = sample();
        let text = string_to_text(&s);
        assert!(text.starts_with("QSYNC1 1015 5 203 0.7 9\n"));
        assert!(text.lines().skip(1).all(|l| l.len() <= 80));
        assert_eq!(string_from_text(&text).unwrap(), s);
        assert_eq!(string_from_bytes(text.as_bytes()).unwrap(), s);
    }

    #[test]
    fn binary_round_trip() {
        let s = sample();
        let bytes = string_to_binary(&s);
        assert_eq!(bytes.len(), "QSYNC1B 1015 5 203 0.7 9\n".len() + 127);
        assert_eq!(string_from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn binary_bit_order() {
        let params = StringParams::new(10, 2, 1.0, 0).unwrap();
        let s = SyncString::from_symbols(params, vec![1, -1, -1, -1, -1, -1, -1, 1, 1, -1]).unwrap();
        let bytes = string_to_binary(&s);
        assert_eq!(&bytes[bytes.len() - 2..], &[0b1000_0001, 0b1000_0000]);
    }

    #[test]
    fn rejects_malformed_strings() {
        assert!(matches!(string_from_text("QSYNC1 4 2 3 1 0\n++--\n"), Err(FormatError::Header(_))));
        assert_eq!(string_from_text("QSYNC1 4 2 2 1 0\n++-\n"), Err(FormatError::Count { expected: 4, found: 3 }));
        assert!(matches!(string_from_text("QSYNC1 4 2 2 1 0\n++x-\n"), Err(FormatError::Line { line: 2, .. })));
    }

    #[test]
    fn timestamp_and_truth_round_trip() {
        let ts = vec![1.5e-9, 2.000000000123e-3, 0.25];
        let outcomes = vec![Outcome::Z0, Outcome::X1, Outcome::Z1];
        let truth = vec![
            Truth { emitted_index: Some(0), is_background: false },
            Truth { emitted_index: None, is_background: true },
            Truth { emitted_index: Some(12_500_000), is_background: false },
        ];
        assert_eq!(timestamps_from_csv(&timestamps_to_csv(&ts, &outcomes)).unwrap(), (ts.clone(), outcomes));
        assert_eq!(truth_from_csv(&truth_to_csv(&ts, &truth)).unwrap(), truth);
        assert!(timestamps_from_csv("t,o\n").is_err());
    }

    #[test]
    fn ternary_round_trip() {
        let v = vec![1.0, 0.0, -1.0, 0.0];
        assert_eq!(ternary_from_csv(&ternary_to_csv(&v)).unwrap(), v);
        assert!(ternary_from_csv("symbol\n2\n").is_err());
    }
}

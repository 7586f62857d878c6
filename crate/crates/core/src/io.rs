//! Plain-text edge-list format for network series.
//!
//! ```text
//! n T
//! t i j
//! ...
//! ```
//!
//! The header gives the node count and the number of snapshots. Each body line
//! marks the undirected edge `{i, j}` as present at time `t`; indices are
//! 0-based and every absent pair is a non-edge. Blank lines and lines starting
//! with `#` are skipped when reading. Writing emits the header and then the
//! edges sorted by `(t, i, j)` with `i < j`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::segstats::NetSeries;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_fields<const N: usize>(text: &str, line: usize, what: &str) -> Result<[usize; N]> {
    let mut out = [0usize; N];
    let mut it = text.split_ascii_whitespace();
    for slot in out.iter_mut() {
        let tok = it
            .next()
            .ok_or_else(|| parse_err(line, format!("expected {N} fields in {what}")))?;
        *slot = tok
            .parse()
            .map_err(|_| parse_err(line, format!("'{tok}' is not a non-negative integer")))?;
    }
    if it.next().is_some() {
        return Err(parse_err(line, format!("expected {N} fields in {what}")));
    }
    Ok(out)
}

/// Reads a series from any reader. Line numbers in errors are 1-based.
pub fn read_series<R: Read>(reader: R) -> Result<NetSeries> {
    let mut header: Option<(usize, usize)> = None;
    let mut lists: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut seen: HashMap<(usize, usize, usize), usize> = HashMap::new();

    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let Some((n, t_len)) = header else {
            let [n, t_len] = parse_fields::<2>(text, lineno, "header 'n T'")?;
            if n < 2 {
                return Err(parse_err(lineno, format!("need at least 2 nodes, got {n}")));
            }
            if t_len == 0 {
                return Err(parse_err(lineno, "need at least one snapshot"));
            }
            if n > u32::MAX as usize {
                return Err(parse_err(lineno, "node count too large"));
            }
            header = Some((n, t_len));
            lists = vec![Vec::new(); t_len];
            continue;
        };
        let [t, i, j] = parse_fields::<3>(text, lineno, "edge line 't i j'")?;
        if t >= t_len {
            return Err(parse_err(lineno, format!("time {t} out of range [0, {t_len})")));
        }
        if i >= n || j >= n {
            return Err(parse_err(lineno, format!("node index out of range [0, {n}) in edge ({i}, {j})")));
        }
        if i == j {
            return Err(parse_err(lineno, format!("self-loop ({i}, {j}) at time {t}")));
        }
        let key = (t, i.min(j), i.max(j));
        if let Some(first) = seen.insert(key, lineno) {
            return Err(parse_err(
                lineno,
                format!("duplicate edge ({}, {}) at time {t}, first given on line {first}", key.1, key.2),
            ));
        }
        lists[t].push((key.1, key.2));
    }
    let (n, _) = header.ok_or_else(|| parse_err(1, "missing header 'n T'"))?;
    NetSeries::from_edge_lists(n, lists)
}

pub fn parse_series(path: impl AsRef<Path>) -> Result<NetSeries> {
    read_series(std::fs::File::open(path)?)
}

pub fn write_series<W: Write>(series: &NetSeries, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", series.n(), series.len())?;
    for t in 0..series.len() {
        for &(i, j) in series.edges(t) {
            writeln!(out, "{t} {i} {j}")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn series_to_string(series: &NetSeries) -> String {
    let mut buf = Vec::new();
    write_series(series, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

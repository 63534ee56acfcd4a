use std::fmt::Write as _;
use std::path::Path;

use crate::util::{read_to_string, write_string};
use crate::{Error, Result};

use super::kneser_ney::{Entry, KneserNeyLm};

const WHAT: &str = "ARPA";

pub fn to_arpa_string(lm: &KneserNeyLm) -> String {
    let entries = lm.sorted_entries();
    let counts = lm.ngram_counts();
    let mut out = String::from("\\data\\\n");
    for (n, c) in counts.iter().enumerate() {
        writeln!(out, "ngram {}={}", n + 1, c).unwrap();
    }
    let mut current = 0;
    for (words, e) in entries {
        if words.len() != current {
            current = words.len();
            write!(out, "\n\\{current}-grams:\n").unwrap();
        }
        write!(out, "{:.6}\t{}", e.log10_prob, words.join(" ")).unwrap();
        if let Some(bo) = e.log10_backoff {
            write!(out, "\t{bo:.6}").unwrap();
        }
        out.push('\n');
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn export_arpa(lm: &KneserNeyLm, path: &Path) -> Result<()> {
    write_string(path, &to_arpa_string(lm))
}

pub fn import_arpa(path: &Path) -> Result<KneserNeyLm> {
    parse_arpa(&read_to_string(path)?)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(WHAT, line, format!("bad number {s:?}")))
}

pub fn parse_arpa(text: &str) -> Result<KneserNeyLm> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    match lines.next() {
        Some((_, "\\data\\")) => {}
        Some((ln, _)) => return Err(Error::parse(WHAT, ln, "expected \\data\\")),
        None => return Err(Error::parse(WHAT, 0, "empty file")),
    }

    let mut declared: Vec<usize> = Vec::new();
    let data_line = lines.peek().map_or(0, |(ln, _)| *ln);
    while let Some((ln, l)) = lines.peek().copied() {
        let Some(rest) = l.strip_prefix("ngram ") else { break };
        lines.next();
        let (n, c) = rest
            .split_once('=')
            .ok_or_else(|| Error::parse(WHAT, ln, "expected ngram N=count"))?;
        let n: usize = n.trim().parse().map_err(|_| Error::parse(WHAT, ln, "bad order"))?;
        let c: usize = c.trim().parse().map_err(|_| Error::parse(WHAT, ln, "bad count"))?;
        if n != declared.len() + 1 {
            return Err(Error::parse(WHAT, ln, format!("expected order {}", declared.len() + 1)));
        }
        declared.push(c);
    }
    if declared.is_empty() {
        return Err(Error::parse(WHAT, data_line, "\\data\\ section declares no n-gram counts"));
    }
    let order = declared.len();

    let mut grams: Vec<(Vec<String>, Entry)> = Vec::new();
    for n in 1..=order {
        let (header_ln, header) = lines
            .next()
            .ok_or_else(|| Error::parse(WHAT, 0, format!("missing \\{n}-grams: section")))?;
        if header != format!("\\{n}-grams:") {
            return Err(Error::parse(WHAT, header_ln, format!("expected \\{n}-grams:, found {header:?}")));
        }
        let mut found = 0;
        while let Some((ln, l)) = lines.peek().copied() {
            if l.starts_with('\\') {
                break;
            }
            lines.next();
            let fields: Vec<&str> = if l.contains('\t') {
                l.split('\t').collect()
            } else {
                l.split_whitespace().collect()
            };
            let (prob, words, bow): (&str, Vec<String>, Option<&str>) = if l.contains('\t') {
                match fields.as_slice() {
                    [p, w] => (p, w.split_whitespace().map(str::to_string).collect(), None),
                    [p, w, b] => (p, w.split_whitespace().map(str::to_string).collect(), Some(b)),
                    _ => return Err(Error::parse(WHAT, ln, "expected 2 or 3 TAB-separated fields")),
                }
            } else if fields.len() == n + 1 {
                (fields[0], fields[1..].iter().map(|s| s.to_string()).collect(), None)
            } else if fields.len() == n + 2 {
                (fields[0], fields[1..=n].iter().map(|s| s.to_string()).collect(), Some(fields[n + 1]))
            } else {
                return Err(Error::parse(WHAT, ln, format!("expected a {n}-gram entry")));
            };
            if words.len() != n {
                return Err(Error::parse(WHAT, ln, format!("entry has {} words, expected {n}", words.len())));
            }
            let log10_backoff = bow.map(|b| parse_f64(b, ln)).transpose()?;
            if n == order && log10_backoff.is_some() {
                return Err(Error::parse(WHAT, ln, "highest-order entries carry no back-off weight"));
            }
            grams.push((
                words,
                Entry {
                    log10_prob: parse_f64(prob, ln)?,
                    log10_backoff,
                },
            ));
            found += 1;
        }
        if found != declared[n - 1] {
            return Err(Error::parse(
                WHAT,
                header_ln,
                format!("declared {} {n}-grams, found {found}", declared[n - 1]),
            ));
        }
    }
    match lines.next() {
        Some((_, "\\end\\")) => {}
        Some((ln, l)) => return Err(Error::parse(WHAT, ln, format!("expected \\end\\, found {l:?}"))),
        None => return Err(Error::parse(WHAT, 0, "missing \\end\\")),
    }
    KneserNeyLm::from_parts(order, grams)
}

//! Trial lists, score tables and the small TSV outputs.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use tiedfactor_core::metrics::DetPoint;
use tiedfactor_core::{Label, ScoreSet};

use crate::error::{IoError, IoResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRef {
    pub model_id: String,
    pub utterance_id: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLine {
    pub model_id: String,
    pub utterance_id: String,
    pub score: f64,
    pub label: Label,
}

fn parse_label(s: &str, line: usize) -> IoResult<Label> {
    Label::parse(s.trim()).ok_or_else(|| {
        IoError::Format(format!(
            "line {line}: label must be tgt, non or unk, got {s:?}"
        ))
    })
}

fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = IoResult<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(n, l)| match l {
        Err(e) => Some(Err(IoError::Io(format!("line {}: {e}", n + 1)))),
        Ok(l) if l.trim().is_empty() || l.starts_with('#') => None,
        Ok(l) => Some(Ok((n + 1, l))),
    })
}

/// `model<TAB>utterance[<TAB>label]`; a missing label reads as `unk`.
pub fn parse_trials<R: BufRead>(reader: R) -> IoResult<Vec<TrialRef>> {
    let mut out = Vec::new();
    for item in data_lines(reader) {
        let (n, line) = item?;
        let f: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&f.len()) {
            return Err(IoError::Format(format!(
                "line {n}: expected 2 or 3 tab-separated fields"
            )));
        }
        let label = if f.len() == 3 {
            parse_label(f[2], n)?
        } else {
            Label::Unknown
        };
        out.push(TrialRef {
            model_id: f[0].to_string(),
            utterance_id: f[1].to_string(),
            label,
        });
    }
    Ok(out)
}

pub fn format_trials(trials: &[TrialRef]) -> String {
    let mut s = String::new();
    for t in trials {
        let _ = writeln!(
            s,
            "{}\t{}\t{}",
            t.model_id,
            t.utterance_id,
            t.label.as_str()
        );
    }
    s
}

/// Shortest scientific form that parses back to the same value.
pub fn format_score(v: f64) -> String {
    format!("{v:e}")
}

pub fn format_score_table(lines: &[ScoreLine]) -> String {
    let mut s = String::new();
    for l in lines {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            l.model_id,
            l.utterance_id,
            format_score(l.score),
            l.label.as_str()
        );
    }
    s
}

pub fn parse_score_table<R: BufRead>(reader: R) -> IoResult<Vec<ScoreLine>> {
    let mut out = Vec::new();
    for item in data_lines(reader) {
        let (n, line) = item?;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(IoError::Format(format!(
                "line {n}: expected 4 tab-separated fields"
            )));
        }
        let score: f64 = f[2]
            .trim()
            .parse()
            .map_err(|e| IoError::Format(format!("line {n}: score: {e}")))?;
        if !score.is_finite() {
            return Err(IoError::Format(format!("line {n}: non-finite score")));
        }
        out.push(ScoreLine {
            model_id: f[0].to_string(),
            utterance_id: f[1].to_string(),
            score,
            label: parse_label(f[3], n)?,
        });
    }
    Ok(out)
}

pub fn read_score_table(path: &Path) -> IoResult<Vec<ScoreLine>> {
    let file = std::fs::File::open(path).map_err(|e| IoError::at(path, e))?;
    parse_score_table(std::io::BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub fn read_trials(path: &Path) -> IoResult<Vec<TrialRef>> {
    let file = std::fs::File::open(path).map_err(|e| IoError::at(path, e))?;
    parse_trials(std::io::BufReader::new(file)).map_err(|e| e.in_file(path))
}

/// Labelled scores split by class; `unk` lines are dropped.
pub fn score_set(lines: &[ScoreLine]) -> ScoreSet {
    let mut s = ScoreSet::default();
    for l in lines {
        match l.label {
            Label::Target => s.target.push(l.score),
            Label::Nontarget => s.nontarget.push(l.score),
            Label::Unknown => {}
        }
    }
    s
}

pub fn format_loss_trace(trace: &[f64]) -> String {
    let mut s = String::new();
    for (e, l) in trace.iter().enumerate() {
        let _ = writeln!(s, "{}\t{l:?}", e + 1);
    }
    s
}

pub fn format_det(points: &[DetPoint]) -> String {
    let mut s = String::new();
    for p in points {
        let _ = writeln!(s, "{:?}\t{:?}", p.p_fa, p.p_miss);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_table_round_trip() {
        let lines = vec![
            ScoreLine {
                model_id: "spk1".into(),
                utterance_id: "utt3".into(),
                score: -1.234567891e-3,
                label: Label::Nontarget,
            },
            ScoreLine {
                model_id: "spk1".into(),
                utterance_id: "utt1".into(),
                score: 42.0,
                label: Label::Target,
            },
        ];
        let text = format_score_table(&lines);
        assert!(text.starts_with("spk1\tutt3\t-1.234567891e-3\tnon\n"));
        let back = parse_score_table(text.as_bytes()).unwrap();
        assert_eq!(back, lines);
        let set = score_set(&back);
        assert_eq!((set.target.len(), set.nontarget.len()), (1, 1));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_score_table(&b"a\tb\t1.0\n"[..]).is_err());
        assert!(parse_score_table(&b"a\tb\tx\ttgt\n"[..]).is_err());
        assert!(parse_score_table(&b"a\tb\t1.0\tmaybe\n"[..]).is_err());
        assert!(parse_score_table(&b"a\tb\tNaN\ttgt\n"[..]).is_err());
        assert!(parse_trials(&b"a\n"[..]).is_err());
        let t = parse_trials(&b"# header\na\tb\n\nc\td\ttgt\n"[..]).unwrap();
        assert_eq!(t[0].label, Label::Unknown);
        assert_eq!(parse_trials(format_trials(&t).as_bytes()).unwrap(), t);
    }
}

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{paired_ttest, EvalReport, RankEvent, Significance};

/// `metric<TAB>k<TAB>value` lines (recall then mrr), then
/// `seq<TAB>step<TAB>target<TAB>rank` per event. Unranked targets print `inf`.
pub fn format_report(r: &EvalReport) -> String {
    let mut out = String::new();
    for (k, v) in &r.recall {
        writeln!(out, "recall\t{k}\t{v}").unwrap();
    }
    for (k, v) in &r.mrr {
        writeln!(out, "mrr\t{k}\t{v}").unwrap();
    }
    for e in &r.per_event {
        let rank = if e.rank == RankEvent::UNRANKED { "inf".to_string() } else { e.rank.to_string() };
        writeln!(out, "{}\t{}\t{}\t{rank}", e.sequence_id, e.step, e.target_item).unwrap();
    }
    out
}

pub fn parse_report(text: &str, path: &Path) -> Result<EvalReport> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut report = EvalReport {
        recall: Default::default(),
        mrr: Default::default(),
        n_events: 0,
        per_event: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let num = |s: &str| s.parse::<usize>().map_err(|e| err(ln, format!("{s:?}: {e}")));
        match f.as_slice() {
            [metric, k, v] => {
                let k = num(k)?;
                let v: f64 = v.parse().map_err(|e| err(ln, format!("{v:?}: {e}")))?;
                match *metric {
                    "recall" => report.recall.insert(k, v),
                    "mrr" => report.mrr.insert(k, v),
                    other => return Err(err(ln, format!("unknown metric {other:?}"))),
                };
            }
            [s, t, target, rank] => report.per_event.push(RankEvent {
                sequence_id: num(s)?,
                step: num(t)?,
                target_item: num(target)?,
                rank: if *rank == "inf" { RankEvent::UNRANKED } else { num(rank)? },
            }),
            _ => return Err(err(ln, format!("expected 3 or 4 fields, got {}", f.len()))),
        }
    }
    report.n_events = report.per_event.len();
    Ok(report)
}

pub fn write_report(path: impl AsRef<Path>, r: &EvalReport) -> Result<()> {
    std::fs::write(path, format_report(r))?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    parse_report(&std::fs::read_to_string(path)?, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricDelta {
    pub metric: &'static str,
    pub k: usize,
    pub a: f64,
    pub b: f64,
}

impl MetricDelta {
    pub fn delta(&self) -> f64 {
        self.b - self.a
    }

    /// `(b − a) / a` in percent; `None` when `a` is zero.
    pub fn relative_percent(&self) -> Option<f64> {
        (self.a != 0.0).then(|| 100.0 * (self.b - self.a) / self.a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub deltas: Vec<MetricDelta>,
    pub n_events: usize,
    pub p_value: f64,
    pub significance: Significance,
}

impl Comparison {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for d in &self.deltas {
            let rel = d.relative_percent().map_or("n/a".to_string(), |p| format!("{p:+.2}%"));
            writeln!(
                out,
                "{}@{}\t{:.4}\t{:.4}\t{:+.4}\t({rel})",
                d.metric,
                d.k,
                d.a,
                d.b,
                d.delta()
            )
            .unwrap();
        }
        writeln!(
            out,
            "paired t-test over {} per-event reciprocal ranks: p = {:.3e} {}",
            self.n_events,
            self.p_value,
            self.significance.marker()
        )
        .unwrap();
        out
    }
}

/// Metric deltas of `b` over `a` plus a paired t-test on reciprocal ranks.
/// Both reports must cover the same events in the same order.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<Comparison> {
    let key = |e: &RankEvent| (e.sequence_id, e.step, e.target_item);
    if a.per_event.len() != b.per_event.len() || a.per_event.iter().zip(&b.per_event).any(|(x, y)| key(x) != key(y)) {
        return Err(Error::Mismatch("reports cover different evaluation events".into()));
    }
    let mut deltas = Vec::new();
    for (name, ma, mb) in [("recall", &a.recall, &b.recall), ("mrr", &a.mrr, &b.mrr)] {
        for (k, &va) in ma {
            if let Some(&vb) = mb.get(k) {
                deltas.push(MetricDelta { metric: name, k: *k, a: va, b: vb });
            }
        }
    }
    let p_value = paired_ttest(&a.reciprocal_ranks(), &b.reciprocal_ranks())?;
    Ok(Comparison {
        deltas,
        n_events: a.per_event.len(),
        p_value,
        significance: Significance::from_p(p_value),
    })
}

//! Exact one-tailed binomial analysis of recognition results.
//!
//! Each sign was shown to a fixed panel with four answer choices; the
//! question is whether the number of correct answers beats chance (p0).
//! Printed p-values are carried alongside the exact tail and flagged when
//! they disagree, rather than trusted.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

pub const CHANCE_LEVEL: f64 = 0.25;
/// Printed and exact p-values further apart than this are flagged.
pub const MISMATCH_TOLERANCE: f64 = 0.005;
pub const CSV_HEADER: [&str; 5] = ["sign", "correct", "total", "paper_p", "notes"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need 0 <= k <= n and 0 < p0 < 1 (k={k}, n={n}, p0={p0})")]
    DomainError { k: u64, n: u64, p0: f64 },
    #[error("CSV line {line}: {reason}")]
    CsvParseError { line: u64, reason: String },
}

/// A printed p-value: either a number or an upper bound such as `< 0.0001`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ReportedP {
    Value(f64),
    Below(f64),
}

impl ReportedP {
    fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        if let Some(rest) = t.strip_prefix('<') {
            return rest.trim().parse().ok().map(ReportedP::Below);
        }
        t.parse().ok().map(ReportedP::Value)
    }

    /// Whether `computed` is consistent with this printed value.
    pub fn agrees_with(&self, computed: f64) -> bool {
        match *self {
            ReportedP::Value(v) => (computed - v).abs() <= MISMATCH_TOLERANCE,
            ReportedP::Below(bound) => computed < bound,
        }
    }
}

impl std::fmt::Display for ReportedP {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReportedP::Value(v) => write!(f, "{v:.4}"),
            ReportedP::Below(b) => write!(f, "< {b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecognitionRecord {
    pub sign: String,
    pub correct: u64,
    pub total: u64,
    pub paper_p: Option<ReportedP>,
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisRow {
    pub label: String,
    pub correct: u64,
    pub total: u64,
    pub rate_percent: f64,
    pub computed_p: f64,
    pub paper_p: Option<ReportedP>,
    pub significant_at_05: bool,
    pub mismatch_flag: bool,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Exact upper tail `P(X >= k)` for `X ~ Binomial(n, p0)`.
pub fn binomial_tail(k: u64, n: u64, p0: f64) -> Result<f64, StatsError> {
    if k > n || !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::DomainError { k, n, p0 });
    }
    if k == 0 {
        return Ok(1.0);
    }
    let (lp, lq) = (p0.ln(), (-p0).ln_1p());
    // ln C(n, k) by running product, then step the pmf up to n.
    let mut log_choose = 0.0;
    for i in 0..k {
        log_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    let mut terms = Vec::with_capacity((n - k + 1) as usize);
    for j in k..=n {
        if j > k {
            log_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        terms.push(log_choose + j as f64 * lp + (n - j) as f64 * lq);
    }
    Ok(log_sum_exp(&terms).exp().clamp(0.0, 1.0))
}

/// Rates, exact tails and mismatch flags, sorted by label.
pub fn analyze(records: &[RecognitionRecord], p0: f64) -> Result<Vec<AnalysisRow>, StatsError> {
    let mut rows = records
        .iter()
        .map(|r| {
            if r.total == 0 || r.correct > r.total {
                return Err(StatsError::DomainError { k: r.correct, n: r.total, p0 });
            }
            let computed_p = binomial_tail(r.correct, r.total, p0)?;
            let rate = 100.0 * r.correct as f64 / r.total as f64;
            Ok(AnalysisRow {
                label: r.sign.clone(),
                correct: r.correct,
                total: r.total,
                rate_percent: (rate * 10.0).round() / 10.0,
                computed_p,
                paper_p: r.paper_p,
                significant_at_05: computed_p < 0.05,
                mismatch_flag: r.paper_p.is_some_and(|p| !p.agrees_with(computed_p)),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(rows)
}

/// Reads `sign,correct,total,paper_p,notes` rows. `paper_p` may be empty,
/// a number, or a bound like `<0.0001`.
pub fn load_records(csv_text: &str) -> Result<Vec<RecognitionRecord>, StatsError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_text.as_bytes());
    let header_err = |reason: String| StatsError::CsvParseError { line: 1, reason };
    let headers = reader.headers().map_err(|e| header_err(e.to_string()))?;
    if headers.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(header_err(format!("expected header `{}`", CSV_HEADER.join(","))));
    }

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| StatsError::CsvParseError {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let fail = |reason: String| StatsError::CsvParseError { line, reason };
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let count = |i: usize| field(i).parse::<u64>().map_err(|_| fail(format!("`{}` is not a count", field(i))));
        let (correct, total) = (count(1)?, count(2)?);
        if total == 0 {
            return Err(fail("total must be positive".into()));
        }
        if correct > total {
            return Err(fail(format!("correct ({correct}) exceeds total ({total})")));
        }
        let paper_p = match field(3) {
            "" => None,
            text => Some(ReportedP::parse(text).ok_or_else(|| fail(format!("bad paper_p `{text}`")))?),
        };
        let notes = Some(field(4)).filter(|s| !s.is_empty()).map(str::to_string);
        out.push(RecognitionRecord { sign: field(0).to_string(), correct, total, paper_p, notes });
    }
    Ok(out)
}

fn paper_cell(p: Option<ReportedP>) -> String {
    p.map_or_else(|| "-".into(), |p| p.to_string())
}

/// Fixed-width text table.
pub fn render_table(rows: &[AnalysisRow]) -> String {
    let width = rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(0).max(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}  {:>12}  {:>10}  {:>5}  mismatch",
        "sign", "correct", "rate%", "exact_p", "paper_p", "sig05"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7.1}  {:>12.4e}  {:>10}  {:>5}  {}",
            r.label,
            format!("{}/{}", r.correct, r.total),
            r.rate_percent,
            r.computed_p,
            paper_cell(r.paper_p),
            if r.significant_at_05 { "yes" } else { "no" },
            if r.mismatch_flag { "MISMATCH" } else { "" },
        );
    }
    out
}

pub fn render_csv(rows: &[AnalysisRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let _ = writer.write_record(["sign", "correct", "total", "rate_percent", "computed_p", "paper_p", "significant_at_05", "mismatch"]);
    for r in rows {
        let _ = writer.write_record([
            r.label.clone(),
            r.correct.to_string(),
            r.total.to_string(),
            format!("{:.1}", r.rate_percent),
            format!("{:e}", r.computed_p),
            r.paper_p.map_or_else(String::new, |p| p.to_string()),
            r.significant_at_05.to_string(),
            r.mismatch_flag.to_string(),
        ]);
    }
    String::from_utf8(writer.into_inner().unwrap_or_default()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct pmf summation with exact integer binomial coefficients.
    fn brute_pmf(j: u64, n: u64, p: f64) -> f64 {
        let choose = (0..j).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as f64;
        choose * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32)
    }

    fn brute_tail(k: u64, n: u64, p: f64) -> f64 {
        (k..=n).map(|j| brute_pmf(j, n, p)).sum()
    }

    #[test]
    fn tail_examples() {
        assert_eq!(binomial_tail(0, 12, 0.25).unwrap(), 1.0);
        let all = binomial_tail(12, 12, 0.25).unwrap();
        assert!((all - 0.25f64.powi(12)).abs() < 1e-18);
        assert!(all < 1e-4);
        let six = binomial_tail(6, 12, 0.25).unwrap();
        assert!((six - brute_tail(6, 12, 0.25)).abs() < 1e-12);
        assert!((six - 0.0544).abs() < 5e-5);
    }

    #[test]
    fn tail_domain() {
        assert!(binomial_tail(13, 12, 0.25).is_err());
        assert!(binomial_tail(1, 12, 0.0).is_err());
        assert!(binomial_tail(1, 12, 1.0).is_err());
    }

    #[test]
    fn matches_brute_force_and_complement() {
        for n in [1u64, 5, 12, 30, 60] {
            for p in [0.05, 0.25, 0.5, 0.9] {
                let mut prev = 1.0;
                for k in 0..=n {
                    let tail = binomial_tail(k, n, p).unwrap();
                    assert!((tail - brute_tail(k, n, p)).abs() < 1e-12, "n={n} k={k} p={p}");
                    let lower: f64 = (0..k).map(|j| brute_pmf(j, n, p)).sum();
                    assert!((tail + lower - 1.0).abs() < 1e-12);
                    assert!(tail <= prev + 1e-15);
                    prev = tail;
                }
            }
        }
    }

    fn record(sign: &str, correct: u64, paper_p: Option<ReportedP>) -> RecognitionRecord {
        RecognitionRecord { sign: sign.into(), correct, total: 12, paper_p, notes: None }
    }

    #[test]
    fn analyze_examples() {
        let rows = analyze(
            &[
                record("Profumo", 0, Some(ReportedP::Value(1.0))),
                record("Doccia", 8, Some(ReportedP::Value(0.0041))),
                record("Acqua", 6, Some(ReportedP::Value(0.1035))),
            ],
            CHANCE_LEVEL,
        )
        .unwrap();
        let labels: Vec<_> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["Acqua", "Doccia", "Profumo"]);
        assert_eq!(rows[1].rate_percent, 66.7);
        assert_eq!(rows[2].computed_p, 1.0);
        assert!(!rows[2].mismatch_flag);
        assert!(rows[0].mismatch_flag);
    }

    #[test]
    fn csv_loading() {
        let text = "sign,correct,total,paper_p,notes\nA,12,12,<0.0001,\"x, y\"\nB,3,12,,\n";
        let recs = load_records(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].paper_p, Some(ReportedP::Below(0.0001)));
        assert_eq!(recs[0].notes.as_deref(), Some("x, y"));
        assert_eq!(recs[1].paper_p, None);

        assert!(load_records("sign,correct,total,paper_p,notes\n").unwrap().is_empty());
        let err = load_records("sign,correct,total,paper_p,notes\nA,13,12,,\n").unwrap_err();
        assert!(matches!(err, StatsError::CsvParseError { line: 2, .. }));
        assert!(load_records("name,k,n\n").is_err());
    }
}

use std::path::Path;

use signforge::stats::{analyze, load_records, render_csv, render_table, ReportedP, StatsError, CHANCE_LEVEL};

fn recognition_csv() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/table1.csv")).unwrap()
}

/// P(X >= k) by summing the pmf with integer binomial coefficients.
fn oracle_tail(k: u64, n: u64, p: f64) -> f64 {
    (k..=n)
        .map(|j| {
            let choose = (0..j).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1)) as f64;
            choose * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32)
        })
        .sum()
}

#[test]
fn bundled_table_has_fifteen_rows() {
    let records = load_records(&recognition_csv()).unwrap();
    assert_eq!(records.len(), 15);
    assert!(records.iter().all(|r| r.total == 12));
}

#[test]
fn audit_of_bundled_table() {
    let rows = analyze(&load_records(&recognition_csv()).unwrap(), CHANCE_LEVEL).unwrap();
    let row = |prefix: &str| rows.iter().find(|r| r.label.starts_with(prefix)).unwrap();

    for r in &rows {
        assert!((r.computed_p - oracle_tail(r.correct, r.total, CHANCE_LEVEL)).abs() <= 1e-12, "{}", r.label);
    }
    assert_eq!(row("Doccia").rate_percent, 66.7);
    assert_eq!(row("Profumo").computed_p, 1.0);
    assert!(!row("Profumo").mismatch_flag);

    let acqua = row("Acqua");
    assert!((acqua.computed_p - 0.0544).abs() < 5e-5);
    assert!(acqua.mismatch_flag);

    for r in rows.iter().filter(|r| r.correct >= 10) {
        assert!(r.computed_p < 1e-4, "{}", r.label);
        assert_eq!(r.paper_p, Some(ReportedP::Below(1e-4)));
        assert!(!r.mismatch_flag);
    }
    assert!(rows.iter().filter(|r| r.mismatch_flag).count() > 0);
}

#[test]
fn renderers_cover_every_row() {
    let rows = analyze(&load_records(&recognition_csv()).unwrap(), CHANCE_LEVEL).unwrap();
    assert_eq!(render_table(&rows).lines().count(), 16);
    let csv = render_csv(&rows);
    let parsed = csv::Reader::from_reader(csv.as_bytes()).records().count();
    assert_eq!(parsed, 15);
}

#[test]
fn header_only_and_bad_counts() {
    assert!(load_records("sign,correct,total,paper_p,notes\n").unwrap().is_empty());
    let err = load_records("sign,correct,total,paper_p,notes\nX,13,12,,\n").unwrap_err();
    assert!(matches!(err, StatsError::CsvParseError { line: 2, .. }), "{err:?}");
}

//! Verifier reports and their CSV form.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    ExactPass,
    Unresolved,
    Inconclusive,
    Info,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::ExactPass => "exact-pass",
            Verdict::Unresolved => "unresolved",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Info => "info",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    pub n: usize,
    #[serde(deserialize_with = "nan_from_null")]
    pub estimate: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub se: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub bound_or_limit: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub ratio: f64,
    pub verdict: Verdict,
}

impl ReportRow {
    pub fn new(quantity: impl Into<String>, n: usize, estimate: f64, se: f64, bound_or_limit: f64, verdict: Verdict) -> Self {
        let ratio = if bound_or_limit != 0.0 { estimate / bound_or_limit } else { f64::NAN };
        ReportRow { quantity: quantity.into(), n, estimate, se, bound_or_limit, ratio, verdict }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.ratio = ratio;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(name: impl Into<String>) -> Self {
        Report { name: name.into(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// No row failed.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn rows_named<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.quantity == quantity)
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.notes.extend(other.notes);
    }

    pub fn to_csv(&self) -> String {
        let mut t = Table::new(&["quantity", "n", "estimate", "se", "bound_or_limit", "ratio", "verdict"]);
        for r in &self.rows {
            t.row(vec![
                r.quantity.clone(),
                r.n.to_string(),
                fmt_f64(r.estimate),
                fmt_f64(r.se),
                fmt_f64(r.bound_or_limit),
                fmt_f64(r.ratio),
                r.verdict.as_str().to_string(),
            ]);
        }
        t.to_csv()
    }
}

/// Non-finite floats serialize to JSON null; read them back as NaN.
pub(crate) fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Shortest round-trip decimal; `inf`, `-inf` and `nan` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// A headed table of string cells rendered as RFC-4180 CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "row width");
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_crlf() {
        let mut t = Table::new(&["a", "b"]);
        t.row(vec!["x,y".into(), "say \"hi\"".into()]);
        assert_eq!(t.to_csv(), "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n");
    }

    #[test]
    fn report_verdicts() {
        let mut r = Report::new("t");
        r.push(ReportRow::new("q", 1, 1.0, 0.1, 2.0, Verdict::Pass));
        assert!(r.passed());
        assert_eq!(r.rows[0].ratio, 0.5);
        r.push(ReportRow::new("q", 2, 1.0, 0.1, 2.0, Verdict::Fail));
        assert!(!r.passed());
        assert!(r.to_csv().starts_with("quantity,n,estimate,se,bound_or_limit,ratio,verdict\r\n"));
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn json_roundtrip_keeps_nan_rows() {
        let mut r = Report::new("t");
        r.push(ReportRow::new("q", 1, 1.0, f64::NAN, 0.0, Verdict::Info));
        let back: Report = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert!(back.rows[0].se.is_nan() && back.rows[0].ratio.is_nan());
        assert_eq!(back.rows[0].estimate, 1.0);
    }
}

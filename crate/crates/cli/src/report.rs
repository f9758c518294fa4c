//! Report serialization: JSON with 17 significant digits, CSV with one row
//! per record, and an aligned text table.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use soliton_forge_core::suite::SuiteReport;

use crate::config::Format;

/// Writes every `f64` as `d.dddddddddddddddde±x`.
#[derive(Debug, Default, Clone, Copy)]
pub struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", float(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// 17 significant digits in scientific notation; non-finite values as
/// `NaN`, `inf` or `-inf`.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SignificantDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

const CSV_HEADER: [&str; 6] = ["check", "point", "residual", "tolerance", "pass", "detail"];

pub fn to_csv(report: &SuiteReport) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &report.records {
        let point = r
            .point
            .as_ref()
            .map(|p| p.coords().iter().map(|&c| float(c)).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        w.write_record([
            r.check.name(),
            &point,
            &float(r.residual),
            &float(r.tolerance),
            if r.pass { "true" } else { "false" },
            &r.detail,
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

fn short(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else {
        format!("{v:.3e}")
    }
}

pub fn to_text(report: &SuiteReport) -> Vec<u8> {
    let header = ["check", "worst residual", "tolerance", "passed", "failed"];
    let rows: Vec<[String; 5]> = report
        .summary
        .iter()
        .map(|s| {
            let tol = report.records_for(s.check).next().map_or(f64::NAN, |r| r.tolerance);
            [
                s.check.name().to_string(),
                short(s.worst_residual),
                short(tol),
                s.passed.to_string(),
                s.failed.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    out.push_str(&format!("subject: {}\n", report.subject));
    let line = |cells: &[&str]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (c, w) in cells[1..].iter().zip(&widths[1..]) {
            s.push_str(&format!("  {c:>w$}"));
        }
        s.trim_end().to_string() + "\n"
    };
    out.push_str(&line(&header));
    for row in &rows {
        out.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    let failures: Vec<_> = report.failures().collect();
    if !failures.is_empty() {
        out.push_str(&format!("\n{} failing record(s):\n", failures.len()));
        for r in failures {
            let at = r
                .point
                .as_ref()
                .map(|p| format!("{:?}", p.coords()))
                .unwrap_or_else(|| "grid".into());
            out.push_str(&format!("  {} at {at}: residual {} > {} {}\n", r.check, short(r.residual), short(r.tolerance), r.detail));
        }
    }
    out.push_str(if report.pass { "\nresult: PASS\n" } else { "\nresult: FAIL\n" });
    out.into_bytes()
}

pub fn emit_report(report: &SuiteReport, format: Format) -> io::Result<Vec<u8>> {
    match format {
        Format::Json => to_json(report).map_err(io::Error::other),
        Format::Csv => to_csv(report),
        Format::Text => Ok(to_text(report)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.0), "-2.0000000000000000e0");
        assert_eq!(float(0.1).parse::<f64>().unwrap(), 0.1);
        let v = 1.0 / 3.0;
        assert_eq!(float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn json_floats_use_the_formatter() {
        let out = to_json(&serde_json::json!({"b": 1.5, "a": [f64::NAN, 2], "c": 1e-300})).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"a\":[null,2],\"b\":1.5000000000000000e0,\"c\":1.0000000000000000e-300}\n"
        );
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use bbv_core::bbv::MaxVers;
use bbv_core::exec::limit_name;
use bbv_core::runtime::TypeTag;
use serde::Serialize;

use crate::suite::{Row, StatsReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl Format {
    /// Format implied by a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Format, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum LimitField {
    Finite(u32),
    Inf(&'static str),
}

fn limit_field(l: MaxVers) -> LimitField {
    match l {
        Some(n) => LimitField::Finite(n),
        None => LimitField::Inf("inf"),
    }
}

#[derive(Serialize)]
struct ConfigRecord {
    modes: Vec<&'static str>,
    limits: Vec<LimitField>,
    warmup: u32,
    iters: u32,
    entry: String,
    fuel: Option<u64>,
}

#[derive(Serialize)]
struct Ratios {
    tests: Option<f64>,
    ops_emitted: Option<f64>,
}

#[derive(Serialize)]
struct RowRecord<'a> {
    benchmark: &'a str,
    mode: &'static str,
    maxvers: LimitField,
    result_hash: &'a str,
    error: Option<&'a str>,
    tests_total: u64,
    tests_by_kind: BTreeMap<&'static str, u64>,
    ops_emitted: u64,
    ops_executed: u64,
    compiler_invocations: u64,
    stub_hits: u64,
    versions_histogram: &'a BTreeMap<usize, usize>,
    ratios: Ratios,
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    config: ConfigRecord,
    rows: Vec<RowRecord<'a>>,
}

fn tests_by_kind(r: &Row) -> BTreeMap<&'static str, u64> {
    TypeTag::ALL.iter().map(|t| (t.test_name(), r.counters.tests(*t))).collect()
}

fn row_record(r: &Row) -> RowRecord<'_> {
    RowRecord {
        benchmark: &r.benchmark,
        mode: r.mode.name(),
        maxvers: limit_field(r.maxvers),
        result_hash: &r.result_hash,
        error: r.error.as_deref(),
        tests_total: r.counters.tests_total(),
        tests_by_kind: tests_by_kind(r),
        ops_emitted: r.counters.ops_emitted,
        ops_executed: r.counters.ops_executed,
        compiler_invocations: r.counters.compiler_invocations,
        stub_hits: r.counters.stub_hits,
        versions_histogram: &r.counters.versions_histogram,
        ratios: Ratios { tests: r.ratio_tests, ops_emitted: r.ratio_ops_emitted },
    }
}

/// A single row as a JSON object with the report's row fields.
pub fn row_to_json(r: &Row) -> String {
    let mut s = serde_json::to_string_pretty(&row_record(r)).expect("row serializes");
    s.push('\n');
    s
}

fn record(report: &StatsReport) -> ReportRecord<'_> {
    let c = &report.config;
    ReportRecord {
        config: ConfigRecord {
            modes: c.modes.iter().map(|m| m.name()).collect(),
            limits: c.limits.iter().map(|l| limit_field(*l)).collect(),
            warmup: c.warmup,
            iters: c.iters,
            entry: c.entry.clone(),
            fuel: c.fuel,
        },
        rows: report.rows.iter().map(row_record).collect(),
    }
}

fn histogram_text(h: &BTreeMap<usize, usize>) -> String {
    h.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(" ")
}

fn ratio_text(r: Option<f64>) -> String {
    r.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".to_string())
}

pub fn to_json(report: &StatsReport) -> String {
    let mut s = serde_json::to_string_pretty(&record(report)).expect("report serializes");
    s.push('\n');
    s
}

pub fn to_csv(report: &StatsReport) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    let mut header = vec!["benchmark", "mode", "maxvers", "result_hash", "error", "tests_total"];
    header.extend(TypeTag::ALL.iter().map(|t| t.test_name()));
    header.extend([
        "ops_emitted",
        "ops_executed",
        "compiler_invocations",
        "stub_hits",
        "versions_histogram",
        "ratio_tests",
        "ratio_ops_emitted",
    ]);
    w.write_record(&header).expect("in-memory write");
    for r in &report.rows {
        let c = &r.counters;
        let mut rec = vec![
            r.benchmark.clone(),
            r.mode.name().to_string(),
            limit_name(r.maxvers),
            r.result_hash.clone(),
            r.error.clone().unwrap_or_default(),
            c.tests_total().to_string(),
        ];
        rec.extend(TypeTag::ALL.iter().map(|t| c.tests(*t).to_string()));
        rec.extend([
            c.ops_emitted.to_string(),
            c.ops_executed.to_string(),
            c.compiler_invocations.to_string(),
            c.stub_hits.to_string(),
            histogram_text(&c.versions_histogram),
            r.ratio_tests.map(|x| x.to_string()).unwrap_or_default(),
            r.ratio_ops_emitted.map(|x| x.to_string()).unwrap_or_default(),
        ]);
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn to_markdown(report: &StatsReport) -> String {
    let mut s = String::new();
    s.push_str("| benchmark | mode | maxvers | tests | tests/baseline | ops emitted | emitted/baseline | ops executed | compiler invocations | versions | result |\n");
    s.push_str("|---|---|---|---:|---:|---:|---:|---:|---:|---|---|\n");
    for r in &report.rows {
        let c = &r.counters;
        let result = match (&r.result, &r.error) {
            (_, Some(e)) => format!("error: {e}"),
            (Some(v), None) => v.clone(),
            (None, None) => String::new(),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.benchmark,
            r.mode,
            limit_name(r.maxvers),
            c.tests_total(),
            ratio_text(r.ratio_tests),
            c.ops_emitted,
            ratio_text(r.ratio_ops_emitted),
            c.ops_executed,
            c.compiler_invocations,
            histogram_text(&c.versions_histogram),
            result.replace('|', "\\|"),
        );
    }
    s
}

pub fn render(report: &StatsReport, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(report),
        Format::Markdown => to_markdown(report),
    }
}

pub fn emit_report(report: &StatsReport, format: Format, path: &Path) -> io::Result<()> {
    fs::write(path, render(report, format))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::suite::{run_suite, ExperimentConfig};

    fn report() -> StatsReport {
        run_suite(&[corpus::find("sum").unwrap()], &ExperimentConfig::default()).unwrap()
    }

    #[test]
    fn json_has_config_and_rows() {
        let v: serde_json::Value = serde_json::from_str(&to_json(&report())).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["config", "rows"]);
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 20);
        let row = &rows[0];
        for k in [
            "benchmark",
            "mode",
            "maxvers",
            "result_hash",
            "tests_total",
            "tests_by_kind",
            "ops_emitted",
            "ops_executed",
            "compiler_invocations",
            "stub_hits",
            "versions_histogram",
            "ratios",
        ] {
            assert!(row.get(k).is_some(), "missing {k}");
        }
        assert_eq!(row["tests_by_kind"].as_object().unwrap().len(), 7);
        assert_eq!(rows[4]["maxvers"], "inf");
        assert_eq!(rows[3]["maxvers"], 5);
    }

    #[test]
    fn reports_are_deterministic() {
        let (a, b) = (report(), report());
        for f in [Format::Json, Format::Csv, Format::Markdown] {
            assert_eq!(render(&a, f), render(&b, f));
        }
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let r = report();
        let text = to_csv(&r);
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rd.records().count(), r.rows.len());
    }

    #[test]
    fn emit_writes_a_file() {
        let dir = std::env::temp_dir().join(format!("bbv-report-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.md");
        let r = report();
        emit_report(&r, Format::from_path(&path).unwrap(), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), to_markdown(&r));
        fs::remove_dir_all(&dir).unwrap();
    }
}

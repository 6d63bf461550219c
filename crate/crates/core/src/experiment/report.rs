use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::compare::Cell;
use super::{Arm, Comparison, ExperimentError, RowScores, RunRecord, Turn};

pub const CSV_HEADER: [&str; 16] = [
    "sn",
    "document",
    "model",
    "turn",
    "arm",
    "response_time_s",
    "bert_p",
    "bert_r",
    "bert_f1",
    "qa_ref",
    "qa_cand",
    "rouge1",
    "rouge2",
    "rougeL",
    "meteor",
    "perplexity",
];

const MARKDOWN_HEADER: [&str; 16] = [
    "S/N",
    "Document",
    "Model",
    "Turn",
    "Arm",
    "Response Time (s)",
    "BERT-P",
    "BERT-R",
    "BERT-F1",
    "QA-Ref",
    "QA-Cand",
    "ROUGE-1",
    "ROUGE-2",
    "ROUGE-L",
    "METEOR",
    "Perplexity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "md" | "markdown" => Ok(OutputFormat::Markdown),
            other => Err(format!("unknown output format {other:?}")),
        }
    }
}

fn fields(r: &RunRecord, rounding: usize) -> Vec<String> {
    let mut out = vec![
        r.serial.to_string(),
        r.doc_id.clone(),
        r.model.clone(),
        r.turn.to_string(),
        r.arm.to_string(),
    ];
    match &r.scores {
        Some(s) => {
            out.push(format!("{:.*}", rounding, s.response_time_s));
            out.extend(s.values().iter().map(|v| format!("{v:.rounding$}")));
        }
        None => out.extend(std::iter::repeat_n("-".to_string(), 11)),
    }
    out
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).expect("writing csv to memory cannot fail");
    w.into_inner().expect("flushed above")
}

fn markdown_table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
    out.push_str(&line(header));
    out.push_str(&line(&vec!["---".to_string(); header.len()]));
    for row in rows {
        out.push_str(&line(row));
    }
}

/// Serializes result rows; metric values are rounded to `rounding` decimals
/// and missing rows are written as dashes.
pub fn emit_results(records: &[RunRecord], rounding: usize, format: OutputFormat) -> Vec<u8> {
    let rows: Vec<Vec<String>> = records.iter().map(|r| fields(r, rounding)).collect();
    match format {
        OutputFormat::Csv => {
            let header: Vec<String> = CSV_HEADER.iter().map(|s| s.to_string()).collect();
            csv_bytes(&header, rows)
        }
        OutputFormat::Markdown => {
            let header: Vec<String> = MARKDOWN_HEADER.iter().map(|s| s.to_string()).collect();
            let mut out = String::new();
            markdown_table(&mut out, &header, &rows);
            out.into_bytes()
        }
    }
}

fn parse_value(field: &str, column: &str, line: u64) -> Result<f64, ExperimentError> {
    field.trim().parse::<f64>().map_err(|_| {
        ExperimentError::MalformedCsv(format!("line {line}: bad {column} value {field:?}"))
    })
}

/// Reads a results CSV (as written by [`emit_results`]). A row whose metric
/// fields are all `-` is a missing row.
pub fn load_fixture(bytes: &[u8]) -> Result<Vec<RunRecord>, ExperimentError> {
    let malformed = |m: String| ExperimentError::MalformedCsv(m);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(malformed(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| malformed(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let serial = row[0]
            .parse()
            .map_err(|_| malformed(format!("line {line}: bad serial {:?}", &row[0])))?;
        let turn = Turn::from_str(&row[3])?;
        let arm = Arm::from_str(&row[4])?;
        let metrics: Vec<&str> = row.iter().skip(5).collect();
        let scores = if metrics.iter().all(|f| *f == "-") {
            None
        } else {
            let v = metrics
                .iter()
                .zip(&CSV_HEADER[5..])
                .map(|(f, c)| parse_value(f, c, line))
                .collect::<Result<Vec<_>, _>>()?;
            Some(RowScores {
                response_time_s: v[0],
                bert_p: v[1],
                bert_r: v[2],
                bert_f1: v[3],
                qa_ref: v[4],
                qa_cand: v[5],
                rouge1: v[6],
                rouge2: v[7],
                rouge_l: v[8],
                meteor: v[9],
                perplexity: v[10],
            })
        };
        records.push(RunRecord {
            serial,
            doc_id: row[1].to_string(),
            model: row[2].to_string(),
            turn,
            arm,
            scores,
        });
    }
    if records.is_empty() {
        return Err(malformed("no data rows".into()));
    }
    Ok(records)
}

fn cell_columns(c: &Comparison) -> Vec<String> {
    let mut cols = Vec::new();
    for arm in Arm::ALL {
        cols.extend(c.models.iter().map(|m| format!("{m} ({arm})")));
    }
    cols
}

fn grid_line(cells: &[(Cell, Cell)]) -> Vec<String> {
    let mut out: Vec<String> = cells.iter().map(|c| c.0.symbol().to_string()).collect();
    out.extend(cells.iter().map(|c| c.1.symbol().to_string()));
    out
}

fn total(v: Option<u32>) -> String {
    v.map_or("-".to_string(), |n| n.to_string())
}

/// Serializes comparison grids: one block per (document, turn) with a
/// response-time row, the ten metric rows and an `Avg Total` row.
///
/// The Markdown form also lists each model's totals as
/// `<model> <without> <with>` lines.
pub fn emit_comparison(c: &Comparison, format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Csv => {
            let mut header = vec!["document".to_string(), "turn".into(), "metric".into()];
            header.extend(cell_columns(c));
            let mut rows = Vec::new();
            for t in &c.tables {
                let lead = [t.doc_id.clone(), t.turn.to_string()];
                for r in &t.rows {
                    let mut row = lead.to_vec();
                    row.push(r.metric.clone());
                    row.extend(grid_line(&r.cells));
                    rows.push(row);
                }
                let mut row = lead.to_vec();
                row.push("Avg Total".into());
                row.extend(t.avg_total.iter().map(|a| total(a.0)));
                row.extend(t.avg_total.iter().map(|a| total(a.1)));
                rows.push(row);
            }
            csv_bytes(&header, rows)
        }
        OutputFormat::Markdown => {
            let mut out = String::from("Legend: F faster, 1 better, 0 worse, S similar, - missing or slower.\n");
            let mut header = vec![String::new()];
            header.extend(cell_columns(c));
            for t in &c.tables {
                let _ = write!(out, "\n### Document {}, {} response\n\n", t.doc_id, t.turn);
                let mut rows: Vec<Vec<String>> = t
                    .rows
                    .iter()
                    .map(|r| {
                        let mut row = vec![r.metric.clone()];
                        row.extend(grid_line(&r.cells));
                        row
                    })
                    .collect();
                let mut totals = vec!["Avg Total".to_string()];
                totals.extend(t.avg_total.iter().map(|a| total(a.0)));
                totals.extend(t.avg_total.iter().map(|a| total(a.1)));
                rows.push(totals);
                markdown_table(&mut out, &header, &rows);
                out.push_str("\nAvg Total (without, with):\n\n```text\n");
                for (m, a) in c.models.iter().zip(&t.avg_total) {
                    let _ = writeln!(out, "{m} {} {}", total(a.0), total(a.1));
                }
                out.push_str("```\n");
            }
            out.into_bytes()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(scores: Option<RowScores>) -> RunRecord {
        RunRecord {
            serial: 1,
            doc_id: "001".into(),
            model: "llama2:13b".into(),
            turn: Turn(1),
            arm: Arm::WithoutForce,
            scores,
        }
    }

    fn sample() -> RowScores {
        RowScores {
            response_time_s: 74.644,
            bert_p: 0.7249,
            bert_r: 0.72,
            bert_f1: 0.72,
            qa_ref: 0.49,
            qa_cand: 0.24,
            rouge1: 0.24,
            rouge2: 0.13,
            rouge_l: 0.19,
            meteor: 0.42,
            perplexity: 56.7543,
        }
    }

    #[test]
    fn one_record_is_header_plus_one_line() {
        let out = String::from_utf8(emit_results(&[record(Some(sample()))], 2, OutputFormat::Csv)).unwrap();
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(
            lines[1],
            "1,001,llama2:13b,First,without_force,74.64,0.72,0.72,0.72,0.49,0.24,0.24,0.13,0.19,0.42,56.75"
        );
    }

    #[test]
    fn missing_row_is_dashed() {
        let out = String::from_utf8(emit_results(&[record(None)], 2, OutputFormat::Csv)).unwrap();
        assert!(out
            .lines()
            .nth(1)
            .unwrap()
            .ends_with("without_force,-,-,-,-,-,-,-,-,-,-,-"));
    }

    #[test]
    fn round_trip_at_rounded_precision() {
        let records = [record(Some(sample())), record(None)];
        let bytes = emit_results(&records, 2, OutputFormat::Csv);
        let parsed = load_fixture(&bytes).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].scores.unwrap().perplexity, 56.75);
        assert_eq!(parsed[1].scores, None);
        assert_eq!(emit_results(&parsed, 2, OutputFormat::Csv), bytes);
    }

    #[test]
    fn markdown_results() {
        let out = String::from_utf8(emit_results(&[record(None)], 2, OutputFormat::Markdown)).unwrap();
        assert!(out.starts_with("| S/N | Document |"));
        assert_eq!(out.lines().count(), 3);
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            "",
            "a,b\n1,2\n",
            "sn,document,model,turn,arm,response_time_s,bert_p,bert_r,bert_f1,qa_ref,qa_cand,rouge1,rouge2,rougeL,meteor,perplexity\n",
            "sn,document,model,turn,arm,response_time_s,bert_p,bert_r,bert_f1,qa_ref,qa_cand,rouge1,rouge2,rougeL,meteor,perplexity\n1,d,m,First,without_force,1,-,1,1,1,1,1,1,1,1,1\n",
            "sn,document,model,turn,arm,response_time_s,bert_p,bert_r,bert_f1,qa_ref,qa_cand,rouge1,rouge2,rougeL,meteor,perplexity\n1,d,m,First,sideways,-,-,-,-,-,-,-,-,-,-,-\n",
        ] {
            assert!(
                matches!(load_fixture(bad.as_bytes()), Err(ExperimentError::MalformedCsv(_))),
                "{bad:?}"
            );
        }
    }
}

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Arm, ExperimentError, RunRecord, Turn};
use crate::metrics::METRIC_NAMES;

/// Label of the latency row, which sits above the metric rows.
pub const RESPONSE_TIME: &str = "Response Time";

/// Index of perplexity in the metric rows; the only lower-is-better metric.
const PERPLEXITY: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    One,
    Zero,
    Similar,
    Faster,
    /// Missing data, or the slower side of the latency row.
    Dash,
}

impl Cell {
    pub fn symbol(self) -> &'static str {
        match self {
            Cell::One => "1",
            Cell::Zero => "0",
            Cell::Similar => "S",
            Cell::Faster => "F",
            Cell::Dash => "-",
        }
    }
}

/// Cells for one metric and one model: (without, with).
fn score_pair(a: f64, b: f64, lower_is_better: bool, eps: f64) -> (Cell, Cell) {
    if (a - b).abs() <= eps {
        return (Cell::Similar, Cell::Similar);
    }
    if (a < b) == lower_is_better {
        (Cell::One, Cell::Zero)
    } else {
        (Cell::Zero, Cell::One)
    }
}

fn time_pair(a: f64, b: f64, eps: f64) -> (Cell, Cell) {
    if (a - b).abs() <= eps {
        (Cell::Similar, Cell::Similar)
    } else if a < b {
        (Cell::Faster, Cell::Dash)
    } else {
        (Cell::Dash, Cell::Faster)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    /// Per model, in [`Comparison::models`] order: (without, with).
    pub cells: Vec<(Cell, Cell)>,
}

/// The grid for one (document, turn).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub doc_id: String,
    pub turn: Turn,
    /// Response time first, then the ten metrics.
    pub rows: Vec<ComparisonRow>,
    /// Per model: count of `1` cells over the metric rows for (without, with).
    /// `None` where that model has no comparable data.
    pub avg_total: Vec<(Option<u32>, Option<u32>)>,
}

impl ComparisonTable {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub models: Vec<String>,
    pub tables: Vec<ComparisonTable>,
}

impl Comparison {
    pub fn table(&self, doc_id: &str, turn: Turn) -> Option<&ComparisonTable> {
        self.tables
            .iter()
            .find(|t| t.doc_id == doc_id && t.turn == turn)
    }
}

type Key = (String, String, Turn);

fn index(rows: &[RunRecord], arm: Arm) -> Result<HashMap<Key, &RunRecord>, ExperimentError> {
    let mut map = HashMap::new();
    for r in rows {
        if r.arm != arm {
            return Err(ExperimentError::KeyMismatch(format!(
                "row {} belongs to {}, expected {arm}",
                r.serial, r.arm
            )));
        }
        let key = (r.doc_id.clone(), r.model.clone(), r.turn);
        if map.insert(key, r).is_some() {
            return Err(ExperimentError::KeyMismatch(format!(
                "duplicate {arm} row for {} / {} / {}",
                r.doc_id, r.model, r.turn
            )));
        }
    }
    Ok(map)
}

fn first_seen<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values {
        if !out.iter().any(|o| o == v) {
            out.push(v.to_string());
        }
    }
    out
}

/// Builds the 1/0/S/F grids. Both arms must hold exactly the same
/// (document, model, turn) keys; missing scores are allowed and yield dashes.
pub fn compare(
    without: &[RunRecord],
    with: &[RunRecord],
    tie_epsilon: f64,
) -> Result<Comparison, ExperimentError> {
    let a = index(without, Arm::WithoutForce)?;
    let b = index(with, Arm::WithForce)?;
    let keys_a: BTreeSet<_> = a.keys().collect();
    let keys_b: BTreeSet<_> = b.keys().collect();
    if let Some((d, m, t)) = keys_a.symmetric_difference(&keys_b).next() {
        return Err(ExperimentError::KeyMismatch(format!(
            "{d} / {m} / {t} appears in only one arm"
        )));
    }

    let models = first_seen(without.iter().map(|r| r.model.as_str()));
    let docs = first_seen(without.iter().map(|r| r.doc_id.as_str()));
    let turns: BTreeSet<Turn> = without.iter().map(|r| r.turn).collect();

    let mut tables = Vec::new();
    for doc in &docs {
        for &turn in &turns {
            let pairs: Vec<_> = models
                .iter()
                .map(|m| {
                    let key = (doc.clone(), m.clone(), turn);
                    let scores = |side: &HashMap<Key, &RunRecord>| {
                        side.get(&key).and_then(|r| r.scores)
                    };
                    (a.contains_key(&key), scores(&a).zip(scores(&b)))
                })
                .collect();
            if !pairs.iter().any(|(present, _)| *present) {
                continue;
            }

            let mut rows = Vec::with_capacity(11);
            rows.push(ComparisonRow {
                metric: RESPONSE_TIME.to_string(),
                cells: pairs
                    .iter()
                    .map(|(_, s)| match s {
                        Some((x, y)) => time_pair(x.response_time_s, y.response_time_s, tie_epsilon),
                        None => (Cell::Dash, Cell::Dash),
                    })
                    .collect(),
            });
            for (i, name) in METRIC_NAMES.iter().enumerate() {
                rows.push(ComparisonRow {
                    metric: name.to_string(),
                    cells: pairs
                        .iter()
                        .map(|(_, s)| match s {
                            Some((x, y)) => {
                                score_pair(x.values()[i], y.values()[i], i == PERPLEXITY, tie_epsilon)
                            }
                            None => (Cell::Dash, Cell::Dash),
                        })
                        .collect(),
                });
            }
            let avg_total = pairs
                .iter()
                .enumerate()
                .map(|(j, (_, s))| {
                    if s.is_none() {
                        return (None, None);
                    }
                    let count = |pick: fn(&(Cell, Cell)) -> Cell| {
                        rows[1..].iter().filter(|r| pick(&r.cells[j]) == Cell::One).count() as u32
                    };
                    (Some(count(|c| c.0)), Some(count(|c| c.1)))
                })
                .collect();
            tables.push(ComparisonTable {
                doc_id: doc.clone(),
                turn,
                rows,
                avg_total,
            });
        }
    }
    Ok(Comparison { models, tables })
}

/// [`compare`] over a single run holding both arms.
pub fn compare_run(records: &[RunRecord], tie_epsilon: f64) -> Result<Comparison, ExperimentError> {
    let (without, with): (Vec<_>, Vec<_>) = records
        .iter()
        .cloned()
        .partition(|r| r.arm == Arm::WithoutForce);
    compare(&without, &with, tie_epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::RowScores;

    fn scores(t: f64, v: f64) -> RowScores {
        RowScores {
            response_time_s: t,
            bert_p: v,
            bert_r: v,
            bert_f1: v,
            qa_ref: v,
            qa_cand: v,
            rouge1: v,
            rouge2: v,
            rouge_l: v,
            meteor: v,
            perplexity: v,
        }
    }

    fn rec(model: &str, arm: Arm, s: Option<RowScores>) -> RunRecord {
        RunRecord {
            serial: 1,
            doc_id: "d".into(),
            model: model.into(),
            turn: Turn(1),
            arm,
            scores: s,
        }
    }

    #[test]
    fn pair_rules() {
        assert_eq!(score_pair(0.72, 0.79, false, 0.0), (Cell::Zero, Cell::One));
        assert_eq!(score_pair(0.24, 0.22, false, 0.0), (Cell::One, Cell::Zero));
        assert_eq!(score_pair(0.49, 0.49, false, 0.0), (Cell::Similar, Cell::Similar));
        assert_eq!(score_pair(0.04, 0.043, false, 0.0), (Cell::Zero, Cell::One));
        assert_eq!(score_pair(0.04, 0.043, false, 0.01), (Cell::Similar, Cell::Similar));
        assert_eq!(score_pair(56.75, 72.52, true, 0.0), (Cell::One, Cell::Zero));
        assert_eq!(time_pair(74.64, 212.15, 0.0), (Cell::Faster, Cell::Dash));
        assert_eq!(time_pair(9.0, 3.0, 0.0), (Cell::Dash, Cell::Faster));
    }

    #[test]
    fn avg_total_counts_ones_only() {
        let without = [rec("m", Arm::WithoutForce, Some(scores(1.0, 0.5)))];
        let mut better = scores(2.0, 0.6);
        better.perplexity = 0.5;
        better.qa_ref = 0.5;
        let with = [rec("m", Arm::WithForce, Some(better))];
        let c = compare(&without, &with, 0.0).unwrap();
        let t = &c.tables[0];
        assert_eq!(t.rows.len(), 11);
        assert_eq!(t.rows[0].cells[0], (Cell::Faster, Cell::Dash));
        // eight wins for "with"; perplexity and QA-Ref are ties
        assert_eq!(t.avg_total, [(Some(0), Some(8))]);
    }

    #[test]
    fn missing_side_dashes_everything() {
        let without = [rec("m", Arm::WithoutForce, Some(scores(1.0, 0.5)))];
        let with = [rec("m", Arm::WithForce, None)];
        let c = compare(&without, &with, 0.0).unwrap();
        let t = &c.tables[0];
        assert!(t.rows.iter().all(|r| r.cells[0] == (Cell::Dash, Cell::Dash)));
        assert_eq!(t.avg_total, [(None, None)]);
    }

    #[test]
    fn key_mismatch() {
        let without = [rec("m", Arm::WithoutForce, None)];
        let with = [rec("other", Arm::WithForce, None)];
        assert!(matches!(
            compare(&without, &with, 0.0),
            Err(ExperimentError::KeyMismatch(_))
        ));
        let wrong_arm = [rec("m", Arm::WithoutForce, None)];
        assert!(matches!(
            compare(&without, &wrong_arm, 0.0),
            Err(ExperimentError::KeyMismatch(_))
        ));
        assert!(matches!(
            compare(&[without[0].clone(), without[0].clone()], &with, 0.0),
            Err(ExperimentError::KeyMismatch(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn cells_are_always_legal(
            ta in 0.0f64..100.0, tb in 0.0f64..100.0,
            va in proptest::collection::vec(0.0f64..1.0, 10),
            vb in proptest::collection::vec(0.0f64..1.0, 10),
            snap in proptest::bool::ANY,
        ) {
            let mk = |t: f64, v: &[f64]| {
                let mut s = scores(t, 0.0);
                s.bert_p = v[0]; s.bert_r = v[1]; s.bert_f1 = v[2]; s.qa_ref = v[3];
                s.qa_cand = v[4]; s.rouge1 = v[5]; s.rouge2 = v[6]; s.rouge_l = v[7];
                s.meteor = v[8]; s.perplexity = v[9];
                s
            };
            // Coarse rounding makes ties likely.
            let vb: Vec<f64> = if snap { va.iter().map(|x| (x * 2.0).round() / 2.0).collect() } else { vb };
            let va: Vec<f64> = if snap { va.iter().map(|x| (x * 2.0).round() / 2.0).collect() } else { va };
            let c = compare(
                &[rec("m", Arm::WithoutForce, Some(mk(ta, &va)))],
                &[rec("m", Arm::WithForce, Some(mk(tb, &vb)))],
                0.0,
            ).unwrap();
            let t = &c.tables[0];
            let rt = t.rows[0].cells[0];
            proptest::prop_assert!(matches!(
                rt,
                (Cell::Faster, Cell::Dash) | (Cell::Dash, Cell::Faster) | (Cell::Similar, Cell::Similar)
            ));
            let mut ones = (0, 0);
            for r in &t.rows[1..] {
                let c = r.cells[0];
                proptest::prop_assert!(matches!(
                    c,
                    (Cell::One, Cell::Zero) | (Cell::Zero, Cell::One) | (Cell::Similar, Cell::Similar)
                ));
                ones.0 += (c.0 == Cell::One) as u32;
                ones.1 += (c.1 == Cell::One) as u32;
            }
            proptest::prop_assert_eq!(t.avg_total[0], (Some(ones.0), Some(ones.1)));
        }
    }
}

use super::report::{MeanStat, MetricReport, RecognitionReport};
use crate::taxonomy::{Level, Specificity};

/// Placeholder for a metric with no denominator.
pub const NULL_CELL: &str = "n/a";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Markdown => self.to_markdown(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn to_markdown(&self) -> String {
        let line = |cells: &[String]| {
            let escaped: Vec<String> = cells.iter().map(|c| c.replace('|', "\\|")).collect();
            format!("| {} |\n", escaped.join(" | "))
        };
        let mut out = line(&self.header);
        out.push_str(&format!("|{}\n", "---|".repeat(self.header.len())));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }
}

/// Percentage with two decimals, or the null placeholder.
pub fn percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}", v * 100.0),
        None => NULL_CELL.to_string(),
    }
}

fn text(v: &Option<String>) -> String {
    v.clone().unwrap_or_default()
}

const TABLE2_METRICS: [&str; 6] = [
    "mIoU_S", "mIoU_P", "mIoU_O", "SpCS-Avg", "SpCS-S2P", "SpCS-P2O",
];
const TABLE2_ORDER: [Specificity; 2] = [Specificity::Specific, Specificity::General];

fn table2_cell(report: &MetricReport, metric: usize, sp: Specificity) -> Option<f64> {
    let r = report.get(sp)?;
    let stat: &MeanStat = match metric {
        0 => &r.miou.subpart,
        1 => &r.miou.part,
        2 => &r.miou.object,
        3 => &r.spcs.avg,
        4 => &r.spcs.s2p,
        _ => &r.spcs.p2o,
    };
    stat.value
}

/// Localization and spatial consistency, one row per method, every metric
/// split into Specific and General columns.
pub fn table2(reports: &[MetricReport]) -> Table {
    let mut header = vec!["method".to_string(), "params".to_string()];
    for m in TABLE2_METRICS {
        for sp in TABLE2_ORDER {
            header.push(format!("{m} {}", sp.title()));
        }
    }
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = vec![text(&r.method), text(&r.params)];
            for m in 0..TABLE2_METRICS.len() {
                for sp in TABLE2_ORDER {
                    row.push(percent(table2_cell(r, m, sp)));
                }
            }
            row
        })
        .collect();
    Table { header, rows }
}

/// One row per (method, specificity) with every figure and its denominator.
pub fn long_table(reports: &[MetricReport]) -> Table {
    let header = [
        "method",
        "params",
        "specificity",
        "mode",
        "averaging",
        "queries",
        "mIoU_S",
        "n_S",
        "mIoU_P",
        "n_P",
        "mIoU_O",
        "n_O",
        "SpCS-Avg",
        "pairs",
        "SpCS-S2P",
        "pairs_S2P",
        "SpCS-P2O",
        "pairs_P2O",
        "SpCS-Mean",
        "skipped_S2P",
        "skipped_P2O",
        "SeCS",
        "pixels_SeCS",
        "abstain_S",
        "abstain_P",
        "abstain_O",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    for r in reports {
        for s in &r.specificities {
            let mut row = vec![
                text(&r.method),
                text(&r.params),
                s.specificity.as_str().to_string(),
                r.mode.as_str().to_string(),
                r.averaging.as_str().to_string(),
                s.queries.to_string(),
            ];
            for level in Level::ALL {
                let m = s.miou.get(level);
                row.push(percent(m.value));
                row.push(m.n.to_string());
            }
            for m in [&s.spcs.avg, &s.spcs.s2p, &s.spcs.p2o] {
                row.push(percent(m.value));
                row.push(m.n.to_string());
            }
            row.push(percent(s.spcs.mean_of_relations));
            row.push((s.skipped.s2p_child + s.skipped.s2p_parent).to_string());
            row.push((s.skipped.p2o_child + s.skipped.p2o_parent).to_string());
            row.push(percent(s.secs.value));
            row.push(s.secs.den.to_string());
            for level in Level::ALL {
                row.push(percent(s.abstention.get(level).value));
            }
            rows.push(row);
        }
    }
    Table { header, rows }
}

/// Recognition accuracy in the six-cell layout, one row per answer file.
pub fn recognition_table(reports: &[RecognitionReport]) -> Table {
    let mut header = vec![
        "method".to_string(),
        "params".to_string(),
        "prompt".to_string(),
    ];
    header.extend(
        RecognitionReport::CELLS
            .iter()
            .map(|&(l, sp)| RecognitionReport::column(l, sp)),
    );
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = vec![text(&r.method), text(&r.params), text(&r.prompt)];
            for &(l, sp) in &RecognitionReport::CELLS {
                let v = r
                    .cells
                    .iter()
                    .find(|c| c.level == l && c.specificity == sp)
                    .and_then(|c| c.accuracy.value);
                row.push(percent(v));
            }
            row
        })
        .collect();
    Table { header, rows }
}

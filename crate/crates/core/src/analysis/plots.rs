use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use super::regression::RegressionResult;
use super::stats::{DatasetStats, Factor, GroupStats};
use crate::geometry::SizeBucket;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Csv,
    Svg,
}

/// A named output file held in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn csv_doc(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn groups(stats: &DatasetStats) -> impl Iterator<Item = &GroupStats> {
    std::iter::once(&stats.overall).chain(&stats.objects)
}

/// Renders dataset statistics. CSV tables are always complete; SVG panels
/// leave out groups without data.
pub fn stats_artifacts(stats: &DatasetStats, format: PlotFormat) -> Vec<Artifact> {
    match format {
        PlotFormat::Csv => stats_csv(stats),
        PlotFormat::Svg => stats_svg(stats),
    }
}

fn stats_csv(stats: &DatasetStats) -> Vec<Artifact> {
    let mut box_rows = Vec::new();
    for f in Factor::ALL {
        for g in groups(stats) {
            let mut row = vec![f.as_str().to_string(), g.group.clone()];
            match &g.factor(f).summary {
                Some(s) => {
                    row.push(s.n.to_string());
                    for v in [s.mean, s.whisker_lo, s.q25, s.median, s.q75, s.whisker_hi] {
                        row.push(v.to_string());
                    }
                    row.push(s.outliers.len().to_string());
                    row.push(String::new());
                }
                None => {
                    row.push("0".into());
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push("no data; panel omitted".into());
                }
            }
            box_rows.push(row);
        }
    }
    let boxplots = csv_doc(
        &[
            "factor",
            "group",
            "n",
            "mean",
            "whisker_lo",
            "q25",
            "median",
            "q75",
            "whisker_hi",
            "outliers",
            "note",
        ],
        box_rows,
    );

    let sizes = csv_doc(
        &[
            "group",
            "small",
            "medium",
            "large",
            "total",
            "small_pct",
            "medium_pct",
            "large_pct",
        ],
        groups(stats)
            .map(|g| {
                let b = &g.size_buckets;
                let mut row = vec![g.group.clone()];
                row.extend(SizeBucket::ALL.map(|k| b.get(k).to_string()));
                row.push(b.total().to_string());
                match b.fractions() {
                    Some(fr) => row.extend(fr.map(|f| (f.value() * 100.0).to_string())),
                    None => row.extend(std::iter::repeat_n(String::new(), 3)),
                }
                row
            })
            .collect(),
    );

    let topology = csv_doc(
        &[
            "group",
            "measured",
            "with_holes",
            "holes_pct",
            "mean_holes_when_present",
            "multi_polygon",
            "multi_polygon_pct",
        ],
        groups(stats)
            .map(|g| {
                vec![
                    g.group.clone(),
                    g.holes.measured.to_string(),
                    g.holes.with_holes.to_string(),
                    opt(g.holes.fraction().map(|f| f.value() * 100.0)),
                    opt(g.holes.mean_holes_when_present()),
                    g.polygons.multi.to_string(),
                    opt(g.polygons.fraction().map(|f| f.value() * 100.0)),
                ]
            })
            .collect(),
    );

    let parts = csv_doc(
        &["part", "subpart_labels", "annotations", "multi_polygon"],
        stats
            .parts
            .iter()
            .map(|p| {
                vec![
                    p.part.clone(),
                    p.subpart_labels.to_string(),
                    p.annotations.to_string(),
                    p.multi_polygon.to_string(),
                ]
            })
            .collect(),
    );

    let subparts = csv_doc(
        &["part", "subpart", "annotations"],
        stats
            .parts
            .iter()
            .flat_map(|p| {
                p.occurrences
                    .iter()
                    .map(|(s, n)| vec![p.part.clone(), s.clone(), n.to_string()])
            })
            .collect(),
    );

    vec![
        Artifact {
            name: "stats_boxplots.csv".into(),
            contents: boxplots,
        },
        Artifact {
            name: "stats_sizes.csv".into(),
            contents: sizes,
        },
        Artifact {
            name: "stats_topology.csv".into(),
            contents: topology,
        },
        Artifact {
            name: "stats_parts.csv".into(),
            contents: parts,
        },
        Artifact {
            name: "stats_subparts.csv".into(),
            contents: subparts,
        },
    ]
}

const PANEL_W: f64 = 48.0;
const PLOT_H: f64 = 240.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 72.0;

fn svg_open(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.0} {height:.0}" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn y_axis(out: &mut String, lo: f64, hi: f64, scale: &dyn Fn(f64) -> f64) {
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{:.2}" stroke="black"/>"#,
        MARGIN_T + PLOT_H
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = scale(v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_L}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_L - 4.0,
            MARGIN_L - 6.0,
            y + 4.0,
            tick(v)
        );
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn x_label(out: &mut String, x: f64, label: &str) {
    let y = MARGIN_T + PLOT_H + 10.0;
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="end" transform="rotate(-45 {x:.2} {y:.2})">{}</text>"#,
        escape(label)
    );
}

fn boxplot_svg(stats: &DatasetStats, factor: Factor) -> Option<String> {
    let panels: Vec<&GroupStats> = groups(stats)
        .filter(|g| g.factor(factor).summary.is_some())
        .collect();
    if panels.is_empty() {
        return None;
    }
    let data_hi = panels
        .iter()
        .map(|g| g.factor(factor).values.last().copied().expect("non-empty"))
        .fold(0.0f64, f64::max);
    let (lo, hi) = (
        0.0,
        if factor == Factor::SubpartsPerPart {
            data_hi.max(1.0)
        } else {
            1.0f64.max(data_hi)
        },
    );
    let scale = |v: f64| MARGIN_T + PLOT_H * (1.0 - (v - lo) / (hi - lo));
    let width = MARGIN_L + PANEL_W * panels.len() as f64 + 16.0;
    let height = MARGIN_T + PLOT_H + MARGIN_B;
    let mut out = String::new();
    svg_open(&mut out, width, height, factor.title());
    y_axis(&mut out, lo, hi, &scale);
    for (k, g) in panels.iter().enumerate() {
        let s = g.factor(factor).summary.as_ref().expect("filtered");
        let cx = MARGIN_L + PANEL_W * (k as f64 + 0.5);
        let (x0, x1) = (cx - PANEL_W * 0.3, cx + PANEL_W * 0.3);
        let _ = writeln!(out, r#"<g data-group="{}">"#, escape(&g.group));
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            scale(s.whisker_lo),
            scale(s.whisker_hi)
        );
        for w in [s.whisker_lo, s.whisker_hi] {
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
                cx - PANEL_W * 0.15,
                cx + PANEL_W * 0.15,
                y = scale(w)
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="white" stroke="black"/>"#,
            scale(s.q75),
            x1 - x0,
            scale(s.q25) - scale(s.q75)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="blue" stroke-width="2"/>"#,
            y = scale(s.median)
        );
        for o in &s.outliers {
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.2}" cy="{:.2}" r="1.5" fill="none" stroke="gray"/>"#,
                scale(*o)
            );
        }
        out.push_str("</g>\n");
        x_label(&mut out, cx, &g.group);
    }
    out.push_str("</svg>\n");
    Some(out)
}

fn bar_svg(title: &str, bars: &[(String, f64)]) -> Option<String> {
    if bars.is_empty() {
        return None;
    }
    let hi = bars.iter().map(|b| b.1).fold(1.0f64, f64::max);
    let scale = |v: f64| MARGIN_T + PLOT_H * (1.0 - v / hi);
    let bar_w = 18.0;
    let width = MARGIN_L + bar_w * bars.len() as f64 + 16.0;
    let mut out = String::new();
    svg_open(&mut out, width, MARGIN_T + PLOT_H + MARGIN_B + 40.0, title);
    y_axis(&mut out, 0.0, hi, &scale);
    for (k, (label, v)) in bars.iter().enumerate() {
        let x = MARGIN_L + bar_w * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="steelblue"><title>{} {}</title></rect>"#,
            x + 2.0,
            scale(*v),
            bar_w - 4.0,
            MARGIN_T + PLOT_H - scale(*v),
            escape(label),
            v
        );
        x_label(&mut out, x + bar_w / 2.0, label);
    }
    out.push_str("</svg>\n");
    Some(out)
}

fn stats_svg(stats: &DatasetStats) -> Vec<Artifact> {
    let mut out: Vec<Artifact> = Factor::ALL
        .iter()
        .filter_map(|&f| {
            boxplot_svg(stats, f).map(|contents| Artifact {
                name: format!("fig_{}.svg", f.as_str()),
                contents,
            })
        })
        .collect();
    let labels: Vec<(String, f64)> = stats
        .parts
        .iter()
        .map(|p| (p.part.clone(), p.subpart_labels as f64))
        .collect();
    if let Some(c) = bar_svg("Subpart categories per part", &labels) {
        out.push(Artifact {
            name: "fig_subpart_labels.svg".into(),
            contents: c,
        });
    }
    let multi: Vec<(String, f64)> = stats
        .parts
        .iter()
        .map(|p| (p.part.clone(), p.multi_polygon as f64))
        .collect();
    if stats.parts.iter().any(|p| p.multi_polygon > 0) {
        if let Some(c) = bar_svg("Multi-polygon subpart annotations per part", &multi) {
            out.push(Artifact {
                name: "fig_multi_polygon.svg".into(),
                contents: c,
            });
        }
    }
    out
}

/// One row per fitted group.
pub fn regression_csv(fits: &[(String, Result<RegressionResult, String>)]) -> Artifact {
    let rows = fits
        .iter()
        .map(|(group, fit)| match fit {
            Ok(r) => vec![
                group.clone(),
                r.n.to_string(),
                r.beta0.to_string(),
                r.beta1.to_string(),
                r.r_squared.to_string(),
                r.p_value.to_string(),
                r.significant.to_string(),
                String::new(),
            ],
            Err(e) => {
                let mut row = vec![group.clone()];
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(e.clone());
                row
            }
        })
        .collect();
    Artifact {
        name: "regression.csv".into(),
        contents: csv_doc(
            &[
                "group",
                "n",
                "beta0",
                "beta1",
                "r_squared",
                "p_value",
                "significant",
                "note",
            ],
            rows,
        ),
    }
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn emit_plots(artifacts: &[Artifact], dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let p = dir.join(&a.name);
            std::fs::write(&p, &a.contents)?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::compute_stats;
    use crate::dataset::{parse_dataset_str, LoadOptions};
    use crate::Execution;

    fn stats() -> DatasetStats {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":10,"height":10,"split":"train","object":"car"}],
            "annotations":[
              {"image":"a","category":"car/tire","rings":[[[0,0],[5,0],[5,4],[0,4]]]},
              {"image":"a","category":"car/tire/rim","rings":[[[1,1],[3,1],[3,3],[1,3]]]}]}"#;
        compute_stats(
            &parse_dataset_str(doc, &LoadOptions::default()).unwrap(),
            &Execution::sequential(),
        )
    }

    #[test]
    fn deterministic_output() {
        let s = stats();
        for f in [PlotFormat::Csv, PlotFormat::Svg] {
            assert_eq!(stats_artifacts(&s, f), stats_artifacts(&s, f));
        }
    }

    #[test]
    fn empty_groups_get_note_rows_and_no_panel() {
        let s = stats();
        let csv = &stats_artifacts(&s, PlotFormat::Csv)[0].contents;
        assert!(csv
            .lines()
            .any(|l| l.starts_with("extent,bird,0,") && l.ends_with("no data; panel omitted")));
        let svgs = stats_artifacts(&s, PlotFormat::Svg);
        let extent = svgs.iter().find(|a| a.name == "fig_extent.svg").unwrap();
        assert!(extent.contents.contains(r#"data-group="car""#));
        assert!(!extent.contents.contains(r#"data-group="bird""#));
        assert_eq!(
            svgs.iter()
                .filter(|a| a.name.starts_with("fig_") && a.name != "fig_subpart_labels.svg")
                .count(),
            6
        );
    }
}

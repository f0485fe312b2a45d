use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use hiereval::analysis::{
    compute_stats, fit_iou_size, regression_csv, regression_points, stats_artifacts, PlotFormat,
    RegressionResult,
};
use hiereval::dataset::{
    load_answers, load_dataset_lenient, load_predictions, validate_dataset, Dataset, DatasetError,
    Expectations, PredictionSet, TaxonomySource,
};
use hiereval::metrics::{
    evaluate, long_table, recognition_table, score_queries, table2, EvalOptions, MetricReport,
    RecognitionReport, TableFormat,
};
use hiereval::Execution;

use crate::output::{paint, stdout_color, Color, Run};
use crate::{
    EvalArgs, Format, RecogArgs, RegressArgs, ReportArgs, StatsArgs, ValidateArgs, Workers,
};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable input or malformed documents.
    #[error("{0}")]
    Usage(String),
    /// Inputs parse but break a dataset rule, or a check failed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("cannot write {}: {e}", path.display()))
    }

    fn load(path: &Path, e: DatasetError) -> Self {
        let detail = match &e {
            DatasetError::Invalid(issues) => issues
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("\n  "),
            other => other.to_string(),
        };
        let msg = format!("{}: {detail}", path.display());
        if e.is_invariant_only() {
            CliError::Failed(msg)
        } else {
            CliError::Usage(msg)
        }
    }
}

type Outcome = Result<String, CliError>;

fn execution(w: &Workers) -> Execution {
    match w.workers {
        Some(n) => Execution::with_workers(n as usize),
        None => Execution::default(),
    }
}

/// Loads the dataset and records it, and a taxonomy file it names, as
/// inputs. Invariant problems fail under `strict` and are reported on
/// stderr otherwise.
fn dataset(
    run: &mut Run,
    path: &Path,
    strict: bool,
) -> Result<(Dataset, Vec<hiereval::dataset::Issue>), CliError> {
    run.input("dataset", path)?;
    let (ds, issues) = load_dataset_lenient(path, strict).map_err(|e| CliError::load(path, e))?;
    if let TaxonomySource::File(t) = &ds.taxonomy_source {
        let base = path.parent().unwrap_or(Path::new(""));
        run.input("taxonomy", &base.join(t))?;
    }
    Ok((ds, issues))
}

fn require_valid(
    ds_path: &Path,
    issues: &[hiereval::dataset::Issue],
    strict: bool,
) -> Result<(), CliError> {
    if issues.is_empty() {
        return Ok(());
    }
    if strict {
        return Err(CliError::load(
            ds_path,
            DatasetError::Invalid(issues.to_vec()),
        ));
    }
    eprintln!(
        "warning: {}: {} record(s) dropped, first: {}",
        ds_path.display(),
        issues.len(),
        issues[0]
    );
    Ok(())
}

fn predictions(
    run: &mut Run,
    paths: &[std::path::PathBuf],
    mode: crate::Mode,
    ds: &Dataset,
    strict: bool,
) -> Result<Vec<(String, PredictionSet)>, CliError> {
    paths
        .iter()
        .map(|p| {
            run.input("predictions", p)?;
            let set =
                load_predictions(p, mode.into(), ds, strict).map_err(|e| CliError::load(p, e))?;
            Ok((method_name(set.method(), p), set))
        })
        .collect()
}

fn method_name(method: Option<&str>, path: &Path) -> String {
    match method {
        Some(m) => m.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "predictions".into()),
    }
}

fn ext(format: TableFormat) -> &'static str {
    match format {
        TableFormat::Csv => "csv",
        TableFormat::Markdown => "md",
    }
}

fn status(ok: bool) -> String {
    if ok {
        paint("ok", Color::Green, stdout_color())
    } else {
        paint("FAILED", Color::Red, stdout_color())
    }
}

pub fn validate(a: &ValidateArgs) -> Outcome {
    let mut expect = Expectations::new();
    for e in &a.expect {
        expect.add(e).map_err(CliError::Usage)?;
    }
    let config = json!({
        "strict": a.common.strict,
        "expect": a.expect,
        "mode": mode_str(a.mode),
    });
    let mut run = Run::new("validate", config, &a.common.out);
    let (ds, issues) = dataset(&mut run, &a.dataset, a.common.strict)?;
    let sets = predictions(&mut run, &a.predictions, a.mode, &ds, a.common.strict)?;
    let report = validate_dataset(&ds, &issues, &expect, &execution(&a.workers));
    run.write_json("validation.json", &report)?;
    let out = run.finish()?;

    let total: u64 =
        report.annotations.object + report.annotations.part + report.annotations.subpart;
    let summary = format!(
        "validate: {}, {} images, {} annotations, {} issue(s), {}/{} checks, {} prediction file(s) -> {}",
        status(report.passed),
        report.images,
        total,
        report.issues.len(),
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        sets.len(),
        out.display()
    );
    if report.passed {
        return Ok(summary);
    }
    println!("{summary}");
    let mut lines: Vec<String> = report.failed_checks().map(ToString::to_string).collect();
    lines.extend(report.issues.iter().map(ToString::to_string));
    Err(CliError::Failed(format!(
        "validation failed\n  {}",
        lines.join("\n  ")
    )))
}

fn mode_str(m: crate::Mode) -> &'static str {
    match m {
        crate::Mode::Query => "query",
        crate::Mode::Semantic => "semantic",
    }
}

pub fn stats(a: &StatsArgs) -> Outcome {
    let plot = match a.format {
        Format::Csv => PlotFormat::Csv,
        Format::Svg => PlotFormat::Svg,
        Format::Md => return Err(CliError::Usage("stats supports --format csv or svg".into())),
    };
    let config = json!({ "strict": a.common.strict, "format": a.format.as_str() });
    let mut run = Run::new("stats", config, &a.common.out);
    let (ds, issues) = dataset(&mut run, &a.dataset, a.common.strict)?;
    require_valid(&a.dataset, &issues, a.common.strict)?;
    let stats = compute_stats(&ds, &execution(&a.workers));
    run.write_json("stats.json", &stats)?;
    let mut artifacts = stats_artifacts(&stats, PlotFormat::Csv);
    if plot == PlotFormat::Svg {
        artifacts.extend(stats_artifacts(&stats, PlotFormat::Svg));
    }
    for art in &artifacts {
        run.write(&art.name, &art.contents)?;
    }
    let out = run.finish()?;
    Ok(format!(
        "stats: {} subpart annotations ({} skipped) over {} object categories, {} file(s) -> {}",
        stats.overall.subparts,
        stats.overall.skipped,
        stats.objects.len(),
        artifacts.len() + 1,
        out.display()
    ))
}

/// File written by `eval` and read back by `report`.
#[derive(Serialize, Deserialize)]
struct EvalFile {
    kind: String,
    reports: Vec<MetricReport>,
}

/// File written by `recog` and read back by `report`.
#[derive(Serialize, Deserialize)]
struct RecogFile {
    kind: String,
    reports: Vec<RecognitionReport>,
}

fn with_fallback_method(mut report: MetricReport, name: &str) -> MetricReport {
    report.method.get_or_insert_with(|| name.to_string());
    report
}

pub fn eval(a: &EvalArgs) -> Outcome {
    let format = a.format.table()?;
    let config = json!({
        "strict": a.common.strict,
        "mode": mode_str(a.mode),
        "averaging": hiereval::metrics::Averaging::from(a.averaging).as_str(),
        "specificity": a.specificity.as_str(),
        "format": a.format.as_str(),
    });
    let mut run = Run::new("eval", config, &a.common.out);
    let (ds, issues) = dataset(&mut run, &a.dataset, a.common.strict)?;
    require_valid(&a.dataset, &issues, a.common.strict)?;
    let sets = predictions(&mut run, &a.predictions, a.mode, &ds, a.common.strict)?;
    let exec = execution(&a.workers);
    let options = EvalOptions {
        averaging: a.averaging.into(),
        specificities: a.specificity.selected(),
    };
    let reports: Vec<MetricReport> = sets
        .iter()
        .map(|(name, set)| with_fallback_method(evaluate(set, &ds, &options, &exec), name))
        .collect();
    let queries: u64 = reports
        .iter()
        .flat_map(|r| &r.specificities)
        .map(|s| s.queries)
        .sum();
    write_eval_tables(&mut run, &reports, format)?;
    run.write_json(
        "eval.json",
        &EvalFile {
            kind: "eval".into(),
            reports,
        },
    )?;
    let out = run.finish()?;
    Ok(format!(
        "eval: {} prediction set(s), {queries} queries scored -> {}",
        sets.len(),
        out.display()
    ))
}

fn write_eval_tables(
    run: &mut Run,
    reports: &[MetricReport],
    format: TableFormat,
) -> Result<(), CliError> {
    let e = ext(format);
    run.write(&format!("table2.{e}"), &table2(reports).render(format))?;
    run.write(
        &format!("eval_long.{e}"),
        &long_table(reports).render(format),
    )
}

pub fn recog(a: &RecogArgs) -> Outcome {
    let format = a.format.table()?;
    let config = json!({ "strict": a.common.strict, "format": a.format.as_str() });
    let mut run = Run::new("recog", config, &a.common.out);
    let (ds, issues) = dataset(&mut run, &a.dataset, a.common.strict)?;
    require_valid(&a.dataset, &issues, a.common.strict)?;
    let mut reports = Vec::new();
    let mut answered = 0;
    for p in &a.predictions {
        run.input("answers", p)?;
        let answers = load_answers(p, &ds, a.common.strict).map_err(|e| CliError::load(p, e))?;
        answered += answers.answers.len();
        let mut r = RecognitionReport::from_answers(&answers, &ds);
        r.method.get_or_insert_with(|| method_name(None, p));
        reports.push(r);
    }
    run.write(
        &format!("table3.{}", ext(format)),
        &recognition_table(&reports).render(format),
    )?;
    run.write_json(
        "recog.json",
        &RecogFile {
            kind: "recog".into(),
            reports,
        },
    )?;
    let out = run.finish()?;
    Ok(format!(
        "recog: {} answer set(s), {answered} answers scored -> {}",
        a.predictions.len(),
        out.display()
    ))
}

#[derive(Serialize)]
struct RegressionRow {
    method: String,
    group: String,
    #[serde(flatten)]
    fit: Option<RegressionResult>,
    error: Option<String>,
}

pub fn regress(a: &RegressArgs) -> Outcome {
    let config = json!({
        "strict": a.common.strict,
        "mode": mode_str(a.mode),
        "specificity": a.specificity.as_str(),
        "group_by": format!("{:?}", a.group_by).to_lowercase(),
    });
    let mut run = Run::new("regress", config, &a.common.out);
    let (ds, issues) = dataset(&mut run, &a.dataset, a.common.strict)?;
    require_valid(&a.dataset, &issues, a.common.strict)?;
    let sets = predictions(&mut run, &a.predictions, a.mode, &ds, a.common.strict)?;
    let exec = execution(&a.workers);
    let wanted = a.specificity.selected();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (name, set) in &sets {
        let scores: Vec<_> = score_queries(set, &ds, &exec)
            .into_iter()
            .filter(|s| wanted.contains(&s.specificity))
            .collect();
        for (group, points) in regression_points(&scores, &ds, a.group_by.into()) {
            let fit = fit_iou_size(&points).map_err(|e| e.to_string());
            fits.push((format!("{name}/{group}"), fit.clone()));
            rows.push(RegressionRow {
                method: name.clone(),
                group,
                error: fit.as_ref().err().cloned(),
                fit: fit.ok(),
            });
        }
    }
    let csv = regression_csv(&fits);
    run.write(&csv.name, &csv.contents)?;
    run.write_json("regression.json", &rows)?;
    let out = run.finish()?;
    let significant = rows
        .iter()
        .filter(|r| r.fit.as_ref().is_some_and(|f| f.significant))
        .count();
    Ok(format!(
        "regress: {} group(s) fitted, {significant} significant -> {}",
        rows.iter().filter(|r| r.fit.is_some()).count(),
        out.display()
    ))
}

pub fn report(a: &ReportArgs) -> Outcome {
    let format = a.format.table()?;
    let config = json!({ "format": a.format.as_str() });
    let mut run = Run::new("report", config, &a.common.out);
    let mut evals: Vec<MetricReport> = Vec::new();
    let mut recogs: Vec<RecognitionReport> = Vec::new();
    for p in &a.inputs {
        run.input("report", p)?;
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        let bad = |e: serde_json::Error| CliError::Usage(format!("{}: {e}", p.display()));
        match value.get("kind").and_then(|k| k.as_str()) {
            Some("eval") => evals.extend(
                serde_json::from_value::<EvalFile>(value)
                    .map_err(bad)?
                    .reports,
            ),
            Some("recog") => recogs.extend(
                serde_json::from_value::<RecogFile>(value)
                    .map_err(bad)?
                    .reports,
            ),
            _ => {
                return Err(CliError::Usage(format!(
                    "{}: not an eval.json or recog.json output",
                    p.display()
                )))
            }
        }
    }
    if !evals.is_empty() {
        write_eval_tables(&mut run, &evals, format)?;
    }
    if !recogs.is_empty() {
        run.write(
            &format!("table3.{}", ext(format)),
            &recognition_table(&recogs).render(format),
        )?;
    }
    let out = run.finish()?;
    Ok(format!(
        "report: {} eval row(s), {} recognition row(s) -> {}",
        evals.iter().map(|r| r.specificities.len()).sum::<usize>(),
        recogs.len(),
        out.display()
    ))
}

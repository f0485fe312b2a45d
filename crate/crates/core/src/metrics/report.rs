use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    abstention_rate, image_pairs, image_scores, miou, query_masks, recognition_accuracy, secs,
    semantic_queries, spcs, Averaging, PairSet, QueryScore, Skipped,
};
use crate::dataset::{AnswerSet, Dataset, PredictionMode, PredictionSet, QueryPrediction};
use crate::exec::Execution;
use crate::fraction::{RatioMean, Tally};
use crate::taxonomy::{Level, Specificity};

/// A mean with the number of terms behind it. `value` is `None` when `n` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStat {
    pub value: Option<f64>,
    pub n: u64,
}

impl From<&RatioMean> for MeanStat {
    fn from(m: &RatioMean) -> Self {
        MeanStat {
            value: m.mean(),
            n: m.len() as u64,
        }
    }
}

/// An exact ratio of counts. `value` is `None` when `den` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TallyStat {
    pub value: Option<f64>,
    pub num: u64,
    pub den: u64,
}

impl From<Tally> for TallyStat {
    fn from(t: Tally) -> Self {
        TallyStat {
            value: t.fraction().map(|f| f.value()),
            num: t.num,
            den: t.den,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats<T> {
    pub subpart: T,
    pub part: T,
    pub object: T,
}

impl<T> LevelStats<T> {
    pub fn from_fn(mut f: impl FnMut(Level) -> T) -> Self {
        LevelStats {
            subpart: f(Level::Subpart),
            part: f(Level::Part),
            object: f(Level::Object),
        }
    }

    pub fn get(&self, level: Level) -> &T {
        match level {
            Level::Subpart => &self.subpart,
            Level::Part => &self.part,
            Level::Object => &self.object,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcsStats {
    /// Pair-weighted mean over both relations.
    pub avg: MeanStat,
    pub s2p: MeanStat,
    pub p2o: MeanStat,
    /// Unweighted mean of `s2p` and `p2o` when both exist.
    pub mean_of_relations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub level: Level,
    pub miou: MeanStat,
    /// Queries that abstained or predicted no pixels.
    pub empty: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecificityReport {
    pub specificity: Specificity,
    pub queries: u64,
    pub miou: LevelStats<MeanStat>,
    pub spcs: SpcsStats,
    pub skipped: Skipped,
    /// Pooled over images; only semantic predictions define it.
    pub secs: TallyStat,
    pub abstention: LevelStats<TallyStat>,
    pub categories: Vec<CategoryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: Option<String>,
    pub params: Option<String>,
    pub mode: PredictionMode,
    pub averaging: Averaging,
    pub specificities: Vec<SpecificityReport>,
}

impl MetricReport {
    pub fn get(&self, specificity: Specificity) -> Option<&SpecificityReport> {
        self.specificities
            .iter()
            .find(|s| s.specificity == specificity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub averaging: Averaging,
    pub specificities: Vec<Specificity>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            averaging: Averaging::PerQuery,
            specificities: Specificity::ALL.to_vec(),
        }
    }
}

#[derive(Default)]
struct ImageEval {
    scores: Vec<QueryScore>,
    pairs: BTreeMap<Specificity, PairSet>,
    secs: BTreeMap<Specificity, Tally>,
}

fn eval_image(
    set: &PredictionSet,
    dataset: &Dataset,
    image: usize,
    members: &[usize],
    wanted: &[Specificity],
) -> ImageEval {
    let gt = dataset.ground_truth(image);
    let tax = &dataset.taxonomy;
    let mut out = ImageEval::default();
    let owned: Vec<QueryPrediction>;
    let queries: Vec<&QueryPrediction> = match set {
        PredictionSet::Query { predictions, .. } => members
            .iter()
            .map(|&i| &predictions[i])
            .filter(|q| wanted.contains(&q.specificity))
            .collect(),
        PredictionSet::Semantic { predictions, .. } => {
            let mut qs = Vec::new();
            for &i in members {
                let p = &predictions[i];
                if !wanted.contains(&p.specificity) {
                    continue;
                }
                let t = secs(p, tax).expect("maps decoded at image dims");
                let slot = out.secs.entry(p.specificity).or_default();
                *slot = slot.merge(t);
                qs.extend(semantic_queries(p, &gt));
            }
            owned = qs;
            owned.iter().collect()
        }
    };
    let masks = query_masks(dataset, &queries);
    out.scores = image_scores(tax, &gt, &queries, &masks);
    for &sp in wanted {
        let (qs, ms): (Vec<&QueryPrediction>, Vec<_>) = queries
            .iter()
            .zip(&masks)
            .filter(|(q, _)| q.specificity == sp)
            .map(|(q, m)| (*q, m.clone()))
            .unzip();
        if !qs.is_empty() {
            out.pairs.insert(sp, image_pairs(tax, &qs, &ms));
        }
    }
    out
}

/// Full metric suite for one prediction set.
pub fn evaluate(
    set: &PredictionSet,
    dataset: &Dataset,
    options: &EvalOptions,
    exec: &Execution,
) -> MetricReport {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); dataset.images.len()];
    match set {
        PredictionSet::Query { predictions, .. } => {
            for (i, p) in predictions.iter().enumerate() {
                members[p.image].push(i);
            }
        }
        PredictionSet::Semantic { predictions, .. } => {
            for (i, p) in predictions.iter().enumerate() {
                members[p.image].push(i);
            }
        }
    }
    let active: Vec<usize> = (0..members.len())
        .filter(|&i| !members[i].is_empty())
        .collect();
    let wanted = &options.specificities;
    let per_image = exec.map(&active, |&i| {
        eval_image(set, dataset, i, &members[i], wanted)
    });

    let mut scores = Vec::new();
    let mut pairs: BTreeMap<Specificity, PairSet> = BTreeMap::new();
    let mut secs_total: BTreeMap<Specificity, Tally> = BTreeMap::new();
    for r in per_image {
        scores.extend(r.scores);
        for (sp, p) in r.pairs {
            let slot = pairs.entry(sp).or_default();
            slot.pairs.extend(p.pairs);
            slot.skipped = merge_skipped(slot.skipped, p.skipped);
        }
        for (sp, t) in r.secs {
            let slot = secs_total.entry(sp).or_default();
            *slot = slot.merge(t);
        }
    }

    let specificities = Specificity::ALL
        .into_iter()
        .filter(|sp| wanted.contains(sp))
        .map(|sp| {
            let ps = pairs.remove(&sp).unwrap_or_default();
            let sc = spcs(&ps);
            let (s2p, p2o) = (sc.s2p.mean(), sc.p2o.mean());
            let mut per_cat: BTreeMap<String, (Level, RatioMean, u64)> = BTreeMap::new();
            for s in scores.iter().filter(|s| s.specificity == sp) {
                let e = per_cat
                    .entry(dataset.path_of(s.category).to_string())
                    .or_insert_with(|| (s.level, RatioMean::default(), 0));
                e.1.push(s.iou);
                e.2 += s.empty as u64;
            }
            SpecificityReport {
                specificity: sp,
                queries: scores.iter().filter(|s| s.specificity == sp).count() as u64,
                miou: LevelStats::from_fn(|l| miou(&scores, l, Some(sp), options.averaging)),
                spcs: SpcsStats {
                    avg: MeanStat::from(&sc.avg),
                    s2p: MeanStat::from(&sc.s2p),
                    p2o: MeanStat::from(&sc.p2o),
                    mean_of_relations: s2p.zip(p2o).map(|(a, b)| (a + b) / 2.0),
                },
                skipped: ps.skipped,
                secs: TallyStat::from(secs_total.get(&sp).copied().unwrap_or_default()),
                abstention: LevelStats::from_fn(|l| {
                    TallyStat::from(abstention_rate(&scores, l, Some(sp)))
                }),
                categories: per_cat
                    .into_iter()
                    .map(|(category, (level, m, empty))| CategoryRow {
                        category,
                        level,
                        miou: MeanStat::from(&m),
                        empty,
                    })
                    .collect(),
            }
        })
        .collect();

    MetricReport {
        method: set.method().map(str::to_string),
        params: set.params().map(str::to_string),
        mode: set.mode(),
        averaging: options.averaging,
        specificities,
    }
}

fn merge_skipped(mut a: Skipped, b: Skipped) -> Skipped {
    a.merge(&b);
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionCell {
    /// Table column, e.g. `mACC_PS` for specific part prompts.
    pub column: String,
    pub level: Level,
    pub specificity: Specificity,
    pub accuracy: TallyStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionReport {
    pub method: Option<String>,
    pub params: Option<String>,
    pub prompt: Option<String>,
    pub cells: Vec<RecognitionCell>,
}

impl RecognitionReport {
    /// Column order of the recognition table.
    pub const CELLS: [(Level, Specificity); 6] = [
        (Level::Subpart, Specificity::General),
        (Level::Subpart, Specificity::Specific),
        (Level::Part, Specificity::General),
        (Level::Part, Specificity::Specific),
        (Level::Object, Specificity::General),
        (Level::Object, Specificity::Specific),
    ];

    pub fn column(level: Level, specificity: Specificity) -> String {
        let suffix = if specificity == Specificity::Specific {
            "S"
        } else {
            ""
        };
        format!("mACC_{}{suffix}", level.letter())
    }

    pub fn from_answers(answers: &AnswerSet, dataset: &Dataset) -> Self {
        let cells = recognition_accuracy(answers, dataset);
        RecognitionReport {
            method: answers.method.clone(),
            params: answers.params.clone(),
            prompt: answers.prompt.clone(),
            cells: Self::CELLS
                .iter()
                .map(|&(level, sp)| RecognitionCell {
                    column: Self::column(level, sp),
                    level,
                    specificity: sp,
                    accuracy: TallyStat::from(cells.get(&(level, sp)).copied().unwrap_or_default()),
                })
                .collect(),
        }
    }
}

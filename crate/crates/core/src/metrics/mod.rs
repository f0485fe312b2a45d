//! Scoring functions.
//!
//! Every per-image kernel is pure and returns exact pixel counts; means are
//! taken afterwards over [`RatioMean`] / [`Tally`] accumulators, so results
//! do not depend on the worker count.

mod report;
mod table;

pub use report::{
    evaluate, CategoryRow, EvalOptions, LevelStats, MeanStat, MetricReport, RecognitionCell,
    RecognitionReport, SpecificityReport, TallyStat,
};
pub use table::{long_table, recognition_table, table2, Table, TableFormat};

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    AnswerSet, Dataset, GroundTruth, LevelMap, Payload, PredictionSet, QueryPrediction,
    SemanticPrediction,
};
use crate::exec::Execution;
use crate::fraction::{stable_sum, Fraction, RatioMean, Tally};
use crate::geometry::{containment_ratio, iou, BitMask, GeometryError};
use crate::taxonomy::{Level, NodeId, Specificity, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    S2P,
    P2O,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    #[default]
    PerQuery,
    PerCategory,
}

impl Averaging {
    pub fn as_str(self) -> &'static str {
        match self {
            Averaging::PerQuery => "per-query",
            Averaging::PerCategory => "per-category",
        }
    }
}

/// A child prediction and its taxonomy parent's prediction on one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub image: usize,
    pub child: NodeId,
    pub parent: NodeId,
    pub specificity: Specificity,
    pub relation: Relation,
    /// `|child ∩ parent| / |child|`.
    pub containment: Fraction,
}

/// Related pairs that could not be scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Skipped {
    /// Child abstained or predicted no pixels.
    pub s2p_child: u64,
    pub p2o_child: u64,
    /// Child has pixels but the parent query abstained.
    pub s2p_parent: u64,
    pub p2o_parent: u64,
}

impl Skipped {
    fn bump(&mut self, relation: Relation, child: bool) {
        let slot = match (relation, child) {
            (Relation::S2P, true) => &mut self.s2p_child,
            (Relation::P2O, true) => &mut self.p2o_child,
            (Relation::S2P, false) => &mut self.s2p_parent,
            (Relation::P2O, false) => &mut self.p2o_parent,
        };
        *slot += 1;
    }

    fn merge(&mut self, other: &Skipped) {
        self.s2p_child += other.s2p_child;
        self.p2o_child += other.p2o_child;
        self.s2p_parent += other.s2p_parent;
        self.p2o_parent += other.p2o_parent;
    }

    pub fn child(&self, relation: Relation) -> u64 {
        match relation {
            Relation::S2P => self.s2p_child,
            Relation::P2O => self.p2o_child,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet {
    pub pairs: Vec<Pair>,
    pub skipped: Skipped,
}

impl PairSet {
    pub fn of(&self, relation: Relation) -> impl Iterator<Item = &Pair> {
        self.pairs.iter().filter(move |p| p.relation == relation)
    }
}

/// One query's IoU against the ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryScore {
    pub image: usize,
    pub category: NodeId,
    pub level: Level,
    pub specificity: Specificity,
    pub iou: Fraction,
    pub abstained: bool,
    /// Predicted no pixels (abstentions included).
    pub empty: bool,
    /// Pixel area of the ground-truth region.
    pub truth_area: u64,
}

fn relation_of(level: Level) -> Option<Relation> {
    match level {
        Level::Subpart => Some(Relation::S2P),
        Level::Part => Some(Relation::P2O),
        Level::Object => None,
    }
}

/// Query predictions grouped by image index.
fn by_image(queries: &[QueryPrediction], images: usize) -> Vec<Vec<&QueryPrediction>> {
    let mut groups = vec![Vec::new(); images];
    for q in queries {
        groups[q.image].push(q);
    }
    groups
}

fn query_masks(dataset: &Dataset, queries: &[&QueryPrediction]) -> Vec<Option<BitMask>> {
    queries
        .iter()
        .map(|q| {
            let im = &dataset.images[q.image];
            q.mask(im.width, im.height)
        })
        .collect()
}

fn image_pairs(
    taxonomy: &Taxonomy,
    queries: &[&QueryPrediction],
    masks: &[Option<BitMask>],
) -> PairSet {
    let index: HashMap<(NodeId, Specificity), usize> = queries
        .iter()
        .enumerate()
        .map(|(i, q)| ((q.category, q.specificity), i))
        .collect();
    let mut out = PairSet::default();
    for (i, q) in queries.iter().enumerate() {
        let Some(relation) = relation_of(taxonomy.node(q.category).level) else {
            continue;
        };
        let parent = taxonomy
            .parent_of(q.category)
            .expect("non-object nodes have parents");
        let Some(&j) = index.get(&(parent, q.specificity)) else {
            continue;
        };
        let child_mask = match &masks[i] {
            Some(m) if m.area() > 0 => m,
            _ => {
                out.skipped.bump(relation, true);
                continue;
            }
        };
        let Some(parent_mask) = &masks[j] else {
            out.skipped.bump(relation, false);
            continue;
        };
        out.pairs.push(Pair {
            image: q.image,
            child: q.category,
            parent,
            specificity: q.specificity,
            relation,
            containment: containment_ratio(child_mask, parent_mask).expect("same image dims"),
        });
    }
    out
}

fn image_scores(
    taxonomy: &Taxonomy,
    gt: &GroundTruth,
    queries: &[&QueryPrediction],
    masks: &[Option<BitMask>],
) -> Vec<QueryScore> {
    let empty = gt.empty_mask();
    queries
        .iter()
        .zip(masks)
        .map(|(q, mask)| {
            let truth = gt.mask(q.category).unwrap_or(&empty);
            // An abstention is scored as an empty prediction: zero on a
            // present category, agreement on an absent one.
            let predicted = mask.as_ref().unwrap_or(&empty);
            QueryScore {
                image: q.image,
                category: q.category,
                level: taxonomy.node(q.category).level,
                specificity: q.specificity,
                iou: iou(predicted, truth).expect("same image dims"),
                abstained: mask.is_none(),
                empty: predicted.area() == 0,
                truth_area: truth.area(),
            }
        })
        .collect()
}

/// Query-mode view of a prediction set. Semantic label maps become one mask
/// query per category that is predicted or annotated on the image.
pub fn to_queries<'a>(
    set: &'a PredictionSet,
    dataset: &Dataset,
    exec: &Execution,
) -> Cow<'a, [QueryPrediction]> {
    match set {
        PredictionSet::Query { predictions, .. } => Cow::Borrowed(predictions),
        PredictionSet::Semantic { predictions, .. } => Cow::Owned(
            exec.map(predictions, |p| {
                semantic_queries(p, &dataset.ground_truth(p.image))
            })
            .into_iter()
            .flatten()
            .collect(),
        ),
    }
}

/// Splits one semantic prediction into per-category mask queries.
pub fn semantic_queries(pred: &SemanticPrediction, gt: &GroundTruth) -> Vec<QueryPrediction> {
    let mut masks: BTreeMap<NodeId, BitMask> = BTreeMap::new();
    for map in [&pred.object, &pred.part, &pred.subpart] {
        for &node in &map.palette {
            let m = map.mask_of(node).expect("palette entry");
            if m.area() > 0 {
                masks.insert(node, m);
            }
        }
    }
    for (&node, m) in &gt.masks {
        if m.area() > 0 {
            masks.entry(node).or_insert_with(|| gt.empty_mask());
        }
    }
    masks
        .into_iter()
        .map(|(category, m)| QueryPrediction {
            image: pred.image,
            category,
            specificity: pred.specificity,
            payload: Payload::Mask(m),
        })
        .collect()
}

/// All related (child, parent) prediction pairs, per image and specificity.
pub fn build_pairs(set: &PredictionSet, dataset: &Dataset, exec: &Execution) -> PairSet {
    let queries = to_queries(set, dataset, exec);
    let groups = by_image(&queries, dataset.images.len());
    let per_image = exec.map(&groups, |qs| {
        if qs.is_empty() {
            return PairSet::default();
        }
        image_pairs(&dataset.taxonomy, qs, &query_masks(dataset, qs))
    });
    let mut out = PairSet::default();
    for p in per_image {
        out.pairs.extend(p.pairs);
        out.skipped.merge(&p.skipped);
    }
    out
}

/// Containment means: pair-weighted over all pairs, then per relation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spcs {
    pub avg: RatioMean,
    pub s2p: RatioMean,
    pub p2o: RatioMean,
}

pub fn spcs(pairs: &PairSet) -> Spcs {
    let mut out = Spcs::default();
    for p in &pairs.pairs {
        out.avg.push(p.containment);
        match p.relation {
            Relation::S2P => out.s2p.push(p.containment),
            Relation::P2O => out.p2o.push(p.containment),
        }
    }
    out
}

/// Pixels foreground at all three levels (denominator) and those whose
/// subpart→part→object labels form a taxonomy chain (numerator).
pub fn secs(pred: &SemanticPrediction, taxonomy: &Taxonomy) -> Result<Tally, GeometryError> {
    let dims = pred.object.map.dims();
    for other in [pred.part.map.dims(), pred.subpart.map.dims()] {
        if other != dims {
            return Err(GeometryError::DimensionMismatch { a: dims, b: other });
        }
    }
    let (o, p, s) = (
        pred.object.map.labels(),
        pred.part.map.labels(),
        pred.subpart.map.labels(),
    );
    let chain = |map: &LevelMap, v: u32| map.palette[v as usize - 1];
    let mut tally = Tally::default();
    for i in 0..o.len() {
        if o[i] == 0 || p[i] == 0 || s[i] == 0 {
            continue;
        }
        let (on, pn, sn) = (
            chain(&pred.object, o[i]),
            chain(&pred.part, p[i]),
            chain(&pred.subpart, s[i]),
        );
        tally.add(taxonomy.entails_ids(sn, pn) && taxonomy.entails_ids(pn, on));
    }
    Ok(tally)
}

/// IoU of every query against the union of its category's annotations.
pub fn score_queries(set: &PredictionSet, dataset: &Dataset, exec: &Execution) -> Vec<QueryScore> {
    let queries = to_queries(set, dataset, exec);
    let groups = by_image(&queries, dataset.images.len());
    let indices: Vec<usize> = (0..groups.len()).collect();
    exec.map(&indices, |&i| {
        let qs = &groups[i];
        if qs.is_empty() {
            return Vec::new();
        }
        image_scores(
            &dataset.taxonomy,
            &dataset.ground_truth(i),
            qs,
            &query_masks(dataset, qs),
        )
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Mean IoU at `level`. Per-query averages all matching queries; per-category
/// averages each category's queries first, then the categories.
pub fn miou(
    scores: &[QueryScore],
    level: Level,
    specificity: Option<Specificity>,
    averaging: Averaging,
) -> MeanStat {
    let selected = scores
        .iter()
        .filter(|s| s.level == level && specificity.is_none_or(|sp| s.specificity == sp));
    match averaging {
        Averaging::PerQuery => {
            let m: RatioMean = selected.map(|s| s.iou).collect();
            MeanStat::from(&m)
        }
        Averaging::PerCategory => {
            let mut per: BTreeMap<NodeId, RatioMean> = BTreeMap::new();
            for s in selected {
                per.entry(s.category).or_default().push(s.iou);
            }
            let means: Vec<f64> = per.values().filter_map(RatioMean::mean).collect();
            MeanStat {
                value: (!means.is_empty())
                    .then(|| stable_sum(means.iter().copied()) / means.len() as f64),
                n: means.len() as u64,
            }
        }
    }
}

/// Share of queries at `level` that abstained or predicted no pixels.
pub fn abstention_rate(
    scores: &[QueryScore],
    level: Level,
    specificity: Option<Specificity>,
) -> Tally {
    scores
        .iter()
        .filter(|s| s.level == level && specificity.is_none_or(|sp| s.specificity == sp))
        .map(|s| Tally {
            num: s.empty as u64,
            den: 1,
        })
        .sum()
}

/// Correct answers per (level, specificity) cell.
pub fn recognition_accuracy(
    answers: &AnswerSet,
    dataset: &Dataset,
) -> BTreeMap<(Level, Specificity), Tally> {
    let mut cells: BTreeMap<(Level, Specificity), Tally> = BTreeMap::new();
    for a in &answers.answers {
        let level = dataset.taxonomy.node(a.category).level;
        cells
            .entry((level, a.specificity))
            .or_default()
            .add(a.is_correct());
    }
    cells
}

/// Label maps painted from an image's ground truth in annotation order.
pub fn ground_truth_semantic(
    dataset: &Dataset,
    image: usize,
    specificity: Specificity,
) -> SemanticPrediction {
    let im = &dataset.images[image];
    let mut maps = [
        LevelMap::empty(im.width, im.height),
        LevelMap::empty(im.width, im.height),
        LevelMap::empty(im.width, im.height),
    ];
    for a in dataset.annotations_of(image) {
        let level = dataset.taxonomy.node(a.category).level;
        let mask = dataset.rasterize_annotation(a);
        if mask.area() > 0 {
            maps[level as usize].paint(&mask, a.category);
        }
    }
    let [subpart, part, object] = maps;
    SemanticPrediction {
        image,
        specificity,
        object,
        part,
        subpart,
    }
}

/// One mask query per annotated (image, category), equal to the ground truth.
pub fn ground_truth_queries(dataset: &Dataset, specificity: Specificity) -> PredictionSet {
    let mut predictions = Vec::new();
    for image in 0..dataset.images.len() {
        for (&category, mask) in &dataset.ground_truth(image).masks {
            predictions.push(QueryPrediction {
                image,
                category,
                specificity,
                payload: Payload::Mask(mask.clone()),
            });
        }
    }
    PredictionSet::Query {
        method: Some("ground truth".into()),
        params: None,
        predictions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_dataset_str, LoadOptions};
    use crate::geometry::BBox;

    fn dataset() -> Dataset {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":8,"height":8,"split":"test","object":"quadruped"}],
            "annotations":[
              {"image":"a","category":"quadruped","rings":[[[0,0],[8,0],[8,8],[0,8]]]},
              {"image":"a","category":"quadruped/head","rings":[[[0,0],[4,0],[4,4],[0,4]]]},
              {"image":"a","category":"quadruped/head/eyes","rings":[[[1,1],[3,1],[3,3],[1,3]]]}]}"#;
        parse_dataset_str(doc, &LoadOptions::default()).unwrap()
    }

    fn node(d: &Dataset, p: &str) -> NodeId {
        d.taxonomy.get(&p.parse().unwrap()).unwrap().id
    }

    fn query(d: &Dataset, p: &str, payload: Payload) -> QueryPrediction {
        QueryPrediction {
            image: 0,
            category: node(d, p),
            specificity: Specificity::General,
            payload,
        }
    }

    fn boxed(x0: u32, y0: u32, x1: u32, y1: u32) -> Payload {
        Payload::Boxes {
            boxes: vec![BBox::new(x0, y0, x1, y1).unwrap()],
            nested: false,
        }
    }

    fn set(predictions: Vec<QueryPrediction>) -> PredictionSet {
        PredictionSet::Query {
            method: None,
            params: None,
            predictions,
        }
    }

    #[test]
    fn pairs_follow_taxonomy() {
        let d = dataset();
        let s = set(vec![
            query(&d, "quadruped/head/eyes", boxed(1, 1, 2, 2)),
            query(&d, "quadruped/head", boxed(0, 0, 3, 3)),
            query(&d, "quadruped", boxed(0, 0, 7, 7)),
            query(&d, "quadruped/torso", boxed(4, 4, 7, 7)),
        ]);
        let pairs = build_pairs(&s, &d, &Execution::sequential());
        let kinds: Vec<(Relation, NodeId, NodeId)> = pairs
            .pairs
            .iter()
            .map(|p| (p.relation, p.child, p.parent))
            .collect();
        assert_eq!(
            kinds,
            [
                (
                    Relation::S2P,
                    node(&d, "quadruped/head/eyes"),
                    node(&d, "quadruped/head")
                ),
                (
                    Relation::P2O,
                    node(&d, "quadruped/head"),
                    node(&d, "quadruped")
                ),
                (
                    Relation::P2O,
                    node(&d, "quadruped/torso"),
                    node(&d, "quadruped")
                ),
            ]
        );
        let sc = spcs(&pairs);
        assert_eq!(
            (sc.avg.mean(), sc.s2p.mean(), sc.p2o.mean()),
            (Some(1.0), Some(1.0), Some(1.0))
        );
    }

    #[test]
    fn abstained_child_is_skipped() {
        let d = dataset();
        let s = set(vec![
            query(&d, "quadruped/head/eyes", Payload::Abstain),
            query(&d, "quadruped/head", boxed(0, 0, 3, 3)),
        ]);
        let pairs = build_pairs(&s, &d, &Execution::sequential());
        assert!(pairs.pairs.is_empty());
        assert_eq!(pairs.skipped.s2p_child, 1);
        let sc = spcs(&pairs);
        assert_eq!(
            (sc.avg.mean(), sc.s2p.mean(), sc.p2o.mean()),
            (None, None, None)
        );
    }

    #[test]
    fn unrelated_categories_make_no_pairs() {
        let d = dataset();
        let s = set(vec![
            query(&d, "quadruped/head/eyes", boxed(1, 1, 2, 2)),
            query(&d, "quadruped/torso", boxed(0, 0, 3, 3)),
        ]);
        assert!(build_pairs(&s, &d, &Execution::sequential())
            .pairs
            .is_empty());
    }

    #[test]
    fn miou_modes() {
        let d = dataset();
        // head exact (1.0); eyes box 1..2 covers the 2x2 eye plus nothing else
        // (1.0); object half (32/64).
        let s = set(vec![
            query(&d, "quadruped/head", boxed(0, 0, 3, 3)),
            query(&d, "quadruped/torso", boxed(0, 0, 1, 1)),
            query(&d, "quadruped", boxed(0, 0, 7, 3)),
        ]);
        let scores = score_queries(&s, &d, &Execution::sequential());
        let part = miou(&scores, Level::Part, None, Averaging::PerQuery);
        assert_eq!((part.value, part.n), (Some(0.5), 2));
        let obj = miou(&scores, Level::Object, None, Averaging::PerCategory);
        assert_eq!(obj.value, Some(0.5));
        assert_eq!(
            miou(&scores, Level::Subpart, None, Averaging::PerQuery).value,
            None
        );
        assert_eq!(
            abstention_rate(&scores, Level::Part, None),
            Tally { num: 0, den: 2 }
        );
    }

    #[test]
    fn all_abstain() {
        let d = dataset();
        let s = set(vec![
            query(&d, "quadruped/head/eyes", Payload::Abstain),
            query(&d, "quadruped/head", Payload::Abstain),
            query(&d, "quadruped", Payload::Abstain),
        ]);
        let scores = score_queries(&s, &d, &Execution::sequential());
        for level in Level::ALL {
            assert_eq!(
                miou(&scores, level, None, Averaging::PerQuery).value,
                Some(0.0)
            );
            assert_eq!(
                abstention_rate(&scores, level, None).fraction(),
                Some(Fraction::ONE)
            );
        }
        assert!(build_pairs(&s, &d, &Execution::sequential())
            .pairs
            .is_empty());
    }

    #[test]
    fn secs_on_ground_truth_and_illogical_labels() {
        let d = dataset();
        let gt = ground_truth_semantic(&d, 0, Specificity::General);
        let t = secs(&gt, &d.taxonomy).unwrap();
        assert_eq!((t.num, t.den), (4, 4));

        let mut bad = gt.clone();
        let car = d
            .taxonomy
            .get(&"aeroplane/body/windshield".parse().unwrap())
            .unwrap()
            .id;
        let eye_pixels = bad
            .subpart
            .mask_of(node(&d, "quadruped/head/eyes"))
            .unwrap();
        let mut two = eye_pixels.clone();
        two.set(1, 1, false);
        two.set(2, 1, false);
        bad.subpart.paint(&two, car);
        let t = secs(&bad, &d.taxonomy).unwrap();
        assert_eq!((t.num, t.den), (2, 4));
    }

    #[test]
    fn semantic_self_evaluation() {
        let d = dataset();
        let sem = PredictionSet::Semantic {
            method: None,
            params: None,
            predictions: vec![ground_truth_semantic(&d, 0, Specificity::General)],
        };
        let scores = score_queries(&sem, &d, &Execution::sequential());
        assert_eq!(scores.len(), 3);
        assert!(scores
            .iter()
            .all(|s| s.iou == Fraction::new(s.iou.den, s.iou.den)));
        let pairs = build_pairs(&sem, &d, &Execution::sequential());
        assert_eq!(pairs.pairs.len(), 2);
        assert_eq!(spcs(&pairs).avg.mean(), Some(1.0));
    }
}

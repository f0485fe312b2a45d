//! Brute-force reference metrics computed pixel by pixel on [`Grid`]s.

use std::collections::BTreeMap;

use crate::fixture::{depth, parent, Fixture, Payload, Query, Semantic};
use crate::raster::Grid;

/// `|a ∩ b|` and `|a ∪ b|`.
pub fn overlap(a: &Grid, b: &Grid) -> (u64, u64) {
    let mut inter = 0;
    let mut union = 0;
    for y in 0..a.height {
        for x in 0..a.width {
            let (p, q) = (a.get(x, y), b.get(x, y));
            inter += (p && q) as u64;
            union += (p || q) as u64;
        }
    }
    (inter, union)
}

/// `(|child ∩ parent|, |child|)`.
pub fn containment(child: &Grid, parent: &Grid) -> (u64, u64) {
    let mut inter = 0;
    let mut area = 0;
    for (c, p) in child.cells.iter().zip(&parent.cells) {
        if *c {
            area += 1;
            inter += *p as u64;
        }
    }
    (inter, area)
}

/// `(|child ∩ container|, |container|)`.
pub fn coverage(child: &Grid, container: &Grid) -> (u64, u64) {
    let (inter, _) = overlap(child, container);
    (inter, container.area())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScoreRow {
    pub image: usize,
    pub category: String,
    pub specificity: &'static str,
    pub inter: u64,
    pub union: u64,
    pub abstained: bool,
    pub truth_area: u64,
}

impl ScoreRow {
    /// IoU with two empty masks counted as agreement.
    pub fn iou(&self) -> f64 {
        if self.union == 0 {
            1.0
        } else {
            self.inter as f64 / self.union as f64
        }
    }
}

pub fn query_scores(fx: &Fixture, queries: &[Query]) -> Vec<ScoreRow> {
    let mut rows: Vec<ScoreRow> = queries
        .iter()
        .map(|q| {
            let im = &fx.images[q.image];
            let truth = fx.truth(q.image, &q.category);
            let pred = q.grid(im.width, im.height);
            let (inter, union) = overlap(
                pred.as_ref().unwrap_or(&Grid::new(im.width, im.height)),
                &truth,
            );
            ScoreRow {
                image: q.image,
                category: q.category.clone(),
                specificity: q.specificity,
                inter,
                union,
                abstained: pred.is_none(),
                truth_area: truth.area(),
            }
        })
        .collect();
    rows.sort();
    rows
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairRow {
    pub image: usize,
    pub child: String,
    pub specificity: &'static str,
    pub inter: u64,
    pub child_area: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairOutcome {
    /// Sorted.
    pub pairs: Vec<PairRow>,
    /// Indexed by child depth − 2: subpart→part first, then part→object.
    pub skipped_child: [u64; 2],
    pub skipped_parent: [u64; 2],
}

impl PairOutcome {
    pub fn ratios(&self, child_depth: Option<usize>) -> Vec<(u64, u64)> {
        self.pairs
            .iter()
            .filter(|p| child_depth.is_none_or(|d| depth(&p.child) == d))
            .map(|p| (p.inter, p.child_area))
            .collect()
    }
}

/// Every query whose taxonomy parent was also queried on the same image at
/// the same specificity. Children with no pixels and parents that abstained
/// are counted as skipped instead.
pub fn pairs(fx: &Fixture, queries: &[Query]) -> PairOutcome {
    let by_key: BTreeMap<(usize, &str, &str), &Query> = queries
        .iter()
        .map(|q| ((q.image, q.category.as_str(), q.specificity), q))
        .collect();
    let mut out = PairOutcome::default();
    for q in queries {
        let Some(parent_path) = parent(&q.category) else {
            continue;
        };
        let Some(pq) = by_key.get(&(q.image, parent_path, q.specificity)) else {
            continue;
        };
        let slot = if depth(&q.category) == 3 { 0 } else { 1 };
        let im = &fx.images[q.image];
        let child = q.grid(im.width, im.height).filter(|g| g.area() > 0);
        let Some(child) = child else {
            out.skipped_child[slot] += 1;
            continue;
        };
        let Some(par) = pq.grid(im.width, im.height) else {
            out.skipped_parent[slot] += 1;
            continue;
        };
        let (inter, child_area) = containment(&child, &par);
        out.pairs.push(PairRow {
            image: q.image,
            child: q.category.clone(),
            specificity: q.specificity,
            inter,
            child_area,
        });
    }
    out.pairs.sort();
    out
}

/// Per-category mask queries read off semantic label maps: one for every
/// category with predicted pixels or ground-truth pixels on the image.
pub fn semantic_queries(fx: &Fixture, preds: &[Semantic]) -> Vec<Query> {
    let all = fx.all_paths();
    let mut out = Vec::new();
    for p in preds {
        let im = &fx.images[p.image];
        for cat in &all {
            let level = &p.levels[depth(cat) - 1];
            let n = (im.width * im.height) as usize;
            let mut pred = Grid::new(im.width, im.height);
            for i in 0..n {
                pred.cells[i] = level.at(i) == Some(cat.as_str());
            }
            if pred.area() > 0 || fx.truth(p.image, cat).area() > 0 {
                out.push(Query {
                    image: p.image,
                    category: cat.clone(),
                    specificity: p.specificity,
                    payload: Payload::Mask(pred),
                });
            }
        }
    }
    out
}

/// `(valid, foreground)`: pixels labelled at all three levels, and those
/// whose subpart lies under the part and the part under the object.
pub fn secs(pred: &Semantic) -> (u64, u64) {
    let [o, p, s] = &pred.levels;
    let mut valid = 0;
    let mut fg = 0;
    for i in 0..o.labels.len() {
        let (Some(on), Some(pn), Some(sn)) = (o.at(i), p.at(i), s.at(i)) else {
            continue;
        };
        fg += 1;
        if parent(sn) == Some(pn) && parent(pn) == Some(on) {
            valid += 1;
        }
    }
    (valid, fg)
}

/// Plain left-to-right mean of ratios.
pub fn mean(ratios: &[(u64, u64)]) -> Option<f64> {
    if ratios.is_empty() {
        return None;
    }
    let total: f64 = ratios.iter().map(|&(n, d)| n as f64 / d as f64).sum();
    Some(total / ratios.len() as f64)
}

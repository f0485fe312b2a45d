//! Random taxonomies, datasets and prediction files, held in plain structs
//! and serialized to the on-disk JSON formats.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::raster::{even_odd_grid, random_rings, Grid, Ring};

pub const SPECIFICITIES: [&str; 2] = ["general", "specific"];
const SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone)]
pub struct TaxObject {
    pub general: String,
    pub specifics: Vec<String>,
    pub parts: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone)]
pub struct Image {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub split: &'static str,
    pub object: String,
}

#[derive(Debug, Clone)]
pub struct Annotation {
    pub image: usize,
    pub category: String,
    pub rings: Vec<Ring>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub objects: Vec<TaxObject>,
    pub images: Vec<Image>,
    pub annotations: Vec<Annotation>,
}

/// Number of `/`-separated segments: 1 object, 2 part, 3 subpart.
pub fn depth(path: &str) -> usize {
    path.split('/').count()
}

pub fn parent(path: &str) -> Option<&str> {
    path.rsplit_once('/').map(|(p, _)| p)
}

impl Fixture {
    /// Every category path under `object`, object first.
    pub fn paths_under(&self, object: &str) -> Vec<String> {
        let mut out = Vec::new();
        for o in self.objects.iter().filter(|o| o.general == object) {
            out.push(o.general.clone());
            for (part, subs) in &o.parts {
                out.push(format!("{}/{part}", o.general));
                for s in subs {
                    out.push(format!("{}/{part}/{s}", o.general));
                }
            }
        }
        out
    }

    pub fn all_paths(&self) -> Vec<String> {
        self.objects
            .iter()
            .flat_map(|o| self.paths_under(&o.general))
            .collect()
    }

    /// Union of the image's annotations of exactly `category`.
    pub fn truth(&self, image: usize, category: &str) -> Grid {
        let im = &self.images[image];
        self.annotations
            .iter()
            .filter(|a| a.image == image && a.category == category)
            .fold(Grid::new(im.width, im.height), |acc, a| {
                acc.or(&even_odd_grid(&a.rings, im.width, im.height))
            })
    }

    pub fn taxonomy_value(&self) -> Value {
        json!({
            "version": 1,
            "objects": self.objects.iter().map(|o| json!({
                "general": o.general,
                "specifics": o.specifics,
                "parts": o.parts.iter().map(|(n, s)| json!({"name": n, "subparts": s})).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    /// Dataset document with the taxonomy inline.
    pub fn to_json(&self) -> String {
        let images: Vec<Value> = self
            .images
            .iter()
            .map(|im| json!({"id": im.id, "width": im.width, "height": im.height, "split": im.split, "object": im.object}))
            .collect();
        let annotations: Vec<Value> = self
            .annotations
            .iter()
            .map(|a| {
                let rings: Vec<Vec<[f64; 2]>> = a
                    .rings
                    .iter()
                    .map(|r| r.iter().map(|&(x, y)| [x, y]).collect())
                    .collect();
                json!({"image": self.images[a.image].id, "category": a.category, "rings": rings})
            })
            .collect();
        json!({"version": 1, "taxonomy": self.taxonomy_value(), "images": images, "annotations": annotations})
            .to_string()
    }
}

pub fn random_taxonomy<R: Rng>(rng: &mut R) -> Vec<TaxObject> {
    (0..rng.gen_range(1..=3))
        .map(|o| TaxObject {
            general: format!("obj{o}"),
            specifics: (0..rng.gen_range(0..=2))
                .map(|k| format!("obj{o} kind{k}"))
                .collect(),
            parts: (0..rng.gen_range(1..=3))
                .map(|p| {
                    (
                        format!("part{p}"),
                        (0..rng.gen_range(0..=3))
                            .map(|s| format!("sub{s}"))
                            .collect(),
                    )
                })
                .collect(),
        })
        .collect()
}

fn rect(x0: u32, y0: u32, x1: u32, y1: u32) -> Ring {
    let (x0, y0, x1, y1) = (x0 as f64, y0 as f64, x1 as f64, y1 as f64);
    vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
}

/// A rectangle or triangle lying inside the integer box `[x0, x1] x [y0, y1]`.
fn shape_in<R: Rng>(rng: &mut R, x0: u32, y0: u32, x1: u32, y1: u32) -> Ring {
    let ax = rng.gen_range(x0..x1);
    let bx = rng.gen_range(ax + 1..=x1);
    let ay = rng.gen_range(y0..y1);
    let by = rng.gen_range(ay + 1..=y1);
    if rng.gen_bool(0.7) {
        rect(ax, ay, bx, by)
    } else {
        let (ax, ay, bx, by) = (ax as f64, ay as f64, bx as f64, by as f64);
        vec![(ax, ay), (bx, ay), (ax, by)]
    }
}

/// Splits `[lo, hi]` into up to `n` disjoint integer intervals of length
/// at least one, separated by gaps.
fn strips<R: Rng>(rng: &mut R, lo: u32, hi: u32, n: usize) -> Vec<(u32, u32)> {
    let width = hi - lo;
    let n = n.min(width as usize).max(1);
    let step = width / n as u32;
    (0..n as u32)
        .filter_map(|i| {
            let a = lo + i * step;
            let b = if i + 1 == n as u32 { hi } else { a + step };
            if b <= a {
                return None;
            }
            let shrink = rng.gen_range(0..=(b - a - 1) / 2);
            Some((a + shrink, b - shrink))
        })
        .collect()
}

/// A random dataset over images at most `max_dim` pixels on a side.
///
/// With `nested`, every part lies inside its object's region, every subpart
/// inside its part's region, and siblings are disjoint: ground truth that is
/// a valid hierarchical segmentation. Otherwise annotation geometry is
/// arbitrary.
pub fn random_fixture<R: Rng>(rng: &mut R, max_dim: u32, nested: bool) -> Fixture {
    let objects = random_taxonomy(rng);
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for i in 0..rng.gen_range(1..=4) {
        let width = rng.gen_range(4..=max_dim);
        let height = rng.gen_range(4..=max_dim);
        let obj = objects.choose(rng).expect("at least one object");
        images.push(Image {
            id: format!("img{i}"),
            width,
            height,
            split: SPLITS[rng.gen_range(0..3)],
            object: obj.general.clone(),
        });
        if nested {
            let (ox0, oy0) = (rng.gen_range(0..width / 2), rng.gen_range(0..height / 2));
            let (ox1, oy1) = (
                rng.gen_range(ox0 + 2..=width),
                rng.gen_range(oy0 + 2..=height),
            );
            annotations.push(Annotation {
                image: i,
                category: obj.general.clone(),
                rings: vec![rect(ox0, oy0, ox1, oy1)],
            });
            let chosen: Vec<&(String, Vec<String>)> =
                obj.parts.iter().filter(|_| rng.gen_bool(0.8)).collect();
            for (part, (px0, px1)) in chosen.iter().zip(strips(rng, ox0, ox1, chosen.len())) {
                let pcat = format!("{}/{}", obj.general, part.0);
                let (py0, py1) = (oy0, oy1);
                annotations.push(Annotation {
                    image: i,
                    category: pcat.clone(),
                    rings: vec![rect(px0, py0, px1, py1)],
                });
                let subs: Vec<&String> = part.1.iter().filter(|_| rng.gen_bool(0.8)).collect();
                for (sub, (sy0, sy1)) in subs.iter().zip(strips(rng, py0, py1, subs.len())) {
                    for _ in 0..rng.gen_range(1..=2) {
                        annotations.push(Annotation {
                            image: i,
                            category: format!("{pcat}/{sub}"),
                            rings: vec![shape_in(rng, px0, sy0, px1, sy1)],
                        });
                    }
                }
            }
        } else {
            let paths = Fixture {
                objects: objects.clone(),
                images: Vec::new(),
                annotations: Vec::new(),
            }
            .paths_under(&obj.general);
            for _ in 0..rng.gen_range(0..=8) {
                annotations.push(Annotation {
                    image: i,
                    category: paths.choose(rng).expect("object path").clone(),
                    rings: random_rings(rng, width, height),
                });
            }
        }
    }
    Fixture {
        objects,
        images,
        annotations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Mask(Grid),
    /// Inclusive `[x_min, y_min, x_max, y_max]` pixel boxes.
    Boxes(Vec<[u32; 4]>),
    Abstain,
}

#[derive(Debug, Clone)]
pub struct Query {
    pub image: usize,
    pub category: String,
    pub specificity: &'static str,
    pub payload: Payload,
}

impl Query {
    /// The predicted pixels, `None` for an abstention.
    pub fn grid(&self, width: u32, height: u32) -> Option<Grid> {
        match &self.payload {
            Payload::Mask(g) => Some(g.clone()),
            Payload::Boxes(bs) => Some(Grid::from_fn(width, height, |x, y| {
                bs.iter()
                    .any(|b| x >= b[0] && x <= b[2] && y >= b[1] && y <= b[3])
            })),
            Payload::Abstain => None,
        }
    }
}

fn random_box<R: Rng>(rng: &mut R, width: u32, height: u32) -> [u32; 4] {
    let x0 = rng.gen_range(0..width);
    let y0 = rng.gen_range(0..height);
    // Boxes may run past the image edge and are clipped.
    [
        x0,
        y0,
        rng.gen_range(x0..width + 3),
        rng.gen_range(y0..height + 3),
    ]
}

/// Random query predictions: masks that perturb the ground truth or are
/// noise, boxes, empty masks and abstentions, over categories of the image's
/// object and occasionally other objects.
pub fn random_queries<R: Rng>(rng: &mut R, fx: &Fixture) -> Vec<Query> {
    let all = fx.all_paths();
    let mut out = Vec::new();
    for (i, im) in fx.images.iter().enumerate() {
        let mut cats = fx.paths_under(&im.object);
        if rng.gen_bool(0.3) {
            cats.push(all.choose(rng).expect("paths").clone());
            cats.sort();
            cats.dedup();
        }
        for sp in SPECIFICITIES {
            if rng.gen_bool(0.2) {
                continue;
            }
            for c in &cats {
                if rng.gen_bool(0.15) {
                    continue;
                }
                let payload = match rng.gen_range(0..10) {
                    0 => Payload::Abstain,
                    1 => Payload::Mask(Grid::new(im.width, im.height)),
                    2 | 3 => Payload::Boxes(
                        (0..rng.gen_range(1..=2))
                            .map(|_| random_box(rng, im.width, im.height))
                            .collect(),
                    ),
                    4 => {
                        let p = rng.gen_range(0.05..0.9);
                        Payload::Mask(
                            Grid::from_fn(im.width, im.height, |_, _| false)
                                .map_cells(|_| rng.gen_bool(p)),
                        )
                    }
                    _ => {
                        let truth = fx.truth(i, c);
                        let flip = rng.gen_range(0.0..0.2);
                        Payload::Mask(truth.map_cells(|v| if rng.gen_bool(flip) { !v } else { v }))
                    }
                };
                out.push(Query {
                    image: i,
                    category: c.clone(),
                    specificity: sp,
                    payload,
                });
            }
        }
    }
    out
}

impl Grid {
    pub fn map_cells(mut self, mut f: impl FnMut(bool) -> bool) -> Grid {
        for c in &mut self.cells {
            *c = f(*c);
        }
        self
    }
}

pub fn queries_json(fx: &Fixture, method: &str, queries: &[Query]) -> String {
    let preds: Vec<Value> = queries
        .iter()
        .map(|q| {
            let mut v = json!({
                "image": fx.images[q.image].id,
                "category": q.category,
                "specificity": q.specificity,
            });
            let (k, payload) = match &q.payload {
                Payload::Mask(g) => ("mask", json!(g.runs())),
                Payload::Boxes(bs) if bs.len() == 1 => ("box", json!(bs[0])),
                Payload::Boxes(bs) => ("box", json!(bs)),
                Payload::Abstain => ("abstain", json!(true)),
            };
            v[k] = payload;
            v
        })
        .collect();
    json!({"version": 1, "mode": "query", "method": method, "predictions": preds}).to_string()
}

/// One level of a semantic prediction: palette plus per-pixel index into
/// it, 0 for background.
#[derive(Debug, Clone)]
pub struct LevelLabels {
    pub palette: Vec<String>,
    pub labels: Vec<u32>,
}

impl LevelLabels {
    pub fn at(&self, i: usize) -> Option<&str> {
        match self.labels[i] {
            0 => None,
            v => Some(&self.palette[v as usize - 1]),
        }
    }

    fn runs(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut iter = self.labels.iter().peekable();
        while let Some(&v) = iter.next() {
            let mut n = 1u64;
            while iter.peek() == Some(&&v) {
                iter.next();
                n += 1;
            }
            out.push(v as u64);
            out.push(n);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Semantic {
    pub image: usize,
    pub specificity: &'static str,
    /// Object, part, subpart.
    pub levels: [LevelLabels; 3],
}

/// Semantic maps per image. Each level paints the ground truth of its
/// categories in order, then overwrites random blocks with random labels,
/// so chains are mostly but not always valid.
pub fn random_semantic<R: Rng>(rng: &mut R, fx: &Fixture) -> Vec<Semantic> {
    let all = fx.all_paths();
    let mut out = Vec::new();
    for (i, im) in fx.images.iter().enumerate() {
        for sp in SPECIFICITIES {
            if rng.gen_bool(0.3) {
                continue;
            }
            let n = (im.width * im.height) as usize;
            let levels = [1, 2, 3].map(|d| {
                let mut palette: Vec<String> =
                    all.iter().filter(|p| depth(p) == d).cloned().collect();
                palette.shuffle(rng);
                palette.truncate(rng.gen_range(0..=palette.len()));
                let mut labels = vec![0u32; n];
                for (k, cat) in palette.iter().enumerate() {
                    let truth = fx.truth(i, cat);
                    for (j, &on) in truth.cells.iter().enumerate() {
                        if on {
                            labels[j] = k as u32 + 1;
                        }
                    }
                }
                for _ in 0..rng.gen_range(0..3) {
                    let b = random_box(rng, im.width, im.height);
                    let v = rng.gen_range(0..=palette.len() as u32);
                    for y in b[1]..=b[3].min(im.height - 1) {
                        for x in b[0]..=b[2].min(im.width - 1) {
                            labels[(y * im.width + x) as usize] = v;
                        }
                    }
                }
                LevelLabels { palette, labels }
            });
            out.push(Semantic {
                image: i,
                specificity: sp,
                levels,
            });
        }
    }
    out
}

/// Label runs are written as `[label, count, label, count, ...]`.
pub fn semantic_json(fx: &Fixture, method: &str, preds: &[Semantic]) -> String {
    let level = |l: &LevelLabels| json!({"palette": l.palette, "rle": l.runs()});
    let records: Vec<Value> = preds
        .iter()
        .map(|p| {
            json!({
                "image": fx.images[p.image].id,
                "specificity": p.specificity,
                "object_map": level(&p.levels[0]),
                "part_map": level(&p.levels[1]),
                "subpart_map": level(&p.levels[2]),
            })
        })
        .collect();
    json!({"version": 1, "mode": "semantic", "method": method, "predictions": records}).to_string()
}

/// Yes/no answers over every category of every image.
pub fn random_answers<R: Rng>(rng: &mut R, fx: &Fixture, method: &str) -> String {
    let all = fx.all_paths();
    let mut answers = Vec::new();
    for im in &fx.images {
        for sp in SPECIFICITIES {
            for c in &all {
                if rng.gen_bool(0.5) {
                    answers.push(json!({
                        "image": im.id,
                        "category": c,
                        "specificity": sp,
                        "prompt_kind": if rng.gen_bool(0.5) { "box" } else { "mask" },
                        "answer": if rng.gen_bool(0.5) { "yes" } else { "no" },
                    }));
                }
            }
        }
    }
    json!({"version": 1, "method": method, "answers": answers}).to_string()
}

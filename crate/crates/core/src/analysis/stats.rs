use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::boxplot::{summarize_sorted, BoxplotSummary};
use crate::dataset::Dataset;
use crate::exec::Execution;
use crate::fraction::Fraction;
use crate::geometry::{
    boundary_complexity, count_holes, extent, image_coverage, polygon_count, size_bucket, BitMask,
    SizeBucket,
};
use crate::taxonomy::{Level, NodeId};

/// Per-subpart quantities summarized by [`compute_stats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    SubpartsPerPart,
    BoundaryComplexity,
    Extent,
    ImageCoverage,
    ObjectCoverage,
    PartCoverage,
}

impl Factor {
    pub const ALL: [Factor; 6] = [
        Factor::SubpartsPerPart,
        Factor::BoundaryComplexity,
        Factor::Extent,
        Factor::ImageCoverage,
        Factor::ObjectCoverage,
        Factor::PartCoverage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::SubpartsPerPart => "subparts_per_part",
            Factor::BoundaryComplexity => "boundary_complexity",
            Factor::Extent => "extent",
            Factor::ImageCoverage => "image_coverage",
            Factor::ObjectCoverage => "object_coverage",
            Factor::PartCoverage => "part_coverage",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Factor::SubpartsPerPart => "Subparts per part",
            Factor::BoundaryComplexity => "Boundary complexity",
            Factor::Extent => "Extent",
            Factor::ImageCoverage => "Image coverage",
            Factor::ObjectCoverage => "Object coverage",
            Factor::PartCoverage => "Part coverage",
        }
    }
}

/// Sorted sample plus its summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    #[serde(skip)]
    pub values: Vec<f64>,
    pub n: usize,
    pub summary: Option<BoxplotSummary>,
}

impl Distribution {
    fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_unstable_by(f64::total_cmp);
        let summary = (!values.is_empty()).then(|| summarize_sorted(&values));
        Distribution {
            n: values.len(),
            values,
            summary,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        self.summary.as_ref().map(|s| s.mean)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub small: u64,
    pub medium: u64,
    pub large: u64,
}

impl BucketCounts {
    pub fn total(&self) -> u64 {
        self.small + self.medium + self.large
    }

    pub fn get(&self, b: SizeBucket) -> u64 {
        match b {
            SizeBucket::Small => self.small,
            SizeBucket::Medium => self.medium,
            SizeBucket::Large => self.large,
        }
    }

    fn bump(&mut self, b: SizeBucket) {
        match b {
            SizeBucket::Small => self.small += 1,
            SizeBucket::Medium => self.medium += 1,
            SizeBucket::Large => self.large += 1,
        }
    }

    /// Exact share of each bucket; numerators sum to the common denominator.
    pub fn fractions(&self) -> Option<[Fraction; 3]> {
        let t = self.total();
        (t > 0).then(|| SizeBucket::ALL.map(|b| Fraction::new(self.get(b), t)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleCounts {
    /// Subparts whose rings could be nested.
    pub measured: u64,
    pub with_holes: u64,
    /// Holes summed over the subparts that have any.
    pub holes: u64,
}

impl HoleCounts {
    pub fn fraction(&self) -> Option<Fraction> {
        (self.measured > 0).then(|| Fraction::new(self.with_holes, self.measured))
    }

    pub fn mean_holes_when_present(&self) -> Option<f64> {
        (self.with_holes > 0).then(|| self.holes as f64 / self.with_holes as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolygonCounts {
    pub measured: u64,
    pub multi: u64,
}

impl PolygonCounts {
    pub fn fraction(&self) -> Option<Fraction> {
        (self.measured > 0).then(|| Fraction::new(self.multi, self.measured))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeSplit {
    pub extent: Distribution,
    pub boundary_complexity: Distribution,
}

/// Statistics over one object category or the whole dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: String,
    /// Subpart annotations with positive rasterized area.
    pub subparts: u64,
    /// Subpart annotations left out for zero rasterized area.
    pub skipped: u64,
    pub subparts_per_part: Distribution,
    /// Distinct subpart categories per image.
    pub subparts_per_object: Distribution,
    pub boundary_complexity: Distribution,
    pub extent: Distribution,
    pub image_coverage: Distribution,
    pub object_coverage: Distribution,
    pub part_coverage: Distribution,
    pub size_buckets: BucketCounts,
    pub holes: HoleCounts,
    pub polygons: PolygonCounts,
    pub single_polygon: ShapeSplit,
    pub multi_polygon: ShapeSplit,
}

impl GroupStats {
    pub fn factor(&self, f: Factor) -> &Distribution {
        match f {
            Factor::SubpartsPerPart => &self.subparts_per_part,
            Factor::BoundaryComplexity => &self.boundary_complexity,
            Factor::Extent => &self.extent,
            Factor::ImageCoverage => &self.image_coverage,
            Factor::ObjectCoverage => &self.object_coverage,
            Factor::PartCoverage => &self.part_coverage,
        }
    }
}

/// Subpart annotation counts for one part category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartHistogram {
    pub part: String,
    /// Subpart categories the taxonomy defines under this part.
    pub subpart_labels: usize,
    pub annotations: u64,
    pub multi_polygon: u64,
    /// Annotation count per subpart name, every defined subpart listed.
    pub occurrences: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub overall: GroupStats,
    /// One entry per object category in the taxonomy, sorted by name.
    pub objects: Vec<GroupStats>,
    /// Part categories that have subparts, sorted by path.
    pub parts: Vec<PartHistogram>,
    /// Subparts whose rings cross, left out of hole and polygon counts.
    pub crossing_rings: u64,
}

/// Measurements of one subpart annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubpartRecord {
    pub annotation: usize,
    pub category: NodeId,
    pub part: NodeId,
    pub area: u64,
    pub boundary_complexity: Option<f64>,
    pub extent: Option<f64>,
    pub image_coverage: Fraction,
    pub object_coverage: Option<Fraction>,
    pub part_coverage: Option<Fraction>,
    pub holes: Option<usize>,
    pub polygons: Option<usize>,
}

#[derive(Default)]
struct ImageStats {
    object: String,
    records: Vec<SubpartRecord>,
    skipped: u64,
    /// Distinct subpart categories per part with subparts.
    per_part: Vec<usize>,
    per_object: Option<usize>,
}

fn union_into(slot: &mut Option<BitMask>, m: &BitMask) {
    match slot {
        Some(u) => u.union_with(m).expect("same image dims"),
        None => *slot = Some(m.clone()),
    }
}

fn image_stats(dataset: &Dataset, image: usize) -> ImageStats {
    let tax = &dataset.taxonomy;
    let object_node = dataset.images[image].object;
    let indices = dataset.annotation_indices(image);
    let masks: Vec<BitMask> = indices
        .iter()
        .map(|&i| dataset.rasterize_annotation(&dataset.annotations[i]))
        .collect();

    let mut object_mask = None;
    let mut parts_union = None;
    let mut part_masks: BTreeMap<NodeId, BitMask> = BTreeMap::new();
    let mut present: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for (&i, m) in indices.iter().zip(&masks) {
        let a = &dataset.annotations[i];
        match tax.node(a.category).level {
            Level::Object => union_into(&mut object_mask, m),
            Level::Part => {
                union_into(&mut parts_union, m);
                match part_masks.get_mut(&a.category) {
                    Some(u) => u.union_with(m).expect("same image dims"),
                    None => {
                        part_masks.insert(a.category, m.clone());
                    }
                }
                present.entry(a.category).or_default();
            }
            Level::Subpart => {
                let part = tax.parent_of(a.category).expect("subparts have parents");
                present.entry(part).or_default().insert(a.category);
            }
        }
    }
    // Without an object annotation the object is the union of its parts.
    let object_mask = object_mask.or(parts_union).filter(|m| m.area() > 0);

    let mut out = ImageStats {
        object: tax.node(object_node).general_object_name.clone(),
        ..ImageStats::default()
    };
    for (&i, m) in indices.iter().zip(&masks) {
        let a = &dataset.annotations[i];
        if tax.node(a.category).level != Level::Subpart {
            continue;
        }
        let area = m.area();
        if area == 0 {
            out.skipped += 1;
            continue;
        }
        let part = tax.parent_of(a.category).expect("subparts have parents");
        let cover = |container: Option<&BitMask>| {
            container
                .filter(|c| c.area() > 0)
                .map(|c| Fraction::new(m.intersection_area(c).expect("same image dims"), c.area()))
        };
        out.records.push(SubpartRecord {
            annotation: i,
            category: a.category,
            part,
            area,
            boundary_complexity: boundary_complexity(&a.region).ok(),
            extent: extent(&a.region).ok(),
            image_coverage: image_coverage(m),
            object_coverage: cover(object_mask.as_ref()),
            part_coverage: cover(part_masks.get(&part)),
            holes: count_holes(&a.region).ok(),
            polygons: polygon_count(&a.region).ok(),
        });
    }
    for (part, subs) in &present {
        if !tax.children_of(*part).is_empty() {
            out.per_part.push(subs.len());
        }
    }
    let distinct: BTreeSet<NodeId> = present.values().flatten().copied().collect();
    if !present.is_empty() {
        out.per_object = Some(distinct.len());
    }
    out
}

#[derive(Default)]
struct Accum {
    subparts: u64,
    skipped: u64,
    per_part: Vec<f64>,
    per_object: Vec<f64>,
    q: Vec<f64>,
    extent: Vec<f64>,
    image_cov: Vec<f64>,
    object_cov: Vec<f64>,
    part_cov: Vec<f64>,
    buckets: BucketCounts,
    holes: HoleCounts,
    polygons: PolygonCounts,
    single: (Vec<f64>, Vec<f64>),
    multi: (Vec<f64>, Vec<f64>),
}

impl Accum {
    fn add_image(&mut self, s: &ImageStats) {
        self.skipped += s.skipped;
        self.per_part.extend(s.per_part.iter().map(|&c| c as f64));
        self.per_object.extend(s.per_object.map(|c| c as f64));
        for r in &s.records {
            self.add_record(r);
        }
    }

    fn add_record(&mut self, r: &SubpartRecord) {
        self.subparts += 1;
        self.q.extend(r.boundary_complexity);
        self.extent.extend(r.extent);
        self.image_cov.push(r.image_coverage.value());
        self.object_cov
            .extend(r.object_coverage.map(Fraction::value));
        self.part_cov.extend(r.part_coverage.map(Fraction::value));
        self.buckets.bump(size_bucket(r.area));
        if let Some(h) = r.holes {
            self.holes.measured += 1;
            if h > 0 {
                self.holes.with_holes += 1;
                self.holes.holes += h as u64;
            }
        }
        if let Some(p) = r.polygons {
            self.polygons.measured += 1;
            let split = if p > 1 {
                self.polygons.multi += 1;
                &mut self.multi
            } else {
                &mut self.single
            };
            split.0.extend(r.extent);
            split.1.extend(r.boundary_complexity);
        }
    }

    fn finish(self, group: String) -> GroupStats {
        let shape = |(e, q): (Vec<f64>, Vec<f64>)| ShapeSplit {
            extent: Distribution::from_values(e),
            boundary_complexity: Distribution::from_values(q),
        };
        GroupStats {
            group,
            subparts: self.subparts,
            skipped: self.skipped,
            subparts_per_part: Distribution::from_values(self.per_part),
            subparts_per_object: Distribution::from_values(self.per_object),
            boundary_complexity: Distribution::from_values(self.q),
            extent: Distribution::from_values(self.extent),
            image_coverage: Distribution::from_values(self.image_cov),
            object_coverage: Distribution::from_values(self.object_cov),
            part_coverage: Distribution::from_values(self.part_cov),
            size_buckets: self.buckets,
            holes: self.holes,
            polygons: self.polygons,
            single_polygon: shape(self.single),
            multi_polygon: shape(self.multi),
        }
    }
}

/// Shape, coverage and size statistics of every subpart annotation, overall
/// and per object category.
pub fn compute_stats(dataset: &Dataset, exec: &Execution) -> DatasetStats {
    let tax = &dataset.taxonomy;
    let per_image = exec.map_range(dataset.images.len(), |i| image_stats(dataset, i));

    let mut overall = Accum::default();
    let mut objects: BTreeMap<String, Accum> = tax
        .objects()
        .into_iter()
        .map(|o| (o.to_string(), Accum::default()))
        .collect();
    let mut parts: BTreeMap<NodeId, PartHistogram> = tax
        .nodes_at(Level::Part)
        .filter(|n| !tax.children_of(n.id).is_empty())
        .map(|n| {
            let children = tax.children_of(n.id);
            (
                n.id,
                PartHistogram {
                    part: n.path.to_string(),
                    subpart_labels: children.len(),
                    annotations: 0,
                    multi_polygon: 0,
                    occurrences: children
                        .iter()
                        .map(|&c| (tax.node(c).path.leaf().to_string(), 0))
                        .collect(),
                },
            )
        })
        .collect();
    let mut crossing_rings = 0;

    for s in &per_image {
        overall.add_image(s);
        objects
            .get_mut(&s.object)
            .expect("image objects are taxonomy objects")
            .add_image(s);
        for r in &s.records {
            crossing_rings += r.holes.is_none() as u64;
            let h = parts
                .get_mut(&r.part)
                .expect("subpart parents have subparts");
            h.annotations += 1;
            h.multi_polygon += r.polygons.is_some_and(|p| p > 1) as u64;
            *h.occurrences
                .get_mut(tax.node(r.category).path.leaf())
                .expect("defined subpart") += 1;
        }
    }

    let mut parts: Vec<PartHistogram> = parts.into_values().collect();
    parts.sort_by(|a, b| a.part.cmp(&b.part));
    DatasetStats {
        overall: overall.finish("overall".into()),
        objects: objects
            .into_iter()
            .map(|(name, acc)| acc.finish(name))
            .collect(),
        parts,
        crossing_rings,
    }
}

/// Per-annotation subpart measurements, in annotation order.
pub fn subpart_records(dataset: &Dataset, exec: &Execution) -> Vec<SubpartRecord> {
    let mut records: Vec<SubpartRecord> = exec
        .map_range(dataset.images.len(), |i| image_stats(dataset, i).records)
        .into_iter()
        .flatten()
        .collect();
    records.sort_by_key(|r| r.annotation);
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_dataset_str, LoadOptions};
    use std::f64::consts::PI;

    fn dataset() -> Dataset {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":10,"height":10,"split":"train","object":"car"}],
            "annotations":[
              {"image":"a","category":"car","rings":[[[0,0],[10,0],[10,10],[0,10]]]},
              {"image":"a","category":"car/tire","rings":[[[0,0],[5,0],[5,4],[0,4]]]},
              {"image":"a","category":"car/tire/rim","rings":[[[1,1],[3,1],[3,3],[1,3]]]},
              {"image":"a","category":"car/tire/hub cap","rings":[[[0,0],[0.1,0],[0.1,0.1]]]}]}"#;
        parse_dataset_str(doc, &LoadOptions::default()).unwrap()
    }

    #[test]
    fn square_subpart_by_hand() {
        let d = dataset();
        let s = compute_stats(&d, &Execution::sequential());
        let o = &s.overall;
        assert_eq!((o.subparts, o.skipped), (1, 1));
        assert_eq!(o.extent.values, [1.0]);
        assert!((o.boundary_complexity.values[0] - PI / 4.0).abs() < 1e-15);
        assert_eq!(o.image_coverage.values, [0.04]);
        assert_eq!(o.object_coverage.values, [0.04]);
        assert_eq!(o.part_coverage.values, [0.2]);
        assert_eq!(o.subparts_per_part.values, [2.0]);
        assert_eq!(
            o.size_buckets,
            BucketCounts {
                small: 1,
                medium: 0,
                large: 0
            }
        );
        assert_eq!(o.holes.fraction(), Some(Fraction::new(0, 1)));

        let car = s.objects.iter().find(|g| g.group == "car").unwrap();
        assert_eq!(car.subparts, 1);
        let bird = s.objects.iter().find(|g| g.group == "bird").unwrap();
        assert_eq!((bird.subparts, bird.extent.summary.is_none()), (0, true));

        let tire = s.parts.iter().find(|p| p.part == "car/tire").unwrap();
        assert_eq!(tire.annotations, 1);
        assert_eq!(tire.occurrences["rim"], 1);
    }

    #[test]
    fn holes_and_polygons() {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":40,"height":40,"split":"train","object":"car"}],
            "annotations":[
              {"image":"a","category":"car/tire/rim","rings":[[[0,0],[20,0],[20,20],[0,20]],[[5,5],[15,5],[15,15],[5,15]]]},
              {"image":"a","category":"car/tire/hub cap","rings":[[[0,30],[4,30],[4,34],[0,34]],[[10,30],[14,30],[14,34],[10,34]]]}]}"#;
        let d = parse_dataset_str(doc, &LoadOptions::default()).unwrap();
        let s = compute_stats(&d, &Execution::sequential());
        let o = &s.overall;
        assert_eq!(
            o.holes,
            HoleCounts {
                measured: 2,
                with_holes: 1,
                holes: 1
            }
        );
        assert_eq!(
            o.polygons,
            PolygonCounts {
                measured: 2,
                multi: 1
            }
        );
        assert_eq!(o.multi_polygon.extent.values, [1.0]);
        // No object or part annotation: coverage ratios are undefined.
        assert!(o.part_coverage.values.is_empty());
        assert!(o.object_coverage.values.is_empty());
        let [sm, md, lg] = o.size_buckets.fractions().unwrap();
        assert_eq!(sm.num + md.num + lg.num, sm.den);
    }
}

//! Ground-truth datasets, prediction files and recognition answers.
//!
//! Every file is a versioned JSON document. Loading is two-staged: syntax and
//! schema problems (malformed JSON, wrong types, bad run lengths) abort the
//! load, while invariant problems (unknown categories, lineage mismatches,
//! duplicates) are collected as [`Issue`]s against the records they concern.

mod json;
mod predictions;
mod recognition;
mod validate;

pub use predictions::{
    load_predictions, parse_predictions, LevelMap, Payload, PredictionMode, PredictionSet,
    QueryPrediction, SemanticPrediction,
};
pub use recognition::{load_answers, parse_answers, AnswerSet, PromptKind, RecognitionAnswer};
pub use validate::{validate_dataset, Check, Expectations, ValidationReport};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::{rasterize, BitMask, GeometryError, Point, Region, Ring};
use crate::taxonomy::{
    load_taxonomy, taxonomy_from_value, CategoryPath, Level, NodeId, Taxonomy, TaxonomyError,
};

pub const FORMAT_VERSION: u32 = 1;
pub const BUILTIN_SPIN: &str = "builtin:spin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueKind {
    /// The document does not match the file schema.
    Schema,
    /// The document parses but breaks a dataset invariant.
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub location: String,
    pub message: String,
}

impl Issue {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            kind: IssueKind::Schema,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn invariant(location: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            kind: IssueKind::Invariant,
            ..Issue::new(location, message)
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} problem(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<Issue>),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

impl DatasetError {
    /// True when every problem is an invariant violation rather than a
    /// syntax or schema error.
    pub fn is_invariant_only(&self) -> bool {
        matches!(self, DatasetError::Invalid(issues) if issues.iter().all(|i| i.kind == IssueKind::Invariant))
    }

    pub fn issues(&self) -> Vec<Issue> {
        match self {
            DatasetError::Invalid(issues) => issues.clone(),
            other => vec![Issue::new("document", other.to_string())],
        }
    }
}

pub(crate) fn read_json(path: &Path) -> Result<Value, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

pub(crate) fn parse_json(text: &str, name: &str) -> Result<Value, DatasetError> {
    serde_json::from_str(text).map_err(|e| DatasetError::Syntax {
        path: name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub(crate) fn fail_on_schema(issues: &[Issue]) -> Result<(), DatasetError> {
    if issues.iter().any(|i| i.kind == IssueKind::Schema) {
        return Err(DatasetError::Invalid(issues.to_vec()));
    }
    Ok(())
}

pub(crate) fn check_version(map: &mut serde_json::Map<String, Value>, issues: &mut Vec<Issue>) {
    if let Some(v) = json::field::<u32>(map, "version", "document", issues) {
        if v != FORMAT_VERSION {
            issues.push(Issue::new(
                "document.version",
                format!("unsupported version {v}"),
            ));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub split: Split,
    pub object: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    /// Index into [`Dataset::images`].
    pub image: usize,
    pub category: NodeId,
    pub region: Region,
}

/// Where the dataset's taxonomy came from; kept so the dataset serializes
/// back to the same reference.
#[derive(Debug, Clone, PartialEq)]
pub enum TaxonomySource {
    Builtin,
    File(String),
    Inline,
}

/// Rasterized ground truth of one image: the union of each category's
/// annotations.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub width: u32,
    pub height: u32,
    pub masks: BTreeMap<NodeId, BitMask>,
}

impl GroundTruth {
    pub fn mask(&self, node: NodeId) -> Option<&BitMask> {
        self.masks.get(&node)
    }

    pub fn empty_mask(&self) -> BitMask {
        BitMask::new(self.width, self.height).expect("image dims are positive")
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub taxonomy: Arc<Taxonomy>,
    pub taxonomy_source: TaxonomySource,
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AnnotationRecord>,
    image_index: HashMap<String, usize>,
    by_image: Vec<Vec<usize>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.taxonomy == other.taxonomy
            && self.images == other.images
            && self.annotations == other.annotations
    }
}

impl Dataset {
    /// Builds a dataset from already-validated parts. Annotations must
    /// reference valid image indices.
    pub fn new(
        taxonomy: Arc<Taxonomy>,
        taxonomy_source: TaxonomySource,
        images: Vec<ImageRecord>,
        annotations: Vec<AnnotationRecord>,
    ) -> Self {
        let image_index = images
            .iter()
            .enumerate()
            .map(|(i, im)| (im.id.clone(), i))
            .collect();
        let mut by_image = vec![Vec::new(); images.len()];
        for (i, a) in annotations.iter().enumerate() {
            by_image[a.image].push(i);
        }
        Dataset {
            taxonomy,
            taxonomy_source,
            images,
            annotations,
            image_index,
            by_image,
        }
    }

    pub fn image_index(&self, id: &str) -> Option<usize> {
        self.image_index.get(id).copied()
    }

    /// Indices into [`Dataset::annotations`] of `image`'s annotations.
    pub fn annotation_indices(&self, image: usize) -> &[usize] {
        &self.by_image[image]
    }

    pub fn annotations_of(&self, image: usize) -> impl Iterator<Item = &AnnotationRecord> + '_ {
        self.by_image[image]
            .iter()
            .map(move |&i| &self.annotations[i])
    }

    /// Whether any annotation of `category` exists on `image`.
    pub fn is_present(&self, image: usize, category: NodeId) -> bool {
        self.annotations_of(image).any(|a| a.category == category)
    }

    pub fn rasterize_annotation(&self, annotation: &AnnotationRecord) -> BitMask {
        let im = &self.images[annotation.image];
        rasterize(&annotation.region, im.width, im.height).expect("image dims are positive")
    }

    pub fn ground_truth(&self, image: usize) -> GroundTruth {
        let im = &self.images[image];
        let mut masks: BTreeMap<NodeId, BitMask> = BTreeMap::new();
        for a in self.annotations_of(image) {
            let m = self.rasterize_annotation(a);
            match masks.get_mut(&a.category) {
                Some(existing) => existing.union_with(&m).expect("same image dims"),
                None => {
                    masks.insert(a.category, m);
                }
            }
        }
        GroundTruth {
            width: im.width,
            height: im.height,
            masks,
        }
    }

    pub fn path_of(&self, node: NodeId) -> &CategoryPath {
        &self.taxonomy.node(node).path
    }

    /// Serializes to the canonical dataset document.
    pub fn to_value(&self) -> Value {
        let taxonomy = match &self.taxonomy_source {
            TaxonomySource::Builtin => Value::String(BUILTIN_SPIN.to_string()),
            TaxonomySource::File(p) => Value::String(p.clone()),
            TaxonomySource::Inline => {
                serde_json::to_value(self.taxonomy.to_doc()).expect("taxonomy serializes")
            }
        };
        let images: Vec<Value> = self
            .images
            .iter()
            .map(|im| {
                json!({
                    "id": im.id,
                    "width": im.width,
                    "height": im.height,
                    "split": im.split,
                    "object": self.path_of(im.object),
                })
            })
            .collect();
        let annotations: Vec<Value> = self
            .annotations
            .iter()
            .map(|a| {
                let rings: Vec<Vec<[f64; 2]>> = a
                    .region
                    .rings()
                    .iter()
                    .map(|r| r.vertices().iter().map(|p| [p.x, p.y]).collect())
                    .collect();
                json!({
                    "image": self.images[a.image].id,
                    "category": self.path_of(a.category),
                    "rings": rings,
                })
            })
            .collect();
        json!({
            "version": FORMAT_VERSION,
            "taxonomy": taxonomy,
            "images": images,
            "annotations": annotations,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("dataset serializes")
    }
}

/// Options for dataset parsing.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Reject keys outside the schema.
    pub strict: bool,
    /// Directory that relative taxonomy paths resolve against.
    pub base_dir: Option<PathBuf>,
}

/// Loads and fully validates a dataset file. Any issue is an error.
pub fn load_dataset(path: &Path, strict: bool) -> Result<Dataset, DatasetError> {
    let (dataset, issues) = load_dataset_lenient(path, strict)?;
    if !issues.is_empty() {
        return Err(DatasetError::Invalid(issues));
    }
    Ok(dataset)
}

/// Loads a dataset, dropping records that break invariants and returning
/// them as issues. Syntax and schema errors are still fatal.
pub fn load_dataset_lenient(
    path: &Path,
    strict: bool,
) -> Result<(Dataset, Vec<Issue>), DatasetError> {
    let value = read_json(path)?;
    let options = LoadOptions {
        strict,
        base_dir: path.parent().map(Path::to_path_buf),
    };
    parse_dataset(value, &options)
}

pub fn parse_dataset_str(text: &str, options: &LoadOptions) -> Result<Dataset, DatasetError> {
    let (dataset, issues) = parse_dataset(parse_json(text, "dataset")?, options)?;
    if !issues.is_empty() {
        return Err(DatasetError::Invalid(issues));
    }
    Ok(dataset)
}

#[derive(Deserialize)]
struct RawImage {
    id: String,
    width: u32,
    height: u32,
    split: Split,
    object: CategoryPath,
}

pub fn parse_dataset(
    value: Value,
    options: &LoadOptions,
) -> Result<(Dataset, Vec<Issue>), DatasetError> {
    let strict = options.strict;
    let mut issues = Vec::new();
    let Some(mut doc) = json::object(
        value,
        &["version", "taxonomy", "images", "annotations"],
        "document",
        strict,
        &mut issues,
    ) else {
        return Err(DatasetError::Invalid(issues));
    };
    check_version(&mut doc, &mut issues);

    let (taxonomy, source) = match doc.remove("taxonomy") {
        Some(Value::String(s)) if s == BUILTIN_SPIN => (Taxonomy::spin(), TaxonomySource::Builtin),
        Some(Value::String(s)) => {
            let p = match &options.base_dir {
                Some(dir) => dir.join(&s),
                None => PathBuf::from(&s),
            };
            let text = std::fs::read_to_string(&p).map_err(|source| DatasetError::Io {
                path: p.clone(),
                source,
            })?;
            (load_taxonomy(&text, strict)?, TaxonomySource::File(s))
        }
        Some(v @ Value::Object(_)) => (taxonomy_from_value(&v, strict)?, TaxonomySource::Inline),
        Some(_) => {
            issues.push(Issue::new(
                "document.taxonomy",
                "expected a taxonomy reference string or an inline taxonomy",
            ));
            return Err(DatasetError::Invalid(issues));
        }
        None => {
            issues.push(Issue::new("document", "missing key `taxonomy`"));
            return Err(DatasetError::Invalid(issues));
        }
    };

    let mut images = Vec::new();
    let mut image_index: HashMap<String, usize> = HashMap::new();
    for (i, v) in json::array(&mut doc, "images", "document", &mut issues)
        .into_iter()
        .enumerate()
    {
        let loc = format!("images[{i}]");
        let Some(map) = json::object(
            v,
            &["id", "width", "height", "split", "object"],
            &loc,
            strict,
            &mut issues,
        ) else {
            continue;
        };
        let Some(raw) = json::convert::<RawImage>(Value::Object(map), &loc, &mut issues) else {
            continue;
        };
        if raw.width == 0 || raw.height == 0 {
            issues.push(Issue::new(
                &loc,
                format!(
                    "image dimensions {}x{} must be positive",
                    raw.width, raw.height
                ),
            ));
            continue;
        }
        if raw.object.level() != Level::Object {
            issues.push(Issue::invariant(
                &loc,
                format!("`{}` is not an object-level category", raw.object),
            ));
            continue;
        }
        let Some(node) = taxonomy.get(&raw.object) else {
            issues.push(Issue::invariant(
                &loc,
                format!("unknown category `{}`", raw.object),
            ));
            continue;
        };
        if image_index.contains_key(&raw.id) {
            issues.push(Issue::invariant(
                &loc,
                format!("duplicate image id `{}`", raw.id),
            ));
            continue;
        }
        image_index.insert(raw.id.clone(), images.len());
        images.push(ImageRecord {
            id: raw.id,
            width: raw.width,
            height: raw.height,
            split: raw.split,
            object: node.id,
        });
    }

    let mut annotations = Vec::new();
    for (i, v) in json::array(&mut doc, "annotations", "document", &mut issues)
        .into_iter()
        .enumerate()
    {
        let loc = format!("annotations[{i}]");
        let Some(mut map) = json::object(
            v,
            &["image", "category", "rings"],
            &loc,
            strict,
            &mut issues,
        ) else {
            continue;
        };
        let image: Option<String> = json::field(&mut map, "image", &loc, &mut issues);
        let category: Option<CategoryPath> = json::field(&mut map, "category", &loc, &mut issues);
        let rings: Option<Vec<Vec<[f64; 2]>>> = json::field(&mut map, "rings", &loc, &mut issues);
        let (Some(image), Some(category), Some(rings)) = (image, category, rings) else {
            continue;
        };
        let region = match build_region(rings) {
            Ok(r) => r,
            Err(e) => {
                issues.push(Issue::new(format!("{loc}.rings"), e.to_string()));
                continue;
            }
        };
        let Some(&image_idx) = image_index.get(&image) else {
            issues.push(Issue::invariant(&loc, format!("unknown image `{image}`")));
            continue;
        };
        let Some(node) = taxonomy.get(&category) else {
            issues.push(Issue::invariant(
                &loc,
                format!("unknown category `{category}`"),
            ));
            continue;
        };
        let object = &taxonomy.node(images[image_idx].object).path;
        if !category.has_prefix(object) {
            issues.push(Issue::invariant(
                &loc,
                format!("`{category}` does not belong to image object `{object}`"),
            ));
            continue;
        }
        annotations.push(AnnotationRecord {
            image: image_idx,
            category: node.id,
            region,
        });
    }

    fail_on_schema(&issues)?;
    let dataset = Dataset::new(Arc::new(taxonomy), source, images, annotations);
    Ok((dataset, issues))
}

fn build_region(rings: Vec<Vec<[f64; 2]>>) -> Result<Region, GeometryError> {
    let rings = rings
        .into_iter()
        .map(|r| Ring::from_clicks(r.into_iter().map(|[x, y]| Point::new(x, y))))
        .collect::<Result<Vec<_>, _>>()?;
    Region::new(rings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> LoadOptions {
        LoadOptions::default()
    }

    const MINIMAL: &str = r#"{"version":1,"taxonomy":"builtin:spin",
        "images":[{"id":"a","width":10,"height":8,"split":"train","object":"quadruped"}],
        "annotations":[]}"#;

    #[test]
    fn minimal_file() {
        let d = parse_dataset_str(MINIMAL, &opts()).unwrap();
        assert_eq!(d.images.len(), 1);
        assert!(d.annotations.is_empty());
        assert_eq!(d.image_index("a"), Some(0));
    }

    #[test]
    fn lineage_error() {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":10,"height":8,"split":"train","object":"car"}],
            "annotations":[{"image":"a","category":"bird/head/eyes","rings":[[[0,0],[4,0],[4,4]]]}]}"#;
        let err = parse_dataset_str(doc, &opts()).unwrap_err();
        assert!(err.is_invariant_only());
        let issues = err.issues();
        assert_eq!(issues[0].location, "annotations[0]");
        assert!(
            issues[0].message.contains("does not belong"),
            "{}",
            issues[0]
        );
    }

    #[test]
    fn unknown_category_and_image() {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":10,"height":8,"split":"val","object":"car"}],
            "annotations":[
              {"image":"a","category":"car/tire/flux capacitor","rings":[[[0,0],[4,0],[4,4]]]},
              {"image":"b","category":"car/tire","rings":[[[0,0],[4,0],[4,4]]]}]}"#;
        let err = parse_dataset_str(doc, &opts()).unwrap_err();
        assert_eq!(err.issues().len(), 2);
    }

    #[test]
    fn schema_errors_are_fatal_with_location() {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":"wide","height":8,"split":"val","object":"car"}],
            "annotations":[]}"#;
        let err = parse_dataset_str(doc, &opts()).unwrap_err();
        assert!(!err.is_invariant_only());
        assert_eq!(err.issues()[0].location, "images[0]");
        let err = parse_dataset_str("{\"version\":1,", &opts()).unwrap_err();
        assert!(matches!(err, DatasetError::Syntax { line: 1, .. }));
    }

    #[test]
    fn strict_rejects_unknown_keys() {
        let doc = MINIMAL.replace("\"annotations\":[]", "\"annotations\":[],\"extra\":1");
        assert!(parse_dataset_str(&doc, &opts()).is_ok());
        let strict = LoadOptions {
            strict: true,
            ..opts()
        };
        assert!(parse_dataset_str(&doc, &strict).is_err());
    }

    #[test]
    fn round_trip_and_ground_truth() {
        let doc = r#"{"version":1,"taxonomy":{"version":1,"objects":[{"general":"car","parts":[{"name":"tire","subparts":["rim"]}]}]},
            "images":[{"id":"a","width":10,"height":10,"split":"test","object":"car"}],
            "annotations":[
              {"image":"a","category":"car","rings":[[[0,0],[10,0],[10,10],[0,10],[0,0]]]},
              {"image":"a","category":"car/tire","rings":[[[1,1],[5,1],[5,5],[1,5]]]},
              {"image":"a","category":"car/tire","rings":[[[4,4],[8,4],[8,8],[4,8]]]}]}"#;
        let d = parse_dataset_str(doc, &opts()).unwrap();
        let again = parse_dataset_str(&d.to_json(), &opts()).unwrap();
        assert_eq!(d, again);
        let gt = d.ground_truth(0);
        let tire = d.taxonomy.get(&"car/tire".parse().unwrap()).unwrap().id;
        assert_eq!(gt.mask(tire).unwrap().area(), 16 + 16 - 1);
        assert!(d.is_present(0, tire));
    }
}

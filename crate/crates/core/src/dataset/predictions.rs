use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json as jv, Map, Value};

use super::{check_version, json, parse_json, read_json, Dataset, DatasetError, Issue};
use crate::geometry::{boxes_to_mask, rle, BBox, BitMask, LabelMap};
use crate::taxonomy::{CategoryPath, Level, NodeId, Specificity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionMode {
    Query,
    Semantic,
}

impl PredictionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionMode::Query => "query",
            PredictionMode::Semantic => "semantic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Mask(BitMask),
    /// Detections merged into one mask when scored. `nested` records whether
    /// the file used the list-of-boxes form.
    Boxes {
        boxes: Vec<BBox>,
        nested: bool,
    },
    Abstain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPrediction {
    pub image: usize,
    pub category: NodeId,
    pub specificity: Specificity,
    pub payload: Payload,
}

impl QueryPrediction {
    /// Predicted pixels, or `None` for an abstention.
    pub fn mask(&self, width: u32, height: u32) -> Option<BitMask> {
        match &self.payload {
            Payload::Mask(m) => Some(m.clone()),
            Payload::Boxes { boxes, .. } => {
                Some(boxes_to_mask(boxes, width, height).expect("image dims are positive"))
            }
            Payload::Abstain => None,
        }
    }

    pub fn is_abstain(&self) -> bool {
        matches!(self.payload, Payload::Abstain)
    }
}

/// One level's label raster. Raster value `v > 0` names `palette[v - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMap {
    pub palette: Vec<NodeId>,
    pub map: LabelMap,
}

impl LevelMap {
    pub fn empty(width: u32, height: u32) -> Self {
        LevelMap {
            palette: Vec::new(),
            map: LabelMap::new(width, height).expect("positive dims"),
        }
    }

    /// Category at linear pixel `i`; `None` for background.
    pub fn node_at(&self, i: usize) -> Option<NodeId> {
        match self.map.labels()[i] {
            0 => None,
            v => Some(self.palette[v as usize - 1]),
        }
    }

    /// Paints `mask` with `node`, extending the palette as needed.
    pub fn paint(&mut self, mask: &BitMask, node: NodeId) {
        let value = match self.palette.iter().position(|&n| n == node) {
            Some(i) => i + 1,
            None => {
                self.palette.push(node);
                self.palette.len()
            }
        };
        self.map.paint(mask, value as u32).expect("same dims");
    }

    pub fn mask_of(&self, node: NodeId) -> Option<BitMask> {
        let i = self.palette.iter().position(|&n| n == node)?;
        Some(self.map.mask_of(i as u32 + 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPrediction {
    pub image: usize,
    pub specificity: Specificity,
    pub object: LevelMap,
    pub part: LevelMap,
    pub subpart: LevelMap,
}

impl SemanticPrediction {
    pub fn level(&self, level: Level) -> &LevelMap {
        match level {
            Level::Object => &self.object,
            Level::Part => &self.part,
            Level::Subpart => &self.subpart,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionSet {
    Query {
        method: Option<String>,
        params: Option<String>,
        predictions: Vec<QueryPrediction>,
    },
    Semantic {
        method: Option<String>,
        params: Option<String>,
        predictions: Vec<SemanticPrediction>,
    },
}

impl PredictionSet {
    pub fn mode(&self) -> PredictionMode {
        match self {
            PredictionSet::Query { .. } => PredictionMode::Query,
            PredictionSet::Semantic { .. } => PredictionMode::Semantic,
        }
    }

    pub fn method(&self) -> Option<&str> {
        match self {
            PredictionSet::Query { method, .. } | PredictionSet::Semantic { method, .. } => {
                method.as_deref()
            }
        }
    }

    pub fn params(&self) -> Option<&str> {
        match self {
            PredictionSet::Query { params, .. } | PredictionSet::Semantic { params, .. } => {
                params.as_deref()
            }
        }
    }

    pub fn abstain_count(&self) -> usize {
        match self {
            PredictionSet::Query { predictions, .. } => {
                predictions.iter().filter(|p| p.is_abstain()).count()
            }
            PredictionSet::Semantic { .. } => 0,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PredictionSet::Query { predictions, .. } => predictions.len(),
            PredictionSet::Semantic { predictions, .. } => predictions.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_value(&self, dataset: &Dataset) -> Value {
        let path = |n: NodeId| dataset.path_of(n).to_string();
        let mut doc = Map::new();
        doc.insert("version".into(), jv!(super::FORMAT_VERSION));
        doc.insert("mode".into(), jv!(self.mode().as_str()));
        if let Some(m) = self.method() {
            doc.insert("method".into(), jv!(m));
        }
        if let Some(p) = self.params() {
            doc.insert("params".into(), jv!(p));
        }
        let records: Vec<Value> = match self {
            PredictionSet::Query { predictions, .. } => predictions
                .iter()
                .map(|p| {
                    let mut r = Map::new();
                    r.insert("image".into(), jv!(dataset.images[p.image].id));
                    r.insert("category".into(), jv!(path(p.category)));
                    r.insert("specificity".into(), jv!(p.specificity));
                    match &p.payload {
                        Payload::Mask(m) => r.insert("mask".into(), jv!(rle::encode(m))),
                        Payload::Boxes {
                            boxes,
                            nested: false,
                        } if boxes.len() == 1 => r.insert("box".into(), jv!(boxes[0])),
                        Payload::Boxes { boxes, .. } => r.insert("box".into(), jv!(boxes)),
                        Payload::Abstain => r.insert("abstain".into(), jv!(true)),
                    };
                    Value::Object(r)
                })
                .collect(),
            PredictionSet::Semantic { predictions, .. } => predictions
                .iter()
                .map(|p| {
                    let level = |m: &LevelMap| {
                        jv!({
                            "palette": m.palette.iter().map(|&n| path(n)).collect::<Vec<_>>(),
                            "rle": m.map.encode_runs(),
                        })
                    };
                    jv!({
                        "image": dataset.images[p.image].id,
                        "specificity": p.specificity,
                        "object_map": level(&p.object),
                        "part_map": level(&p.part),
                        "subpart_map": level(&p.subpart),
                    })
                })
                .collect(),
        };
        doc.insert("predictions".into(), Value::Array(records));
        Value::Object(doc)
    }

    pub fn to_json(&self, dataset: &Dataset) -> String {
        serde_json::to_string(&self.to_value(dataset)).expect("predictions serialize")
    }
}

pub fn load_predictions(
    path: &Path,
    mode: PredictionMode,
    dataset: &Dataset,
    strict: bool,
) -> Result<PredictionSet, DatasetError> {
    parse_predictions_value(read_json(path)?, mode, dataset, strict)
}

pub fn parse_predictions(
    text: &str,
    mode: PredictionMode,
    dataset: &Dataset,
    strict: bool,
) -> Result<PredictionSet, DatasetError> {
    parse_predictions_value(parse_json(text, "predictions")?, mode, dataset, strict)
}

const QUERY_KEYS: &[&str] = &["image", "category", "specificity", "mask", "box", "abstain"];
const SEMANTIC_KEYS: &[&str] = &[
    "image",
    "specificity",
    "object_map",
    "part_map",
    "subpart_map",
];

#[derive(Deserialize)]
#[serde(untagged)]
enum RawBoxes {
    One([i64; 4]),
    Many(Vec<[i64; 4]>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevelMap {
    palette: Vec<CategoryPath>,
    rle: Vec<u64>,
}

fn parse_predictions_value(
    value: Value,
    mode: PredictionMode,
    dataset: &Dataset,
    strict: bool,
) -> Result<PredictionSet, DatasetError> {
    let mut issues = Vec::new();
    let Some(mut doc) = json::object(
        value,
        &["version", "mode", "method", "params", "predictions"],
        "document",
        strict,
        &mut issues,
    ) else {
        return Err(DatasetError::Invalid(issues));
    };
    check_version(&mut doc, &mut issues);
    if let Some(declared) = json::field::<PredictionMode>(&mut doc, "mode", "document", &mut issues)
    {
        if declared != mode {
            issues.push(Issue::new(
                "document.mode",
                format!(
                    "file declares mode `{}` but `{}` was requested",
                    declared.as_str(),
                    mode.as_str()
                ),
            ));
        }
    }
    let method = json::optional::<String>(&mut doc, "method", "document", &mut issues).flatten();
    let params = json::optional::<String>(&mut doc, "params", "document", &mut issues).flatten();
    let records = json::array(&mut doc, "predictions", "document", &mut issues);
    if !issues.is_empty() {
        return Err(DatasetError::Invalid(issues));
    }

    let set = match mode {
        PredictionMode::Query => {
            let mut seen = HashSet::new();
            let mut predictions = Vec::with_capacity(records.len());
            for (i, v) in records.into_iter().enumerate() {
                let loc = format!("predictions[{i}]");
                if let Some(p) = parse_query(v, &loc, dataset, strict, &mut issues) {
                    if !seen.insert((p.image, p.category, p.specificity)) {
                        issues.push(Issue::invariant(
                            &loc,
                            "duplicate (image, category, specificity) query",
                        ));
                        continue;
                    }
                    predictions.push(p);
                }
            }
            PredictionSet::Query {
                method,
                params,
                predictions,
            }
        }
        PredictionMode::Semantic => {
            let mut seen = HashSet::new();
            let mut predictions = Vec::with_capacity(records.len());
            for (i, v) in records.into_iter().enumerate() {
                let loc = format!("predictions[{i}]");
                if let Some(p) = parse_semantic(v, &loc, dataset, strict, &mut issues) {
                    if !seen.insert((p.image, p.specificity)) {
                        issues.push(Issue::invariant(
                            &loc,
                            "duplicate (image, specificity) prediction",
                        ));
                        continue;
                    }
                    predictions.push(p);
                }
            }
            PredictionSet::Semantic {
                method,
                params,
                predictions,
            }
        }
    };
    if !issues.is_empty() {
        return Err(DatasetError::Invalid(issues));
    }
    Ok(set)
}

fn resolve_image(
    map: &mut Map<String, Value>,
    loc: &str,
    dataset: &Dataset,
    issues: &mut Vec<Issue>,
) -> Option<usize> {
    let id: String = json::field(map, "image", loc, issues)?;
    let idx = dataset.image_index(&id);
    if idx.is_none() {
        issues.push(Issue::invariant(loc, format!("unknown image `{id}`")));
    }
    idx
}

fn mixed_mode_check(
    map: &Map<String, Value>,
    foreign: &[&str],
    loc: &str,
    issues: &mut Vec<Issue>,
) -> bool {
    if let Some(k) = foreign.iter().find(|k| map.contains_key(**k)) {
        issues.push(Issue::new(
            loc,
            format!("mixed modes: key `{k}` belongs to the other prediction mode"),
        ));
        return false;
    }
    true
}

fn parse_query(
    v: Value,
    loc: &str,
    dataset: &Dataset,
    strict: bool,
    issues: &mut Vec<Issue>,
) -> Option<QueryPrediction> {
    let mut map = json::object(v, QUERY_KEYS, loc, strict, issues)?;
    if !mixed_mode_check(
        &map,
        &["object_map", "part_map", "subpart_map"],
        loc,
        issues,
    ) {
        return None;
    }
    let image = resolve_image(&mut map, loc, dataset, issues);
    let category: Option<CategoryPath> = json::field(&mut map, "category", loc, issues);
    let specificity: Option<Specificity> = json::field(&mut map, "specificity", loc, issues);
    let present: Vec<&str> = ["mask", "box", "abstain"]
        .into_iter()
        .filter(|k| map.contains_key(*k))
        .collect();
    if present.len() != 1 {
        issues.push(Issue::new(
            loc,
            format!(
                "expected exactly one of mask, box, abstain; found {}",
                present.len()
            ),
        ));
        return None;
    }
    let (image, category, specificity) = (image?, category?, specificity?);
    let node = match dataset.taxonomy.get(&category) {
        Some(n) => n.id,
        None => {
            issues.push(Issue::invariant(
                loc,
                format!("unknown category `{category}`"),
            ));
            return None;
        }
    };
    let im = &dataset.images[image];
    let payload = match present[0] {
        "mask" => {
            let runs: Vec<u64> = json::field(&mut map, "mask", loc, issues)?;
            match rle::decode(im.width, im.height, &runs) {
                Ok(m) => Payload::Mask(m),
                Err(e) => {
                    issues.push(Issue::new(format!("{loc}.mask"), e.to_string()));
                    return None;
                }
            }
        }
        "box" => {
            let raw: RawBoxes = json::field(&mut map, "box", loc, issues)?;
            let (list, nested) = match raw {
                RawBoxes::One(b) => (vec![b], false),
                RawBoxes::Many(bs) => (bs, true),
            };
            let mut boxes = Vec::with_capacity(list.len());
            for b in list {
                match BBox::try_from(b) {
                    Ok(b) => boxes.push(b),
                    Err(e) => {
                        issues.push(Issue::new(format!("{loc}.box"), e.to_string()));
                        return None;
                    }
                }
            }
            Payload::Boxes { boxes, nested }
        }
        _ => {
            let flag: bool = json::field(&mut map, "abstain", loc, issues)?;
            if !flag {
                issues.push(Issue::new(
                    format!("{loc}.abstain"),
                    "abstain must be true when present",
                ));
                return None;
            }
            Payload::Abstain
        }
    };
    Some(QueryPrediction {
        image,
        category: node,
        specificity,
        payload,
    })
}

fn parse_semantic(
    v: Value,
    loc: &str,
    dataset: &Dataset,
    strict: bool,
    issues: &mut Vec<Issue>,
) -> Option<SemanticPrediction> {
    let mut map = json::object(v, SEMANTIC_KEYS, loc, strict, issues)?;
    if !mixed_mode_check(&map, &["mask", "box", "abstain", "category"], loc, issues) {
        return None;
    }
    let image = resolve_image(&mut map, loc, dataset, issues);
    let specificity = json::optional::<Specificity>(&mut map, "specificity", loc, issues)
        .map(|s| s.unwrap_or(Specificity::General));
    let mut level_map = |key: &str, level: Level| -> Option<LevelMap> {
        let raw: RawLevelMap = json::field(&mut map, key, loc, issues)?;
        let image = image?;
        let im = &dataset.images[image];
        let mloc = format!("{loc}.{key}");
        let labels = match LabelMap::decode_runs(im.width, im.height, &raw.rle) {
            Ok(l) => l,
            Err(e) => {
                issues.push(Issue::new(format!("{mloc}.rle"), e.to_string()));
                return None;
            }
        };
        let mut palette = Vec::with_capacity(raw.palette.len());
        for path in &raw.palette {
            match dataset.taxonomy.get(path) {
                Some(n) if n.level == level => palette.push(n.id),
                Some(n) => {
                    issues.push(Issue::invariant(
                        &mloc,
                        format!("`{path}` is a {} category in the {level} map", n.level),
                    ));
                    return None;
                }
                None => {
                    issues.push(Issue::invariant(
                        &mloc,
                        format!("unknown category `{path}`"),
                    ));
                    return None;
                }
            }
        }
        if let Some(&bad) = labels
            .labels()
            .iter()
            .find(|&&v| v as usize > palette.len())
        {
            issues.push(Issue::new(
                format!("{mloc}.rle"),
                format!("value {bad} exceeds palette size {}", palette.len()),
            ));
            return None;
        }
        Some(LevelMap {
            palette,
            map: labels,
        })
    };
    let object = level_map("object_map", Level::Object);
    let part = level_map("part_map", Level::Part);
    let subpart = level_map("subpart_map", Level::Subpart);
    Some(SemanticPrediction {
        image: image?,
        specificity: specificity?,
        object: object?,
        part: part?,
        subpart: subpart?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_dataset_str, LoadOptions};

    fn dataset() -> Dataset {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":4,"height":2,"split":"train","object":"quadruped"}],
            "annotations":[{"image":"a","category":"quadruped/head","rings":[[[0,0],[2,0],[2,2],[0,2]]]}]}"#;
        parse_dataset_str(doc, &LoadOptions::default()).unwrap()
    }

    #[test]
    fn query_file_with_abstention() {
        let d = dataset();
        let text = r#"{"version":1,"mode":"query","predictions":[
            {"image":"a","category":"quadruped/head","specificity":"general","abstain":true},
            {"image":"a","category":"quadruped/head/eyes","specificity":"general","mask":[1,2,5]},
            {"image":"a","category":"quadruped","specificity":"specific","box":[0,0,1,1]},
            {"image":"a","category":"quadruped","specificity":"general","box":[[0,0,1,1],[2,0,3,0]]}]}"#;
        let set = parse_predictions(text, PredictionMode::Query, &d, true).unwrap();
        assert_eq!(set.abstain_count(), 1);
        assert_eq!(set.len(), 4);
        let again = parse_predictions(&set.to_json(&d), PredictionMode::Query, &d, true).unwrap();
        assert_eq!(set, again);
        let PredictionSet::Query { predictions, .. } = &set else {
            panic!()
        };
        assert_eq!(predictions[1].mask(4, 2).unwrap().area(), 2);
        assert_eq!(predictions[3].mask(4, 2).unwrap().area(), 6);
    }

    #[test]
    fn rle_length_must_match_image() {
        let d = dataset();
        let text = r#"{"version":1,"mode":"query","predictions":[
            {"image":"a","category":"quadruped/head","specificity":"general","mask":[1,2]}]}"#;
        let err = parse_predictions(text, PredictionMode::Query, &d, false).unwrap_err();
        assert!(!err.is_invariant_only());
        assert_eq!(err.issues()[0].location, "predictions[0].mask");
    }

    #[test]
    fn unknown_image_and_mode_errors() {
        let d = dataset();
        let text = r#"{"version":1,"mode":"query","predictions":[
            {"image":"zz","category":"quadruped/head","specificity":"general","abstain":true}]}"#;
        assert!(parse_predictions(text, PredictionMode::Query, &d, false).is_err());
        assert!(parse_predictions(text, PredictionMode::Semantic, &d, false).is_err());
        let mixed = r#"{"version":1,"mode":"query","predictions":[
            {"image":"a","category":"quadruped/head","specificity":"general","abstain":true,
             "object_map":{"palette":[],"rle":[0,8]}}]}"#;
        let err = parse_predictions(mixed, PredictionMode::Query, &d, false).unwrap_err();
        assert!(err.issues()[0].message.contains("mixed modes"));
    }

    #[test]
    fn payload_must_be_unique() {
        let d = dataset();
        let text = r#"{"version":1,"mode":"query","predictions":[
            {"image":"a","category":"quadruped/head","specificity":"general","abstain":true,"box":[0,0,1,1]}]}"#;
        assert!(parse_predictions(text, PredictionMode::Query, &d, false).is_err());
    }

    #[test]
    fn semantic_level_error() {
        let d = dataset();
        let text = r#"{"version":1,"mode":"semantic","predictions":[
            {"image":"a",
             "object_map":{"palette":["quadruped"],"rle":[1,8]},
             "part_map":{"palette":["quadruped/head"],"rle":[1,4,0,4]},
             "subpart_map":{"palette":["quadruped/head"],"rle":[1,2,0,6]}}]}"#;
        let err = parse_predictions(text, PredictionMode::Semantic, &d, false).unwrap_err();
        assert!(
            err.issues()[0]
                .message
                .contains("part category in the subpart map"),
            "{:?}",
            err.issues()
        );
    }

    #[test]
    fn semantic_round_trip() {
        let d = dataset();
        let text = r#"{"version":1,"mode":"semantic","method":"m","predictions":[
            {"image":"a",
             "object_map":{"palette":["quadruped"],"rle":[1,8]},
             "part_map":{"palette":["quadruped/head"],"rle":[1,4,0,4]},
             "subpart_map":{"palette":["quadruped/head/eyes","quadruped/head/ears"],"rle":[1,2,2,1,0,5]}}]}"#;
        let set = parse_predictions(text, PredictionMode::Semantic, &d, true).unwrap();
        let again =
            parse_predictions(&set.to_json(&d), PredictionMode::Semantic, &d, true).unwrap();
        assert_eq!(set, again);
        assert_eq!(set.method(), Some("m"));
        let PredictionSet::Semantic { predictions, .. } = &set else {
            panic!()
        };
        let eyes = d
            .taxonomy
            .get(&"quadruped/head/eyes".parse().unwrap())
            .unwrap()
            .id;
        assert_eq!(predictions[0].subpart.node_at(1), Some(eyes));
        assert_eq!(predictions[0].subpart.node_at(5), None);
    }

    #[test]
    fn palette_overflow() {
        let d = dataset();
        let text = r#"{"version":1,"mode":"semantic","predictions":[
            {"image":"a",
             "object_map":{"palette":["quadruped"],"rle":[2,8]},
             "part_map":{"palette":[],"rle":[0,8]},
             "subpart_map":{"palette":[],"rle":[0,8]}}]}"#;
        assert!(parse_predictions(text, PredictionMode::Semantic, &d, false).is_err());
    }
}

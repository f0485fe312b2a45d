//! Object / part / subpart category hierarchy.
//!
//! Nodes are identified by their full path (`quadruped/head/eyes`), never by
//! leaf name alone, since leaf names such as `eyes` or `neck` recur under many
//! parents. Entailment is therefore a structural check on path prefixes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

/// Current taxonomy document version.
pub const TAXONOMY_VERSION: u32 = 1;

const SPIN_TAXONOMY: &str = include_str!("../data/spin_taxonomy.json");

/// Granularity level. Ordered finest first: `Subpart < Part < Object`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Subpart,
    Part,
    Object,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Subpart, Level::Part, Level::Object];

    /// Number of path segments a node at this level carries.
    pub fn depth(self) -> usize {
        match self {
            Level::Object => 1,
            Level::Part => 2,
            Level::Subpart => 3,
        }
    }

    fn from_depth(depth: usize) -> Option<Level> {
        match depth {
            1 => Some(Level::Object),
            2 => Some(Level::Part),
            3 => Some(Level::Subpart),
            _ => None,
        }
    }

    /// The next coarser level, if any.
    pub fn parent(self) -> Option<Level> {
        match self {
            Level::Subpart => Some(Level::Part),
            Level::Part => Some(Level::Object),
            Level::Object => None,
        }
    }

    /// Single-letter tag used in table column names (`S`, `P`, `O`).
    pub fn letter(self) -> &'static str {
        match self {
            Level::Subpart => "S",
            Level::Part => "P",
            Level::Object => "O",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Subpart => "subpart",
            Level::Part => "part",
            Level::Object => "object",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a query names the object by its general super-category or by its
/// specific (fine-grained) class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Specificity {
    Specific,
    General,
}

impl Specificity {
    pub const ALL: [Specificity; 2] = [Specificity::Specific, Specificity::General];

    pub fn as_str(self) -> &'static str {
        match self {
            Specificity::Specific => "specific",
            Specificity::General => "general",
        }
    }

    /// Capitalized label used in table headers.
    pub fn title(self) -> &'static str {
        match self {
            Specificity::Specific => "Specific",
            Specificity::General => "General",
        }
    }
}

impl fmt::Display for Specificity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Slash-separated category path of one to three non-empty segments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryPath(Vec<String>);

impl CategoryPath {
    pub fn new<I, S>(segments: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        let joined = segments.join("/");
        if segments.is_empty() || segments.len() > 3 {
            return Err(TaxonomyError::BadPath(joined));
        }
        for s in &segments {
            if s.trim().is_empty() || s.contains('/') {
                return Err(TaxonomyError::BadPath(joined));
            }
        }
        Ok(CategoryPath(segments))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn level(&self) -> Level {
        Level::from_depth(self.0.len()).expect("path length checked at construction")
    }

    /// Name of the root object segment.
    pub fn object(&self) -> &str {
        &self.0[0]
    }

    pub fn leaf(&self) -> &str {
        self.0.last().expect("non-empty path")
    }

    pub fn parent(&self) -> Option<CategoryPath> {
        if self.0.len() > 1 {
            Some(CategoryPath(self.0[..self.0.len() - 1].to_vec()))
        } else {
            None
        }
    }

    pub fn has_prefix(&self, prefix: &CategoryPath) -> bool {
        self.0.len() >= prefix.0.len() && self.0[..prefix.0.len()] == prefix.0[..]
    }

    pub fn child(&self, name: &str) -> Result<CategoryPath, TaxonomyError> {
        let mut segments = self.0.clone();
        segments.push(name.to_string());
        CategoryPath::new(segments)
    }
}

impl fmt::Display for CategoryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

impl FromStr for CategoryPath {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CategoryPath::new(s.split('/'))
    }
}

impl Serialize for CategoryPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CategoryPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryNode {
    pub id: NodeId,
    pub path: CategoryPath,
    pub level: Level,
    /// The super-category name of the root object.
    pub general_object_name: String,
}

/// One violated structural invariant found while building a taxonomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicatePath(String),
    DanglingParent { path: String, missing: String },
    Cycle(String),
    EmptyName(String),
    DuplicateSpecific(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicatePath(p) => write!(f, "duplicate path `{p}`"),
            Violation::DanglingParent { path, missing } => {
                write!(f, "`{path}` has no parent node `{missing}`")
            }
            Violation::Cycle(p) => write!(f, "parent chain of `{p}` forms a cycle"),
            Violation::EmptyName(ctx) => write!(f, "empty name in {ctx}"),
            Violation::DuplicateSpecific(s) => {
                write!(f, "specific name `{s}` maps to more than one object")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("malformed category path `{0}`")]
    BadPath(String),
    #[error("taxonomy document does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported taxonomy version {0}")]
    Version(u32),
    #[error("unknown key `{key}` in {context}")]
    UnknownKey { key: String, context: String },
    #[error("invalid taxonomy: {}", list(.0))]
    Invalid(Vec<Violation>),
    #[error("entailment needs adjacent levels, got {child} under {parent}")]
    LevelMismatch { child: Level, parent: Level },
    #[error("unknown specific object name `{0}`")]
    UnknownSpecific(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
}

fn list(vs: &[Violation]) -> String {
    vs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Serialized taxonomy document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyDoc {
    pub version: u32,
    pub objects: Vec<ObjectDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDoc {
    pub general: String,
    #[serde(default)]
    pub specifics: Vec<String>,
    #[serde(default)]
    pub parts: Vec<PartDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartDoc {
    pub name: String,
    #[serde(default)]
    pub subparts: Vec<String>,
}

/// Immutable, validated category forest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    nodes: Vec<CategoryNode>,
    parents: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    by_path: HashMap<CategoryPath, NodeId>,
    specific_to_general: BTreeMap<String, String>,
}

impl Taxonomy {
    /// Builds a taxonomy from a flat path list plus a specific→general map,
    /// collecting every violated invariant before failing.
    pub fn from_paths(
        paths: impl IntoIterator<Item = CategoryPath>,
        specifics: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, TaxonomyError> {
        let mut violations = Vec::new();
        let mut nodes = Vec::new();
        let mut by_path = HashMap::new();

        for path in paths {
            if by_path.contains_key(&path) {
                violations.push(Violation::DuplicatePath(path.to_string()));
                continue;
            }
            let id = NodeId(nodes.len() as u32);
            by_path.insert(path.clone(), id);
            nodes.push(CategoryNode {
                id,
                level: path.level(),
                general_object_name: path.object().to_string(),
                path,
            });
        }

        let mut parents = vec![None; nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for node in &nodes {
            if let Some(parent_path) = node.path.parent() {
                match by_path.get(&parent_path) {
                    Some(&pid) => {
                        parents[node.id.index()] = Some(pid);
                        children[pid.index()].push(node.id);
                    }
                    None => violations.push(Violation::DanglingParent {
                        path: node.path.to_string(),
                        missing: parent_path.to_string(),
                    }),
                }
            }
        }

        // Prefix-derived edges cannot loop, but a chain longer than the level
        // count would mean the edge table is corrupt.
        for node in &nodes {
            let mut steps = 0;
            let mut cur = parents[node.id.index()];
            while let Some(p) = cur {
                steps += 1;
                if steps > Level::ALL.len() {
                    violations.push(Violation::Cycle(node.path.to_string()));
                    break;
                }
                cur = parents[p.index()];
            }
        }

        let mut specific_to_general = BTreeMap::new();
        for (specific, general) in specifics {
            if specific.trim().is_empty() {
                violations.push(Violation::EmptyName(format!("specifics of `{general}`")));
                continue;
            }
            let object = CategoryPath::new([general.as_str()]);
            if object.map(|p| !by_path.contains_key(&p)).unwrap_or(true) {
                violations.push(Violation::DanglingParent {
                    path: specific.clone(),
                    missing: general.clone(),
                });
                continue;
            }
            if specific_to_general
                .insert(specific.clone(), general)
                .is_some()
            {
                violations.push(Violation::DuplicateSpecific(specific));
            }
        }

        if !violations.is_empty() {
            return Err(TaxonomyError::Invalid(violations));
        }
        Ok(Taxonomy {
            nodes,
            parents,
            children,
            by_path,
            specific_to_general,
        })
    }

    pub fn from_doc(doc: &TaxonomyDoc) -> Result<Self, TaxonomyError> {
        if doc.version != TAXONOMY_VERSION {
            return Err(TaxonomyError::Version(doc.version));
        }
        let mut paths = Vec::new();
        let mut specifics = Vec::new();
        let mut empties = Vec::new();
        for object in &doc.objects {
            let Ok(op) = CategoryPath::new([object.general.as_str()]) else {
                empties.push(Violation::EmptyName("object list".to_string()));
                continue;
            };
            paths.push(op.clone());
            for s in &object.specifics {
                specifics.push((s.clone(), object.general.clone()));
            }
            for part in &object.parts {
                let Ok(pp) = op.child(&part.name) else {
                    empties.push(Violation::EmptyName(format!("parts of `{op}`")));
                    continue;
                };
                paths.push(pp.clone());
                for sub in &part.subparts {
                    match pp.child(sub) {
                        Ok(sp) => paths.push(sp),
                        Err(_) => empties.push(Violation::EmptyName(format!("subparts of `{pp}`"))),
                    }
                }
            }
        }
        match Taxonomy::from_paths(paths, specifics) {
            Ok(t) if empties.is_empty() => Ok(t),
            Ok(_) => Err(TaxonomyError::Invalid(empties)),
            Err(TaxonomyError::Invalid(mut vs)) => {
                empties.append(&mut vs);
                Err(TaxonomyError::Invalid(empties))
            }
            Err(e) => Err(e),
        }
    }

    /// Serializes back to the nested document form. Object, part and subpart
    /// order follows insertion order.
    pub fn to_doc(&self) -> TaxonomyDoc {
        let mut specifics: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for (s, g) in &self.specific_to_general {
            specifics.entry(g.as_str()).or_default().push(s.clone());
        }
        let objects = self
            .nodes_at(Level::Object)
            .map(|o| ObjectDoc {
                general: o.path.leaf().to_string(),
                specifics: specifics.remove(o.path.leaf()).unwrap_or_default(),
                parts: self.children[o.id.index()]
                    .iter()
                    .map(|&pid| PartDoc {
                        name: self.nodes[pid.index()].path.leaf().to_string(),
                        subparts: self.children[pid.index()]
                            .iter()
                            .map(|&sid| self.nodes[sid.index()].path.leaf().to_string())
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        TaxonomyDoc {
            version: TAXONOMY_VERSION,
            objects,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("taxonomy serializes")
    }

    /// The shipped hierarchy: 11 objects, 40 parts, 203 subparts.
    pub fn spin() -> Self {
        load_taxonomy(SPIN_TAXONOMY, true).expect("bundled taxonomy is valid")
    }

    pub fn nodes(&self) -> &[CategoryNode] {
        &self.nodes
    }

    pub fn nodes_at(&self, level: Level) -> impl Iterator<Item = &CategoryNode> + '_ {
        self.nodes.iter().filter(move |n| n.level == level)
    }

    pub fn node(&self, id: NodeId) -> &CategoryNode {
        &self.nodes[id.index()]
    }

    pub fn get(&self, path: &CategoryPath) -> Option<&CategoryNode> {
        self.by_path.get(path).map(|&id| &self.nodes[id.index()])
    }

    pub fn lookup(&self, path: &CategoryPath) -> Result<&CategoryNode, TaxonomyError> {
        self.get(path)
            .ok_or_else(|| TaxonomyError::UnknownCategory(path.to_string()))
    }

    pub fn parent_of(&self, id: NodeId) -> Option<NodeId> {
        self.parents[id.index()]
    }

    pub fn children_of(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.index()]
    }

    /// Node counts as `(objects, parts, subparts)`.
    pub fn level_counts(&self) -> (usize, usize, usize) {
        let count = |l| self.nodes_at(l).count();
        (
            count(Level::Object),
            count(Level::Part),
            count(Level::Subpart),
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True iff `parent` is the direct parent of `child`. Levels must be
    /// adjacent.
    pub fn entails(
        &self,
        child: &CategoryNode,
        parent: &CategoryNode,
    ) -> Result<bool, TaxonomyError> {
        if child.level.parent() != Some(parent.level) {
            return Err(TaxonomyError::LevelMismatch {
                child: child.level,
                parent: parent.level,
            });
        }
        Ok(self.entails_ids(child.id, parent.id))
    }

    /// Id-level entailment without the level precondition; false for any
    /// pair that is not a direct edge.
    pub fn entails_ids(&self, child: NodeId, parent: NodeId) -> bool {
        self.parents.get(child.index()).copied().flatten() == Some(parent)
    }

    pub fn general_of(&self, specific: &str) -> Result<&str, TaxonomyError> {
        self.specific_to_general
            .get(specific)
            .map(String::as_str)
            .ok_or_else(|| TaxonomyError::UnknownSpecific(specific.to_string()))
    }

    pub fn specifics(&self) -> &BTreeMap<String, String> {
        &self.specific_to_general
    }

    /// Object names, sorted.
    pub fn objects(&self) -> BTreeSet<&str> {
        self.nodes_at(Level::Object)
            .map(|n| n.path.leaf())
            .collect()
    }
}

/// Parses and validates a taxonomy document. With `strict`, keys outside the
/// document schema are rejected.
pub fn load_taxonomy(document: &str, strict: bool) -> Result<Taxonomy, TaxonomyError> {
    let value: Value = serde_json::from_str(document)?;
    taxonomy_from_value(&value, strict)
}

pub(crate) fn taxonomy_from_value(value: &Value, strict: bool) -> Result<Taxonomy, TaxonomyError> {
    if strict {
        check_taxonomy_keys(value)?;
    }
    let doc: TaxonomyDoc = serde_json::from_value(value.clone())?;
    Taxonomy::from_doc(&doc)
}

fn check_taxonomy_keys(value: &Value) -> Result<(), TaxonomyError> {
    fn check(v: &Value, allowed: &[&str], context: &str) -> Result<(), TaxonomyError> {
        if let Some(map) = v.as_object() {
            if let Some(key) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(TaxonomyError::UnknownKey {
                    key: key.clone(),
                    context: context.to_string(),
                });
            }
        }
        Ok(())
    }
    check(value, &["version", "objects"], "taxonomy")?;
    for (i, object) in value["objects"]
        .as_array()
        .into_iter()
        .flatten()
        .enumerate()
    {
        check(
            object,
            &["general", "specifics", "parts"],
            &format!("objects[{i}]"),
        )?;
        for (j, part) in object["parts"].as_array().into_iter().flatten().enumerate() {
            check(
                part,
                &["name", "subparts"],
                &format!("objects[{i}].parts[{j}]"),
            )?;
        }
    }
    Ok(())
}

/// Notes attached to validation output for the shipped hierarchy.
pub fn taxonomy_notes(taxonomy: &Taxonomy) -> Vec<String> {
    let mut notes = Vec::new();
    let (_, _, subparts) = taxonomy.level_counts();
    if subparts == 203 {
        notes.push(
            "subpart category count is 203 (annotated categories); the candidate selection \
             listed 206 subpart categories"
                .to_string(),
        );
    }
    notes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> CategoryPath {
        s.parse().unwrap()
    }

    #[test]
    fn spin_level_counts() {
        let t = Taxonomy::spin();
        assert_eq!(t.level_counts(), (11, 40, 203));
        let with_subparts = t
            .nodes_at(Level::Part)
            .filter(|n| !t.children_of(n.id).is_empty())
            .count();
        assert_eq!(with_subparts, 34);
    }

    #[test]
    fn empty_document_is_valid() {
        let t = load_taxonomy(r#"{"version":1,"objects":[]}"#, true).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.level_counts(), (0, 0, 0));
    }

    #[test]
    fn dangling_parent_is_reported() {
        let err = Taxonomy::from_paths([p("car"), p("car/tire/rim")], []).unwrap_err();
        match err {
            TaxonomyError::Invalid(vs) => assert_eq!(
                vs,
                vec![Violation::DanglingParent {
                    path: "car/tire/rim".into(),
                    missing: "car/tire".into()
                }]
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let err = Taxonomy::from_paths(
            [p("car"), p("car"), p("car/tire/rim"), p("bird/head")],
            [("sedan".to_string(), "truck".to_string())],
        )
        .unwrap_err();
        let TaxonomyError::Invalid(vs) = err else {
            panic!()
        };
        assert_eq!(vs.len(), 4, "{vs:?}");
    }

    #[test]
    fn duplicate_subpart_in_doc() {
        let doc = r#"{"version":1,"objects":[{"general":"car","parts":[{"name":"tire","subparts":["rim","rim"]}]}]}"#;
        let err = load_taxonomy(doc, false).unwrap_err();
        assert!(
            matches!(err, TaxonomyError::Invalid(ref v) if v == &[Violation::DuplicatePath("car/tire/rim".into())])
        );
    }

    #[test]
    fn entailment_examples() {
        let t = Taxonomy::spin();
        let eyes = t.lookup(&p("quadruped/head/eyes")).unwrap();
        let head = t.lookup(&p("quadruped/head")).unwrap();
        let windshield = t.lookup(&p("aeroplane/body/windshield")).unwrap();
        assert!(t.entails(eyes, head).unwrap());
        assert!(!t.entails(windshield, head).unwrap());
        assert!(matches!(
            t.entails(head, head),
            Err(TaxonomyError::LevelMismatch { .. })
        ));
        let quad = t.lookup(&p("quadruped")).unwrap();
        assert!(matches!(
            t.entails(eyes, quad),
            Err(TaxonomyError::LevelMismatch { .. })
        ));
        assert!(t.entails(head, quad).unwrap());
    }

    #[test]
    fn repeated_leaf_names_are_distinct_nodes() {
        let t = Taxonomy::spin();
        let a = t.lookup(&p("quadruped/head/eyes")).unwrap();
        let b = t.lookup(&p("biped/head/eyes")).unwrap();
        assert_ne!(a.id, b.id);
        let biped_head = t.lookup(&p("biped/head")).unwrap();
        assert!(!t.entails(a, biped_head).unwrap());
    }

    #[test]
    fn general_lookup() {
        let t = Taxonomy::spin();
        assert_eq!(t.general_of("box turtle").unwrap(), "reptile");
        assert!(matches!(
            t.general_of("reptile"),
            Err(TaxonomyError::UnknownSpecific(_))
        ));
        let one =
            Taxonomy::from_paths([p("dog")], [("beagle".to_string(), "dog".to_string())]).unwrap();
        assert_eq!(one.general_of("beagle").unwrap(), "dog");
    }

    #[test]
    fn strict_rejects_unknown_keys() {
        let doc = r#"{"version":1,"objects":[{"general":"car","colour":"red"}]}"#;
        assert!(load_taxonomy(doc, false).is_ok());
        assert!(matches!(
            load_taxonomy(doc, true),
            Err(TaxonomyError::UnknownKey { .. })
        ));
    }

    #[test]
    fn round_trip_is_stable() {
        let t = Taxonomy::spin();
        let again = load_taxonomy(&t.to_json(), true).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn bad_paths() {
        assert!("".parse::<CategoryPath>().is_err());
        assert!("a/b/c/d".parse::<CategoryPath>().is_err());
        assert!("a//c".parse::<CategoryPath>().is_err());
        assert_eq!(p("a/b").level(), Level::Part);
    }

    #[test]
    fn level_ordering() {
        assert!(Level::Subpart < Level::Part && Level::Part < Level::Object);
    }
}

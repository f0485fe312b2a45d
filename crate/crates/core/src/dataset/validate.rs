use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{Dataset, Issue, Split};
use crate::exec::Execution;
use crate::taxonomy::{taxonomy_notes, Level};

/// Expected counts checked by [`validate_dataset`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expectations {
    entries: BTreeMap<String, Vec<u64>>,
}

const KEYS: &[&str] = &[
    "images",
    "splits",
    "object_categories",
    "part_categories",
    "subpart_categories",
    "object_annotations",
    "part_annotations",
    "subpart_annotations",
];

impl Expectations {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one `key=v[,v...]` expectation. `splits` takes three values
    /// (train, val, test); every other key takes one.
    pub fn add(&mut self, spec: &str) -> Result<(), String> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{spec}`"))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(format!(
                "unknown expectation `{key}`; known: {}",
                KEYS.join(", ")
            ));
        }
        let values = value
            .split(',')
            .map(|v| v.trim().replace('_', "").parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("bad count in `{spec}`: {e}"))?;
        let want = if key == "splits" { 3 } else { 1 };
        if values.len() != want {
            return Err(format!(
                "`{key}` takes {want} value(s), got {}",
                values.len()
            ));
        }
        self.entries.insert(key.to_string(), values);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromStr for Expectations {
    type Err = String;

    /// Parses whitespace- or semicolon-separated `key=value` items.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut e = Expectations::new();
        for item in s
            .split(|c: char| c.is_whitespace() || c == ';')
            .filter(|t| !t.is_empty())
        {
            e.add(item)?;
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: Vec<u64>,
    pub actual: Vec<u64>,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        if self.passed {
            write!(f, "{}: {} ok", self.name, join(&self.actual))
        } else {
            let delta: Vec<String> = self
                .actual
                .iter()
                .zip(&self.expected)
                .map(|(&a, &e)| format!("{:+}", a as i64 - e as i64))
                .collect();
            write!(
                f,
                "{}: expected {}, got {} (delta {})",
                self.name,
                join(&self.expected),
                join(&self.actual),
                delta.join(",")
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCounts {
    pub object: u64,
    pub part: u64,
    pub subpart: u64,
}

impl LevelCounts {
    fn get(&self, level: Level) -> u64 {
        match level {
            Level::Object => self.object,
            Level::Part => self.part,
            Level::Subpart => self.subpart,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroArea {
    pub image: String,
    pub category: String,
    pub annotation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub images: u64,
    pub splits: BTreeMap<String, u64>,
    pub categories: LevelCounts,
    pub annotations: LevelCounts,
    /// Annotation count per category path, every taxonomy node listed.
    pub histogram: BTreeMap<String, u64>,
    /// Annotations that rasterize to no pixels; excluded from shape
    /// statistics but not a validation failure.
    pub zero_area: Vec<ZeroArea>,
    pub issues: Vec<Issue>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Summarizes `dataset` and compares it to `expect`. `issues` are the
/// invariant problems found while loading; any of them fails the report.
pub fn validate_dataset(
    dataset: &Dataset,
    issues: &[Issue],
    expect: &Expectations,
    exec: &Execution,
) -> ValidationReport {
    let tax = &dataset.taxonomy;
    let (o, p, s) = tax.level_counts();
    let categories = LevelCounts {
        object: o as u64,
        part: p as u64,
        subpart: s as u64,
    };

    let mut splits: BTreeMap<String, u64> = Split::ALL
        .iter()
        .map(|s| (s.as_str().to_string(), 0))
        .collect();
    for im in &dataset.images {
        *splits
            .get_mut(im.split.as_str())
            .expect("all splits listed") += 1;
    }

    let mut histogram: BTreeMap<String, u64> = tax
        .nodes()
        .iter()
        .map(|n| (n.path.to_string(), 0))
        .collect();
    let mut per_level = [0u64; 3];
    for a in &dataset.annotations {
        let node = tax.node(a.category);
        per_level[node.level as usize] += 1;
        *histogram
            .get_mut(&node.path.to_string())
            .expect("node listed") += 1;
    }
    let annotations = LevelCounts {
        object: per_level[Level::Object as usize],
        part: per_level[Level::Part as usize],
        subpart: per_level[Level::Subpart as usize],
    };

    let areas = exec.map(&dataset.annotations, |a| {
        dataset.rasterize_annotation(a).area()
    });
    let zero_area = areas
        .iter()
        .enumerate()
        .filter(|(_, &area)| area == 0)
        .map(|(i, _)| {
            let a = &dataset.annotations[i];
            ZeroArea {
                image: dataset.images[a.image].id.clone(),
                category: dataset.path_of(a.category).to_string(),
                annotation: i,
            }
        })
        .collect();

    let images = dataset.images.len() as u64;
    let checks: Vec<Check> = expect
        .entries
        .iter()
        .map(|(key, expected)| {
            let actual = match key.as_str() {
                "images" => vec![images],
                "splits" => Split::ALL.iter().map(|s| splits[s.as_str()]).collect(),
                k => {
                    let (level, kind) = k.split_once('_').expect("validated key");
                    let level = match level {
                        "object" => Level::Object,
                        "part" => Level::Part,
                        _ => Level::Subpart,
                    };
                    let counts = if kind == "categories" {
                        &categories
                    } else {
                        &annotations
                    };
                    vec![counts.get(level)]
                }
            };
            Check {
                name: key.clone(),
                passed: &actual == expected,
                expected: expected.clone(),
                actual,
            }
        })
        .collect();

    let passed = issues.is_empty() && checks.iter().all(|c| c.passed);
    ValidationReport {
        images,
        splits,
        categories,
        annotations,
        histogram,
        zero_area,
        issues: issues.to_vec(),
        checks,
        notes: taxonomy_notes(tax),
        passed,
    }
}

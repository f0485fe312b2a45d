use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json as jv, Map, Value};

use super::{check_version, json, parse_json, read_json, Dataset, DatasetError, Issue};
use crate::taxonomy::{CategoryPath, NodeId, Specificity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Box,
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Answer {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecognitionAnswer {
    pub image: usize,
    pub category: NodeId,
    pub specificity: Specificity,
    pub prompt_kind: PromptKind,
    /// The model said "yes".
    pub answer: bool,
    /// Derived from the annotations, never read from the file.
    pub ground_truth_present: bool,
}

impl RecognitionAnswer {
    pub fn is_correct(&self) -> bool {
        self.answer == self.ground_truth_present
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnswerSet {
    pub method: Option<String>,
    pub params: Option<String>,
    pub prompt: Option<String>,
    pub answers: Vec<RecognitionAnswer>,
}

impl AnswerSet {
    pub fn to_value(&self, dataset: &Dataset) -> Value {
        let mut doc = Map::new();
        doc.insert("version".into(), jv!(super::FORMAT_VERSION));
        for (key, v) in [
            ("method", &self.method),
            ("params", &self.params),
            ("prompt", &self.prompt),
        ] {
            if let Some(v) = v {
                doc.insert(key.into(), jv!(v));
            }
        }
        let answers: Vec<Value> = self
            .answers
            .iter()
            .map(|a| {
                jv!({
                    "image": dataset.images[a.image].id,
                    "category": dataset.path_of(a.category),
                    "specificity": a.specificity,
                    "prompt_kind": a.prompt_kind,
                    "answer": if a.answer { Answer::Yes } else { Answer::No },
                })
            })
            .collect();
        doc.insert("answers".into(), Value::Array(answers));
        Value::Object(doc)
    }

    pub fn to_json(&self, dataset: &Dataset) -> String {
        serde_json::to_string(&self.to_value(dataset)).expect("answers serialize")
    }
}

/// Whether `category` is visible on `image`: it is the image's object, or it
/// or one of its descendants is annotated there.
pub(crate) fn category_present(dataset: &Dataset, image: usize, category: NodeId) -> bool {
    if dataset.images[image].object == category {
        return true;
    }
    let path = dataset.path_of(category);
    dataset
        .annotations_of(image)
        .any(|a| dataset.path_of(a.category).has_prefix(path))
}

pub fn load_answers(
    path: &Path,
    dataset: &Dataset,
    strict: bool,
) -> Result<AnswerSet, DatasetError> {
    parse_answers_value(read_json(path)?, dataset, strict)
}

pub fn parse_answers(
    text: &str,
    dataset: &Dataset,
    strict: bool,
) -> Result<AnswerSet, DatasetError> {
    parse_answers_value(parse_json(text, "answers")?, dataset, strict)
}

#[derive(Deserialize)]
struct RawAnswer {
    image: String,
    category: CategoryPath,
    specificity: Specificity,
    prompt_kind: PromptKind,
    answer: Answer,
}

fn parse_answers_value(
    value: Value,
    dataset: &Dataset,
    strict: bool,
) -> Result<AnswerSet, DatasetError> {
    let mut issues = Vec::new();
    let Some(mut doc) = json::object(
        value,
        &["version", "method", "params", "prompt", "answers"],
        "document",
        strict,
        &mut issues,
    ) else {
        return Err(DatasetError::Invalid(issues));
    };
    check_version(&mut doc, &mut issues);
    let method = json::optional::<String>(&mut doc, "method", "document", &mut issues).flatten();
    let params = json::optional::<String>(&mut doc, "params", "document", &mut issues).flatten();
    let prompt = json::optional::<String>(&mut doc, "prompt", "document", &mut issues).flatten();
    let mut answers = Vec::new();
    for (i, v) in json::array(&mut doc, "answers", "document", &mut issues)
        .into_iter()
        .enumerate()
    {
        let loc = format!("answers[{i}]");
        let Some(map) = json::object(
            v,
            &["image", "category", "specificity", "prompt_kind", "answer"],
            &loc,
            strict,
            &mut issues,
        ) else {
            continue;
        };
        let Some(raw) = json::convert::<RawAnswer>(Value::Object(map), &loc, &mut issues) else {
            continue;
        };
        let Some(image) = dataset.image_index(&raw.image) else {
            issues.push(Issue::invariant(
                &loc,
                format!("unknown image `{}`", raw.image),
            ));
            continue;
        };
        let Some(node) = dataset.taxonomy.get(&raw.category) else {
            issues.push(Issue::invariant(
                &loc,
                format!("unknown category `{}`", raw.category),
            ));
            continue;
        };
        answers.push(RecognitionAnswer {
            image,
            category: node.id,
            specificity: raw.specificity,
            prompt_kind: raw.prompt_kind,
            answer: raw.answer == Answer::Yes,
            ground_truth_present: category_present(dataset, image, node.id),
        });
    }
    if !issues.is_empty() {
        return Err(DatasetError::Invalid(issues));
    }
    Ok(AnswerSet {
        method,
        params,
        prompt,
        answers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_dataset_str, LoadOptions};

    fn dataset() -> Dataset {
        let doc = r#"{"version":1,"taxonomy":"builtin:spin",
            "images":[{"id":"a","width":4,"height":4,"split":"val","object":"quadruped"}],
            "annotations":[{"image":"a","category":"quadruped/head/eyes","rings":[[[0,0],[2,0],[2,2]]]}]}"#;
        parse_dataset_str(doc, &LoadOptions::default()).unwrap()
    }

    #[test]
    fn presence_is_derived() {
        let d = dataset();
        let text = r#"{"version":1,"method":"m","answers":[
            {"image":"a","category":"quadruped","specificity":"general","prompt_kind":"box","answer":"yes"},
            {"image":"a","category":"quadruped/head","specificity":"general","prompt_kind":"box","answer":"yes"},
            {"image":"a","category":"quadruped/head/eyes","specificity":"specific","prompt_kind":"mask","answer":"no"},
            {"image":"a","category":"quadruped/torso","specificity":"general","prompt_kind":"mask","answer":"yes"}]}"#;
        let set = parse_answers(text, &d, true).unwrap();
        let present: Vec<bool> = set.answers.iter().map(|a| a.ground_truth_present).collect();
        assert_eq!(present, [true, true, true, false]);
        let correct: Vec<bool> = set.answers.iter().map(|a| a.is_correct()).collect();
        assert_eq!(correct, [true, true, false, false]);
        assert_eq!(parse_answers(&set.to_json(&d), &d, true).unwrap(), set);
    }

    #[test]
    fn answer_must_be_binary_and_known() {
        let d = dataset();
        let maybe = r#"{"version":1,"answers":[
            {"image":"a","category":"quadruped","specificity":"general","prompt_kind":"box","answer":"maybe"}]}"#;
        assert!(!parse_answers(maybe, &d, false)
            .unwrap_err()
            .is_invariant_only());
        let unknown = r#"{"version":1,"answers":[
            {"image":"b","category":"quadruped","specificity":"general","prompt_kind":"box","answer":"no"}]}"#;
        assert!(parse_answers(unknown, &d, false)
            .unwrap_err()
            .is_invariant_only());
    }
}

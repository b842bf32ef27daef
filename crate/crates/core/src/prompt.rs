//! The six-task prompt suite: metadata types, templated rendering,
//! validation, seeded generation and the line-delimited metadata format.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, FormatError};
use crate::vocab::{Relation, Vocabulary};

/// Candidates drawn per task before deduplication.
pub const DRAWS_PER_TASK: usize = 100;

/// Identifier of the RNG scheme recorded in suite headers.
pub const GENERATOR_ID: &str = "chacha8-stream-per-task-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    SingleObject,
    TwoObject,
    Counting,
    Colors,
    Position,
    ColorAttr,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::SingleObject,
        Task::TwoObject,
        Task::Counting,
        Task::Colors,
        Task::Position,
        Task::ColorAttr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::SingleObject => "single_object",
            Task::TwoObject => "two_object",
            Task::Counting => "counting",
            Task::Colors => "colors",
            Task::Position => "position",
            Task::ColorAttr => "color_attr",
        }
    }

    /// Column heading used in summary tables.
    pub fn title(self) -> &'static str {
        match self {
            Task::SingleObject => "Single object",
            Task::TwoObject => "Two object",
            Task::Counting => "Counting",
            Task::Colors => "Colors",
            Task::Position => "Position",
            Task::ColorAttr => "Attribute binding",
        }
    }

    pub fn index(self) -> usize {
        Task::ALL.iter().position(|t| *t == self).expect("task listed in ALL")
    }

    /// Number of object requirements a prompt of this task carries.
    pub fn arity(self) -> usize {
        match self {
            Task::SingleObject | Task::Counting | Task::Colors => 1,
            Task::TwoObject | Task::Position | Task::ColorAttr => 2,
        }
    }

    pub fn uses_color(self) -> bool {
        matches!(self, Task::Colors | Task::ColorAttr)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task tag {s:?}"))
    }
}

/// One object slot of a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRequirement {
    #[serde(rename = "class")]
    pub class_name: String,
    pub count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    /// Position of this object relative to the requirement at the given index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<(Relation, usize)>,
}

impl ObjectRequirement {
    pub fn new(class_name: impl Into<String>, count: u32) -> Self {
        ObjectRequirement {
            class_name: class_name.into(),
            count,
            color: None,
            position: None,
        }
    }

    pub fn with_color(mut self, color: impl Into<String>) -> Self {
        self.color = Some(color.into());
        self
    }

    pub fn with_position(mut self, relation: Relation, reference: usize) -> Self {
        self.position = Some((relation, reference));
        self
    }
}

/// One benchmark prompt with the metadata needed to verify it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub tag: Task,
    pub include: Vec<ObjectRequirement>,
    pub prompt: String,
    /// Assigned from the record's position in its suite; not serialized.
    #[serde(skip)]
    pub id: String,
}

impl PromptSpec {
    /// Build a spec whose prompt text is rendered from its slots.
    pub fn new(tag: Task, include: Vec<ObjectRequirement>) -> Result<Self, RenderError> {
        let prompt = render_prompt(tag, &include)?;
        Ok(PromptSpec {
            tag,
            include,
            prompt,
            id: String::new(),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// The requirement carrying a relation, with the relation and the index
    /// of the requirement it is relative to.
    pub fn relation(&self) -> Option<(usize, Relation, usize)> {
        self.include
            .iter()
            .enumerate()
            .find_map(|(i, r)| r.position.map(|(rel, reference)| (i, rel, reference)))
    }

    pub fn to_json_line(&self) -> Result<String, serde_json::Error> {
        jsonl::to_line(self)
    }
}

/// Stable identifier for the record at `index` in a suite.
pub fn prompt_id(index: usize) -> String {
    format!("{index:05}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("{task} prompts take {expected} object(s), got {found}")]
    Arity { task: Task, expected: usize, found: usize },
    #[error("missing {slot} slot")]
    MissingSlot { slot: &'static str },
    #[error("no number word for count {0}")]
    UnsupportedCount(u32),
}

/// "a" or "an" followed by the phrase; "an" iff the phrase starts with a vowel letter.
pub fn with_article(phrase: &str) -> String {
    let vowel = phrase
        .chars()
        .next()
        .map(|c| matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u'))
        .unwrap_or(false);
    if vowel {
        format!("an {phrase}")
    } else {
        format!("a {phrase}")
    }
}

pub fn number_word(count: u32) -> Option<&'static str> {
    match count {
        2 => Some("two"),
        3 => Some("three"),
        4 => Some("four"),
        _ => None,
    }
}

/// Render the prompt text for a task from its filled slots.
pub fn render_prompt(tag: Task, include: &[ObjectRequirement]) -> Result<String, RenderError> {
    if include.len() != tag.arity() {
        return Err(RenderError::Arity {
            task: tag,
            expected: tag.arity(),
            found: include.len(),
        });
    }
    let colored = |r: &ObjectRequirement| -> Result<String, RenderError> {
        let color = r.color.as_deref().ok_or(RenderError::MissingSlot { slot: "color" })?;
        Ok(with_article(&format!("{color} {}", r.class_name)))
    };
    let text = match tag {
        Task::SingleObject => format!("a photo of {}", with_article(&include[0].class_name)),
        Task::TwoObject => format!(
            "a photo of {} and {}",
            with_article(&include[0].class_name),
            with_article(&include[1].class_name)
        ),
        Task::Counting => {
            let word = number_word(include[0].count).ok_or(RenderError::UnsupportedCount(include[0].count))?;
            format!("a photo of {word} {}s", include[0].class_name)
        }
        Task::Colors => format!("a photo of {}", colored(&include[0])?),
        Task::Position => {
            let (subject, (relation, reference)) = include
                .iter()
                .find_map(|r| r.position.map(|p| (r, p)))
                .ok_or(RenderError::MissingSlot { slot: "position" })?;
            let reference = include.get(reference).ok_or(RenderError::MissingSlot {
                slot: "position reference",
            })?;
            format!(
                "a photo of {} {relation} {}",
                with_article(&subject.class_name),
                with_article(&reference.class_name)
            )
        }
        Task::ColorAttr => format!("a photo of {} and {}", colored(&include[0])?, colored(&include[1])?),
    };
    Ok(text)
}

/// A single broken invariant found by [`validate_spec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub requirement: Option<usize>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    RequirementCount { expected: usize, found: usize },
    DuplicateClass(String),
    UnknownClass(String),
    ExcludedClass(String),
    CountOutOfRange { count: u32, allowed: &'static str },
    MissingColor,
    UnexpectedColor,
    ColorNotInGenerationSet(String),
    DuplicateColor(String),
    MissingRelation,
    UnexpectedRelation,
    RelationCount(usize),
    BadRelationReference(usize),
    PromptMismatch { expected: String, found: String },
    Unrenderable(String),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::RequirementCount { expected, found } => {
                write!(f, "expected {expected} object requirement(s), found {found}")
            }
            ViolationKind::DuplicateClass(c) => write!(f, "class {c:?} appears twice; objects must differ"),
            ViolationKind::UnknownClass(c) => write!(f, "class {c:?} not in vocabulary"),
            ViolationKind::ExcludedClass(c) => write!(f, "class {c:?} is excluded from color tasks"),
            ViolationKind::CountOutOfRange { count, allowed } => write!(f, "count {count} not in {allowed}"),
            ViolationKind::MissingColor => f.write_str("color required"),
            ViolationKind::UnexpectedColor => f.write_str("color not allowed for this task"),
            ViolationKind::ColorNotInGenerationSet(c) => write!(f, "color not in generation set: {c:?}"),
            ViolationKind::DuplicateColor(c) => write!(f, "color {c:?} used twice; colors must differ"),
            ViolationKind::MissingRelation => f.write_str("relative position required"),
            ViolationKind::UnexpectedRelation => f.write_str("relative position not allowed for this task"),
            ViolationKind::RelationCount(n) => write!(f, "expected exactly one relative position, found {n}"),
            ViolationKind::BadRelationReference(i) => {
                write!(
                    f,
                    "relative position references requirement {i}, which is not another requirement"
                )
            }
            ViolationKind::PromptMismatch { expected, found } => {
                write!(
                    f,
                    "prompt text {found:?} does not match template rendering {expected:?}"
                )
            }
            ViolationKind::Unrenderable(msg) => write!(f, "cannot render prompt: {msg}"),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.requirement {
            Some(i) => write!(f, "include[{i}]: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Check every invariant of a spec against the vocabulary, returning all
/// violations found (empty when the spec is well formed).
pub fn validate_spec(spec: &PromptSpec, vocab: &Vocabulary) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |requirement: Option<usize>, kind| out.push(Violation { requirement, kind });
    let tag = spec.tag;

    if spec.include.len() != tag.arity() {
        push(
            None,
            ViolationKind::RequirementCount {
                expected: tag.arity(),
                found: spec.include.len(),
            },
        );
    }

    for (i, req) in spec.include.iter().enumerate() {
        if !vocab.contains_object(&req.class_name) {
            push(Some(i), ViolationKind::UnknownClass(req.class_name.clone()));
        }
        if tag.uses_color() && vocab.is_color_task_excluded(&req.class_name) {
            push(Some(i), ViolationKind::ExcludedClass(req.class_name.clone()));
        }
        match tag {
            Task::Counting if !(2..=4).contains(&req.count) => push(
                Some(i),
                ViolationKind::CountOutOfRange {
                    count: req.count,
                    allowed: "{2, 3, 4}",
                },
            ),
            Task::Counting => {}
            _ if req.count != 1 => push(
                Some(i),
                ViolationKind::CountOutOfRange {
                    count: req.count,
                    allowed: "{1}",
                },
            ),
            _ => {}
        }
        match (&req.color, tag.uses_color()) {
            (None, true) => push(Some(i), ViolationKind::MissingColor),
            (Some(_), false) => push(Some(i), ViolationKind::UnexpectedColor),
            (Some(c), true) if !vocab.is_generation_color(c) => {
                push(Some(i), ViolationKind::ColorNotInGenerationSet(c.clone()))
            }
            _ => {}
        }
        if let Some((_, reference)) = req.position {
            if tag != Task::Position {
                push(Some(i), ViolationKind::UnexpectedRelation);
            } else if reference == i || reference >= spec.include.len() {
                push(Some(i), ViolationKind::BadRelationReference(reference));
            }
        }
    }

    if tag.arity() == 2 && spec.include.len() == 2 && spec.include[0].class_name == spec.include[1].class_name {
        push(
            Some(1),
            ViolationKind::DuplicateClass(spec.include[1].class_name.clone()),
        );
    }
    if tag == Task::ColorAttr && spec.include.len() == 2 {
        if let (Some(a), Some(b)) = (&spec.include[0].color, &spec.include[1].color) {
            if a == b {
                push(Some(1), ViolationKind::DuplicateColor(b.clone()));
            }
        }
    }
    if tag == Task::Position {
        let relations = spec.include.iter().filter(|r| r.position.is_some()).count();
        match relations {
            0 => push(None, ViolationKind::MissingRelation),
            1 => {}
            n => push(None, ViolationKind::RelationCount(n)),
        }
    }

    match render_prompt(tag, &spec.include) {
        Ok(expected) if expected != spec.prompt => push(
            None,
            ViolationKind::PromptMismatch {
                expected,
                found: spec.prompt.clone(),
            },
        ),
        Ok(_) => {}
        // arity problems are already reported above
        Err(RenderError::Arity { .. }) => {}
        Err(e) => push(None, ViolationKind::Unrenderable(e.to_string())),
    }
    out
}

/// Provenance line written at the top of generated suites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteHeader {
    pub generator: String,
    pub seed: u64,
    pub draws_per_task: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderLine {
    suite_header: SuiteHeader,
}

/// A loaded or generated prompt suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suite {
    pub header: Option<SuiteHeader>,
    pub specs: Vec<PromptSpec>,
}

impl Suite {
    pub fn get(&self, id: &str) -> Option<&PromptSpec> {
        // ids are zero-padded positions, so try the direct index first
        id.parse::<usize>()
            .ok()
            .and_then(|i| self.specs.get(i))
            .filter(|s| s.id == id)
            .or_else(|| self.specs.iter().find(|s| s.id == id))
    }

    pub fn count_by_task(&self) -> [usize; 6] {
        let mut counts = [0; 6];
        for spec in &self.specs {
            counts[spec.tag.index()] += 1;
        }
        counts
    }

    /// Serialize as line-delimited metadata records, header first.
    pub fn to_jsonl(&self) -> Result<String, serde_json::Error> {
        let mut out = String::new();
        if let Some(header) = &self.header {
            out.push_str(&jsonl::to_line(&HeaderLine {
                suite_header: header.clone(),
            })?);
            out.push('\n');
        }
        out.push_str(&jsonl::to_lines(&self.specs)?);
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        let text = self.to_jsonl()?;
        jsonl::write_atomic(path, text.as_bytes()).map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Generate the six-task suite: for each task, draw [`DRAWS_PER_TASK`]
/// uniform candidates from an independent ChaCha8 stream derived from the
/// seed, then drop repeated metadata keeping first occurrences.
///
/// Vocabulary problems surface as [`crate::vocab::ConfigError`] when the
/// [`Vocabulary`] is built, so generation itself cannot fail.
pub fn generate_suite(seed: u64, vocab: &Vocabulary) -> Suite {
    let all: Vec<&str> = vocab.object_names().iter().map(String::as_str).collect();
    let color_objects = vocab.color_task_objects();
    let colors: Vec<&str> = vocab.generation_colors().iter().map(String::as_str).collect();

    let mut specs = Vec::new();
    for task in Task::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(task.index() as u64);
        let mut seen = HashSet::new();
        for _ in 0..DRAWS_PER_TASK {
            let include = draw(task, &mut rng, &all, &color_objects, &colors);
            if seen.insert(include.clone()) {
                let spec = PromptSpec::new(task, include).expect("generated slots always render");
                specs.push(spec);
            }
        }
    }
    for (i, spec) in specs.iter_mut().enumerate() {
        spec.id = prompt_id(i);
    }
    Suite {
        header: Some(SuiteHeader {
            generator: GENERATOR_ID.to_string(),
            seed,
            draws_per_task: DRAWS_PER_TASK,
        }),
        specs,
    }
}

// Indices are drawn as u32 so the sequence does not depend on the platform's
// pointer width.
fn pick(rng: &mut ChaCha8Rng, len: usize) -> usize {
    rng.gen_range(0..len as u32) as usize
}

fn pick_two(rng: &mut ChaCha8Rng, len: usize) -> (usize, usize) {
    let a = pick(rng, len);
    let mut b = pick(rng, len - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

fn draw(
    task: Task,
    rng: &mut ChaCha8Rng,
    all: &[&str],
    color_objects: &[&str],
    colors: &[&str],
) -> Vec<ObjectRequirement> {
    match task {
        Task::SingleObject => vec![ObjectRequirement::new(all[pick(rng, all.len())], 1)],
        Task::TwoObject => {
            let (a, b) = pick_two(rng, all.len());
            vec![ObjectRequirement::new(all[a], 1), ObjectRequirement::new(all[b], 1)]
        }
        Task::Counting => {
            let object = all[pick(rng, all.len())];
            let count = 2 + pick(rng, 3) as u32;
            vec![ObjectRequirement::new(object, count)]
        }
        Task::Colors => {
            let object = color_objects[pick(rng, color_objects.len())];
            let color = colors[pick(rng, colors.len())];
            vec![ObjectRequirement::new(object, 1).with_color(color)]
        }
        Task::Position => {
            let (subject, reference) = pick_two(rng, all.len());
            let relation = Relation::ALL[pick(rng, Relation::ALL.len())];
            vec![
                ObjectRequirement::new(all[reference], 1),
                ObjectRequirement::new(all[subject], 1).with_position(relation, 0),
            ]
        }
        Task::ColorAttr => {
            let (a, b) = pick_two(rng, color_objects.len());
            let (ca, cb) = pick_two(rng, colors.len());
            vec![
                ObjectRequirement::new(color_objects[a], 1).with_color(colors[ca]),
                ObjectRequirement::new(color_objects[b], 1).with_color(colors[cb]),
            ]
        }
    }
}

/// Parse line-delimited metadata. An optional `suite_header` record may
/// occupy the first line; ids are assigned by record order.
pub fn parse_suite(reader: impl BufRead, vocab: &Vocabulary) -> Result<Suite, FormatError> {
    let lines = jsonl::read_lines(reader)?;
    let mut header = None;
    let mut specs = Vec::with_capacity(lines.len());
    for (pos, (line_no, line)) in lines.iter().enumerate() {
        let value: serde_json::Value = jsonl::parse_line(*line_no, line)?;
        if value.get("suite_header").is_some() {
            if pos != 0 {
                return Err(FormatError::Invalid {
                    line: *line_no,
                    message: "suite_header is only allowed on the first line".into(),
                });
            }
            let parsed: HeaderLine = jsonl::parse_line(*line_no, line)?;
            header = Some(parsed.suite_header);
            continue;
        }
        if !value.is_object() {
            return Err(FormatError::Parse {
                line: *line_no,
                message: "record must be a JSON object".into(),
            });
        }
        for field in ["tag", "include", "prompt"] {
            if value.get(field).is_none() {
                return Err(FormatError::Parse {
                    line: *line_no,
                    message: format!("missing required field \"{field}\""),
                });
            }
        }
        let mut spec: PromptSpec = serde_json::from_value(value).map_err(|e| FormatError::Parse {
            line: *line_no,
            message: e.to_string(),
        })?;
        spec.id = prompt_id(specs.len());
        let violations = validate_spec(&spec, vocab);
        if !violations.is_empty() {
            let joined: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(FormatError::Invalid {
                line: *line_no,
                message: joined.join("; "),
            });
        }
        specs.push(spec);
    }
    Ok(Suite { header, specs })
}

pub fn load_suite(path: &Path, vocab: &Vocabulary) -> Result<Suite, FormatError> {
    parse_suite(jsonl::open(path)?, vocab)
}

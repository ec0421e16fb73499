use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Gaze class: 0 = right, 1 = left, 2 = undetermined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Label(u8);

impl Label {
    pub const RIGHT: Label = Label(0);
    pub const LEFT: Label = Label(1);
    pub const UNDETERMINED: Label = Label(2);
    pub const ALL: [Label; 3] = [Label::RIGHT, Label::LEFT, Label::UNDETERMINED];

    pub fn new(v: u8) -> Result<Self, DatasetError> {
        if v <= 2 {
            Ok(Label(v))
        } else {
            Err(DatasetError::Argument(format!("class {v} is not one of 0, 1, 2")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Label {
    type Error = DatasetError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Label::new(v)
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Adult,
    Child,
    Synthetic,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Adult => "adult",
            Source::Child => "child",
            Source::Synthetic => "synthetic",
        }
    }
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adult" => Ok(Source::Adult),
            "child" => Ok(Source::Child),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub image_path: String,
    pub label: Label,
    pub person_id: String,
    pub source: Source,
    /// Path of the original sample this one was augmented from.
    pub augmented_from: Option<String>,
}

/// Header key naming the manifest.
pub const NAME_KEY: &str = "name";

fn scene_key(class: u8) -> String {
    format!("class.{class}")
}

/// Ordered samples plus `key=value` header metadata.
///
/// The header must map classes 0 and 1 to scene descriptions (`class.0`,
/// `class.1`); which side shows which scene is a property of the recording,
/// not of the code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    header: BTreeMap<String, String>,
    samples: Vec<Sample>,
}

impl Manifest {
    pub fn new(header: BTreeMap<String, String>, samples: Vec<Sample>) -> Result<Self, DatasetError> {
        for c in [0u8, 1] {
            if !header.contains_key(&scene_key(c)) {
                return Err(DatasetError::Argument(format!("header is missing the {} scene entry", scene_key(c))));
            }
        }
        for (k, v) in &header {
            if k.is_empty() || k.contains(['=', '\n', '\t']) || v.contains('\n') {
                return Err(DatasetError::Argument(format!("bad header entry {k:?}")));
            }
        }
        let mut seen = HashSet::new();
        for s in &samples {
            validate_sample(s).map_err(DatasetError::Argument)?;
            if !seen.insert(s.image_path.as_str()) {
                return Err(DatasetError::Argument(format!("duplicate image path {:?}", s.image_path)));
            }
        }
        Ok(Manifest { header, samples })
    }

    /// Empty manifest with the given name and class-to-scene descriptions.
    pub fn with_scenes(name: &str, class0: &str, class1: &str) -> Self {
        let mut header = BTreeMap::new();
        header.insert(NAME_KEY.to_string(), name.to_string());
        header.insert(scene_key(0), class0.to_string());
        header.insert(scene_key(1), class1.to_string());
        Manifest::new(header, Vec::new()).expect("scene entries present")
    }

    pub fn header(&self) -> &BTreeMap<String, String> {
        &self.header
    }

    pub fn name(&self) -> Option<&str> {
        self.header.get(NAME_KEY).map(String::as_str)
    }

    pub fn scene(&self, class: Label) -> Option<&str> {
        self.header.get(&scene_key(class.value())).map(String::as_str)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same header, different samples (validated).
    pub fn with_samples(&self, samples: Vec<Sample>) -> Result<Self, DatasetError> {
        Manifest::new(self.header.clone(), samples)
    }

    pub fn push(&mut self, s: Sample) -> Result<(), DatasetError> {
        validate_sample(&s).map_err(DatasetError::Argument)?;
        if self.samples.iter().any(|o| o.image_path == s.image_path) {
            return Err(DatasetError::Argument(format!("duplicate image path {:?}", s.image_path)));
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in &self.samples {
            c[s.label.index()] += 1;
        }
        c
    }

    /// Distinct persons in first-appearance order.
    pub fn persons(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.samples
            .iter()
            .map(|s| s.person_id.as_str())
            .filter(|p| seen.insert(*p))
            .collect()
    }
}

fn validate_sample(s: &Sample) -> Result<(), String> {
    let bad = |f: &str| f.is_empty() || f.contains(['\t', '\n', '\r']) || f.starts_with('#');
    if bad(&s.image_path) {
        return Err(format!("bad image path {:?}", s.image_path));
    }
    if s.person_id.is_empty() || s.person_id.contains(['\t', '\n', '\r']) {
        return Err(format!("bad person id {:?}", s.person_id));
    }
    if let Some(a) = &s.augmented_from {
        if a.is_empty() || a.contains(['\t', '\n', '\r']) {
            return Err(format!("bad augmented_from {a:?}"));
        }
    }
    Ok(())
}

/// Parse the tab-separated manifest format:
/// `#key=value` header lines, then `path<TAB>label<TAB>person<TAB>source[<TAB>augmented_from]` rows.
pub fn load_manifest(text: &str) -> Result<Manifest, DatasetError> {
    let mut header = BTreeMap::new();
    let mut samples = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| DatasetError::Parse { line: line_no, msg };
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            // `#key=value` is metadata; any other comment is ignored
            if let Some((k, v)) = h.split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 && cols.len() != 5 {
            return Err(err(format!("expected 4 or 5 tab-separated columns, found {}", cols.len())));
        }
        let label = cols[1]
            .parse::<u8>()
            .ok()
            .and_then(|v| Label::new(v).ok())
            .ok_or_else(|| err(format!("bad label {:?}", cols[1])))?;
        if cols[2].is_empty() {
            return Err(err("empty person id".into()));
        }
        let source = cols[3].parse::<Source>().map_err(err)?;
        let augmented_from = match cols.get(4) {
            Some(a) if !a.is_empty() => Some(a.to_string()),
            _ => None,
        };
        if cols[0].is_empty() {
            return Err(err("empty image path".into()));
        }
        if !seen.insert(cols[0].to_string()) {
            return Err(err(format!("duplicate image path {:?}", cols[0])));
        }
        samples.push(Sample {
            image_path: cols[0].to_string(),
            label,
            person_id: cols[2].to_string(),
            source,
            augmented_from,
        });
    }
    Manifest::new(header, samples).map_err(|e| DatasetError::Parse { line: 0, msg: e.to_string() })
}

/// Inverse of [`load_manifest`]; header keys are written in sorted order.
pub fn save_manifest(m: &Manifest) -> String {
    let mut out = String::new();
    for (k, v) in &m.header {
        out.push_str(&format!("#{k}={v}\n"));
    }
    for s in &m.samples {
        out.push_str(&format!("{}\t{}\t{}\t{}", s.image_path, s.label, s.person_id, s.source.as_str()));
        if let Some(a) = &s.augmented_from {
            out.push('\t');
            out.push_str(a);
        }
        out.push('\n');
    }
    out
}

/// Keep samples whose label is in `keep`, in order. An empty result comes
/// back with a warning message rather than an error.
pub fn filter_classes(m: &Manifest, keep: &[Label]) -> (Manifest, Option<String>) {
    let samples: Vec<Sample> = m.samples.iter().filter(|s| keep.contains(&s.label)).cloned().collect();
    let warning = samples
        .is_empty()
        .then(|| format!("class filter {keep:?} left no samples"));
    let filtered = Manifest {
        header: m.header.clone(),
        samples,
    };
    (filtered, warning)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "#class.0=social\n#class.1=abstract\n#name=demo\n";

    #[test]
    fn empty_body() {
        let m = load_manifest(HEADER).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.name(), Some("demo"));
        assert_eq!(m.scene(Label::LEFT), Some("abstract"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = format!("{HEADER}a.pgm\t0\tp1\tadult\nb.pgm\t3\tp1\tadult\n");
        match load_manifest(&text) {
            Err(DatasetError::Parse { line, msg }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("label"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        let dup = format!("{HEADER}a.pgm\t0\tp1\tadult\na.pgm\t1\tp2\tchild\n");
        assert!(matches!(load_manifest(&dup), Err(DatasetError::Parse { line: 5, .. })));
        let empty_person = format!("{HEADER}a.pgm\t0\t\tadult\n");
        assert!(matches!(load_manifest(&empty_person), Err(DatasetError::Parse { line: 4, .. })));
        let bad_source = format!("{HEADER}a.pgm\t0\tp\tmartian\n");
        assert!(matches!(load_manifest(&bad_source), Err(DatasetError::Parse { line: 4, .. })));
        assert!(load_manifest("#name=x\n").is_err(), "scene map required");
    }

    #[test]
    fn filter_examples() {
        let text = format!("{HEADER}a.pgm\t0\tp1\tadult\nb.pgm\t2\tp1\tadult\nc.pgm\t1\tp2\tchild\n");
        let m = load_manifest(&text).unwrap();
        let (all, w) = filter_classes(&m, &Label::ALL);
        assert_eq!(all, m);
        assert!(w.is_none());
        let (two, _) = filter_classes(&m, &[Label::RIGHT, Label::LEFT]);
        assert_eq!(two.samples().iter().map(|s| s.image_path.as_str()).collect::<Vec<_>>(), ["a.pgm", "c.pgm"]);
        let (none, w) = filter_classes(&m, &[]);
        assert!(none.is_empty() && w.is_some());
    }

    fn arb_manifest() -> impl Strategy<Value = Manifest> {
        let sample = (0u8..3, "[a-z]{1,6}", 0usize..3, proptest::option::of("[a-z0-9_.]{1,8}"));
        proptest::collection::vec(sample, 0..30).prop_map(|rows| {
            let mut m = Manifest::with_scenes("rt", "right scene", "left scene");
            for (i, (label, person, src, aug)) in rows.into_iter().enumerate() {
                m.push(Sample {
                    image_path: format!("img_{i}.pgm"),
                    label: Label::new(label).unwrap(),
                    person_id: person,
                    source: [Source::Adult, Source::Child, Source::Synthetic][src],
                    augmented_from: aug,
                })
                .unwrap();
            }
            m
        })
    }

    proptest! {
        #[test]
        fn save_load_round_trip(m in arb_manifest()) {
            let text = save_manifest(&m);
            let back = load_manifest(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(save_manifest(&back), text);
        }
    }
}

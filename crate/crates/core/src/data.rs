//! Dataset manifests, label scales and speaker filtering.
//!
//! A manifest is a small CSV file:
//!
//! ```text
//! #scale=seven-point
//! sample_id,audio_path,speaker_id,sex,arousal,dominance,valence
//! s001,audio/s001.wav,spk1,f,4,3.5,5
//! ```
//!
//! An optional `#split=<train|dev|test>` comment may follow the scale line.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header row of the manifest format.
pub const MANIFEST_HEADER: &str = "sample_id,audio_path,speaker_id,sex,arousal,dominance,valence";

/// Rating scale of the raw annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelScale {
    /// 1 to 7 (MSP-Podcast style).
    SevenPoint,
    /// 1 to 5 (IEMOCAP style).
    FivePoint,
    /// -3 to 3 (sentiment).
    SentimentSeven,
}

impl LabelScale {
    pub const ALL: [LabelScale; 3] = [
        LabelScale::SevenPoint,
        LabelScale::FivePoint,
        LabelScale::SentimentSeven,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LabelScale::SevenPoint => "seven-point",
            LabelScale::FivePoint => "five-point",
            LabelScale::SentimentSeven => "sentiment-seven",
        }
    }

    pub fn low(self) -> f64 {
        match self {
            LabelScale::SevenPoint | LabelScale::FivePoint => 1.0,
            LabelScale::SentimentSeven => -3.0,
        }
    }

    pub fn high(self) -> f64 {
        match self {
            LabelScale::SevenPoint => 7.0,
            LabelScale::FivePoint => 5.0,
            LabelScale::SentimentSeven => 3.0,
        }
    }

    pub fn contains(self, raw: f64) -> bool {
        raw >= self.low() && raw <= self.high()
    }

    /// Inverse of [`normalize_label`].
    pub fn denormalize(self, unit: f64) -> f64 {
        self.low() + unit * (self.high() - self.low())
    }
}

impl fmt::Display for LabelScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LabelScale::ALL
            .into_iter()
            .find(|scale| scale.name() == s)
            .ok_or_else(|| format!("unknown label scale `{s}`"))
    }
}

/// Maps a raw rating onto `[0, 1]`.
pub fn normalize_label(raw: f64, scale: LabelScale) -> Result<f64> {
    if !scale.contains(raw) {
        return Err(Error::LabelRange {
            scale: scale.name(),
            value: raw,
            low: scale.low(),
            high: scale.high(),
        });
    }
    Ok((raw - scale.low()) / (scale.high() - scale.low()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
    Unknown,
}

impl Sex {
    pub fn code(self) -> &'static str {
        match self {
            Sex::Female => "f",
            Sex::Male => "m",
            Sex::Unknown => "u",
        }
    }

    fn from_code(code: &str) -> Option<Sex> {
        match code {
            "f" => Some(Sex::Female),
            "m" => Some(Sex::Male),
            "u" => Some(Sex::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One of the three emotion dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Arousal,
    Dominance,
    Valence,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Arousal, Dimension::Dominance, Dimension::Valence];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Arousal => "arousal",
            Dimension::Dominance => "dominance",
            Dimension::Valence => "valence",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Arousal, dominance and valence on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionTriple {
    pub arousal: f64,
    pub dominance: f64,
    pub valence: f64,
}

impl DimensionTriple {
    /// Checked constructor; every component must lie in `[0, 1]`.
    pub fn new(arousal: f64, dominance: f64, valence: f64) -> Result<Self> {
        let triple = Self {
            arousal,
            dominance,
            valence,
        };
        for d in Dimension::ALL {
            let v = triple.get(d);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Degenerate(format!(
                    "{} value {v} is not in [0, 1]",
                    d.name()
                )));
            }
        }
        Ok(triple)
    }

    /// Clamps each component into `[0, 1]`. NaN maps to 0.
    pub fn clamped(arousal: f64, dominance: f64, valence: f64) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        Self {
            arousal: c(arousal),
            dominance: c(dominance),
            valence: c(valence),
        }
    }

    pub fn from_array(values: [f64; 3]) -> Self {
        Self {
            arousal: values[0],
            dominance: values[1],
            valence: values[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.arousal, self.dominance, self.valence]
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Arousal => self.arousal,
            Dimension::Dominance => self.dominance,
            Dimension::Valence => self.valence,
        }
    }
}

/// One value per emotion dimension.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerDimension<T> {
    pub arousal: T,
    pub dominance: T,
    pub valence: T,
}

impl<T> PerDimension<T> {
    pub fn from_fn(mut f: impl FnMut(Dimension) -> T) -> Self {
        Self {
            arousal: f(Dimension::Arousal),
            dominance: f(Dimension::Dominance),
            valence: f(Dimension::Valence),
        }
    }

    pub fn get(&self, dim: Dimension) -> &T {
        match dim {
            Dimension::Arousal => &self.arousal,
            Dimension::Dominance => &self.dominance,
            Dimension::Valence => &self.valence,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerDimension<U> {
        PerDimension {
            arousal: f(&self.arousal),
            dominance: f(&self.dominance),
            valence: f(&self.valence),
        }
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(Dimension) -> Result<T, E>) -> Result<Self, E> {
        Ok(Self {
            arousal: f(Dimension::Arousal)?,
            dominance: f(Dimension::Dominance)?,
            valence: f(Dimension::Valence)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub audio_path: String,
    pub speaker_id: String,
    pub sex: Sex,
    /// Arousal, dominance, valence on the manifest's scale.
    pub raw_labels: [f64; 3],
    pub duration_s: Option<f64>,
}

impl SampleRecord {
    pub fn labels(&self, scale: LabelScale) -> Result<DimensionTriple> {
        let [a, d, v] = self.raw_labels;
        Ok(DimensionTriple {
            arousal: normalize_label(a, scale)?,
            dominance: normalize_label(d, scale)?,
            valence: normalize_label(v, scale)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub scale: LabelScale,
    pub split: Option<Split>,
    pub records: Vec<SampleRecord>,
    /// Directory relative audio paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    /// Builds a manifest, enforcing non-emptiness, label ranges and unique ids.
    pub fn new(scale: LabelScale, split: Option<Split>, records: Vec<SampleRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptySelection("manifest has no records".into()));
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, rec) in records.iter().enumerate() {
            if let Some(first) = seen.insert(&rec.sample_id, i) {
                return Err(Error::DuplicateSample {
                    sample_id: rec.sample_id.clone(),
                    first_line: first + 1,
                    line: i + 1,
                });
            }
            rec.labels(scale)?;
        }
        Ok(Self {
            scale,
            split,
            records,
            base_dir: PathBuf::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Normalized labels in record order.
    pub fn labels(&self) -> Vec<DimensionTriple> {
        self.records
            .iter()
            .map(|r| r.labels(self.scale).expect("labels validated at construction"))
            .collect()
    }

    pub fn audio_path(&self, record: &SampleRecord) -> PathBuf {
        let p = Path::new(&record.audio_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Sample counts per speaker, sorted by speaker id.
    pub fn speaker_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for rec in &self.records {
            *counts.entry(rec.speaker_id.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Serializes in the manifest format.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "#scale={}", self.scale)?;
        if let Some(split) = self.split {
            writeln!(out, "#split={}", split.name())?;
        }
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        writer.write_record(MANIFEST_HEADER.split(','))?;
        for rec in &self.records {
            let [a, d, v] = rec.raw_labels;
            writer.write_record([
                rec.sample_id.as_str(),
                rec.audio_path.as_str(),
                rec.speaker_id.as_str(),
                rec.sex.code(),
                &a.to_string(),
                &d.to_string(),
                &v.to_string(),
            ])?;
        }
        writer.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Reads a manifest file. Relative audio paths resolve against its directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = parse_manifest(&text, path)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest)
}

/// Parses manifest text; `origin` is used for error messages only.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<DatasetManifest> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (line_no, first) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let scale = first
        .trim()
        .strip_prefix("#scale=")
        .ok_or_else(|| parse_err(line_no, "expected `#scale=<name>` comment line".into()))?
        .trim()
        .parse::<LabelScale>()
        .map_err(|m| parse_err(line_no, m))?;

    let mut split = None;
    let mut body_start = 1;
    let mut header = None;
    for (line_no, line) in lines.by_ref() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix("#split=") {
            split = Some(name.trim().parse::<Split>().map_err(|m| parse_err(line_no, m))?);
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        header = Some((line_no, trimmed));
        body_start = line_no;
        break;
    }
    let (header_line, header) =
        header.ok_or_else(|| parse_err(body_start, "missing header row".into()))?;
    if header != MANIFEST_HEADER {
        return Err(parse_err(
            header_line,
            format!("header must be `{MANIFEST_HEADER}`, found `{header}`"),
        ));
    }

    let body: String = text
        .lines()
        .skip(header_line)
        .collect::<Vec<_>>()
        .join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());

    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(header_line + 1, |p| header_line + p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = header_line + row.position().map_or(1, |p| p.line() as usize);
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != 7 {
            return Err(parse_err(line, format!("expected 7 fields, found {}", row.len())));
        }
        let sample_id = row[0].to_string();
        if sample_id.is_empty() {
            return Err(parse_err(line, "empty sample_id".into()));
        }
        let sex = Sex::from_code(&row[3])
            .ok_or_else(|| parse_err(line, format!("sex must be f, m or u, found `{}`", &row[3])))?;
        let mut raw_labels = [0.0; 3];
        for (k, dim) in Dimension::ALL.iter().enumerate() {
            let field = &row[4 + k];
            let value: f64 = field.parse().map_err(|_| {
                parse_err(line, format!("{} is not a number: `{field}`", dim.name()))
            })?;
            if !scale.contains(value) {
                return Err(Error::ScaleViolation {
                    path: origin.to_path_buf(),
                    line,
                    sample_id,
                    message: format!(
                        "{} label {value} outside the {scale} range [{}, {}]",
                        dim.name(),
                        scale.low(),
                        scale.high()
                    ),
                });
            }
            raw_labels[k] = value;
        }
        if let Some(&first_line) = seen.get(&sample_id) {
            return Err(Error::DuplicateSample {
                sample_id,
                first_line,
                line,
            });
        }
        seen.insert(sample_id.clone(), line);
        records.push(SampleRecord {
            sample_id,
            audio_path: row[1].to_string(),
            speaker_id: row[2].to_string(),
            sex,
            raw_labels,
            duration_s: None,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptySelection(format!(
            "{} has no records",
            origin.display()
        )));
    }
    Ok(DatasetManifest {
        scale,
        split,
        records,
        base_dir: PathBuf::new(),
    })
}

/// Keeps the records of speakers with strictly more than `min_n` samples.
pub fn filter_speakers_min_samples(
    manifest: &DatasetManifest,
    min_n: usize,
) -> Result<DatasetManifest> {
    let counts = manifest.speaker_counts();
    let records: Vec<SampleRecord> = manifest
        .records
        .iter()
        .filter(|r| counts[r.speaker_id.as_str()] > min_n)
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no speaker has more than {min_n} samples"
        )));
    }
    Ok(DatasetManifest {
        records,
        ..manifest.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, speaker: &str, labels: [f64; 3]) -> SampleRecord {
        SampleRecord {
            sample_id: id.into(),
            audio_path: format!("{id}.wav"),
            speaker_id: speaker.into(),
            sex: Sex::Female,
            raw_labels: labels,
            duration_s: None,
        }
    }

    fn census(counts: &[(&str, usize)]) -> DatasetManifest {
        let mut records = Vec::new();
        for (speaker, n) in counts {
            for i in 0..*n {
                records.push(record(&format!("{speaker}-{i}"), speaker, [4.0; 3]));
            }
        }
        DatasetManifest::new(LabelScale::SevenPoint, None, records).unwrap()
    }

    #[test]
    fn normalize_endpoints_and_midpoints() {
        assert_eq!(normalize_label(1.0, LabelScale::SevenPoint).unwrap(), 0.0);
        assert_eq!(normalize_label(7.0, LabelScale::SevenPoint).unwrap(), 1.0);
        assert_eq!(normalize_label(4.0, LabelScale::SevenPoint).unwrap(), 0.5);
        assert_eq!(normalize_label(-3.0, LabelScale::SentimentSeven).unwrap(), 0.0);
        assert_eq!(normalize_label(0.0, LabelScale::SentimentSeven).unwrap(), 0.5);
        assert_eq!(normalize_label(5.0, LabelScale::FivePoint).unwrap(), 1.0);
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        let err = normalize_label(8.0, LabelScale::SevenPoint).unwrap_err();
        assert!(err.to_string().contains("seven-point"), "{err}");
        assert!(normalize_label(0.99, LabelScale::FivePoint).is_err());
    }

    #[test]
    fn parse_preserves_order() {
        let text = "#scale=seven-point\n\
                    sample_id,audio_path,speaker_id,sex,arousal,dominance,valence\n\
                    c,c.wav,s1,f,1,2,3\n\
                    a,a.wav,s2,m,4,5,6\n\
                    b,b.wav,s1,u,7,7,7\n";
        let m = parse_manifest(text, Path::new("m.csv")).unwrap();
        let ids: Vec<_> = m.records.iter().map(|r| r.sample_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert_eq!(m.records[1].sex, Sex::Male);
        assert_eq!(m.records[2].raw_labels, [7.0; 3]);
        assert_eq!(m.scale, LabelScale::SevenPoint);
        assert_eq!(m.split, None);
    }

    #[test]
    fn parse_reports_scale_violation_with_row() {
        let text = "#scale=seven-point\n\
                    sample_id,audio_path,speaker_id,sex,arousal,dominance,valence\n\
                    ok,a.wav,s1,f,1,2,3\n\
                    bad,b.wav,s1,f,8,2,3\n";
        match parse_manifest(text, Path::new("m.csv")).unwrap_err() {
            Error::ScaleViolation {
                sample_id, line, ..
            } => {
                assert_eq!(sample_id, "bad");
                assert_eq!(line, 4);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn parse_rejects_duplicates() {
        let text = "#scale=five-point\n\
                    sample_id,audio_path,speaker_id,sex,arousal,dominance,valence\n\
                    x,a.wav,s1,f,1,2,3\n\
                    x,b.wav,s1,f,1,2,3\n";
        assert!(matches!(
            parse_manifest(text, Path::new("m.csv")),
            Err(Error::DuplicateSample { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "#scale=five-point\n\
                    sample_id,audio_path,speaker_id,sex,arousal,dominance,valence\n\
                    x,a.wav,s1,q,1,2,3\n";
        match parse_manifest(text, Path::new("m.csv")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let missing_scale = "sample_id,audio_path,speaker_id,sex,arousal,dominance,valence\n";
        assert!(matches!(
            parse_manifest(missing_scale, Path::new("m.csv")),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn split_comment_round_trips() {
        let text = "#scale=sentiment-seven\n#split=dev\n\
                    sample_id,audio_path,speaker_id,sex,arousal,dominance,valence\n\
                    x,a.wav,s1,f,-3,0,2.5\n";
        let m = parse_manifest(text, Path::new("m.csv")).unwrap();
        assert_eq!(m.split, Some(Split::Dev));
        let mut out = Vec::new();
        m.write_to(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn filter_is_strict() {
        let m = census(&[("A", 250), ("B", 150)]);
        let f = filter_speakers_min_samples(&m, 200).unwrap();
        assert_eq!(f.len(), 250);
        assert!(f.records.iter().all(|r| r.speaker_id == "A"));

        let m = census(&[("A", 200)]);
        assert!(matches!(
            filter_speakers_min_samples(&m, 200),
            Err(Error::EmptySelection(_))
        ));
        let m = census(&[("A", 201)]);
        assert_eq!(filter_speakers_min_samples(&m, 200).unwrap().len(), 201);
    }

    #[test]
    fn filter_zero_is_identity() {
        let m = census(&[("A", 3), ("B", 1)]);
        assert_eq!(filter_speakers_min_samples(&m, 0).unwrap(), m);
    }

    #[test]
    fn toy_census_matches_more_than_semantics() {
        // 60 speakers with counts 41..=912 spread; strict filter counts those above 200.
        let counts: Vec<(String, usize)> = (0..60)
            .map(|i| (format!("spk{i:02}"), 41 + (i * 871) / 59))
            .collect();
        let borrowed: Vec<(&str, usize)> = counts.iter().map(|(s, n)| (s.as_str(), *n)).collect();
        let m = census(&borrowed);
        let f = filter_speakers_min_samples(&m, 200).unwrap();
        let expected = counts.iter().filter(|(_, n)| *n > 200).count();
        assert_eq!(f.speaker_counts().len(), expected);
        let total: usize = f.speaker_counts().values().sum();
        assert_eq!(total, f.len());
    }
}

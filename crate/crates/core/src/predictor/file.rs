//! Prediction files: `sample_id,variant,arousal,dominance,valence`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::data::DimensionTriple;
use crate::error::{Error, Result};

pub const PREDICTION_HEADER: &str = "sample_id,variant,arousal,dominance,valence";

/// Variant name of unperturbed audio.
pub const CLEAN: &str = "clean";

/// Predictions keyed by `(sample_id, variant)`, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    rows: Vec<(String, String, DimensionTriple)>,
    index: BTreeMap<(String, String), usize>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a row; `(sample_id, variant)` must be new.
    pub fn insert(&mut self, sample_id: &str, variant: &str, values: DimensionTriple) -> Result<()> {
        let key = (sample_id.to_string(), variant.to_string());
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateSample {
                sample_id: format!("{sample_id}/{variant}"),
                first_line: self.index[&key] + 1,
                line: self.rows.len() + 1,
            });
        }
        self.index.insert(key, self.rows.len());
        self.rows.push((sample_id.to_string(), variant.to_string(), values));
        Ok(())
    }

    pub fn get(&self, sample_id: &str, variant: &str) -> Option<DimensionTriple> {
        self.index
            .get(&(sample_id.to_string(), variant.to_string()))
            .map(|&i| self.rows[i].2)
    }

    pub fn lookup(&self, sample_id: &str, variant: &str) -> Result<DimensionTriple> {
        self.get(sample_id, variant)
            .ok_or_else(|| Error::MissingPrediction {
                sample_id: sample_id.to_string(),
                variant: variant.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, DimensionTriple)> {
        self.rows.iter().map(|(s, v, t)| (s.as_str(), v.as_str(), *t))
    }

    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(PREDICTION_HEADER.split(','))?;
        for (sample_id, variant, t) in &self.rows {
            w.write_record([
                sample_id.as_str(),
                variant.as_str(),
                &t.arousal.to_string(),
                &t.dominance.to_string(),
                &t.valence.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

pub fn load_predictions(path: &Path) -> Result<PredictionSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, path)
}

pub fn parse_predictions(text: &str, origin: &Path) -> Result<PredictionSet> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut set = PredictionSet::new();
    let mut saw_header = false;
    for row in reader.records() {
        let row = row.map_err(|e| {
            parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if !saw_header {
            let header: Vec<&str> = row.iter().collect();
            if header.join(",") != PREDICTION_HEADER {
                return Err(parse_err(line, format!("header must be `{PREDICTION_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, found {}", row.len())));
        }
        let mut values = [0.0; 3];
        for k in 0..3 {
            let v: f64 = row[2 + k]
                .parse()
                .map_err(|_| parse_err(line, format!("not a number: `{}`", &row[2 + k])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(parse_err(line, format!("value {v} outside [0, 1]")));
            }
            values[k] = v;
        }
        set.insert(&row[0], &row[1], DimensionTriple::from_array(values))
            .map_err(|_| parse_err(line, format!("duplicate row for {} / {}", &row[0], &row[1])))?;
    }
    if !saw_header {
        return Err(parse_err(1, "empty prediction file".into()));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let text = "sample_id,variant,arousal,dominance,valence\n\
                    a,clean,0.1,0.2,0.3\n\
                    a,gain,0.15,0.2,0.3\n";
        let set = parse_predictions(text, Path::new("p.csv")).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.lookup("a", "gain").unwrap().arousal, 0.15);
        assert!(matches!(
            set.lookup("b", "clean"),
            Err(Error::MissingPrediction { .. })
        ));
        let mut out = Vec::new();
        set.write_to(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn rejects_bad_rows() {
        let dup = "sample_id,variant,arousal,dominance,valence\na,clean,0,0,0\na,clean,1,1,1\n";
        assert!(matches!(parse_predictions(dup, Path::new("p")), Err(Error::Parse { line: 3, .. })));
        let range = "sample_id,variant,arousal,dominance,valence\na,clean,1.2,0,0\n";
        assert!(parse_predictions(range, Path::new("p")).is_err());
        let header = "id,variant,arousal,dominance,valence\n";
        assert!(parse_predictions(header, Path::new("p")).is_err());
    }
}

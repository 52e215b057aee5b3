use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Result of evaluating one metric on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    #[serde(with = "score_serde")]
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_score_serde")]
    pub raw_sum: Option<f64>,
    pub config: serde_json::Value,
    pub dataset_size: usize,
    pub notes: Vec<String>,
}

impl MetricReport {
    pub fn new(metric: &str, score: f64, config: impl Serialize, dataset_size: usize) -> Self {
        Self {
            metric: metric.to_string(),
            score,
            raw_sum: None,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            dataset_size,
            notes: Vec::new(),
        }
    }

    pub fn with_raw_sum(mut self, raw: f64) -> Self {
        self.raw_sum = Some(raw);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// JSON has no infinities: non-finite scores travel as the strings `"-inf"`, `"inf"`, `"nan"`.
pub mod score_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(v) => Ok(v),
            NumOrStr::Str(s) => match s.as_str() {
                "-inf" => Ok(f64::NEG_INFINITY),
                "inf" => Ok(f64::INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid score {other:?}"))),
            },
        }
    }
}

pub mod opt_score_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => score_serde::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        score_serde::deserialize(d).map(Some)
    }
}

//! Request and response bodies of the HTTP API. Field names here are the
//! wire vocabulary documented in `docs/wire-schema.md`.

use std::fmt;
use std::str::FromStr;

use auditmatch::matcher::ItemKind;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

/// Which side of the index a query ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Query is a paragraph; hits are requirements.
    Requirements,
    /// Query is a requirement description; hits are paragraphs.
    Paragraphs,
}

impl Direction {
    pub fn target(self) -> ItemKind {
        match self {
            Direction::Requirements => ItemKind::Requirement,
            Direction::Paragraphs => ItemKind::Paragraph,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Requirements => "requirements",
            Direction::Paragraphs => "paragraphs",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "requirements" => Ok(Direction::Requirements),
            "paragraphs" => Ok(Direction::Paragraphs),
            _ => Err(format!("unknown direction {s:?}; expected requirements or paragraphs")),
        }
    }
}

/// A cosine score that always serializes with exactly six decimals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score(pub f32);

impl Score {
    pub fn render(self) -> String {
        format!("{:.6}", self.0)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(self.render()).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() {
            return Err(D::Error::custom("score must be finite"));
        }
        Ok(Score(v as f32))
    }
}

/// `POST /match` body. Every field is optional at the parsing level so the
/// handler can answer 400 with a precise message.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchRequest {
    pub text: Option<String>,
    pub direction: Option<Direction>,
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireHit {
    pub id: String,
    pub score: Score,
    /// Paragraph text or requirement description, when the served corpus
    /// has the id.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResponse {
    pub direction: Direction,
    /// Effective k: the requested k clamped to the number of candidates.
    pub k: usize,
    pub hits: Vec<WireHit>,
}

/// One row of `GET /requirements`. Counts follow the latest verdict per
/// (paragraph, requirement) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequirementView {
    pub id: String,
    pub description: String,
    pub language: String,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotateResponse {
    /// True when the event was appended; false when it repeated the pair's
    /// current verdict and the store was left unchanged.
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_have_six_decimals() {
        let h = WireHit { id: "A_1_1".into(), score: Score(0.5), text: None };
        assert_eq!(serde_json::to_string(&h).unwrap(), r#"{"id":"A_1_1","score":0.500000}"#);
        assert_eq!(Score(-0.1234567).render(), "-0.123457");
    }

    #[test]
    fn scores_read_back() {
        let h: WireHit = serde_json::from_str(r#"{"id":"x","score":0.250000}"#).unwrap();
        assert_eq!(h.score, Score(0.25));
    }

    #[test]
    fn direction_names() {
        assert_eq!("paragraphs".parse::<Direction>().unwrap(), Direction::Paragraphs);
        assert!("both".parse::<Direction>().is_err());
        assert_eq!(serde_json::to_string(&Direction::Requirements).unwrap(), "\"requirements\"");
    }
}

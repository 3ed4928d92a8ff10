//! Label schemes mapping ratings to integer classes.

use super::{check_rating, CorpusError, EpochRecord};

/// Outcome of labeling one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOutcome {
    Class(u8),
    /// Falls between the scheme's thresholds; the epoch is dropped.
    Unlabelable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Four valence-arousal quadrants: HVHA=0, HVLA=1, LVHA=2, LVLA=3.
    Va4,
    /// Three valence bands: low=0, neutral=1 (non-emotional epochs), high=2.
    Valence3,
}

/// A label scheme with its thresholds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LabelScheme {
    pub kind: SchemeKind,
    /// High/low split for the quadrant scheme; ties go High.
    pub va4_threshold: f64,
    /// Valence strictly below this is the low band.
    pub valence3_low: f64,
    /// Valence strictly above this is the high band.
    pub valence3_high: f64,
}

impl LabelScheme {
    pub fn va4() -> Self {
        Self {
            kind: SchemeKind::Va4,
            va4_threshold: 5.0,
            valence3_low: 4.5,
            valence3_high: 5.5,
        }
    }

    pub fn valence3() -> Self {
        Self {
            kind: SchemeKind::Valence3,
            ..Self::va4()
        }
    }

    /// Scheme by manifest name.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "va4" => Some(Self::va4()),
            "valence3" => Some(Self::valence3()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SchemeKind::Va4 => "va4",
            SchemeKind::Valence3 => "valence3",
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        check_rating("va4_threshold", self.va4_threshold)?;
        check_rating("valence3_low", self.valence3_low)?;
        check_rating("valence3_high", self.valence3_high)?;
        if !(self.valence3_low < self.valence3_high) {
            return Err(CorpusError::GeometryMismatch(format!(
                "valence3_low ({}) must be < valence3_high ({})",
                self.valence3_low, self.valence3_high
            )));
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        match self.kind {
            SchemeKind::Va4 => 4,
            SchemeKind::Valence3 => 3,
        }
    }

    /// Labels one epoch under this scheme.
    pub fn label_epoch(&self, record: &EpochRecord) -> Result<LabelOutcome, CorpusError> {
        match self.kind {
            SchemeKind::Va4 => {
                let r = record.ratings.ok_or(CorpusError::MissingRatings)?;
                Ok(LabelOutcome::Class(label_va4(
                    r.valence,
                    r.arousal,
                    self.va4_threshold,
                )?))
            }
            SchemeKind::Valence3 => label_valence3(
                record.ratings.map(|r| r.valence),
                record.emotional,
                self.valence3_low,
                self.valence3_high,
            ),
        }
    }
}

/// Valence-arousal quadrant label. High means rating >= threshold.
///
/// HVHA=0, HVLA=1, LVHA=2, LVLA=3.
pub fn label_va4(valence: f64, arousal: f64, threshold: f64) -> Result<u8, CorpusError> {
    check_rating("valence", valence)?;
    check_rating("arousal", arousal)?;
    let hv = valence >= threshold;
    let ha = arousal >= threshold;
    Ok(match (hv, ha) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    })
}

/// Three-band valence label.
///
/// Non-emotional epochs are neutral (1) regardless of ratings. Emotional
/// epochs are low (0) below `low`, high (2) above `high`, and unlabelable
/// in the closed band between the two thresholds.
pub fn label_valence3(
    valence: Option<f64>,
    emotional: bool,
    low: f64,
    high: f64,
) -> Result<LabelOutcome, CorpusError> {
    if !emotional {
        return Ok(LabelOutcome::Class(1));
    }
    let v = valence.ok_or(CorpusError::MissingValence)?;
    check_rating("valence", v)?;
    Ok(if v < low {
        LabelOutcome::Class(0)
    } else if v > high {
        LabelOutcome::Class(2)
    } else {
        LabelOutcome::Unlabelable
    })
}

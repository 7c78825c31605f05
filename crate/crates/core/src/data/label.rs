use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// GOES flare class letter, plus the flare-quiet marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlareClass {
    X,
    M,
    C,
    B,
    A,
    FQ,
}

impl FlareClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FlareClass::X => "X",
            FlareClass::M => "M",
            FlareClass::C => "C",
            FlareClass::B => "B",
            FlareClass::A => "A",
            FlareClass::FQ => "FQ",
        }
    }
}

/// Raw flare label such as `M1.0`, `C9.9`, `X` or `FQ`.
///
/// The magnitude is optional for lettered classes (some catalogues only
/// record the letter) and always absent for `FQ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlareLabel {
    class: FlareClass,
    magnitude: Option<f64>,
}

impl FlareLabel {
    pub fn new(class: FlareClass, magnitude: Option<f64>) -> Result<Self, Error> {
        match (class, magnitude) {
            (FlareClass::FQ, Some(_)) => Err(Error::Label("FQ carries no magnitude".into())),
            (_, Some(m)) if !(m.is_finite() && m >= 0.0) => {
                Err(Error::Label(format!("{}{m}", class.as_str())))
            }
            _ => Ok(Self { class, magnitude }),
        }
    }

    pub fn flare_quiet() -> Self {
        Self {
            class: FlareClass::FQ,
            magnitude: None,
        }
    }

    pub fn class(&self) -> FlareClass {
        self.class
    }

    pub fn magnitude(&self) -> Option<f64> {
        self.magnitude
    }
}

impl fmt::Display for FlareLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.class.as_str())?;
        if let Some(m) = self.magnitude {
            write!(f, "{m:?}")?;
        }
        Ok(())
    }
}

impl FromStr for FlareLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let bad = || Error::Label(s.to_string());
        if trimmed.eq_ignore_ascii_case("FQ") {
            return Ok(Self::flare_quiet());
        }
        let mut chars = trimmed.chars();
        let class = match chars.next().map(|c| c.to_ascii_uppercase()) {
            Some('X') => FlareClass::X,
            Some('M') => FlareClass::M,
            Some('C') => FlareClass::C,
            Some('B') => FlareClass::B,
            Some('A') => FlareClass::A,
            _ => return Err(bad()),
        };
        let rest = chars.as_str();
        let magnitude = if rest.is_empty() {
            None
        } else {
            // f64 parsing accepts "inf"/"nan"; reject anything that is not a plain decimal.
            if !rest.chars().all(|c| c.is_ascii_digit() || c == '.') {
                return Err(bad());
            }
            Some(rest.parse::<f64>().map_err(|_| bad())?)
        };
        FlareLabel::new(class, magnitude).map_err(|_| bad())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryLabel {
    Flaring,
    NonFlaring,
}

impl BinaryLabel {
    pub fn is_flaring(self) -> bool {
        self == BinaryLabel::Flaring
    }

    pub fn flipped(self) -> Self {
        match self {
            BinaryLabel::Flaring => BinaryLabel::NonFlaring,
            BinaryLabel::NonFlaring => BinaryLabel::Flaring,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Flaring => "flaring",
            BinaryLabel::NonFlaring => "nonflaring",
        }
    }
}

impl FromStr for BinaryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "flaring" | "1" => Ok(BinaryLabel::Flaring),
            "nonflaring" | "0" => Ok(BinaryLabel::NonFlaring),
            other => Err(Error::Label(other.to_string())),
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// M- and X-class events are flaring; everything below M1.0 (C, B, A and
/// flare-quiet) is not. Only the class letter matters.
pub fn binarize_label(raw: &FlareLabel) -> BinaryLabel {
    match raw.class {
        FlareClass::X | FlareClass::M => BinaryLabel::Flaring,
        FlareClass::C | FlareClass::B | FlareClass::A | FlareClass::FQ => BinaryLabel::NonFlaring,
    }
}

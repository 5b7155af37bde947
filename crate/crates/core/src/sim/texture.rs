use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Indenter texture class, ordered by bump spacing (flat first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextureId {
    A,
    B,
    C,
    D,
}

impl TextureId {
    pub const ALL: [TextureId; 4] = [TextureId::A, TextureId::B, TextureId::C, TextureId::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::UnknownTexture(i.to_string()))
    }

    pub fn as_char(self) -> char {
        match self {
            TextureId::A => 'a',
            TextureId::B => 'b',
            TextureId::C => 'c',
            TextureId::D => 'd',
        }
    }

    pub fn spec(self) -> TextureSpec {
        let spacing = match self {
            TextureId::A => 0.0,
            TextureId::B => 1.5,
            TextureId::C => 3.0,
            TextureId::D => 4.5,
        };
        TextureSpec::new(self, spacing).expect("built-in spacings are in range")
    }
}

impl fmt::Display for TextureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for TextureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(TextureId::A),
            "b" => Ok(TextureId::B),
            "c" => Ok(TextureId::C),
            "d" => Ok(TextureId::D),
            _ => Err(Error::UnknownTexture(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    pub id: TextureId,
    pub bump_spacing_mm: f64,
    pub bump_diameter_mm: f64,
}

pub const MAX_BUMP_SPACING_MM: f64 = 4.5;

impl TextureSpec {
    /// Bump diameter follows from spacing as `spacing * sqrt(2 / pi)`, which
    /// keeps the contact area constant across the textured indenters.
    pub fn new(id: TextureId, bump_spacing_mm: f64) -> Result<Self> {
        if !(0.0..=MAX_BUMP_SPACING_MM).contains(&bump_spacing_mm) {
            return Err(Error::InvalidArgument(format!(
                "bump spacing {bump_spacing_mm} mm outside [0, {MAX_BUMP_SPACING_MM}]"
            )));
        }
        Ok(Self {
            id,
            bump_spacing_mm,
            bump_diameter_mm: bump_spacing_mm * (2.0 / std::f64::consts::PI).sqrt(),
        })
    }

    pub fn is_flat(&self) -> bool {
        self.bump_spacing_mm == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diameter_formula_holds() {
        for id in TextureId::ALL {
            let t = id.spec();
            let expected = t.bump_spacing_mm * (2.0 / std::f64::consts::PI).sqrt();
            assert_eq!(t.bump_diameter_mm, expected);
        }
        assert_eq!(TextureId::A.spec().bump_diameter_mm, 0.0);
        assert!(TextureId::A.spec().is_flat());
    }

    #[test]
    fn parse_rejects_unknown() {
        assert_eq!("C".parse::<TextureId>().unwrap(), TextureId::C);
        assert!(matches!("e".parse::<TextureId>(), Err(Error::UnknownTexture(_))));
        assert!(TextureId::from_index(4).is_err());
    }

    #[test]
    fn spacing_range_enforced() {
        assert!(TextureSpec::new(TextureId::D, 4.6).is_err());
        assert!(TextureSpec::new(TextureId::D, -0.1).is_err());
    }
}

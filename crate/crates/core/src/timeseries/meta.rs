use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Geographic region of an issuer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    Africa,
    Asia,
    EasternEurope,
    Europe,
    India,
    LatinAmerica,
    MiddleEast,
    NorthAmerica,
    Oceania,
}

impl Region {
    pub const ALL: [Region; 9] = [
        Region::Africa,
        Region::Asia,
        Region::EasternEurope,
        Region::Europe,
        Region::India,
        Region::LatinAmerica,
        Region::MiddleEast,
        Region::NorthAmerica,
        Region::Oceania,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Region::Africa => "Africa",
            Region::Asia => "Asia",
            Region::EasternEurope => "Eastern Europe",
            Region::Europe => "Europe",
            Region::India => "India",
            Region::LatinAmerica => "Latin America",
            Region::MiddleEast => "Middle East",
            Region::NorthAmerica => "North America",
            Region::Oceania => "Oceania",
        }
    }
}

/// Industry sector of an issuer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sector {
    BasicMaterials,
    ConsumerGoods,
    ConsumerServices,
    Energy,
    Financials,
    Government,
    HealthCare,
    Industrials,
    Technology,
    TelecommunicationsServices,
    Utilities,
}

impl Sector {
    pub const ALL: [Sector; 11] = [
        Sector::BasicMaterials,
        Sector::ConsumerGoods,
        Sector::ConsumerServices,
        Sector::Energy,
        Sector::Financials,
        Sector::Government,
        Sector::HealthCare,
        Sector::Industrials,
        Sector::Technology,
        Sector::TelecommunicationsServices,
        Sector::Utilities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sector::BasicMaterials => "Basic Materials",
            Sector::ConsumerGoods => "Consumer Goods",
            Sector::ConsumerServices => "Consumer Services",
            Sector::Energy => "Energy",
            Sector::Financials => "Financials",
            Sector::Government => "Government",
            Sector::HealthCare => "Health Care",
            Sector::Industrials => "Industrials",
            Sector::Technology => "Technology",
            Sector::TelecommunicationsServices => "Telecommunications Services",
            Sector::Utilities => "Utilities",
        }
    }
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// A vocabulary label: either one of the known values or an unrecognised
/// string kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label<T> {
    Known(T),
    Unknown(String),
}

impl<T: Copy> Label<T> {
    pub fn known(&self) -> Option<T> {
        match self {
            Label::Known(t) => Some(*t),
            Label::Unknown(_) => None,
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Label::Unknown(_))
    }
}

impl Label<Region> {
    pub fn parse(s: &str) -> Self {
        let key = normalize(s);
        Region::ALL
            .iter()
            .find(|r| normalize(r.name()) == key)
            .map(|r| Label::Known(*r))
            .unwrap_or_else(|| Label::Unknown(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        match self {
            Label::Known(r) => r.name(),
            Label::Unknown(s) => s,
        }
    }
}

impl Label<Sector> {
    pub fn parse(s: &str) -> Self {
        let key = normalize(s);
        Sector::ALL
            .iter()
            .find(|r| normalize(r.name()) == key)
            .map(|r| Label::Known(*r))
            .unwrap_or_else(|| Label::Unknown(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        match self {
            Label::Known(r) => r.name(),
            Label::Unknown(s) => s,
        }
    }
}

/// Credit rating bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rating {
    AAA,
    AA,
    A,
    BBB,
    BB,
    B,
    #[serde(rename = "CCC/C")]
    CCC,
}

impl Rating {
    pub const ALL: [Rating; 7] = [
        Rating::AAA,
        Rating::AA,
        Rating::A,
        Rating::BBB,
        Rating::BB,
        Rating::B,
        Rating::CCC,
    ];
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rating::AAA => "AAA",
            Rating::AA => "AA",
            Rating::A => "A",
            Rating::BBB => "BBB",
            Rating::BB => "BB",
            Rating::B => "B",
            Rating::CCC => "CCC/C",
        };
        f.write_str(s)
    }
}

impl FromStr for Rating {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // modifiers such as "BBB+" or "A-" map to their bucket
        let core = s.trim().trim_end_matches(['+', '-']).to_ascii_uppercase();
        Ok(match core.as_str() {
            "AAA" => Rating::AAA,
            "AA" => Rating::AA,
            "A" => Rating::A,
            "BBB" => Rating::BBB,
            "BB" => Rating::BB,
            "B" => Rating::B,
            "CCC/C" | "CCC" | "CC" | "C" => Rating::CCC,
            _ => return Err(Error::UnknownRating(s.to_string())),
        })
    }
}

/// Per-issuer descriptive record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuerMeta {
    pub region: Label<Region>,
    pub sector: Label<Sector>,
    pub rating: Option<Rating>,
}

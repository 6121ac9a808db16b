use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The fifteen generic policy framing dimensions, in their conventional order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Frame {
    Economic,
    CapacityAndResources,
    Morality,
    FairnessAndEquality,
    Legality,
    PolicyPrescription,
    CrimeAndPunishment,
    SecurityAndDefense,
    HealthAndSafety,
    QualityOfLife,
    CulturalIdentity,
    PublicSentiment,
    Political,
    ExternalRegulation,
    Other,
}

impl Frame {
    pub const ALL: [Frame; 15] = [
        Frame::Economic,
        Frame::CapacityAndResources,
        Frame::Morality,
        Frame::FairnessAndEquality,
        Frame::Legality,
        Frame::PolicyPrescription,
        Frame::CrimeAndPunishment,
        Frame::SecurityAndDefense,
        Frame::HealthAndSafety,
        Frame::QualityOfLife,
        Frame::CulturalIdentity,
        Frame::PublicSentiment,
        Frame::Political,
        Frame::ExternalRegulation,
        Frame::Other,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Frame::Economic => "Economic",
            Frame::CapacityAndResources => "Capacity and Resources",
            Frame::Morality => "Morality",
            Frame::FairnessAndEquality => "Fairness and Equality",
            Frame::Legality => "Legality, Constitutionality and Jurisprudence",
            Frame::PolicyPrescription => "Policy Prescription and Evaluation",
            Frame::CrimeAndPunishment => "Crime and Punishment",
            Frame::SecurityAndDefense => "Security and Defense",
            Frame::HealthAndSafety => "Health and Safety",
            Frame::QualityOfLife => "Quality of Life",
            Frame::CulturalIdentity => "Cultural Identity",
            Frame::PublicSentiment => "Public Sentiment",
            Frame::Political => "Political",
            Frame::ExternalRegulation => "External Regulation and Reputation",
            Frame::Other => "Other",
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Frame {
    type Err = Error;

    /// Accepts canonical names plus the common abbreviations ("Legality,
    /// Const., Juri", "Policy Pres. & Eval.", "Public Opinion", ...).
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .to_ascii_lowercase()
            .replace('&', " and ")
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || c.is_whitespace())
            .collect::<String>()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        let frame = match key.as_str() {
            "economic" => Frame::Economic,
            k if k.starts_with("capacity") => Frame::CapacityAndResources,
            "morality" => Frame::Morality,
            k if k.starts_with("fairness") => Frame::FairnessAndEquality,
            k if k.starts_with("legality") => Frame::Legality,
            k if k.starts_with("policy") => Frame::PolicyPrescription,
            k if k.starts_with("crime") => Frame::CrimeAndPunishment,
            k if k.starts_with("security") => Frame::SecurityAndDefense,
            k if k.starts_with("health") => Frame::HealthAndSafety,
            k if k.starts_with("quality") => Frame::QualityOfLife,
            k if k.starts_with("cultural") => Frame::CulturalIdentity,
            "public sentiment" | "public opinion" => Frame::PublicSentiment,
            "political" => Frame::Political,
            k if k.starts_with("external") => Frame::ExternalRegulation,
            "other" | "others" => Frame::Other,
            _ => return Err(Error::Invalid(format!("unknown frame `{s}`"))),
        };
        Ok(frame)
    }
}

impl Serialize for Frame {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Frame {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for f in Frame::ALL {
            assert_eq!(f.name().parse::<Frame>().unwrap(), f);
        }
        assert_eq!(Frame::ALL.iter().enumerate().filter(|(i, f)| f.ordinal() == *i).count(), 15);
    }

    #[test]
    fn abbreviations() {
        assert_eq!("Legality, Const., Juri".parse::<Frame>().unwrap(), Frame::Legality);
        assert_eq!("Policy Pres. & Eval.".parse::<Frame>().unwrap(), Frame::PolicyPrescription);
        assert_eq!("Crime & Punishment".parse::<Frame>().unwrap(), Frame::CrimeAndPunishment);
        assert!("Astrology".parse::<Frame>().is_err());
    }
}

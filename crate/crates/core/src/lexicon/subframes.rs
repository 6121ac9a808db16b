use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize::normalize_phrase;
use crate::corpus::Topic;
use crate::error::{Error, Result};

use super::{Frame, SubframeIndicatorLexicon};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Indicator {
    pub gram: String,
    /// Listed in the config but absent from the induced indicator lexicon.
    pub seed_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Subframe {
    pub name: String,
    pub frame: Frame,
    pub indicators: Vec<Indicator>,
}

/// Named subframes in config order, with pairwise disjoint indicator sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SubframeMap {
    pub subframes: Vec<Subframe>,
}

#[derive(Deserialize)]
struct Entry {
    frame: String,
    seeds: Vec<String>,
}

impl SubframeMap {
    pub fn len(&self) -> usize {
        self.subframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subframes.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Subframe> {
        self.subframes.iter().find(|s| s.name == name)
    }

    /// Every indicator n-gram, in subframe then listing order.
    pub fn grams(&self) -> Vec<&str> {
        self.subframes
            .iter()
            .flat_map(|s| s.indicators.iter().map(|i| i.gram.as_str()))
            .collect()
    }

    /// Gram -> index of the owning subframe.
    pub fn owners(&self) -> HashMap<&str, usize> {
        self.subframes
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.indicators.iter().map(move |i| (i.gram.as_str(), k)))
            .collect()
    }

    /// Serializes back into the config format.
    pub fn to_config_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for s in &self.subframes {
            map.insert(
                s.name.clone(),
                serde_json::json!({
                    "frame": s.frame.name(),
                    "seeds": s.indicators.iter().map(|i| i.gram.as_str()).collect::<Vec<_>>(),
                }),
            );
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("map serializes")
    }
}

/// Parses a `{"<subframe>": {"frame": .., "seeds": [..]}}` config.
///
/// Seeds are normalized with the corpus tokenizer; repeats inside one subframe
/// collapse, repeats across subframes are rejected.
pub fn parse_subframe_map(json: &str, lex: Option<&SubframeIndicatorLexicon>) -> Result<SubframeMap> {
    let raw: serde_json::Map<String, serde_json::Value> = serde_json::from_str(json)?;
    let mut owner: HashMap<String, String> = HashMap::new();
    let mut out = SubframeMap::default();
    for (name, value) in raw {
        let entry: Entry = serde_json::from_value(value)?;
        let frame: Frame = entry.frame.parse()?;
        let mut indicators: Vec<Indicator> = Vec::new();
        for seed in &entry.seeds {
            let gram = normalize_phrase(seed);
            if gram.is_empty() || indicators.iter().any(|i| i.gram == gram) {
                continue;
            }
            if let Some(first) = owner.get(&gram) {
                return Err(Error::DuplicateIndicator {
                    gram,
                    first: first.clone(),
                    second: name,
                });
            }
            owner.insert(gram.clone(), name.clone());
            let seed_only = lex.is_some_and(|l| !l.contains(&gram));
            indicators.push(Indicator { gram, seed_only });
        }
        out.subframes.push(Subframe {
            name,
            frame,
            indicators,
        });
    }
    Ok(out)
}

pub fn load_subframe_map(path: &Path, lex: Option<&SubframeIndicatorLexicon>) -> Result<SubframeMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_subframe_map(&text, lex)
}

/// Raw config of the seed lists shipped with the crate for the three studied
/// topics.
pub fn bundled_subframe_config(topic: Topic) -> Option<&'static str> {
    match topic {
        Topic::Abortion => Some(include_str!("../../data/subframes_abortion.json")),
        Topic::Immigration => Some(include_str!("../../data/subframes_immigration.json")),
        Topic::GunControl => Some(include_str!("../../data/subframes_gun_control.json")),
        Topic::Custom => None,
    }
}

/// Parsed bundled seed lists; `None` for custom topics.
pub fn bundled_subframe_map(topic: Topic) -> Option<SubframeMap> {
    bundled_subframe_config(topic).map(|json| parse_subframe_map(json, None).expect("bundled subframe map is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_abortion() {
        let map = bundled_subframe_map(Topic::Abortion).unwrap();
        assert_eq!(map.len(), 20);
        let roe = map.get("Roe V. Wade").unwrap();
        assert_eq!(roe.frame, Frame::Legality);
        assert!(roe.indicators.iter().any(|i| i.gram == "roe v wade"));
        assert_eq!(map.get("Hobby Lobby").unwrap().indicators[0].gram, "hobby lobby");
    }

    #[test]
    fn bundled_maps_are_disjoint() {
        for topic in [Topic::Abortion, Topic::Immigration, Topic::GunControl] {
            let map = bundled_subframe_map(topic).unwrap();
            assert_eq!(map.owners().len(), map.grams().len());
        }
        assert_eq!(bundled_subframe_map(Topic::Immigration).unwrap().len(), 22);
        assert_eq!(bundled_subframe_map(Topic::GunControl).unwrap().len(), 19);
        assert!(bundled_subframe_map(Topic::Custom).is_none());
    }

    #[test]
    fn empty_config() {
        assert!(parse_subframe_map("{}", None).unwrap().is_empty());
    }

    #[test]
    fn duplicate_across_subframes_rejected() {
        let json = r#"{
            "Hobby Lobby": {"frame": "Legality", "seeds": ["hobby lobby"]},
            "Other": {"frame": "Morality", "seeds": ["Hobby Lobby"]}
        }"#;
        match parse_subframe_map(json, None) {
            Err(Error::DuplicateIndicator { gram, first, second }) => {
                assert_eq!(gram, "hobby lobby");
                assert_eq!(first, "Hobby Lobby");
                assert_eq!(second, "Other");
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn seed_only_flag() {
        let mut lex = SubframeIndicatorLexicon::default();
        lex.frames.insert(Frame::Economic, vec![("minimum wage".into(), 1.0)]);
        let json = r#"{"Minimum Wage": {"frame": "Economic", "seeds": ["minimum wage", "raise the minimum"]}}"#;
        let map = parse_subframe_map(json, Some(&lex)).unwrap();
        let ind = &map.subframes[0].indicators;
        assert!(!ind[0].seed_only);
        assert!(ind[1].seed_only);
        let back = parse_subframe_map(&map.to_config_json(), Some(&lex)).unwrap();
        assert_eq!(back, map);
    }
}

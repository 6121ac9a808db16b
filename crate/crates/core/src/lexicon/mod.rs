//! Frame and subframe indicator lexicons.
//!
//! Frame indicators are unigrams ranked by PMI against frame-labelled seed
//! documents. Subframe indicators are bi/tri-grams ranked by PMI against
//! paragraphs annotated with their top frames, each assigned to its
//! best-scoring frame. Named subframes group indicators by hand (or from the
//! bundled seed lists).

mod frames;
mod pmi;
mod subframes;
mod validation;

use std::collections::{BTreeMap, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{paragraph_ngrams, Corpus, Paragraph};
use crate::error::{Error, Result};

pub use frames::Frame;
pub use pmi::{pmi, AnnotatedParagraph, PmiCounter, INDICATOR_ORDERS};
pub use subframes::{bundled_subframe_config, bundled_subframe_map, load_subframe_map, parse_subframe_map, Indicator, Subframe, SubframeMap};
pub use validation::indicator_bias_correlation;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameLexiconParams {
    pub top_k: usize,
    pub min_df: f64,
    pub max_df: f64,
}

impl Default for FrameLexiconParams {
    fn default() -> Self {
        FrameLexiconParams {
            top_k: 250,
            min_df: 0.005,
            max_df: 0.98,
        }
    }
}

/// Per-frame unigram indicators, best PMI first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameLexicon {
    pub frames: BTreeMap<Frame, Vec<(String, f64)>>,
}

/// Per-frame n-gram indicators; every n-gram lives under exactly one frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubframeIndicatorLexicon {
    pub frames: BTreeMap<Frame, Vec<(String, f64)>>,
}

impl SubframeIndicatorLexicon {
    pub fn contains(&self, gram: &str) -> bool {
        self.frames.values().flatten().any(|(g, _)| g == gram)
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Anything that groups indicator strings by frame.
pub trait IndicatorSets {
    fn indicator_sets(&self) -> BTreeMap<Frame, Vec<String>>;
}

impl IndicatorSets for FrameLexicon {
    fn indicator_sets(&self) -> BTreeMap<Frame, Vec<String>> {
        self.frames
            .iter()
            .map(|(f, v)| (*f, v.iter().map(|(w, _)| w.clone()).collect()))
            .collect()
    }
}

impl IndicatorSets for SubframeIndicatorLexicon {
    fn indicator_sets(&self) -> BTreeMap<Frame, Vec<String>> {
        self.frames
            .iter()
            .map(|(f, v)| (*f, v.iter().map(|(w, _)| w.clone()).collect()))
            .collect()
    }
}

fn rank_desc(list: &mut [(String, f64)]) {
    list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Builds unigram frame indicators from documents carrying a `frame` label.
///
/// Document frequency is measured over the whole seed corpus and kept when
/// `min_df <= df <= max_df`.
pub fn build_frame_lexicon(
    seed: &Corpus,
    frames: &[Frame],
    params: &FrameLexiconParams,
) -> Result<FrameLexicon> {
    if !(0.0..=1.0).contains(&params.min_df) || params.min_df >= params.max_df || params.max_df > 1.0 {
        return Err(Error::Invalid(format!(
            "document-frequency bounds must satisfy 0 <= min < max <= 1, got ({}, {})",
            params.min_df, params.max_df
        )));
    }
    let mut counter = PmiCounter::new(&[1]);
    let mut unlabelled = 0usize;
    for (i, doc) in seed.documents().iter().enumerate() {
        let Some(label) = &doc.frame else {
            unlabelled += 1;
            continue;
        };
        let frame: Frame = label.parse()?;
        let tokens: Vec<String> = seed.tokens(i).cloned().collect();
        counter.add_grams(tokens, &[frame]);
    }
    if unlabelled > 0 {
        warn!("{unlabelled} seed documents carry no frame label and were ignored");
    }
    let vocabulary: Vec<&str> = counter
        .grams()
        .into_iter()
        .filter(|w| {
            let df = counter.unit_fraction(w);
            df >= params.min_df && df <= params.max_df
        })
        .collect();
    let mut out = FrameLexicon::default();
    for &frame in frames {
        if counter.frame_total(frame) == 0 {
            return Err(Error::EmptyFrame(frame.name().to_string()));
        }
        let mut scored: Vec<(String, f64)> = vocabulary
            .iter()
            .map(|w| (w.to_string(), counter.pmi(w, frame)))
            .filter(|(_, s)| s.is_finite())
            .collect();
        rank_desc(&mut scored);
        scored.truncate(params.top_k);
        out.frames.insert(frame, scored);
    }
    Ok(out)
}

/// Word -> (frame, pmi) lookup for paragraph annotation.
#[derive(Clone, Debug)]
pub struct FrameAnnotator {
    index: HashMap<String, Vec<(Frame, f64)>>,
}

impl FrameAnnotator {
    pub fn new(lex: &FrameLexicon) -> Self {
        let mut index: HashMap<String, Vec<(Frame, f64)>> = HashMap::new();
        for (frame, words) in &lex.frames {
            for (w, s) in words {
                index.entry(w.clone()).or_default().push((*frame, *s));
            }
        }
        FrameAnnotator { index }
    }

    /// Frames ranked by indicator match count, then summed PMI, then ordinal.
    pub fn annotate<'a>(&self, tokens: impl IntoIterator<Item = &'a String>, top_n: usize) -> Vec<Frame> {
        let mut hits = [0usize; 15];
        let mut mass = [0f64; 15];
        for t in tokens {
            if let Some(entries) = self.index.get(t) {
                for (f, s) in entries {
                    hits[f.ordinal()] += 1;
                    mass[f.ordinal()] += s;
                }
            }
        }
        let mut ranked: Vec<Frame> = Frame::ALL.into_iter().filter(|f| hits[f.ordinal()] > 0).collect();
        ranked.sort_by(|a, b| {
            hits[b.ordinal()]
                .cmp(&hits[a.ordinal()])
                .then_with(|| mass[b.ordinal()].total_cmp(&mass[a.ordinal()]))
                .then_with(|| a.ordinal().cmp(&b.ordinal()))
        });
        ranked.truncate(top_n);
        ranked
    }
}

/// Top `top_n` frames of a paragraph by lexicon matches; empty when nothing matches.
pub fn annotate_frames(paragraph: &Paragraph, lex: &FrameLexicon, top_n: usize) -> Vec<Frame> {
    assert!(top_n >= 1, "top_n must be at least 1");
    FrameAnnotator::new(lex).annotate(&paragraph.tokens, top_n)
}

/// Annotates every paragraph of a corpus, in corpus order.
pub fn annotate_corpus<'a>(corpus: &'a Corpus, lex: &FrameLexicon, top_n: usize) -> Vec<AnnotatedParagraph<'a>> {
    let annotator = FrameAnnotator::new(lex);
    corpus
        .all_paragraphs()
        .map(|p| AnnotatedParagraph {
            paragraph: p,
            frames: annotator.annotate(&p.tokens, top_n),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubframeIndicatorParams {
    pub min_pf: f64,
    pub max_pf: f64,
}

impl Default for SubframeIndicatorParams {
    fn default() -> Self {
        SubframeIndicatorParams {
            min_pf: 0.0002,
            max_pf: 0.5,
        }
    }
}

/// Assigns each bi/tri-gram within the paragraph-frequency band to the frame
/// with the highest PMI (lowest ordinal on ties).
pub fn build_subframe_indicators(
    annotated: &[AnnotatedParagraph],
    params: &SubframeIndicatorParams,
) -> SubframeIndicatorLexicon {
    let mut counter = PmiCounter::new(&INDICATOR_ORDERS);
    for ap in annotated {
        counter.add(ap.paragraph, &ap.frames);
    }
    let mut out = SubframeIndicatorLexicon::default();
    for gram in counter.grams() {
        let pf = counter.unit_fraction(gram);
        if pf < params.min_pf || pf > params.max_pf {
            continue;
        }
        let best = Frame::ALL
            .into_iter()
            .map(|f| (f, counter.pmi(gram, f)))
            .filter(|(_, s)| s.is_finite())
            .fold(None::<(Frame, f64)>, |acc, cur| match acc {
                Some(a) if a.1 >= cur.1 => Some(a),
                _ => Some(cur),
            });
        if let Some((frame, score)) = best {
            out.frames.entry(frame).or_default().push((gram.to_string(), score));
        }
    }
    for list in out.frames.values_mut() {
        rank_desc(list);
    }
    out
}

/// Distinct-sentence n-grams of every order in `orders`, used for exact
/// indicator matching.
pub(crate) fn paragraph_grams(paragraph: &Paragraph, orders: &[usize]) -> Vec<String> {
    orders
        .iter()
        .flat_map(|&n| paragraph_ngrams(paragraph, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn seed_doc(id: &str, frame: &str, body: &str) -> Document {
        Document {
            id: id.into(),
            topic: None,
            bias: None,
            title: String::new(),
            body: body.into(),
            source: String::new(),
            date: None,
            frame: Some(frame.into()),
        }
    }

    /// Brute-force PMI over a toy seed corpus: direct token counting.
    fn brute_unigram_pmi(docs: &[(&str, &str)], word: &str, frame: &str) -> f64 {
        let toks = |b: &str| -> Vec<String> { b.split_whitespace().map(|t| t.to_lowercase()).collect() };
        let all: Vec<String> = docs.iter().flat_map(|(_, b)| toks(b)).collect();
        let in_f: Vec<String> = docs.iter().filter(|(f, _)| *f == frame).flat_map(|(_, b)| toks(b)).collect();
        let p_wf = in_f.iter().filter(|t| *t == word).count() as f64 / in_f.len() as f64;
        let p_w = all.iter().filter(|t| *t == word).count() as f64 / all.len() as f64;
        (p_wf / p_w).ln()
    }

    #[test]
    fn toy_seed_lexicon_matches_brute_force() {
        let raw = [
            ("Economic", "tax wage tax budget"),
            ("Economic", "wage jobs budget"),
            ("Morality", "sin faith wage"),
        ];
        let corpus = Corpus::from_documents(
            raw.iter().enumerate().map(|(i, (f, b))| seed_doc(&i.to_string(), f, b)).collect(),
        )
        .unwrap();
        let params = FrameLexiconParams { top_k: 250, min_df: 0.0, max_df: 1.0 };
        let lex = build_frame_lexicon(&corpus, &[Frame::Economic, Frame::Morality], &params).unwrap();
        for (frame, list) in &lex.frames {
            for (w, s) in list {
                let expected = brute_unigram_pmi(&raw, w, frame.name());
                assert!((s - expected).abs() < 1e-12, "{frame} {w}: {s} vs {expected}");
            }
            for pair in list.windows(2) {
                assert!(pair[0].1 >= pair[1].1);
            }
        }
        // `wage` appears in both frames; `sin` only under morality.
        let econ: Vec<&str> = lex.frames[&Frame::Economic].iter().map(|(w, _)| w.as_str()).collect();
        assert!(econ.contains(&"wage") && !econ.contains(&"sin"));
        assert_eq!(lex.frames[&Frame::Morality][0].0, "faith");
    }

    #[test]
    fn df_bounds_and_missing_frame() {
        let corpus = Corpus::from_documents(vec![
            seed_doc("1", "Economic", "common rare1"),
            seed_doc("2", "Morality", "common x"),
        ])
        .unwrap();
        let params = FrameLexiconParams { top_k: 10, min_df: 0.0, max_df: 0.98 };
        let lex = build_frame_lexicon(&corpus, &[Frame::Economic], &params).unwrap();
        assert!(lex.frames[&Frame::Economic].iter().all(|(w, _)| w != "common"));
        let err = build_frame_lexicon(&corpus, &[Frame::Political], &params).unwrap_err();
        assert!(err.to_string().contains("Political"));
        assert!(build_frame_lexicon(&corpus, &[Frame::Economic], &FrameLexiconParams { min_df: 0.5, max_df: 0.4, top_k: 1 }).is_err());
    }

    #[test]
    fn uniform_word_ranks_below_skewed() {
        let corpus = Corpus::from_documents(vec![
            seed_doc("1", "Economic", "even tilt tilt"),
            seed_doc("2", "Morality", "even other other"),
        ])
        .unwrap();
        let params = FrameLexiconParams { top_k: 10, min_df: 0.0, max_df: 1.0 };
        let lex = build_frame_lexicon(&corpus, &[Frame::Economic], &params).unwrap();
        let list = &lex.frames[&Frame::Economic];
        assert_eq!(list[0].0, "tilt");
        let even = list.iter().find(|(w, _)| w == "even").unwrap();
        assert!(even.1.abs() < 1e-12);
    }

    fn lex_of(entries: &[(Frame, &[(&str, f64)])]) -> FrameLexicon {
        FrameLexicon {
            frames: entries
                .iter()
                .map(|(f, ws)| (*f, ws.iter().map(|(w, s)| (w.to_string(), *s)).collect()))
                .collect(),
        }
    }

    #[test]
    fn annotation_by_counts_then_pmi() {
        let lex = lex_of(&[
            (Frame::Economic, &[("tax", 1.0), ("wage", 0.5)]),
            (Frame::Morality, &[("sin", 2.0)]),
            (Frame::Legality, &[("court", 0.1)]),
        ]);
        let p = Paragraph::from_text("d", 0, "tax wage tax sin");
        assert_eq!(annotate_frames(&p, &lex, 2), vec![Frame::Economic, Frame::Morality]);
        let none = Paragraph::from_text("d", 0, "nothing here");
        assert!(annotate_frames(&none, &lex, 2).is_empty());
        // one hit each: summed PMI decides, then ordinal
        let tie = Paragraph::from_text("d", 0, "court sin");
        assert_eq!(annotate_frames(&tie, &lex, 2), vec![Frame::Morality, Frame::Legality]);
        let lex2 = lex_of(&[(Frame::Economic, &[("a", 1.0)]), (Frame::Morality, &[("b", 1.0)])]);
        let p2 = Paragraph::from_text("d", 0, "b a");
        assert_eq!(annotate_frames(&p2, &lex2, 1), vec![Frame::Economic]);
    }

    #[test]
    fn annotation_ignores_token_order() {
        let lex = lex_of(&[(Frame::Economic, &[("tax", 1.0)]), (Frame::Morality, &[("sin", 2.0), ("god", 1.0)])]);
        let a = Paragraph::from_text("d", 0, "tax sin god x tax");
        let b = Paragraph::from_text("d", 0, "x god tax tax sin");
        assert_eq!(annotate_frames(&a, &lex, 3), annotate_frames(&b, &lex, 3));
    }

    #[test]
    fn subframe_assignment_matches_brute_force_table() {
        let texts = [
            ("border wall now", vec![Frame::SecurityAndDefense]),
            ("border wall again. tax cut", vec![Frame::SecurityAndDefense, Frame::Economic]),
            ("tax cut today", vec![Frame::Economic]),
            ("tax cut border wall", vec![]),
            ("very common words", vec![Frame::Economic]),
        ];
        let paras: Vec<Paragraph> = texts.iter().map(|(t, _)| Paragraph::from_text("d", 0, t)).collect();
        let ann: Vec<AnnotatedParagraph> = paras
            .iter()
            .zip(&texts)
            .map(|(p, (_, f))| AnnotatedParagraph { paragraph: p, frames: f.clone() })
            .collect();
        let lex = build_subframe_indicators(&ann, &SubframeIndicatorParams { min_pf: 0.0, max_pf: 1.0 });
        // every gram appears under exactly one frame
        let mut seen = std::collections::BTreeSet::new();
        for list in lex.frames.values() {
            for (g, _) in list {
                assert!(seen.insert(g.clone()), "{g} assigned twice");
            }
        }
        for (frame, list) in &lex.frames {
            for (g, s) in list {
                let table: Vec<(Frame, f64)> = Frame::ALL.iter().map(|f| (*f, pmi(g, *f, &ann))).collect();
                let best = table
                    .iter()
                    .filter(|(_, v)| v.is_finite())
                    .fold(None::<(Frame, f64)>, |acc, &(f, v)| match acc {
                        Some((_, bv)) if bv >= v => acc,
                        _ => Some((f, v)),
                    })
                    .unwrap();
                assert_eq!(best.0, *frame, "{g}");
                assert!((best.1 - s).abs() < 1e-12);
            }
        }
        assert!(lex.frames[&Frame::SecurityAndDefense].iter().any(|(g, _)| g == "border wall"));
        assert!(lex.frames[&Frame::Economic].iter().any(|(g, _)| g == "tax cut"));

        // "border wall" appears in 3 of 5 paragraphs: dropped above max_pf = 0.5
        let capped = build_subframe_indicators(&ann, &SubframeIndicatorParams { min_pf: 0.0, max_pf: 0.5 });
        assert!(!capped.contains("border wall"));
        assert!(capped.contains("very common"));
    }
}

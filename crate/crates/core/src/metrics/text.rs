use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::corpus::{Bias, Corpus};
use crate::embedding::{cosine, EmbeddingStore};
use crate::error::{Error, Result};
use crate::graph::{InfoGraph, NodeKind, NodeRef, RelationKind};
use crate::lexicon::{Frame, FrameAnnotator, SubframeMap};

use super::ranking::spearman_scores;

/// Top `top_n` frames of each article by frame-lexicon match counts.
pub fn article_frames_from_lexicon(corpus: &Corpus, annotator: &FrameAnnotator, top_n: usize) -> Vec<Vec<Frame>> {
    (0..corpus.len()).map(|d| annotator.annotate(corpus.tokens(d), top_n)).collect()
}

/// Top `top_n` frames of each article by the number of contained expressions
/// whose subframe belongs to the frame; used when no frame lexicon is given.
pub fn article_frames_from_subframes(graph: &InfoGraph, map: &SubframeMap, top_n: usize) -> Vec<Vec<Frame>> {
    let owners = map.owners();
    (0..graph.articles.len())
        .map(|a| {
            let mut hits = [0usize; 15];
            for &s in graph.neighbors(RelationKind::Contains, a) {
                if let Some(&o) = owners.get(graph.subframes[s as usize].as_str()) {
                    hits[map.subframes[o].frame.ordinal()] += 1;
                }
            }
            let mut ranked: Vec<Frame> = Frame::ALL.into_iter().filter(|f| hits[f.ordinal()] > 0).collect();
            ranked.sort_by(|a, b| hits[b.ordinal()].cmp(&hits[a.ordinal()]).then(a.cmp(b)));
            ranked.truncate(top_n);
            ranked
        })
        .collect()
}

/// Mean expression vector of each subframe; `None` when none of its
/// expressions is a graph node.
pub fn subframe_proxies(graph: &InfoGraph, map: &SubframeMap, store: &EmbeddingStore) -> Vec<Option<Vec<f64>>> {
    let node_of: HashMap<&str, usize> = graph.subframes.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    map.subframes
        .iter()
        .map(|sf| {
            let nodes: Vec<usize> = sf.indicators.iter().filter_map(|i| node_of.get(i.gram.as_str()).copied()).collect();
            if nodes.is_empty() {
                return None;
            }
            let mut mean = vec![0.0; store.dim()];
            for n in &nodes {
                for (m, x) in mean.iter_mut().zip(store.vector(NodeRef::new(NodeKind::Subframe, *n))) {
                    *m += x / nodes.len() as f64;
                }
            }
            Some(mean)
        })
        .collect()
}

/// Encoded paragraphs with their article and nearest subframe.
pub struct ParagraphIndex {
    /// `(article, paragraph index within article)`.
    pub origin: Vec<(usize, usize)>,
    pub vectors: Vec<Option<Vec<f64>>>,
    /// `similarity[p][s]`: cosine of paragraph `p` with subframe proxy `s`,
    /// `None` when either vector is missing.
    pub similarity: Vec<Vec<Option<f64>>>,
    /// Subframe with the highest similarity; ties go to the lower index.
    pub nearest: Vec<Option<usize>>,
}

impl ParagraphIndex {
    pub fn new(corpus: &Corpus, store: &EmbeddingStore, proxies: &[Option<Vec<f64>>]) -> Self {
        let enc = store.encoder();
        let mut origin = Vec::new();
        let mut vectors = Vec::new();
        for d in 0..corpus.len() {
            for (i, p) in corpus.paragraphs(d).iter().enumerate() {
                origin.push((d, i));
                vectors.push(enc.encode_tokens(&p.tokens));
            }
        }
        let similarity: Vec<Vec<Option<f64>>> = vectors
            .iter()
            .map(|v| {
                proxies
                    .iter()
                    .map(|s| match (v, s) {
                        (Some(v), Some(s)) => Some(cosine(v, s)),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        let nearest = similarity
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter_map(|(s, x)| x.map(|x| (s, x)))
                    .fold(None::<(usize, f64)>, |best, cur| match best {
                        Some(b) if b.1 >= cur.1 => Some(b),
                        _ => Some(cur),
                    })
                    .map(|(s, _)| s)
            })
            .collect();
        ParagraphIndex {
            origin,
            vectors,
            similarity,
            nearest,
        }
    }

    /// Top `top_n` subframes of each article by mean paragraph similarity.
    pub fn article_subframes(&self, articles: usize, top_n: usize) -> Vec<Vec<usize>> {
        let n_sf = self.similarity.first().map_or(0, Vec::len);
        let mut sums = vec![vec![(0.0, 0usize); n_sf]; articles];
        for (p, &(a, _)) in self.origin.iter().enumerate() {
            for (s, x) in self.similarity[p].iter().enumerate() {
                if let Some(x) = x {
                    sums[a][s].0 += x;
                    sums[a][s].1 += 1;
                }
            }
        }
        sums.into_iter()
            .map(|row| {
                let mut scored: Vec<(usize, f64)> = row
                    .into_iter()
                    .enumerate()
                    .filter(|(_, (_, n))| *n > 0)
                    .map(|(s, (sum, n))| (s, sum / n as f64))
                    .collect();
                scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                scored.into_iter().take(top_n).map(|(s, _)| s).collect()
            })
            .collect()
    }
}

/// Row-normalized co-occurrence of subframes over the selected articles.
///
/// Entry `(i, j)` is the fraction of articles carrying `i` that also carry
/// `j`; rows of unused subframes are zero. With `floor` set, entries below it
/// are zeroed.
pub fn subframe_cooccurrence(article_subframes: &[Vec<usize>], selected: &[usize], n_subframes: usize, floor: Option<f64>) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0usize; n_subframes]; n_subframes];
    for &a in selected {
        let set: BTreeSet<usize> = article_subframes[a].iter().copied().collect();
        for &i in &set {
            for &j in &set {
                counts[i][j] += 1;
            }
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n = counts[i][i];
            row.iter()
                .map(|&c| {
                    let f = if n == 0 { 0.0 } else { c as f64 / n as f64 };
                    match floor {
                        Some(t) if f < t => 0.0,
                        _ => f,
                    }
                })
                .collect()
        })
        .collect()
}

/// How the document-frequency bounds filter words.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DfMode {
    /// Keep `min <= df <= max`.
    #[default]
    Band,
    /// Keep `df < min` or `df > max`.
    InverseBand,
}

impl FromStr for DfMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "band" => Ok(DfMode::Band),
            "inverse-band" => Ok(DfMode::InverseBand),
            other => Err(Error::Invalid(format!("unknown df mode `{other}`; expected band or inverse-band"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextPmiParams {
    pub context_n: usize,
    pub top_m: usize,
    pub min_df: f64,
    pub max_df: f64,
    pub df_mode: DfMode,
}

impl Default for ContextPmiParams {
    fn default() -> Self {
        ContextPmiParams {
            context_n: 500,
            top_m: 5,
            min_df: 0.05,
            max_df: 0.60,
            df_mode: DfMode::Band,
        }
    }
}

/// Words most associated with `side` in the contexts of one subframe.
///
/// The slice is the paragraphs whose nearest subframe is `subframe` and that
/// are among its `context_n` most similar paragraphs. Words are ranked by
/// `ln(P(w | side) / P(w))` over token counts of the slice, after the
/// document-frequency filter; words unseen on `side` are dropped.
pub fn party_context_pmi(
    index: &ParagraphIndex,
    corpus: &Corpus,
    sides: &[Option<Bias>],
    subframe: usize,
    name: &str,
    side: Bias,
    params: &ContextPmiParams,
) -> Result<Vec<(String, f64)>> {
    let mut slice: Vec<(usize, f64)> = (0..index.origin.len())
        .filter(|&p| index.nearest[p] == Some(subframe))
        .filter_map(|p| index.similarity[p][subframe].map(|s| (p, s)))
        .collect();
    slice.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    slice.truncate(params.context_n);
    let slice: Vec<usize> = slice.into_iter().map(|(p, _)| p).filter(|&p| sides[index.origin[p].0].is_some()).collect();
    if slice.is_empty() {
        return Err(Error::Insufficient(format!("no labelled context paragraphs for subframe `{name}`")));
    }
    let mut total: BTreeMap<&str, usize> = BTreeMap::new();
    let mut on_side: BTreeMap<&str, usize> = BTreeMap::new();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let (mut n_all, mut n_side) = (0usize, 0usize);
    for &p in &slice {
        let (a, i) = index.origin[p];
        let tokens = &corpus.paragraphs(a)[i].tokens;
        let mine = sides[a] == Some(side);
        for t in tokens {
            *total.entry(t).or_default() += 1;
            n_all += 1;
            if mine {
                *on_side.entry(t).or_default() += 1;
                n_side += 1;
            }
        }
        for t in tokens.iter().map(String::as_str).collect::<BTreeSet<_>>() {
            *df.entry(t).or_default() += 1;
        }
    }
    let n_par = slice.len() as f64;
    let keep = |w: &str| {
        let f = df[w] as f64 / n_par;
        match params.df_mode {
            DfMode::Band => f >= params.min_df && f <= params.max_df,
            DfMode::InverseBand => f < params.min_df || f > params.max_df,
        }
    };
    let mut scored: Vec<(String, f64)> = on_side
        .iter()
        .filter(|(w, _)| keep(w))
        .map(|(w, &c)| {
            let p_side = c as f64 / n_side as f64;
            let p_all = total[w] as f64 / n_all as f64;
            (w.to_string(), (p_side / p_all).ln())
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(params.top_m);
    Ok(scored)
}

/// Yearly rank agreement of item usage between and within sides.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RankCorrelations {
    /// Mean over years of Spearman(left usage, right usage).
    pub between: Option<f64>,
    /// Mean over consecutive years of Spearman(year, year + 1), per side.
    pub within_left: Option<f64>,
    pub within_right: Option<f64>,
    pub years: Vec<i32>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn usage_corr(a: Option<&BTreeMap<usize, usize>>, b: Option<&BTreeMap<usize, usize>>) -> Option<f64> {
    let (a, b) = (a?, b?);
    let items: BTreeSet<usize> = a.keys().chain(b.keys()).copied().collect();
    if items.len() < 2 {
        return None;
    }
    let x: Vec<f64> = items.iter().map(|i| *a.get(i).unwrap_or(&0) as f64).collect();
    let y: Vec<f64> = items.iter().map(|i| *b.get(i).unwrap_or(&0) as f64).collect();
    spearman_scores(&x, &y).ok()
}

/// Usage counts per `(year, side)`: the number of articles carrying each
/// item. Items are compared over the union used by either operand, unused
/// items counting zero; years with fewer than two items are skipped.
pub fn yearly_rank_correlations(years: &[Option<i32>], sides: &[Option<Bias>], items: &[Vec<usize>]) -> RankCorrelations {
    let mut usage: BTreeMap<(i32, Bias), BTreeMap<usize, usize>> = BTreeMap::new();
    for ((y, s), its) in years.iter().zip(sides).zip(items) {
        if let (Some(y), Some(s)) = (y, s) {
            let e = usage.entry((*y, *s)).or_default();
            for &i in its.iter().collect::<BTreeSet<_>>() {
                *e.entry(i).or_default() += 1;
            }
        }
    }
    let all_years: Vec<i32> = usage.keys().map(|(y, _)| *y).collect::<BTreeSet<_>>().into_iter().collect();
    let get = |y: i32, s: Bias| usage.get(&(y, s));
    let between: Vec<f64> = all_years.iter().filter_map(|&y| usage_corr(get(y, Bias::Left), get(y, Bias::Right))).collect();
    let within = |s: Bias| -> Vec<f64> { all_years.iter().filter_map(|&y| usage_corr(get(y, s), get(y + 1, s))).collect() };
    RankCorrelations {
        between: mean(&between),
        within_left: mean(&within(Bias::Left)),
        within_right: mean(&within(Bias::Right)),
        years: all_years,
    }
}

/// Frame and subframe yearly rank correlations over dated articles.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IdeologyCorrelations {
    pub frames: RankCorrelations,
    pub subframes: RankCorrelations,
}

pub fn ideology_rank_correlations(
    corpus: &Corpus,
    sides: &[Option<Bias>],
    article_frames: &[Vec<Frame>],
    article_subframes: &[Vec<usize>],
) -> IdeologyCorrelations {
    let years: Vec<Option<i32>> = corpus.documents().iter().map(|d| d.date.map(|t| t.year())).collect();
    let frames: Vec<Vec<usize>> = article_frames.iter().map(|fs| fs.iter().map(|f| f.ordinal()).collect()).collect();
    IdeologyCorrelations {
        frames: yearly_rank_correlations(&years, sides, &frames),
        subframes: yearly_rank_correlations(&years, sides, article_subframes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cooccurrence_by_hand() {
        let sets = vec![vec![0, 1], vec![0, 2], vec![0, 1, 2], vec![3]];
        let m = subframe_cooccurrence(&sets, &[0, 1, 2, 3], 5, None);
        assert_eq!(m[0], vec![1.0, 2.0 / 3.0, 2.0 / 3.0, 0.0, 0.0]);
        assert_eq!(m[1], vec![1.0, 1.0, 0.5, 0.0, 0.0]);
        assert_eq!(m[3][3], 1.0);
        assert!(m[4].iter().all(|&x| x == 0.0));
        let floored = subframe_cooccurrence(&sets, &[0, 1, 2], 5, Some(0.7));
        assert_eq!(floored[0], vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let slice = subframe_cooccurrence(&sets, &[3], 5, None);
        assert_eq!(slice[0][0], 0.0);
    }

    #[test]
    fn yearly_correlations_by_hand() {
        let years = vec![Some(2015), Some(2015), Some(2015), Some(2015), Some(2016), Some(2016), None];
        let l = Some(Bias::Left);
        let r = Some(Bias::Right);
        let sides = vec![l, l, r, r, l, l, l];
        let items = vec![vec![0, 1], vec![0], vec![1, 2], vec![1], vec![0, 2], vec![0], vec![9]];
        let c = yearly_rank_correlations(&years, &sides, &items);
        // 2015 left counts (2,1,0), right (0,2,1).
        let between = spearman_scores(&[2.0, 1.0, 0.0], &[0.0, 2.0, 1.0]).unwrap();
        assert!((c.between.unwrap() - between).abs() < 1e-12);
        // Left 2015 (2,1,0) against left 2016 (2,0,1).
        let within = spearman_scores(&[2.0, 1.0, 0.0], &[2.0, 0.0, 1.0]).unwrap();
        assert!((c.within_left.unwrap() - within).abs() < 1e-12);
        assert_eq!(c.within_right, None);
        assert_eq!(c.years, vec![2015, 2016]);
    }

    #[test]
    fn duplicated_side_correlates_perfectly() {
        let years = vec![Some(2018); 4];
        let sides = vec![Some(Bias::Left), Some(Bias::Left), Some(Bias::Right), Some(Bias::Right)];
        let items = vec![vec![0, 1], vec![0], vec![0, 1], vec![0]];
        assert!((yearly_rank_correlations(&years, &sides, &items).between.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn df_mode_parsing() {
        assert_eq!("band".parse::<DfMode>().unwrap(), DfMode::Band);
        assert_eq!("inverse-band".parse::<DfMode>().unwrap(), DfMode::InverseBand);
        assert!("both".parse::<DfMode>().is_err());
    }
}

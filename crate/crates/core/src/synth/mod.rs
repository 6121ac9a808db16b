//! Synthetic worlds with planted communities, biases and subframe
//! vocabularies.
//!
//! Each community owns a pool of articles and leans left with probability
//! `bias_mixture[c]`. Every community has its own subframes on each side. An expression is a
//! bigram over a topic vocabulary shared by both sides, so single words carry
//! little side signal. Each subframe also has a private tail pool. Tail words
//! are drawn sparsely, so most of them never appear in a shared article.

mod score;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Bias, Corpus, Document, ExternalScores, SocialEdges, Topic};
use crate::error::{Error, Result};
use crate::lexicon::{Frame, Indicator, Subframe, SubframeMap};

pub use score::{score_against_truth, PipelineOutputs, TruthScore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub k_true: usize,
    pub users_per_community: usize,
    pub articles_per_community: usize,
    pub influencers_per_side: usize,
    /// Probability that a community's users and articles lean left.
    pub bias_mixture: Vec<f64>,
    /// Probability that a share comes from the article's own community.
    pub homophily: f64,
    /// Probability that a follow goes to the community's side.
    pub fidelity: f64,
    /// Probability that a sharer is drawn from the pool members on the
    /// article's side, when the pool has any.
    pub sharer_alignment: f64,
    pub unshared_fraction: f64,
    pub shares_per_article: usize,
    pub follows_per_user: usize,
    pub subframes_per_side: usize,
    pub expressions_per_subframe: usize,
    pub topic_vocabulary: usize,
    pub tail_pool: usize,
    /// Per-side pool of common words that lean toward that side.
    pub slant_pool: usize,
    pub background_pool: usize,
    pub sentences_per_article: usize,
    pub words_per_sentence: usize,
    /// Per-sentence probabilities of an expression, a tail word and a
    /// slanted word.
    pub expression_rate: f64,
    pub tail_rate: f64,
    pub slant_rate: f64,
    /// Probability that an expression comes from a random other subframe.
    pub expression_noise: f64,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            k_true: 3,
            users_per_community: 20,
            articles_per_community: 100,
            influencers_per_side: 6,
            bias_mixture: vec![1.0, 0.0, 1.0],
            homophily: 0.9,
            fidelity: 0.9,
            sharer_alignment: 1.0,
            unshared_fraction: 0.5,
            shares_per_article: 2,
            follows_per_user: 3,
            subframes_per_side: 2,
            expressions_per_subframe: 6,
            topic_vocabulary: 24,
            tail_pool: 60,
            slant_pool: 10,
            background_pool: 5,
            sentences_per_article: 6,
            words_per_sentence: 6,
            expression_rate: 0.8,
            tail_rate: 0.5,
            slant_rate: 0.15,
            expression_noise: 0.1,
            seed: 7,
        }
    }
}

impl WorldSpec {
    /// Same world with every noise source switched off.
    pub fn noiseless(self) -> Self {
        WorldSpec {
            homophily: 1.0,
            fidelity: 1.0,
            unshared_fraction: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.k_true < 2 {
            return bad(format!("k_true must be at least 2, got {}", self.k_true));
        }
        if self.bias_mixture.len() != self.k_true {
            return bad(format!("bias_mixture has {} entries for {} communities", self.bias_mixture.len(), self.k_true));
        }
        let probs = [
            ("homophily", self.homophily),
            ("fidelity", self.fidelity),
            ("unshared_fraction", self.unshared_fraction),
            ("expression_rate", self.expression_rate),
            ("tail_rate", self.tail_rate),
            ("slant_rate", self.slant_rate),
            ("sharer_alignment", self.sharer_alignment),
            ("expression_noise", self.expression_noise),
        ];
        for (name, p) in probs.into_iter().chain(self.bias_mixture.iter().map(|&m| ("bias_mixture", m))) {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        let positive = [
            ("users_per_community", self.users_per_community),
            ("articles_per_community", self.articles_per_community),
            ("influencers_per_side", self.influencers_per_side),
            ("subframes_per_side", self.subframes_per_side),
            ("expressions_per_subframe", self.expressions_per_subframe),
            ("tail_pool", self.tail_pool),
            ("slant_pool", self.slant_pool),
            ("background_pool", self.background_pool),
            ("sentences_per_article", self.sentences_per_article),
            ("words_per_sentence", self.words_per_sentence),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if self.shares_per_article == 0 && self.unshared_fraction < 1.0 {
            return bad("shares_per_article must be positive".into());
        }
        let needed = self.k_true * 2 * self.subframes_per_side * self.expressions_per_subframe;
        if needed > self.topic_vocabulary * (self.topic_vocabulary - 1) {
            return bad(format!("topic vocabulary too small for {needed} distinct bigrams"));
        }
        if self.words_per_sentence < 3 {
            return bad("words_per_sentence must be at least 3".into());
        }
        Ok(())
    }
}

/// Planted truth of a generated world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub user_community: BTreeMap<String, usize>,
    pub user_bias: BTreeMap<String, Bias>,
    pub article_bias: BTreeMap<String, Bias>,
    pub article_community: BTreeMap<String, usize>,
    /// Name of the subframe each article was written from.
    pub article_subframe: BTreeMap<String, String>,
    pub shared_articles: BTreeSet<String>,
    pub k_true: usize,
}

pub struct World {
    pub corpus: Corpus,
    pub edges: SocialEdges,
    pub map: SubframeMap,
    pub external: ExternalScores,
    pub truth: GroundTruth,
}

/// File names of a world written by [`World::write`].
pub const WORLD_FILES: WorldFiles<&'static str> = WorldFiles {
    corpus: "corpus.jsonl",
    shares: "shares.tsv",
    follows: "follows.tsv",
    affiliations: "affiliations.tsv",
    external: "external.tsv",
    subframes: "subframes.json",
    truth: "truth.json",
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldFiles<P> {
    pub corpus: P,
    pub shares: P,
    pub follows: P,
    pub affiliations: P,
    pub external: P,
    pub subframes: P,
    pub truth: P,
}

impl World {
    /// Writes the world into `dir` in the regular input formats, plus the
    /// planted truth as JSON.
    pub fn write(&self, dir: &Path) -> Result<WorldFiles<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let f = &WORLD_FILES;
        let files = WorldFiles {
            corpus: dir.join(f.corpus),
            shares: dir.join(f.shares),
            follows: dir.join(f.follows),
            affiliations: dir.join(f.affiliations),
            external: dir.join(f.external),
            subframes: dir.join(f.subframes),
            truth: dir.join(f.truth),
        };
        self.corpus.write_jsonl(&files.corpus)?;
        self.edges.write(&files.shares, &files.follows, &files.affiliations)?;
        self.external.write(&files.external)?;
        fs::write(&files.subframes, self.map.to_config_json()).map_err(|e| Error::io(&files.subframes, e))?;
        let mut truth = serde_json::to_string_pretty(&self.truth)?;
        truth.push('\n');
        fs::write(&files.truth, truth).map_err(|e| Error::io(&files.truth, e))?;
        Ok(files)
    }
}

/// Reads truth written by [`World::write`].
pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn side_of(left: bool) -> Bias {
    if left {
        Bias::Left
    } else {
        Bias::Right
    }
}

/// Builds the world; identical specs give identical worlds.
pub fn generate(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = spec.subframes_per_side;

    // Vocabulary: topic words shared by both sides, per-subframe tails and a
    // background pool.
    let topic: Vec<String> = (0..spec.topic_vocabulary).map(|i| format!("topic{i}")).collect();
    let mut bigrams: Vec<(usize, usize)> = (0..topic.len())
        .flat_map(|i| (0..topic.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    bigrams.shuffle(&mut rng);
    // Subframe `(c * 2 + side) * s + j` is the j-th talking point of side
    // `side` inside community `c`.
    let n_sf = spec.k_true * 2 * s;
    let mut subframes = Vec::with_capacity(n_sf);
    let mut expressions: Vec<Vec<[String; 2]>> = Vec::with_capacity(n_sf);
    for c in 0..spec.k_true {
        for side in Bias::BOTH {
            for j in 0..s {
                let sf = subframes.len();
                let exprs: Vec<[String; 2]> = bigrams[sf * spec.expressions_per_subframe..(sf + 1) * spec.expressions_per_subframe]
                    .iter()
                    .map(|&(a, b)| [topic[a].clone(), topic[b].clone()])
                    .collect();
                subframes.push(Subframe {
                    name: format!("c{c} {} {j}", side.short()),
                    frame: Frame::ALL[sf % (Frame::ALL.len() - 1)],
                    indicators: exprs
                        .iter()
                        .map(|e| Indicator {
                            gram: e.join(" "),
                            seed_only: false,
                        })
                        .collect(),
                });
                expressions.push(exprs);
            }
        }
    }
    let tails: Vec<Vec<String>> = (0..n_sf)
        .map(|sf| (0..spec.tail_pool).map(|i| format!("tail{sf}x{i}")).collect())
        .collect();
    let slants: Vec<Vec<String>> = Bias::BOTH
        .iter()
        .map(|side| (0..spec.slant_pool).map(|i| format!("lean{}x{i}", side.short().to_lowercase())).collect())
        .collect();
    let background: Vec<String> = (0..spec.background_pool).map(|i| format!("word{i}")).collect();

    // Users.
    let mut truth = GroundTruth {
        user_community: BTreeMap::new(),
        user_bias: BTreeMap::new(),
        article_bias: BTreeMap::new(),
        article_community: BTreeMap::new(),
        article_subframe: BTreeMap::new(),
        shared_articles: BTreeSet::new(),
        k_true: spec.k_true,
    };
    let mut members: Vec<Vec<String>> = Vec::with_capacity(spec.k_true);
    for (c, &m) in spec.bias_mixture.iter().enumerate() {
        let ids: Vec<String> = (0..spec.users_per_community).map(|j| format!("u{c}_{j:03}")).collect();
        for id in &ids {
            truth.user_community.insert(id.clone(), c);
            truth.user_bias.insert(id.clone(), side_of(rng.gen_bool(m)));
        }
        members.push(ids);
    }

    // Influencers and their external conservative scores.
    let mut edges = SocialEdges::default();
    let mut scores = BTreeMap::new();
    let mut influencers: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for side in Bias::BOTH {
        for i in 0..spec.influencers_per_side {
            let id = format!("p{}{i:02}", side.short());
            let score = match side {
                Bias::Left => rng.gen_range(0.0..0.45),
                Bias::Right => rng.gen_range(0.55..1.0),
            };
            edges.affiliations.insert(id.clone(), side);
            scores.insert(id.clone(), score);
            influencers[side.index()].push(id);
        }
    }

    // Articles.
    let start = NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date");
    let span = (NaiveDate::from_ymd_opt(2019, 12, 31).expect("valid date") - start).num_days();
    let mut docs = Vec::new();
    let mut owned: Vec<Vec<String>> = vec![Vec::new(); spec.k_true];
    for (c, &m) in spec.bias_mixture.iter().enumerate() {
        for j in 0..spec.articles_per_community {
            let id = format!("a{c}_{j:04}");
            let bias = side_of(rng.gen_bool(m));
            let sf = (c * 2 + bias.index()) * s + rng.gen_range(0..s);
            let mut sentences = Vec::with_capacity(spec.sentences_per_article);
            for _ in 0..spec.sentences_per_article {
                let mut words: Vec<String> = (0..spec.words_per_sentence)
                    .map(|_| background.choose(&mut rng).expect("background").clone())
                    .collect();
                if rng.gen_bool(spec.slant_rate) {
                    let at = rng.gen_range(0..words.len());
                    words[at] = slants[bias.index()].choose(&mut rng).expect("slant").clone();
                }
                if rng.gen_bool(spec.tail_rate) {
                    let at = rng.gen_range(0..words.len());
                    words[at] = tails[sf].choose(&mut rng).expect("tail").clone();
                }
                if rng.gen_bool(spec.expression_rate) {
                    let source = if rng.gen_bool(spec.expression_noise) { rng.gen_range(0..n_sf) } else { sf };
                    let e = expressions[source].choose(&mut rng).expect("expression");
                    let at = rng.gen_range(0..words.len() - 1);
                    words[at] = e[0].clone();
                    words[at + 1] = e[1].clone();
                }
                sentences.push(words.join(" ") + ".");
            }
            let date = start + chrono::Duration::days(rng.gen_range(0..=span));
            docs.push(Document {
                id: id.clone(),
                topic: Some(Topic::Custom),
                bias: Some(bias),
                title: format!("Article {c}-{j}"),
                body: sentences.join(" "),
                source: format!("outlet{c}"),
                date: Some(date),
                frame: None,
            });
            truth.article_bias.insert(id.clone(), bias);
            truth.article_community.insert(id.clone(), c);
            truth.article_subframe.insert(id.clone(), subframes[sf].name.clone());
            owned[c].push(id);
        }
    }

    // Shares: a fixed fraction of each community's articles stays unshared.
    for (c, ids) in owned.iter().enumerate() {
        let n_unshared = (spec.unshared_fraction * ids.len() as f64).round() as usize;
        let mut order: Vec<&String> = ids.iter().collect();
        order.shuffle(&mut rng);
        for id in order.into_iter().skip(n_unshared) {
            let bias = truth.article_bias[id];
            for _ in 0..spec.shares_per_article {
                let home = rng.gen_bool(spec.homophily) || spec.k_true == 1;
                let pool = if home {
                    &members[c]
                } else {
                    let mut other = rng.gen_range(0..spec.k_true - 1);
                    if other >= c {
                        other += 1;
                    }
                    &members[other]
                };
                let same: Vec<&String> = pool.iter().filter(|u| truth.user_bias[*u] == bias).collect();
                let aligned = !same.is_empty() && rng.gen_bool(spec.sharer_alignment);
                let user = if aligned { same.choose(&mut rng).copied() } else { pool.choose(&mut rng) };
                edges.shares.insert((user.expect("non-empty community").clone(), id.clone()));
            }
            truth.shared_articles.insert(id.clone());
        }
    }

    // Follows: the community's side with probability m·f + (1-m)(1-f).
    for (c, ids) in members.iter().enumerate() {
        let m = spec.bias_mixture[c];
        let p_left = m * spec.fidelity + (1.0 - m) * (1.0 - spec.fidelity);
        for u in ids {
            for _ in 0..spec.follows_per_user {
                let side = side_of(rng.gen_bool(p_left));
                let p = influencers[side.index()].choose(&mut rng).expect("influencers");
                edges.follows.insert((u.clone(), p.clone()));
            }
        }
    }

    let corpus = Corpus::from_documents(docs)?;
    Ok(World {
        corpus,
        edges,
        map: SubframeMap { subframes },
        external: ExternalScores::new(scores)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_consistent() {
        let spec = WorldSpec::default();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.corpus.documents(), b.corpus.documents());
        assert!(a.edges.validate(&a.corpus).is_ok());
        assert_eq!(a.corpus.len(), 300);
        assert_eq!(a.truth.user_community.len(), 60);
        assert_eq!(a.truth.shared_articles.len(), 150);
        let shared: BTreeSet<&String> = a.edges.shares.iter().map(|(_, d)| d).collect();
        assert_eq!(shared.len(), 150);
        let grams = a.map.grams();
        assert_eq!(grams.len(), 3 * 2 * 2 * 6);
        assert_eq!(grams.iter().collect::<BTreeSet<_>>().len(), grams.len());
        let other = generate(&WorldSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.edges, other.edges);
    }

    #[test]
    fn written_world_round_trips() {
        let w = generate(&WorldSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = w.write(dir.path()).unwrap();
        let corpus = crate::corpus::ingest_corpus(&files.corpus, Topic::Custom).unwrap();
        assert_eq!(corpus.documents(), w.corpus.documents());
        let edges = SocialEdges::load(Some(&files.shares), Some(&files.follows), Some(&files.affiliations)).unwrap();
        assert_eq!(edges, w.edges);
        assert_eq!(ExternalScores::load(&files.external).unwrap().scores, w.external.scores);
        let map = crate::lexicon::load_subframe_map(&files.subframes, None).unwrap();
        assert_eq!(map.grams(), w.map.grams());
        assert_eq!(read_truth(&files.truth).unwrap(), w.truth);
    }

    #[test]
    fn noiseless_world_is_pure() {
        let w = generate(&WorldSpec::default().noiseless()).unwrap();
        assert_eq!(w.truth.shared_articles.len(), 300);
        for (u, d) in &w.edges.shares {
            assert_eq!(w.truth.user_community[u], w.truth.article_community[d]);
            assert_eq!(w.truth.user_bias[u], w.truth.article_bias[d]);
        }
        for (u, p) in &w.edges.follows {
            assert_eq!(w.edges.affiliations[p], w.truth.user_bias[u]);
        }
    }

    #[test]
    fn external_scores_split_by_side() {
        let w = generate(&WorldSpec::default()).unwrap();
        for (p, s) in &w.external.scores {
            match w.edges.affiliations[p] {
                Bias::Left => assert!(*s < 0.45),
                Bias::Right => assert!(*s >= 0.55),
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&WorldSpec {
            k_true: 1,
            bias_mixture: vec![1.0],
            ..WorldSpec::default()
        })
        .is_err());
        assert!(generate(&WorldSpec {
            homophily: 1.5,
            ..WorldSpec::default()
        })
        .is_err());
        assert!(generate(&WorldSpec {
            bias_mixture: vec![1.0],
            ..WorldSpec::default()
        })
        .is_err());
    }
}

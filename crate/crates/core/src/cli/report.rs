use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use log::warn;
use serde_json::{json, Value};

use crate::community::{assign_users, infer_labels, predict_articles, predict_users, read_model, Prediction};
use crate::corpus::{Bias, ExternalScores};
use crate::embedding::{read_checkpoint, EmbeddingStore};
use crate::error::{Error, Result};
use crate::graph::NodeKind;
use crate::lexicon::{Frame, FrameAnnotator, FrameLexicon};
use crate::metrics::{
    article_frames_from_lexicon, article_frames_from_subframes, cell, community_polarity, doc_community_heatmap, external_score_correlation,
    ideology_rank_correlations, party_context_pmi, polarity_order, polarity_side, purity, segregation_profile, split_macro_f1,
    subframe_cooccurrence, subframe_polarity_scatter, subframe_proxies, write_artifact, Artifact, CommunityView, ParagraphIndex, Plot,
    PlotPoint, RankCorrelations, RankedKind, Ranking, Table,
};
use crate::synth::{read_truth, score_against_truth, PipelineOutputs};

use super::{Inputs, RunConfig, COMMUNITIES_FILE, EMBEDDINGS_FILE, REPORT_DIR};

fn artifact(name: &str, table: Table, plot: Plot) -> Artifact {
    Artifact {
        name: name.into(),
        table,
        plot,
    }
}

fn predictions_artifact(inputs: &Inputs, articles: &[Prediction], users: &[Prediction]) -> Artifact {
    let g = &inputs.graph;
    let shared = g.shared_articles();
    let mut table = Table::new(["kind", "id", "shared", "label", "source", "margin", "tie"]);
    let mut plot = Plot::new("kind", "margin");
    let rows = g
        .articles
        .iter()
        .zip(articles)
        .enumerate()
        .map(|(a, (id, p))| ("article", id, Some(shared[a]), p))
        .chain(g.users.iter().zip(users).map(|(id, p)| ("user", id, None, p)));
    for (kind, id, sh, p) in rows {
        let source = serde_json::to_value(p.source).expect("enum serializes");
        table.push(vec![
            kind.into(),
            id.clone(),
            sh.map_or_else(String::new, |s| s.to_string()),
            p.label.to_string(),
            source.as_str().unwrap_or_default().into(),
            p.margin.to_string(),
            p.tie.to_string(),
        ]);
        plot.series.push(PlotPoint::new(kind, p.margin, id.clone()));
    }
    artifact("predictions", table, plot)
}

fn article_frames(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<Vec<Frame>>> {
    match &cfg.paths.frame_lexicon {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let lex: FrameLexicon = serde_json::from_str(&text)?;
            Ok(article_frames_from_lexicon(&inputs.corpus, &FrameAnnotator::new(&lex), cfg.report.top_n))
        }
        None => Ok(article_frames_from_subframes(&inputs.graph, &inputs.map, cfg.report.top_n)),
    }
}

struct CommunityPart {
    summary: Value,
    artifacts: Vec<Artifact>,
}

fn community_part(
    cfg: &RunConfig,
    inputs: &Inputs,
    store: &EmbeddingStore,
    assignments: &crate::community::Assignments,
    frames: &[Vec<Frame>],
) -> Result<CommunityPart> {
    let g = &inputs.graph;
    let k = assignments.k;
    let view = CommunityView {
        graph: g,
        store,
        assignments,
        map: &inputs.map,
        article_frames: frames,
    };
    let centroids: Vec<Vec<f64>> = (0..k).map(|c| view.centroid(c)).collect();
    let polarity = community_polarity(&centroids, store.label_vector(Bias::Left));
    let order = polarity_order(&polarity);
    let mut artifacts = Vec::new();

    let mut table = Table::new(["community", "polarity", "position", "side", "users", "articles", "influencers"]);
    let mut plot = Plot::new("position", "polarity");
    for (pos, &c) in order.iter().enumerate() {
        let side = polarity_side(polarity[c]).map_or_else(String::new, |b| b.to_string());
        table.push(vec![
            c.to_string(),
            polarity[c].to_string(),
            (pos + 1).to_string(),
            side,
            assignments.community(c).len().to_string(),
            view.articles(c).len().to_string(),
            view.influencers(c).len().to_string(),
        ]);
        plot.series.push(PlotPoint::new(pos + 1, polarity[c], format!("community {c}")));
    }
    artifacts.push(artifact("polarity", table, plot));

    // Purity w.r.t. the bias of shared articles and of followed influencers.
    let docs = inputs.corpus.documents();
    let share_rows: Vec<Vec<Bias>> = (0..k).map(|c| view.articles(c).into_iter().filter_map(|a| docs[a].bias).collect()).collect();
    let affiliations: Vec<Bias> = g.influencers.iter().map(|i| inputs.edges.affiliations[i]).collect();
    let follow_rows: Vec<Vec<Bias>> = (0..k).map(|c| view.influencers(c).into_iter().map(|i| affiliations[i]).collect()).collect();
    let mut table = Table::new(["node_type", "purity", "assignments"]);
    let mut plot = Plot::new("node_type", "purity");
    let mut purities = BTreeMap::new();
    for (name, rows) in [("share", &share_rows), ("follow", &follow_rows)] {
        let n: usize = rows.iter().map(Vec::len).sum();
        let p = purity(rows).ok();
        if let Some(p) = p {
            plot.series.push(PlotPoint::new(name, p, name));
        }
        purities.insert(name, p);
        table.push(vec![name.into(), cell(p), n.to_string()]);
    }
    artifacts.push(artifact("purity", table, plot));

    let rankings: Vec<BTreeMap<RankedKind, Ranking>> = (0..k).map(|c| view.rankings(c)).collect();
    let mut table = Table::new(["community", "kind", "rank", "id", "score", "rank_score"]);
    let mut plot = Plot::new("rank", "score");
    for &c in &order {
        for (kind, r) in &rankings[c] {
            for (i, (id, s)) in r.entries().iter().enumerate() {
                let rs = crate::metrics::rank_score(i + 1, r.len());
                table.push(vec![c.to_string(), kind.to_string(), (i + 1).to_string(), id.clone(), s.to_string(), rs.to_string()]);
                plot.series.push(PlotPoint::new(i + 1, *s, format!("{c}/{kind}/{id}")));
            }
        }
    }
    artifacts.push(artifact("rankings", table, plot));

    let mut external_summary = Vec::new();
    if let Some(p) = &cfg.paths.external_scores {
        let external = ExternalScores::load(p)?;
        let mut table = Table::new(["community", "polarity", "correlation", "influencers", "note"]);
        let mut plot = Plot::new("polarity", "correlation");
        for &c in &order {
            match external_score_correlation(&rankings[c][&RankedKind::Influencer], &external) {
                Ok((rho, n)) => {
                    table.push(vec![c.to_string(), polarity[c].to_string(), rho.to_string(), n.to_string(), String::new()]);
                    plot.series.push(PlotPoint::new(polarity[c], rho, format!("community {c}")));
                    external_summary.push(json!({"community": c, "correlation": rho, "influencers": n}));
                }
                Err(e) => {
                    table.push(vec![c.to_string(), polarity[c].to_string(), String::new(), String::new(), e.to_string()]);
                    external_summary.push(json!({"community": c, "correlation": null, "note": e.to_string()}));
                }
            }
        }
        artifacts.push(artifact("external_correlation", table, plot));
    }

    let mut table = Table::new(["community", "polarity", "kind", "with_leftmost", "with_rightmost"]);
    let mut plot = Plot::new("polarity", "correlation");
    match segregation_profile(&rankings, &polarity) {
        Ok(profile) => {
            for row in &profile.rows {
                for (kind, (l, r)) in &row.correlations {
                    table.push(vec![row.community.to_string(), row.polarity.to_string(), kind.to_string(), cell(*l), cell(*r)]);
                    for (side, v) in [("leftmost", l), ("rightmost", r)] {
                        if let Some(v) = v {
                            plot.series.push(PlotPoint::new(row.polarity, *v, format!("{kind}/{side}")));
                        }
                    }
                }
            }
        }
        Err(e) => warn!("{e}"),
    }
    artifacts.push(artifact("segregation", table, plot));

    let all: Vec<usize> = (0..g.articles.len()).collect();
    let heat = doc_community_heatmap(&all, g, store, &centroids, &order);
    let header: Vec<String> = std::iter::once("article".to_string()).chain(order.iter().map(|c| format!("community_{c}"))).collect();
    let mut table = Table::new(header);
    let mut plot = Plot::new("community", "cosine");
    for (id, row) in heat.rows.iter().zip(&heat.values) {
        table.push(std::iter::once(id.clone()).chain(row.iter().map(f64::to_string)).collect());
        for (&c, v) in order.iter().zip(row) {
            plot.series.push(PlotPoint::new(c, *v, id.clone()));
        }
    }
    artifacts.push(artifact("heatmap", table, plot));

    let names: Vec<String> = inputs.map.subframes.iter().map(|s| s.name.clone()).collect();
    let sf_rankings: Vec<Ranking> = rankings.iter().map(|r| r[&RankedKind::Subframe].clone()).collect();
    let scatter = subframe_polarity_scatter(&names, &sf_rankings, &polarity);
    let mut table = Table::new(["subframe", "left", "right"]);
    let mut plot = Plot::new("left_rank_score", "right_rank_score");
    for p in &scatter {
        table.push(vec![p.subframe.clone(), cell(p.left), cell(p.right)]);
        if let (Some(l), Some(r)) = (p.left, p.right) {
            plot.series.push(PlotPoint::new(l, r, p.subframe.clone()));
        }
    }
    artifacts.push(artifact("subframe_scatter", table, plot));

    let summary = json!({
        "k": k,
        "polarity": polarity,
        "order": order,
        "purity": purities,
        "external_correlation": external_summary,
    });
    Ok(CommunityPart { summary, artifacts })
}

fn correlation_row(table: &mut Table, plot: &mut Plot, items: &str, c: &RankCorrelations) {
    let years = c.years.iter().map(i32::to_string).collect::<Vec<_>>().join(" ");
    table.push(vec![items.into(), cell(c.between), cell(c.within_left), cell(c.within_right), years]);
    for (name, v) in [("between", c.between), ("within_left", c.within_left), ("within_right", c.within_right)] {
        if let Some(v) = v {
            plot.series.push(PlotPoint::new(items, v, name));
        }
    }
}

fn text_part(cfg: &RunConfig, inputs: &Inputs, store: &EmbeddingStore, sides: &[Option<Bias>], frames: &[Vec<Frame>]) -> Vec<Artifact> {
    let mut artifacts = Vec::new();
    let map = &inputs.map;
    let proxies = subframe_proxies(&inputs.graph, map, store);
    let index = ParagraphIndex::new(&inputs.corpus, store, &proxies);
    let n_articles = inputs.corpus.len();
    let article_sf = index.article_subframes(n_articles, cfg.report.top_n);
    let names: Vec<&str> = map.subframes.iter().map(|s| s.name.as_str()).collect();

    let header: Vec<String> = ["side", "subframe"].into_iter().map(String::from).chain(names.iter().map(|n| n.to_string())).collect();
    let mut table = Table::new(header);
    let mut plot = Plot::new("subframe", "fraction");
    for side in Bias::BOTH {
        let slice: Vec<usize> = (0..n_articles).filter(|&a| sides[a] == Some(side)).collect();
        let m = subframe_cooccurrence(&article_sf, &slice, names.len(), cfg.report.cooccurrence_floor);
        for (i, row) in m.iter().enumerate() {
            table.push([side.to_string(), names[i].to_string()].into_iter().chain(row.iter().map(f64::to_string)).collect());
            for (j, v) in row.iter().enumerate() {
                if *v > 0.0 {
                    plot.series.push(PlotPoint::new(names[j], *v, format!("{side}/{}", names[i])));
                }
            }
        }
    }
    artifacts.push(artifact("cooccurrence", table, plot));

    let mut table = Table::new(["subframe", "side", "rank", "word", "pmi"]);
    let mut plot = Plot::new("rank", "pmi");
    for (s, name) in names.iter().enumerate() {
        for side in Bias::BOTH {
            match party_context_pmi(&index, &inputs.corpus, sides, s, name, side, &cfg.report.context_pmi) {
                Ok(words) => {
                    for (r, (w, v)) in words.iter().enumerate() {
                        table.push(vec![name.to_string(), side.to_string(), (r + 1).to_string(), w.clone(), v.to_string()]);
                        plot.series.push(PlotPoint::new(r + 1, *v, format!("{name}/{side}/{w}")));
                    }
                }
                // The slice does not depend on the side.
                Err(e) => {
                    warn!("{e}");
                    break;
                }
            }
        }
    }
    artifacts.push(artifact("context_pmi", table, plot));

    let corr = ideology_rank_correlations(&inputs.corpus, sides, frames, &article_sf);
    let mut table = Table::new(["items", "between", "within_left", "within_right", "years"]);
    let mut plot = Plot::new("items", "rank_correlation");
    correlation_row(&mut table, &mut plot, "frames", &corr.frames);
    correlation_row(&mut table, &mut plot, "subframes", &corr.subframes);
    artifacts.push(artifact("ideology_correlations", table, plot));
    artifacts
}

/// Writes every metric of the trained run into the report directory and
/// returns the files written. The directory is emptied first.
pub fn write_report(cfg: &RunConfig, inputs: &Inputs, gold: bool) -> Result<Vec<PathBuf>> {
    let dir = cfg.out(REPORT_DIR);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let store = read_checkpoint(&cfg.out(EMBEDDINGS_FILE), &inputs.corpus)?;
    let g = &inputs.graph;
    let model_path = cfg.out(COMMUNITIES_FILE);
    let model = if model_path.exists() { Some(read_model(&model_path)?) } else { None };
    if let Some(m) = &model {
        if m.memberships.len() != g.users.len() || m.k() != store.count(NodeKind::Community) {
            return Err(Error::Checkpoint(format!(
                "{} does not match the embedding checkpoint and graph",
                model_path.display()
            )));
        }
    }
    let community = model.as_ref().map(|m| {
        let asg = assign_users(m, cfg.community.threshold);
        let (_, labels) = infer_labels(&store, m, &asg, g, cfg.train.similarity);
        (m, asg, labels)
    });
    let articles = predict_articles(&store, community.as_ref().map(|c| &c.2), &cfg.train);
    let users = predict_users(&store, community.as_ref().map(|(m, a, l)| (*m, a, l)), &cfg.train);

    let mut artifacts = vec![predictions_artifact(inputs, &articles, &users)];
    let mut summary = serde_json::Map::new();
    summary.insert("mode".into(), json!(cfg.mode));
    let frames = article_frames(cfg, inputs)?;
    if let Some((_, asg, _)) = &community {
        let part = community_part(cfg, inputs, &store, asg, &frames)?;
        artifacts.extend(part.artifacts);
        summary.insert("communities".into(), part.summary);
    }

    let docs = inputs.corpus.documents();
    let sides: Vec<Option<Bias>> = docs.iter().zip(&articles).map(|(d, p)| d.bias.or(Some(p.label))).collect();
    if !inputs.map.is_empty() && !g.subframes.is_empty() {
        artifacts.extend(text_part(cfg, inputs, &store, &sides, &frames));
    }

    if gold {
        let gold_labels: BTreeMap<String, Bias> = docs.iter().filter_map(|d| d.bias.map(|b| (d.id.clone(), b))).collect();
        let predicted: BTreeMap<String, Bias> = g.articles.iter().cloned().zip(articles.iter().map(|p| p.label)).collect();
        let shared_flags = g.shared_articles();
        let shared: BTreeMap<&str, bool> = g.articles.iter().map(String::as_str).zip(shared_flags).collect();
        let f1 = split_macro_f1(&gold_labels, &predicted, &|id| shared.get(id).copied().unwrap_or(false));
        let mut table = Table::new(["split", "macro_f1", "articles"]);
        let mut plot = Plot::new("split", "macro_f1");
        for (name, v, n) in [
            ("shared", f1.shared, f1.shared_count),
            ("unshared", f1.unshared, f1.unshared_count),
            ("overall", f1.overall, f1.shared_count + f1.unshared_count),
        ] {
            table.push(vec![name.into(), cell(v), n.to_string()]);
            if let Some(v) = v {
                plot.series.push(PlotPoint::new(name, v, name));
            }
        }
        artifacts.push(artifact("gold", table, plot));
        summary.insert("gold".into(), serde_json::to_value(&f1)?);
    }

    if let Some(p) = &cfg.paths.truth {
        let truth = read_truth(p)?;
        let outputs = PipelineOutputs::from_predictions(g, &articles, &users, community.as_ref().map(|c| &c.1));
        let score = score_against_truth(&outputs, &truth)?;
        let value = serde_json::to_value(&score)?;
        let mut table = Table::new(["metric", "value"]);
        let mut plot = Plot::new("metric", "value");
        for (name, v) in value.as_object().expect("struct serializes to an object") {
            table.push(vec![name.clone(), v.as_f64().map_or_else(String::new, |x| v.as_u64().map_or(x.to_string(), |u| u.to_string()))]);
            if let Some(x) = v.as_f64() {
                plot.series.push(PlotPoint::new(name.as_str(), x, name.as_str()));
            }
        }
        artifacts.push(artifact("truth", table, plot));
        summary.insert("truth".into(), value);
    }

    let mut files = Vec::new();
    for a in &artifacts {
        files.extend(write_artifact(&dir, a)?);
    }
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&Value::Object(summary))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(files)
}

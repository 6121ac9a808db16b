use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::community::{CommunityConfig, Mode};
use crate::corpus::Topic;
use crate::embedding::TrainConfig;
use crate::error::{Error, Result};
use crate::lexicon::{FrameLexiconParams, SubframeIndicatorParams};
use crate::metrics::ContextPmiParams;

/// Environment variable that replaces the configured training seed.
pub const SEED_ENV: &str = "FRAMESCOPE_SEED";

/// Input files; relative paths resolve against the config file's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub shares: Option<PathBuf>,
    pub follows: Option<PathBuf>,
    pub affiliations: Option<PathBuf>,
    /// Frame-labelled documents for lexicon induction.
    pub seed_corpus: Option<PathBuf>,
    /// Subframe config; the bundled map of `topic` is used when absent.
    pub subframe_map: Option<PathBuf>,
    /// Frame lexicon for article frame annotation in reports.
    pub frame_lexicon: Option<PathBuf>,
    pub external_scores: Option<PathBuf>,
    /// Planted truth of a synthetic world.
    pub truth: Option<PathBuf>,
}

/// Share-count bounds for keeping a user.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserFilter {
    pub min_shares: usize,
    /// `None` keeps arbitrarily active users.
    pub max_shares: Option<usize>,
}

impl Default for UserFilter {
    fn default() -> Self {
        UserFilter {
            min_shares: 5,
            max_shares: Some(100),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconConfig {
    pub frame: FrameLexiconParams,
    pub subframe: SubframeIndicatorParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Frames and subframes kept per article.
    pub top_n: usize,
    pub context_pmi: ContextPmiParams,
    /// Co-occurrence fractions below this are zeroed; `None` keeps all.
    pub cooccurrence_floor: Option<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            top_n: 3,
            context_pmi: ContextPmiParams::default(),
            cooccurrence_floor: None,
        }
    }
}

/// Everything one pipeline run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub topic: Topic,
    pub paths: Paths,
    pub output_dir: PathBuf,
    pub mode: Mode,
    pub filter: UserFilter,
    pub lexicon: LexiconConfig,
    pub train: TrainConfig,
    pub community: CommunityConfig,
    pub report: ReportConfig,
    /// Run data-parallel steps on one thread.
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            topic: Topic::Custom,
            paths: Paths::default(),
            output_dir: PathBuf::from("out"),
            mode: Mode::EmSf,
            filter: UserFilter::default(),
            lexicon: LexiconConfig::default(),
            train: TrainConfig::default(),
            community: CommunityConfig::default(),
            report: ReportConfig::default(),
            sequential: false,
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_against(base);
        Ok(cfg)
    }

    pub fn resolve_against(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.corpus,
            &mut p.shares,
            &mut p.follows,
            &mut p.affiliations,
            &mut p.seed_corpus,
            &mut p.subframe_map,
            &mut p.frame_lexicon,
            &mut p.external_scores,
            &mut p.truth,
        ] {
            resolve(base, slot);
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    /// Applies the seed environment variable, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.train.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    /// Checks settings and that every configured path exists.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.community.validate()?;
        if let Some(max) = self.filter.max_shares {
            if max < self.filter.min_shares {
                return Err(Error::Invalid(format!(
                    "filter bounds {}..={max} are empty",
                    self.filter.min_shares
                )));
            }
        }
        if self.report.top_n == 0 {
            return Err(Error::Invalid("report.top_n must be positive".into()));
        }
        let p = &self.paths;
        for (name, path) in [
            ("corpus", &p.corpus),
            ("shares", &p.shares),
            ("follows", &p.follows),
            ("affiliations", &p.affiliations),
            ("seed_corpus", &p.seed_corpus),
            ("subframe_map", &p.subframe_map),
            ("frame_lexicon", &p.frame_lexicon),
            ("external_scores", &p.external_scores),
            ("truth", &p.truth),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(Error::Invalid(format!("{name} path {} does not exist", path.display())));
                }
            }
        }
        if self.mode == Mode::EmSf && p.subframe_map.is_none() && crate::lexicon::bundled_subframe_map(self.topic).is_none() {
            return Err(Error::Invalid(format!(
                "mode em_sf needs a subframe map and topic {} has no bundled one",
                self.topic
            )));
        }
        Ok(())
    }

    /// Required path, or an input error naming it.
    pub fn require<'a>(&self, name: &str, path: &'a Option<PathBuf>) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Invalid(format!("config has no `paths.{name}`")))
    }
}

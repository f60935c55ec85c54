use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::align::AlignConfig;
use crate::corpus::{bedroom_config, default_bedroom_spec, default_livingroom_spec, livingroom_config, CorpusSpec};
use crate::error::{Error, Result};
use crate::scene::CategoryConfig;
use crate::synthesis::CompletionConfig;
use crate::topview::{ViewWindow, DEFAULT_DELTA, DEFAULT_RESOLUTION};
use crate::trainer::TrainConfig;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSection {
    /// `bedroom` or `livingroom`; picks the default categories and spec.
    pub room: String,
    pub descriptor_dim: usize,
    pub categories: Option<CategoryConfig>,
    pub spec: Option<CorpusSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSection {
    pub n: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSection {
    pub resolution: usize,
    pub delta: f64,
    pub fill_interior: bool,
    pub normalize_class_constants: bool,
    /// Fitted to the rendered scenes when absent.
    pub window: Option<ViewWindow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpecNames {
    pub anchor: String,
    pub second: String,
}

/// What `eval` measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    pub samples: usize,
    pub grid: usize,
    /// Half-width in meters of the anchor-frame window of pair heatmaps.
    pub extent: f64,
    pub pairs: Vec<PairSpecNames>,
    /// Categories for absolute heatmaps; empty means the `top` most frequent.
    pub absolute: Vec<String>,
    pub top: usize,
    /// Number of generated scenes also written as SVG.
    pub renders: usize,
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    /// 0 means one worker per available core.
    pub threads: usize,
    pub out: PathBuf,
    pub inputs: Vec<(String, PathBuf)>,
    pub corpus: CorpusSection,
    pub align: AlignConfig,
    pub train: TrainConfig,
    pub synth: SynthSection,
    pub complete: CompletionConfig,
    pub render: RenderSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            seed: 0,
            threads: 0,
            out: PathBuf::from("out"),
            inputs: Vec::new(),
            corpus: CorpusSection {
                room: "bedroom".into(),
                descriptor_dim: 4,
                categories: None,
                spec: None,
            },
            align: AlignConfig::default(),
            train: TrainConfig::default(),
            synth: SynthSection { n: 16, steps: 8 },
            complete: CompletionConfig::default(),
            render: RenderSection {
                resolution: DEFAULT_RESOLUTION,
                delta: DEFAULT_DELTA,
                fill_interior: false,
                normalize_class_constants: false,
                window: None,
            },
            eval: EvalSection {
                samples: 2000,
                grid: 16,
                extent: 3.0,
                pairs: Vec::new(),
                absolute: Vec::new(),
                top: 2,
                renders: 8,
            },
        }
    }
}

/// Overwrites `base` with every field present in `over`, recursing into
/// objects.
pub fn merge_json(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

impl RunConfig {
    /// Defaults overlaid with a (possibly partial) JSON config file.
    pub fn from_file(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let over: Value = serde_json::from_slice(&std::fs::read(path)?).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if !over.is_object() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: "config must be a JSON object".into(),
            });
        }
        let mut base = serde_json::to_value(Self::default())?;
        merge_json(&mut base, &over);
        serde_json::from_value(base).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Fills in the corpus defaults and pushes the run seed into every stage.
    pub fn resolve(&mut self) -> Result<()> {
        let d = self.corpus.descriptor_dim;
        let (categories, spec) = match self.corpus.room.as_str() {
            "bedroom" => (bedroom_config(d)?, default_bedroom_spec()),
            "livingroom" => (livingroom_config(d)?, default_livingroom_spec()),
            other => return Err(Error::Config(format!("unknown room `{other}`"))),
        };
        let categories = self.corpus.categories.get_or_insert(categories).clone();
        let spec = self.corpus.spec.get_or_insert(spec);
        spec.seed = self.seed;
        spec.validate(&categories)?;
        self.train.seed = self.seed;
        self.complete.seed = self.seed;
        self.train.validate()?;
        self.complete.validate()?;
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(RUN_CONFIG_FILE), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

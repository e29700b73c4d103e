//! Run configuration. Precedence, lowest first: built-in defaults, the TOML
//! file given with `--config`, command-line flags.

use std::path::Path;

use anyhow::{bail, Context};
use editflow::baselines::BaselineMethod;
use editflow::benchmark::EvalConfig;
use editflow::metrics::MetricsConfig;
use editflow::ratemodel::{EncoderKind, RateActivation};
use editflow::sampler::{CalibrationConfig, SamplerConfig};
use editflow::synthetic::FamilyConfig;
use editflow::trainer::{SplitFractions, TrainConfig};
use editflow::{Alphabet, ModelConfig, Schedule, ScoringScheme};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

const CRC64: crc::Crc<u64> = crc::Crc::<u64>::new(&crc::CRC_64_ECMA_182);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Every random stream of a run derives from this seed.
    pub seed: u64,
    /// `amino`, or the literal symbols such as `ACGT`. Unset means amino
    /// acids, or the checkpoint's alphabet where there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<String>,
    pub scoring: ScoringConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub split: SplitFractions,
    pub sampler: SamplerConfig,
    pub calibration: CalibrationConfig,
    pub sample: SampleSection,
    pub baseline: BaselineSection,
    pub metrics: MetricsConfig,
    pub bench: BenchSection,
    pub synth: FamilyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            alphabet: None,
            scoring: ScoringConfig::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            split: SplitFractions::default(),
            sampler: SamplerConfig::default(),
            calibration: CalibrationConfig::default(),
            sample: SampleSection::default(),
            baseline: BaselineSection::default(),
            metrics: MetricsConfig::default(),
            bench: BenchSection::default(),
            synth: FamilyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    /// `auto` (BLOSUM62 for amino-acid alphabets, match/mismatch otherwise),
    /// `blosum62` or `match_mismatch`.
    pub matrix: String,
    pub matched: i32,
    pub mismatched: i32,
    /// Unset: 10 for BLOSUM62, 3 for match/mismatch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_open: Option<i32>,
    pub gap_extend: i32,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            matrix: "auto".into(),
            matched: 2,
            mismatched: -1,
            gap_open: None,
            gap_extend: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EncoderChoice {
    Transformer,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub encoder: EncoderChoice,
    pub window: usize,
    pub layers: usize,
    pub heads: usize,
    pub embed_dim: usize,
    /// Unset: `embed_dim`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_hidden: Option<usize>,
    pub rate_activation: RateActivation,
    pub schedule_scaling: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            encoder: EncoderChoice::Transformer,
            window: 11,
            layers: 2,
            heads: 4,
            embed_dim: 64,
            head_hidden: None,
            rate_activation: RateActivation::Softplus,
            schedule_scaling: true,
        }
    }
}

impl ModelSection {
    pub fn window(window: usize, dim: usize) -> Self {
        Self {
            encoder: EncoderChoice::Window,
            window,
            embed_dim: dim,
            ..Self::default()
        }
    }

    pub fn build(&self, alphabet: &Alphabet) -> ModelConfig {
        let encoder = match self.encoder {
            EncoderChoice::Transformer => EncoderKind::MiniTransformer {
                layers: self.layers,
                heads: self.heads,
            },
            EncoderChoice::Window => EncoderKind::WindowMlp {
                window: self.window,
            },
        };
        ModelConfig {
            alphabet: alphabet.clone(),
            encoder,
            embed_dim: self.embed_dim,
            head_hidden: self.head_hidden.unwrap_or(self.embed_dim),
            rate_activation: self.rate_activation,
            schedule_scaling: self.schedule_scaling.then_some(Schedule::Linear),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    /// Outputs per input sequence.
    pub num: usize,
    pub euler: bool,
    /// Calibrate the clock to this mean edit count before sampling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_edits: Option<f64>,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            num: 1,
            euler: false,
            target_edits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub method: BaselineMethod,
    pub expected_edits: f64,
    pub temperature: f64,
    /// Smoothing weight of the column profile.
    pub alpha: f64,
    pub match_edit_count: bool,
    pub num: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            method: BaselineMethod::ProfileInfill,
            expected_edits: 3.0,
            temperature: 1.0,
            alpha: 1.0,
            match_edit_count: true,
            num: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub train_cases: usize,
    pub eval_cases: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub clocks: Vec<f64>,
    pub eval: EvalConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
}

impl Default for BenchSection {
    fn default() -> Self {
        let mut model = ModelSection::window(11, 32);
        model.head_hidden = Some(32);
        Self {
            train_cases: 2000,
            eval_cases: 100,
            min_len: 50,
            max_len: 300,
            clocks: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            eval: EvalConfig::default(),
            model,
            train: TrainConfig {
                steps: 3000,
                learning_rate: 3e-3,
                batch_size: 4,
                symmetric: false,
                ..TrainConfig::default()
            },
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with `path`, which must carry a matching
    /// `schema_version`.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let raw: toml::Table = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        match raw.get("schema_version").and_then(|v| v.as_integer()) {
            Some(v) if v == SCHEMA_VERSION as i64 => {}
            Some(v) => bail!(
                "config {} has schema_version {v}; this build reads {SCHEMA_VERSION}",
                path.display()
            ),
            None => bail!(
                "config {} lacks schema_version (expected {SCHEMA_VERSION})",
                path.display()
            ),
        }
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Propagates the top-level seed into every section that carries one.
    pub fn sync_seeds(&mut self) {
        self.train.seed = self.seed;
        self.sampler.seed = self.seed;
        self.bench.train.seed = self.seed;
        self.bench.eval.seed = self.seed;
    }

    /// CRC-64 of the canonical JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", CRC64.checksum(json.as_bytes()))
    }

    pub fn alphabet(&self) -> anyhow::Result<Alphabet> {
        parse_alphabet(self.alphabet.as_deref().unwrap_or("amino"))
    }

    pub fn scoring(&self, alphabet: &Alphabet) -> anyhow::Result<ScoringScheme> {
        let s = &self.scoring;
        // ACGT letters are also amino letters, so nucleotide sets are excluded.
        let nucleotide = alphabet.symbols().iter().all(|c| b"ACGTUN".contains(c));
        let amino_subset = !nucleotide
            && alphabet
                .symbols()
                .iter()
                .all(|c| Alphabet::amino().index(*c).is_some());
        let matrix = match s.matrix.as_str() {
            "auto" if amino_subset => "blosum62",
            "auto" => "match_mismatch",
            m => m,
        };
        let shared = std::sync::Arc::new(alphabet.clone());
        Ok(match matrix {
            "blosum62" => {
                if s.gap_extend < 0 || s.gap_open.is_some_and(|g| g < 0) {
                    bail!("gap penalties must be non-negative");
                }
                let mut scheme = ScoringScheme::blosum62_for(shared)?;
                scheme.gap_open = s.gap_open.unwrap_or(10);
                scheme.gap_extend = s.gap_extend;
                scheme
            }
            "match_mismatch" => ScoringScheme::match_mismatch(
                shared,
                s.matched,
                s.mismatched,
                s.gap_open.unwrap_or(3),
                s.gap_extend,
            )?,
            other => {
                bail!("unknown scoring matrix {other:?}; use auto, blosum62 or match_mismatch")
            }
        })
    }
}

pub fn parse_alphabet(spec: &str) -> anyhow::Result<Alphabet> {
    if spec.eq_ignore_ascii_case("amino") {
        return Ok(Alphabet::amino());
    }
    Alphabet::new(spec.as_bytes(), b'-').with_context(|| format!("alphabet {spec:?}"))
}

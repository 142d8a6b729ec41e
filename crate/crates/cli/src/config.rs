//! Flat `key = value` run configuration.
//!
//! Every key has a default; `#` starts a comment. Values spelled `auto`
//! resolve per model at run time.

use std::fmt::Write as _;
use std::path::Path;

use caasr::baselines::KnnQuery;
use caasr::model::NegativeSampling;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Caasr,
    Gru4Rec,
    Bpr,
    BprKnn,
    PCofactor,
    PGraphAe,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        Self::Caasr,
        Self::Gru4Rec,
        Self::Bpr,
        Self::BprKnn,
        Self::PCofactor,
        Self::PGraphAe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Caasr => "caasr",
            Self::Gru4Rec => "gru4rec",
            Self::Bpr => "bpr",
            Self::BprKnn => "bpr_knn",
            Self::PCofactor => "p_cofactor",
            Self::PGraphAe => "p_graphae",
        }
    }

    /// Latent size used when `latent_dim = auto`.
    pub fn default_latent_dim(self) -> usize {
        match self {
            Self::Bpr | Self::Gru4Rec | Self::PCofactor => 50,
            Self::PGraphAe => 100,
            Self::Caasr | Self::BprKnn => 300,
        }
    }

    /// Learning rate used when `learning_rate = auto`.
    pub fn default_learning_rate(self) -> f64 {
        match self {
            Self::Caasr | Self::PGraphAe => 0.001,
            _ => 0.01,
        }
    }
}

pub trait ConfigValue: Sized {
    fn parse(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("{s:?}: {e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
from_str_value!(usize, u64, f64, bool, String);

impl<T: ConfigValue> ConfigValue for Option<T> {
    fn parse(s: &str) -> Result<Self, String> {
        if s == "auto" {
            Ok(None)
        } else {
            T::parse(s).map(Some)
        }
    }
    fn render(&self) -> String {
        self.as_ref().map_or_else(|| "auto".into(), T::render)
    }
}

impl ConfigValue for Vec<usize> {
    fn parse(s: &str) -> Result<Self, String> {
        s.split(',').map(|p| usize::parse(p.trim())).collect()
    }
    fn render(&self) -> String {
        self.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

impl ConfigValue for ModelKind {
    fn parse(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|m| m.name()).collect();
                format!("unknown model {s:?}; expected one of {}", names.join(", "))
            })
    }
    fn render(&self) -> String {
        self.name().into()
    }
}

impl ConfigValue for NegativeSampling {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "in_batch" => Ok(Self::InBatch),
            _ => match s.strip_prefix("uniform:") {
                Some(n) => usize::parse(n).map(Self::Uniform),
                None => Err(format!("{s:?}: expected in_batch or uniform:<count>")),
            },
        }
    }
    fn render(&self) -> String {
        match self {
            Self::InBatch => "in_batch".into(),
            Self::Uniform(n) => format!("uniform:{n}"),
        }
    }
}

impl ConfigValue for KnnQuery {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "last" => Ok(Self::LastItem),
            "mean" => Ok(Self::MeanHistory),
            _ => Err(format!("{s:?}: expected last or mean")),
        }
    }
    fn render(&self) -> String {
        match self {
            Self::LastItem => "last".into(),
            Self::MeanHistory => "mean".into(),
        }
    }
}

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $key:ident : $ty:ty = $default:expr;)*) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $key: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
                let value = value.trim();
                match key.trim() {
                    $(stringify!($key) => {
                        self.$key = ConfigValue::parse(value)
                            .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))?;
                    })*
                    other => return Err(CliError::Usage(format!("unknown config key {other:?}"))),
                }
                Ok(())
            }

            /// Every key with its effective value, one per line.
            pub fn dump(&self) -> String {
                let mut out = String::new();
                $(writeln!(out, "{} = {}", stringify!($key), ConfigValue::render(&self.$key)).unwrap();)*
                out
            }
        }
    };
}

run_config! {
    /// Interaction log: `user<TAB>item<TAB>timestamp`.
    input: String = String::new();
    /// Drop users with fewer events.
    min_user: usize = 5;
    /// Drop items with fewer events.
    min_item: usize = 5;
    max_user: Option<usize> = None;
    min_unique: usize = 0;
    split_ratio: f64 = 0.8;
    /// Defaults to `seed`.
    split_seed: Option<u64> = None;
    graph_threshold: u64 = 2;
    sppmi_shift: f64 = 1.0;
    model: ModelKind = ModelKind::Caasr;
    latent_dim: Option<usize> = None;
    cheb_order: usize = 5;
    dropout_rate: f64 = 0.2;
    batch_size: usize = 50;
    learning_rate: Option<f64> = None;
    l2_lambda: f64 = 0.0;
    max_epochs: usize = 30;
    negatives: NegativeSampling = NegativeSampling::InBatch;
    rms_decay: f64 = 0.9;
    rms_epsilon: f64 = 1e-8;
    bpr_reg: f64 = 0.01;
    bpr_negatives: usize = 1;
    knn_query: KnnQuery = KnnQuery::LastItem;
    factor_weight: f64 = 1.0;
    /// Encoder order for p_graphae; defaults to `cheb_order`.
    gae_order: Option<usize> = None;
    neg_multiplier: usize = 5;
    link_weight: f64 = 1.0;
    tie_weight: f64 = 1.0;
    ks: Vec<usize> = vec![10, 20];
    exclude_seen: bool = false;
    seed: u64 = 0;
    synth_items: usize = 300;
    synth_sequences: usize = 2000;
    synth_len_min: usize = 5;
    synth_len_max: usize = 15;
    synth_bundles: usize = 30;
    synth_bundle_size: usize = 5;
    synth_markov_weight: f64 = 0.5;
    synth_markov_fanout: usize = 3;
}

impl RunConfig {
    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// `key=value` override from the command line.
    pub fn apply_override(&mut self, kv: &str) -> CliResult<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {kv:?}")))?;
        self.set(k, v)
    }

    pub fn latent_dim_for(&self, model: ModelKind) -> usize {
        self.latent_dim.unwrap_or_else(|| model.default_latent_dim())
    }

    pub fn learning_rate_for(&self, model: ModelKind) -> f64 {
        self.learning_rate.unwrap_or_else(|| model.default_learning_rate())
    }

    pub fn gae_order(&self) -> usize {
        self.gae_order.unwrap_or(self.cheb_order)
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.seed)
    }
}

use std::fmt;
use std::str::FromStr;

use crate::augmentations::AugmentVariant;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::propagation::Side;

/// Branch used as the contrastive view of one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewKind {
    Perturb,
    Hypergraph,
    NodeDrop,
    EdgeDrop,
    RandomWalk,
}

impl ViewKind {
    pub const ALL: [ViewKind; 5] = [ViewKind::Perturb, ViewKind::Hypergraph, ViewKind::NodeDrop, ViewKind::EdgeDrop, ViewKind::RandomWalk];

    pub fn name(self) -> &'static str {
        match self {
            ViewKind::Perturb => "perturb",
            ViewKind::Hypergraph => "hypergraph",
            ViewKind::NodeDrop => "node_drop",
            ViewKind::EdgeDrop => "edge_drop",
            ViewKind::RandomWalk => "random_walk",
        }
    }

    pub fn augmentation(self) -> Option<AugmentVariant> {
        match self {
            ViewKind::NodeDrop => Some(AugmentVariant::NodeDrop),
            ViewKind::EdgeDrop => Some(AugmentVariant::EdgeDrop),
            ViewKind::RandomWalk => Some(AugmentVariant::RandomWalk),
            _ => None,
        }
    }
}

/// Named pairings of user and item views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubviewMode {
    /// Hypergraph users, perturbed items.
    Busgcl,
    HypBoth,
    PerBoth,
    /// Perturbed users, hypergraph items.
    Reversed,
}

impl SubviewMode {
    pub const ALL: [SubviewMode; 4] = [SubviewMode::PerBoth, SubviewMode::HypBoth, SubviewMode::Reversed, SubviewMode::Busgcl];

    pub fn name(self) -> &'static str {
        match self {
            SubviewMode::Busgcl => "busgcl",
            SubviewMode::HypBoth => "hyp_both",
            SubviewMode::PerBoth => "per_both",
            SubviewMode::Reversed => "reversed",
        }
    }

    /// `(user_view, item_view)`.
    pub fn views(self) -> (ViewKind, ViewKind) {
        match self {
            SubviewMode::Busgcl => (ViewKind::Hypergraph, ViewKind::Perturb),
            SubviewMode::HypBoth => (ViewKind::Hypergraph, ViewKind::Hypergraph),
            SubviewMode::PerBoth => (ViewKind::Perturb, ViewKind::Perturb),
            SubviewMode::Reversed => (ViewKind::Perturb, ViewKind::Hypergraph),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DispMode {
    Dispersing,
    Kl,
    None,
}

impl DispMode {
    pub const ALL: [DispMode; 3] = [DispMode::Dispersing, DispMode::Kl, DispMode::None];

    pub fn name(self) -> &'static str {
        match self {
            DispMode::Dispersing => "dispersing",
            DispMode::Kl => "kl",
            DispMode::None => "none",
        }
    }
}

macro_rules! named_enum {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                <$ty>::ALL.iter().copied().find(|v| v.name() == s).ok_or_else(|| {
                    let valid: Vec<&str> = <$ty>::ALL.iter().map(|v| v.name()).collect();
                    Error::InvalidArgument(format!("unknown {} `{s}` (valid: {})", $what, valid.join(", ")))
                })
            }
        }
    };
}

named_enum!(ViewKind, "view");
named_enum!(SubviewMode, "subview mode");
named_enum!(DispMode, "dispersing mode");

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub dim: usize,
    pub layers: usize,
    pub hyperedges: usize,
    pub radius: f64,
    pub weights: LossWeights,
    pub learning_rate: f64,
    pub decay_ratio: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Validation interval in epochs; 0 disables validation.
    pub eval_every: usize,
    pub seed: u64,
    pub user_view: ViewKind,
    pub item_view: ViewKind,
    pub disp_mode: DispMode,
    pub leaky_slope: f64,
    pub drop_ratio: f64,
    pub renormalize_drops: bool,
    /// Contrast and dispersing terms range over every user and item instead
    /// of the batch's nodes. Quadratic in the node count.
    pub full_denominator: bool,
    pub train_frac: f64,
    pub valid_frac: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        let (user_view, item_view) = SubviewMode::Busgcl.views();
        Self {
            dim: 32,
            layers: 3,
            hyperedges: 128,
            radius: 0.1,
            weights: LossWeights::default(),
            learning_rate: 1e-3,
            decay_ratio: 0.96,
            batch_size: 4096,
            epochs: 300,
            eval_every: 5,
            seed: 2024,
            user_view,
            item_view,
            disp_mode: DispMode::Dispersing,
            leaky_slope: 0.5,
            drop_ratio: 0.1,
            renormalize_drops: false,
            full_denominator: false,
            train_frac: 0.8,
            valid_frac: 0.05,
        }
    }
}

/// Keys accepted by [`Hyperparams::set`], in the order they are written.
pub const CONFIG_KEYS: [&str; 24] = [
    "dim",
    "layers",
    "hyperedges",
    "radius",
    "lambda_c",
    "lambda_d",
    "lambda_r",
    "tau_c",
    "tau_d",
    "learning_rate",
    "decay_ratio",
    "batch_size",
    "epochs",
    "eval_every",
    "seed",
    "user_view",
    "item_view",
    "disp_mode",
    "leaky_slope",
    "drop_ratio",
    "renormalize_drops",
    "full_denominator",
    "train_frac",
    "valid_frac",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config { key: key.into(), message: format!("cannot parse `{value}`") })
}

fn config_err(key: &str, message: String) -> Error {
    Error::Config { key: key.into(), message }
}

impl Hyperparams {
    pub fn view(&self, side: Side) -> ViewKind {
        match side {
            Side::User => self.user_view,
            Side::Item => self.item_view,
        }
    }

    pub fn set_subview_mode(&mut self, mode: SubviewMode) {
        (self.user_view, self.item_view) = mode.views();
    }

    /// The named pairing matching the current views, if any.
    pub fn subview_mode(&self) -> Option<SubviewMode> {
        SubviewMode::ALL.into_iter().find(|m| m.views() == (self.user_view, self.item_view))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(config_err("dim", "must be >= 1".into()));
        }
        if self.layers == 0 {
            return Err(config_err("layers", "must be >= 1".into()));
        }
        if self.hyperedges == 0 {
            return Err(config_err("hyperedges", "must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(config_err("learning_rate", format!("must be > 0, got {}", self.learning_rate)));
        }
        if !(self.decay_ratio > 0.0 && self.decay_ratio <= 1.0) {
            return Err(config_err("decay_ratio", format!("must lie in (0, 1], got {}", self.decay_ratio)));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be >= 1".into()));
        }
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(config_err("radius", format!("must be finite and >= 0, got {}", self.radius)));
        }
        if !(0.0..=1.0).contains(&self.leaky_slope) {
            return Err(config_err("leaky_slope", format!("must lie in [0, 1], got {}", self.leaky_slope)));
        }
        if !(0.0..1.0).contains(&self.drop_ratio) {
            return Err(config_err("drop_ratio", format!("must lie in [0, 1), got {}", self.drop_ratio)));
        }
        if !(self.train_frac > 0.0 && self.train_frac <= 1.0) {
            return Err(config_err("train_frac", format!("must lie in (0, 1], got {}", self.train_frac)));
        }
        if !(self.valid_frac >= 0.0 && self.train_frac + self.valid_frac <= 1.0) {
            return Err(config_err("valid_frac", format!("must be >= 0 with train_frac + valid_frac <= 1, got {}", self.valid_frac)));
        }
        self.weights.validate()
    }

    /// Sets one field from its textual form. `subview_mode` is accepted as a
    /// shorthand that sets both views.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "dim" => self.dim = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "hyperedges" => self.hyperedges = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "lambda_c" => self.weights.lambda_c = parse(key, value)?,
            "lambda_d" => self.weights.lambda_d = parse(key, value)?,
            "lambda_r" => self.weights.lambda_r = parse(key, value)?,
            "tau_c" => self.weights.tau_c = parse(key, value)?,
            "tau_d" => self.weights.tau_d = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "decay_ratio" => self.decay_ratio = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "user_view" => self.user_view = value.parse().map_err(|e: Error| config_err(key, e.to_string()))?,
            "item_view" => self.item_view = value.parse().map_err(|e: Error| config_err(key, e.to_string()))?,
            "subview_mode" => {
                let mode: SubviewMode = value.parse().map_err(|e: Error| config_err(key, e.to_string()))?;
                self.set_subview_mode(mode);
            }
            "disp_mode" => self.disp_mode = value.parse().map_err(|e: Error| config_err(key, e.to_string()))?,
            "leaky_slope" => self.leaky_slope = parse(key, value)?,
            "drop_ratio" => self.drop_ratio = parse(key, value)?,
            "renormalize_drops" => self.renormalize_drops = parse(key, value)?,
            "full_denominator" => self.full_denominator = parse(key, value)?,
            "train_frac" => self.train_frac = parse(key, value)?,
            "valid_frac" => self.valid_frac = parse(key, value)?,
            other => return Err(config_err(other, "unknown key".into())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let w = &self.weights;
        Some(match key {
            "dim" => self.dim.to_string(),
            "layers" => self.layers.to_string(),
            "hyperedges" => self.hyperedges.to_string(),
            "radius" => self.radius.to_string(),
            "lambda_c" => w.lambda_c.to_string(),
            "lambda_d" => w.lambda_d.to_string(),
            "lambda_r" => w.lambda_r.to_string(),
            "tau_c" => w.tau_c.to_string(),
            "tau_d" => w.tau_d.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "decay_ratio" => self.decay_ratio.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "seed" => self.seed.to_string(),
            "user_view" => self.user_view.to_string(),
            "item_view" => self.item_view.to_string(),
            "disp_mode" => self.disp_mode.to_string(),
            "leaky_slope" => self.leaky_slope.to_string(),
            "drop_ratio" => self.drop_ratio.to_string(),
            "renormalize_drops" => self.renormalize_drops.to_string(),
            "full_denominator" => self.full_denominator.to_string(),
            "train_frac" => self.train_frac.to_string(),
            "valid_frac" => self.valid_frac.to_string(),
            _ => return None,
        })
    }

    /// `key = value` lines for every field. Floats use the shortest
    /// round-tripping form, so parsing the text restores the values exactly.
    pub fn to_config_text(&self) -> String {
        CONFIG_KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).expect("known key"))).collect()
    }

    /// Applies `key = value` lines on top of the defaults. Blank lines and
    /// `#` comments are skipped; unknown keys are errors.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut hp = Self::default();
        hp.apply_config_text(text)?;
        Ok(hp)
    }

    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_config_lines(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    /// FNV-1a of the config text, as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_config_text().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Splits `key = value` text into pairs, dropping comments and blank lines.
pub fn parse_config_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: n + 1, message: format!("expected `key = value`, got `{raw}`") })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

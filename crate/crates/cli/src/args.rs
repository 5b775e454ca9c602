use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "busgcl", version, about = "Train and evaluate bilateral graph contrastive recommenders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split, build the graph, train, and evaluate on the test split.
    Train(TrainArgs),
    /// Evaluate a run directory's checkpoint on its stored split.
    Evaluate(EvaluateArgs),
    /// Train a grid of variants on one shared split and tabulate the results.
    Ablate(AblateArgs),
    /// Write final (or base) embeddings and a 2-D projection as TSV.
    ExportEmbeddings(ExportArgs),
    /// Compare analytic gradients against finite differences.
    GradCheck(GradCheckArgs),
}

/// Hyperparameter overrides shared by the training commands.
#[derive(Debug, Clone, Default, Args)]
pub struct HpArgs {
    /// key = value configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Interaction file: `user<TAB>item[<TAB>...]` per line.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Skip the first line of the interaction file.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hyperedges: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long, alias = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// busgcl, hyp_both, per_both or reversed.
    #[arg(long)]
    pub subview_mode: Option<String>,
    /// dispersing, kl or none.
    #[arg(long)]
    pub disp_mode: Option<String>,
    /// perturb, hypergraph, node_drop, edge_drop or random_walk.
    #[arg(long)]
    pub user_view: Option<String>,
    #[arg(long)]
    pub item_view: Option<String>,
    /// Any configuration key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

impl HpArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        if let Some(d) = &self.data {
            cfg.data = Some(d.clone());
        }
        if self.header {
            cfg.header = true;
        }
        let numeric = [
            ("dim", self.dim.map(|v| v.to_string())),
            ("layers", self.layers.map(|v| v.to_string())),
            ("hyperedges", self.hyperedges.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("eval_every", self.eval_every.map(|v| v.to_string())),
            ("learning_rate", self.learning_rate.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("subview_mode", self.subview_mode.clone()),
            ("disp_mode", self.disp_mode.clone()),
            ("user_view", self.user_view.clone()),
            ("item_view", self.item_view.clone()),
        ];
        for (key, value) in numeric {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for pair in &self.sets {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| crate::error::CliError::Usage(format!("--set expects KEY=VALUE, got `{pair}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run directory to create or overwrite.
    #[arg(long)]
    pub out: PathBuf,
    /// Ranking cutoffs for the final test report, e.g. 20,40.
    #[arg(long)]
    pub at: Option<String>,
    #[command(flatten)]
    pub hp: HpArgs,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Dataset path, overriding the one recorded in the run.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Ranking cutoffs, e.g. 20,40,50.
    #[arg(long)]
    pub at: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    Table3,
    Table4,
    Table5,
    Layers,
    Fig4,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub grid: Grid,
    /// Run only the named variants. Repeatable.
    #[arg(long)]
    pub only: Vec<String>,
    #[command(flatten)]
    pub hp: HpArgs,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Dataset path, overriding the one recorded in the run.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Export base embeddings instead of propagated readouts.
    #[arg(long)]
    pub raw: bool,
    /// Output directory; defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// key = value file selecting views, modes and loss weights.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub subview_mode: Option<String>,
    #[arg(long)]
    pub disp_mode: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod commands;
mod overlay;

/// Typed code hypergraphs and hypergraph adapter layers.
#[derive(Parser, Debug)]
#[command(name = "hgcode", disable_version_flag = true)]
struct Cli {
    /// Print toolkit and grammar versions
    #[arg(short = 'V', long)]
    version: bool,

    /// TOML or JSON file with defaults for the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract the token hypergraph of a file, or of every file in a directory
    Extract(ExtractArgs),
    /// Average tokens and hyperedges per snippet over a directory
    Stats(StatsArgs),
    /// Plain vs hypergraph adapter parameter counts
    Params(ParamsArgs),
    /// Finite-difference check of the adapter backward pass
    Gradcheck(GradcheckArgs),
    /// Train adapters on the synthetic clone-detection set
    TrainCloneDemo(DemoArgs),
    /// Run the invariant self-test suite
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExtractArgs {
    /// Source file or directory
    pub path: Option<PathBuf>,
    /// ruby, javascript, java, go, php or python; inferred from the file extension when omitted
    #[arg(long)]
    pub language: Option<String>,
    /// Byte-level BPE vocabulary file, or `demo` for the bundled one; default: fallback splitter
    #[arg(long, value_name = "VOCAB")]
    pub tokenizer: Option<String>,
    /// Leave comment leaves out of the token sequence
    #[arg(long)]
    pub exclude_comments: bool,
    /// Open AST family hyperedges only at nodes with leaf children
    #[arg(long)]
    pub direct_parents_only: bool,
    /// Minimum size of AST family and lexical hyperedges [default: 3]
    #[arg(long, value_name = "N")]
    pub min_tokens: Option<usize>,
    /// Hyperedge types to drop, e.g. `lexical,line`
    #[arg(long, value_name = "TYPES")]
    pub ablate: Option<String>,
    /// Truncate to the first K tokens
    #[arg(long, value_name = "K")]
    pub max_tokens: Option<usize>,
    /// Write the JSON here instead of standard output
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct StatsArgs {
    /// Directory searched recursively for source files
    pub dir: Option<PathBuf>,
    /// ruby, javascript, java, go, php or python; inferred from the file extension when omitted
    #[arg(long)]
    pub language: Option<String>,
    /// Byte-level BPE vocabulary file, or `demo` for the bundled one; default: fallback splitter
    #[arg(long, value_name = "VOCAB")]
    pub tokenizer: Option<String>,
    /// Leave comment leaves out of the token sequence
    #[arg(long)]
    pub exclude_comments: bool,
    /// Open AST family hyperedges only at nodes with leaf children
    #[arg(long)]
    pub direct_parents_only: bool,
    /// Minimum size of AST family and lexical hyperedges [default: 3]
    #[arg(long, value_name = "N")]
    pub min_tokens: Option<usize>,
    /// Print JSON instead of a table
    #[arg(long)]
    pub json: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ParamsArgs {
    /// Host layer count; omit together with --hidden for the reference table
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Adapter bottleneck width [default: 64]
    #[arg(long)]
    pub bottleneck: Option<usize>,
    /// Host model size for the share column, e.g. `125M` or `6.7B`
    #[arg(long, value_name = "COUNT")]
    pub plm_params: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random instances [default: 100]
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DemoArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hyperedge types to drop, or `all` for a plain adapter
    #[arg(long, value_name = "TYPES")]
    pub ablate: Option<String>,
    /// desk, clone or summarization
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub val_size: Option<usize>,
    /// Frozen encoder layers
    #[arg(long)]
    pub layers: Option<usize>,
    /// Print the report as JSON instead of a table
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report here
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Write the trained adapter and head tensors here
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SelftestArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
}

/// A usage error: bad flags, config or paths. Exits with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// A check that ran and failed. Exits with status 1 without further output.
#[derive(Debug)]
pub struct CheckFailed;

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("check failed")
    }
}

impl std::error::Error for CheckFailed {}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.version {
        print!("{}", commands::version_text());
        return Ok(());
    }
    let config = cli.config.as_deref();
    match cli.command {
        None => Err(Usage("no subcommand given; see `hgcode --help`".into()).into()),
        Some(Command::Extract(a)) => commands::extract(overlay::apply(a, config)?),
        Some(Command::Stats(a)) => commands::stats(overlay::apply(a, config)?),
        Some(Command::Params(a)) => commands::params(overlay::apply(a, config)?),
        Some(Command::Gradcheck(a)) => commands::gradcheck(overlay::apply(a, config)?),
        Some(Command::TrainCloneDemo(a)) => commands::train_clone_demo(overlay::apply(a, config)?),
        Some(Command::Selftest(a)) => commands::selftest(overlay::apply(a, config)?),
    }
}

fn main() -> ExitCode {
    // clap reports its own usage errors with status 2.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<CheckFailed>().is_some() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use commands::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "hiereval",
    version,
    about = "Hierarchical segmentation evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a dataset's structure and optional expected counts
    Validate(ValidateArgs),
    /// Dataset shape statistics and plot data
    Stats(StatsArgs),
    /// Score segmentation predictions
    Eval(EvalArgs),
    /// Score yes/no recognition answers
    Recog(RecogArgs),
    /// Fit IoU against ln(region size)
    Regress(RegressArgs),
    /// Merge eval and recog outputs into tables
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
    /// Reject unknown keys and any invalid record
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug, Clone)]
pub struct Workers {
    /// Worker threads for per-image work
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: Option<u32>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Dataset JSON file
    #[arg(long)]
    pub dataset: PathBuf,
    /// Expected count, e.g. `images=10387` or `splits=8828,519,1040`
    #[arg(long, value_name = "K=V")]
    pub expect: Vec<String>,
    /// Prediction files to check against the dataset
    #[arg(long)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Query)]
    pub mode: Mode,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Dataset JSON file
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset JSON file
    #[arg(long)]
    pub dataset: PathBuf,
    /// Prediction file; repeat for several methods
    #[arg(long, required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Query)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = AveragingArg::PerQuery)]
    pub averaging: AveragingArg,
    #[arg(long, value_enum, default_value_t = SpecificityArg::Both)]
    pub specificity: SpecificityArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Args, Debug)]
pub struct RecogArgs {
    /// Dataset JSON file
    #[arg(long)]
    pub dataset: PathBuf,
    /// Answer file; repeat for several methods
    #[arg(long, required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct RegressArgs {
    /// Dataset JSON file
    #[arg(long)]
    pub dataset: PathBuf,
    /// Prediction file; repeat to fit each method separately
    #[arg(long, required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Query)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = SpecificityArg::Both)]
    pub specificity: SpecificityArg,
    /// How points are pooled before fitting
    #[arg(long, value_enum, default_value_t = GroupByArg::Level)]
    pub group_by: GroupByArg,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `eval.json` and `recog.json` files written by earlier runs
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Md)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Query,
    Semantic,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingArg {
    PerQuery,
    PerCategory,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecificityArg {
    General,
    Specific,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Md,
    Svg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupByArg {
    Level,
    Category,
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => commands::validate(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Recog(a) => commands::recog(&a),
        Command::Regress(a) => commands::regress(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{}: {e}",
                output::paint("error", output::Color::Red, output::stderr_color())
            );
            ExitCode::from(e.code())
        }
    }
}

impl From<Mode> for hiereval::dataset::PredictionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Query => Self::Query,
            Mode::Semantic => Self::Semantic,
        }
    }
}

impl From<AveragingArg> for hiereval::metrics::Averaging {
    fn from(a: AveragingArg) -> Self {
        match a {
            AveragingArg::PerQuery => Self::PerQuery,
            AveragingArg::PerCategory => Self::PerCategory,
        }
    }
}

impl From<GroupByArg> for hiereval::analysis::GroupBy {
    fn from(g: GroupByArg) -> Self {
        match g {
            GroupByArg::Level => Self::Level,
            GroupByArg::Category => Self::Category,
            GroupByArg::All => Self::All,
        }
    }
}

impl SpecificityArg {
    fn as_str(self) -> &'static str {
        match self {
            SpecificityArg::General => "general",
            SpecificityArg::Specific => "specific",
            SpecificityArg::Both => "both",
        }
    }

    fn selected(self) -> Vec<hiereval::Specificity> {
        use hiereval::Specificity;
        match self {
            SpecificityArg::General => vec![Specificity::General],
            SpecificityArg::Specific => vec![Specificity::Specific],
            SpecificityArg::Both => Specificity::ALL.to_vec(),
        }
    }
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Md => "md",
            Format::Svg => "svg",
        }
    }

    fn table(self) -> Result<hiereval::metrics::TableFormat, CliError> {
        match self {
            Format::Csv => Ok(hiereval::metrics::TableFormat::Csv),
            Format::Md => Ok(hiereval::metrics::TableFormat::Markdown),
            Format::Svg => Err(CliError::Usage("tables support --format csv or md".into())),
        }
    }
}

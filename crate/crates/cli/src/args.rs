//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ustat::bootstrap::{Procedure, Statistic};
use ustat::hajek::{HajekMethod, RsNorm};
use ustat::sim::BudgetRule;
use ustat::{RankKernel, SamplingVariant};

#[derive(Debug, Parser)]
#[command(
    name = "ustat",
    version,
    about = "Randomized incomplete U-statistics with multiplier-bootstrap inference"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true, env = "USTAT_SEED", default_value_t = 0)]
    pub seed: u64,

    /// kendall, spearman, bergsma-dassios or hoeffding-d.
    #[arg(long, global = true, default_value = "spearman")]
    pub kernel: RankKernel,

    /// bernoulli, bernoulli-det or replacement.
    #[arg(long, global = true, default_value = "bernoulli")]
    pub sampling: SamplingVariant,

    /// Computational budget N: a count or a rule such as 2n, n^4/3, 4n^3/2.
    #[arg(long, global = true, default_value = "2n")]
    pub budget: BudgetRule,

    /// Number of bootstrap replicates.
    #[arg(long = "B", global = true, default_value_t = 200)]
    pub replicates: usize,

    /// mb-dg, mb-ndg-dc, mb-ndg-rs or mb-ndg-partial-a [default: by kernel].
    #[arg(long, global = true)]
    pub bootstrap: Option<Procedure>,

    /// max-abs (two-sided) or max (one-sided).
    #[arg(long, global = true, default_value = "max-abs")]
    pub statistic: Statistic,

    /// Comma-separated significance levels.
    #[arg(long = "alpha", global = true, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,

    /// Keep every replicate vector in the output.
    #[arg(long, global = true)]
    pub store_replicates: bool,

    /// Projection estimator: dc, rs or jackknife [default: by procedure].
    #[arg(long, global = true)]
    pub hajek: Option<HajekMethod>,

    /// Number of divide-and-conquer blocks K.
    #[arg(long = "dc-K", global = true)]
    pub dc_k: Option<usize>,

    /// Divide-and-conquer block size L.
    #[arg(long = "dc-L", global = true)]
    pub dc_l: Option<usize>,

    /// Random-sampling projection budget M.
    #[arg(long = "rs-M", global = true)]
    pub rs_m: Option<u64>,

    /// Random-sampling normalization: m or mhat.
    #[arg(long = "rs-norm", global = true)]
    pub rs_norm: Option<RsNorm>,

    /// Use the first n1 observations as S1.
    #[arg(long = "s1-size", global = true)]
    pub s1_size: Option<usize>,

    /// Output file (JSON) or, for simulate and bench, output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads [default: available parallelism].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Incomplete U-statistic of a data file.
    Estimate { data: PathBuf },
    /// Max-type test of pairwise independence.
    Test { data: PathBuf },
    /// Complete U-statistic and, optionally, jackknife projections.
    Oracle {
        data: PathBuf,
        #[arg(long)]
        jackknife: bool,
    },
    /// Monte Carlo experiments.
    Simulate(SimulateArgs),
    /// Timing study over a grid of sample sizes.
    Bench(BenchArgs),
    /// Re-run a stored result from its manifest and compare outputs.
    Replay {
        /// JSON document written by estimate, test, oracle or simulate.
        result: PathBuf,
        /// Data file to use instead of the recorded path.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Rejection rates over a level grid under the null.
    Size,
    /// P-P comparison of the max statistic with its Gaussian limit.
    Pp,
    /// Spearman estimates on bivariate normal data.
    Copula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    NoncentralT,
    Uniform,
    GaussianPair,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "size")]
    pub experiment: Experiment,

    /// Experiment description in JSON; replaces the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, default_value_t = 300)]
    pub n: usize,

    #[arg(long, default_value_t = 30)]
    pub p: usize,

    #[arg(long, default_value_t = 100)]
    pub reps: usize,

    #[arg(long, value_enum, default_value = "noncentral-t")]
    pub generator: GeneratorKind,

    #[arg(long, default_value_t = 3.0)]
    pub df: f64,

    #[arg(long, default_value_t = 2.0)]
    pub ncp: f64,

    /// Correlation for gaussian-pair data and the copula experiment.
    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    pub correlation: f64,

    /// Replications for the P-P reference distribution.
    #[arg(long, default_value_t = 2000)]
    pub pp_reference_reps: usize,

    /// Auxiliary sample size for the P-P reference covariance.
    #[arg(long, default_value_t = 2000)]
    pub pp_aux_size: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "300,600,1200")]
    pub ns: Vec<usize>,

    #[arg(long, default_value_t = 30)]
    pub p: usize,

    /// Timed runs per sample size; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub runs: usize,

    /// Time with all worker threads instead of one.
    #[arg(long)]
    pub bench_parallel: bool,
}

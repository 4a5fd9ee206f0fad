use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ntk_core::mcnet::DEFAULT_REPLICAS;
use serde::{Serialize, Serializer};

#[derive(Debug, Parser, Serialize)]
#[command(name = "ntk", version, about = "Angles and conditioning of deep ReLU tangent kernels")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Base seed; data, weights and shuffles use separate keyed streams.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Hidden width of sampled networks.
    #[arg(long, global = true)]
    pub width: Option<usize>,
    /// Depths as a list (`1,2,4`) or an inclusive range (`0..10`).
    #[arg(long, global = true)]
    pub depths: Option<DepthList>,
    /// Primary output file; a `.manifest.json` is written next to it.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Run independent replicas or depths on N threads (all cores if N is omitted).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "0")]
    pub parallel: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = NormalizeArg::Averaged)]
    pub normalize: NormalizeArg,
    /// `gaussian`, `blobs` or `csv:PATH`.
    #[arg(long, global = true)]
    pub data: Option<DataSource>,
    /// Number of synthetic samples.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Dimension of synthetic samples.
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Rescale every input row to unit norm.
    #[arg(long, global = true)]
    pub unit_norm: bool,
    /// Number of blob classes.
    #[arg(long, global = true)]
    pub classes: Option<usize>,
    /// Distance between blob class means.
    #[arg(long, global = true)]
    pub separation: Option<f64>,
    /// CSV input carries a label in its last column.
    #[arg(long, global = true)]
    pub labels: bool,
    /// CSV input starts with a header row.
    #[arg(long, global = true)]
    pub header: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Gradient angle against input angle for several depths.
    AngleCurve(AngleCurveArgs),
    /// Smallest gradient angle and kernel condition numbers across depths.
    DepthSweep(DepthSweepArgs),
    /// Monte Carlo checks of the Gaussian identities and infinite-width formulas.
    McValidate(McValidateArgs),
    /// Grid-searched SGD runs per depth, logging the loss per epoch.
    TrainSweep(TrainSweepArgs),
    /// Spectrum of a symmetric matrix stored as CSV.
    Eig(EigArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct AngleCurveArgs {
    /// First input angle in degrees.
    #[arg(long, default_value_t = 0.0)]
    pub theta_start: f64,
    /// Last input angle in degrees (inclusive).
    #[arg(long, default_value_t = 175.0)]
    pub theta_stop: f64,
    #[arg(long, default_value_t = 5.0)]
    pub theta_step: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DepthSweepArgs {
    #[arg(long, value_enum, default_value_t = SweepKind::Analytic)]
    pub kind: SweepKind,
    /// Networks averaged per depth in empirical mode.
    #[arg(long, default_value_t = DEFAULT_REPLICAS)]
    pub replicas: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct McValidateArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = DEFAULT_REPLICAS)]
    pub replicas: usize,
    /// Activation used by the angles suite.
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    pub activation: ActivationArg,
    /// Monte Carlo draws per lemma check.
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainSweepArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
    /// Candidate learning rates for the per-depth grid search.
    #[arg(long, default_value = "1,3,10,30")]
    pub rates: RateList,
    #[arg(long, value_enum, default_value_t = LossArg::CrossEntropy)]
    pub loss: LossArg,
    /// Converged once the loss is at most this fraction of the initial loss.
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EigArgs {
    /// Square symmetric matrix, one row per line.
    pub input: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeArg {
    Raw,
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemmas,
    Ntk,
    Angles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationArg {
    Relu,
    Identity,
}

impl ActivationArg {
    pub fn name(self) -> &'static str {
        match self {
            ActivationArg::Relu => "relu",
            ActivationArg::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    CrossEntropy,
    Square,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Gaussian,
    Blobs,
    Csv(PathBuf),
}

impl FromStr for DataSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(DataSource::Gaussian),
            "blobs" => Ok(DataSource::Blobs),
            _ => match s.strip_prefix("csv:") {
                Some(path) if !path.is_empty() => Ok(DataSource::Csv(PathBuf::from(path))),
                _ => Err(format!("expected gaussian, blobs or csv:PATH, got {s:?}")),
            },
        }
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Gaussian => f.write_str("gaussian"),
            DataSource::Blobs => f.write_str("blobs"),
            DataSource::Csv(path) => write!(f, "csv:{}", path.display()),
        }
    }
}

impl Serialize for DataSource {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct DepthList(pub Vec<usize>);

impl FromStr for DepthList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid depth {v:?}"))
        };
        let depths = if let Some((lo, hi)) = s.split_once("..") {
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi {
                return Err(format!("empty depth range {s:?}"));
            }
            (lo..=hi).collect()
        } else {
            s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?
        };
        if depths.is_empty() {
            return Err("no depths given".into());
        }
        Ok(DepthList(depths))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RateList(pub Vec<f64>);

impl FromStr for RateList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rates = s
            .split(',')
            .map(|v| match v.trim().parse::<f64>() {
                Ok(r) if r.is_finite() && r >= 0.0 => Ok(r),
                _ => Err(format!("invalid learning rate {v:?}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RateList(rates))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_lists() {
        assert_eq!("1,2,4".parse::<DepthList>().unwrap().0, vec![1, 2, 4]);
        assert_eq!("0..3".parse::<DepthList>().unwrap().0, vec![0, 1, 2, 3]);
        assert!("3..1".parse::<DepthList>().is_err());
        assert!("a".parse::<DepthList>().is_err());
    }

    #[test]
    fn data_sources() {
        assert_eq!("gaussian".parse::<DataSource>().unwrap(), DataSource::Gaussian);
        assert_eq!(
            "csv:/tmp/x.csv".parse::<DataSource>().unwrap(),
            DataSource::Csv(PathBuf::from("/tmp/x.csv"))
        );
        assert!("csv:".parse::<DataSource>().is_err());
        assert!("mnist".parse::<DataSource>().is_err());
        assert_eq!(DataSource::Csv("a.csv".into()).to_string(), "csv:a.csv");
    }

    #[test]
    fn rate_lists() {
        assert_eq!("0.1, 1".parse::<RateList>().unwrap().0, vec![0.1, 1.0]);
        assert!("-1".parse::<RateList>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

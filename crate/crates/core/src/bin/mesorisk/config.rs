//! Run configuration: built-in defaults, overridden by a flat TOML file,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use mesorisk::factor_model::ModelVariant;
use mesorisk::timeseries::{LoadOptions, Resolution};
use mesorisk::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StabilitySelection {
    Multiresolution,
    SlidingWindow,
    Both,
}

/// Fully resolved settings. Written to every manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub resolution: String,
    pub calibration_resolution: String,
    pub window: usize,
    pub stability: StabilitySelection,
    pub seed: u64,
    pub restarts: usize,
    pub include_below_bulk: bool,
    pub biased_baseline: bool,
    pub max_depth: usize,
    pub min_size: usize,
    pub variants: Option<Vec<ModelVariant>>,
    pub communities: Option<PathBuf>,
    pub calibrations: Vec<PathBuf>,
    pub portfolios: Vec<PathBuf>,
    pub paths: usize,
    pub alphas: Vec<f64>,
    pub aggregate_classes: bool,
    pub max_missing_fraction: f64,
    pub max_fill_gap: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            meta: None,
            resolution: "1d".into(),
            calibration_resolution: "1m".into(),
            window: 126,
            stability: StabilitySelection::Both,
            seed: 20_240_917,
            restarts: 10,
            include_below_bulk: true,
            biased_baseline: false,
            max_depth: 2,
            min_size: 4,
            variants: None,
            communities: None,
            calibrations: Vec::new(),
            portfolios: Vec::new(),
            paths: 1_000_000,
            alphas: vec![0.99, 0.995, 0.999],
            aggregate_classes: true,
            max_missing_fraction: LoadOptions::default().max_missing_fraction,
            max_fill_gap: LoadOptions::default().max_fill_gap,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Keys accepted in the configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    meta: Option<PathBuf>,
    resolution: Option<String>,
    calibration_resolution: Option<String>,
    window: Option<usize>,
    stability: Option<StabilitySelection>,
    seed: Option<u64>,
    restarts: Option<usize>,
    include_below_bulk: Option<bool>,
    biased_baseline: Option<bool>,
    max_depth: Option<usize>,
    min_size: Option<usize>,
    variants: Option<Vec<String>>,
    communities: Option<PathBuf>,
    calibrations: Option<Vec<PathBuf>>,
    portfolios: Option<Vec<PathBuf>>,
    paths: Option<usize>,
    alphas: Option<Vec<f64>>,
    aggregate_classes: Option<bool>,
    max_missing_fraction: Option<f64>,
    max_fill_gap: Option<usize>,
    out_dir: Option<PathBuf>,
}

/// Flags shared by the pipeline commands.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Long-format spread file `date,issuer_id,spread_bps`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Issuer metadata `issuer_id,region,sector[,rating]`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Return sampling for spectrum and detect: 1d, 2d, 1w, 2w, 1m or a step in days.
    #[arg(long)]
    pub resolution: Option<String>,
    /// Return sampling for calibration.
    #[arg(long)]
    pub calibration_resolution: Option<String>,
    /// Sliding-window length in returns.
    #[arg(long)]
    pub window: Option<usize>,
    /// Which stability analyses to run.
    #[arg(long, value_enum)]
    pub stability: Option<StabilitySelection>,
    /// Louvain restarts.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Keep below-bulk eigenmodes in the filtered matrix.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub include_below_bulk: Option<bool>,
    /// Degree-based null model instead of the spectral filter; comparison only.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub biased_baseline: Option<bool>,
    /// Hierarchy depth; 1 disables subcommunity search.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Smallest community considered for a further split.
    #[arg(long)]
    pub min_size: Option<usize>,
    /// Comma-separated model variants, e.g. `M1,M4,M6`.
    #[arg(long = "variant", value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Community document from `detect`.
    #[arg(long)]
    pub communities: Option<PathBuf>,
    /// Calibration documents for `simulate`; defaults to those in the output directory.
    #[arg(long = "calibration")]
    pub calibrations: Vec<PathBuf>,
    /// Portfolio files; defaults to the schematic portfolios A-D.
    #[arg(long = "portfolio")]
    pub portfolios: Vec<PathBuf>,
    /// Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Comma-separated VaR levels.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Simulate defaults per exchangeable issuer class instead of per position.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub aggregate_classes: Option<bool>,
}

fn relative_to(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

pub fn parse_variants(list: &[String]) -> Result<Vec<ModelVariant>> {
    let mut out: Vec<ModelVariant> = list.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Config("empty variant list".into()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn resolve(
        file: Option<&Path>,
        seed: Option<u64>,
        out_dir: Option<PathBuf>,
        o: &Overrides,
    ) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            let f: FileConfig = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new("."));
            let rel = |p: PathBuf| relative_to(base, p);
            c.input = f.input.map(rel).or(c.input);
            c.meta = f.meta.map(rel).or(c.meta);
            c.resolution = f.resolution.unwrap_or(c.resolution);
            c.calibration_resolution = f.calibration_resolution.unwrap_or(c.calibration_resolution);
            c.window = f.window.unwrap_or(c.window);
            c.stability = f.stability.unwrap_or(c.stability);
            c.seed = f.seed.unwrap_or(c.seed);
            c.restarts = f.restarts.unwrap_or(c.restarts);
            c.include_below_bulk = f.include_below_bulk.unwrap_or(c.include_below_bulk);
            c.biased_baseline = f.biased_baseline.unwrap_or(c.biased_baseline);
            c.max_depth = f.max_depth.unwrap_or(c.max_depth);
            c.min_size = f.min_size.unwrap_or(c.min_size);
            if let Some(v) = f.variants {
                c.variants = Some(parse_variants(&v)?);
            }
            c.communities = f.communities.map(rel).or(c.communities);
            if let Some(v) = f.calibrations {
                c.calibrations = v.into_iter().map(rel).collect();
            }
            if let Some(v) = f.portfolios {
                c.portfolios = v.into_iter().map(rel).collect();
            }
            c.paths = f.paths.unwrap_or(c.paths);
            c.alphas = f.alphas.unwrap_or(c.alphas);
            c.aggregate_classes = f.aggregate_classes.unwrap_or(c.aggregate_classes);
            c.max_missing_fraction = f.max_missing_fraction.unwrap_or(c.max_missing_fraction);
            c.max_fill_gap = f.max_fill_gap.unwrap_or(c.max_fill_gap);
            c.out_dir = f.out_dir.map(rel).unwrap_or(c.out_dir);
        }

        c.input = o.input.clone().or(c.input);
        c.meta = o.meta.clone().or(c.meta);
        c.resolution = o.resolution.clone().unwrap_or(c.resolution);
        c.calibration_resolution = o
            .calibration_resolution
            .clone()
            .unwrap_or(c.calibration_resolution);
        c.window = o.window.unwrap_or(c.window);
        c.stability = o.stability.unwrap_or(c.stability);
        c.seed = seed.unwrap_or(c.seed);
        c.restarts = o.restarts.unwrap_or(c.restarts);
        c.include_below_bulk = o.include_below_bulk.unwrap_or(c.include_below_bulk);
        c.biased_baseline = o.biased_baseline.unwrap_or(c.biased_baseline);
        c.max_depth = o.max_depth.unwrap_or(c.max_depth);
        c.min_size = o.min_size.unwrap_or(c.min_size);
        if let Some(v) = &o.variants {
            c.variants = Some(parse_variants(v)?);
        }
        c.communities = o.communities.clone().or(c.communities);
        if !o.calibrations.is_empty() {
            c.calibrations = o.calibrations.clone();
        }
        if !o.portfolios.is_empty() {
            c.portfolios = o.portfolios.clone();
        }
        c.paths = o.paths.unwrap_or(c.paths);
        c.alphas = o.alphas.clone().unwrap_or(c.alphas);
        c.aggregate_classes = o.aggregate_classes.unwrap_or(c.aggregate_classes);
        c.out_dir = out_dir.unwrap_or(c.out_dir);
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        self.resolution()?;
        self.calibration_resolution()?;
        if self.paths == 0 {
            return Err(Error::Config("paths must be positive".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("alphas must lie in (0, 1)".into()));
        }
        if self.window < 2 {
            return Err(Error::Config("window must be at least 2".into()));
        }
        let paths = self
            .input
            .iter()
            .chain(&self.meta)
            .chain(&self.communities)
            .chain(&self.calibrations)
            .chain(&self.portfolios);
        for p in paths {
            if !p.exists() {
                return Err(Error::Io {
                    path: p.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                });
            }
        }
        Ok(())
    }

    pub fn resolution(&self) -> Result<Resolution> {
        self.resolution.parse()
    }

    pub fn calibration_resolution(&self) -> Result<Resolution> {
        self.calibration_resolution.parse()
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            max_missing_fraction: self.max_missing_fraction,
            max_fill_gap: self.max_fill_gap,
        }
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| {
            Error::Config("no input spread file (use --input or `input` in the config file)".into())
        })
    }
}

mod svg;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use barcode::barcode::OutlierPosition;
use barcode::distance::{cross_distances, self_distances_with};
use barcode::experiment::{run_spec, ExperimentSpec, Metric};
use barcode::report::{compute_report, ComputeRequest};
use barcode::sampling::sample_gaussian_stream;
use barcode::{
    barcode_curve, load_embeddings, save_embeddings, BarcodeOptions, DistanceMode, Error,
    FidelityConvention, FileFormat, OutlierPolicy, ProjectionTarget, SelfPairs, DEFAULT_EXACT_LIMIT,
    DEFAULT_K,
};
use clap::{Parser, Subcommand, ValueEnum};

const USAGE_EXIT: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "barcode", version, about = "Barcode fidelity/diversity for embedding sets")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare a comparison set against a reference set.
    Compute(ComputeArgs),
    /// Barcode curves of the cross and within-set distances.
    Plot(PlotArgs),
    /// Run an experiment spec (TOML) and write results.csv and summary.json.
    Experiment(ExperimentArgs),
    /// Write a Gaussian sample to .npy or .csv.
    Sample(SampleArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Barcode,
    Prdc,
    Fid,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PositionArg {
    In,
    Out,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConventionArg {
    Survival,
    Cdf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Auto,
    Exact,
    Streaming,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(clap::Args, Debug)]
struct DistanceArgs {
    /// Drop this fraction of each distance multiset (requires exact storage).
    #[arg(long)]
    outlier_prob: Option<f64>,
    #[arg(long, value_enum, default_value = "out", requires = "outlier_prob")]
    outlier_pos: PositionArg,
    /// Pair count above which distances are streamed instead of stored.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: u64,
    #[arg(long, value_enum, default_value = "auto")]
    distance_mode: ModeArg,
    /// Count each point's zero distance to itself in within-set statistics.
    #[arg(long)]
    include_self_pairs: bool,
}

impl DistanceArgs {
    fn options(&self, convention: FidelityConvention) -> Result<BarcodeOptions, Error> {
        let policy = match self.outlier_prob {
            Some(p) => Some(OutlierPolicy::new(
                p,
                match self.outlier_pos {
                    PositionArg::In => OutlierPosition::In,
                    PositionArg::Out => OutlierPosition::Out,
                    PositionArg::Both => OutlierPosition::Both,
                },
            )?),
            None => None,
        };
        Ok(BarcodeOptions {
            policy,
            convention,
            mode: match self.distance_mode {
                ModeArg::Auto => DistanceMode::Auto,
                ModeArg::Exact => DistanceMode::Exact,
                ModeArg::Streaming => DistanceMode::Streaming,
            },
            exact_limit: self.exact_limit,
            self_pairs: if self.include_self_pairs {
                SelfPairs::Include
            } else {
                SelfPairs::Exclude
            },
        })
    }
}

#[derive(clap::Args, Debug)]
struct ComputeArgs {
    /// Reference embeddings (.npy or .csv).
    reference: PathBuf,
    /// Comparison embeddings (.npy or .csv).
    comparison: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "barcode")]
    metrics: Vec<MetricArg>,
    /// Neighbourhood size for PRDC.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Project both sets onto this many joint singular directions first.
    #[arg(long, conflicts_with = "min_explainability")]
    dims: Option<usize>,
    /// Project onto the fewest directions explaining at least this share of energy.
    #[arg(long)]
    min_explainability: Option<f64>,
    /// Subtract the joint mean before the projection fit.
    #[arg(long)]
    center: bool,
    /// Write the fitted projection as PREFIX.basis.npy, PREFIX.singular_values.npy.
    #[arg(long)]
    save_projection: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "survival")]
    fidelity_convention: ConventionArg,
    #[command(flatten)]
    distance: DistanceArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write sorted distances as raw little-endian f64 to PREFIX.{pq,pp,qq}.f64.
    #[arg(long)]
    dump_distances: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum CurveArg {
    Below,
    Alive,
    Both,
}

#[derive(clap::Args, Debug)]
struct PlotArgs {
    reference: PathBuf,
    comparison: PathBuf,
    /// Number of evenly spaced thresholds on [0, 1].
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    #[arg(long, value_enum, default_value = "alive")]
    curve: CurveArg,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Curve table; stdout when neither --csv nor --svg is given.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: u64,
    #[arg(long)]
    include_self_pairs: bool,
}

#[derive(clap::Args, Debug)]
struct ExperimentArgs {
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mean: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Append one constant row with this value in every coordinate.
    #[arg(long, allow_hyphen_values = true)]
    outlier: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_EXIT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("ParameterError: --threads must be at least 1");
            return ExitCode::from(USAGE_EXIT);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("ParameterError: {e}");
            return ExitCode::from(USAGE_EXIT);
        }
    }
    let result = match cli.command {
        Command::Compute(a) => compute(a),
        Command::Plot(a) => plot(a),
        Command::Experiment(a) => experiment(a),
        Command::Sample(a) => sample(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("{}: {e}", cat.name());
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}

fn load(path: &Path) -> Result<barcode::EmbeddingSet, Error> {
    load_embeddings(path, FileFormat::from_path(path)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn io_err(path: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.into(),
        source: e,
    }
}

fn write_output(out: &Option<PathBuf>, body: &[u8]) -> Result<(), Error> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(body)
                .and_then(|_| w.flush())
                .map_err(io_err(&p.display().to_string()))
        }
        None => std::io::stdout().write_all(body).map_err(io_err("<stdout>")),
    }
}

fn compute(a: ComputeArgs) -> Result<(), Error> {
    let p = load(&a.reference)?;
    let q = load(&a.comparison)?;
    let convention = match a.fidelity_convention {
        ConventionArg::Survival => FidelityConvention::Survival,
        ConventionArg::Cdf => FidelityConvention::Cdf,
    };
    let projection = match (a.dims, a.min_explainability) {
        (Some(d), _) => Some((ProjectionTarget::Dims(d), a.center)),
        (None, Some(e)) => Some((ProjectionTarget::MinExplainability(e), a.center)),
        (None, None) => None,
    };
    if a.save_projection.is_some() && projection.is_none() {
        return Err(Error::Parameter(
            "--save-projection needs --dims or --min-explainability".into(),
        ));
    }
    let mut metrics: Vec<Metric> = a
        .metrics
        .iter()
        .map(|m| match m {
            MetricArg::Barcode => Metric::Barcode,
            MetricArg::Prdc => Metric::Prdc,
            MetricArg::Fid => Metric::Fid,
        })
        .collect();
    metrics.dedup();
    let req = ComputeRequest {
        metrics,
        k: a.k,
        projection,
        barcode: a.distance.options(convention)?,
    };
    let (report, model) = compute_report(&p, &q, &req)?;
    if let (Some(prefix), Some(m)) = (&a.save_projection, &model) {
        m.save(prefix)?;
    }
    if let Some(prefix) = &a.dump_distances {
        let (p, q) = match &model {
            Some(m) => (barcode::project(m, &p)?, barcode::project(m, &q)?),
            None => (p, q),
        };
        let limit = req.barcode.exact_limit;
        let sp = req.barcode.self_pairs;
        dump(prefix, "pq", &cross_distances(&p, &q, DistanceMode::Exact, limit)?)?;
        dump(prefix, "pp", &self_distances_with(&p, DistanceMode::Exact, limit, sp)?)?;
        dump(prefix, "qq", &self_distances_with(&q, DistanceMode::Exact, limit, sp)?)?;
    }
    let body = match a.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf).map_err(io_err("<buffer>"))?;
            buf
        }
    };
    write_output(&a.out, &body)
}

fn dump(prefix: &Path, tag: &str, s: &barcode::DistanceSummary) -> Result<(), Error> {
    let path = PathBuf::from(format!("{}.{tag}.f64", prefix.display()));
    let mut w = create(&path)?;
    s.write_distances_le(&mut w)?;
    w.flush().map_err(io_err(&path.display().to_string()))
}

fn plot(a: PlotArgs) -> Result<(), Error> {
    let p = load(&a.reference)?;
    let q = load(&a.comparison)?;
    let sp = if a.include_self_pairs {
        SelfPairs::Include
    } else {
        SelfPairs::Exclude
    };
    let summaries = [
        ("pq", cross_distances(&p, &q, DistanceMode::Auto, a.exact_limit)?),
        ("pp", self_distances_with(&p, DistanceMode::Auto, a.exact_limit, sp)?),
        ("qq", self_distances_with(&q, DistanceMode::Auto, a.exact_limit, sp)?),
    ];
    let mut curves = Vec::new();
    for (tag, s) in &summaries {
        curves.push((*tag, barcode_curve(s, a.resolution)?));
    }

    let mut table = String::from("multiset,lambda,below,alive\n");
    for (tag, c) in &curves {
        for pt in &c.points {
            table.push_str(&format!("{tag},{},{},{}\n", pt.lambda, pt.below, pt.alive));
        }
    }
    if let Some(path) = &a.svg {
        let doc = svg::render(&curves, a.curve == CurveArg::Below || a.curve == CurveArg::Both, a.curve != CurveArg::Below);
        std::fs::write(path, doc).map_err(io_err(&path.display().to_string()))?;
    }
    if a.csv.is_some() || a.svg.is_none() {
        write_output(&a.csv, table.as_bytes())?;
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), Error> {
    let spec = ExperimentSpec::from_path(&a.spec)?;
    let base = a.spec.parent().map(Path::to_path_buf).unwrap_or_default();
    let result = run_spec(&spec, &base)?;
    result.write_outputs(&a.out)
}

fn sample(a: SampleArgs) -> Result<(), Error> {
    let mut set = sample_gaussian_stream::<f64>(a.n, a.d, a.mean, a.seed, a.stream)?;
    if let Some(v) = a.outlier {
        let row = barcode::EmbeddingSet::from_flat(1, a.d, vec![v; a.d])?;
        set = set.stack(&row)?;
    }
    save_embeddings(&set, &a.out, FileFormat::from_path(&a.out)?)
}

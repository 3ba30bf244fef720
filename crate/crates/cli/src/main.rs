use std::path::PathBuf;
use std::process::ExitCode;

use cbir_core::catalog::{
    build_catalog, describe, Catalog, CatalogConfig, ColorMode, QueryMode, QueryResult, Rerank,
};
use cbir_core::raster::Raster;
use cbir_core::similarity::FeatureWeights;
use cbir_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_EMPTY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cbir",
    version,
    about = "Index image collections and search them by example"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features from every image under DIR and build a catalog.
    Index(IndexArgs),
    /// Find catalog images similar to IMAGE.
    Query(QueryArgs),
    /// Print the feature vector of a single image.
    Features(FeaturesArgs),
}

#[derive(Args)]
struct IndexArgs {
    dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cluster diameter threshold (default: median distance of a 100-image sample).
    #[arg(long)]
    sigma: Option<f64>,
    /// Use a joint RGB histogram with N bins per channel instead of the 256-bin gray histogram.
    #[arg(long, value_name = "N")]
    bins: Option<usize>,
    /// Block weights for color, texture, wavelet and orientation.
    #[arg(long, value_name = "C,T,W,O", value_parser = parse_weights)]
    weights: Option<FeatureWeights>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["range", "knn"]))]
struct QueryArgs {
    image: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Return every image within distance T.
    #[arg(long, value_name = "T")]
    range: Option<f64>,
    /// Return the K nearest images.
    #[arg(long, value_name = "K")]
    knn: Option<usize>,
    #[arg(long, value_enum)]
    rerank: Option<RerankArg>,
    #[arg(long)]
    json: bool,
    /// Exit with status 3 when a range query matches nothing.
    #[arg(long)]
    fail_on_empty: bool,
}

#[derive(Args)]
struct FeaturesArgs {
    image: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RerankArg {
    Intersection,
    Hausdorff,
}

impl From<RerankArg> for Rerank {
    fn from(r: RerankArg) -> Self {
        match r {
            RerankArg::Intersection => Rerank::Intersection,
            RerankArg::Hausdorff => Rerank::Hausdorff,
        }
    }
}

fn parse_weights(s: &str) -> Result<FeatureWeights, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad weight {p:?}: {e}"))
        })
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [c, t, w, o] => FeatureWeights::new(c, t, w, o).map_err(|e| e.to_string()),
        _ => Err(format!(
            "expected four comma-separated weights, got {}",
            parts.len()
        )),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::DegenerateInput(_) => EXIT_USAGE,
        Error::Decode { .. } | Error::Io { .. } | Error::Format { .. } | Error::EmptyCatalog(_) => {
            EXIT_IO
        }
    }
}

fn run_index(args: IndexArgs) -> Result<u8, Error> {
    let mut config = CatalogConfig::default();
    config.index.seed = args.seed;
    config.index.sigma = args.sigma;
    if let Some(bins) = args.bins {
        config.extraction.color = ColorMode::Rgb {
            bins_per_channel: bins,
        };
    }
    if let Some(w) = args.weights {
        config.index.weights = w;
    }
    let report = build_catalog(&args.dir, &args.out, &config)?;
    for (path, why) in &report.skipped {
        eprintln!("warning: skipped {}: {why}", path.display());
    }
    let cat = &report.catalog;
    println!(
        "indexed {} images into {} ({} tree nodes, sigma {:.6})",
        cat.records().len(),
        args.out.display(),
        cat.tree().nodes().len(),
        cat.manifest().sigma
    );
    Ok(0)
}

fn print_table(result: &QueryResult) {
    let scored = result.rerank.is_some();
    if scored {
        println!(
            "{:>4}  {:>6}  {:>12}  {:>12}  path",
            "rank", "id", "distance", "score"
        );
    } else {
        println!("{:>4}  {:>6}  {:>12}  path", "rank", "id", "distance");
    }
    for (rank, e) in result.entries.iter().enumerate() {
        if scored {
            let score = e
                .rerank_score
                .map_or_else(|| "-".to_string(), |s| format!("{s:.6}"));
            println!(
                "{:>4}  {:>6}  {:>12.6}  {:>12}  {}",
                rank + 1,
                e.id,
                e.distance,
                score,
                e.source_path
            );
        } else {
            println!(
                "{:>4}  {:>6}  {:>12.6}  {}",
                rank + 1,
                e.id,
                e.distance,
                e.source_path
            );
        }
    }
    println!(
        "{} results, {} distance computations",
        result.entries.len(),
        result.distance_calls
    );
}

fn run_query(args: QueryArgs) -> Result<u8, Error> {
    let catalog = Catalog::open(&args.catalog)?;
    let img = Raster::open(&args.image)?;
    let mode = match (args.range, args.knn) {
        (Some(t), _) => QueryMode::Range { t },
        (None, Some(k)) => QueryMode::Knn { k },
        (None, None) => unreachable!("clap requires one mode"),
    };
    let mut result = catalog.query(&img, mode)?;
    if let Some(how) = args.rerank {
        catalog.rerank(&img, &mut result, how.into())?;
    }
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&result).expect("result serializes")
        );
    } else {
        print_table(&result);
    }
    let empty_range = matches!(mode, QueryMode::Range { .. }) && result.entries.is_empty();
    Ok(if empty_range && args.fail_on_empty {
        EXIT_EMPTY
    } else {
        0
    })
}

fn run_features(args: FeaturesArgs) -> Result<u8, Error> {
    let img = Raster::open(&args.image)?;
    let report = describe(&img, &CatalogConfig::default().extraction)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
        return Ok(0);
    }
    let f = &report.feature;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("dimension   {}", report.dimension);
    println!(
        "color       {} bins, {} non-empty",
        f.color.len(),
        f.color.iter().filter(|&&c| c > 0.0).count()
    );
    println!("texture     {}", fmt(&f.texture.to_array()));
    println!("wavelet     {}", fmt(f.wavelet.values()));
    println!("orientation {}", fmt(&f.orientation));
    println!("edge pixels {}", report.edge_points);
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Index(a) => run_index(a),
        Command::Query(a) => run_query(a),
        Command::Features(a) => run_features(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! `hcr` — independence tests, mutual information, the HSIC baseline, and
//! the rotation-sweep benchmark from the command line.
//!
//! Exit codes: 0 = H0 accepted (or non-test command succeeded),
//! 3 = H0 rejected, 1 = runtime error, 2 = usage error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hcr_core::basis::{BasisIndexSet, BasisKind};
use hcr_core::bench::{MethodId, MixtureSpec, RotationSweepConfig};
use hcr_core::coeffs::{default_rule, VarianceRule};
use hcr_core::hsic::{BandwidthSpec, KernelExponent};
use hcr_core::independence::{
    calibrate_score, scores_for_pair, test_chi2, test_loglik, test_minmax, test_permutation,
    test_sorted_extremes, PermStatistic, ScoreKind,
};
use hcr_core::ingest::{load_joint, load_paired, TableFormat};
use hcr_core::{PairedSample64, TestReport64};

const SCHEMA_VERSION: u32 = 1;
const EXIT_ACCEPT: i32 = 0;
const EXIT_REJECT: i32 = 3;

#[derive(Parser)]
#[command(name = "hcr", version, about = "Independence testing via rank-normalized mixed moments, with an HSIC baseline")]
struct Cli {
    /// Cap the worker thread pool (default: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test two samples for statistical independence
    Test(TestArgs),
    /// Estimate mutual information between two samples (nits)
    Mi(MiArgs),
    /// HSIC baseline independence test
    Hsic(HsicArgs),
    /// Rotation-sweep benchmark comparing method sensitivity
    Bench(BenchArgs),
    /// Simulate a singular-value null and cache it to a file
    NullCache(NullCacheArgs),
}

#[derive(Args)]
struct InputArgs {
    /// x sample file, or the joint table when --split is given
    x: PathBuf,
    /// y sample file (omit when using --split)
    y: Option<PathBuf>,
    /// Split the single input table: columns [0, SPLIT) become x
    #[arg(long)]
    split: Option<usize>,
    /// Input table format (default: inferred from the file extension)
    #[arg(long, value_enum)]
    input_format: Option<InputFormat>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Csv,
    Tsv,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<PairedSample64> {
        let format = match self.input_format {
            Some(InputFormat::Csv) => TableFormat::Csv,
            Some(InputFormat::Tsv) => TableFormat::Tsv,
            None => TableFormat::from_path(&self.x),
        };
        match (&self.y, self.split) {
            (Some(y), None) => load_paired(&self.x, y, format)
                .with_context(|| format!("loading {} and {}", self.x.display(), y.display())),
            (None, Some(split)) => load_joint(&self.x, format, split)
                .with_context(|| format!("loading {}", self.x.display())),
            (Some(_), Some(_)) => bail!("give either a y file or --split, not both"),
            (None, None) => bail!("need a y file or --split to partition the input"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum MethodArg {
    Minmax,
    SortedExtremes,
    Loglik,
    Chi2,
    PermSumZ2,
    PermMaxZ,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Pairwise,
    Triplewise,
}

#[derive(Clone, Copy, ValueEnum)]
enum VarianceRuleArg {
    Unit,
    Empirical,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Test statistic
    #[arg(long, value_enum, default_value = "minmax")]
    method: MethodArg,
    /// Polynomial degree per coordinate
    #[arg(long, default_value_t = 4)]
    m: u32,
    /// Number of extremes per side for sorted-extremes
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Significance level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Permutation count for the permutation methods
    #[arg(long = "B", default_value_t = 400)]
    b: usize,
    /// RNG seed for randomized procedures (echoed in the output)
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Basis family over each sample's coordinates
    #[arg(long, value_enum, default_value = "pairwise")]
    basis: BasisArg,
    /// Score normalization (default: unit for pairwise, empirical otherwise)
    #[arg(long, value_enum)]
    variance_rule: Option<VarianceRuleArg>,
    /// Monte-Carlo replicates converting a minmax/sorted-extremes score
    /// into a calibrated p-value
    #[arg(long)]
    calibrate: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MiArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 4)]
    m: u32,
    #[arg(long, value_enum, default_value = "pairwise")]
    basis: BasisArg,
    /// Include the full coefficient table in the JSON output
    #[arg(long)]
    with_table: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationArg {
    Gamma,
    Permutation,
}

#[derive(Args)]
struct HsicArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "gamma")]
    calibration: CalibrationArg,
    /// Bandwidth: "median", "median-x2", or fixed "SIGMA_X,SIGMA_Y"
    #[arg(long, default_value = "median")]
    bandwidth: String,
    /// Distance form in the kernel exponent
    #[arg(long, value_enum, default_value = "squared")]
    kernel_exponent: KernelExponentArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "B", default_value_t = 400)]
    b: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelExponentArg {
    Squared,
    Linear,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Dimensions as "DX,DY"
    #[arg(long, default_value = "2,2")]
    dims: String,
    #[arg(long, default_value_t = 0.25)]
    delta_theta: f64,
    #[arg(long, default_value_t = 6.0)]
    max_theta: f64,
    /// Independence-preserving pre-rotation inside the x block (degrees)
    #[arg(long, default_value_t = 50.0)]
    within_block: f64,
    #[arg(long, default_value_t = 6)]
    m: u32,
    #[arg(long = "B", default_value_t = 400)]
    b: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated method ids (default: all)
    #[arg(long)]
    methods: Option<String>,
    /// Output prefix; writes PREFIX.csv and PREFIX.json
    #[arg(long, default_value = "sweep")]
    out_prefix: PathBuf,
    /// Also write a gnuplot-friendly PREFIX.dat
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct NullCacheArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Cache file path
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore the error when a pool already exists (tests re-enter)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Test(args) => cmd_test(args),
        Command::Mi(args) => cmd_mi(args),
        Command::Hsic(args) => cmd_hsic(args),
        Command::Bench(args) => cmd_bench(args),
        Command::NullCache(args) => cmd_null_cache(args),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn build_bases(
    dims: (usize, usize),
    basis: BasisArg,
    m: u32,
) -> anyhow::Result<(BasisIndexSet, BasisIndexSet)> {
    let kind = match basis {
        BasisArg::Pairwise => BasisKind::Pairwise,
        BasisArg::Triplewise => BasisKind::Triplewise,
    };
    let bx = hcr_core::basis::build_basis(dims.0, m, kind)?;
    let by = hcr_core::basis::build_basis(dims.1, m, kind)?;
    Ok((bx, by))
}

fn render_test_report(
    format: OutputFormat,
    command: &str,
    seed: u64,
    report: &TestReport64,
) -> anyhow::Result<String> {
    Ok(match format {
        OutputFormat::Json => {
            let envelope = json!({
                "schema": SCHEMA_VERSION,
                "command": command,
                "seed": seed,
                "report": report,
            });
            serde_json::to_string_pretty(&envelope)? + "\n"
        }
        OutputFormat::Csv => {
            let mut s = String::from("method,statistic,p_or_pr,alpha,reject\n");
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                serde_json::to_value(report.method)?.as_str().unwrap_or("?"),
                report.statistic,
                report.p_or_pr,
                report.alpha,
                report.reject
            ));
            s
        }
        OutputFormat::Text => {
            let mut s = String::new();
            s.push_str(&format!("method:    {:?}\n", report.method));
            s.push_str(&format!("statistic: {}\n", report.statistic));
            s.push_str(&format!("p_or_pr:   {}\n", report.p_or_pr));
            s.push_str(&format!("alpha:     {}\n", report.alpha));
            s.push_str(&format!(
                "decision:  {}\n",
                if report.reject { "reject H0 (dependent)" } else { "accept H0 (independent)" }
            ));
            for (k, v) in &report.meta {
                s.push_str(&format!("meta.{k}: {v}\n"));
            }
            s
        }
    })
}

fn cmd_test(args: TestArgs) -> anyhow::Result<i32> {
    let pair = args.input.load()?;
    let (bx, by) = build_bases(pair.dims(), args.basis, args.m)?;
    let rule = match args.variance_rule {
        Some(VarianceRuleArg::Unit) => VarianceRule::Unit,
        Some(VarianceRuleArg::Empirical) => VarianceRule::Empirical,
        None => default_rule(&bx, &by),
    };
    let alpha = args.alpha;

    let mut report = match args.method {
        MethodArg::PermSumZ2 | MethodArg::PermMaxZ => {
            let stat = if args.method == MethodArg::PermSumZ2 {
                PermStatistic::SumZ2
            } else {
                PermStatistic::MaxAbsZ
            };
            test_permutation(&pair, &bx, &by, rule, stat, args.b, args.seed, alpha)?
        }
        _ => {
            let table = scores_for_pair(&pair, &bx, &by, rule)?;
            let z = table.flattened_scores().expect("scores populated");
            match args.method {
                MethodArg::Minmax => test_minmax(&z, alpha)?,
                MethodArg::SortedExtremes => test_sorted_extremes(&z, args.k, alpha)?,
                MethodArg::Loglik => test_loglik(&z, alpha)?,
                MethodArg::Chi2 => test_chi2(&z, alpha)?,
                MethodArg::PermSumZ2 | MethodArg::PermMaxZ => unreachable!(),
            }
        }
    };

    if let Some(replicates) = args.calibrate {
        let kind = match args.method {
            MethodArg::Minmax => ScoreKind::Minmax,
            MethodArg::SortedExtremes => ScoreKind::SortedExtremes { k: args.k },
            _ => bail!("--calibrate applies only to minmax and sorted-extremes"),
        };
        let m_features = bx.len() * by.len();
        let p = calibrate_score(kind, m_features, report.p_or_pr, replicates, args.seed)?;
        report.meta.insert("raw_score".into(), json!(report.p_or_pr));
        report.meta.insert("calibration_replicates".into(), json!(replicates));
        report.meta.insert("seed".into(), json!(args.seed));
        report.p_or_pr = p;
        report.reject = p < alpha;
    }

    let content = render_test_report(args.format, "test", args.seed, &report)?;
    emit(&args.out, &content)?;
    Ok(if report.reject { EXIT_REJECT } else { EXIT_ACCEPT })
}

fn cmd_mi(args: MiArgs) -> anyhow::Result<i32> {
    let pair = args.input.load()?;
    let (bx, by) = build_bases(pair.dims(), args.basis, args.m)?;
    let rule = default_rule(&bx, &by);
    let table = scores_for_pair(&pair, &bx, &by, rule)?;
    let est = hcr_core::infotheory::mi_corrected(&table)?;

    let content = match args.format {
        OutputFormat::Json => {
            let mut body = json!({
                "schema": SCHEMA_VERSION,
                "command": "mi",
                "n": pair.n(),
                "features": bx.len() * by.len(),
                "raw_nits": est.raw,
                "corrected_nits": est.corrected,
            });
            if args.with_table {
                body["table"] = table.to_json();
            }
            serde_json::to_string_pretty(&body)? + "\n"
        }
        OutputFormat::Csv => format!(
            "raw_nits,corrected_nits,n,features\n{},{},{},{}\n",
            est.raw,
            est.corrected,
            pair.n(),
            bx.len() * by.len()
        ),
        OutputFormat::Text => format!(
            "mutual information (nits)\nraw:       {}\ncorrected: {}\nn:         {}\nfeatures:  {}\n",
            est.raw,
            est.corrected,
            pair.n(),
            bx.len() * by.len()
        ),
    };
    emit(&args.out, &content)?;
    Ok(EXIT_ACCEPT)
}

fn parse_bandwidth(s: &str) -> anyhow::Result<BandwidthSpec<f64>> {
    match s {
        "median" => Ok(BandwidthSpec::Median),
        "median-x2" => Ok(BandwidthSpec::MedianX2),
        other => {
            let parts: Vec<&str> = other.split(',').collect();
            if parts.len() != 2 {
                bail!("bandwidth must be \"median\", \"median-x2\" or \"SIGMA_X,SIGMA_Y\"");
            }
            let sigma_x: f64 = parts[0].trim().parse().context("parsing sigma_x")?;
            let sigma_y: f64 = parts[1].trim().parse().context("parsing sigma_y")?;
            Ok(BandwidthSpec::Fixed { sigma_x, sigma_y })
        }
    }
}

fn cmd_hsic(args: HsicArgs) -> anyhow::Result<i32> {
    let pair = args.input.load()?;
    let bandwidth = parse_bandwidth(&args.bandwidth)?;
    let exponent = match args.kernel_exponent {
        KernelExponentArg::Squared => KernelExponent::Squared,
        KernelExponentArg::Linear => KernelExponent::Linear,
    };
    let result = match args.calibration {
        CalibrationArg::Gamma => {
            hcr_core::hsic::hsic_gamma_test(&pair, args.alpha, bandwidth, exponent, args.seed)?
        }
        CalibrationArg::Permutation => hcr_core::hsic::hsic_permutation_test(
            &pair, args.alpha, bandwidth, exponent, args.b, args.seed,
        )?,
    };

    let content = match args.format {
        OutputFormat::Json => {
            let envelope = json!({
                "schema": SCHEMA_VERSION,
                "command": "hsic",
                "seed": args.seed,
                "report": result,
            });
            serde_json::to_string_pretty(&envelope)? + "\n"
        }
        OutputFormat::Csv => format!(
            "statistic,p_value,sigma_x,sigma_y,alpha,reject\n{},{},{},{},{},{}\n",
            result.statistic, result.p_value, result.sigma_x, result.sigma_y, result.alpha,
            result.reject
        ),
        OutputFormat::Text => format!(
            "HSIC ({:?})\nstatistic: {}\np_value:   {}\nsigma_x:   {}\nsigma_y:   {}\ndecision:  {}\n",
            result.calibration,
            result.statistic,
            result.p_value,
            result.sigma_x,
            result.sigma_y,
            if result.reject { "reject H0 (dependent)" } else { "accept H0 (independent)" }
        ),
    };
    emit(&args.out, &content)?;
    Ok(if result.reject { EXIT_REJECT } else { EXIT_ACCEPT })
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<i32> {
    let dims: Vec<usize> = args
        .dims
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("parsing --dims"))
        .collect::<anyhow::Result<_>>()?;
    if dims.len() != 2 {
        bail!("--dims must be \"DX,DY\"");
    }
    let methods = match &args.methods {
        None => MethodId::ALL.to_vec(),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<MethodId>().map_err(anyhow::Error::from))
            .collect::<anyhow::Result<_>>()?,
    };
    let config = RotationSweepConfig {
        n: args.n,
        dims: (dims[0], dims[1]),
        delta_theta_deg: args.delta_theta,
        max_theta_deg: args.max_theta,
        within_block_deg: args.within_block,
        m: args.m,
        b_perm: args.b,
        alpha: args.alpha,
        seed: args.seed,
        methods,
        mixture: MixtureSpec::bimodal_default(),
        rotation_plane: None,
    };
    let result = hcr_core::bench::run_rotation_sweep(&config)?;

    let csv_path = args.out_prefix.with_extension("csv");
    let mut csv_out = Vec::new();
    result.write_csv(&mut csv_out)?;
    fs::write(&csv_path, &csv_out).with_context(|| format!("writing {}", csv_path.display()))?;

    let json_path = args.out_prefix.with_extension("json");
    let summary = serde_json::to_string_pretty(&result.json_summary(&config))? + "\n";
    fs::write(&json_path, &summary)
        .with_context(|| format!("writing {}", json_path.display()))?;

    if args.gnuplot {
        let dat_path = args.out_prefix.with_extension("dat");
        let mut dat = Vec::new();
        result.write_gnuplot(&mut dat)?;
        fs::write(&dat_path, &dat)
            .with_context(|| format!("writing {}", dat_path.display()))?;
    }

    println!("wrote {} rows to {}", result.rows.len(), csv_path.display());
    for (method, angle) in &result.first_reject {
        match angle {
            Some(a) => println!("first reject {method}: {a} deg"),
            None => println!("first reject {method}: none"),
        }
    }
    Ok(EXIT_ACCEPT)
}

fn cmd_null_cache(args: NullCacheArgs) -> anyhow::Result<i32> {
    let null = hcr_core::svd::simulate_singular_null::<f64>(
        args.p, args.q, args.trials, args.seed,
    )?;
    null.write_json(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "cached {} trials of {}x{} spectra to {}",
        args.trials,
        args.p,
        args.q,
        args.out.display()
    );
    Ok(EXIT_ACCEPT)
}

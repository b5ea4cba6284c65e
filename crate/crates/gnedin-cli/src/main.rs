//! Command-line front end for species sampling analysis under Gnedin's
//! model: descriptive statistics, posterior predictive tables, discovery
//! probabilities, seeded sampling, and the oracle validation suite.

mod ingest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gnedin::oracle::{self, ReconcileConfig};
use gnedin::partitions::EnumerationBudget;
use gnedin::posterior::{self, BasicSample, PredictiveQuery, TruncationPolicy, TypesMean};
use gnedin::sampler::{sample_many, SamplingModel};
use gnedin::{Mode, ModelParams, OccupancyVector, Value};
use ingest::AbundanceDataset;
use serde_json::{json, Value as Json};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_VALIDATION_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BAD_PARAMS: u8 = 3;
const EXIT_BAD_DATA: u8 = 4;
const EXIT_BUDGET: u8 = 5;

#[derive(Parser)]
#[command(
    name = "gnedin",
    version,
    about = "Species sampling analysis under Gnedin's partition model with finitely many types",
    after_long_help = "EXIT CODES:\n  0  success\n  1  validation suite found disagreements\n  \
                       2  usage error (unknown flag or malformed invocation)\n  3  invalid model \
                       parameter (gamma must lie strictly in (0,1))\n  4  data file error (the \
                       diagnostic names the line)\n  5  enumeration budget exceeded"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    /// Arbitrary-precision rationals; exact, best for small samples.
    Exact,
    /// Signed log-domain doubles; use for large additional samples.
    Log,
}

impl Backend {
    fn mode(self) -> Mode {
        match self {
            Backend::Exact => Mode::Exact,
            Backend::Log => Mode::Log,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Abundance CSV: header 'species,count' (or just 'count'), one row per
    /// species
    #[arg(long)]
    data: PathBuf,
    /// Model parameter gamma, strictly between 0 and 1 (always explicit;
    /// there is no default prior)
    #[arg(long)]
    gamma: String,
    /// Numeric backend
    #[arg(long, value_enum, default_value = "exact")]
    mode: Backend,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a dataset: sample size, species count, block-count
    /// probability, and the probability of the observed partition
    Describe {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Posterior law and mean of the number of new species in a further
    /// sample of size m
    PredictSpecies {
        #[command(flatten)]
        data: DataArgs,
        /// Additional sample size
        #[arg(short)]
        m: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Posterior law and mean of the number of further observations that
    /// belong to new species
    PredictObservations {
        #[command(flatten)]
        data: DataArgs,
        /// Additional sample size
        #[arg(short)]
        m: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Posterior of the total number of species in the population
    PosteriorTotal {
        #[command(flatten)]
        data: DataArgs,
        /// Stop listing support once the exact tail mass drops below this
        #[arg(long, default_value_t = 1e-10)]
        tail_epsilon: f64,
        /// Hard cap on the listed support (the remaining mass is reported as
        /// the tail)
        #[arg(long, default_value_t = 2000)]
        max_support: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Probability that observation n+m+1 belongs to an unseen species
    Discovery {
        #[command(flatten)]
        data: DataArgs,
        /// Additional sample size
        #[arg(short)]
        m: usize,
    },
    /// Draw seeded partitions from the model
    Sample {
        /// Model parameter gamma, strictly between 0 and 1
        #[arg(long)]
        gamma: String,
        /// Number of observations per draw
        #[arg(short)]
        n: usize,
        /// Number of independent draws
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        /// Seed for the deterministic generator
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Run every closed form against the enumeration oracles and emit the
    /// reconciliation report; exits nonzero if any derived value disagrees
    Validate {
        /// Largest basic-sample size in the grid
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        /// Largest additional-sample size in the grid
        #[arg(long, default_value_t = 4)]
        max_m: usize,
        /// Comma-separated gamma values for the grid
        #[arg(long, default_value = "0.3,0.7")]
        gammas: String,
        /// Run a single named check (see the report for ids)
        #[arg(long)]
        only: Option<String>,
        /// Enumeration budget: caps both set-partition size and extension
        /// depth
        #[arg(long)]
        budget: Option<usize>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<ingest::IngestError> for Failure {
    fn from(e: ingest::IngestError) -> Self {
        Failure::new(EXIT_BAD_DATA, e.to_string())
    }
}

impl From<gnedin::Error> for Failure {
    fn from(e: gnedin::Error) -> Self {
        let code = match e {
            gnedin::Error::BudgetExceeded { .. } => EXIT_BUDGET,
            gnedin::Error::InvalidGamma(_) => EXIT_BAD_PARAMS,
            _ => EXIT_USAGE,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn parse_gamma(text: &str) -> Result<ModelParams, Failure> {
    ModelParams::from_decimal(text)
        .map_err(|e| Failure::new(EXIT_BAD_PARAMS, format!("--gamma {text}: {e}")))
}

fn load(data: &DataArgs) -> Result<(AbundanceDataset, ModelParams, Mode), Failure> {
    let params = parse_gamma(&data.gamma)?;
    let dataset = ingest::ingest(&data.data)?;
    Ok((dataset, params, data.mode.mode()))
}

/// Emits a probability as a finite JSON number, or as a sign and log
/// magnitude when it is not representable as a finite double.
fn value_json(v: &Value) -> Json {
    let sl = v.signed_log();
    if sl.sign == 0 {
        return json!(0.0);
    }
    let as_f64 = sl.to_f64();
    if as_f64.is_finite() && (as_f64 != 0.0 || sl.sign == 0) {
        json!(as_f64)
    } else {
        json!({ "sign": sl.sign, "log_abs": sl.log_abs })
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Exact => "exact",
        Mode::Log => "log",
    }
}

fn print_json(v: &Json) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn table_csv(header: &str, rows: &[(usize, &Value)]) {
    println!("{header}");
    for (support, prob) in rows {
        let sl = prob.signed_log();
        let x = sl.to_f64();
        if x.is_finite() && (x != 0.0 || sl.sign == 0) {
            println!("{support},{x}");
        } else {
            println!("{support},{}", format_args!("sign={};log_abs={}", sl.sign, sl.log_abs));
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Describe { data } => {
            let (dataset, params, mode) = load(&data)?;
            let occ = dataset.occupancy();
            let n = occ.n();
            let k = occ.k();
            let kn = posterior::block_count_pmf(n, &params, mode);
            let eppf = gnedin::model::eppf_gnedin(&occ, &params, mode);
            let mut out = json!({
                "schema_version": 1,
                "command": "describe",
                "gamma": data.gamma,
                "mode": mode_name(mode),
                "n": n,
                "k": k,
                "occupancy": occ.counts(),
                "block_count_probability": value_json(kn.prob(&k).expect("k <= n")),
                "partition_probability": value_json(&eppf),
            });
            if dataset.labels.iter().all(Option::is_some) {
                out["species"] = json!(dataset
                    .labels
                    .iter()
                    .map(|l| l.clone().unwrap())
                    .collect::<Vec<_>>());
            }
            print_json(&out);
            Ok(ExitCode::SUCCESS)
        }
        Command::PredictSpecies { data, m, format } => {
            let (dataset, params, mode) = load(&data)?;
            let occ = dataset.occupancy();
            let q = PredictiveQuery::new(BasicSample::from_occupancy(occ), m, params);
            let pmf = posterior::new_block_count_pmf(&q, mode);
            let mean = posterior::expected_new_blocks(&q, mode);
            match format {
                OutputFormat::Csv => {
                    let rows: Vec<(usize, &Value)> =
                        pmf.support.iter().copied().zip(pmf.probs.iter()).collect();
                    table_csv("new_species,probability", &rows);
                }
                OutputFormat::Json => {
                    let table: Vec<Json> = pmf
                        .support
                        .iter()
                        .zip(&pmf.probs)
                        .map(|(s, p)| json!({"new_species": s, "probability": value_json(p)}))
                        .collect();
                    let out = json!({
                        "schema_version": 1,
                        "command": "predict-species",
                        "gamma": data.gamma,
                        "mode": mode_name(mode),
                        "n": dataset.n(),
                        "k": dataset.k(),
                        "m": m,
                        "table": table,
                        "expected_new_species": {
                            "derived": value_json(&mean.derived),
                            "published_display": value_json(&mean.published),
                            "abs_difference": mean.abs_diff_f64(),
                        },
                    });
                    print_json(&out);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::PredictObservations { data, m, format } => {
            let (dataset, params, mode) = load(&data)?;
            let occ = dataset.occupancy();
            let q = PredictiveQuery::new(BasicSample::from_occupancy(occ), m, params);
            let pmf = posterior::new_ball_count_pmf(&q, mode);
            let mean = posterior::expected_new_balls(&q, mode);
            match format {
                OutputFormat::Csv => {
                    let rows: Vec<(usize, &Value)> =
                        pmf.support.iter().copied().zip(pmf.probs.iter()).collect();
                    table_csv("new_observations,probability", &rows);
                }
                OutputFormat::Json => {
                    let table: Vec<Json> = pmf
                        .support
                        .iter()
                        .zip(&pmf.probs)
                        .map(|(s, p)| json!({"new_observations": s, "probability": value_json(p)}))
                        .collect();
                    let out = json!({
                        "schema_version": 1,
                        "command": "predict-observations",
                        "gamma": data.gamma,
                        "mode": mode_name(mode),
                        "n": dataset.n(),
                        "k": dataset.k(),
                        "m": m,
                        "table": table,
                        "expected_new_observations": value_json(&mean),
                    });
                    print_json(&out);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::PosteriorTotal {
            data,
            tail_epsilon,
            max_support,
            format,
        } => {
            let (dataset, params, mode) = load(&data)?;
            let policy = TruncationPolicy {
                tail_epsilon,
                max_support,
            };
            let post =
                posterior::total_types_posterior(dataset.n(), dataset.k(), &params, mode, &policy)?;
            match format {
                OutputFormat::Csv => {
                    let rows: Vec<(usize, &Value)> = post
                        .pmf
                        .support
                        .iter()
                        .copied()
                        .zip(post.pmf.probs.iter())
                        .collect();
                    table_csv("total_species,probability", &rows);
                }
                OutputFormat::Json => {
                    let table: Vec<Json> = post
                        .pmf
                        .support
                        .iter()
                        .zip(&post.pmf.probs)
                        .map(|(s, p)| json!({"total_species": s, "probability": value_json(p)}))
                        .collect();
                    let mean = match &post.mean {
                        TypesMean::Finite {
                            value,
                            beyond_support,
                        } => json!({
                            "value": value_json(value),
                            "beyond_support": value_json(beyond_support),
                        }),
                        TypesMean::Divergent => json!("divergent"),
                    };
                    let out = json!({
                        "schema_version": 1,
                        "command": "posterior-total",
                        "gamma": data.gamma,
                        "mode": mode_name(mode),
                        "n": dataset.n(),
                        "k": dataset.k(),
                        "table": table,
                        "tail_mass": post.pmf.tail.as_ref().map(value_json),
                        "truncated_at": post.pmf.support.last(),
                        "mean": mean,
                    });
                    print_json(&out);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Discovery { data, m } => {
            let (dataset, params, mode) = load(&data)?;
            let occ = dataset.occupancy();
            let q = PredictiveQuery::new(BasicSample::from_occupancy(occ), m, params);
            let prob = posterior::discovery_prob(&q, mode);
            let out = json!({
                "schema_version": 1,
                "command": "discovery",
                "gamma": data.gamma,
                "mode": mode_name(mode),
                "n": dataset.n(),
                "k": dataset.k(),
                "m": m,
                "probability": value_json(&prob),
            });
            print_json(&out);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample {
            gamma,
            n,
            paths,
            seed,
            format,
        } => {
            if n < 1 || paths < 1 {
                return Err(Failure::new(EXIT_USAGE, "need n >= 1 and --paths >= 1"));
            }
            let params = parse_gamma(&gamma)?;
            let model = SamplingModel::Gnedin(params);
            let draws = sample_many(n, &model, paths, seed);
            let mut freq = vec![0usize; n + 1];
            for d in &draws {
                freq[d.k()] += 1;
            }
            let mean_k =
                draws.iter().map(|d| d.k()).sum::<usize>() as f64 / paths as f64;
            match format {
                OutputFormat::Csv => {
                    println!("species_count,draws");
                    for (k, c) in freq.iter().enumerate().filter(|(_, c)| **c > 0) {
                        println!("{k},{c}");
                    }
                }
                OutputFormat::Json => {
                    let freq_json: Vec<Json> = freq
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| **c > 0)
                        .map(|(k, c)| json!({"species_count": k, "draws": c}))
                        .collect();
                    let mut out = json!({
                        "schema_version": 1,
                        "command": "sample",
                        "gamma": gamma,
                        "n": n,
                        "paths": paths,
                        "seed": seed,
                        "mean_species_count": mean_k,
                        "species_count_frequencies": freq_json,
                    });
                    if paths <= 100 {
                        out["samples"] = json!(draws
                            .iter()
                            .map(|d| d.counts().to_vec())
                            .collect::<Vec<_>>());
                    }
                    print_json(&out);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            max_n,
            max_m,
            gammas,
            only,
            budget,
        } => {
            let budget = match budget {
                Some(b) => EnumerationBudget {
                    max_items: b,
                    max_extension: b,
                },
                None => EnumerationBudget::default(),
            };
            let mut configs = Vec::new();
            for gamma in gammas.split(',') {
                let params = parse_gamma(gamma.trim())?;
                for n in 1..=max_n {
                    for shape in gnedin::partitions::integer_partitions(n) {
                        let occ = OccupancyVector::new(shape)
                            .expect("integer partitions have positive parts");
                        for m in 1..=max_m {
                            configs.push(ReconcileConfig {
                                occ: occ.clone(),
                                m,
                                params: params.clone(),
                            });
                        }
                    }
                }
            }
            let report = oracle::reconcile(&configs, &budget, only.as_deref())?;
            let json = serde_json::to_value(&report).expect("report serializes");
            print_json(&json);
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_VALIDATION_FAILED))
            }
        }
    }
}


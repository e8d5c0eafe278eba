// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ballcpd::ballstat::{scan_profile, Segment};
use ballcpd::eval::evaluate;
use ballcpd::hierarchy::{detect, DetectionConfig, ThresholdSchedule, DEFAULT_MIN_SEG};
use ballcpd::io::{read_matrix_csv, read_series_csv, write_profile_csv, write_series_csv};
use ballcpd::metric::{pairwise_distance_matrix, DistanceMatrix, Metric};
use ballcpd::simgen::{gen_example, list_examples, ExampleSpec};
use ballcpd::{bootstrap, CpdError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "ballcpd",
    version,
    about = "Change-point detection with ball detection statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect change points in a series or distance matrix.
    Detect {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = bootstrap::DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, default_value_t = bootstrap::DEFAULT_P_THRESHOLD)]
        p_threshold: f64,
        /// Bootstrap block length; chosen from the data when omitted.
        #[arg(long)]
        block_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Schedule::Fixed)]
        schedule: Schedule,
        /// Worker threads (results do not depend on it).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Draw a simulated series and its true change points.
    Simulate {
        id: String,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 40)]
        m: usize,
        /// 1-based row of the design's parameter menu.
        #[arg(long)]
        param: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Series CSV; the truth is written next to it as `<stem>.truth.json`.
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare estimated against true change points.
    Evaluate {
        truth: PathBuf,
        estimate: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Export the scan surface `(m, l, v)` of one segment.
    Profile {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// First observation of the segment (1-based).
        #[arg(long, default_value_t = 1)]
        first: usize,
        /// Last observation of the segment (1-based); defaults to the end.
        #[arg(long)]
        last: Option<usize>,
    },
    /// List the simulation designs.
    List,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    metric: MetricArg,
    #[arg(long, default_value_t = DEFAULT_MIN_SEG)]
    min_seg: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Circular,
    Precomputed,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Circular => Metric::Circular,
            MetricArg::Precomputed => Metric::Precomputed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Schedule {
    Fixed,
    Decreasing,
}

#[derive(Serialize, Deserialize)]
struct Truth {
    example: String,
    n: usize,
    m: usize,
    param: Option<usize>,
    seed: u64,
    length: usize,
    changepoints: Vec<usize>,
}

/// The two fields `evaluate` needs; detection reports carry them too.
#[derive(Deserialize)]
struct ChangePointFile {
    length: usize,
    changepoints: Vec<usize>,
}

fn load_distances(path: &Path, metric: Metric) -> Result<DistanceMatrix, CpdError> {
    let file = BufReader::new(File::open(path)?);
    match metric {
        Metric::Precomputed => read_matrix_csv(file),
        _ => pairwise_distance_matrix(&read_series_csv(file, metric)?, metric),
    }
}

fn write_output(path: Option<&Path>, body: &[u8]) -> Result<(), CpdError> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            w.write_all(body)?;
            w.flush()?;
        }
        None => std::io::stdout().write_all(body)?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CpdError> {
    let mut body =
        serde_json::to_vec_pretty(value).map_err(|e| CpdError::invalid_input(e.to_string()))?;
    body.push(b'\n');
    Ok(body)
}

fn read_changepoints(path: &Path) -> Result<ChangePointFile, CpdError> {
    let file = BufReader::new(File::open(path)?);
    serde_json::from_reader(file)
        .map_err(|e| CpdError::invalid_input(format!("{}: {e}", path.display())))
}

fn truth_path(series: &Path) -> PathBuf {
    let stem = series
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    series.with_file_name(format!("{stem}.truth.json"))
}

fn run(command: Command) -> Result<(), CpdError> {
    match command {
        Command::Detect {
            input,
            common,
            replicates,
            p_threshold,
            block_size,
            seed,
            schedule,
            threads,
        } => {
            let config = DetectionConfig {
                metric: common.metric.into(),
                min_seg: common.min_seg,
                replicates,
                p_threshold,
                block_size,
                stride: common.stride,
                seed,
                schedule: match schedule {
                    Schedule::Fixed => ThresholdSchedule::Fixed,
                    Schedule::Decreasing => ThresholdSchedule::Decreasing,
                },
            };
            config.validate()?;
            let d = load_distances(&input, config.metric)?;
            let report = match threads {
                Some(0) => return Err(CpdError::invalid_input("--threads must be >= 1")),
                Some(t) => rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| CpdError::invalid_input(e.to_string()))?
                    .install(|| detect(&d, &config))?,
                None => detect(&d, &config)?,
            };
            write_output(common.output.as_deref(), &to_json(&report)?)
        }
        Command::Simulate {
            id,
            n,
            m,
            param,
            seed,
            output,
        } => {
            let spec = ExampleSpec {
                id,
                n,
                m,
                param,
                seed,
            };
            let sim = gen_example(&spec)?;
            let mut csv = Vec::new();
            write_series_csv(&mut csv, &sim.observations)?;
            write_output(Some(&output), &csv)?;
            let truth = Truth {
                example: spec.id,
                n,
                m,
                param,
                seed,
                length: sim.len(),
                changepoints: sim.changepoints,
            };
            write_output(Some(&truth_path(&output)), &to_json(&truth)?)
        }
        Command::Evaluate {
            truth,
            estimate,
            output,
        } => {
            let t = read_changepoints(&truth)?;
            let e = read_changepoints(&estimate)?;
            if t.length != e.length {
                return Err(CpdError::invalid_input(format!(
                    "series lengths differ: {} vs {}",
                    t.length, e.length
                )));
            }
            let metrics = evaluate(&t.changepoints, &e.changepoints, t.length)?;
            let doc = json!({ "length": t.length, "metrics": metrics });
            write_output(output.as_deref(), &to_json(&doc)?)
        }
        Command::Profile {
            input,
            common,
            first,
            last,
        } => {
            let metric: Metric = common.metric.into();
            let d = load_distances(&input, metric)?;
            let last = last.unwrap_or(d.len());
            if first == 0 || first > last || last > d.len() {
                return Err(CpdError::invalid_input(format!(
                    "segment {first}..={last} is not inside 1..={}",
                    d.len()
                )));
            }
            let points = scan_profile(
                &d,
                Segment::new(first - 1, last)?,
                common.min_seg,
                common.stride,
            )?;
            let mut csv = Vec::new();
            write_profile_csv(&mut csv, &points)?;
            write_output(common.output.as_deref(), &csv)
        }
        Command::List => write_output(None, &to_json(&list_examples())?),
    }
}

fn error_document(kind: &str, message: &str, violations: Option<serde_json::Value>) -> String {
    let mut err = json!({ "kind": kind, "message": message });
    if let Some(v) = violations {
        err["violations"] = v;
    }
    serde_json::to_string_pretty(&json!({ "error": err })).expect("static JSON shape")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            println!("{}", error_document("usage", e.to_string().trim(), None));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let violations = match &e {
                CpdError::InvalidDistanceMatrix(v) => serde_json::to_value(v).ok(),
                _ => None,
            };
            println!("{}", error_document(e.kind(), &e.to_string(), violations));
            ExitCode::from(2)
        }
    }
}

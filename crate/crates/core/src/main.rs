use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hydrosim::geometry::Pose2;
use hydrosim::planner::{hybrid_astar, PlannerParams};
use hydrosim::sampler::{monte_carlo, FaultModel, SamplerParams};
use hydrosim::sim::{self, metrics_from_log, timeseries_csv, MetricsReport, ParsedLog, Scenario, SimError, Termination};
use hydrosim::world_map::{load_pgm, preprocess, CannyConfig, OccupancyGrid, PreprocessConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_MISSION: u8 = 3;

#[derive(Parser)]
#[command(name = "hydrosim", version, about = "Surface-vehicle sampling mission simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write the log, metrics and time series.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute metrics from a log.
    Metrics { log: PathBuf },
    /// Re-emit log records as JSON lines on stdout.
    Replay {
        log: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
    },
    /// Run a scenario over a seed range, e.g. `--seeds 0..8`.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        seeds: String,
    },
    /// Map tools.
    Map {
        #[command(subcommand)]
        cmd: MapCmd,
    },
    /// Plan between two poses on a grid file.
    Plan {
        grid: PathBuf,
        #[arg(long, num_args = 3, allow_negative_numbers = true)]
        start: Vec<f64>,
        #[arg(long, num_args = 3, allow_negative_numbers = true)]
        goal: Vec<f64>,
    },
    /// Sampler Monte-Carlo with the calibrated fault model.
    Sample {
        #[arg(long, default_value_t = 10_000)]
        cycles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        dt: f64,
        /// Seconds between cycle end and retrieval.
        #[arg(long, default_value_t = 1800.0)]
        hold: f64,
    },
    /// Serve the ground-station API.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum MapCmd {
    /// PGM image to occupancy grid JSON.
    Preprocess {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        resolution: f64,
        #[arg(long, default_value_t = 1)]
        erode: usize,
        #[arg(long, default_value_t = 50)]
        low: u8,
        #[arg(long, default_value_t = 150)]
        high: u8,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, env = "HYDROSIM_DATA", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    max_sessions: usize,
    /// Sim seconds per wall second; 0 runs as fast as possible.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

enum Failure {
    Config(String),
    Mission(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io<T>(r: std::io::Result<T>, what: &Path) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(format!("{}: {e}", what.display())))
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn check_outcome(m: &MetricsReport, sc: &Scenario) -> Result<(), Failure> {
    match m.termination {
        Some(Termination::MissionSuccess) => Ok(()),
        Some(Termination::Depleted) if sc.run_until_depleted => Ok(()),
        other => Err(Failure::Mission(format!("run ended with {other:?}"))),
    }
}

fn read_log(path: &Path) -> Result<ParsedLog, Failure> {
    let text = io(std::fs::read_to_string(path), path)?;
    Ok(ParsedLog::parse(&text)?)
}

fn parse_range(s: &str) -> Result<std::ops::Range<u64>, Failure> {
    let bad = || Failure::Config(format!("seed range '{s}' is not A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if b <= a {
        return Err(bad());
    }
    Ok(a..b)
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run { scenario, seed, out } => {
            let (mut sc, base) = Scenario::load(&scenario)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            let (log, metrics) = sim::run(sc.resolve(&base)?)?;
            io(std::fs::create_dir_all(&out), &out)?;
            let parsed = log.parse()?;
            let files = [
                ("log.jsonl", log.as_str().to_owned()),
                ("metrics.json", serde_json::to_string_pretty(&metrics).expect("serializable")),
                ("samples.csv", metrics.samples_csv()),
                ("timeseries.csv", timeseries_csv(&parsed)),
            ];
            for (name, body) in files {
                let p = out.join(name);
                io(std::fs::write(&p, body), &p)?;
            }
            println!("log {} sha256 {}", out.join("log.jsonl").display(), log.hash());
            print_json(&metrics);
            check_outcome(&metrics, &sc)
        }
        Cmd::Metrics { log } => {
            let parsed = read_log(&log)?;
            print_json(&metrics_from_log(&parsed));
            Ok(())
        }
        Cmd::Replay { log, rate } => {
            let text = io(std::fs::read_to_string(&log), &log)?;
            sim::replay(&text, rate, |r| println!("{}", serde_json::to_string(r).expect("serializable")))?;
            Ok(())
        }
        Cmd::Sweep { scenario, seeds } => {
            let range = parse_range(&seeds)?;
            let (sc, base) = Scenario::load(&scenario)?;
            let results = sim::sweep(&sc.resolve(&base)?, range)?;
            for r in &results {
                let wp = r.metrics.waypoints.as_ref();
                println!(
                    "seed {:>6}  {}  {:?}  precision {}  mean_err {}",
                    r.seed,
                    &r.log_hash[..16],
                    r.metrics.termination,
                    wp.map_or("-".into(), |w| format!("{:.1}%", w.precision_pct)),
                    wp.map_or("-".into(), |w| format!("{:.3} m", w.mean_err_m)),
                );
            }
            Ok(())
        }
        Cmd::Map { cmd: MapCmd::Preprocess { input, out, resolution, erode, low, high } } => {
            let bytes = io(std::fs::read(&input), &input)?;
            let img = load_pgm(&bytes).map_err(|e| Failure::Config(e.to_string()))?;
            let cfg = PreprocessConfig {
                canny: CannyConfig { low, high, ..Default::default() },
                erode_radius: erode,
                resolution,
                origin: Pose2::default(),
            };
            let grid = preprocess(&img, &cfg).map_err(|e| Failure::Config(e.to_string()))?;
            io(std::fs::write(&out, serde_json::to_string(&grid).expect("serializable")), &out)?;
            println!("{}x{} grid, {} occupied cells", grid.width(), grid.height(), grid.count(hydrosim::world_map::Cell::Occupied));
            Ok(())
        }
        Cmd::Plan { grid, start, goal } => {
            let bytes = io(std::fs::read(&grid), &grid)?;
            let g: OccupancyGrid = serde_json::from_slice(&bytes).map_err(|e| Failure::Config(e.to_string()))?;
            let pose = |v: &[f64]| Pose2::new(v[0], v[1], v[2]);
            let traj = hybrid_astar(&g, pose(&start), pose(&goal), &PlannerParams::default())
                .map_err(|e| Failure::Mission(e.to_string()))?;
            print_json(&traj);
            Ok(())
        }
        Cmd::Sample { cycles, seed, dt, hold } => {
            let r = monte_carlo(&SamplerParams::default(), &FaultModel::calibrated(), cycles, seed, dt, hold);
            print_json(&r);
            Ok(())
        }
        Cmd::Serve(args) => serve(args),
    }
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let cfg = hydrosim::bridge::BridgeConfig {
        data_dir: args.data_dir,
        default_scenario: args.scenario,
        max_running: args.max_sessions,
        speed: args.speed,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Config(e.to_string()))?;
    rt.block_on(hydrosim::bridge::serve(cfg, args.port)).map_err(|e| Failure::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::init();
    match execute(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Mission(m)) => {
            eprintln!("mission failed: {m}");
            ExitCode::from(EXIT_MISSION)
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cbfmotion::benchmark::{run_benchmark, FamilyName, S2Signs, ScenarioFamily, DEFAULT_SEED, DEFAULT_TRIALS};
use cbfmotion::check::{run_checks, CheckConfig, Fault};
use cbfmotion::controller::VariantTag;
use cbfmotion::export::{summary_json, trajectory_csv, trajectory_svg, RunSummary};
use cbfmotion::scenario_file::ScenarioFile;
use cbfmotion::simulation::{demo_scenario, simulate, DemoConfig, Scenario};
use cbfmotion::Point2;

/// Exit status for a run whose controller failed the task.
const EXIT_TASK_FAILURE: u8 = 2;
const EXIT_ERROR: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "cbfmotion", version, about = "CBF/CLF QP controllers for planar arms among moving obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario file.
    Run(RunArgs),
    /// Run the moving-target reaching demo.
    Demo(DemoArgs),
    /// Run the randomized S1/S2/S3 benchmark.
    Bench(BenchArgs),
    /// Run the fast invariant suite.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Output formats.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json,svg")]
    format: Vec<Format>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Controller variant; overrides the file.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<VariantTag>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Initial joint configuration, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    initial_q: Option<Vec<f64>>,
    /// Start position of the third obstacle, `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    third_obstacle: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "S1,S2,S3", value_parser = parse_family)]
    families: Vec<FamilyName>,
    /// Comma-separated variant names, or `all`.
    #[arg(long, default_value = "all")]
    variants: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Velocity sign convention for S2/S3 obstacles.
    #[arg(long, default_value = "toward", value_parser = parse_signs)]
    s2_signs: S2Signs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// `json` adds a per-cell JSON report next to the CSV and table.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv")]
    format: Vec<Format>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FaultArg {
    SdfGradSign,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Print residual magnitudes per property.
    #[arg(long)]
    verbose: bool,
    /// Deliberately break a component to exercise the suite.
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

fn parse_variant(s: &str) -> Result<VariantTag, String> {
    s.parse().map_err(|e: cbfmotion::Error| e.to_string())
}

fn parse_family(s: &str) -> Result<FamilyName, String> {
    s.parse().map_err(|e: cbfmotion::Error| e.to_string())
}

fn parse_signs(s: &str) -> Result<S2Signs, String> {
    s.parse().map_err(|e: cbfmotion::Error| e.to_string())
}

fn parse_variant_list(s: &str) -> Result<Vec<VariantTag>, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(VariantTag::BENCHMARK.to_vec());
    }
    s.split(',').map(parse_variant).collect()
}

type CliResult = Result<u8, String>;

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, String> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))
}

fn simulate_and_export(scenario: &Scenario, output: &OutputArgs) -> CliResult {
    ensure_dir(&output.out)?;
    let log = simulate(scenario).map_err(|e| e.to_string())?;
    let mut written = Vec::new();
    for f in &output.format {
        let path = match f {
            Format::Csv => write_file(&output.out, "trajectory.csv", &trajectory_csv(&log))?,
            Format::Json => write_file(&output.out, "summary.json", &summary_json(&log).map_err(|e| e.to_string())?)?,
            Format::Svg => {
                let svg = trajectory_svg(scenario, &log).map_err(|e| e.to_string())?;
                write_file(&output.out, "trajectory.svg", &svg)?
            }
        };
        written.push(path);
    }
    let s = RunSummary::from_log(&log);
    let time = s.time_to_reach.map_or("-".to_string(), |t| format!("{t:.2} s"));
    let dmin = s.min_raw_distance.map_or("-".to_string(), |d| format!("{d:.4} m"));
    println!(
        "{}: {} (time to reach {time}, path length {:.3} m, min distance {dmin})",
        s.variant, s.outcome, s.path_length
    );
    if output.verbose {
        println!("steps {} (infeasible {}), final time {:.2} s", s.steps, s.infeasible_steps, s.final_time);
        for p in &written {
            println!("wrote {}", p.display());
        }
    }
    Ok(if log.success() { 0 } else { EXIT_TASK_FAILURE })
}

fn cmd_run(args: &RunArgs) -> CliResult {
    let file = ScenarioFile::load(&args.scenario).map_err(|e| format!("{}: {e}", args.scenario.display()))?;
    let scenario = file.to_scenario(args.variant).map_err(|e| format!("{}: {e}", args.scenario.display()))?;
    simulate_and_export(&scenario, &args.output)
}

fn cmd_demo(args: &DemoArgs) -> CliResult {
    let mut cfg = DemoConfig::default();
    if let Some(q) = &args.initial_q {
        cfg.initial_q = q.clone().into();
    }
    if let Some(p) = &args.third_obstacle {
        cfg.third_obstacle = Point2::new(p[0], p[1]);
    }
    simulate_and_export(&demo_scenario(&cfg), &args.output)
}

fn cmd_bench(args: &BenchArgs) -> CliResult {
    let variants = parse_variant_list(&args.variants)?;
    ensure_dir(&args.out)?;
    let families: Vec<ScenarioFamily> = args
        .families
        .iter()
        .map(|f| ScenarioFamily::with_signs(*f, args.seed, args.s2_signs).with_trials(args.trials))
        .collect();
    let report = run_benchmark(&families, &variants).map_err(|e| e.to_string())?;
    let table = report.to_table();
    print!("{table}");
    write_file(&args.out, "bench.txt", &table)?;
    if args.format.contains(&Format::Csv) {
        write_file(&args.out, "bench.csv", &report.to_csv())?;
    }
    if args.format.contains(&Format::Json) {
        let json = serde_json::to_string_pretty(&report.cells).map_err(|e| e.to_string())?;
        write_file(&args.out, "bench.json", &json)?;
    }
    if args.verbose {
        for (family, skipped) in &report.skipped {
            if !skipped.is_empty() {
                println!("{family}: skipped trials {skipped:?}");
            }
        }
    }
    Ok(0)
}

fn cmd_check(args: &CheckArgs) -> CliResult {
    let fault = match args.inject_fault {
        Some(FaultArg::SdfGradSign) => Fault::SdfGradSign,
        None => Fault::None,
    };
    let results = run_checks(&CheckConfig { seed: args.seed, fault, ..CheckConfig::default() });
    for r in &results {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        if args.verbose {
            println!(
                "{mark} {:<24} residual {:.3e} (tolerance {:.0e}, {} samples)",
                r.name, r.residual, r.tolerance, r.samples
            );
        } else {
            println!("{mark} {}", r.name);
        }
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed properties: {}", failed.join(", "));
        Ok(EXIT_TASK_FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Demo(a) => cmd_demo(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

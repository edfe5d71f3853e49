use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecosim_core::semantic::{apply_filter, parse_groups, FilterMap};
use ecosim_core::sim::output::{write_scenario, write_summary};
use ecosim_core::sim::{run_scenario, summarize, Scenario, ScenarioConfig};
use ecosim_core::EcoError;

#[derive(Debug, Parser)]
#[command(name = "ecosim", version, about = "Digital ecosystem simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its series, histogram and summary
    Run(RunArgs),
    /// Run several scenarios on shared seeds
    Compare(CompareArgs),
    /// Render numeric descriptions through a filter map
    Filter(FilterArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Request events per run
    #[arg(long)]
    steps: Option<usize>,
    /// Independent runs
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed; run seeds are derived from it
    #[arg(long)]
    seed: Option<u64>,
    /// `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// baseline, migration-control, pattern-control, targeted-nn or targeted-svm
    #[arg(long)]
    scenario: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Comma-separated scenario names (default: all five)
    #[arg(long)]
    scenarios: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Filter map file (`id<TAB>Label`, `id,value<TAB>Text`)
    #[arg(long)]
    map: PathBuf,
    /// Descriptions to render, one description or request per line
    #[arg(long = "in")]
    input: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<EcoError> for Failure {
    fn from(e: EcoError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply(&text)?;
    }
    if let Some(s) = common.steps {
        cfg.steps = s;
    }
    if let Some(r) = common.runs {
        cfg.runs = r;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cfg: &ScenarioConfig, scenarios: &[Scenario], out: &Path) -> Result<(), Failure> {
    let mut rows = Vec::with_capacity(scenarios.len());
    for &s in scenarios {
        let cfg = cfg.clone().with_scenario(s);
        let runs = run_scenario(&cfg)?;
        write_scenario(out, s, &runs)?;
        let agg = summarize(&runs)?;
        println!("{:<18} mean_final_rate={:.2} std_dev={:.2} runs={}", s.name(), agg.mean_final_rate, agg.std_dev, agg.runs);
        rows.push((s, agg));
    }
    write_summary(out, &rows)?;
    Ok(())
}

fn filter(args: &FilterArgs) -> Result<(), Failure> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", p.display())));
    let map = FilterMap::parse(&read(&args.map)?)?;
    let text = read(&args.input)?;
    for (n, line) in text.lines().enumerate() {
        let groups = parse_groups(line).map_err(|e| Failure::Config(format!("{} line {}: {}", args.input.display(), n + 1, e.detail())))?;
        for g in groups {
            println!("{}", apply_filter(&g, &map));
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(a) => {
            let mut cfg = load_config(&a.common)?;
            if let Some(s) = &a.scenario {
                cfg.scenario = s.parse()?;
            }
            simulate(&cfg, &[cfg.scenario], &a.common.out)
        }
        Command::Compare(a) => {
            let cfg = load_config(&a.common)?;
            let scenarios = match &a.scenarios {
                Some(list) => list.split(',').map(str::parse).collect::<Result<Vec<Scenario>, _>>()?,
                None => Scenario::ALL.to_vec(),
            };
            simulate(&cfg, &scenarios, &a.common.out)
        }
        Command::Filter(a) => filter(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("ecosim: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("ecosim: {m}");
            ExitCode::from(2)
        }
    }
}

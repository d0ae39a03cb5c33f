use clap::{Parser, Subcommand};
use guidebot_core::harness::{self, Scenario, ServeConfig, Simulation};
use guidebot_core::svp::{compute_visibility_grid, Landmark, SvpConfig};
use guidebot_core::{assets, Language, SemanticMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "guidebot", version, about = "Mall guide robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Bundled scenario name or scenario file.
    #[arg(long)]
    scenario: String,
    /// Map file replacing the scenario's map.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["en", "fi"])]
    lang: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario headless and write its transcript.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Transcript file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario in real time behind the snapshot/command service.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Ticks per second.
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        /// Transcript file written while serving.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a landmark's visibility grid; writes a PGM image and a numeric matrix.
    Visgrid {
        /// Place or access point id.
        #[arg(long)]
        landmark: String,
        #[arg(long)]
        map: Option<PathBuf>,
        /// Image path; the matrix goes next to it with a .txt extension.
        #[arg(long, default_value = "visgrid.pgm")]
        out: PathBuf,
    },
    /// Check a map and/or a scenario file.
    Validate {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
    },
}

enum Failure {
    /// Bad input; exit status 2.
    Invalid(String),
    Other(String),
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Other(format!("cannot read {}: {e}", path.display())))
}

fn load_map(path: Option<&Path>) -> Result<SemanticMap, Failure> {
    let text = match path {
        Some(p) => read(p)?,
        None => assets::MINIMALL_MAP.to_string(),
    };
    SemanticMap::load(&text).map_err(|e| Failure::Invalid(e.to_string()))
}

fn load_scenario(name: &str) -> Result<Scenario, Failure> {
    let path = Path::new(name);
    if path.exists() {
        return Scenario::from_json(&read(path)?).map_err(|e| Failure::Invalid(e.to_string()));
    }
    Scenario::bundled(name).ok_or_else(|| Failure::Invalid(format!("no scenario file or bundled scenario '{name}'")))
}

fn scenario(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let mut s = load_scenario(&args.scenario)?;
    if let Some(m) = &args.map {
        load_map(Some(m))?;
        s.map = Some(m.display().to_string());
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(lang) = &args.lang {
        s.language = lang.parse::<Language>().map_err(|e| Failure::Invalid(e.to_string()))?;
    }
    Ok(s)
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run { scenario: args, out } => {
            let s = scenario(&args)?;
            let t = harness::run(&s).map_err(|e| Failure::Invalid(e.to_string()))?;
            let text = t.to_jsonl();
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| Failure::Other(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
        }
        Cmd::Serve { scenario: args, port, rate, out } => {
            let s = scenario(&args)?;
            let sim = Simulation::new(s).map_err(|e| Failure::Invalid(e.to_string()))?;
            let config = ServeConfig { addr: format!("127.0.0.1:{port}"), rate, transcript: out };
            let handle = harness::serve(sim, config).map_err(|e| Failure::Other(e.to_string()))?;
            eprintln!("serving on {}", handle.local_addr());
            handle.wait();
        }
        Cmd::Visgrid { landmark, map, out } => {
            let map = load_map(map.as_deref())?;
            let footprint = match (map.place(&landmark), map.access_point(&landmark)) {
                (Some(p), _) => p.footprint.clone(),
                (None, Some(a)) => a.visible_footprint(),
                (None, None) => return Err(Failure::Invalid(format!("unknown landmark '{landmark}'"))),
            };
            let grid = map.occupancy_grid().ok_or_else(|| Failure::Invalid("map has no occupancy grid".into()))?;
            let lm = Landmark::from_footprint(&landmark, &footprint, SvpConfig::default().samples);
            let vis = compute_visibility_grid(&grid, &lm).map_err(|e| Failure::Invalid(e.to_string()))?;
            let write = |p: &Path, bytes: &[u8]| {
                std::fs::write(p, bytes).map_err(|e| Failure::Other(format!("{}: {e}", p.display())))
            };
            write(&out, &vis.to_pgm())?;
            write(&out.with_extension("txt"), vis.to_matrix_text().as_bytes())?;
        }
        Cmd::Validate { map, scenario } => {
            if map.is_none() && scenario.is_none() {
                return Err(Failure::Invalid("nothing to validate: pass --map and/or --scenario".into()));
            }
            if let Some(m) = map {
                load_map(Some(&m))?;
            }
            if let Some(s) = scenario {
                let s = load_scenario(&s)?;
                Simulation::new(s).map_err(|e| Failure::Invalid(e.to_string()))?;
            }
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}

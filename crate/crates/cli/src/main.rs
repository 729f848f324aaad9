use std::fs::{self, File};
use std::io::{BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use neurocactus::output::{
    emit_svg, read_points_csv, read_waypoints_csv, write_input_csv, write_trajectory_csv, write_weights_csv,
    Selection,
};
use neurocactus::resilience::DropoutPlanSpec;
use neurocactus::runs::{run_analysis, run_cluster, run_energy, run_resilience, run_simulation};
use neurocactus::scenario::{apply_seed_env, builtin_names, load_scenario, Scenario};

/// Hybrid Hebbian network runs and controllability audits.
///
/// SCENARIO is a path to a scenario JSON file or the name of a bundled one
/// (sixteen_node, macaque, macaque_lesioned, clustering). NEUROCACTUS_SEED
/// overrides the scenario seed.
#[derive(Parser)]
#[command(name = "neurocactus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the network and write trajectory.csv, weights_p*.csv and report.json.
    Simulate {
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write states.svg and weights.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Cactus, stability, structural and per-slot rank audits as JSON.
    Analyze { scenario: String },
    /// Minimum-energy steering through waypoints (CSV: slot_index,x_1..x_N).
    Energy {
        scenario: String,
        #[arg(long)]
        waypoints: PathBuf,
        /// Extra input nodes for the augmentation comparison.
        #[arg(long, value_delimiter = ',')]
        augment: Vec<String>,
        /// Write the steering input as u_star.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit and run a dropout plan (JSON).
    Resilience {
        scenario: String,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Sequential clustering; points CSV is p1,p2[,label].
    Cluster {
        scenario: String,
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Parse and validate a scenario.
    Validate { scenario: String },
}

type Result<T> = std::result::Result<T, String>;

fn load(name: &str) -> Result<Scenario> {
    let mut s = load_scenario(name).map_err(|e| {
        if Path::new(name).exists() {
            format!("{name}: {e}")
        } else {
            format!("{e} (bundled: {})", builtin_names().join(", "))
        }
    })?;
    apply_seed_env(&mut s).map_err(|e| e.to_string())?;
    eprintln!("seed: {}", s.seed());
    Ok(s)
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(format!("stdout: {e}")),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    emit(&serde_json::to_string_pretty(v).map_err(|e| e.to_string())?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn simulate(name: &str, out: &Path, svg: bool) -> Result<()> {
    let s = load(name)?;
    let run = run_simulation(&s).map_err(|e| e.to_string())?;
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    write_trajectory_csv(&run.trajectory, create(&out.join("trajectory.csv"))?).map_err(|e| e.to_string())?;
    let width = run.trajectory.slot_count().saturating_sub(1).to_string().len();
    for (p, a) in run.trajectory.weights.iter().enumerate() {
        let path = out.join(format!("weights_p{p:0width$}.csv"));
        write_weights_csv(&run.graph, a, create(&path)?).map_err(|e| e.to_string())?;
    }
    let report = serde_json::to_string_pretty(&run.report).map_err(|e| e.to_string())?;
    fs::write(out.join("report.json"), report + "\n").map_err(|e| e.to_string())?;
    if svg {
        for (file, sel) in [
            ("states.svg", Selection::all_states(&run.graph)),
            ("weights.svg", Selection::all_weights(&run.graph)),
        ] {
            match emit_svg(&run.trajectory, &run.graph, &sel) {
                Ok(doc) => fs::write(out.join(file), doc).map_err(|e| e.to_string())?,
                Err(e) => eprintln!("{file}: {e}"),
            }
        }
    }
    emit(&format!(
        "{}: {} slots, peak |x| {:.6}, polytope violations {}, output in {}",
        s.name(),
        run.report.slots,
        run.report.peak_abs,
        run.report.polytope_violations,
        out.display()
    ))
}

fn energy(name: &str, waypoints: &Path, augment: &[String], out: Option<&Path>) -> Result<()> {
    let s = load(name)?;
    let n = s.effective().map_err(|e| e.to_string())?.graph.node_count();
    let wps = read_waypoints_csv(open(waypoints)?, n).map_err(|e| format!("{}: {e}", waypoints.display()))?;
    let run = run_energy(&s, &wps, augment).map_err(|e| e.to_string())?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        write_input_csv(&run.input, create(&dir.join("u_star.csv"))?).map_err(|e| e.to_string())?;
    }
    print_json(&run.report)
}

fn resilience(name: &str, plan: &Path) -> Result<()> {
    let s = load(name)?;
    let text = fs::read_to_string(plan).map_err(|e| format!("{}: {e}", plan.display()))?;
    let spec: DropoutPlanSpec = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", plan.display()))?;
    let (record, _) = run_resilience(&s, &spec).map_err(|e| e.to_string())?;
    print_json(&record)
}

fn cluster(name: &str, points: Option<&Path>) -> Result<()> {
    let s = load(name)?;
    let pts = match points {
        Some(p) => Some(read_points_csv(open(p)?).map_err(|e| format!("{}: {e}", p.display()))?),
        None => None,
    };
    let r = run_cluster(&s, pts).map_err(|e| e.to_string())?;
    print_json(&r)
}

fn validate(name: &str) -> Result<()> {
    let s = load(name)?;
    emit(&format!(
        "{}: ok ({} nodes, {} edges, {} inputs, {} slots)",
        s.name(),
        s.graph.node_count(),
        s.graph.edges().len(),
        s.graph.inputs().len(),
        s.slots
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate { scenario, out, svg } => simulate(scenario, out, *svg),
        Command::Analyze { scenario } => load(scenario)
            .and_then(|s| run_analysis(&s).map_err(|e| e.to_string()))
            .and_then(|r| print_json(&r)),
        Command::Energy {
            scenario,
            waypoints,
            augment,
            out,
        } => energy(scenario, waypoints, augment, out.as_deref()),
        Command::Resilience { scenario, plan } => resilience(scenario, plan),
        Command::Cluster { scenario, points } => cluster(scenario, points.as_deref()),
        Command::Validate { scenario } => validate(scenario),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

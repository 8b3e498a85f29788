use std::collections::BTreeSet;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use dmapf::baseline::run_events_replan_all;
use dmapf::bench::{emit_csv, emit_table, parse_suite, run_comparison, Status};
use dmapf::resolver::{run_events, ResolverOptions};
use dmapf::scenario_io::{
    existing_team, generate_instance, parse_instance, parse_solution, write_instance, write_solution, Instance,
};
use dmapf::verify::check_solution;
use dmapf::{ConflictConfig, Error};

mod report;

#[derive(Parser)]
#[command(name = "dmapf", version, about = "Repair multi-agent grid plans when new agents join")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    ConflictResolution,
    ReplanAll,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the joining agents of an instance.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// `auto` or a number of timesteps.
        #[arg(long, value_parser = parse_makespan)]
        makespan: Makespan,
        /// Allow agents to swap cells head-on.
        #[arg(long)]
        no_swap_conflicts: bool,
        /// Count only vertex overlaps in the conflict penalty.
        #[arg(long)]
        vertex_only_penalty: bool,
        #[arg(long)]
        out_solution: PathBuf,
        #[arg(long)]
        out_report: PathBuf,
    },
    /// Check a solution against an instance.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Run both methods over a suite and write a CSV.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        /// Per-method limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Directory for the solution files of each run.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a random obstacle-free instance.
    Gen {
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        #[arg(long)]
        existing: usize,
        #[arg(long)]
        new: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy)]
enum Makespan {
    Auto,
    Fixed(u32),
}

fn parse_makespan(s: &str) -> Result<Makespan, String> {
    match s {
        "auto" => Ok(Makespan::Auto),
        _ => s.parse().map(Makespan::Fixed).map_err(|_| format!("expected `auto` or a number, found `{s}`")),
    }
}

/// Exit statuses.
const SOLVED: u8 = 0;
const UNSOLVED: u8 = 1;
const USAGE: u8 = 2;
const TIMED_OUT: u8 = 3;

enum Failure {
    Usage(String),
    TimeLimit,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TimeLimit => Failure::TimeLimit,
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn read(path: &FsPath) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &FsPath, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_instance(path: &FsPath) -> Result<Instance, Failure> {
    parse_instance(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn solve(
    instance: &FsPath,
    mode: Mode,
    makespan: Makespan,
    cfg: ConflictConfig,
    out_solution: &FsPath,
    out_report: &FsPath,
) -> Result<u8, Failure> {
    let inst = load_instance(instance)?;
    let makespan = inst.resolve_makespan(match makespan {
        Makespan::Auto => None,
        Makespan::Fixed(t) => Some(t),
    })?;
    let opts = ResolverOptions { cfg, deadline: None };
    let events = inst.events.len();
    let mode_name = match mode {
        Mode::ConflictResolution => "conflict-resolution",
        Mode::ReplanAll => "replan-all",
    };
    let Some(team) = existing_team(&inst, makespan, &opts)? else {
        eprintln!("the existing agents have no plan at makespan {makespan}");
        write(out_report, &report::header(mode_name, makespan, false, events))?;
        write(out_solution, "")?;
        return Ok(UNSOLVED);
    };
    let (solution, text) = match mode {
        Mode::ConflictResolution => {
            let result = run_events(&inst.grid, makespan, &team, &inst.events, &opts)?;
            let solved = result.solution.is_some();
            (result.solution, report::conflict_resolution(makespan, solved, events, &result.reports))
        }
        Mode::ReplanAll => {
            let sol = run_events_replan_all(&inst.grid, makespan, &team, &inst.events, &opts)?;
            let changed: Option<BTreeSet<_>> = sol
                .as_ref()
                .map(|s| team.iter().filter(|(t, p)| s.paths.get(&t.id) != Some(p)).map(|(t, _)| t.id).collect());
            (sol.clone(), report::replan_all(makespan, sol.is_some(), events, changed.as_ref()))
        }
    };
    write(out_report, &text)?;
    match solution {
        Some(sol) => {
            let violations = check_solution(&inst.grid, &inst.all_tasks(), &sol, &cfg);
            if let Some(v) = violations.first() {
                return Err(Failure::Usage(format!("internal error: produced an invalid solution: {v}")));
            }
            write(out_solution, &write_solution(&sol))?;
            println!("solved: {} agents, makespan {makespan}", sol.paths.len());
            Ok(SOLVED)
        }
        None => {
            write(out_solution, "")?;
            println!("unsolvable at makespan {makespan}");
            Ok(UNSOLVED)
        }
    }
}

fn verify(instance: &FsPath, solution: &FsPath) -> Result<u8, Failure> {
    let inst = load_instance(instance)?;
    let sol = parse_solution(&read(solution)?).map_err(|e| Failure::Usage(format!("{}: {e}", solution.display())))?;
    let mut violations: Vec<String> = Vec::new();
    if let Some(t) = inst.makespan.filter(|&t| t != sol.makespan) {
        violations.push(format!("solution makespan {} differs from the instance's {t}", sol.makespan));
    }
    violations.extend(
        check_solution(&inst.grid, &inst.all_tasks(), &sol, &ConflictConfig::default()).iter().map(|v| v.to_string()),
    );
    if violations.is_empty() {
        println!("valid");
        Ok(SOLVED)
    } else {
        for v in &violations {
            println!("{v}");
        }
        println!("invalid: {} violation(s)", violations.len());
        Ok(UNSOLVED)
    }
}

fn bench(suite: &FsPath, out_csv: &FsPath, time_limit: Option<f64>, out_dir: Option<&FsPath>) -> Result<u8, Failure> {
    let limit = match time_limit {
        Some(s) if !(s.is_finite() && s > 0.0) => return Err(Failure::Usage(format!("bad time limit {s}"))),
        Some(s) => Some(Duration::from_secs_f64(s)),
        None => None,
    };
    let entries = parse_suite(&read(suite)?).map_err(|e| Failure::Usage(format!("{}: {e}", suite.display())))?;
    let base = suite.parent().unwrap_or(FsPath::new("."));
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    }
    let mut records = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let path = base.join(&entry.path);
        let inst = load_instance(&path)?;
        let name = path.file_stem().map_or_else(|| entry.path.clone(), |s| s.to_string_lossy().into_owned());
        let run = run_comparison(&name, &inst, entry.makespan, limit, ConflictConfig::default())?;
        if let Some(dir) = out_dir {
            let stem = format!("{i:03}-{name}");
            for (tag, sol) in [("subset", &run.subset_solution), ("replan-all", &run.replan_all_solution)] {
                let file = dir.join(format!("{stem}.{tag}.sol"));
                write(&file, &sol.as_ref().map(write_solution).unwrap_or_default())?;
            }
        }
        records.push(run.record);
    }
    write(out_csv, &emit_csv(&records))?;
    print!("{}", emit_table(&records));
    let timed_out =
        records.iter().any(|r| r.subset_status == Status::TimedOut || r.replan_all_status == Status::TimedOut);
    Ok(if timed_out { TIMED_OUT } else { SOLVED })
}

fn gen(width: u32, height: u32, existing: usize, new: usize, seed: u64, out: &FsPath) -> Result<u8, Failure> {
    let inst = generate_instance(width, height, existing, new, seed)?;
    write(out, &write_instance(&inst))?;
    Ok(SOLVED)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve {
            instance,
            mode,
            makespan,
            no_swap_conflicts,
            vertex_only_penalty,
            out_solution,
            out_report,
        } => {
            let mut cfg = if *no_swap_conflicts { ConflictConfig::vertex_only() } else { ConflictConfig::default() };
            if *vertex_only_penalty {
                cfg.count_swaps_in_penalty = false;
            }
            solve(instance, *mode, *makespan, cfg, out_solution, out_report)
        }
        Command::Verify { instance, solution } => verify(instance, solution),
        Command::Bench { suite, out_csv, time_limit, out_dir } => {
            bench(suite, out_csv, *time_limit, out_dir.as_deref())
        }
        Command::Gen { width, height, existing, new, seed, out } => gen(*width, *height, *existing, *new, *seed, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(USAGE)
        }
        Err(Failure::TimeLimit) => {
            eprintln!("error: time limit reached");
            ExitCode::from(TIMED_OUT)
        }
    }
}

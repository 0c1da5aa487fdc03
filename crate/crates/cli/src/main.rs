use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use nalgebra::DVector;
use petc_traffic::game::{synthesize, SchedulerStrategy};
use petc_traffic::io::{export_uppaal, model_to_json, read_input_file, InputSpec};
use petc_traffic::quant::{analyze, report};
use petc_traffic::sim::{collision_report, simulate, SimConfig};
use petc_traffic::{build_traffic_model, Error, PetcLoop, TrafficModel};

/// Traffic models, schedulers and sampling analysis for linear PETC loops.
#[derive(Debug, Parser)]
#[command(name = "petc-traffic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the traffic model of one loop.
    Abstract {
        input: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        etc_only: bool,
        /// Write the model JSON here; other exports use the same stem.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Graphviz rendering of the model.
        #[arg(long)]
        dot: bool,
        /// UPPAAL timed automaton.
        #[arg(long)]
        uppaal: bool,
    },
    /// Synthesize a collision-free scheduler for loops sharing a channel.
    Schedule {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest average inter-sample time and its optimization.
    Analyze {
        input: PathBuf,
        #[arg(long)]
        saist: bool,
        #[arg(long)]
        optimize: bool,
    },
    /// Simulate the loops, optionally under a scheduler.
    Simulate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        scheduler: Option<PathBuf>,
        /// Number of checking periods.
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        /// Initial states, one per loop, e.g. `1,1;1,-1`.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Seed for random initial states when `--x0` is absent.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(n) = std::env::var("ETC_THREADS") {
        match n.parse::<usize>() {
            Ok(n) => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("ETC_THREADS ignored: {e}");
                }
            }
            Err(_) => log::warn!("ETC_THREADS ignored: not a number"),
        }
    }
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::Unschedulable(_)) => 2,
        Some(Error::SchedulingFault { .. }) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Abstract {
            input,
            depth,
            etc_only,
            out,
            dot,
            uppaal,
        } => {
            let spec = read_spec(&input)?;
            let mut opts = spec.abstraction_options();
            if let Some(d) = depth {
                opts.depth = d;
            }
            opts.etc_only |= etc_only;
            let model = build_traffic_model(&spec.to_loop()?, &opts)?;
            log::info!("{} regions, {} transitions", model.len(), model.edges().len());
            match out {
                Some(path) => {
                    write(&path, &model_to_json(&model)?)?;
                    if dot {
                        write(&path.with_extension("dot"), &model.to_finite_system().to_dot())?;
                    }
                    if uppaal {
                        write(&path.with_extension("xml"), &export_uppaal(&model))?;
                    }
                }
                None => {
                    if dot && uppaal {
                        bail!("--dot and --uppaal together need --out");
                    } else if dot {
                        print!("{}", model.to_finite_system().to_dot());
                    } else if uppaal {
                        print!("{}", export_uppaal(&model));
                    } else {
                        print!("{}", model_to_json(&model)?);
                    }
                }
            }
        }
        Command::Schedule { inputs, out } => {
            let mut models = Vec::new();
            for input in &inputs {
                let spec = read_spec(input)?;
                let mut opts = spec.abstraction_options();
                if opts.etc_only {
                    log::warn!("{}: etc_only ignored, scheduling needs early triggers", input.display());
                    opts.etc_only = false;
                }
                models.push(build_traffic_model(&spec.to_loop()?, &opts)?);
            }
            let strategy = synthesize(&models)?;
            eprintln!("scheduler covers {} product states", strategy.len());
            let json = serde_json::to_string(&strategy)? + "\n";
            match out {
                Some(path) => write(&path, &json)?,
                None => print!("{json}"),
            }
        }
        Command::Analyze {
            input,
            saist,
            optimize,
        } => {
            let spec = read_spec(&input)?;
            let saist = saist || !optimize;
            let mut opts = spec.abstraction_options();
            // Early-trigger transitions are only needed by the optimization.
            opts.etc_only = !optimize;
            let model = build_traffic_model(&spec.to_loop()?, &opts)?;
            print!("{}", report(&analyze(&model, saist, optimize)?));
        }
        Command::Simulate {
            inputs,
            scheduler,
            horizon,
            x0,
            seed,
            csv,
        } => {
            let loops = inputs
                .iter()
                .map(|p| read_spec(p)?.to_loop().map_err(anyhow::Error::from))
                .collect::<anyhow::Result<Vec<PetcLoop>>>()?;
            let strategy: Option<SchedulerStrategy> = match &scheduler {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| p.display().to_string())?;
                    Some(serde_json::from_str(&text).map_err(Error::from)?)
                }
                None => None,
            };
            if let Some(s) = &strategy {
                check_scheduler_loops(&s.models(), &loops)?;
            }
            let mut config = match &x0 {
                Some(text) => {
                    let initial = parse_x0(text)?;
                    if initial.len() != loops.len() {
                        bail!("--x0 gives {} states for {} loops", initial.len(), loops.len());
                    }
                    SimConfig::new(loops, initial, horizon)
                }
                None => SimConfig::with_random_initial(loops, horizon, seed),
            };
            if let Some(s) = &strategy {
                config = config.scheduled(s);
            }
            let trace = simulate(&config)?;
            for i in 0..config.loops.len() {
                let early = trace.steps.iter().filter(|s| s.early[i]).count();
                println!(
                    "loop {}: {} samples, {} early",
                    i + 1,
                    trace.trigger_steps(i).len(),
                    early
                );
            }
            let collisions = collision_report(&trace);
            match collisions.first() {
                Some((step, _)) => println!(
                    "{} collisions, first at t = {:?}",
                    collisions.len(),
                    trace.steps[*step].t
                ),
                None => println!("no collisions"),
            }
            if let Some(path) = csv {
                write(&path, &trace.to_csv())?;
            }
        }
    }
    Ok(())
}

fn read_spec(path: &Path) -> anyhow::Result<InputSpec> {
    let def = read_input_file(path).with_context(|| path.display().to_string())?;
    def.into_linear().with_context(|| path.display().to_string())
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| path.display().to_string())
}

fn parse_x0(text: &str) -> anyhow::Result<Vec<DVector<f64>>> {
    text.split(';')
        .map(|part| {
            let xs = part
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("bad initial state `{part}`"))?;
            Ok(DVector::from_vec(xs))
        })
        .collect()
}

fn check_scheduler_loops(models: &[&TrafficModel], loops: &[PetcLoop]) -> anyhow::Result<()> {
    if models.len() != loops.len() {
        bail!("scheduler is for {} loops, {} given", models.len(), loops.len());
    }
    for (i, (m, l)) in models.iter().zip(loops).enumerate() {
        if (m.h() - l.h()).abs() > 1e-12 || m.kmax() != l.kmax() {
            bail!("loop {} does not match the scheduler's model", i + 1);
        }
    }
    Ok(())
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use platoon::idm_bench::{simulate_idm, total_travel_time, IdmParams, Perception};
use platoon::io::{
    read_config, time_space_svg, write_gap_csv, write_grid_csv, write_measurements_csv, write_segments_csv,
    write_trajectories_csv, Sampling,
};
use platoon::kinematics::Trajectory;
use platoon::kwt::kwt_platoon;
use platoon::lab::{
    default_measurement_grid, feasibility_grid_alpha_beta, feasibility_grid_length_saturation, gamma_sweep,
    generate_boundary, generate_boundary_behind, lead_profile, measure_macroscopic, platoon_travel_time, run_comparison, GridAlgorithm,
    ScenarioConfig,
};
use platoon::planner::{shoot_platoon_pshl, shoot_platoon_sh, shoot_platoon_shl, validate_platoon, SignalTiming};

#[derive(Parser)]
#[command(name = "platoon", version, about = "Plan, simulate and measure vehicle platoons on a signalized lane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a signalized platoon with the shooting heuristic.
    Plan(Scenario),
    /// Plan followers behind the stop-and-go lead profile.
    Lvp {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, value_enum, default_value_t = LeadAlgorithm::Pshl)]
        algorithm: LeadAlgorithm,
    },
    /// Kinematic-wave platoon behind the lead profile, with gap statistics.
    Kwt {
        #[command(flatten)]
        scenario: Scenario,
        /// Acceleration scalings for the smooth comparison runs.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0 / 3.0, 1.0, 3.0])]
        gamma: Vec<f64>,
    },
    /// Simulate the manual-driving benchmark.
    Idm {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        idm: IdmArgs,
    },
    /// Sweep feasibility rates over a parameter grid.
    FeasibilityGrid {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, value_enum, default_value_t = Sweep::AlphaBeta)]
        sweep: Sweep,
        #[arg(long, value_enum, default_value_t = Algorithm::Pshl)]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        /// Grid points per axis.
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Benchmark, full and smoothed plans, and the kinematic-wave comparison.
    Compare {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        idm: IdmArgs,
    },
    /// Parallelogram density and flow measurement of a planned or simulated run.
    Measure {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, value_enum, default_value_t = Source::Sh)]
        source: Source,
        #[command(flatten)]
        idm: IdmArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LeadAlgorithm {
    Shl,
    Pshl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Pshl,
    Sh,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    AlphaBeta,
    LengthSaturation,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Sh,
    ShSmooth,
    Idm,
}

#[derive(Clone, Copy, ValueEnum)]
enum PerceptionArg {
    Delayed,
    DelayedFrontier,
}

#[derive(Args)]
struct IdmArgs {
    #[arg(long, value_enum, default_value_t = PerceptionArg::Delayed)]
    perception: PerceptionArg,
    /// Integration step, seconds.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
}

impl IdmArgs {
    fn params(&self) -> IdmParams {
        let perception = match self.perception {
            PerceptionArg::Delayed => Perception::Delayed,
            PerceptionArg::DelayedFrontier => Perception::DelayedFrontier,
        };
        IdmParams { perception, step: self.step, ..IdmParams::default() }
    }
}

/// Scenario overrides on top of `--config` or the command's defaults.
#[derive(Args)]
struct Scenario {
    /// Flat TOML file with ScenarioConfig keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    vehicles: Option<usize>,
    #[arg(long)]
    vmax: Option<f64>,
    #[arg(long)]
    amax: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    amin: Option<f64>,
    #[arg(long)]
    jam_spacing: Option<f64>,
    #[arg(long)]
    delay: Option<f64>,
    #[arg(long)]
    green: Option<f64>,
    #[arg(long)]
    red: Option<f64>,
    #[arg(long)]
    accel_f: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    decel_f: Option<f64>,
    #[arg(long)]
    accel_b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    decel_b: Option<f64>,
    #[arg(long)]
    saturation: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

impl Scenario {
    fn resolve(&self, fallback: ScenarioConfig) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(p) => read_config(p).with_context(|| format!("reading {}", p.display()))?,
            None => fallback,
        };
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        apply!(
            seed, length, vehicles, vmax, amax, amin, jam_spacing, delay, green, red, accel_f, decel_f, accel_b, decel_b,
            saturation, alpha, beta
        );
        c.validate()?;
        fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(c)
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn horizon(trajectories: &[Trajectory], cfg: &ScenarioConfig) -> f64 {
    trajectories
        .iter()
        .filter_map(|p| p.inverse(cfg.length).ok())
        .fold(0.0, f64::max)
        + 10.0
}

fn export(dir: &Path, stem: &str, trajectories: &[Trajectory], cfg: &ScenarioConfig) -> Result<()> {
    let t_end = horizon(trajectories, cfg);
    let sampling = Sampling { step: 0.1, t_end, x_max: cfg.length + 50.0 };
    write_trajectories_csv(create(dir, &format!("{stem}_trajectories.csv"))?, trajectories, &sampling)?;
    write_segments_csv(create(dir, &format!("{stem}_segments.csv"))?, trajectories)?;
    let t0 = trajectories.iter().map(|p| p.start_time()).filter(|t| t.is_finite()).fold(f64::INFINITY, f64::min).min(0.0);
    let svg = time_space_svg(trajectories, (t0, t_end), (0.0, cfg.length + 50.0), Some(cfg.length));
    fs::write(dir.join(format!("{stem}.svg")), svg)?;
    Ok(())
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "n/a".to_string(), |t| format!("{t:.2} s"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Plan(s) => {
            let cfg = s.resolve(ScenarioConfig::default())?;
            let bc = generate_boundary(&cfg)?;
            let lim = cfg.limits();
            let r = shoot_platoon_sh(&bc, &cfg.signal(), &lim, &cfg.controls(), cfg.length)?;
            if let Some(f) = &r.failure {
                println!("infeasible: vehicle {} ({})", f.vehicle, f.reason);
                export(&s.out_dir, "sh_partial", &r.partial, &cfg)?;
                return Ok(());
            }
            let violations = validate_platoon(&r.trajectories, &bc, &cfg.signal(), &lim, cfg.length);
            println!("feasible: {} vehicles, violations: {}", r.trajectories.len(), violations.len());
            println!("total travel time: {}", fmt_time(platoon_travel_time(&r, &bc, cfg.length)));
            export(&s.out_dir, "sh", &r.trajectories, &cfg)?;
        }
        Command::Lvp { scenario: s, algorithm } => {
            let cfg = s.resolve(ScenarioConfig::lead_vehicle_default())?;
            let lim = cfg.limits();
            let lead = lead_profile(&lim);
            let bc = generate_boundary_behind(&cfg, &lead)?;
            let r = match algorithm {
                LeadAlgorithm::Shl => shoot_platoon_shl(&lead, &bc, &lim, cfg.accel_f, cfg.decel_f)?,
                LeadAlgorithm::Pshl => shoot_platoon_pshl(&lead, &bc, &lim, cfg.accel_f, cfg.decel_f)?,
            };
            if !r.feasible {
                bail!("no feasible follower set for these arrivals");
            }
            let violations = validate_platoon(&r.trajectories, &bc, &SignalTiming::always_green(), &lim, cfg.length);
            println!("feasible: {} vehicles, violations: {}", r.trajectories.len(), violations.len());
            for v in violations.iter().take(5) {
                println!("  {v:?}");
            }
            export(&s.out_dir, "lvp", &r.trajectories, &cfg)?;
        }
        Command::Kwt { scenario: s, gamma } => {
            let cfg = s.resolve(ScenarioConfig::lead_vehicle_default())?;
            let lim = cfg.limits();
            let bc = generate_boundary_behind(&cfg, &lead_profile(&lim))?;
            let q = kwt_platoon(&lead_profile(&lim), &bc, &lim)?;
            export(&s.out_dir, "kwt", &q.trajectories, &cfg)?;
            let (_, sweeps) = gamma_sweep(&cfg, &bc, &gamma)?;
            for sw in &sweeps {
                println!("gamma {:.3}: max |p - q| = {:.3} m, bound {:.3} m", sw.gamma, sw.max_deviation, sw.bound.abs());
            }
            write_gap_csv(create(&s.out_dir, "gaps.csv")?, &sweeps)?;
        }
        Command::Idm { scenario: s, idm } => {
            let cfg = s.resolve(ScenarioConfig::default())?;
            let bc = generate_boundary(&cfg)?;
            let r = simulate_idm(&bc, &cfg.signal(), &cfg.limits(), &idm.params(), cfg.length)?;
            let tt = r.feasible.then(|| total_travel_time(&r, &bc));
            println!("all exited: {}, total travel time: {}", r.feasible, fmt_time(tt));
            export(&s.out_dir, "idm", &r.trajectories, &cfg)?;
        }
        Command::FeasibilityGrid { scenario: s, sweep, algorithm, instances, steps } => {
            let base = s.resolve(ScenarioConfig { saturation: 0.5, ..ScenarioConfig::lead_vehicle_default() })?;
            let algorithm = match algorithm {
                Algorithm::Pshl => GridAlgorithm::Pshl,
                Algorithm::Sh => GridAlgorithm::Sh,
            };
            let unit: Vec<f64> = (0..steps).map(|i| i as f64 / (steps.max(2) - 1) as f64).collect();
            let cells = match sweep {
                Sweep::AlphaBeta => feasibility_grid_alpha_beta(&base, &unit, &unit, instances, algorithm)?,
                Sweep::LengthSaturation => {
                    let lengths: Vec<f64> = unit.iter().map(|u| 200.0 + 1800.0 * u).collect();
                    let cap = base.cycle_ratio();
                    let sat: Vec<f64> = unit.iter().map(|u| (0.1 + 0.9 * u) * cap).collect();
                    feasibility_grid_length_saturation(&base, &lengths, &sat, instances, algorithm)?
                }
            };
            write_grid_csv(create(&s.out_dir, "grid.csv")?, &cells)?;
            let mean = cells.iter().map(|c| c.rate).sum::<f64>() / cells.len().max(1) as f64;
            println!("{} cells, mean feasibility rate {mean:.3}", cells.len());
        }
        Command::Compare { scenario: s, idm } => {
            let cfg = s.resolve(ScenarioConfig::default())?;
            let r = run_comparison(&cfg, &idm.params())?;
            match &r.idm {
                Ok(p) => export(&s.out_dir, "idm", &p.trajectories, &cfg)?,
                Err(e) => println!("benchmark aborted: {e}"),
            }
            export(&s.out_dir, "sh_full", &r.sh_full.trajectories, &cfg)?;
            export(&s.out_dir, "sh_smooth", &r.sh_smooth.trajectories, &cfg)?;
            export(&s.out_dir, "kwt", &r.kwt.trajectories, &cfg)?;
            write_gap_csv(create(&s.out_dir, "gaps.csv")?, &r.sweeps)?;
            println!("benchmark travel time: {}", fmt_time(r.idm_travel_time));
            println!("full-limit plan travel time: {}", fmt_time(r.sh_full_travel_time));
            println!("smoothed plan travel time: {}", fmt_time(r.sh_smooth_travel_time));
            for sw in &r.sweeps {
                println!("gamma {:.3}: max |p - q| = {:.3} m, bound {:.3} m", sw.gamma, sw.max_deviation, sw.bound.abs());
            }
        }
        Command::Measure { scenario: s, source, idm } => {
            let cfg = s.resolve(ScenarioConfig::default())?;
            let bc = generate_boundary(&cfg)?;
            let lim = cfg.limits();
            let trajectories = match source {
                Source::Sh => shoot_platoon_sh(&bc, &cfg.signal(), &lim, &lim.full_controls(), cfg.length)?.trajectories,
                Source::ShSmooth => {
                    shoot_platoon_sh(&bc, &cfg.signal(), &lim, &platoon::lab::smooth_controls(&lim), cfg.length)?.trajectories
                }
                Source::Idm => simulate_idm(&bc, &cfg.signal(), &lim, &idm.params(), cfg.length)?.trajectories,
            };
            if trajectories.is_empty() {
                bail!("the selected run produced no trajectories");
            }
            let grid = default_measurement_grid(&cfg, horizon(&trajectories, &cfg));
            let cells = measure_macroscopic(&trajectories, &grid);
            write_measurements_csv(create(&s.out_dir, "measurements.csv")?, &cells)?;
            println!("{} windows measured", cells.len());
        }
    }
    Ok(())
}

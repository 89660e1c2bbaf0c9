//! Scenario generation and experiment drivers.
//!
//! Random draws use ChaCha8 keyed by the scenario seed. Every vehicle owns
//! two streams, `2n` for its headway noise and `2n + 1` for its entry speed,
//! so appending vehicles leaves earlier draws untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::idm_bench::{simulate_idm, total_travel_time, IdmError, IdmParams};
use crate::kinematics::{quadratic_roots, trajectory_distance, KinematicsError, QuadraticSegment, StatePoint, Trajectory};
use crate::kwt::{gap_bound, gap_metrics, kwt_platoon, GapMetric, KwtError, KwtPlatoon};
use crate::planner::{
    exit_time, shoot_platoon_pshl, shoot_platoon_sh, shoot_platoon_shl, with_history, Arrival, BoundaryCondition,
    ControlAccels, PlannerError, PlatoonResult, SignalTiming, VehicleLimits,
};
use crate::shooting_proc::{forward_template, ForwardControl};
use crate::timegeo::{is_proper, lower_bound, upper_bound};

/// Every experiment parameter, loadable from a flat TOML table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Segment length, meters.
    pub length: f64,
    pub vehicles: usize,
    pub vmax: f64,
    pub amax: f64,
    pub amin: f64,
    pub jam_spacing: f64,
    pub delay: f64,
    pub green: f64,
    pub red: f64,
    pub accel_f: f64,
    pub decel_f: f64,
    pub accel_b: f64,
    pub decel_b: f64,
    /// Arrival volume over capacity.
    pub saturation: f64,
    /// Headway dispersion in `[0, 1]`.
    pub alpha: f64,
    /// Entry-speed dispersion in `[0, 1]` for the dispersed generator.
    pub beta: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            length: 1000.0,
            vehicles: 50,
            vmax: 25.0,
            amax: 2.0,
            amin: -5.0,
            jam_spacing: 7.0,
            delay: 1.0,
            green: 25.0,
            red: 25.0,
            accel_f: 2.0,
            decel_f: -5.0,
            accel_b: 2.0,
            decel_b: -5.0,
            saturation: 1.0,
            alpha: 1.0,
            beta: 0.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("no proper boundary condition after {0} attempts")]
    GenerationFailed(usize),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Kwt(#[from] KwtError),
    #[error(transparent)]
    Idm(#[from] IdmError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

impl ScenarioConfig {
    /// Lead-vehicle setting: no signal and half saturation.
    pub fn lead_vehicle_default() -> Self {
        Self { green: f64::INFINITY, red: 0.0, saturation: 0.5, ..Self::default() }
    }

    pub fn limits(&self) -> VehicleLimits {
        VehicleLimits {
            vmax: self.vmax,
            amax: self.amax,
            amin: self.amin,
            jam_spacing: self.jam_spacing,
            delay: self.delay,
        }
    }

    pub fn signal(&self) -> SignalTiming {
        SignalTiming::new(self.green, self.red)
    }

    pub fn controls(&self) -> ControlAccels {
        ControlAccels { accel_f: self.accel_f, decel_f: self.decel_f, accel_b: self.accel_b, decel_b: self.decel_b }
    }

    /// Cycle over green; 1 when the signal never turns red.
    pub fn cycle_ratio(&self) -> f64 {
        if self.green.is_infinite() || self.red <= 0.0 {
            1.0
        } else {
            (self.green + self.red) / self.green
        }
    }

    /// Smallest admissible headway.
    pub fn min_headway(&self) -> f64 {
        self.delay + self.jam_spacing / self.vmax
    }

    pub fn mean_headway(&self) -> f64 {
        self.min_headway() * self.cycle_ratio() / self.saturation
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: &str| Err(LabError::InvalidConfig(m.to_string()));
        if !self.limits().is_valid() {
            return bad("limits need vmax, amax, jam_spacing > 0 > amin and delay >= 0");
        }
        if !self.controls().is_within(&self.limits()) {
            return bad("control accelerations must lie within the limits");
        }
        if self.vehicles == 0 || !(self.length > 0.0) {
            return bad("need at least one vehicle and a positive length");
        }
        if !(self.saturation > 0.0 && self.saturation <= self.cycle_ratio()) {
            return bad("saturation must lie in (0, cycle/green]");
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return bad("alpha and beta must lie in [0, 1]");
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn attempt_seed(seed: u64, attempt: usize) -> u64 {
    seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Arrival times: minimum headway stretched by the saturation factor, with
/// noise drawn on `[0, 2)` and rescaled to mean one.
pub fn arrival_times(cfg: &ScenarioConfig, seed: u64) -> Vec<f64> {
    let n = cfg.vehicles;
    let mut eps: Vec<f64> = (1..n).map(|i| stream(seed, 2 * i as u64).gen_range(0.0..2.0)).collect();
    let sum: f64 = eps.iter().sum();
    if sum > 0.0 {
        let scale = (n - 1) as f64 / sum;
        eps.iter_mut().for_each(|e| *e *= scale);
    } else {
        eps.iter_mut().for_each(|e| *e = 1.0);
    }
    let stretch = cfg.cycle_ratio() / cfg.saturation - 1.0;
    let mut times = Vec::with_capacity(n);
    times.push(0.0);
    for e in eps {
        let prev = *times.last().expect("non-empty");
        times.push(prev + cfg.min_headway() * (1.0 + stretch * (1.0 - cfg.alpha + cfg.alpha * e)));
    }
    times
}

/// Reduced limits that every generated boundary condition must satisfy.
fn generation_limits(cfg: &ScenarioConfig) -> VehicleLimits {
    VehicleLimits { amax: cfg.amax / 3.0, amin: cfg.amin / 3.0, ..cfg.limits() }
}

const WINDOW_TOL: f64 = 1e-3;
const GEN_TOL: f64 = 1e-9;
const LATER_PROBES: usize = 25;

/// Lower cones of every arrival at the probe speeds, from full speed down.
fn later_lowers(times: &[f64], lim: &VehicleLimits) -> Vec<Vec<Trajectory>> {
    times
        .iter()
        .map(|&t| {
            (0..=LATER_PROBES)
                .rev()
                .map(|i| lower_bound(StatePoint::new(0.0, lim.vmax * i as f64 / LATER_PROBES as f64, t), lim.amin, lim.vmax))
                .collect()
        })
        .collect()
}

/// Entry-speed test for vehicle `n` with everything that does not depend on
/// the probed speed built once.
struct SpeedCheck<'a> {
    n: usize,
    times: &'a [f64],
    lim: &'a VehicleLimits,
    earlier: Vec<Trajectory>,
    later: &'a [Vec<Trajectory>],
}

impl<'a> SpeedCheck<'a> {
    fn new(n: usize, times: &'a [f64], speeds: &[f64], lim: &'a VehicleLimits, later: &'a [Vec<Trajectory>]) -> Self {
        let earlier = (0..n)
            .map(|m| {
                upper_bound(StatePoint::new(0.0, speeds[m], times[m]), lim.amax, lim.vmax).shadow(
                    (n - m) as u32,
                    lim.jam_spacing,
                    lim.delay,
                )
            })
            .collect();
        Self { n, times, lim, earlier, later }
    }

    /// Whether entry speed `v` is compatible with the speeds chosen for
    /// earlier vehicles and leaves room for every later arrival.
    fn admissible(&self, v: f64) -> bool {
        let (n, lim) = (self.n, self.lim);
        let pt = StatePoint::new(0.0, v, self.times[n]);
        let low = lower_bound(pt, lim.amin, lim.vmax);
        let window = Some((self.times[n], f64::INFINITY));
        if self.earlier.iter().any(|c| trajectory_distance(c, &low, window) < -GEN_TOL) {
            return false;
        }
        let mut shadow = upper_bound(pt, lim.amax, lim.vmax);
        for m in n + 1..self.times.len() {
            shadow = shadow.shadow(1, lim.jam_spacing, lim.delay);
            let window = Some((self.times[m], f64::INFINITY));
            // probed from full speed down
            if !self.later[m].iter().any(|later| trajectory_distance(&shadow, later, window) >= -GEN_TOL) {
                return false;
            }
        }
        true
    }

    fn window(&self) -> Option<(f64, f64)> {
        const PROBES: usize = 50;
        let vmax = self.lim.vmax;
        let ok = |v: f64| self.admissible(v);
        let probe = (0..=PROBES).map(|i| vmax * i as f64 / PROBES as f64).find(|&v| ok(v))?;
        let (mut a, mut b) = (0.0, probe);
        if ok(0.0) {
            a = 0.0;
        } else {
            while b - a > WINDOW_TOL {
                let mid = 0.5 * (a + b);
                if ok(mid) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            a = b;
        }
        let lo = a;
        let (mut a, mut b) = (probe, vmax);
        if ok(vmax) {
            b = vmax;
        } else {
            while b - a > WINDOW_TOL {
                let mid = 0.5 * (a + b);
                if ok(mid) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            b = a;
        }
        Some((lo, b))
    }
}

/// Admissible entry-speed interval of vehicle `n`, or `None` when empty.
pub fn speed_window(n: usize, times: &[f64], speeds: &[f64], lim: &VehicleLimits) -> Option<(f64, f64)> {
    let later = later_lowers(times, lim);
    SpeedCheck::new(n, times, speeds, lim, &later).window()
}

/// Default generator: entry speeds drawn inside their admissible windows,
/// regenerating with a fresh seed until the result is proper.
pub fn generate_boundary(cfg: &ScenarioConfig) -> Result<BoundaryCondition, LabError> {
    generate_boundary_with_budget(cfg, 100)
}

pub fn generate_boundary_with_budget(cfg: &ScenarioConfig, attempts: usize) -> Result<BoundaryCondition, LabError> {
    generate(cfg, attempts, None)
}

/// Default generator with the first arrival pinned to the entry speed of a
/// given lead trajectory entering at time zero.
pub fn generate_boundary_behind(cfg: &ScenarioConfig, lead: &Trajectory) -> Result<BoundaryCondition, LabError> {
    let entry = lead.state(0.0)?;
    generate(cfg, 100, Some(entry.speed))
}

fn generate(cfg: &ScenarioConfig, attempts: usize, first_speed: Option<f64>) -> Result<BoundaryCondition, LabError> {
    cfg.validate()?;
    let gen_lim = generation_limits(cfg);
    'attempt: for attempt in 0..attempts {
        let seed = attempt_seed(cfg.seed, attempt);
        let times = arrival_times(cfg, seed);
        let later = later_lowers(&times, &gen_lim);
        let mut speeds = Vec::with_capacity(times.len());
        for n in 0..times.len() {
            let check = SpeedCheck::new(n, &times, &speeds, &gen_lim, &later);
            let Some((lo, hi)) = check.window() else {
                continue 'attempt;
            };
            let u: f64 = stream(seed, 2 * n as u64 + 1).gen();
            match first_speed {
                Some(v) if n == 0 => {
                    if !check.admissible(v) {
                        continue 'attempt;
                    }
                    speeds.push(v);
                }
                _ => speeds.push(lo + u * (hi - lo)),
            }
        }
        let bc = BoundaryCondition::new(times.into_iter().zip(speeds).map(|(time, speed)| Arrival { time, speed }).collect());
        if is_proper(&bc, &cfg.limits()) {
            return Ok(bc);
        }
    }
    Err(LabError::GenerationFailed(attempts))
}

/// Dispersed generator: entry speeds uniform on `[(1 - beta) vmax, vmax]`,
/// with no check that the result is proper.
pub fn generate_boundary_dispersed(cfg: &ScenarioConfig) -> BoundaryCondition {
    let times = arrival_times(cfg, cfg.seed);
    let lo = (1.0 - cfg.beta) * cfg.vmax;
    BoundaryCondition::new(
        times
            .into_iter()
            .enumerate()
            .map(|(n, time)| {
                let u: f64 = stream(cfg.seed, 2 * n as u64 + 1).gen();
                Arrival { time, speed: (lo + u * (cfg.vmax - lo)).min(cfg.vmax) }
            })
            .collect(),
    )
}

/// Stop-and-go lead: cruise 20 s, brake at a third of the deceleration
/// limit, stand 20 s, accelerate at a third of the acceleration limit, cruise.
pub fn lead_profile(lim: &VehicleLimits) -> Trajectory {
    let (v, dec, acc) = (lim.vmax, lim.amin / 3.0, lim.amax / 3.0);
    let t_brake = 20.0;
    let t_stop = t_brake - v / dec;
    let t_go = t_stop + 20.0;
    let t_full = t_go + v / acc;
    let x_brake = v * t_brake;
    let x_stop = x_brake - v * v / (2.0 * dec);
    let x_full = x_stop + v * v / (2.0 * acc);
    Trajectory::new(vec![
        QuadraticSegment::with_anchor(0.0, v, 0.0, 0.0, 0.0, t_brake),
        QuadraticSegment::with_anchor(x_brake, v, dec, t_brake, t_brake, t_stop),
        QuadraticSegment::with_anchor(x_stop, 0.0, 0.0, t_stop, t_stop, t_go),
        QuadraticSegment::with_anchor(x_stop, 0.0, acc, t_go, t_go, t_full),
        QuadraticSegment::with_anchor(x_full, v, 0.0, t_full, t_full, f64::INFINITY),
    ])
    .expect("profile pieces meet with matching position and speed")
}

/// Free template of the first arrival, extended into the past.
pub fn template_lead(bc: &BoundaryCondition, lim: &VehicleLimits, accel: f64, decel: f64) -> Result<Trajectory, KinematicsError> {
    with_history(&forward_template(bc.entry(0), ForwardControl::new(accel, decel, lim.vmax)), accel, lim.vmax)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAlgorithm {
    /// Lead-vehicle problem, lead on its own template.
    Pshl,
    /// Signalized problem.
    Sh,
}

/// One cell of a feasibility sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub fs: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub vehicles: usize,
    pub rate: f64,
}

/// Whether the extreme-acceleration planner finds a solution.
pub fn instance_feasible(cfg: &ScenarioConfig, bc: &BoundaryCondition, algorithm: GridAlgorithm) -> Result<bool, LabError> {
    let lim = cfg.limits();
    Ok(match algorithm {
        GridAlgorithm::Pshl => {
            let lead = template_lead(bc, &lim, lim.amax, lim.amin)?;
            shoot_platoon_pshl(&lead, bc, &lim, lim.amax, lim.amin)?.feasible
        }
        GridAlgorithm::Sh => shoot_platoon_sh(bc, &cfg.signal(), &lim, &lim.full_controls(), cfg.length)?.feasible,
    })
}

/// Feasibility rate of one configuration over seeds `seed .. seed + instances`.
pub fn feasibility_rate(cfg: &ScenarioConfig, instances: usize, algorithm: GridAlgorithm) -> Result<f64, LabError> {
    let hits = (0..instances)
        .into_par_iter()
        .map(|i| {
            let c = ScenarioConfig { seed: cfg.seed.wrapping_add(i as u64), ..cfg.clone() };
            instance_feasible(&c, &generate_boundary_dispersed(&c), algorithm)
        })
        .collect::<Result<Vec<bool>, _>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / instances.max(1) as f64)
}

/// Rates over an `alpha x beta` grid.
pub fn feasibility_grid_alpha_beta(
    base: &ScenarioConfig,
    alphas: &[f64],
    betas: &[f64],
    instances: usize,
    algorithm: GridAlgorithm,
) -> Result<Vec<GridCell>, LabError> {
    let cells: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    cells
        .into_par_iter()
        .map(|(alpha, beta)| {
            let cfg = ScenarioConfig { alpha, beta, ..base.clone() };
            Ok(grid_cell(&cfg, feasibility_rate(&cfg, instances, algorithm)?))
        })
        .collect()
}

/// Rates over a `length x saturation` grid.
pub fn feasibility_grid_length_saturation(
    base: &ScenarioConfig,
    lengths: &[f64],
    saturations: &[f64],
    instances: usize,
    algorithm: GridAlgorithm,
) -> Result<Vec<GridCell>, LabError> {
    let cells: Vec<(f64, f64)> = lengths.iter().flat_map(|&l| saturations.iter().map(move |&f| (l, f))).collect();
    cells
        .into_par_iter()
        .map(|(length, saturation)| {
            let cfg = ScenarioConfig { length, saturation, ..base.clone() };
            Ok(grid_cell(&cfg, feasibility_rate(&cfg, instances, algorithm)?))
        })
        .collect()
}

fn grid_cell(cfg: &ScenarioConfig, rate: f64) -> GridCell {
    GridCell { alpha: cfg.alpha, beta: cfg.beta, fs: cfg.saturation, length: cfg.length, vehicles: cfg.vehicles, rate }
}

/// Generalized density and flow inside one sheared window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementCell {
    /// Window anchor time, seconds.
    pub t: f64,
    /// Window anchor location, meters.
    pub x: f64,
    /// veh/m
    #[serde(rename = "K")]
    pub density: f64,
    /// veh/s
    #[serde(rename = "O")]
    pub flow: f64,
}

/// Tiling of the time-space plane by parallelograms whose time edges are
/// sheared along `wave_speed` (m/s, negative for backward waves).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementGrid {
    pub length: f64,
    pub duration: f64,
    pub wave_speed: f64,
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
}

/// First time at which `t * time_coef + x(t) * pos_coef` reaches `level`,
/// for a trajectory along which that combination never decreases.
fn first_crossing(p: &Trajectory, time_coef: f64, pos_coef: f64, level: f64) -> f64 {
    let g = |s: &QuadraticSegment, t: f64| time_coef * t + pos_coef * s.position(t);
    for seg in p.segments() {
        let lo = if seg.start.is_finite() { g(seg, seg.start) } else { f64::NEG_INFINITY };
        if lo >= level {
            return seg.start;
        }
        let hi = if seg.end.is_finite() {
            g(seg, seg.end)
        } else if time_coef > 0.0 || seg.speed > 0.0 || seg.accel > 0.0 {
            f64::INFINITY
        } else {
            g(seg, seg.anchor)
        };
        if hi < level {
            continue;
        }
        let roots = quadratic_roots(
            0.5 * pos_coef * seg.accel,
            time_coef + pos_coef * seg.speed,
            time_coef * seg.anchor + pos_coef * seg.location - level,
        );
        let t = roots
            .into_iter()
            .flatten()
            .map(|r| r + seg.anchor)
            .filter(|&t| t >= seg.start - 1e-9 && t <= seg.end + 1e-9)
            .fold(f64::INFINITY, f64::min);
        if t.is_finite() {
            return t.clamp(seg.start, seg.end);
        }
    }
    f64::INFINITY
}

/// Time and distance a trajectory spends inside the window anchored at `(t0, x0)`.
fn occupancy(p: &Trajectory, t0: f64, x0: f64, g: &MeasurementGrid) -> (f64, f64) {
    let shear = 1.0 / -g.wave_speed;
    let base = t0 + x0 * shear;
    let enter = first_crossing(p, 0.0, 1.0, x0).max(first_crossing(p, 1.0, shear, base)).max(p.start_time());
    let leave = first_crossing(p, 0.0, 1.0, x0 + g.length)
        .min(first_crossing(p, 1.0, shear, base + g.duration))
        .min(p.end_time());
    if !(leave > enter) || !enter.is_finite() {
        return (0.0, 0.0);
    }
    let (Ok(xa), Ok(xb)) = (p.position(enter), p.position(leave)) else {
        return (0.0, 0.0);
    };
    (leave - enter, xb - xa)
}

/// Density and flow over each window of the grid. Windows are indexed by
/// their bottom-left corner; the time edge at location `x` starts at
/// `t0 - (x - x0) / |wave_speed|`.
pub fn measure_macroscopic(trajectories: &[Trajectory], grid: &MeasurementGrid) -> Vec<MeasurementCell> {
    let area = grid.length * grid.duration;
    let nx = ((grid.x_range.1 - grid.x_range.0) / grid.length).round() as usize;
    let nt = ((grid.t_range.1 - grid.t_range.0) / grid.duration).round() as usize;
    (0..nx)
        .flat_map(|i| (0..nt).map(move |j| (i, j)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, j)| {
            let x0 = grid.x_range.0 + i as f64 * grid.length;
            let t0 = grid.t_range.0 + j as f64 * grid.duration;
            let (time, dist) = trajectories
                .iter()
                .map(|p| occupancy(p, t0, x0, grid))
                .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
            MeasurementCell { t: t0, x: x0, density: time / area, flow: dist / area }
        })
        .collect()
}

/// Default grid for a run: 100 m by 5 s windows sheared at `-s / tau`.
pub fn default_measurement_grid(cfg: &ScenarioConfig, t_end: f64) -> MeasurementGrid {
    MeasurementGrid {
        length: 100.0,
        duration: 5.0,
        wave_speed: -cfg.jam_spacing / cfg.delay,
        x_range: (0.0, cfg.length),
        t_range: (0.0, (t_end / 5.0).ceil() * 5.0),
    }
}

/// Gap statistics of one acceleration scaling in the lead-vehicle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSweep {
    pub gamma: f64,
    pub metrics: Vec<GapMetric>,
    /// Largest `|p_n(t) - q_n(t)|` over vehicles and time.
    pub max_deviation: f64,
    pub bound: f64,
}

/// Largest absolute difference between two platoons on a time grid.
pub fn sup_gap(p: &[Trajectory], q: &[Trajectory], step: f64, horizon: f64) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let t0 = a.start_time().max(b.start_time());
            let steps = ((horizon - t0) / step).ceil().max(0.0) as usize;
            (0..=steps)
                .filter_map(|i| {
                    let t = t0 + i as f64 * step;
                    Some((a.position(t).ok()? - b.position(t).ok()?).abs())
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Lead-vehicle comparison between the smooth solution at scaled
/// accelerations and the kinematic-wave solution.
pub fn gamma_sweep(cfg: &ScenarioConfig, bc: &BoundaryCondition, gammas: &[f64]) -> Result<(KwtPlatoon, Vec<GammaSweep>), LabError> {
    let lim = cfg.limits();
    let lead = lead_profile(&lim);
    let q = kwt_platoon(&lead, bc, &lim)?;
    let horizon = bc.arrivals.last().map_or(0.0, |a| a.time) + 200.0;
    let sweeps = gammas
        .par_iter()
        .map(|&gamma| {
            let (acc, dec) = (gamma * lim.amax, gamma * lim.amin);
            let p = shoot_platoon_shl(&lead, bc, &lim, acc, dec)?;
            if !p.feasible {
                return Err(LabError::Planner(PlannerError::Empty));
            }
            let metrics = gap_metrics(&p.trajectories, &q, lim.vmax, acc, dec)?;
            let max_deviation = sup_gap(&p.trajectories, &q.trajectories, 0.01, horizon);
            Ok(GammaSweep { gamma, metrics, max_deviation, bound: gap_bound(lim.vmax, acc, dec) })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok((q, sweeps))
}

/// Outputs of the signalized comparison.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub boundary: BoundaryCondition,
    /// The benchmark aborts on a collision.
    pub idm: Result<PlatoonResult, IdmError>,
    pub sh_full: PlatoonResult,
    pub sh_smooth: PlatoonResult,
    pub idm_travel_time: Option<f64>,
    pub sh_full_travel_time: Option<f64>,
    pub sh_smooth_travel_time: Option<f64>,
    pub lvp_boundary: BoundaryCondition,
    pub kwt: KwtPlatoon,
    pub sweeps: Vec<GammaSweep>,
}

/// Controls of the smoothed signalized run: a third of each limit, with a
/// ninth for the backward deceleration.
pub fn smooth_controls(lim: &VehicleLimits) -> ControlAccels {
    ControlAccels { accel_f: lim.amax / 3.0, decel_f: lim.amin / 3.0, accel_b: lim.amax / 3.0, decel_b: lim.amin / 9.0 }
}

/// Travel time from first entry to last exit of a feasible planned platoon.
pub fn platoon_travel_time(result: &PlatoonResult, bc: &BoundaryCondition, l: f64) -> Option<f64> {
    if !result.feasible {
        return None;
    }
    let exits = result.trajectories.iter().map(|p| exit_time(p, l).map(|(t, _)| t)).collect::<Result<Vec<_>, _>>().ok()?;
    Some(exits.into_iter().fold(f64::NEG_INFINITY, f64::max) - bc.arrivals[0].time)
}

/// Signalized runs (manual benchmark, full and smoothed shooting) on the
/// signalized scenario, then the lead-vehicle comparison on its own
/// half-saturated scenario.
pub fn run_comparison(cfg: &ScenarioConfig, idm: &IdmParams) -> Result<ComparisonReport, LabError> {
    let lim = cfg.limits();
    let bc = generate_boundary(cfg)?;
    let sig = cfg.signal();
    let idm = simulate_idm(&bc, &sig, &lim, idm, cfg.length);
    let sh_full = shoot_platoon_sh(&bc, &sig, &lim, &lim.full_controls(), cfg.length)?;
    let sh_smooth = shoot_platoon_sh(&bc, &sig, &lim, &smooth_controls(&lim), cfg.length)?;

    let lvp_cfg = ScenarioConfig { green: f64::INFINITY, red: 0.0, saturation: 0.5, ..cfg.clone() };
    let lvp_bc = generate_boundary_behind(&lvp_cfg, &lead_profile(&lim))?;
    let (kwt, sweeps) = gamma_sweep(&lvp_cfg, &lvp_bc, &[1.0 / 3.0, 1.0, 3.0])?;

    Ok(ComparisonReport {
        idm_travel_time: idm.as_ref().ok().filter(|r| r.feasible).map(|r| total_travel_time(r, &bc)),
        sh_full_travel_time: platoon_travel_time(&sh_full, &bc, cfg.length),
        sh_smooth_travel_time: platoon_travel_time(&sh_smooth, &bc, cfg.length),
        boundary: bc,
        idm,
        sh_full,
        sh_smooth,
        lvp_boundary: lvp_bc,
        kwt,
        sweeps,
    })
}

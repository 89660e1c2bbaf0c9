//! Platoon trajectory planners: the signalized shooting heuristic (SH), its
//! lead-vehicle variant (SHL) and the parallel lead-vehicle variant (PSHL),
//! together with signal timing and a feasibility validator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{distance_argmin, tol, KinematicsError, Splice, StatePoint, Trajectory};
use crate::shooting_proc::{bsp, efsp, forward_template, fsp, BackwardControl, ForwardControl};
use crate::timegeo::upper_bound;

/// Fixed-time signal with greens `[mC, mC + G)`, or a repeating list of
/// per-cycle `(green, red)` durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTiming {
    pub green: f64,
    pub red: f64,
    #[serde(default)]
    pub cycles: Vec<(f64, f64)>,
}

impl SignalTiming {
    pub fn new(green: f64, red: f64) -> Self {
        Self { green, red, cycles: Vec::new() }
    }

    /// Signal that never turns red.
    pub fn always_green() -> Self {
        Self::new(f64::INFINITY, 0.0)
    }

    /// Time-variant timing; the list repeats after its last cycle.
    pub fn with_cycles(cycles: Vec<(f64, f64)>) -> Self {
        let (green, red) = cycles.first().copied().unwrap_or((f64::INFINITY, 0.0));
        Self { green, red, cycles }
    }

    pub fn cycle(&self) -> f64 {
        self.green + self.red
    }

    pub fn is_green(&self, t: f64) -> bool {
        self.next_green(t) == t
    }

    /// Earliest green instant at or after `t`.
    pub fn next_green(&self, t: f64) -> f64 {
        if !self.cycles.is_empty() {
            return self.next_green_listed(t);
        }
        if self.red <= 0.0 || self.green.is_infinite() {
            return t;
        }
        let c = self.cycle();
        let m = (t / c).floor();
        if t - m * c < self.green {
            t
        } else {
            (m + 1.0) * c
        }
    }

    fn next_green_listed(&self, t: f64) -> f64 {
        let period: f64 = self.cycles.iter().map(|(g, r)| g + r).sum();
        let k = (t / period).floor();
        let r = t - k * period;
        let mut offset = 0.0;
        for &(g, red) in &self.cycles {
            if r < offset + g {
                return t;
            }
            if r < offset + g + red {
                return k * period + offset + g + red;
            }
            offset += g + red;
        }
        (k + 1.0) * period
    }

    /// Start of the cycle containing `t`.
    pub fn cycle_start(&self, t: f64) -> f64 {
        let c = self.cycle();
        if !c.is_finite() || c <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (t / c).floor() * c
    }
}

/// Physical limits shared by every vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleLimits {
    pub vmax: f64,
    pub amax: f64,
    pub amin: f64,
    pub jam_spacing: f64,
    pub delay: f64,
}

impl VehicleLimits {
    pub fn is_valid(&self) -> bool {
        self.amax > 0.0 && self.amin < 0.0 && self.vmax > 0.0 && self.jam_spacing > 0.0 && self.delay >= 0.0
    }

    /// Controls that use the full limits in both processes.
    pub fn full_controls(&self) -> ControlAccels {
        ControlAccels { accel_f: self.amax, decel_f: self.amin, accel_b: self.amax, decel_b: self.amin }
    }
}

/// Accelerations applied by the forward and backward processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlAccels {
    pub accel_f: f64,
    pub decel_f: f64,
    pub accel_b: f64,
    pub decel_b: f64,
}

impl ControlAccels {
    pub fn is_within(&self, lim: &VehicleLimits) -> bool {
        let acc = |a: f64| a > 0.0 && a <= lim.amax;
        let dec = |a: f64| a < 0.0 && a >= lim.amin;
        acc(self.accel_f) && acc(self.accel_b) && dec(self.decel_f) && dec(self.decel_b)
    }

    fn forward(&self, vmax: f64) -> ForwardControl {
        ForwardControl::new(self.accel_f, self.decel_f, vmax)
    }

    fn backward(&self, vmax: f64) -> BackwardControl {
        BackwardControl { accel_b: self.accel_b, decel_b: self.decel_b, forward: self.forward(vmax) }
    }
}

/// Arrival of one vehicle at the upstream end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub arrivals: Vec<Arrival>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("arrival times must be strictly increasing (vehicle {0})")]
    NotIncreasing(usize),
    #[error("arrival speed of vehicle {0} outside [0, vmax]")]
    SpeedOutOfRange(usize),
    #[error("boundary condition is empty")]
    Empty,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

impl BoundaryCondition {
    pub fn new(arrivals: Vec<Arrival>) -> Self {
        Self { arrivals }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self::new(pairs.iter().map(|&(time, speed)| Arrival { time, speed }).collect())
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn entry(&self, n: usize) -> StatePoint {
        let a = self.arrivals[n];
        StatePoint::new(0.0, a.speed, a.time)
    }

    pub fn validate(&self, lim: &VehicleLimits) -> Result<(), PlannerError> {
        if self.arrivals.is_empty() {
            return Err(PlannerError::Empty);
        }
        for (n, a) in self.arrivals.iter().enumerate() {
            if !(0.0..=lim.vmax).contains(&a.speed) {
                return Err(PlannerError::SpeedOutOfRange(n));
            }
            if n > 0 && a.time <= self.arrivals[n - 1].time {
                return Err(PlannerError::NotIncreasing(n));
            }
        }
        Ok(())
    }
}

/// Per-vehicle record of how the trajectory was built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VehicleDiagnostics {
    pub bsp_used: bool,
    pub exit_time: f64,
    pub exit_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    FspFailed,
    BspBelowZero,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureReason::FspFailed => "fsp_failed",
            FailureReason::BspBelowZero => "bsp_below_zero",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Failure {
    /// Zero-based index of the vehicle that could not be planned.
    pub vehicle: usize,
    pub reason: FailureReason,
}

/// Planner output. On failure `trajectories` is empty and `partial` holds the
/// vehicles planned before the failing one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlatoonResult {
    pub trajectories: Vec<Trajectory>,
    pub feasible: bool,
    pub diagnostics: Vec<VehicleDiagnostics>,
    pub failure: Option<Failure>,
    pub partial: Vec<Trajectory>,
}

impl PlatoonResult {
    fn success(trajectories: Vec<Trajectory>, diagnostics: Vec<VehicleDiagnostics>) -> Self {
        Self { trajectories, feasible: true, diagnostics, failure: None, partial: Vec::new() }
    }

    fn failed(vehicle: usize, reason: FailureReason, partial: Vec<Trajectory>, diagnostics: Vec<VehicleDiagnostics>) -> Self {
        Self {
            trajectories: Vec::new(),
            feasible: false,
            diagnostics,
            failure: Some(Failure { vehicle, reason }),
            partial,
        }
    }
}

/// Time and speed at which `p` first reaches location `l`.
pub fn exit_time(p: &Trajectory, l: f64) -> Result<(f64, f64), KinematicsError> {
    for seg in p.segments() {
        if seg.start.is_finite() && (seg.position(seg.start) - l).abs() <= tol(l) * 1e-3 {
            return Ok((seg.start, seg.speed_at(seg.start)));
        }
        let t = if seg.accel != 0.0 {
            let disc = seg.speed * seg.speed + 2.0 * seg.accel * (l - seg.location);
            if disc < 0.0 {
                continue;
            }
            let den = seg.speed + disc.sqrt();
            if den <= 0.0 {
                continue;
            }
            seg.anchor + 2.0 * (l - seg.location) / den
        } else if seg.speed > 0.0 {
            seg.anchor + (l - seg.location) / seg.speed
        } else {
            continue;
        };
        if t >= seg.start && t <= seg.end {
            return Ok((t, seg.speed_at(t)));
        }
    }
    Err(KinematicsError::Unreached(l))
}

/// Prepends the accelerate-from-rest history that leads into `p`'s first state.
pub fn with_history(p: &Trajectory, accel: f64, vmax: f64) -> Result<Trajectory, KinematicsError> {
    let t0 = p.start_time();
    if !t0.is_finite() {
        return Ok(p.clone());
    }
    let past = upper_bound(p.state(t0)?, accel, vmax);
    let mut sp = Splice::new();
    sp.extend(past.head(t0));
    sp.extend(p.segments().iter().copied());
    sp.finish()
}

/// Signalized shooting heuristic.
pub fn shoot_platoon_sh(
    bc: &BoundaryCondition,
    sig: &SignalTiming,
    lim: &VehicleLimits,
    ctrl: &ControlAccels,
    l: f64,
) -> Result<PlatoonResult, PlannerError> {
    bc.validate(lim)?;
    let (fctl, bctl) = (ctrl.forward(lim.vmax), ctrl.backward(lim.vmax));
    let mut out: Vec<Trajectory> = Vec::with_capacity(bc.len());
    let mut diags = Vec::with_capacity(bc.len());
    let mut ceiling: Option<Trajectory> = None;
    for n in 0..bc.len() {
        let entry = bc.entry(n);
        let Some(pf) = fsp(entry, ceiling.as_ref(), fctl)?.trajectory else {
            return Ok(PlatoonResult::failed(n, FailureReason::FspFailed, out, diags));
        };
        let (t_exit, mut v_exit) = exit_time(&pf, l)?;
        if (v_exit - lim.vmax).abs() <= tol(lim.vmax) {
            v_exit = lim.vmax;
        }
        let green = sig.next_green(t_exit);
        let (p, diag) = if green - t_exit > tol(t_exit) {
            let back = bsp(StatePoint::new(l, v_exit, green), &pf, ceiling.as_ref(), bctl)?;
            let Some(section) = back.section else {
                return Ok(PlatoonResult::failed(n, FailureReason::BspBelowZero, out, diags));
            };
            let first = section.segments()[0];
            if first.position(first.start) < -tol(l) {
                return Ok(PlatoonResult::failed(n, FailureReason::BspBelowZero, out, diags));
            }
            let Some(ext) = back.extended else {
                return Ok(PlatoonResult::failed(n, FailureReason::FspFailed, out, diags));
            };
            (ext, VehicleDiagnostics { bsp_used: true, exit_time: green, exit_speed: v_exit })
        } else {
            (pf, VehicleDiagnostics { bsp_used: false, exit_time: t_exit, exit_speed: v_exit })
        };
        ceiling = Some(with_history(&p, ctrl.accel_f, lim.vmax)?.shadow(1, lim.jam_spacing, lim.delay));
        out.push(p);
        diags.push(diag);
    }
    Ok(PlatoonResult::success(out, diags))
}

/// Lead-vehicle problem solved sequentially: `lead` is fixed and the
/// followers are `bc.arrivals[1..]`; the signal is ignored.
pub fn shoot_platoon_shl(
    lead: &Trajectory,
    bc: &BoundaryCondition,
    lim: &VehicleLimits,
    accel_f: f64,
    decel_f: f64,
) -> Result<PlatoonResult, PlannerError> {
    bc.validate(lim)?;
    let ctl = ForwardControl::new(accel_f, decel_f, lim.vmax);
    let mut out = vec![lead.clone()];
    for n in 1..bc.len() {
        let ceiling = with_history(&out[n - 1], accel_f, lim.vmax)?.shadow(1, lim.jam_spacing, lim.delay);
        let Some(p) = fsp(bc.entry(n), Some(&ceiling), ctl)?.trajectory else {
            return Ok(PlatoonResult::failed(n, FailureReason::FspFailed, out, Vec::new()));
        };
        out.push(p);
    }
    Ok(PlatoonResult::success(out, Vec::new()))
}

/// Lead-vehicle problem solved independently per vehicle from the shadows
/// of every predecessor's template.
pub fn shoot_platoon_pshl(
    lead: &Trajectory,
    bc: &BoundaryCondition,
    lim: &VehicleLimits,
    accel_f: f64,
    decel_f: f64,
) -> Result<PlatoonResult, PlannerError> {
    bc.validate(lim)?;
    let ctl = ForwardControl::new(accel_f, decel_f, lim.vmax);
    let mut templates = Vec::with_capacity(bc.len());
    templates.push(with_history(lead, accel_f, lim.vmax)?);
    for n in 1..bc.len() {
        templates.push(with_history(&forward_template(bc.entry(n), ctl), accel_f, lim.vmax)?);
    }
    let solved: Vec<Result<Option<Trajectory>, KinematicsError>> = (1..bc.len())
        .into_par_iter()
        .map(|n| {
            // nearest predecessor first, lead last
            let ceilings: Vec<Trajectory> = (0..n)
                .rev()
                .map(|m| templates[m].shadow((n - m) as u32, lim.jam_spacing, lim.delay))
                .collect();
            efsp(bc.entry(n), &ceilings, ctl)
        })
        .collect();
    let mut out = vec![lead.clone()];
    for (i, r) in solved.into_iter().enumerate() {
        match r? {
            Some(p) => out.push(p),
            None => return Ok(PlatoonResult::failed(i + 1, FailureReason::FspFailed, out, Vec::new())),
        }
    }
    Ok(PlatoonResult::success(out, Vec::new()))
}

/// One failed constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Speed { vehicle: usize, time: f64, speed: f64 },
    Acceleration { vehicle: usize, segment: usize, accel: f64 },
    Entry { vehicle: usize, location: f64, speed: f64 },
    Exit { vehicle: usize, time: f64 },
    Unreached { vehicle: usize },
    Safety { vehicle: usize, time: f64, gap: f64 },
    Count { expected: usize, found: usize },
}

const VALIDATION_TOL: f64 = 1e-6;
const GRID_STEP: f64 = 0.05;

/// Checks every constraint of the platoon problem. An empty list means the
/// trajectories are feasible.
pub fn validate_platoon(
    trajectories: &[Trajectory],
    bc: &BoundaryCondition,
    sig: &SignalTiming,
    lim: &VehicleLimits,
    l: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if trajectories.len() != bc.len() {
        out.push(Violation::Count { expected: bc.len(), found: trajectories.len() });
        return out;
    }
    for (n, p) in trajectories.iter().enumerate() {
        let entry = bc.arrivals[n];
        check_kinematics(n, p, entry.time, lim, &mut out);
        match p.eval(entry.time) {
            Ok((x, v, _)) if x.abs() <= VALIDATION_TOL && (v - entry.speed).abs() <= VALIDATION_TOL => {}
            Ok((x, v, _)) => out.push(Violation::Entry { vehicle: n, location: x, speed: v }),
            Err(_) => out.push(Violation::Entry { vehicle: n, location: f64::NAN, speed: f64::NAN }),
        }
        match exit_time(p, l) {
            Ok((t, _)) => {
                if sig.next_green(t - VALIDATION_TOL) > t + VALIDATION_TOL {
                    out.push(Violation::Exit { vehicle: n, time: t });
                }
            }
            Err(_) => out.push(Violation::Unreached { vehicle: n }),
        }
        if n > 0 {
            let shadow = trajectories[n - 1].shadow(1, lim.jam_spacing, lim.delay);
            let (gap, time) = distance_argmin(&shadow, p, Some((entry.time, f64::INFINITY)));
            if gap < -VALIDATION_TOL {
                out.push(Violation::Safety { vehicle: n, time, gap });
            }
        }
    }
    out
}

fn check_kinematics(n: usize, p: &Trajectory, from: f64, lim: &VehicleLimits, out: &mut Vec<Violation>) {
    let speed_ok = |v: f64| v >= -VALIDATION_TOL && v <= lim.vmax + VALIDATION_TOL;
    let mut last_finite = from;
    for (k, seg) in p.segments().iter().enumerate() {
        if seg.end < from {
            continue;
        }
        if seg.accel < lim.amin - VALIDATION_TOL || seg.accel > lim.amax + VALIDATION_TOL {
            out.push(Violation::Acceleration { vehicle: n, segment: k, accel: seg.accel });
        }
        for t in [seg.start.max(from), seg.end] {
            if t.is_finite() {
                last_finite = last_finite.max(t);
                let v = seg.speed_at(t);
                if !speed_ok(v) {
                    out.push(Violation::Speed { vehicle: n, time: t, speed: v });
                }
            }
        }
        if seg.end.is_infinite() && seg.accel != 0.0 {
            out.push(Violation::Speed { vehicle: n, time: f64::INFINITY, speed: seg.accel * f64::INFINITY });
        }
    }
    let steps = ((last_finite - from) / GRID_STEP).ceil() as usize + 20;
    for i in 0..=steps {
        let t = from + i as f64 * GRID_STEP;
        if let Ok(v) = p.speed(t) {
            if !speed_ok(v) {
                out.push(Violation::Speed { vehicle: n, time: t, speed: v });
                break;
            }
        }
    }
}

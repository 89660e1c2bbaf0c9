//! Quadratic time geography: reachable regions of a state point under speed
//! and acceleration limits, and the proper-boundary-condition test built on them.
//!
//! The lower bound of a state point `(l, v, t)` is obtained by running time
//! backwards: before `t` the vehicle is as far back as possible, i.e. it was
//! cruising at `vmax` and braked at `amin` into the point, which puts the end
//! of the cruise at `t + (vmax - v) / amin`. After `t` it brakes at `amin`
//! to rest at `l - v^2 / (2 amin)`, reached at `t - v / amin`.

use crate::kinematics::{trajectory_distance, KinematicsError, QuadraticSegment, Splice, StatePoint, Trajectory};
use crate::planner::{
    shoot_platoon_pshl, shoot_platoon_sh, with_history, BoundaryCondition, PlannerError, SignalTiming, VehicleLimits,
};
use crate::shooting_proc::{forward_template, fsp, ForwardControl};

const PROPER_TOL: f64 = 1e-7;

/// Highest trajectory through `pt`: parked, then accelerating at `accel`
/// through the point, then cruising at `vmax`.
pub fn upper_bound(pt: StatePoint, accel: f64, vmax: f64) -> Trajectory {
    let (l, v, t) = (pt.location, pt.speed, pt.time);
    let t_rest = t - v / accel;
    let t_full = t + (vmax - v) / accel;
    let mut sp = Splice::new();
    sp.push(QuadraticSegment::with_anchor(l - v * v / (2.0 * accel), 0.0, 0.0, t_rest, f64::NEG_INFINITY, t_rest));
    sp.push(QuadraticSegment::with_anchor(l, v, accel, t, t_rest, t_full).normalized());
    sp.push(QuadraticSegment::with_anchor(l + (vmax * vmax - v * v) / (2.0 * accel), vmax, 0.0, t_full, t_full, f64::INFINITY));
    sp.finish().expect("cone pieces are contiguous")
}

/// Lowest trajectory through `pt`: cruising at `vmax`, braking at `decel`
/// through the point, then parked.
pub fn lower_bound(pt: StatePoint, decel: f64, vmax: f64) -> Trajectory {
    let (l, v, t) = (pt.location, pt.speed, pt.time);
    let t_full = t + (vmax - v) / decel;
    let t_rest = t - v / decel;
    let mut sp = Splice::new();
    sp.push(QuadraticSegment::with_anchor(
        l + (vmax * vmax - v * v) / (2.0 * decel),
        vmax,
        0.0,
        t_full,
        f64::NEG_INFINITY,
        t_full,
    ));
    sp.push(QuadraticSegment::with_anchor(l, v, decel, t, t_full, t_rest).normalized());
    sp.push(QuadraticSegment::with_anchor(l - v * v / (2.0 * decel), 0.0, 0.0, t_rest, t_rest, f64::INFINITY));
    sp.finish().expect("cone pieces are contiguous")
}

/// Boundaries of the quadratic cone of a state point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBounds {
    pub upper: Trajectory,
    pub lower: Trajectory,
}

pub fn cone_bounds(pt: StatePoint, lim: &VehicleLimits) -> ConeBounds {
    ConeBounds { upper: upper_bound(pt, lim.amax, lim.vmax), lower: lower_bound(pt, lim.amin, lim.vmax) }
}

/// Boundaries of the quadratic prism between two state points. Both bounds
/// are `None` when the prism is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PrismBounds {
    pub upper: Option<Trajectory>,
    pub lower: Option<Trajectory>,
    pub feasible: bool,
}

/// Point reflection of `p` through `(t_ref, l_ref)` composed with a flip of
/// the position axis: `t -> t_ref - t`, `x -> l_ref - x`.
pub fn rotate(p: &Trajectory, l_ref: f64, t_ref: f64) -> Result<Trajectory, KinematicsError> {
    let segs = p
        .segments()
        .iter()
        .rev()
        .map(|s| {
            QuadraticSegment::with_anchor(l_ref - s.location, s.speed, -s.accel, t_ref - s.anchor, t_ref - s.end, t_ref - s.start)
                .normalized()
        })
        .collect();
    if p.is_kinked() {
        Trajectory::new_kinked(segs)
    } else {
        Trajectory::new(segs)
    }
}

/// Prism non-emptiness from the four cone bounds.
pub fn prism_feasible(a: StatePoint, b: StatePoint, lim: &VehicleLimits) -> bool {
    let (ca, cb) = (cone_bounds(a, lim), cone_bounds(b, lim));
    trajectory_distance(&cb.upper, &ca.lower, None) >= -PROPER_TOL
        && trajectory_distance(&ca.upper, &cb.lower, None) >= -PROPER_TOL
}

pub fn prism_bounds(a: StatePoint, b: StatePoint, lim: &VehicleLimits) -> Result<PrismBounds, KinematicsError> {
    if !prism_feasible(a, b, lim) {
        return Ok(PrismBounds { upper: None, lower: None, feasible: false });
    }
    let (ca, cb) = (cone_bounds(a, lim), cone_bounds(b, lim));

    let ctl = ForwardControl::new(lim.amax, lim.amin, lim.vmax);
    let Some(ahead) = fsp(a, Some(&cb.upper), ctl)?.trajectory else {
        return Ok(PrismBounds { upper: None, lower: None, feasible: false });
    };
    let mut up = Splice::new();
    up.extend(ca.upper.head(a.time));
    up.extend(ahead.into_segments());

    let rot_ctl = ForwardControl::new(-lim.amin, -lim.amax, lim.vmax);
    let ceiling = rotate(&ca.lower, b.location, b.time)?;
    let Some(behind) = fsp(StatePoint::new(0.0, b.speed, 0.0), Some(&ceiling), rot_ctl)?.trajectory else {
        return Ok(PrismBounds { upper: None, lower: None, feasible: false });
    };
    let mut low = Splice::new();
    low.extend(rotate(&behind, b.location, b.time)?.into_segments());
    low.extend(cb.lower.tail(b.time));

    Ok(PrismBounds { upper: Some(up.finish()?), lower: Some(low.finish()?), feasible: true })
}

/// True when a forward process from `pt` can stay under `ceiling`.
pub fn admits_ceiling(pt: StatePoint, ceiling: &Trajectory, lim: &VehicleLimits) -> bool {
    trajectory_distance(ceiling, &lower_bound(pt, lim.amin, lim.vmax), Some((pt.time, f64::INFINITY))) >= -PROPER_TOL
}

/// Every entry speed within limits and every follower's lower cone clear of
/// each predecessor's shifted upper cone from the follower's entry onward.
pub fn is_proper(bc: &BoundaryCondition, lim: &VehicleLimits) -> bool {
    if bc.arrivals.iter().any(|a| !(0.0..=lim.vmax).contains(&a.speed)) {
        return false;
    }
    let uppers: Vec<Trajectory> = (0..bc.len()).map(|m| upper_bound(bc.entry(m), lim.amax, lim.vmax)).collect();
    (1..bc.len()).all(|n| {
        let lower = lower_bound(bc.entry(n), lim.amin, lim.vmax);
        (0..n).all(|m| {
            let shadow = uppers[m].shadow((n - m) as u32, lim.jam_spacing, lim.delay);
            trajectory_distance(&shadow, &lower, Some((bc.arrivals[n].time, f64::INFINITY))) >= -PROPER_TOL
        })
    })
}

/// Segment length above which full-limit SH feasibility is equivalent to a
/// proper boundary condition. The backward braking term appears twice.
pub fn feasibility_threshold(lim: &VehicleLimits, decel_b: f64, n: usize) -> f64 {
    let v2 = lim.vmax * lim.vmax;
    v2 / (2.0 * lim.amax) + v2 / (-2.0 * decel_b) + v2 / (-2.0 * decel_b) + lim.jam_spacing * (n as f64 - 1.0)
}

/// Properness against full-limit planner feasibility on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub proper: bool,
    pub lead_problem_feasible: bool,
    pub signal_problem_feasible: bool,
    pub threshold: f64,
    pub above_threshold: bool,
}

impl FeasibilityReport {
    /// Lead-vehicle problem solvable exactly when the arrivals are proper.
    pub fn lead_agrees(&self) -> bool {
        self.proper == self.lead_problem_feasible
    }

    /// Signal problem solvable exactly when proper, checked only above the threshold.
    pub fn signal_agrees(&self) -> Option<bool> {
        self.above_threshold.then_some(self.proper == self.signal_problem_feasible)
    }

    pub fn agrees(&self) -> bool {
        self.lead_agrees() && self.signal_agrees().unwrap_or(true)
    }
}

/// Runs both full-limit planners on `bc` and compares with [`is_proper`].
/// The lead vehicle follows its own free template.
pub fn compare_properness_with_planners(
    bc: &BoundaryCondition,
    sig: &SignalTiming,
    lim: &VehicleLimits,
    l: f64,
) -> Result<FeasibilityReport, PlannerError> {
    let ctrl = lim.full_controls();
    let lead = with_history(
        &forward_template(bc.entry(0), ForwardControl::new(lim.amax, lim.amin, lim.vmax)),
        lim.amax,
        lim.vmax,
    )?;
    let lvp = shoot_platoon_pshl(&lead, bc, lim, lim.amax, lim.amin)?;
    let sh = shoot_platoon_sh(bc, sig, lim, &ctrl, l)?;
    let threshold = feasibility_threshold(lim, ctrl.decel_b, bc.len());
    Ok(FeasibilityReport {
        proper: is_proper(bc, lim),
        lead_problem_feasible: lvp.feasible,
        signal_problem_feasible: sh.feasible,
        threshold,
        above_threshold: l >= threshold,
    })
}

//! Whole-trajectory constructors built from repeated shooting operations.

use crate::kinematics::{tol, KinematicsError, QuadraticSegment, Splice, StatePoint, Trajectory};
use crate::shooting_ops::{bso, fso, merging_segment, ShootResult};

/// Result of a forward process; `trajectory` is `None` when no feasible
/// merge exists, in which case both times are `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessResult {
    pub trajectory: Option<Trajectory>,
    pub merge_time: f64,
    pub tangent_time: f64,
}

impl ProcessResult {
    fn empty() -> Self {
        Self { trajectory: None, merge_time: f64::NEG_INFINITY, tangent_time: f64::NEG_INFINITY }
    }
}

/// Result of a backward process.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardResult {
    /// Section from the departure off the forward trajectory up to the exit point.
    pub section: Option<Trajectory>,
    /// Forward head, backward section and the continuation after the exit.
    pub extended: Option<Trajectory>,
    pub merge_time: f64,
    pub tangent_time: f64,
}

impl BackwardResult {
    fn empty() -> Self {
        Self { section: None, extended: None, merge_time: f64::INFINITY, tangent_time: f64::INFINITY }
    }
}

/// Acceleration, deceleration and speed cap of a forward process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardControl {
    pub accel: f64,
    pub decel: f64,
    pub vmax: f64,
}

impl ForwardControl {
    pub fn new(accel: f64, decel: f64, vmax: f64) -> Self {
        Self { accel, decel, vmax }
    }
}

/// Accelerate-then-cruise template from `entry`.
pub fn forward_template(entry: StatePoint, ctl: ForwardControl) -> Trajectory {
    let (l, v, t) = (entry.location, entry.speed, entry.time);
    if v >= ctl.vmax - tol(ctl.vmax) {
        return Trajectory::from_segment(QuadraticSegment::with_anchor(l, ctl.vmax, 0.0, t, t, f64::INFINITY));
    }
    let ta = t + (ctl.vmax - v) / ctl.accel;
    let la = l + 0.5 * (ctl.vmax * ctl.vmax - v * v) / ctl.accel;
    Trajectory::new(vec![
        QuadraticSegment::with_anchor(l, v, ctl.accel, t, t, ta),
        QuadraticSegment::with_anchor(la, ctl.vmax, 0.0, ta, ta, f64::INFINITY),
    ])
    .expect("template pieces share their breakpoint")
}

/// Forward shooting process: follow the template from `entry` until it has
/// to merge into `ceiling`, then ride the ceiling.
pub fn fsp(entry: StatePoint, ceiling: Option<&Trajectory>, ctl: ForwardControl) -> Result<ProcessResult, KinematicsError> {
    let template = forward_template(entry, ctl);
    let Some(ceiling) = ceiling else {
        return Ok(ProcessResult { trajectory: Some(template), merge_time: f64::INFINITY, tangent_time: f64::INFINITY });
    };
    let segs = template.segments();
    let accel_phase = (segs.len() == 2).then(|| segs[0]);
    let cruise = segs[segs.len() - 1];
    let ta = cruise.start;
    let cruise_start = StatePoint::new(cruise.location, ctl.vmax, ta);

    let mut blocked = false;
    let mut found = None;
    for seg in ceiling.segments() {
        if seg.end < entry.time {
            continue;
        }
        let res = match accel_phase {
            Some(_) => {
                let first = fso(seg, entry, ctl.accel, ctl.decel);
                match first {
                    ShootResult::Infeasible => first,
                    ShootResult::Tangent { merge, .. } if merge <= ta => first,
                    _ => {
                        let retry = fso(seg, cruise_start, 0.0, ctl.decel);
                        if retry.is_infeasible() {
                            blocked = true;
                            continue;
                        }
                        retry
                    }
                }
            }
            None => fso(seg, cruise_start, 0.0, ctl.decel),
        };
        match res {
            ShootResult::Infeasible => return Ok(ProcessResult::empty()),
            ShootResult::Tangent { merge, .. } if blocked && merge > ta => continue,
            ShootResult::Tangent { merge, tangent } => {
                found = Some((merge, tangent));
                break;
            }
            ShootResult::Unbounded => {}
        }
    }
    let Some((tm, tp)) = found else {
        if blocked {
            return Ok(ProcessResult::empty());
        }
        return Ok(ProcessResult { trajectory: Some(template), merge_time: f64::INFINITY, tangent_time: f64::INFINITY });
    };

    let mut sp = Splice::new();
    if let Some(acc) = accel_phase {
        sp.push(QuadraticSegment { end: tm.min(ta), ..acc });
    }
    if tm > ta {
        sp.push(QuadraticSegment { end: tm, ..cruise });
    }
    let (from, a_plus) = if tm <= ta && accel_phase.is_some() { (entry, ctl.accel) } else { (cruise_start, 0.0) };
    sp.push(merging_segment(from, a_plus, ctl.decel, tm, tp));
    if tp.is_finite() {
        sp.extend(ceiling.tail(tp));
    }
    Ok(ProcessResult { trajectory: Some(sp.finish()?), merge_time: tm, tangent_time: tp })
}

/// Accelerations used by the backward process and its forward continuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardControl {
    pub accel_b: f64,
    pub decel_b: f64,
    pub forward: ForwardControl,
}

/// Backward shooting process from `exit` into `forward`.
///
/// Shoots back from the exit point (accelerating at `accel_b` into it, with a
/// stop before that when needed), merges into `forward` with a segment at
/// `decel_b`, and continues after the exit with a forward process against
/// `ceiling`.
pub fn bsp(
    exit: StatePoint,
    forward: &Trajectory,
    ceiling: Option<&Trajectory>,
    ctl: BackwardControl,
) -> Result<BackwardResult, KinematicsError> {
    let v = exit.speed.max(0.0);
    let moving = v > 0.0;
    let t_stop = exit.time - v / ctl.accel_b;
    let l_stop = exit.location - 0.5 * v * v / ctl.accel_b;
    let stopped = StatePoint::new(l_stop, 0.0, t_stop);

    let segs = forward.segments();
    let last = segs.partition_point(|s| s.start < exit.time);
    let mut found = None;
    for seg in segs[..last].iter().rev() {
        let res = if moving {
            let first = bso(seg, exit, ctl.accel_b, ctl.decel_b);
            match first {
                ShootResult::Infeasible => first,
                ShootResult::Tangent { merge, .. } if merge >= t_stop => first,
                _ => bso(seg, stopped, 0.0, ctl.decel_b),
            }
        } else {
            bso(seg, stopped, 0.0, ctl.decel_b)
        };
        match res {
            ShootResult::Infeasible => return Ok(BackwardResult::empty()),
            ShootResult::Tangent { merge, tangent } => {
                found = Some((merge, tangent));
                break;
            }
            ShootResult::Unbounded => {}
        }
    }
    let Some((tm, tp)) = found else {
        return Ok(BackwardResult::empty());
    };

    let ramp_used = moving && tm >= t_stop;
    let (from, a_plus) = if ramp_used { (exit, ctl.accel_b) } else { (stopped, 0.0) };
    let mut sec = Splice::new();
    sec.push(merging_segment(from, a_plus, ctl.decel_b, tm, tp));
    if tm < t_stop {
        sec.push(QuadraticSegment::with_anchor(l_stop, 0.0, 0.0, tm, tm, t_stop));
    }
    if moving {
        let ramp = QuadraticSegment::with_anchor(exit.location, v, ctl.accel_b, exit.time, tm.max(t_stop), exit.time);
        sec.push(ramp.normalized());
    }
    let section_segs = if sec.is_empty() {
        vec![QuadraticSegment::with_anchor(exit.location, v, 0.0, exit.time, exit.time, exit.time)]
    } else {
        sec.finish()?.into_segments()
    };

    let aux = fsp(StatePoint::new(exit.location, v, exit.time), ceiling, ctl.forward)?;
    let Some(aux) = aux.trajectory else {
        return Ok(BackwardResult {
            section: Some(Trajectory::new(section_segs)?),
            extended: None,
            merge_time: tm,
            tangent_time: tp,
        });
    };

    let mut ext = Splice::new();
    ext.extend(forward.head(tp));
    ext.extend(section_segs.iter().copied());
    ext.extend(aux.into_segments());
    Ok(BackwardResult {
        section: Some(Trajectory::new(section_segs)?),
        extended: Some(ext.finish()?),
        merge_time: tm,
        tangent_time: tp,
    })
}

/// Extended forward shooting operation: earliest merge of `p` into `bound`.
///
/// Each segment of `p`, in time order, is used as a template start; the first
/// bound segment that yields a merge inside that template segment wins.
pub fn efso(bound: &Trajectory, p: &Trajectory, decel: f64) -> ShootResult {
    for sj in p.segments() {
        let start = StatePoint::new(sj.position(sj.start), sj.speed_at(sj.start), sj.start);
        for sk in bound.segments() {
            if sk.end < sj.start {
                continue;
            }
            match fso(sk, start, sj.accel, decel) {
                ShootResult::Infeasible => return ShootResult::Infeasible,
                ShootResult::Tangent { merge, tangent } if merge >= sj.start && merge <= sj.end => {
                    return ShootResult::Tangent { merge, tangent };
                }
                _ => {}
            }
        }
    }
    ShootResult::Unbounded
}

/// Extended forward shooting process: the template from `entry` folded
/// against each ceiling in turn. `None` when any fold is infeasible.
///
/// The output clears every ceiling when no fold splices in a tail that
/// crosses a ceiling folded earlier, as with the nearest-first shadows used
/// by the parallel planner. Arbitrary ceiling lists carry no such guarantee.
pub fn efsp(entry: StatePoint, ceilings: &[Trajectory], ctl: ForwardControl) -> Result<Option<Trajectory>, KinematicsError> {
    let mut p = forward_template(entry, ctl);
    for ceiling in ceilings {
        match efso(ceiling, &p, ctl.decel) {
            ShootResult::Infeasible => return Ok(None),
            ShootResult::Unbounded => {}
            ShootResult::Tangent { merge, tangent } => {
                let (x, v, _) = p.eval(merge)?;
                let mut sp = Splice::new();
                sp.extend(p.head(merge));
                sp.push(merging_segment(StatePoint::new(x, v, merge), 0.0, ctl.decel, merge, tangent));
                if tangent.is_finite() {
                    sp.extend(ceiling.tail(tangent));
                }
                p = sp.finish()?;
            }
        }
    }
    Ok(Some(p))
}

//! Manual-driving benchmark: a delayed Intelligent Driver Model with a
//! signal-aware frontier, integrated on a fixed time step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{KinematicsError, QuadraticSegment, Trajectory};
use crate::planner::{exit_time, BoundaryCondition, PlatoonResult, SignalTiming, VehicleDiagnostics, VehicleLimits};
use crate::timegeo::upper_bound;

/// Which states the driver sees one reaction delay late.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perception {
    /// Own and frontier states both delayed.
    #[default]
    Delayed,
    /// Frontier delayed, own state current. Stationary spacing becomes `s + 2 v tau`.
    DelayedFrontier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// meters
    pub vehicle_length: f64,
    /// Comfortable deceleration magnitude, m/s².
    pub comfort_decel: f64,
    /// Yellow time before each red, seconds.
    pub yellow: f64,
    /// Integration step, seconds; must divide the reaction delay.
    pub step: f64,
    /// Time simulated after the last vehicle has passed the stop line.
    pub tail: f64,
    /// Hard stop for the simulation clock.
    pub max_horizon: f64,
    pub perception: Perception,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self { vehicle_length: 5.0, comfort_decel: 1.67, yellow: 3.0, step: 0.05, tail: 10.0, max_horizon: 2000.0, perception: Perception::Delayed }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdmError {
    #[error("vehicle {vehicle} collided with its frontier at t = {time}")]
    Collision { vehicle: usize, time: f64 },
    #[error("delay {delay} is not a multiple of the step {step}")]
    StepMismatch { delay: f64, step: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Position and speed of one vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kin {
    pub x: f64,
    pub v: f64,
}

/// Unclamped-then-clamped IDM acceleration.
///
/// `current_speed` drives the speed-dependent clamps; `own` and `frontier`
/// are the delayed states entering the spacing term.
pub fn idm_accel(current_speed: f64, own: Kin, frontier: Kin, lim: &VehicleLimits, idm: &IdmParams) -> Result<f64, f64> {
    let gap = frontier.x - own.x - idm.vehicle_length;
    if gap <= 0.0 {
        return Err(gap);
    }
    let desired = (lim.jam_spacing - idm.vehicle_length)
        + own.v * lim.delay
        + own.v * (own.v - frontier.v) / (lim.amax * idm.comfort_decel).sqrt();
    let raw = lim.amax * (1.0 - desired / gap);
    let hi = if current_speed >= lim.vmax { 0.0 } else { lim.amax };
    let lo = if current_speed <= 0.0 { 0.0 } else { lim.amin };
    Ok(raw.min(hi).max(lo))
}

/// True when `t` lies in a yellow or red interval: from `y` seconds before a
/// red begins until that red ends.
pub fn in_yellow_or_red(sig: &SignalTiming, t: f64, yellow: f64) -> bool {
    let ahead = t + yellow;
    !sig.is_green(ahead) || !sig.is_green(t)
}

/// Whether the stop line blocks a vehicle whose delayed state is `own` at
/// time `t_delayed`, evaluated at clock time `t`.
pub fn blocked_by_signal(own: Kin, t_delayed: f64, t: f64, sig: &SignalTiming, lim: &VehicleLimits, idm: &IdmParams, l: f64) -> bool {
    let to_line = l - own.x;
    // a vehicle held at the line may settle marginally past it
    if to_line <= idm.vehicle_length - lim.jam_spacing || to_line >= lim.vmax * lim.vmax / (2.0 * idm.comfort_decel) {
        return false;
    }
    if !in_yellow_or_red(sig, t, idm.yellow) {
        return false;
    }
    let best = upper_bound(crate::kinematics::StatePoint::new(own.x, own.v.max(0.0), t_delayed), lim.amax, lim.vmax);
    match exit_time(&best, l) {
        Ok((t_line, _)) => !sig.is_green(t_line),
        Err(_) => true,
    }
}

/// Frontier seen by a vehicle: the virtual car parked past the stop line
/// when blocked, else the predecessor (or an unbounded leader at `vmax`).
#[allow(clippy::too_many_arguments)]
pub fn frontier(
    own: Kin,
    t_delayed: f64,
    t: f64,
    predecessor: Option<Kin>,
    sig: &SignalTiming,
    lim: &VehicleLimits,
    idm: &IdmParams,
    l: f64,
) -> Kin {
    if blocked_by_signal(own, t_delayed, t, sig, lim, idm, l) {
        Kin { x: l + lim.jam_spacing, v: 0.0 }
    } else {
        predecessor.unwrap_or(Kin { x: f64::INFINITY, v: lim.vmax })
    }
}

struct Vehicle {
    entry: f64,
    speed_in: f64,
    first_step: usize,
    states: Vec<Kin>,
    segments: Vec<QuadraticSegment>,
}

impl Vehicle {
    fn state(&self, k: isize, t0: f64, dt: f64) -> Kin {
        if k >= self.first_step as isize {
            self.states[k as usize - self.first_step]
        } else {
            let t = t0 + k as f64 * dt;
            Kin { x: self.speed_in * (t - self.entry), v: self.speed_in }
        }
    }
}

/// Exact constant-acceleration step with the speed kept in `[0, vmax]`.
fn advance(s: Kin, a: f64, t: f64, t_next: f64, vmax: f64, out: &mut Vec<QuadraticSegment>) -> Kin {
    let dt = t_next - t;
    let v_end = s.v + a * dt;
    let cap = if v_end > vmax && a > 0.0 {
        Some(((vmax - s.v) / a, vmax))
    } else if v_end < 0.0 && a < 0.0 {
        Some((-s.v / a, 0.0))
    } else {
        None
    };
    match cap {
        Some((tc, vc)) => {
            let tc = tc.clamp(0.0, dt);
            let tm = (t + tc).min(t_next);
            let xc = s.x + s.v * tc + 0.5 * a * tc * tc;
            out.push(QuadraticSegment::with_anchor(s.x, s.v, a, t, t, tm));
            out.push(QuadraticSegment::with_anchor(xc, vc, 0.0, tm, tm, t_next));
            Kin { x: xc + vc * (dt - tc), v: vc }
        }
        None => {
            out.push(QuadraticSegment::with_anchor(s.x, s.v, a, t, t, t_next));
            Kin { x: s.x + s.v * dt + 0.5 * a * dt * dt, v: v_end }
        }
    }
}

/// Simulates the benchmark platoon. Vehicles that have not reached `l` by
/// the horizon make the result infeasible; their trajectories are kept.
pub fn simulate_idm(
    bc: &BoundaryCondition,
    sig: &SignalTiming,
    lim: &VehicleLimits,
    idm: &IdmParams,
    l: f64,
) -> Result<PlatoonResult, IdmError> {
    if idm.step <= 0.0 || idm.comfort_decel <= 0.0 || idm.vehicle_length >= lim.jam_spacing {
        return Err(IdmError::InvalidParams("step and comfort deceleration must be positive, length below jam spacing"));
    }
    let dt = idm.step;
    let ratio = lim.delay / dt;
    let lag = ratio.round() as usize;
    if (ratio - lag as f64).abs() > 1e-9 {
        return Err(IdmError::StepMismatch { delay: lim.delay, step: dt });
    }
    let t0 = bc.arrivals.first().map_or(0.0, |a| a.time);
    let mut fleet: Vec<Vehicle> = bc
        .arrivals
        .iter()
        .map(|a| {
            let first_step = ((a.time - t0) / dt - 1e-9).ceil().max(0.0) as usize;
            let t_first = t0 + first_step as f64 * dt;
            let mut segments = Vec::new();
            if t_first > a.time {
                segments.push(QuadraticSegment::with_anchor(0.0, a.speed, 0.0, a.time, a.time, t_first));
            }
            Vehicle {
                entry: a.time,
                speed_in: a.speed,
                first_step,
                states: vec![Kin { x: a.speed * (t_first - a.time), v: a.speed }],
                segments,
            }
        })
        .collect();

    let mut k = 0usize;
    let mut done_at: Option<f64> = None;
    loop {
        let t = t0 + k as f64 * dt;
        if t >= idm.max_horizon {
            break;
        }
        if let Some(td) = done_at {
            if t >= td + idm.tail {
                break;
            }
        }
        let kd = k as isize - lag as isize;
        let td = t - lim.delay;
        let mut accels = vec![None; fleet.len()];
        for n in 0..fleet.len() {
            if fleet[n].first_step > k {
                continue;
            }
            let now = fleet[n].states[k - fleet[n].first_step];
            let own = match idm.perception {
                Perception::Delayed => fleet[n].state(kd, t0, dt),
                Perception::DelayedFrontier => now,
            };
            let pred = (n > 0).then(|| fleet[n - 1].state(kd, t0, dt));
            let collision = |_| IdmError::Collision { vehicle: n, time: t };
            let ahead = pred.unwrap_or(Kin { x: f64::INFINITY, v: lim.vmax });
            let f = frontier(own, td, t, pred, sig, lim, idm, l);
            // a blocked vehicle still must not run into its predecessor
            let mut a = idm_accel(now.v, own, f, lim, idm).map_err(collision)?;
            if f != ahead && ahead.x < f.x {
                a = a.min(idm_accel(now.v, own, ahead, lim, idm).map_err(collision)?);
            }
            accels[n] = Some(a);
        }
        for (veh, a) in fleet.iter_mut().zip(accels) {
            if let Some(a) = a {
                let now = *veh.states.last().expect("active vehicles have a state");
                let next = advance(now, a, t, t0 + (k + 1) as f64 * dt, lim.vmax, &mut veh.segments);
                veh.states.push(next);
            }
        }
        k += 1;
        if done_at.is_none() && fleet.iter().all(|v| v.states.len() > 1 && v.states.last().is_some_and(|s| s.x >= l)) {
            done_at = Some(t0 + k as f64 * dt);
        }
    }

    let mut trajectories = Vec::with_capacity(fleet.len());
    let mut diagnostics = Vec::with_capacity(fleet.len());
    let mut all_exit = true;
    for veh in fleet {
        let p = Trajectory::new_kinked(veh.segments)?;
        match exit_time(&p, l) {
            Ok((exit_time, exit_speed)) => diagnostics.push(VehicleDiagnostics { bsp_used: false, exit_time, exit_speed }),
            Err(_) => {
                all_exit = false;
                diagnostics.push(VehicleDiagnostics { bsp_used: false, exit_time: f64::NAN, exit_speed: f64::NAN });
            }
        }
        trajectories.push(p);
    }
    Ok(PlatoonResult { trajectories, feasible: all_exit, diagnostics, failure: None, partial: Vec::new() })
}

/// Time from the first entry to the last exit.
pub fn total_travel_time(result: &PlatoonResult, bc: &BoundaryCondition) -> f64 {
    let last = result.diagnostics.iter().map(|d| d.exit_time).fold(f64::NEG_INFINITY, f64::max);
    last - bc.arrivals[0].time
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const LIM: VehicleLimits = VehicleLimits { vmax: 25.0, amax: 2.0, amin: -5.0, jam_spacing: 7.0, delay: 1.0 };

    #[test]
    fn free_vehicle_at_max_speed_holds() {
        let idm = IdmParams::default();
        let a = idm_accel(25.0, Kin { x: 0.0, v: 25.0 }, Kin { x: f64::INFINITY, v: 25.0 }, &LIM, &idm).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn jam_equilibrium() {
        let idm = IdmParams::default();
        let a = idm_accel(0.0, Kin { x: 0.0, v: 0.0 }, Kin { x: 7.0, v: 0.0 }, &LIM, &idm).unwrap();
        assert_abs_diff_eq!(a, 0.0);
    }

    #[test]
    fn spacing_term_cross_check() {
        let idm = IdmParams::default();
        let (v, vl, gap) = (20.0, 25.0, 50.0);
        let s_star = 2.0 + v * 1.0 + v * (v - vl) / (2.0f64 * 1.67).sqrt();
        let expected = (2.0 * (1.0 - s_star / gap)).clamp(-5.0, 2.0);
        let got = idm_accel(v, Kin { x: 0.0, v }, Kin { x: gap + 5.0, v: vl }, &LIM, &idm).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn collision_is_reported() {
        let idm = IdmParams::default();
        assert!(idm_accel(5.0, Kin { x: 0.0, v: 5.0 }, Kin { x: 4.0, v: 0.0 }, &LIM, &idm).is_err());
    }

    #[test]
    fn frontier_cases() {
        let idm = IdmParams::default();
        let sig = SignalTiming::new(25.0, 25.0);
        let free = frontier(Kin { x: 0.0, v: 25.0 }, 9.0, 10.0, None, &sig, &LIM, &idm, 1000.0);
        assert!(free.x.is_infinite());
        let red = frontier(Kin { x: 900.0, v: 25.0 }, 24.0, 25.0, None, &sig, &LIM, &idm, 1000.0);
        assert_eq!(red, Kin { x: 1007.0, v: 0.0 });
        let pred = Kin { x: 1100.0, v: 10.0 };
        let past = frontier(Kin { x: 1010.0, v: 25.0 }, 29.0, 30.0, Some(pred), &sig, &LIM, &idm, 1000.0);
        assert_eq!(past, pred);
    }

    #[test]
    fn yellow_window() {
        let sig = SignalTiming::new(25.0, 25.0);
        assert!(!in_yellow_or_red(&sig, 21.9, 3.0));
        assert!(in_yellow_or_red(&sig, 22.0, 3.0));
        assert!(in_yellow_or_red(&sig, 49.9, 3.0));
        assert!(!in_yellow_or_red(&sig, 50.0, 3.0));
    }

    #[test]
    fn single_vehicle_green() {
        let bc = BoundaryCondition::from_pairs(&[(0.0, 25.0)]);
        let r = simulate_idm(&bc, &SignalTiming::always_green(), &LIM, &IdmParams::default(), 1000.0).unwrap();
        assert!(r.feasible);
        assert_abs_diff_eq!(r.diagnostics[0].exit_time, 40.0, epsilon = 1e-9);
        assert!(r.trajectories[0].segments().iter().all(|s| s.accel == 0.0 && s.speed == 25.0));
    }

    #[test]
    fn single_vehicle_waits_for_green() {
        let bc = BoundaryCondition::from_pairs(&[(0.0, 25.0)]);
        let sig = SignalTiming::new(25.0, 25.0);
        let r = simulate_idm(&bc, &sig, &LIM, &IdmParams::default(), 1000.0).unwrap();
        assert!(r.feasible);
        let d = r.diagnostics[0];
        assert!(sig.is_green(d.exit_time));
        assert!(d.exit_time >= 50.0);
        assert!(d.exit_speed < 25.0);
    }
}

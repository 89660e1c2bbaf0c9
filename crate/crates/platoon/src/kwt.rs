//! Kinematic-wave (triangular fundamental diagram) reference solution for
//! the lead-vehicle problem, its distance to the smooth solution, and
//! stationary density/flow relations.

use rayon::prelude::*;
use thiserror::Error;

use crate::kinematics::{pointwise_min, trajectory_distance, KinematicsError, QuadraticSegment, Splice, Trajectory};
use crate::planner::{BoundaryCondition, VehicleLimits};
use crate::timegeo::is_proper;

#[derive(Debug, Error, PartialEq)]
pub enum KwtError {
    #[error("platoon sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("speed {0} outside [0, vmax]")]
    SpeedOutOfRange(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Kinematic-wave trajectories; speeds may jump at breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct KwtPlatoon {
    pub trajectories: Vec<Trajectory>,
    /// Built by the vehicle-by-vehicle recursion instead of the closed form.
    pub recursive: bool,
}

fn free_flow(t0: f64, vmax: f64) -> Trajectory {
    Trajectory::from_segment(QuadraticSegment::with_anchor(0.0, vmax, 0.0, t0, t0, f64::INFINITY))
}

/// Lower envelope of the free-flow ray from `t0` and `shadow`. Before the
/// shadow begins only the ray applies.
fn capped_ray(shadow: &Trajectory, t0: f64, vmax: f64) -> Result<Trajectory, KinematicsError> {
    let ray = free_flow(t0, vmax);
    let min = pointwise_min(&ray, shadow, true)?;
    if shadow.start_time() <= t0 {
        return Ok(min);
    }
    let mut sp = Splice::new();
    sp.extend(ray.head(shadow.start_time()));
    sp.extend(min.into_segments());
    sp.finish_kinked()
}

/// Kinematic-wave platoon behind `lead`; `bc.arrivals[0]` belongs to the lead.
///
/// Proper arrivals use the closed form (each follower capped by a shadow of
/// the lead, computed in parallel); otherwise the recursion over the
/// immediate predecessor is used.
pub fn kwt_platoon(lead: &Trajectory, bc: &BoundaryCondition, lim: &VehicleLimits) -> Result<KwtPlatoon, KwtError> {
    if is_proper(bc, lim) {
        let mut trajectories: Vec<Trajectory> = (1..bc.len())
            .into_par_iter()
            .map(|n| {
                let shadow = lead.shadow(n as u32, lim.jam_spacing, lim.delay);
                capped_ray(&shadow, bc.arrivals[n].time, lim.vmax)
            })
            .collect::<Result<_, _>>()?;
        trajectories.insert(0, lead.clone());
        Ok(KwtPlatoon { trajectories, recursive: false })
    } else {
        kwt_recursive(lead, bc, lim)
    }
}

/// Vehicle-by-vehicle construction from the immediate predecessor.
pub fn kwt_recursive(lead: &Trajectory, bc: &BoundaryCondition, lim: &VehicleLimits) -> Result<KwtPlatoon, KwtError> {
    let mut trajectories = vec![lead.clone()];
    for n in 1..bc.len() {
        let shadow = trajectories[n - 1].shadow(1, lim.jam_spacing, lim.delay);
        trajectories.push(capped_ray(&shadow, bc.arrivals[n].time, lim.vmax)?);
    }
    Ok(KwtPlatoon { trajectories, recursive: true })
}

/// Lower bound on `D(p_n - q_n)` for smooth trajectories built with the
/// given forward accelerations.
pub fn gap_bound(vmax: f64, accel_f: f64, decel_f: f64) -> f64 {
    (-0.5 * vmax * vmax / accel_f).min(0.5 * vmax * vmax / decel_f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMetric {
    pub vehicle: usize,
    /// `D(q_n - p_n)`
    pub kwt_minus_smooth: f64,
    /// `D(p_n - q_n)`
    pub smooth_minus_kwt: f64,
    pub bound: f64,
}

/// Directed distances between each smooth trajectory and its kinematic-wave
/// counterpart over the vehicle's own horizon.
pub fn gap_metrics(
    smooth: &[Trajectory],
    kwt: &KwtPlatoon,
    vmax: f64,
    accel_f: f64,
    decel_f: f64,
) -> Result<Vec<GapMetric>, KwtError> {
    if smooth.len() != kwt.trajectories.len() {
        return Err(KwtError::SizeMismatch(smooth.len(), kwt.trajectories.len()));
    }
    let bound = gap_bound(vmax, accel_f, decel_f);
    Ok(smooth
        .iter()
        .zip(&kwt.trajectories)
        .enumerate()
        .map(|(vehicle, (p, q))| {
            let window = Some((p.start_time().max(q.start_time()), f64::INFINITY));
            GapMetric {
                vehicle,
                kwt_minus_smooth: trajectory_distance(q, p, window),
                smooth_minus_kwt: trajectory_distance(p, q, window),
                bound,
            }
        })
        .collect())
}

/// Density and flow of a stationary stream moving at one speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    /// veh/m
    pub density: f64,
    /// veh/s
    pub flow: f64,
    /// At free-flow speed the density is only an upper limit.
    pub density_is_upper_limit: bool,
}

pub fn stationary_diagram(speed: f64, lim: &VehicleLimits) -> Result<StationaryPoint, KwtError> {
    if !(0.0..=lim.vmax).contains(&speed) {
        return Err(KwtError::SpeedOutOfRange(speed));
    }
    let density = 1.0 / (lim.jam_spacing + speed * lim.delay);
    Ok(StationaryPoint { density, flow: density * speed, density_is_upper_limit: speed == lim.vmax })
}

/// Triangular flow-density relation.
pub fn flow_from_density(density: f64, lim: &VehicleLimits) -> f64 {
    (density * lim.vmax).min((1.0 - lim.jam_spacing * density) / lim.delay)
}

/// Density at time `t` in two readings: `(N-1)` over the front-to-back
/// span, and the mean of the per-pair inverse spacings.
pub fn density_readings(platoon: &[Trajectory], t: f64) -> Result<(f64, f64), KinematicsError> {
    let x: Vec<f64> = platoon.iter().map(|p| p.position(t)).collect::<Result<_, _>>()?;
    let pairs = (x.len() - 1) as f64;
    let span = x[0] - x[x.len() - 1];
    let mean = x.windows(2).map(|w| 1.0 / (w[0] - w[1])).sum::<f64>() / pairs;
    Ok((pairs / span, mean))
}

/// Flow past location `l` in two readings: `(N-1)` over the first-to-last
/// passage interval, and the mean of the per-pair inverse headways.
pub fn flow_readings(platoon: &[Trajectory], l: f64) -> Result<(f64, f64), KinematicsError> {
    let t: Vec<f64> = platoon.iter().map(|p| p.inverse(l)).collect::<Result<_, _>>()?;
    let pairs = (t.len() - 1) as f64;
    let span = t[t.len() - 1] - t[0];
    let mean = t.windows(2).map(|w| 1.0 / (w[1] - w[0])).sum::<f64>() / pairs;
    Ok((pairs / span, mean))
}

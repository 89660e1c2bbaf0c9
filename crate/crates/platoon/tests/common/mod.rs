//! Helpers and independent oracles shared by the integration tests.
#![allow(dead_code)]

use platoon::kinematics::{segment_distance, trajectory_distance, QuadraticSegment, StatePoint, Trajectory};
use platoon::lab::{generate_boundary_behind, lead_profile, ScenarioConfig};
use platoon::planner::{BoundaryCondition, VehicleLimits};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LIM: VehicleLimits = VehicleLimits { vmax: 25.0, amax: 2.0, amin: -5.0, jam_spacing: 7.0, delay: 1.0 };

/// Random piecewise-constant-acceleration trajectory from `start`, ending in
/// an unbounded cruise. Speeds stay in `[0, vmax]`.
pub fn random_trajectory(rng: &mut ChaCha8Rng, start: StatePoint, lim: &VehicleLimits, pieces: usize) -> Trajectory {
    let (mut x, mut v, mut t) = (start.location, start.speed, start.time);
    let mut segs = Vec::new();
    for _ in 0..pieces {
        let a = rng.gen_range(lim.amin..=lim.amax);
        let d: f64 = rng.gen_range(0.5..8.0);
        let cap = if a > 0.0 { (lim.vmax - v) / a } else if a < 0.0 { -v / a } else { f64::INFINITY };
        let d = d.min(cap);
        if d <= 1e-6 {
            continue;
        }
        segs.push(QuadraticSegment::with_anchor(x, v, a, t, t, t + d));
        x += v * d + 0.5 * a * d * d;
        // a capped piece ends exactly on the speed bound
        v = if d == cap { if a > 0.0 { lim.vmax } else { 0.0 } } else { (v + a * d).clamp(0.0, lim.vmax) };
        t += d;
    }
    segs.push(QuadraticSegment::with_anchor(x, v, 0.0, t, t, f64::INFINITY));
    Trajectory::new(segs).expect("pieces are contiguous")
}

/// Random segment whose speed stays in `[0, vmax]` on its interval.
pub fn random_segment(rng: &mut ChaCha8Rng, lim: &VehicleLimits) -> QuadraticSegment {
    let start = rng.gen_range(-5.0..5.0);
    let v = rng.gen_range(0.0..=lim.vmax);
    let a = rng.gen_range(lim.amin..=lim.amax);
    let cap = if a > 0.0 { (lim.vmax - v) / a } else if a < 0.0 { -v / a } else { f64::INFINITY };
    let d = rng.gen_range(0.01..6.0f64).min(cap.max(0.01));
    QuadraticSegment::with_anchor(rng.gen_range(-50.0..50.0), v, a, start, start, start + d)
}

/// Dense-sampling check of `segment_distance`: the exact value must not
/// exceed the sampled minimum, and may undercut it by at most the grid slack.
pub fn segment_distance_matches_sampling(s1: &QuadraticSegment, s2: &QuadraticSegment, step: f64) -> Result<(), String> {
    let exact = segment_distance(s1, s2);
    let (lo, hi) = (s1.start.max(s2.start), s1.end.min(s2.end));
    if lo > hi {
        return if exact == f64::INFINITY { Ok(()) } else { Err(format!("disjoint but got {exact}")) };
    }
    let n = ((hi - lo) / step).floor() as usize;
    let sampled = (0..=n)
        .map(|k| lo + k as f64 * step)
        .chain(std::iter::once(hi))
        .map(|t| s1.position(t) - s2.position(t))
        .fold(f64::INFINITY, f64::min);
    let slack = 1e-6 + 0.5 * (s1.accel - s2.accel).abs() * (0.5 * step).powi(2);
    if exact > sampled + 1e-6 || sampled - exact > slack {
        return Err(format!("exact {exact} sampled {sampled} slack {slack}"));
    }
    Ok(())
}

/// Largest and smallest distance coverable in `dt` seconds while going from
/// speed `v0` to `v1` under the limits, by accelerate-cruise-brake and
/// brake-stop-accelerate profiles. `None` when `v1` is unreachable.
pub fn distance_range(v0: f64, v1: f64, dt: f64, lim: &VehicleLimits) -> Option<(f64, f64)> {
    let (up, down) = (lim.amax, -lim.amin);
    if v1 - v0 > up * dt + 1e-12 || v0 - v1 > down * dt + 1e-12 {
        return None;
    }
    let peak = (dt + v0 / up + v1 / down) / (1.0 / up + 1.0 / down);
    let most = if peak <= lim.vmax {
        let (t1, t2) = ((peak - v0) / up, (peak - v1) / down);
        0.5 * (v0 + peak) * t1 + 0.5 * (peak + v1) * t2
    } else {
        let (t1, t2) = ((lim.vmax - v0) / up, (lim.vmax - v1) / down);
        0.5 * (v0 + lim.vmax) * t1 + lim.vmax * (dt - t1 - t2) + 0.5 * (lim.vmax + v1) * t2
    };
    let trough = (v0 / down + v1 / up - dt) / (1.0 / down + 1.0 / up);
    let least = if trough >= 0.0 {
        let (t1, t2) = ((v0 - trough) / down, (v1 - trough) / up);
        0.5 * (v0 + trough) * t1 + 0.5 * (trough + v1) * t2
    } else {
        0.5 * v0 * v0 / down + 0.5 * v1 * v1 / up
    };
    Some((least, most))
}

/// Whether `b` is reachable from `a`.
pub fn reachable(a: StatePoint, b: StatePoint, lim: &VehicleLimits) -> bool {
    b.time > a.time
        && distance_range(a.speed, b.speed, b.time - a.time, lim)
            .is_some_and(|(lo, hi)| (lo - 1e-9..=hi + 1e-9).contains(&(b.location - a.location)))
}

/// Lowest and highest location at time `t` of any trajectory from `a` to
/// `b`, by a scan over intermediate speeds that zooms in around the best
/// speed found so far.
pub fn prism_extent(a: StatePoint, b: StatePoint, t: f64, lim: &VehicleLimits, speeds: usize) -> Option<(f64, f64)> {
    let window = |v: f64| {
        let (f_lo, f_hi) = distance_range(a.speed, v, t - a.time, lim)?;
        let (b_lo, b_hi) = distance_range(v, b.speed, b.time - t, lim)?;
        let lo = (a.location + f_lo).max(b.location - b_hi);
        let hi = (a.location + f_hi).min(b.location - b_lo);
        (lo <= hi).then_some((lo, hi))
    };
    let search = |score: &dyn Fn((f64, f64)) -> f64| {
        let (mut center, mut half) = (0.5 * lim.vmax, 0.5 * lim.vmax);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..5 {
            let lo = center - half;
            for k in 0..=speeds {
                let v = (lo + 2.0 * half * k as f64 / speeds as f64).clamp(0.0, lim.vmax);
                if let Some(s) = window(v).map(score).filter(|&s| s > best) {
                    best = s;
                    center = v;
                }
            }
            half = 2.0 * half / speeds as f64;
        }
        best.is_finite().then_some(best)
    };
    Some((-search(&|w| -w.0)?, search(&|w| w.1)?))
}

/// Exact `sup |p - q|` over `window`.
pub fn sup_distance(p: &Trajectory, q: &Trajectory, window: Option<(f64, f64)>) -> f64 {
    (-trajectory_distance(p, q, window)).max(-trajectory_distance(q, p, window))
}

/// Lead-vehicle instance behind the stop-and-go lead.
pub fn lvp_instance(seed: u64) -> LvpInstance {
    let cfg = ScenarioConfig { seed, ..ScenarioConfig::lead_vehicle_default() };
    let lead = lead_profile(&cfg.limits());
    let bc = generate_boundary_behind(&cfg, &lead).expect("generation succeeds");
    (cfg, lead, bc)
}

pub type LvpInstance = (ScenarioConfig, Trajectory, BoundaryCondition);

/// Lead-vehicle instances for seeds `0..24`, generated once.
pub fn lvp_pool() -> &'static [LvpInstance] {
    use rayon::prelude::*;
    static POOL: std::sync::OnceLock<Vec<LvpInstance>> = std::sync::OnceLock::new();
    POOL.get_or_init(|| (0..24u64).into_par_iter().map(lvp_instance).collect())
}

/// `segment_distance` against dense sampling on `pairs` random pairs.
pub fn segment_distance_suite(pairs: usize, seed: u64) -> Result<String, String> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut overlapping = 0;
    for i in 0..pairs {
        let (s1, s2) = (random_segment(&mut rng, &LIM), random_segment(&mut rng, &LIM));
        if s1.start.max(s2.start) <= s1.end.min(s2.end) {
            overlapping += 1;
        }
        segment_distance_matches_sampling(&s1, &s2, 1e-3).map_err(|e| format!("pair {i}: {e}"))?;
    }
    Ok(format!("{pairs} pairs ({overlapping} overlapping)"))
}

/// Prism bounds against the closed-form reachability scan on `prisms`
/// feasible prisms, plus the same number of unreachable end points.
pub fn prism_suite(prisms: usize, seed: u64) -> Result<String, String> {
    use platoon::timegeo::{prism_bounds, prism_feasible};
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < prisms {
        let a = StatePoint::new(0.0, rng.gen_range(0.0..=LIM.vmax), 0.0);
        let dt = rng.gen_range(2.0..10.0);
        let vb = rng.gen_range(0.0..=LIM.vmax);
        let Some((lo, hi)) = distance_range(a.speed, vb, dt, &LIM) else { continue };
        let b = StatePoint::new(rng.gen_range(lo..=hi), vb, dt);
        let outside = StatePoint::new(if rng.gen_bool(0.5) { hi + 1.0 } else { lo - 1.0 }, vb, dt);
        if prism_feasible(a, outside, &LIM) {
            return Err(format!("unreachable end {outside:?} reported feasible from {a:?}"));
        }
        let pb = prism_bounds(a, b, &LIM).map_err(|e| e.to_string())?;
        let (Some(up), Some(low)) = (pb.upper, pb.lower) else {
            return Err(format!("prism {a:?} -> {b:?} reported empty"));
        };
        for k in 1..20 {
            let t = dt * k as f64 / 20.0;
            let (o_lo, o_hi) = prism_extent(a, b, t, &LIM, 500).ok_or("oracle found no state")?;
            let (u, l) = (up.position(t).map_err(|e| e.to_string())?, low.position(t).map_err(|e| e.to_string())?);
                        if u < o_hi - 1e-6 || l > o_lo + 1e-6 || u - o_hi > 1e-6 || o_lo - l > 1e-6 {
                return Err(format!("prism {a:?} -> {b:?} at t={t}: bounds [{l}, {u}] oracle [{o_lo}, {o_hi}]"));
            }
            worst = worst.max(u - o_hi).max(o_lo - l);
        }
        done += 1;
    }
    Ok(format!("{prisms} prisms, worst scan gap {worst:.2e} m"))
}

/// Closed-form kinematic-wave platoon against the vehicle-by-vehicle
/// recursion on `scenarios` lead-vehicle instances.
pub fn kwt_suite(scenarios: u64) -> Result<String, String> {
    use platoon::kwt::{kwt_platoon, kwt_recursive};
    let mut worst: f64 = 0.0;
    for seed in 0..scenarios {
        let (cfg, lead, bc) = lvp_instance(seed);
        let lim = cfg.limits();
        let closed = kwt_platoon(&lead, &bc, &lim).map_err(|e| e.to_string())?;
        if closed.recursive {
            return Err(format!("seed {seed}: proper instance used the recursion"));
        }
        let rec = kwt_recursive(&lead, &bc, &lim).map_err(|e| e.to_string())?;
        for (n, (p, q)) in closed.trajectories.iter().zip(&rec.trajectories).enumerate() {
            let gap = sup_distance(p, q, Some((bc.arrivals[n].time, f64::INFINITY)));
            if gap > 1e-6 {
                return Err(format!("seed {seed} vehicle {n}: gap {gap}"));
            }
            worst = worst.max(gap);
        }
    }
    Ok(format!("{scenarios} scenarios, worst gap {worst:.2e} m"))
}

//! End-to-end acceptance criteria. Prints one line per criterion and exits
//! with a failure status if any criterion fails.

#[path = "../../platoon/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{lvp_instance, random_trajectory, sup_distance, LvpInstance, LIM};
use platoon::idm_bench::{IdmError, IdmParams};
use platoon::kinematics::{QuadraticSegment, StatePoint, Trajectory};
use platoon::kwt::{density_readings, flow_from_density, flow_readings, gap_bound, stationary_diagram};
use platoon::lab::{
    feasibility_grid_alpha_beta, gamma_sweep, generate_boundary, generate_boundary_dispersed, instance_feasible,
    measure_macroscopic, run_comparison, sup_gap, GridAlgorithm, MeasurementGrid, ScenarioConfig,
};
use platoon::planner::{
    shoot_platoon_pshl, shoot_platoon_sh, shoot_platoon_shl, validate_platoon, with_history, BoundaryCondition,
};
use platoon::shooting_proc::{fsp, ForwardControl};
use platoon::timegeo::{feasibility_threshold, is_proper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn output_feasibility() -> Outcome {
    let clock = Instant::now();
    let results: Vec<(bool, usize)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let cfg = ScenarioConfig { seed: 500 + i, alpha: (i % 11) as f64 / 10.0, ..ScenarioConfig::default() };
            let bc = generate_boundary(&cfg).expect("proper boundary");
            let lim = cfg.limits();
            let run = shoot_platoon_sh(&bc, &cfg.signal(), &lim, &lim.full_controls(), cfg.length).unwrap();
            let violations = if run.feasible {
                validate_platoon(&run.trajectories, &bc, &cfg.signal(), &lim, cfg.length).len()
            } else {
                0
            };
            (run.feasible, violations)
        })
        .collect();
    let secs = clock.elapsed().as_secs_f64();
    let feasible = results.iter().filter(|r| r.0).count();
    let violations: usize = results.iter().map(|r| r.1).sum();
    check(
        violations == 0 && secs < 5.0,
        format!("{feasible}/200 non-empty, {violations} violations, {secs:.2} s"),
    )
}

fn parallel_equals_sequential(pool: &[LvpInstance]) -> Outcome {
    let gaps: Vec<Option<f64>> = pool
        .par_iter()
        .map(|(cfg, lead, bc)| {
            let lim = cfg.limits();
            let seq = shoot_platoon_shl(lead, bc, &lim, lim.amax, lim.amin).unwrap();
            let par = shoot_platoon_pshl(lead, bc, &lim, lim.amax, lim.amin).unwrap();
            if !seq.feasible {
                return None;
            }
            if !par.feasible {
                return Some(f64::INFINITY);
            }
            let horizon = bc.arrivals.last().unwrap().time + 200.0;
            Some(sup_gap(&seq.trajectories, &par.trajectories, 0.1, horizon))
        })
        .collect();
    let used = gaps.iter().flatten().count();
    let worst = gaps.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    check(used == pool.len() && worst <= 1e-6, format!("{used}/{} feasible instances, worst gap {worst:.2e} m", pool.len()))
}

fn biconditional() -> Outcome {
    let rows: Vec<(bool, bool)> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let cfg = ScenarioConfig {
                seed: i,
                alpha: (i % 11) as f64 / 10.0,
                beta: ((i / 11) % 11) as f64 / 10.0,
                saturation: 0.5,
                green: f64::INFINITY,
                red: 0.0,
                ..ScenarioConfig::default()
            };
            let bc = generate_boundary_dispersed(&cfg);
            (is_proper(&bc, &cfg.limits()), instance_feasible(&cfg, &bc, GridAlgorithm::Pshl).unwrap())
        })
        .collect();
    let proper = rows.iter().filter(|r| r.0).count();
    let disagree = rows.iter().filter(|r| r.0 != r.1).count();
    check(disagree == 0, format!("{proper} proper, {} non-proper, {disagree} disagreements", rows.len() - proper))
}

fn long_segment_feasibility() -> Outcome {
    let base = ScenarioConfig::default();
    let length = feasibility_threshold(&base.limits(), base.decel_b, base.vehicles) + 1.0;
    let rows: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let cfg = ScenarioConfig { length, seed: 2000 + i, alpha: (i % 11) as f64 / 10.0, ..base.clone() };
            let bc = generate_boundary(&cfg).expect("proper boundary");
            let lim = cfg.limits();
            let run = shoot_platoon_sh(&bc, &cfg.signal(), &lim, &lim.full_controls(), length).unwrap();
            (is_proper(&bc, &lim), run.feasible)
        })
        .collect();
    let proper = rows.iter().filter(|r| r.0).count();
    let feasible = rows.iter().filter(|r| r.0 && r.1).count();
    check(proper == 100 && feasible == 100, format!("L = {length:.2} m, {feasible}/{proper} proper instances non-empty"))
}

fn kwt_bounds(pool: &[LvpInstance]) -> Outcome {
    let bound = gap_bound(LIM.vmax, LIM.amax, LIM.amin);
    let worst: Vec<(f64, f64)> = pool[..50]
        .par_iter()
        .map(|(cfg, _, bc)| {
            let (_, sweeps) = gamma_sweep(cfg, bc, &[1.0]).unwrap();
            let m = &sweeps[0].metrics[1..];
            (
                m.iter().map(|g| g.kwt_minus_smooth.abs()).fold(0.0, f64::max),
                m.iter().map(|g| g.smooth_minus_kwt).fold(f64::INFINITY, f64::min),
            )
        })
        .collect();
    let upper = worst.iter().map(|w| w.0).fold(0.0, f64::max);
    let lower = worst.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    check(
        upper <= 1e-6 && lower >= bound - 1e-6,
        format!("50 scenarios, max |D(q-p)| {upper:.2e}, min D(p-q) {lower:.2} (bound {bound})"),
    )
}

fn convergence() -> Outcome {
    let (cfg, _, bc) = lvp_instance(ScenarioConfig::lead_vehicle_default().seed);
    let gammas = [1.0 / 3.0, 1.0, 3.0, 10.0];
    let (_, sweeps) = gamma_sweep(&cfg, &bc, &gammas).map_err(|e| e.to_string())?;
    let devs: Vec<f64> = sweeps.iter().map(|s| s.max_deviation).collect();
    let monotone = devs.windows(2).all(|w| w[1] <= w[0]);
    let bounded = sweeps.iter().all(|s| s.max_deviation <= s.bound.abs() + 1e-6);
    let detail = sweeps.iter().map(|s| format!("{:.3}: {:.2} <= {:.2}", s.gamma, s.max_deviation, s.bound.abs())).collect::<Vec<_>>();
    check(monotone && bounded, detail.join(", "))
}

fn contraction() -> Outcome {
    let ctl = ForwardControl::new(LIM.amax, LIM.amin, LIM.vmax);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut instances, mut worst_excess) = (0, f64::NEG_INFINITY);
    while instances < 50 {
        let (x, v) = (rng.gen_range(30.0..200.0), rng.gen_range(0.0..=LIM.vmax));
        let leader = random_trajectory(&mut rng, StatePoint::new(x, v, -3.0), &LIM, 6);
        let leader = with_history(&leader, LIM.amax, LIM.vmax).unwrap();
        let entry = StatePoint::new(0.0, rng.gen_range(0.0..=LIM.vmax), 0.0);
        let solve = |p: &Trajectory| fsp(entry, Some(&p.shadow(1, LIM.jam_spacing, LIM.delay)), ctl).unwrap().trajectory;
        let Some(base) = solve(&leader) else { continue };
        let mut ok = true;
        for eps in [0.1, 1.0] {
            for moved in [leader.shifted(eps, 0.0), leader.shifted(-eps, 0.0), leader.shifted(0.0, eps / LIM.vmax)] {
                let Some(out) = solve(&moved) else {
                    ok = false;
                    continue;
                };
                let gap = sup_distance(&base, &out, Some((entry.time, f64::INFINITY)));
                worst_excess = worst_excess.max(gap - eps);
            }
        }
        instances += usize::from(ok);
    }
    check(worst_excess <= 1e-6, format!("50 instances, worst sup gap minus epsilon {worst_excess:.2e} m"))
}

fn stationary_stream(v: f64) -> Outcome {
    let n = 30;
    let headway = (LIM.jam_spacing + v * LIM.delay) / v;
    let lead = Trajectory::from_segment(QuadraticSegment::with_anchor(0.0, v, 0.0, 0.0, f64::NEG_INFINITY, f64::INFINITY));
    let pairs: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 * headway, v)).collect();
    let bc = BoundaryCondition::from_pairs(&pairs);
    let run = shoot_platoon_shl(&lead, &bc, &LIM, LIM.amax, LIM.amin).map_err(|e| e.to_string())?;
    if !run.feasible {
        return Err(format!("V = {v}: planner failed"));
    }
    let p = &run.trajectories;
    let last_entry = pairs[n - 1].0;
    let cruising = p.iter().all(|q| q.segments().iter().filter(|s| s.end > last_entry).all(|s| s.accel == 0.0 && (s.speed - v).abs() <= 1e-9));
    let pt = stationary_diagram(v, &LIM).map_err(|e| e.to_string())?;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let (k1, k2) = density_readings(p, last_entry + 1.0).map_err(|e| e.to_string())?;
    let (o1, o2) = flow_readings(p, 500.0).map_err(|e| e.to_string())?;
    let exact = [rel(k1, pt.density), rel(k2, pt.density), rel(o1, pt.flow), rel(o2, pt.flow), rel(pt.flow, pt.density * v)]
        .into_iter()
        .fold(0.0, f64::max);

    let wave = -LIM.jam_spacing / LIM.delay;
    let t_end = last_entry + 1000.0 / v;
    let grid = MeasurementGrid { length: 100.0, duration: 5.0, wave_speed: wave, x_range: (0.0, 1000.0), t_range: (0.0, (t_end / 5.0).ceil() * 5.0) };
    let inside = |t: f64, x: f64| x <= v * t - 1e-9 && x >= v * (t - last_entry) + 1e-9;
    let mut windows = 0;
    let mut worst: f64 = 0.0;
    for c in measure_macroscopic(p, &grid) {
        let shift = grid.length / -wave;
        let corners = [(c.t, c.x), (c.t + grid.duration, c.x), (c.t - shift, c.x + grid.length), (c.t - shift + grid.duration, c.x + grid.length)];
        if corners.iter().all(|&(t, x)| inside(t, x)) {
            windows += 1;
            worst = worst.max(rel(c.flow, flow_from_density(c.density, &LIM)));
        }
    }
    let ok = cruising && exact <= 1e-9 && windows > 0 && worst <= 0.02;
    check(ok, format!("V = {v}: cruising {cruising}, exact rel {exact:.1e}, {windows} windows off curve by <= {:.2}%", 100.0 * worst))
}

fn fundamental_diagram() -> Outcome {
    let parts: Vec<Outcome> = [5.0, 15.0, 24.9].into_iter().map(stationary_stream).collect();
    let ok = parts.iter().all(Result::is_ok);
    let detail = parts.into_iter().map(|r| r.unwrap_or_else(|e| e)).collect::<Vec<_>>().join("; ");
    check(ok, detail)
}

fn signal_comparison() -> Outcome {
    let clock = Instant::now();
    let report = run_comparison(&ScenarioConfig::default(), &IdmParams::default()).map_err(|e| e.to_string())?;
    let secs = clock.elapsed().as_secs_f64();
    let sh = report.sh_full_travel_time;
    let idm = report.idm_travel_time;
    let idm_text = match (&report.idm, idm) {
        (Err(IdmError::Collision { vehicle, time }), _) => format!("IDM collided (vehicle {vehicle} at t = {time:.2})"),
        (Err(e), _) => format!("IDM error: {e}"),
        (Ok(_), Some(t)) => format!("IDM {t:.2} s"),
        (Ok(_), None) => "IDM did not complete".to_string(),
    };
    let sh_text = sh.map_or("SH infeasible".to_string(), |t| format!("SH {t:.2} s"));
    let ok = matches!((sh, idm), (Some(s), Some(i)) if s < 220.0 && i >= 1.25 * s) && secs < 10.0;
    check(ok, format!("{sh_text}, {idm_text}, {secs:.2} s"))
}

fn grid_trends() -> Outcome {
    let clock = Instant::now();
    let axis: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let base = ScenarioConfig { saturation: 0.5, green: f64::INFINITY, red: 0.0, ..ScenarioConfig::default() };
    let cells = feasibility_grid_alpha_beta(&base, &axis, &axis, 20, GridAlgorithm::Pshl).map_err(|e| e.to_string())?;
    let secs = clock.elapsed().as_secs_f64();
    let rate = |a: usize, b: usize| cells[a * axis.len() + b].rate;
    let k = axis.len();
    let row_means: Vec<f64> = (0..k).map(|a| (0..k).map(|b| rate(a, b)).sum::<f64>() / k as f64).collect();
    let col_means: Vec<f64> = (0..k).map(|b| (0..k).map(|a| rate(a, b)).sum::<f64>() / k as f64).collect();
    let monotone = |m: &[f64]| m.windows(2).all(|w| w[1] <= w[0] + 0.15);
    let ok = rate(0, 0) == 1.0 && rate(k - 1, k - 1) <= 0.5 && monotone(&row_means) && monotone(&col_means) && secs < 120.0;
    check(ok, format!("rate(0,0) {:.2}, rate(1,1) {:.2}, rows monotone {}, columns monotone {}, {secs:.1} s", rate(0, 0), rate(k - 1, k - 1), monotone(&row_means), monotone(&col_means)))
}

fn oracle_suites() -> Outcome {
    let parts = [common::segment_distance_suite(10_000, 11), common::prism_suite(20, 12), common::kwt_suite(20)];
    let ok = parts.iter().all(Result::is_ok);
    let detail = parts.into_iter().map(|r| r.unwrap_or_else(|e| e)).collect::<Vec<_>>().join("; ");
    check(ok, detail)
}

fn main() -> ExitCode {
    let pool: Vec<LvpInstance> = (0..100u64).into_par_iter().map(lvp_instance).collect();
    let criteria: Vec<Criterion> = vec![
        ("output feasibility", Box::new(output_feasibility)),
        ("parallel planner equals sequential", Box::new(|| parallel_equals_sequential(&pool))),
        ("feasibility biconditional", Box::new(biconditional)),
        ("long-segment feasibility", Box::new(long_segment_feasibility)),
        ("kinematic-wave bounds", Box::new(|| kwt_bounds(&pool))),
        ("convergence in acceleration scale", Box::new(convergence)),
        ("contraction", Box::new(contraction)),
        ("stationary fundamental diagram", Box::new(fundamental_diagram)),
        ("signalized comparison", Box::new(signal_comparison)),
        ("feasibility grid trends", Box::new(grid_trends)),
        ("oracle suites", Box::new(oracle_suites)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} ({name}): {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

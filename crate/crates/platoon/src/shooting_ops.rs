//! Forward and backward shooting operations: the analytic tangency between a
//! template parabola followed by a merging parabola and one bounding segment.
//!
//! Both operations work in coordinates shifted to the start time, with the
//! bound re-anchored there. Writing `W` for the speed gap and `g` for the
//! position gap between bound and start, and `d = a⁺ - a⁻`, the bound minus
//! the merge is the parabola
//!
//! ```text
//! q(t) = 0.5 (a' - a⁻) t² + (W - d·tm) t + g + 0.5 d·tm²
//! ```
//!
//! and tangency (a double root of `q`) gives
//! `d (a⁺ - a') tm² - 2 d W tm + W² - 2 (a' - a⁻) g = 0`,
//! with the contact time at the vertex of `q`.

use crate::kinematics::{segment_distance, tol, QuadraticSegment, StatePoint};

/// Outcome of one shooting operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShootResult {
    /// The bound lies below even the hardest-braking ray from the start.
    Infeasible,
    /// Merge at `merge`, touch the bound at `tangent`.
    Tangent { merge: f64, tangent: f64 },
    /// No contact with this segment.
    Unbounded,
}

/// Direction of a shooting operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl ShootResult {
    /// `(merge, tangent)` with signed-infinity sentinels: a forward
    /// operation reports infeasibility as `-inf` and no contact as `+inf`,
    /// a backward operation the other way round.
    pub fn times(&self, dir: Direction) -> (f64, f64) {
        let inf = match dir {
            Direction::Forward => f64::INFINITY,
            Direction::Backward => f64::NEG_INFINITY,
        };
        match *self {
            ShootResult::Infeasible => (-inf, -inf),
            ShootResult::Tangent { merge, tangent } => (merge, tangent),
            ShootResult::Unbounded => (inf, inf),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, ShootResult::Infeasible)
    }
}

/// Relative magnitude of rounding noise assumed on re-anchored inputs.
const NOISE: f64 = 1e-12;

/// Largest relative position or speed gap accepted at a contact pulled
/// back into the bound's window.
const CONTACT_TOL: f64 = 1e-6;

/// Forward shooting operation.
///
/// From `start`, follow acceleration `a_plus`, then switch to `a_minus` at the
/// merge time so the merging parabola touches `bound` from below.
pub fn fso(bound: &QuadraticSegment, start: StatePoint, a_plus: f64, a_minus: f64) -> ShootResult {
    shoot(bound, start, a_plus, a_minus, Direction::Forward)
}

/// Backward shooting operation.
///
/// The template ends at `start` with acceleration `a_plus`; going back in
/// time it switches to `a_minus` at the merge time so the merging parabola
/// touches `bound` from below at an earlier time.
pub fn bso(bound: &QuadraticSegment, start: StatePoint, a_plus: f64, a_minus: f64) -> ShootResult {
    shoot(bound, start, a_plus, a_minus, Direction::Backward)
}

fn shoot(bound: &QuadraticSegment, start: StatePoint, a_plus: f64, a_minus: f64, dir: Direction) -> ShootResult {
    let fwd = dir == Direction::Forward;
    let shot = Shot { bound, start, a_plus, a_minus };
    let t0 = start.time;
    let (l, v) = (start.location, start.speed);

    let ray = if fwd {
        QuadraticSegment::with_anchor(l, v, a_minus, t0, t0, f64::INFINITY)
    } else {
        QuadraticSegment::with_anchor(l, v, a_minus, t0, f64::NEG_INFINITY, t0)
    };
    if segment_distance(bound, &ray) < -tol(l) {
        return ShootResult::Infeasible;
    }

    let (lo, hi) = if fwd {
        ((bound.start - t0).max(0.0), bound.end - t0)
    } else {
        (bound.start - t0, (bound.end - t0).min(0.0))
    };
    if lo > hi {
        return ShootResult::Unbounded;
    }

    let b = bound.rebased(t0);
    let w = b.speed - v;
    let gap = b.location - l;
    let d = a_plus - a_minus;
    let curv = bound.accel - a_minus;

    let lag = t0 - bound.anchor;
    let pos_noise = NOISE * (1.0 + l.abs() + bound.location.abs() + (bound.speed * lag).abs() + (0.5 * bound.accel * lag * lag).abs());
    let vel_noise = NOISE * (1.0 + v.abs() + bound.speed.abs() + (bound.accel * lag).abs());

    // the merge ends exactly where the bound begins or ends when the two
    // parabolas share their acceleration
    let edge = |tm: f64| if fwd { (tm, hi) } else { (tm, lo) };
    let pick = |cands: &[(f64, f64)]| -> Option<(f64, f64)> {
        cands
            .iter()
            .copied()
            .reduce(|x, y| if (x.0 <= y.0) == fwd { x } else { y })
    };

    if curv < 0.0 {
        return ShootResult::Unbounded;
    }
    if curv == 0.0 {
        if d == 0.0 {
            let w_tol = 1e-9 * v.abs().max(1.0) + 16.0 * vel_noise;
            let g_tol = tol(l) + 16.0 * pos_noise;
            return if w.abs() <= w_tol && gap.abs() <= g_tol {
                accept(&shot, edge(0.0), lo, hi, fwd, 1e-9)
            } else {
                ShootResult::Unbounded
            };
        }
        let tm = w / d;
        let lhat = gap + 0.5 * d * tm * tm;
        let l_tol = tol(l) + 16.0 * (pos_noise + (tm * vel_noise).abs());
        if lhat.abs() > l_tol {
            return ShootResult::Unbounded;
        }
        let inside = tm >= lo - tol(lo) && tm <= hi + tol(hi);
        return if inside {
            let tm = tm.clamp(lo, hi);
            ShootResult::Tangent { merge: t0 + tm, tangent: t0 + edge(tm).1 }
        } else {
            ShootResult::Unbounded
        };
    }

    let alpha = d * (a_plus - bound.accel);
    let beta = -2.0 * d * w;
    let gamma = w * w - 2.0 * curv * gap;
    let gamma_scale = w * w + 2.0 * curv * gap.abs();
    let d_gamma = 2.0 * w.abs() * vel_noise + 2.0 * curv * pos_noise;
    let d_beta = 2.0 * d.abs() * vel_noise;
    let tangent_of = |tm: f64| (w - d * tm) / -curv;

    if d == 0.0 {
        // template and merge coincide; only the ray itself can touch
        if gamma.abs() <= 1e-9 * gamma_scale + 16.0 * d_gamma {
            return accept(&shot, (0.0, tangent_of(0.0)), lo, hi, fwd, 1e-9 * tangent_of(0.0).abs().max(1.0));
        }
        return ShootResult::Unbounded;
    }

    let w_tol = 1e-9 * v.abs().max(1.0) + 16.0 * vel_noise;
    if alpha == 0.0 && w.abs() <= w_tol {
        if gamma.abs() <= 1e-9 * gamma_scale + 16.0 * d_gamma {
            // template already rides the bound
            let t = if fwd { lo } else { hi };
            return ShootResult::Tangent { merge: t0 + t, tangent: t0 + t };
        }
        return ShootResult::Unbounded;
    }

    let (cands, root_tol): (Vec<f64>, f64) = if alpha == 0.0 {
        let tm = -gamma / beta;
        (vec![tm], 1e-9 * tm.abs().max(1.0) + 16.0 * (d_gamma + tm.abs() * d_beta) / beta.abs())
    } else {
        let mut disc = beta * beta - 4.0 * alpha * gamma;
        let d_disc = 2.0 * beta.abs() * d_beta + 4.0 * alpha.abs() * d_gamma;
        let clamp = 1e-9 * (beta * beta).max((4.0 * alpha * gamma).abs()) + 16.0 * d_disc;
        if disc < 0.0 {
            if disc >= -clamp {
                disc = 0.0;
            } else {
                return ShootResult::Unbounded;
            }
        }
        let sq = disc.sqrt();
        let q = -0.5 * (beta + if beta >= 0.0 { sq } else { -sq });
        let roots = if q == 0.0 { vec![0.0] } else { vec![q / alpha, gamma / q] };
        let spread = clamp.sqrt() / (2.0 * alpha.abs());
        let scale = roots.iter().fold(1.0_f64, |m, r| m.max(r.abs()));
        (roots, 1e-9 * scale + spread)
    };

    let ordered: Vec<(f64, f64)> = cands
        .into_iter()
        .map(|tm| (tm, tangent_of(tm)))
        .filter(|&(tm, tp)| {
            if fwd {
                tm >= -root_tol && tp >= tm - root_tol
            } else {
                tm <= root_tol && tp <= tm + root_tol
            }
        })
        .collect();
    match pick(&ordered) {
        Some(pair) => accept(&shot, pair, lo, hi, fwd, root_tol),
        None => ShootResult::Unbounded,
    }
}

/// Start and accelerations of a shooting operation, for checking contacts.
struct Shot<'a> {
    bound: &'a QuadraticSegment,
    start: StatePoint,
    a_plus: f64,
    a_minus: f64,
}

impl Shot<'_> {
    /// Position and speed gaps between bound and merge at relative time `t`.
    fn gaps(&self, tm: f64, t: f64) -> (f64, f64) {
        let (l, v, t0) = (self.start.location, self.start.speed, self.start.time);
        let vm = v + self.a_plus * tm;
        let x = l + v * tm + 0.5 * self.a_plus * tm * tm + vm * (t - tm) + 0.5 * self.a_minus * (t - tm) * (t - tm);
        let u = vm + self.a_minus * (t - tm);
        (self.bound.position(t0 + t) - x, self.bound.speed_at(t0 + t) - u)
    }
}

/// Clamps a candidate pair onto its admissible ordering and checks the
/// contact time against the bound's window. A clamped contact must still
/// touch the bound.
fn accept(shot: &Shot, (tm, tp): (f64, f64), lo: f64, hi: f64, fwd: bool, slack: f64) -> ShootResult {
    let t0 = shot.start.time;
    let (tm, tp) = if fwd {
        let tm = tm.max(0.0);
        (tm, tp.max(tm))
    } else {
        let tm = tm.min(0.0);
        (tm, tp.min(tm))
    };
    if tp < lo - slack || tp > hi + slack {
        return ShootResult::Unbounded;
    }
    let clamped = tp.clamp(lo, hi);
    let tm = if fwd { tm.min(clamped) } else { tm.max(clamped) };
    if clamped != tp {
        let (dx, dv) = shot.gaps(tm, clamped);
        let scale = 1.0 + shot.start.location.abs() + shot.bound.location.abs();
        if dx.abs() > CONTACT_TOL * scale || dv.abs() > CONTACT_TOL * (1.0 + shot.start.speed.abs()) {
            return ShootResult::Unbounded;
        }
    }
    ShootResult::Tangent { merge: t0 + tm, tangent: t0 + clamped }
}

/// Template segment from the start of a shooting operation.
pub fn template_segment(start: StatePoint, a_plus: f64, dir: Direction, until: f64) -> QuadraticSegment {
    match dir {
        Direction::Forward => QuadraticSegment::with_anchor(start.location, start.speed, a_plus, start.time, start.time, until),
        Direction::Backward => {
            QuadraticSegment::with_anchor(start.location, start.speed, a_plus, start.time, until, start.time).normalized()
        }
    }
}

/// Merging segment for a tangent result: leaves the template at `merge`
/// with acceleration `a_minus` and ends at `tangent`.
pub fn merging_segment(start: StatePoint, a_plus: f64, a_minus: f64, merge: f64, tangent: f64) -> QuadraticSegment {
    let tmpl = QuadraticSegment::with_anchor(start.location, start.speed, a_plus, start.time, merge.min(start.time), merge.max(start.time));
    let (lm, vm) = (tmpl.position(merge), tmpl.speed_at(merge));
    let (s, e) = if merge <= tangent { (merge, tangent) } else { (tangent, merge) };
    QuadraticSegment::with_anchor(lm, vm, a_minus, merge, s, e).normalized()
}

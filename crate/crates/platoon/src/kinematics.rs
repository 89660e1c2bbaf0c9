//! Quadratic segments, piecewise-quadratic trajectories and the directed
//! distance functional used by every shooting routine.

use thiserror::Error;

/// Global comparison tolerance, scaled by `max(1, |value|)`.
pub const EPS: f64 = 1e-9;

/// Largest position/speed mismatch accepted when segments are spliced.
pub const SPLICE_TOL: f64 = 1e-6;

/// Tolerance scaled to the magnitude of `x`.
#[inline]
pub fn tol(x: f64) -> f64 {
    if x.is_finite() {
        EPS * x.abs().max(1.0)
    } else {
        EPS
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("time {t} outside covered interval [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
    #[error("location {0} is never reached")]
    Unreached(f64),
    #[error("equal accelerations have no interior critical point")]
    EqualAcceleration,
    #[error("segments {index} and {next} are not contiguous or not smooth (gap {gap:e})", next = index + 1)]
    Discontinuity { index: usize, gap: f64 },
    #[error("trajectory has no segments")]
    Empty,
    #[error("segment anchor time must be finite")]
    InfiniteAnchor,
}

/// Location, speed and time of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoint {
    /// meters
    pub location: f64,
    /// m/s
    pub speed: f64,
    /// seconds
    pub time: f64,
}

impl StatePoint {
    pub fn new(location: f64, speed: f64, time: f64) -> Self {
        Self { location, speed, time }
    }

    /// Speed within `[0, vmax]` up to tolerance.
    pub fn is_feasible(&self, vmax: f64) -> bool {
        self.speed >= -tol(vmax) && self.speed <= vmax + tol(vmax)
    }
}

/// Quadratic position function `0.5 a (t - anchor)^2 + v (t - anchor) + l`
/// restricted to `[start, end]`.
///
/// The anchor is kept at `start` whenever `start` is finite. A segment whose
/// interval is unbounded on the left keeps its anchor at `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSegment {
    /// Position at the anchor time, meters.
    pub location: f64,
    /// Speed at the anchor time, m/s.
    pub speed: f64,
    /// m/s²
    pub accel: f64,
    /// seconds
    pub anchor: f64,
    /// seconds, may be `-inf`
    pub start: f64,
    /// seconds, may be `+inf`
    pub end: f64,
}

impl QuadraticSegment {
    /// Builds `(l, v, a, t_from, t_to)` with the anchor at `t_from`.
    /// The two times may be given in either order.
    pub fn new(l: f64, v: f64, a: f64, t_from: f64, t_to: f64) -> Result<Self, KinematicsError> {
        if !t_from.is_finite() {
            return Err(KinematicsError::InfiniteAnchor);
        }
        let (start, end) = if t_from <= t_to { (t_from, t_to) } else { (t_to, t_from) };
        Ok(Self::with_anchor(l, v, a, t_from, start, end).normalized())
    }

    /// Raw constructor; no re-anchoring.
    pub fn with_anchor(l: f64, v: f64, a: f64, anchor: f64, start: f64, end: f64) -> Self {
        Self { location: l, speed: v, accel: a, anchor, start, end }
    }

    /// Same function re-anchored at `start` when `start` is finite.
    pub fn normalized(self) -> Self {
        if self.start.is_finite() && self.start != self.anchor {
            self.rebased(self.start)
        } else if !self.start.is_finite() && self.end.is_finite() && self.end != self.anchor {
            self.rebased(self.end)
        } else {
            self
        }
    }

    /// Same function anchored at `t`.
    pub fn rebased(self, t: f64) -> Self {
        Self { location: self.position(t), speed: self.speed_at(t), anchor: t, ..self }
    }

    /// Same function on a different interval, re-anchored at the new start.
    pub fn restricted(self, start: f64, end: f64) -> Self {
        Self { start, end, ..self }.normalized()
    }

    /// Unchecked quadratic value.
    #[inline]
    pub fn position(&self, t: f64) -> f64 {
        let dt = t - self.anchor;
        if dt == 0.0 {
            return self.location;
        }
        0.5 * self.accel * dt * dt + self.speed * dt + self.location
    }

    /// Unchecked derivative.
    #[inline]
    pub fn speed_at(&self, t: f64) -> f64 {
        self.speed + self.accel * (t - self.anchor)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start - tol(self.start) && t <= self.end + tol(self.end)
    }

    /// Position at `t`, which must lie in the closed interval.
    pub fn eval(&self, t: f64) -> Result<f64, KinematicsError> {
        if !self.contains(t) {
            return Err(KinematicsError::OutOfDomain { t, start: self.start, end: self.end });
        }
        Ok(self.position(t))
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn shifted(self, dl: f64, dt: f64) -> Self {
        Self {
            location: self.location + dl,
            anchor: self.anchor + dt,
            start: self.start + dt,
            end: self.end + dt,
            ..self
        }
    }

    /// Speed in `[0, vmax]` and acceleration in `[amin, amax]` over the interval.
    pub fn is_feasible(&self, vmax: f64, amin: f64, amax: f64) -> bool {
        let acc_ok = self.accel >= amin - tol(amin) && self.accel <= amax + tol(amax);
        let ends = [self.start, self.end];
        let speed_ok = ends.iter().all(|&t| {
            let v = if t.is_finite() { self.speed_at(t) } else if self.accel == 0.0 { self.speed } else { f64::NAN };
            v >= -1e-9 && v <= vmax + 1e-9
        });
        acc_ok && speed_ok
    }

    /// Limit of `self - other` as `t` goes to `+inf` (`dir > 0`) or `-inf`.
    fn diff_at_infinity(&self, other: &Self, dir: f64) -> f64 {
        let da = self.accel - other.accel;
        if da != 0.0 {
            return da.signum() * f64::INFINITY;
        }
        let slope = (self.speed - self.accel * self.anchor) - (other.speed - other.accel * other.anchor);
        if slope != 0.0 {
            return (slope * dir).signum() * f64::INFINITY;
        }
        let t = if self.anchor.is_finite() { self.anchor } else { other.anchor };
        self.position(t) - other.position(t)
    }

    fn diff_at(&self, other: &Self, t: f64) -> f64 {
        if t.is_finite() {
            self.position(t) - other.position(t)
        } else {
            self.diff_at_infinity(other, t.signum())
        }
    }
}

/// Stationary point of `s1(t) - s2(t)`.
pub fn critical_time(s1: &QuadraticSegment, s2: &QuadraticSegment) -> Result<f64, KinematicsError> {
    let den = s2.accel - s1.accel;
    if den == 0.0 {
        return Err(KinematicsError::EqualAcceleration);
    }
    Ok((s1.speed - s1.accel * s1.anchor - s2.speed + s2.accel * s2.anchor) / den)
}

/// Minimum of `s1 - s2` over the overlap of their intervals, `+inf` when the
/// intervals are disjoint.
pub fn segment_distance(s1: &QuadraticSegment, s2: &QuadraticSegment) -> f64 {
    segment_distance_within(s1, s2, f64::NEG_INFINITY, f64::INFINITY)
}

fn segment_distance_within(s1: &QuadraticSegment, s2: &QuadraticSegment, lo: f64, hi: f64) -> f64 {
    segment_argmin(s1, s2, lo, hi).0
}

/// Minimum of `s1 - s2` over the clipped overlap and a time attaining it.
fn segment_argmin(s1: &QuadraticSegment, s2: &QuadraticSegment, lo: f64, hi: f64) -> (f64, f64) {
    let t_lo = s1.start.max(s2.start).max(lo);
    let t_hi = s1.end.min(s2.end).min(hi);
    if t_lo > t_hi {
        return (f64::INFINITY, f64::NAN);
    }
    if s1.accel - s2.accel > 0.0 {
        if let Ok(ts) = critical_time(s1, s2) {
            if ts > t_lo && ts < t_hi {
                return (s1.position(ts) - s2.position(ts), ts);
            }
        }
    }
    let (a, b) = (s1.diff_at(s2, t_lo), s1.diff_at(s2, t_hi));
    if a <= b {
        (a, t_lo)
    } else {
        (b, t_hi)
    }
}

/// Ordered list of contiguous quadratic segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    segments: Vec<QuadraticSegment>,
    kinked: bool,
}

impl Trajectory {
    /// C¹ trajectory; adjacent segments must share endpoints, position and speed.
    pub fn new(segments: Vec<QuadraticSegment>) -> Result<Self, KinematicsError> {
        Self::build(segments, false)
    }

    /// C⁰ trajectory whose speed may jump at breakpoints.
    pub fn new_kinked(segments: Vec<QuadraticSegment>) -> Result<Self, KinematicsError> {
        Self::build(segments, true)
    }

    fn build(segments: Vec<QuadraticSegment>, kinked: bool) -> Result<Self, KinematicsError> {
        let point = segments.first().copied().filter(|s| s.end == s.start);
        let mut segments: Vec<_> = segments.into_iter().filter(|s| s.end > s.start).collect();
        if segments.is_empty() {
            // a lone instant is kept so degenerate sections stay representable
            segments.extend(point);
        }
        if segments.is_empty() {
            return Err(KinematicsError::Empty);
        }
        for (i, w) in segments.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            if a.end != b.start {
                return Err(KinematicsError::Discontinuity { index: i, gap: b.start - a.end });
            }
            let t = a.end;
            let dx = a.position(t) - b.position(t);
            if dx.abs() > SPLICE_TOL * a.position(t).abs().max(1.0) {
                return Err(KinematicsError::Discontinuity { index: i, gap: dx });
            }
            if !kinked {
                let dv = a.speed_at(t) - b.speed_at(t);
                if dv.abs() > SPLICE_TOL * a.speed_at(t).abs().max(1.0) {
                    return Err(KinematicsError::Discontinuity { index: i, gap: dv });
                }
            }
        }
        let kinked = kinked
            && segments
                .windows(2)
                .any(|w| (w[0].speed_at(w[0].end) - w[1].speed_at(w[1].start)).abs() > SPLICE_TOL);
        Ok(Self { segments, kinked })
    }

    /// Single-segment trajectory.
    pub fn from_segment(seg: QuadraticSegment) -> Self {
        Self { segments: vec![seg], kinked: false }
    }

    pub fn segments(&self) -> &[QuadraticSegment] {
        &self.segments
    }

    pub fn into_segments(self) -> Vec<QuadraticSegment> {
        self.segments
    }

    /// True when the speed jumps somewhere.
    pub fn is_kinked(&self) -> bool {
        self.kinked
    }

    pub fn start_time(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end_time(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    /// Interior breakpoints.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().skip(1).map(|s| s.start)
    }

    /// Index of the segment containing `t`; intervals are left-closed except the last.
    pub fn segment_index(&self, t: f64) -> Result<usize, KinematicsError> {
        let first = &self.segments[0];
        let last = &self.segments[self.segments.len() - 1];
        if t < first.start - tol(first.start) || t > last.end + tol(last.end) || t.is_nan() {
            return Err(KinematicsError::OutOfDomain { t, start: first.start, end: last.end });
        }
        let idx = self.segments.partition_point(|s| s.start <= t);
        Ok(idx.saturating_sub(1).min(self.segments.len() - 1))
    }

    pub fn segment_at(&self, t: f64) -> Result<&QuadraticSegment, KinematicsError> {
        Ok(&self.segments[self.segment_index(t)?])
    }

    /// `(position, speed, acceleration)` at `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64), KinematicsError> {
        let s = self.segment_at(t)?;
        Ok((s.position(t), s.speed_at(t), s.accel))
    }

    pub fn position(&self, t: f64) -> Result<f64, KinematicsError> {
        Ok(self.segment_at(t)?.position(t))
    }

    pub fn speed(&self, t: f64) -> Result<f64, KinematicsError> {
        Ok(self.segment_at(t)?.speed_at(t))
    }

    /// State point at `t`.
    pub fn state(&self, t: f64) -> Result<StatePoint, KinematicsError> {
        let (x, v, _) = self.eval(t)?;
        Ok(StatePoint::new(x, v, t))
    }

    /// Generalized inverse `inf { t : p(t) >= l }`.
    pub fn inverse(&self, l: f64) -> Result<f64, KinematicsError> {
        for seg in &self.segments {
            if let Some(t) = first_reach(seg, l) {
                return Ok(t);
            }
        }
        Err(KinematicsError::Unreached(l))
    }

    /// Shadow of the given order: shifted down by `order * s` and right by `order * tau`.
    pub fn shadow(&self, order: u32, s: f64, tau: f64) -> Self {
        let mut out = self.clone();
        for _ in 0..order {
            for seg in &mut out.segments {
                *seg = seg.shifted(-s, tau);
            }
        }
        out
    }

    /// Translates the whole trajectory by `dl` meters and `dt` seconds.
    pub fn shifted(&self, dl: f64, dt: f64) -> Self {
        Self {
            segments: self.segments.iter().map(|s| s.shifted(dl, dt)).collect(),
            kinked: self.kinked,
        }
    }

    /// Section over `[start_time, t]`.
    pub fn head(&self, t: f64) -> Vec<QuadraticSegment> {
        let mut out = Vec::new();
        for seg in &self.segments {
            if seg.start >= t {
                break;
            }
            if seg.end <= t {
                out.push(*seg);
            } else {
                out.push(QuadraticSegment { end: t, ..*seg });
                break;
            }
        }
        out
    }

    /// Section over `[t, end_time]`, with the first piece re-anchored at `t`.
    pub fn tail(&self, t: f64) -> Vec<QuadraticSegment> {
        let mut out = Vec::new();
        for seg in &self.segments {
            if seg.end <= t && !(seg.end == t && seg.end == f64::INFINITY) {
                continue;
            }
            if seg.start >= t {
                out.push(*seg);
            } else {
                out.push(seg.restricted(t, seg.end));
            }
        }
        out
    }

    /// Directed distance `min_t self(t) - other(t)` over the common horizon.
    pub fn distance_to(&self, other: &Trajectory) -> f64 {
        trajectory_distance(self, other, None)
    }

    /// Every segment speed-feasible and acceleration-feasible.
    pub fn is_feasible(&self, vmax: f64, amin: f64, amax: f64) -> bool {
        self.segments.iter().all(|s| s.is_feasible(vmax, amin, amax))
    }
}

fn first_reach(seg: &QuadraticSegment, l: f64) -> Option<f64> {
    let start_val = if seg.start.is_finite() {
        seg.position(seg.start)
    } else if seg.accel == 0.0 && seg.speed == 0.0 {
        seg.location
    } else if seg.accel > 0.0 || (seg.accel == 0.0 && seg.speed < 0.0) {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    if start_val >= l {
        return Some(seg.start);
    }
    let roots = quadratic_roots(0.5 * seg.accel, seg.speed, seg.location - l);
    let t0 = seg.start - seg.anchor;
    let t1 = seg.end - seg.anchor;
    roots
        .into_iter()
        .flatten()
        .filter(|&r| r >= t0 && r <= t1)
        .map(|r| r + seg.anchor)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
}

/// Real roots of `a x² + b x + c = 0`, computed in the cancellation-free form.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> [Option<f64>; 2] {
    if a == 0.0 {
        if b == 0.0 {
            return [None, None];
        }
        return [Some(-c / b), None];
    }
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc >= -EPS * (b * b).max((4.0 * a * c).abs()) {
            disc = 0.0;
        } else {
            return [None, None];
        }
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
    if q == 0.0 {
        return [Some(0.0), Some(0.0)];
    }
    let (r1, r2) = (q / a, c / q);
    if r1 <= r2 {
        [Some(r1), Some(r2)]
    } else {
        [Some(r2), Some(r1)]
    }
}

/// Directed distance between two trajectories, optionally restricted to a window.
pub fn trajectory_distance(p: &Trajectory, q: &Trajectory, window: Option<(f64, f64)>) -> f64 {
    distance_argmin(p, q, window).0
}

/// Directed distance together with a time at which it is attained.
pub fn distance_argmin(p: &Trajectory, q: &Trajectory, window: Option<(f64, f64)>) -> (f64, f64) {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (a, b) = (p.segments(), q.segments());
    let (mut i, mut j) = (0, 0);
    let mut best = (f64::INFINITY, f64::NAN);
    while i < a.len() && j < b.len() {
        let cand = segment_argmin(&a[i], &b[j], lo, hi);
        if cand.0 < best.0 {
            best = cand;
        }
        if a[i].end < b[j].end {
            i += 1;
        } else if b[j].end < a[i].end {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    best
}

/// Pointwise minimum of a non-empty set of trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiTrajectory {
    members: Vec<Trajectory>,
}

impl QuasiTrajectory {
    pub fn new(members: Vec<Trajectory>) -> Result<Self, KinematicsError> {
        if members.is_empty() {
            return Err(KinematicsError::Empty);
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Trajectory] {
        &self.members
    }

    /// Minimum over the members that cover `t`.
    pub fn position(&self, t: f64) -> Result<f64, KinematicsError> {
        let vals: Vec<f64> = self.members.iter().filter_map(|m| m.position(t).ok()).collect();
        if vals.is_empty() {
            return Err(KinematicsError::OutOfDomain {
                t,
                start: self.members[0].start_time(),
                end: self.members[0].end_time(),
            });
        }
        Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Explicit (possibly kinked) trajectory over the members' common horizon.
    pub fn to_trajectory(&self) -> Result<Trajectory, KinematicsError> {
        let mut acc = self.members[0].clone();
        for m in &self.members[1..] {
            acc = pointwise_min(&acc, m, false)?;
        }
        Ok(acc)
    }

    /// `D(self - other)`.
    pub fn distance_to(&self, other: &Trajectory) -> f64 {
        self.members.iter().map(|m| m.distance_to(other)).fold(f64::INFINITY, f64::min)
    }

    /// `D(other - self)`.
    pub fn distance_from(&self, other: &Trajectory) -> Result<f64, KinematicsError> {
        Ok(other.distance_to(&self.to_trajectory()?))
    }
}

/// Pointwise minimum of `p` and `q` over their common horizon. Where the two
/// coincide `q` is used when `prefer_q` is set.
pub fn pointwise_min(p: &Trajectory, q: &Trajectory, prefer_q: bool) -> Result<Trajectory, KinematicsError> {
    let lo = p.start_time().max(q.start_time());
    let hi = p.end_time().min(q.end_time());
    if lo > hi {
        return Err(KinematicsError::Empty);
    }
    let mut cuts: Vec<f64> = vec![lo, hi];
    cuts.extend(p.breakpoints().filter(|&t| t > lo && t < hi));
    cuts.extend(q.breakpoints().filter(|&t| t > lo && t < hi));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut pieces: Vec<QuadraticSegment> = Vec::new();
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let probe = finite_probe(u, v);
        let sp = *p.segment_at(probe)?;
        let sq = *q.segment_at(probe)?;
        let mut sub = vec![u];
        let anchor = if sp.anchor.is_finite() { sp.anchor } else { 0.0 };
        let (dp, dq) = (sp.rebased(anchor), sq.rebased(anchor));
        let roots = quadratic_roots(0.5 * (dp.accel - dq.accel), dp.speed - dq.speed, dp.location - dq.location);
        let mut inner: Vec<f64> = roots.into_iter().flatten().map(|r| r + anchor).filter(|&r| r > u && r < v).collect();
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sub.extend(inner);
        sub.push(v);
        for sw in sub.windows(2) {
            let (a, b) = (sw[0], sw[1]);
            if b <= a {
                continue;
            }
            let m = finite_probe(a, b);
            let diff = sp.position(m) - sq.position(m);
            let pick_q = if diff.abs() <= tol(sp.position(m)) { prefer_q } else { diff > 0.0 };
            let src = if pick_q { sq } else { sp };
            let piece = QuadraticSegment { start: a, end: b, ..src }.normalized();
            push_merged(&mut pieces, piece);
        }
    }
    Trajectory::new_kinked(pieces)
}

fn finite_probe(u: f64, v: f64) -> f64 {
    match (u.is_finite(), v.is_finite()) {
        (true, true) => 0.5 * (u + v),
        (true, false) => u + 1.0,
        (false, true) => v - 1.0,
        (false, false) => 0.0,
    }
}

/// Appends `piece`, fusing it with the previous one when both describe the
/// same quadratic.
fn push_merged(pieces: &mut Vec<QuadraticSegment>, piece: QuadraticSegment) {
    if let Some(last) = pieces.last_mut() {
        if last.accel == piece.accel && last.end == piece.start {
            let t = piece.start;
            let same_pos = (last.position(t) - piece.position(t)).abs() <= tol(piece.position(t));
            let same_speed = (last.speed_at(t) - piece.speed_at(t)).abs() <= EPS;
            if same_pos && same_speed {
                last.end = piece.end;
                return;
            }
        }
    }
    pieces.push(piece);
}

/// Sequential segment builder that keeps intervals contiguous.
#[derive(Debug, Default)]
pub(crate) struct Splice {
    segs: Vec<QuadraticSegment>,
}

impl Splice {
    pub fn new() -> Self {
        Self { segs: Vec::new() }
    }

    /// Appends `seg` restricted to start where the previous piece ended.
    /// Pieces of zero or negative length are dropped.
    pub fn push(&mut self, seg: QuadraticSegment) {
        let start = self.segs.last().map_or(seg.start, |l| l.end);
        if seg.end <= start {
            return;
        }
        let piece = if start != seg.start { seg.restricted(start, seg.end) } else { seg };
        self.segs.push(piece);
    }

    pub fn extend<I: IntoIterator<Item = QuadraticSegment>>(&mut self, it: I) {
        for s in it {
            self.push(s);
        }
    }

    pub fn finish(self) -> Result<Trajectory, KinematicsError> {
        Trajectory::new(self.segs)
    }

    pub fn finish_kinked(self) -> Result<Trajectory, KinematicsError> {
        Trajectory::new_kinked(self.segs)
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }
}

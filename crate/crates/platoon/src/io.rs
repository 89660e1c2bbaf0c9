//! CSV, TOML and SVG input/output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::kinematics::Trajectory;
use crate::lab::{GammaSweep, GridCell, MeasurementCell, ScenarioConfig};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

pub fn read_config(path: &Path) -> Result<ScenarioConfig, IoError> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, IoError> {
    Ok(toml::from_str(text)?)
}

/// Sampling of trajectories for export; each trajectory is sampled from its
/// start until `t_end`, its own end or the first time it passes `x_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub step: f64,
    pub t_end: f64,
    pub x_max: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { step: 0.1, t_end: f64::INFINITY, x_max: f64::INFINITY }
    }
}

#[derive(Serialize)]
struct SampleRow {
    vehicle_id: usize,
    t: f64,
    x: f64,
    v: f64,
    a: f64,
}

fn samples(p: &Trajectory, s: &Sampling) -> Vec<(f64, f64, f64, f64)> {
    let t0 = p.start_time();
    let t1 = p.end_time().min(s.t_end);
    if !t0.is_finite() || !(t1 >= t0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = (t0 + k as f64 * s.step).min(t1);
        let Ok((x, v, a)) = p.eval(t) else { break };
        out.push((t, x, v, a));
        if t >= t1 || x > s.x_max || !t1.is_finite() && k > 1_000_000 {
            break;
        }
        k += 1;
    }
    out
}

/// `vehicle_id,t,x,v,a` rows.
pub fn write_trajectories_csv<W: Write>(w: W, trajectories: &[Trajectory], sampling: &Sampling) -> Result<(), IoError> {
    let mut wr = csv::Writer::from_writer(w);
    for (vehicle_id, p) in trajectories.iter().enumerate() {
        for (t, x, v, a) in samples(p, sampling) {
            wr.serialize(SampleRow { vehicle_id, t, x, v, a })?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SegmentRow {
    vehicle_id: usize,
    index: usize,
    location: f64,
    speed: f64,
    accel: f64,
    anchor: f64,
    start: f64,
    end: f64,
}

/// Exact piecewise-quadratic form, one row per segment.
pub fn write_segments_csv<W: Write>(w: W, trajectories: &[Trajectory]) -> Result<(), IoError> {
    let mut wr = csv::Writer::from_writer(w);
    for (vehicle_id, p) in trajectories.iter().enumerate() {
        for (index, s) in p.segments().iter().enumerate() {
            wr.serialize(SegmentRow {
                vehicle_id,
                index,
                location: s.location,
                speed: s.speed,
                accel: s.accel,
                anchor: s.anchor,
                start: s.start,
                end: s.end,
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<(), IoError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// `t,x,K,O` rows.
pub fn write_measurements_csv<W: Write>(w: W, cells: &[MeasurementCell]) -> Result<(), IoError> {
    write_rows(w, cells)
}

/// `alpha,beta,fs,L,N,rate` rows.
pub fn write_grid_csv<W: Write>(w: W, cells: &[GridCell]) -> Result<(), IoError> {
    write_rows(w, cells)
}

#[derive(Serialize)]
struct GapRow {
    gamma: f64,
    vehicle: usize,
    kwt_minus_smooth: f64,
    smooth_minus_kwt: f64,
    bound: f64,
    max_deviation: f64,
}

/// One row per vehicle and scaling.
pub fn write_gap_csv<W: Write>(w: W, sweeps: &[GammaSweep]) -> Result<(), IoError> {
    let rows: Vec<GapRow> = sweeps
        .iter()
        .flat_map(|s| {
            s.metrics.iter().map(move |m| GapRow {
                gamma: s.gamma,
                vehicle: m.vehicle,
                kwt_minus_smooth: m.kwt_minus_smooth,
                smooth_minus_kwt: m.smooth_minus_kwt,
                bound: m.bound,
                max_deviation: s.max_deviation,
            })
        })
        .collect();
    write_rows(w, &rows)
}

/// Time-space diagram with one polyline per trajectory and an optional
/// horizontal line at the stop line.
pub fn time_space_svg(trajectories: &[Trajectory], t_range: (f64, f64), x_range: (f64, f64), stop_line: Option<f64>) -> String {
    const W: f64 = 900.0;
    const H: f64 = 600.0;
    const PAD: f64 = 40.0;
    let sx = |t: f64| PAD + (t - t_range.0) / (t_range.1 - t_range.0) * (W - 2.0 * PAD);
    let sy = |x: f64| H - PAD - (x - x_range.0) / (x_range.1 - x_range.0) * (H - 2.0 * PAD);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    if let Some(l) = stop_line {
        let y = sy(l);
        let _ = writeln!(svg, r#"<line x1="{PAD}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="red" stroke-dasharray="4 4"/>"#, W - PAD);
    }
    let sampling = Sampling { step: (t_range.1 - t_range.0) / 600.0, t_end: t_range.1, x_max: x_range.1 };
    for p in trajectories {
        let pts: Vec<String> = samples(p, &sampling)
            .into_iter()
            .filter(|&(t, x, _, _)| t >= t_range.0 && x >= x_range.0)
            .map(|(t, x, _, _)| format!("{:.2},{:.2}", sx(t), sy(x.min(x_range.1))))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#, pts.join(" "));
        }
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12">t (s)</text>"#, W / 2.0, H - 10.0);
    let _ = writeln!(svg, r#"<text x="5" y="{}" font-size="12">x (m)</text>"#, H / 2.0);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::QuadraticSegment;

    fn cruise() -> Trajectory {
        Trajectory::from_segment(QuadraticSegment::with_anchor(0.0, 10.0, 0.0, 0.0, 0.0, 1.0))
    }

    #[test]
    fn trajectory_csv_header_and_rows() {
        let mut buf = Vec::new();
        write_trajectories_csv(&mut buf, &[cruise()], &Sampling { step: 0.5, ..Sampling::default() }).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "vehicle_id,t,x,v,a");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "0,1.0,10.0,10.0,0.0");
    }

    #[test]
    fn config_defaults_fill_missing_keys() {
        let cfg = parse_config("vehicles = 3\nseed = 7\n").unwrap();
        assert_eq!(cfg.vehicles, 3);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.vmax, 25.0);
        assert!(parse_config("bogus = 1").is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_trajectory() {
        let svg = time_space_svg(&[cruise(), cruise()], (0.0, 1.0), (0.0, 10.0), Some(5.0));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg"));
    }
}

//! Satellite pass geometry for two ground stations.
//!
//! A circular Keplerian orbit over a rotating spherical Earth is enough to
//! produce the range/elevation profiles the link budget consumes; there is no
//! J2, drag, or refraction. Real ephemerides can be supplied instead through
//! [`import_trajectory`].

use std::io::{BufRead, Write};

use thiserror::Error;

/// Mean Earth radius, meters (spherical model).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Earth gravitational parameter, m³/s².
pub const EARTH_GM: f64 = 3.986_004_418e14;
/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;

/// Header of the trajectory interchange file.
pub const TRAJECTORY_HEADER: &str = "t_s,range_a_m,elev_a_rad,range_b_m,elev_b_rad";

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("invalid ground station {name}: {reason}")]
    InvalidStation { name: String, reason: String },
    #[error("invalid orbit spec: {0}")]
    InvalidOrbit(String),
    #[error("satellite never rises above the horizon for station {station}")]
    NoVisibility { station: String },
    #[error("no trajectory point passes the elevation mask")]
    EmptyMask,
    #[error("trajectory parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trajectory invariant violated at line {line}: field {field}")]
    InvariantViolation { line: usize, field: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An optical ground station on the spherical Earth.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStation {
    pub name: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

impl GroundStation {
    pub fn new(
        name: impl Into<String>,
        latitude_deg: f64,
        longitude_deg: f64,
        altitude_m: f64,
    ) -> Result<Self, OrbitError> {
        let name = name.into();
        if !(-90.0..=90.0).contains(&latitude_deg) {
            return Err(OrbitError::InvalidStation {
                name,
                reason: format!("latitude {latitude_deg} outside [-90, 90]"),
            });
        }
        if !(-180.0..=180.0).contains(&longitude_deg) {
            return Err(OrbitError::InvalidStation {
                name,
                reason: format!("longitude {longitude_deg} outside [-180, 180]"),
            });
        }
        if !altitude_m.is_finite() {
            return Err(OrbitError::InvalidStation {
                name,
                reason: "altitude must be finite".into(),
            });
        }
        Ok(Self {
            name,
            latitude_deg,
            longitude_deg,
            altitude_m,
        })
    }

    /// Earth-fixed position at the reference epoch, meters.
    fn ecef(&self) -> [f64; 3] {
        let lat = self.latitude_deg.to_radians();
        let lon = self.longitude_deg.to_radians();
        let r = EARTH_RADIUS_M + self.altitude_m;
        [r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin()]
    }
}

/// Circular-orbit specification.
///
/// The inertial frame is pinned so that geographic and inertial longitudes
/// coincide at t = 0; `node_longitude_deg` is the longitude of the ascending
/// node in that frame, and the satellite crosses the node northbound at
/// t = `node_crossing_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSpec {
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub node_longitude_deg: f64,
    pub node_crossing_s: f64,
    pub window_s: f64,
    pub time_step_s: f64,
}

impl OrbitSpec {
    pub fn validate(&self) -> Result<(), OrbitError> {
        if !(self.altitude_m > 0.0) {
            return Err(OrbitError::InvalidOrbit("altitude must be > 0".into()));
        }
        if !(self.time_step_s > 0.0) {
            return Err(OrbitError::InvalidOrbit("time step must be > 0".into()));
        }
        if !(self.window_s > 0.0) {
            return Err(OrbitError::InvalidOrbit("window must be > 0".into()));
        }
        Ok(())
    }

    /// Orbital mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        let r = EARTH_RADIUS_M + self.altitude_m;
        (EARTH_GM / (r * r * r)).sqrt()
    }
}

/// Range and elevation to both stations at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t_s: f64,
    pub range_a_m: f64,
    pub elev_a_rad: f64,
    pub range_b_m: f64,
    pub elev_b_rad: f64,
}

impl TrajectoryPoint {
    fn check(&self, line: usize) -> Result<(), OrbitError> {
        use std::f64::consts::FRAC_PI_2;
        let fields: [(&'static str, f64); 5] = [
            ("t_s", self.t_s),
            ("range_a_m", self.range_a_m),
            ("elev_a_rad", self.elev_a_rad),
            ("range_b_m", self.range_b_m),
            ("elev_b_rad", self.elev_b_rad),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(OrbitError::InvariantViolation { line, field: name });
            }
        }
        if self.range_a_m <= 0.0 {
            return Err(OrbitError::InvariantViolation { line, field: "range_a_m" });
        }
        if self.range_b_m <= 0.0 {
            return Err(OrbitError::InvariantViolation { line, field: "range_b_m" });
        }
        if self.elev_a_rad <= -FRAC_PI_2 || self.elev_a_rad > FRAC_PI_2 {
            return Err(OrbitError::InvariantViolation { line, field: "elev_a_rad" });
        }
        if self.elev_b_rad <= -FRAC_PI_2 || self.elev_b_rad > FRAC_PI_2 {
            return Err(OrbitError::InvariantViolation { line, field: "elev_b_rad" });
        }
        Ok(())
    }
}

/// Continuous-time pass geometry; the propagator samples this on a grid.
pub fn pass_geometry(
    orbit: &OrbitSpec,
    a: &GroundStation,
    b: &GroundStation,
    t: f64,
) -> TrajectoryPoint {
    let r_sat = EARTH_RADIUS_M + orbit.altitude_m;
    let inc = orbit.inclination_deg.to_radians();
    let node = orbit.node_longitude_deg.to_radians();
    let u = orbit.mean_motion() * (t - orbit.node_crossing_s);
    // In-plane basis: n1 toward the ascending node, n2 90° ahead along track.
    let n1 = [node.cos(), node.sin(), 0.0];
    let n2 = [-node.sin() * inc.cos(), node.cos() * inc.cos(), inc.sin()];
    let sat = [
        r_sat * (u.cos() * n1[0] + u.sin() * n2[0]),
        r_sat * (u.cos() * n1[1] + u.sin() * n2[1]),
        r_sat * (u.cos() * n1[2] + u.sin() * n2[2]),
    ];

    let theta = EARTH_ROTATION_RAD_S * t;
    let (range_a, elev_a) = range_elevation(&sat, a, theta);
    let (range_b, elev_b) = range_elevation(&sat, b, theta);
    TrajectoryPoint {
        t_s: t,
        range_a_m: range_a,
        elev_a_rad: elev_a,
        range_b_m: range_b,
        elev_b_rad: elev_b,
    }
}

fn range_elevation(sat: &[f64; 3], station: &GroundStation, theta: f64) -> (f64, f64) {
    // Rotate the Earth-fixed station into the inertial frame.
    let e = station.ecef();
    let (s, c) = theta.sin_cos();
    let p = [e[0] * c - e[1] * s, e[0] * s + e[1] * c, e[2]];
    let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let up = [p[0] / norm, p[1] / norm, p[2] / norm];
    let d = [sat[0] - p[0], sat[1] - p[1], sat[2] - p[2]];
    let range = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let sin_elev = (d[0] * up[0] + d[1] * up[1] + d[2] * up[2]) / range;
    (range, sin_elev.clamp(-1.0, 1.0).asin())
}

/// Samples the pass on the orbit's time grid.
///
/// Errors with [`OrbitError::NoVisibility`] if the satellite never rises
/// above the horizon of one of the stations within the window.
pub fn propagate_pass(
    orbit: &OrbitSpec,
    a: &GroundStation,
    b: &GroundStation,
) -> Result<Vec<TrajectoryPoint>, OrbitError> {
    orbit.validate()?;
    let n = (orbit.window_s / orbit.time_step_s).floor() as usize + 1;
    let points: Vec<TrajectoryPoint> = (0..n)
        .map(|i| pass_geometry(orbit, a, b, i as f64 * orbit.time_step_s))
        .collect();
    if !points.iter().any(|p| p.elev_a_rad > 0.0) {
        return Err(OrbitError::NoVisibility { station: a.name.clone() });
    }
    if !points.iter().any(|p| p.elev_b_rad > 0.0) {
        return Err(OrbitError::NoVisibility { station: b.name.clone() });
    }
    Ok(points)
}

/// Keeps the points where BOTH stations see the satellite at or above
/// `min_elevation_rad`. The kept duration defines the visibility time used
/// by the finite-size key analysis.
pub fn mask_by_elevation(
    points: &[TrajectoryPoint],
    min_elevation_rad: f64,
) -> Result<Vec<TrajectoryPoint>, OrbitError> {
    let kept: Vec<TrajectoryPoint> = points
        .iter()
        .filter(|p| p.elev_a_rad >= min_elevation_rad && p.elev_b_rad >= min_elevation_rad)
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(OrbitError::EmptyMask);
    }
    Ok(kept)
}

/// Writes points as `t_s,range_a_m,elev_a_rad,range_b_m,elev_b_rad` CSV.
///
/// Floats are printed in shortest round-trip form, so an export/import cycle
/// reproduces the values exactly.
pub fn export_trajectory<W: Write>(points: &[TrajectoryPoint], mut w: W) -> Result<(), OrbitError> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{}",
            p.t_s, p.range_a_m, p.elev_a_rad, p.range_b_m, p.elev_b_rad
        )?;
    }
    Ok(())
}

/// Parses a trajectory CSV stream, validating every point.
pub fn import_trajectory<R: BufRead>(r: R) -> Result<Vec<TrajectoryPoint>, OrbitError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or(OrbitError::Parse { line: 1, reason: "empty stream".into() })??;
    if header.trim() != TRAJECTORY_HEADER {
        return Err(OrbitError::Parse {
            line: 1,
            reason: format!("expected header `{TRAJECTORY_HEADER}`, got `{}`", header.trim()),
        });
    }
    let mut points = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(OrbitError::Parse {
                line: line_no,
                reason: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let mut vals = [0.0_f64; 5];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f.trim().parse::<f64>().map_err(|e| OrbitError::Parse {
                line: line_no,
                reason: format!("field {}: {e}", i + 1),
            })?;
        }
        let p = TrajectoryPoint {
            t_s: vals[0],
            range_a_m: vals[1],
            elev_a_rad: vals[2],
            range_b_m: vals[3],
            elev_b_rad: vals[4],
        };
        p.check(line_no)?;
        if p.t_s <= prev_t {
            return Err(OrbitError::InvariantViolation { line: line_no, field: "t_s" });
        }
        prev_t = p.t_s;
        points.push(p);
    }
    Ok(points)
}

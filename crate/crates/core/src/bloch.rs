//! Bloch-sphere trajectories, solid angles and geometric phases.
//!
//! The Bargmann product over Hilbert-space states is the reference for
//! signs; the purely geometric routines are tuned to agree with it.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{wrap_phase, PolarParams};
use crate::quantum::{self, StateVector};
use crate::zeno::{ClosedLoopSchedule, EvolutionSegment};

pub type Vec3 = [f64; 3];

/// A path counts as closed when its endpoints are this close.
pub const CLOSURE_DISTANCE: f64 = 1e-6;
/// Circles closer than this to tangency are rejected.
pub const TANGENCY_TOL: f64 = 1e-9;

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(add(a, scale(b, -1.0)))
}

/// `⟨σ⟩/‖ψ‖²` for a two-level state.
pub fn bloch_vector(psi: &StateVector) -> Result<Vec3> {
    if psi.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: psi.dim(),
        });
    }
    let n = psi.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::domain("the zero state has no Bloch vector"));
    }
    let v = psi.amps();
    let expect = |m: nalgebra::DMatrix<C64>| (v.adjoint() * m * v)[(0, 0)].re / n;
    Ok([
        expect(quantum::sigma_x()),
        expect(quantum::sigma_y()),
        expect(quantum::sigma_z()),
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochSample {
    pub t_s: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl BlochSample {
    pub fn r(&self) -> Vec3 {
        [self.rx, self.ry, self.rz]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlochPath {
    pub samples: Vec<BlochSample>,
    pub closed: bool,
    pub closure_residual: f64,
}

impl BlochPath {
    pub fn from_samples(samples: Vec<BlochSample>) -> Result<Self> {
        let (first, last) = match (samples.first(), samples.last()) {
            (Some(f), Some(l)) => (f.r(), l.r()),
            _ => return Err(Error::domain("a path needs at least one sample")),
        };
        if let Some(bad) = samples.iter().find(|s| norm(s.r()) > 1.0 + 1e-9) {
            return Err(Error::domain(format!("Bloch vector outside the sphere: {:?}", bad.r())));
        }
        let closure_residual = distance(first, last);
        Ok(Self {
            samples,
            closed: closure_residual < CLOSURE_DISTANCE,
            closure_residual,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.samples {
            w.serialize(s).map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Bloch trajectory of `|↓⟩` through the segments, sampled uniformly in time
/// with `steps_per_segment` intervals per segment.
pub fn sample_trajectory(segments: &[EvolutionSegment], steps_per_segment: usize) -> Result<BlochPath> {
    if steps_per_segment < 2 {
        return Err(Error::domain("need at least two steps per segment"));
    }
    let mut psi = StateVector::down();
    let mut t0 = 0.0;
    let mut samples = vec![sample(0.0, &psi)?];
    for seg in segments {
        if seg.generator.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: seg.generator.dim(),
            });
        }
        let start = psi.clone();
        for k in 1..=steps_per_segment {
            let t = seg.duration * k as f64 / steps_per_segment as f64;
            let state = quantum::apply(&seg.generator.propagator(t), &start)?;
            samples.push(sample(t0 + t, &state)?);
            if k == steps_per_segment {
                psi = state;
            }
        }
        t0 += seg.duration;
    }
    BlochPath::from_samples(samples)
}

fn sample(t_s: f64, psi: &StateVector) -> Result<BlochSample> {
    let [rx, ry, rz] = bloch_vector(psi)?;
    Ok(BlochSample { t_s, rx, ry, rz })
}

/// Consecutive states this close to orthogonal make the product meaningless.
const ORTHOGONAL_TOL: f64 = 1e-12;

/// `β = −arg Π ⟨ψ_k|ψ_{k+1}⟩` around a closed list of states. The last state
/// must represent the same ray as the first; it is replaced by the first so
/// the product is gauge invariant.
pub fn bargmann_geometric_phase(states: &[StateVector]) -> Result<f64> {
    if states.len() < 3 {
        return Err(Error::domain("need at least three states"));
    }
    let first = &states[0];
    let last = &states[states.len() - 1];
    let ov = quantum::overlap(first, last)?;
    let ray_distance = 1.0 - ov.norm_sqr() / (first.norm_sqr() * last.norm_sqr());
    if !(ray_distance < CLOSURE_DISTANCE) {
        return Err(Error::domain(format!(
            "state list is not closed (ray distance {ray_distance:e})"
        )));
    }
    let ring = &states[..states.len() - 1];
    let m = ring.len();
    let mut acc = C64::new(1.0, 0.0);
    for k in 0..m {
        let next = (k + 1) % m;
        let z = quantum::overlap(&ring[k], &ring[next])?;
        let size = z.norm();
        if size <= ORTHOGONAL_TOL * (ring[k].norm_sqr() * ring[next].norm_sqr()).sqrt() {
            return Err(Error::IllConditioned { index: k, next });
        }
        acc *= z / size;
        acc /= acc.norm();
    }
    Ok(wrap_phase(-acc.arg()))
}

/// States `U(kT/N)|↓⟩` for `k = 0..=N` along one precession period.
pub fn circle_states(p: &PolarParams, n: usize) -> Result<Vec<StateVector>> {
    let down = StateVector::down();
    (0..=n)
        .map(|k| quantum::apply(&p.propagator(p.period() * k as f64 / n as f64), &down))
        .collect()
}

/// `2π(1 − cos θ)`.
pub fn cone_solid_angle(theta: f64) -> f64 {
    2.0 * PI * (1.0 - theta.cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapRegion {
    /// The lens `cap1 ∩ cap2`.
    Smaller,
    /// Its complement on the sphere.
    Larger,
}

/// Which side of the traversed boundary the lens lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Left,
    Right,
}

/// Two circles on the sphere, each the rim of the cap
/// `{r : r·axis ≥ cos(cone_angle)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapLoopSpec {
    pub axis1: Vec3,
    pub axis2: Vec3,
    pub cone_angle1: f64,
    pub cone_angle2: f64,
    pub region: CapRegion,
}

impl CapLoopSpec {
    pub fn new(axis1: Vec3, axis2: Vec3, cone_angle1: f64, cone_angle2: f64, region: CapRegion) -> Result<Self> {
        for (a, name) in [(axis1, "axis1"), (axis2, "axis2")] {
            if (norm(a) - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("{name} is not a unit vector")));
            }
        }
        for alpha in [cone_angle1, cone_angle2] {
            if !(alpha > 0.0 && alpha < PI) {
                return Err(Error::domain(format!("cone angle {alpha} outside (0, π)")));
            }
        }
        let spec = Self {
            axis1,
            axis2,
            cone_angle1,
            cone_angle2,
            region,
        };
        if !spec.is_degenerate() {
            spec.vertices()?;
        }
        Ok(spec)
    }

    fn is_degenerate(&self) -> bool {
        distance(self.axis1, self.axis2) < 1e-12 && (self.cone_angle1 - self.cone_angle2).abs() < 1e-12
    }

    /// Caps of the loop traced by `h1 → h2 → h1` from `|↓⟩`, chosen so their
    /// intersection is bounded by the traversed arcs.
    pub fn from_schedule(
        h1: &PolarParams,
        h2: &PolarParams,
        schedule: &ClosedLoopSchedule,
    ) -> Result<(Self, Orientation)> {
        let down = StateVector::down();
        let r0 = bloch_vector(&down)?;
        let psi_a = quantum::apply(&h1.propagator(schedule.t1), &down)?;
        let a = bloch_vector(&psi_a)?;
        let mid2 = bloch_vector(&quantum::apply(&h2.propagator(schedule.t2 / 2.0), &psi_a)?)?;
        let (n1, n2) = (h1.axis(), h2.axis());
        let oriented = |axis: Vec3, on_circle: Vec3, inside: Vec3| {
            let c = dot(axis, on_circle).clamp(-1.0, 1.0);
            if dot(axis, inside) >= c {
                (axis, c.acos())
            } else {
                (scale(axis, -1.0), (-c).acos())
            }
        };
        let (axis1, angle1) = oriented(n1, r0, mid2);
        let (axis2, angle2) = oriented(n2, a, r0);
        let spec = Self::new(axis1, axis2, angle1, angle2, CapRegion::Smaller)?;
        let orientation = if dot(axis1, n1) > 0.0 {
            Orientation::Left
        } else {
            Orientation::Right
        };
        Ok((spec, orientation))
    }

    /// Intersection points of the two rims.
    pub fn vertices(&self) -> Result<(Vec3, Vec3)> {
        let (a1, a2) = (self.axis1, self.axis2);
        let (c1, c2) = (self.cone_angle1.cos(), self.cone_angle2.cos());
        let g = dot(a1, a2);
        let k = cross(a1, a2);
        let kk = dot(k, k);
        if kk < TANGENCY_TOL {
            return Err(Error::domain("circles are concentric or antipodal and do not cross"));
        }
        let x = (c1 - c2 * g) / (1.0 - g * g);
        let y = (c2 - c1 * g) / (1.0 - g * g);
        let inplane = x * x + y * y + 2.0 * x * y * g;
        let disc = (1.0 - inplane) / kk;
        if disc <= TANGENCY_TOL {
            return Err(Error::domain(if disc < -TANGENCY_TOL {
                "circles do not intersect"
            } else {
                "circles are tangent"
            }));
        }
        let z = disc.sqrt();
        let base = add(scale(a1, x), scale(a2, y));
        Ok((add(base, scale(k, z)), add(base, scale(k, -z))))
    }
}

/// Azimuth of `r` about `axis`, counter-clockwise seen from outside.
fn azimuth_span(axis: Vec3, from: Vec3, to: Vec3) -> f64 {
    let c = dot(axis, from);
    let u = add(from, scale(axis, -c));
    let w = cross(axis, u);
    let v = add(to, scale(axis, -dot(axis, to)));
    dot(v, w).atan2(dot(v, u)).rem_euclid(2.0 * PI)
}

fn rotate_about(axis: Vec3, r: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    add(
        add(scale(r, c), scale(cross(axis, r), s)),
        scale(axis, dot(axis, r) * (1.0 - c)),
    )
}

/// Exterior angle at `v` when turning from the rim about `a_in` onto the rim
/// about `a_out`, both traversed counter-clockwise.
fn turning_angle(v: Vec3, a_in: Vec3, a_out: Vec3) -> f64 {
    let t_in = cross(a_in, v);
    let t_out = cross(a_out, v);
    dot(v, cross(t_in, t_out)).atan2(dot(t_in, t_out))
}

/// Solid angle of the selected region via Gauss–Bonnet.
pub fn cap_loop_solid_angle(spec: &CapLoopSpec) -> Result<f64> {
    if spec.is_degenerate() {
        return Ok(cone_solid_angle(spec.cone_angle1));
    }
    let (p, q) = spec.vertices()?;
    let (a1, a2) = (spec.axis1, spec.axis2);
    let (c1, c2) = (spec.cone_angle1.cos(), spec.cone_angle2.cos());
    // Counter-clockwise arc of rim 1 lying inside cap 2.
    let (start, end) = {
        let span = azimuth_span(a1, p, q);
        let mid = rotate_about(a1, p, span / 2.0);
        if dot(mid, a2) >= c2 {
            (p, q)
        } else {
            (q, p)
        }
    };
    let span1 = azimuth_span(a1, start, end);
    let span2 = azimuth_span(a2, end, start);
    let mid2 = rotate_about(a2, end, span2 / 2.0);
    if dot(mid2, a1) < c1 - 1e-9 {
        return Err(Error::domain("rim arcs do not bound a common lens"));
    }
    let lens = 2.0 * PI - c1 * span1 - c2 * span2 - turning_angle(end, a1, a2) - turning_angle(start, a2, a1);
    Ok(match spec.region {
        CapRegion::Smaller => lens,
        CapRegion::Larger => 4.0 * PI - lens,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LoopGeometry {
    /// `loops` full precessions of `|↓⟩` about an axis at polar angle `theta`.
    Circle { theta: f64, loops: u32 },
    /// One traversal of a cap-intersection boundary.
    Cap {
        spec: CapLoopSpec,
        orientation: Orientation,
    },
}

/// Geometric phase `±Ω/2`, negative when the enclosed region lies to the
/// left of the traversal, wrapped into `(−π, π]`.
pub fn loop_phase_prediction(geometry: &LoopGeometry) -> Result<f64> {
    match *geometry {
        LoopGeometry::Circle { theta, loops } => {
            if !(0.0..=PI).contains(&theta) {
                return Err(Error::domain(format!("θ = {theta} outside [0, π]")));
            }
            Ok(wrap_phase(loops as f64 * cone_solid_angle(theta) / 2.0))
        }
        LoopGeometry::Cap { spec, orientation } => {
            let omega = cap_loop_solid_angle(&spec)?;
            Ok(wrap_phase(match orientation {
                Orientation::Left => -omega / 2.0,
                Orientation::Right => omega / 2.0,
            }))
        }
    }
}

/// Bargmann phase of the simulated `h1 → h2 → h1` loop, sampled with `steps`
/// states per segment.
pub fn schedule_bargmann_phase(
    h1: &PolarParams,
    h2: &PolarParams,
    schedule: &ClosedLoopSchedule,
    steps: usize,
) -> Result<f64> {
    let mut states = vec![StateVector::down()];
    for seg in schedule.segments(h1, h2)? {
        let start = states.last().cloned().expect("non-empty");
        for k in 1..=steps {
            let t = seg.duration * k as f64 / steps as f64;
            states.push(quantum::apply(&seg.generator.propagator(t), &start)?);
        }
    }
    bargmann_geometric_phase(&states)
}

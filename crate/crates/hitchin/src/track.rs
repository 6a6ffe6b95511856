//! Sheet tracking: analytic continuation of `(y, lambda)` along paths in
//! the x-plane by nearest-neighbor fiber matching.
//!
//! Each hop solves the fiber equations at the new x and matches roots to
//! the previous values. A match is refused (and the hop subdivided) when
//! the gap to the nearest competing root is under twice the step
//! displacement, so a continuation is either unambiguous or an explicit
//! [`Error::TrackingLoss`] - never silently wrong.

use num_complex::Complex64;

use crate::spectral::{HamiltonianVector, SpectralModel};
use crate::{Error, Result};

/// Snapshot of a tracked fiber state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub x: Complex64,
    pub y: Complex64,
    pub lambda: Complex64,
}

/// Root choice at the seeding position of a path.
#[derive(Debug, Clone, Copy)]
pub enum TrackSeed {
    /// Both values are known exactly (e.g. a divisor point).
    Exact { y: Complex64, lambda: Complex64 },
    /// Choose the fiber roots nearest to these references.
    Near { y: Complex64, lambda: Complex64 },
}

/// Continuation engine over a fixed model and Hamiltonian vector.
#[derive(Clone)]
pub struct Tracker<'m> {
    model: &'m SpectralModel,
    h: &'m HamiltonianVector,
    state: TrackState,
    /// Full lambda-fiber at the current position, for the reciprocity check.
    fiber: Vec<Complex64>,
}

impl<'m> Tracker<'m> {
    /// Seed at `x`. The y-sheet and lambda-root nearest the references are
    /// chosen; `Exact` additionally demands that the references actually
    /// lie on the fiber (the snapped values must be within 1e-6 relative).
    pub fn seed(
        model: &'m SpectralModel,
        h: &'m HamiltonianVector,
        x: Complex64,
        seed: TrackSeed,
    ) -> Result<Tracker<'m>> {
        let (y_ref, l_ref, strict) = match seed {
            TrackSeed::Exact { y, lambda } => (y, lambda, true),
            TrackSeed::Near { y, lambda } => (y, lambda, false),
        };
        let y0 = model.base().lift(x, 0).y;
        let y_pick = if (y0 - y_ref).norm() <= (-y0 - y_ref).norm() {
            y0
        } else {
            -y0
        };
        let fiber = model.fiber_roots(h, x, y_pick)?;
        let l_pick = fiber
            .iter()
            .copied()
            .min_by(|a, b| (a - l_ref).norm().total_cmp(&(b - l_ref).norm()))
            .expect("fiber is nonempty");
        if strict {
            let y_scale = 1.0 + y_ref.norm();
            let l_scale = 1.0 + l_ref.norm();
            if (y_pick - y_ref).norm() > 1e-6 * y_scale || (l_pick - l_ref).norm() > 1e-6 * l_scale
            {
                return Err(Error::TrackingLoss {
                    x,
                    detail: "exact seed does not lie on the curve".into(),
                });
            }
        }
        let state = TrackState {
            x,
            y: y_pick,
            lambda: l_pick,
        };
        Ok(Tracker { model, h, state, fiber })
    }

    pub fn state(&self) -> TrackState {
        self.state
    }

    pub fn model(&self) -> &SpectralModel {
        self.model
    }

    /// Continue to `target`, subdividing as needed.
    pub fn step_to(&mut self, target: Complex64) -> Result<()> {
        self.step_rec(target, 0)
    }

    fn step_rec(&mut self, target: Complex64, depth: usize) -> Result<()> {
        if self.try_hop(target)? {
            return Ok(());
        }
        if depth >= 48 {
            return Err(Error::TrackingLoss {
                x: self.state.x,
                detail: "subdivision limit reached (path too close to a branch point)".into(),
            });
        }
        let mid = (self.state.x + target) / 2.0;
        self.step_rec(mid, depth + 1)?;
        self.step_rec(target, depth + 1)
    }

    /// One direct hop. `Ok(false)` means the margin rule refused the match.
    fn try_hop(&mut self, nx: Complex64) -> Result<bool> {
        let prev = self.state;
        if (nx - prev.x).norm() == 0.0 {
            return Ok(true);
        }
        // y-fiber: the two square roots of P(nx).
        let y0 = self.model.base().lift(nx, 0).y;
        let (ny, y_other) = if (y0 - prev.y).norm() <= (-y0 - prev.y).norm() {
            (y0, -y0)
        } else {
            (-y0, y0)
        };
        let y_disp = (ny - prev.y).norm();
        let y_gap = (y_other - ny).norm();
        if y_disp > 0.0 && y_gap < 2.0 * y_disp {
            return Ok(false);
        }
        // lambda-fiber.
        let roots = self.model.fiber_roots(self.h, nx, ny)?;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, r) in roots.iter().enumerate() {
            let d = (r - prev.lambda).norm();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let gap = roots
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, r)| (r - roots[best]).norm())
            .fold(f64::INFINITY, f64::min);
        if best_d > 0.0 && gap < 2.0 * best_d {
            return Ok(false);
        }
        // Reciprocity: the reverse hop from the chosen root must match the
        // previous root with the same margin, otherwise the hop may have
        // jumped across a collision region with locally clean margins.
        if best_d > 0.0 {
            let chosen = roots[best];
            let mut back_best = Complex64::default();
            let mut back_d = f64::INFINITY;
            let mut back_gap = f64::INFINITY;
            for &r in &self.fiber {
                let d = (r - chosen).norm();
                if d < back_d {
                    back_gap = back_d;
                    back_d = d;
                    back_best = r;
                } else if d < back_gap {
                    back_gap = d;
                }
            }
            if (back_best - prev.lambda).norm() > 1e-12 * (1.0 + prev.lambda.norm())
                || back_gap < 2.0 * back_d
            {
                return Ok(false);
            }
        }
        self.state = TrackState {
            x: nx,
            y: ny,
            lambda: roots[best],
        };
        self.fiber = roots;
        Ok(true)
    }
}

/// Piecewise-linear path in the x-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct XPath {
    pub nodes: Vec<Complex64>,
}

impl XPath {
    pub fn line(a: Complex64, b: Complex64) -> XPath {
        XPath { nodes: vec![a, b] }
    }

    pub fn polyline(nodes: Vec<Complex64>) -> XPath {
        assert!(nodes.len() >= 2, "a path needs at least two nodes");
        XPath { nodes }
    }

    /// Closed polygon approximating a circle (counterclockwise).
    pub fn circle(center: Complex64, radius: f64, segments: usize) -> XPath {
        let mut nodes: Vec<Complex64> = (0..=segments)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / segments as f64;
                center + radius * Complex64::new(th.cos(), th.sin())
            })
            .collect();
        // Close exactly.
        let first = nodes[0];
        *nodes.last_mut().unwrap() = first;
        XPath { nodes }
    }

    pub fn start(&self) -> Complex64 {
        self.nodes[0]
    }

    pub fn end(&self) -> Complex64 {
        *self.nodes.last().unwrap()
    }

    pub fn reversed(&self) -> XPath {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        XPath { nodes }
    }

    pub fn is_closed(&self) -> bool {
        (self.start() - self.end()).norm() == 0.0
    }

    pub fn length(&self) -> f64 {
        self.nodes.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Concatenate with another path starting where this one ends.
    pub fn join(mut self, other: &XPath) -> XPath {
        assert!(
            (self.end() - other.start()).norm() < 1e-12,
            "paths do not join"
        );
        self.nodes.extend_from_slice(&other.nodes[1..]);
        self
    }

    /// Stadium-shaped closed loop around the segment `[a, b]` at the given
    /// margin. Angles are measured in the frame of the segment direction.
    pub fn stadium(a: Complex64, b: Complex64, margin: f64, arc_segments: usize) -> XPath {
        use std::f64::consts::PI;
        let dir = (b - a) / (b - a).norm();
        let mut nodes = Vec::new();
        let push_arc = |nodes: &mut Vec<Complex64>, center: Complex64, from: f64, to: f64| {
            for k in 0..=arc_segments {
                let th = from + (to - from) * k as f64 / arc_segments as f64;
                nodes.push(center + margin * dir * Complex64::new(th.cos(), th.sin()));
            }
        };
        push_arc(&mut nodes, a, PI / 2.0, 3.0 * PI / 2.0);
        push_arc(&mut nodes, b, -PI / 2.0, PI / 2.0);
        nodes.push(nodes[0]);
        XPath { nodes }
    }
}

/// Straight path from `a` to `b`, bent away from obstacles closer than
/// `clearance` to its interior.
pub fn route(a: Complex64, b: Complex64, obstacles: &[Complex64], clearance: f64) -> XPath {
    let mut nodes = vec![a, b];
    for _ in 0..12 {
        let mut adjusted = false;
        let mut k = 0;
        while k + 1 < nodes.len() {
            let (p, q) = (nodes[k], nodes[k + 1]);
            if let Some((obstacle, u)) = worst_obstacle(p, q, obstacles, clearance) {
                let foot = p + (q - p) * u;
                let mut normal = foot - obstacle;
                if normal.norm() < 1e-12 {
                    normal = (q - p) * Complex64::new(0.0, 1.0);
                }
                let waypoint = obstacle + normal / normal.norm() * (2.0 * clearance);
                nodes.insert(k + 1, waypoint);
                adjusted = true;
                k += 2;
            } else {
                k += 1;
            }
        }
        if !adjusted {
            break;
        }
    }
    XPath { nodes }
}

/// The obstacle most violating the clearance of segment `[p, q]`, with the
/// projection parameter, ignoring obstacles at the endpoints themselves.
fn worst_obstacle(
    p: Complex64,
    q: Complex64,
    obstacles: &[Complex64],
    clearance: f64,
) -> Option<(Complex64, f64)> {
    let d = q - p;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return None;
    }
    let mut worst: Option<(Complex64, f64, f64)> = None;
    for &o in obstacles {
        if (o - p).norm() < 1e-9 || (o - q).norm() < 1e-9 {
            continue;
        }
        let u = ((o - p).re * d.re + (o - p).im * d.im) / len2;
        let u = u.clamp(0.0, 1.0);
        if u <= 0.02 || u >= 0.98 {
            continue;
        }
        let dist = (p + d * u - o).norm();
        if dist < clearance && worst.as_ref().map_or(true, |w| dist < w.2) {
            worst = Some((o, u, dist));
        }
    }
    worst.map(|(o, u, _)| (o, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::LieType;
    use crate::sampling;
    use crate::spectral::SpectralModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tracking_around_base_branch_point_flips_sheet() {
        let m = SpectralModel::new(
            LieType::parse("A1").unwrap(),
            sampling::standard_curve(2).unwrap(),
        );
        let h = sampling::random_hamiltonians(&m, &mut ChaCha8Rng::seed_from_u64(1));
        // Loop around the branch point x = 1 of y^2 = x^5 - 1.
        let center = c(1.0, 0.0);
        let loop_path = XPath::circle(center, 0.2, 48);
        let x0 = loop_path.start();
        let mut tr = Tracker::seed(
            &m,
            &h,
            x0,
            TrackSeed::Near {
                y: m.base().lift(x0, 0).y,
                lambda: c(0.0, 0.0),
            },
        )
        .unwrap();
        let start = tr.state();
        for &node in &loop_path.nodes[1..] {
            tr.step_to(node).unwrap();
        }
        let end = tr.state();
        // One base branch point inside: y flips sheets.
        assert!((end.y + start.y).norm() < 1e-9, "y must negate");
    }

    #[test]
    fn tracking_contractible_loop_closes() {
        let m = SpectralModel::new(
            LieType::parse("D2").unwrap(),
            sampling::standard_curve(2).unwrap(),
        );
        let h = sampling::random_hamiltonians(&m, &mut ChaCha8Rng::seed_from_u64(2));
        // Small loop far from every special point.
        let loop_path = XPath::circle(c(0.4, 0.45), 0.05, 32);
        let x0 = loop_path.start();
        let mut tr = Tracker::seed(
            &m,
            &h,
            x0,
            TrackSeed::Near {
                y: m.base().lift(x0, 0).y,
                lambda: c(0.8, 0.3),
            },
        )
        .unwrap();
        let start = tr.state();
        for &node in &loop_path.nodes[1..] {
            tr.step_to(node).unwrap();
        }
        let end = tr.state();
        assert!((end.y - start.y).norm() < 1e-10);
        assert!((end.lambda - start.lambda).norm() < 1e-10);
    }

    #[test]
    fn route_avoids_obstacles() {
        let a = c(-1.0, 0.0);
        let b = c(1.0, 0.0);
        let obstacles = [c(0.0, 0.0)];
        let path = route(a, b, &obstacles, 0.2);
        assert!(path.nodes.len() > 2);
        for w in path.nodes.windows(2) {
            // Sample the segment and check clearance.
            for k in 0..=10 {
                let u = k as f64 / 10.0;
                let p = w[0] + (w[1] - w[0]) * u;
                assert!((p - obstacles[0]).norm() > 0.15);
            }
        }
    }

    #[test]
    fn stadium_is_closed_and_clears_segment() {
        let a = c(0.0, 0.0);
        let b = c(1.0, 0.5);
        let path = XPath::stadium(a, b, 0.1, 12);
        assert!(path.is_closed());
        for &n in &path.nodes {
            let d = point_segment_distance(n, a, b);
            assert!(d > 0.099 && d < 0.101, "distance {d}");
        }
    }

    fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
        let d = b - a;
        let u = (((p - a).re * d.re + (p - a).im * d.im) / d.norm_sqr()).clamp(0.0, 1.0);
        (a + d * u - p).norm()
    }
}

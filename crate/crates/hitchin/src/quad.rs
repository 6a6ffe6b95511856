//! Adaptive Gauss-Legendre quadrature along sheet-tracked paths.
//!
//! Integrands are functions of the tracked triple `(x, y, lambda)` and are
//! evaluated at Gauss nodes in path order, so a single tracking sweep
//! serves a whole vector of differentials. Endpoint square-root
//! singularities (cut integrals terminating at branch points) are removed
//! by a locally quadratic reparametrization, after which the integrand is
//! analytic and the panel scheme converges at Gauss speed.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;

use crate::spectral::{HamiltonianVector, SpectralModel};
use crate::track::{TrackSeed, TrackState, Tracker, XPath};
use crate::{Error, Result};

/// Quadrature configuration.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Panel bisection depth limit.
    pub max_depth: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            order: 16,
            max_depth: 12,
        }
    }
}

impl QuadConfig {
    /// A finer, independently discretized configuration for re-integration
    /// cross-checks.
    pub fn refined(&self) -> QuadConfig {
        QuadConfig {
            rel_tol: self.rel_tol * 0.1,
            abs_tol: self.abs_tol * 0.1,
            order: self.order + 8,
            max_depth: self.max_depth + 2,
        }
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return hit.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    cache.lock().unwrap().insert(n, (nodes.clone(), weights.clone()));
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// How the endpoints of a path meet branch points.
#[derive(Debug, Clone, Copy, Default)]
pub struct EndpointSingularities {
    pub start: bool,
    pub end: bool,
}

impl EndpointSingularities {
    pub fn both() -> Self {
        EndpointSingularities {
            start: true,
            end: true,
        }
    }

    pub fn none() -> Self {
        EndpointSingularities::default()
    }
}

/// Vector integrand evaluated on the tracked fiber.
pub type VecIntegrand<'f> = dyn Fn(Complex64, Complex64, Complex64) -> Vec<Complex64> + 'f;

/// Integrator over a fixed model, Hamiltonians and configuration.
pub struct PathIntegrator<'m> {
    pub model: &'m SpectralModel,
    pub h: &'m HamiltonianVector,
    pub cfg: QuadConfig,
}

impl<'m> PathIntegrator<'m> {
    pub fn new(model: &'m SpectralModel, h: &'m HamiltonianVector, cfg: QuadConfig) -> Self {
        PathIntegrator { model, h, cfg }
    }

    /// Integrate `f dx` along the path. Returns the component values and
    /// the final tracked state (at the last quadrature node).
    pub fn integrate_vec(
        &self,
        path: &XPath,
        seed: TrackSeed,
        sing: EndpointSingularities,
        f: &VecIntegrand,
    ) -> Result<(Vec<Complex64>, TrackState)> {
        let segments = path.nodes.windows(2).filter(|w| (w[1] - w[0]).norm() > 0.0);
        let count = segments.clone().count();
        if count == 0 {
            // Zero-length path.
            let x = path.start();
            let tracker = Tracker::seed(self.model, self.h, x, seed)?;
            let st = tracker.state();
            let dim = f(st.x, st.y, st.lambda).len();
            return Ok((vec![Complex64::default(); dim], st));
        }
        let mut tracker: Option<Tracker> = None;
        let mut total: Option<Vec<Complex64>> = None;
        for (k, w) in segments.enumerate() {
            let map = SegmentMap::new(
                w[0],
                w[1],
                sing.start && k == 0,
                sing.end && k == count - 1,
            );
            let (value, tr) = self.segment(&map, &mut tracker, seed, f)?;
            match &mut total {
                None => total = Some(value),
                Some(acc) => {
                    for (a, v) in acc.iter_mut().zip(&value) {
                        *a += v;
                    }
                }
            }
            tracker = Some(tr);
        }
        let mut tr = tracker.expect("at least one segment");
        // Land on the exact path end unless it is a flagged branch point
        // (where the fiber collides and the state at the last node stands).
        if !sing.end {
            tr.step_to(path.end())?;
        }
        Ok((total.expect("at least one segment"), tr.state()))
    }

    /// Scalar convenience wrapper.
    pub fn integrate(
        &self,
        path: &XPath,
        seed: TrackSeed,
        sing: EndpointSingularities,
        f: &dyn Fn(Complex64, Complex64, Complex64) -> Complex64,
    ) -> Result<(Complex64, TrackState)> {
        let (v, st) = self.integrate_vec(path, seed, sing, &|x, y, l| vec![f(x, y, l)])?;
        Ok((v[0], st))
    }

    fn segment<'t>(
        &'t self,
        map: &SegmentMap,
        tracker: &mut Option<Tracker<'t>>,
        seed: TrackSeed,
        f: &VecIntegrand,
    ) -> Result<(Vec<Complex64>, Tracker<'t>)>
    where
        'm: 't,
    {
        let tr = match tracker.take() {
            Some(tr) => tr,
            None => match seed {
                // Exact values live at the path start.
                TrackSeed::Exact { .. } => Tracker::seed(self.model, self.h, map.x(0.0), seed)?,
                // Near seeds serve paths starting at a branch point, where
                // the fiber collides: seed at the first quadrature node.
                TrackSeed::Near { .. } => {
                    let (nodes, _) = gauss_legendre(self.cfg.order);
                    let first_t = 0.5 * (nodes[0] + 1.0) * 0.5;
                    Tracker::seed(self.model, self.h, map.x(first_t), seed)?
                }
            },
        };
        self.panel(map, tr, 0.0, 1.0, 0, f)
    }

    fn panel<'t>(
        &self,
        map: &SegmentMap,
        tracker: Tracker<'t>,
        t0: f64,
        t1: f64,
        depth: usize,
        f: &VecIntegrand,
    ) -> Result<(Vec<Complex64>, Tracker<'t>)> {
        let (coarse, _) = self.gl_pass(map, tracker.clone(), t0, t1, f)?;
        let tm = 0.5 * (t0 + t1);
        let (left, tr_mid) = self.gl_pass(map, tracker.clone(), t0, tm, f)?;
        let (right, tr_end) = self.gl_pass(map, tr_mid, tm, t1, f)?;
        let fine: Vec<Complex64> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
        let err = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        let scale = fine.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        if err <= self.cfg.abs_tol + self.cfg.rel_tol * scale || depth >= self.cfg.max_depth {
            if depth >= self.cfg.max_depth && err > 100.0 * (self.cfg.abs_tol + self.cfg.rel_tol * scale)
            {
                return Err(Error::NonConvergence {
                    context: "quadrature panel refinement exhausted".into(),
                    iterations: depth,
                    residual: err,
                });
            }
            return Ok((fine, tr_end));
        }
        let (lv, tr1) = self.panel(map, tracker, t0, tm, depth + 1, f)?;
        let (rv, tr2) = self.panel(map, tr1, tm, t1, depth + 1, f)?;
        Ok((lv.iter().zip(&rv).map(|(a, b)| a + b).collect(), tr2))
    }

    /// One Gauss-Legendre pass over `[t0, t1]`, tracking through the nodes
    /// in order. Returns the weighted sum and the tracker at the last node.
    fn gl_pass<'t>(
        &self,
        map: &SegmentMap,
        mut tracker: Tracker<'t>,
        t0: f64,
        t1: f64,
        f: &VecIntegrand,
    ) -> Result<(Vec<Complex64>, Tracker<'t>)> {
        let (nodes, weights) = gauss_legendre(self.cfg.order);
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t0 + t1);
        let mut acc: Option<Vec<Complex64>> = None;
        for (&n, &w) in nodes.iter().zip(&weights) {
            let t = mid + half * n;
            let x = map.x(t);
            tracker.step_to(x)?;
            let st = tracker.state();
            let vals = f(st.x, st.y, st.lambda);
            let jac = map.dx_dt(t) * half * w;
            match &mut acc {
                None => acc = Some(vals.iter().map(|v| v * jac).collect()),
                Some(a) => {
                    for (ai, v) in a.iter_mut().zip(&vals) {
                        *ai += v * jac;
                    }
                }
            }
        }
        Ok((acc.expect("order > 0"), tracker))
    }
}

/// Parametrization of one segment with optional quadratic ramps removing
/// square-root endpoint singularities.
struct SegmentMap {
    a: Complex64,
    d: Complex64,
    kind: MapKind,
}

enum MapKind {
    Affine,
    RampStart,
    RampEnd,
    RampBoth,
}

impl SegmentMap {
    fn new(a: Complex64, b: Complex64, sing_start: bool, sing_end: bool) -> SegmentMap {
        let kind = match (sing_start, sing_end) {
            (false, false) => MapKind::Affine,
            (true, false) => MapKind::RampStart,
            (false, true) => MapKind::RampEnd,
            (true, true) => MapKind::RampBoth,
        };
        SegmentMap { a, d: b - a, kind }
    }

    fn s(&self, t: f64) -> f64 {
        match self.kind {
            MapKind::Affine => t,
            MapKind::RampStart => t * t,
            MapKind::RampEnd => 1.0 - (1.0 - t) * (1.0 - t),
            MapKind::RampBoth => t * t * (3.0 - 2.0 * t),
        }
    }

    fn ds_dt(&self, t: f64) -> f64 {
        match self.kind {
            MapKind::Affine => 1.0,
            MapKind::RampStart => 2.0 * t,
            MapKind::RampEnd => 2.0 * (1.0 - t),
            MapKind::RampBoth => 6.0 * t * (1.0 - t),
        }
    }

    fn x(&self, t: f64) -> Complex64 {
        self.a + self.d * self.s(t)
    }

    fn dx_dt(&self, t: f64) -> Complex64 {
        self.d * self.ds_dt(t)
    }
}

//! Separation of variables: recover the Hamiltonian vector from a
//! separating divisor of `N` points on the spectral curve.
//!
//! For series A/B/C the separation relations `R(x_i, y_i, l_i; H) = 0`
//! are linear in `H` and solved by elimination (with the determinant-ratio
//! path kept as a cross-check). For so(4) the relations are quadratic;
//! they descend to a single quartic solved in radicals, giving at most
//! four candidate sign-pairs. A damped Newton iteration covers the general
//! D-series case and serves as the independent cross-check.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;

use crate::algebra::{invert, solve_dense, solve_quartic_radicals, CMatrix, CPoly};
use crate::lie::Series;
use crate::spectral::{HamiltonianVector, SpectralModel, SpectralPoint};
use crate::{Error, Result};

/// Unordered set of `N` points on the spectral curve encoding a phase-space
/// point.
#[derive(Debug, Clone)]
pub struct SeparatingDivisor {
    pub points: Vec<SpectralPoint>,
}

impl SeparatingDivisor {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Linear,
    Cramer,
    Radicals,
    Newton,
}

/// Outcome of a Hamiltonian solve. `candidates` has a single entry for the
/// linear series; the so(4) radicals path reports every surviving
/// candidate (one representative per `q -> -q` sign pair), residuals
/// aligned index-wise. No candidate is auto-selected: the fibers are
/// genuinely multi-valued.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub candidates: Vec<HamiltonianVector>,
    pub residuals: Vec<f64>,
    pub condition: f64,
    pub method: SolveMethod,
    /// Residual-norm trace of the Newton iteration, when applicable.
    pub trace: Vec<f64>,
}

impl SolveReport {
    /// The candidate with the smallest residual.
    pub fn best(&self) -> &HamiltonianVector {
        let i = self
            .residuals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        &self.candidates[i]
    }
}

/// Max relative on-curve residual of the divisor against `H`.
pub fn divisor_residual(m: &SpectralModel, h: &HamiltonianVector, d: &SeparatingDivisor) -> f64 {
    d.points
        .iter()
        .map(|p| m.point_residual(h, p))
        .fold(0.0f64, f64::max)
}

/// Forward-sample a separating divisor from known Hamiltonians: distinct
/// random base points, one fiber root each.
pub fn sample_divisor<R: Rng>(
    m: &SpectralModel,
    h: &HamiltonianVector,
    rng: &mut R,
) -> Result<SeparatingDivisor> {
    let n = m.hamiltonian_count();
    let mut xs: Vec<Complex64> = Vec::with_capacity(n);
    let mut guard = 0;
    while xs.len() < n {
        guard += 1;
        if guard > 1000 {
            return Err(Error::NonConvergence {
                context: "sample_divisor: could not place separated points".into(),
                iterations: guard,
                residual: 0.0,
            });
        }
        let x = crate::sampling::random_annulus(rng, 0.6, 1.4);
        if xs.iter().all(|&p| (p - x).norm() > 0.15) {
            xs.push(x);
        }
    }
    let mut points = Vec::with_capacity(n);
    for x in xs {
        let sheet = rng.gen_range(0..2u8);
        let y = m.base().lift(x, sheet).y;
        let roots = m.fiber_roots(h, x, y)?;
        let lambda = roots[rng.gen_range(0..roots.len())];
        let p = SpectralPoint {
            x,
            y,
            lambda,
            y_sheet: Some(sheet),
        };
        let res = m.point_residual(h, &p);
        if res > 1e-10 {
            return Err(Error::NonConvergence {
                context: "sample_divisor: fiber root residual too large".into(),
                iterations: 0,
                residual: res,
            });
        }
        points.push(p);
    }
    Ok(SeparatingDivisor { points })
}

/// The separation matrix `M[i][j] = dR/dH_j` at point `i` and the right
/// hand side `-R(point_i; H = 0)`, so that `M H = rhs` is exactly the
/// system of separation relations. Linear series only.
pub fn separation_matrix(
    m: &SpectralModel,
    d: &SeparatingDivisor,
) -> Result<(CMatrix, Vec<Complex64>)> {
    if m.lie().series == Series::D {
        return Err(Error::UnsupportedSeries(
            "separation relations are quadratic for series D".into(),
        ));
    }
    let n = m.hamiltonian_count();
    if d.len() != n {
        return Err(Error::BadInput(format!(
            "divisor has {} points, expected {}",
            d.len(),
            n
        )));
    }
    let h0 = HamiltonianVector::zeros(n);
    let mut rows = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for p in &d.points {
        let parts = m.partials(&h0, p.x, p.y, p.lambda)?;
        rows.push(parts.d_h);
        rhs.push(-parts.value);
    }
    Ok((CMatrix::from_rows(rows), rhs))
}

/// Solve the separation relations by elimination with pivoting (series
/// A/B/C). Round-trips `sample_divisor` up to the solver tolerance.
pub fn solve_linear(m: &SpectralModel, d: &SeparatingDivisor) -> Result<SolveReport> {
    let (mat, rhs) = separation_matrix(m, d)?;
    let sol = solve_dense(&mat, &rhs)?;
    let h = HamiltonianVector(sol.x);
    let res = divisor_residual(m, &h, d);
    Ok(SolveReport {
        candidates: vec![h],
        residuals: vec![res],
        condition: sol.condition,
        method: SolveMethod::Linear,
        trace: Vec::new(),
    })
}

/// Determinant-ratio solution of the same system; cross-check path for
/// `solve_linear`.
pub fn solve_linear_cramer(m: &SpectralModel, d: &SeparatingDivisor) -> Result<SolveReport> {
    let (mat, rhs) = separation_matrix(m, d)?;
    let n = mat.rows();
    let det = crate::algebra::determinant(&mat);
    if det.norm() == 0.0 {
        return Err(Error::SingularMatrix);
    }
    let mut x = vec![Complex64::default(); n];
    for j in 0..n {
        let mut mj = mat.clone();
        for i in 0..n {
            mj[(i, j)] = rhs[i];
        }
        x[j] = crate::algebra::determinant(&mj) / det;
    }
    let h = HamiltonianVector(x);
    let res = divisor_residual(m, &h, d);
    Ok(SolveReport {
        candidates: vec![h],
        residuals: vec![res],
        condition: f64::NAN,
        method: SolveMethod::Cramer,
        trace: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// so(4): quadratic relations in radicals
// ---------------------------------------------------------------------------

/// Configuration of the so(4) radicals solver.
#[derive(Debug, Clone, Copy)]
pub struct So4Config {
    /// Residual below which a candidate is accepted.
    pub accept: f64,
    /// Relative threshold for degenerate elimination data.
    pub degenerate: f64,
}

impl Default for So4Config {
    fn default() -> Self {
        So4Config {
            accept: 1e-8,
            degenerate: 1e-9,
        }
    }
}

/// Conic `c0 + cs s + ct t + css s^2 + cst st + ctt t^2` in two unknowns.
#[derive(Debug, Clone, Copy)]
struct Conic {
    c0: Complex64,
    cs: Complex64,
    ct: Complex64,
    css: Complex64,
    cst: Complex64,
    ctt: Complex64,
}

impl Conic {
    fn eval(&self, s: Complex64, t: Complex64) -> Complex64 {
        self.c0 + self.cs * s + self.ct * t + self.css * s * s + self.cst * s * t + self.ctt * t * t
    }

    fn grad(&self, s: Complex64, t: Complex64) -> (Complex64, Complex64) {
        (
            self.cs + 2.0 * self.css * s + self.cst * t,
            self.ct + self.cst * s + 2.0 * self.ctt * t,
        )
    }

    /// Coefficients as a quadratic in `t`: `(A, B(s), C(s))`.
    fn in_t(&self) -> (Complex64, CPoly, CPoly) {
        (
            self.ctt,
            CPoly::new(vec![self.ct, self.cst]),
            CPoly::new(vec![self.c0, self.cs, self.css]),
        )
    }
}

/// Solve the so(4) separation relations
/// `l_i^4 + l_i^2 p(x_i) + q(x_i)^2 = 0` (six points, genus 2) in radicals.
///
/// Route: a 3-dimensional space of covectors annihilating the span of
/// `(l_i^2 x_i^m)` turns the six relations into three equations
/// `quadratic(H_3, H_4, H_5) + const = 0`; scaling one unknown out leaves
/// two conics whose resultant is a quartic solved in closed form. The
/// q-coefficients come back as `+-` pairs (only `q^2` enters the curve)
/// and `(H_0..H_2)` follow from a 3x3 linear solve.
pub fn solve_so4_radicals(
    m: &SpectralModel,
    d: &SeparatingDivisor,
    cfg: So4Config,
) -> Result<SolveReport> {
    check_so4_scope(m, d)?;
    let pts = &d.points;
    let covectors = annihilator_covectors(pts)?;

    // Hankel quadratic forms: sum_i c_i q(x_i)^2 = h^T Q h with
    // Q = [[S0,S1,S2],[S1,S2,S3],[S2,S3,S4]], S_k = sum_i c_i x_i^k,
    // plus the constant T = sum_i c_i l_i^4.
    let mut forms: Vec<([[Complex64; 3]; 3], Complex64)> = Vec::with_capacity(3);
    for c in &covectors {
        let mut s = [Complex64::default(); 5];
        let mut t = Complex64::default();
        for (i, p) in pts.iter().enumerate() {
            let mut pw = Complex64::new(1.0, 0.0);
            for sk in s.iter_mut() {
                *sk += c[i] * pw;
                pw *= p.x;
            }
            t += c[i] * p.lambda.powu(4);
        }
        let q = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
        forms.push((q, t));
    }

    let t_scale = forms.iter().map(|(_, t)| t.norm()).fold(0.0f64, f64::max);
    if t_scale < cfg.degenerate {
        return Err(Error::EliminationDegenerate(
            "all projected constants vanish; q-block data degenerate".into(),
        ));
    }
    let pivot = forms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.norm().total_cmp(&b.1 .1.norm()))
        .map(|(i, _)| i)
        .unwrap();

    let mut all: Vec<HamiltonianVector> = Vec::new();
    for norm_var in 0..3usize {
        match candidates_for_normalization(m, pts, &forms, pivot, norm_var, cfg) {
            Ok(cands) => {
                for h in cands {
                    if divisor_residual(m, &h, d) <= cfg.accept
                        && !all.iter().any(|g| same_up_to_q_sign(g, &h))
                    {
                        all.push(h);
                    }
                }
            }
            Err(Error::EliminationDegenerate(_)) => continue,
            Err(e) => return Err(e),
        }
        if !all.is_empty() {
            break;
        }
    }
    if all.is_empty() {
        return Err(Error::EliminationDegenerate(
            "no candidate passed the residual filter in any normalization".into(),
        ));
    }
    all.truncate(4);
    let residuals: Vec<f64> = all.iter().map(|h| divisor_residual(m, h, d)).collect();
    Ok(SolveReport {
        candidates: all,
        residuals,
        condition: f64::NAN,
        method: SolveMethod::Radicals,
        trace: Vec::new(),
    })
}

fn check_so4_scope(m: &SpectralModel, d: &SeparatingDivisor) -> Result<()> {
    if m.lie().series != Series::D || m.lie().rank != 2 || m.genus() != 2 {
        return Err(Error::UnsupportedSeries(format!(
            "radicals solver covers D2 at genus 2, not {} at genus {}",
            m.lie(),
            m.genus()
        )));
    }
    if d.len() != 6 {
        return Err(Error::BadInput(format!(
            "so(4) divisor needs 6 points, got {}",
            d.len()
        )));
    }
    Ok(())
}

/// Basis of covectors `c` with `sum_i c_i l_i^2 x_i^m = 0` for m = 0,1,2.
fn annihilator_covectors(pts: &[SpectralPoint]) -> Result<Vec<Vec<Complex64>>> {
    let mut rows = Vec::with_capacity(3);
    for mpow in 0..3u32 {
        rows.push(
            pts.iter()
                .map(|p| p.lambda * p.lambda * p.x.powu(mpow))
                .collect::<Vec<_>>(),
        );
    }
    let v = CMatrix::from_rows(rows);
    let basis = crate::algebra::nullspace(&v, 1e-12);
    if basis.len() != 3 {
        return Err(Error::EliminationDegenerate(format!(
            "annihilator dimension {} (expected 3)",
            basis.len()
        )));
    }
    Ok(basis)
}

/// All candidates recoverable with `h[norm_var] != 0` scaled out.
fn candidates_for_normalization(
    m: &SpectralModel,
    pts: &[SpectralPoint],
    forms: &[([[Complex64; 3]; 3], Complex64)],
    pivot: usize,
    norm_var: usize,
    cfg: So4Config,
) -> Result<Vec<HamiltonianVector>> {
    let (pi, a, b) = match norm_var {
        0 => (0usize, 1usize, 2usize),
        1 => (1, 0, 2),
        _ => (2, 0, 1),
    };
    // Phi_j(s, t) = v^T Q_j v with v = e_pi + s e_a + t e_b.
    let phi = |q: &[[Complex64; 3]; 3]| Conic {
        c0: q[pi][pi],
        cs: 2.0 * q[pi][a],
        ct: 2.0 * q[pi][b],
        css: q[a][a],
        cst: 2.0 * q[a][b],
        ctt: q[b][b],
    };
    let t_piv = forms[pivot].1;
    let phi_piv = phi(&forms[pivot].0);
    let mut conics = Vec::with_capacity(2);
    for (j, (qj, tj)) in forms.iter().enumerate() {
        if j == pivot {
            continue;
        }
        let pj = phi(qj);
        // E_j = T_j * Phi_pivot - T_pivot * Phi_j vanishes on solutions.
        conics.push(Conic {
            c0: *tj * phi_piv.c0 - t_piv * pj.c0,
            cs: *tj * phi_piv.cs - t_piv * pj.cs,
            ct: *tj * phi_piv.ct - t_piv * pj.ct,
            css: *tj * phi_piv.css - t_piv * pj.css,
            cst: *tj * phi_piv.cst - t_piv * pj.cst,
            ctt: *tj * phi_piv.ctt - t_piv * pj.ctt,
        });
    }
    let (e1, e2) = (conics[0], conics[1]);

    // Resultant in t of the two conics: a quartic in s.
    let (a1, b1, c1) = e1.in_t();
    let (a2, b2, c2) = e2.in_t();
    let ac = c2.scale(a1).sub(&c1.scale(a2));
    let ab = b2.scale(a1).sub(&b1.scale(a2));
    let bc = b1.mul(&c2).sub(&b2.mul(&c1));
    let quartic = ac.mul(&ac).sub(&ab.mul(&bc));
    let qc: Vec<Complex64> = (0..5).map(|k| quartic.coeff(k)).collect();
    let scale = qc.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 || qc[4].norm() < cfg.degenerate * scale {
        return Err(Error::EliminationDegenerate(format!(
            "eliminant degree dropped under normalization by h[{}]",
            norm_var + 3
        )));
    }
    let s_roots = solve_quartic_radicals(qc[4], qc[3], qc[2], qc[1], qc[0])?;

    let mut out = Vec::new();
    for s0 in s_roots {
        // t from the t^2-free combination A2 E1 - A1 E2, linear in t.
        let denom = a2 * b1.eval(s0) - a1 * b2.eval(s0);
        let mut t = if denom.norm() > cfg.degenerate * scale.sqrt() {
            (a1 * c2.eval(s0) - a2 * c1.eval(s0)) / denom
        } else {
            // Fall back: roots of E1 in t, keep the one killing E2.
            let disc = (b1.eval(s0) * b1.eval(s0) - 4.0 * a1 * c1.eval(s0)).sqrt();
            let t1 = (-b1.eval(s0) + disc) / (2.0 * a1);
            let t2 = (-b1.eval(s0) - disc) / (2.0 * a1);
            if e2.eval(s0, t1).norm() <= e2.eval(s0, t2).norm() {
                t1
            } else {
                t2
            }
        };
        // Newton-polish (s, t) on the conic pair.
        let mut s = s0;
        for _ in 0..3 {
            let f1 = e1.eval(s, t);
            let f2 = e2.eval(s, t);
            let (j11, j12) = e1.grad(s, t);
            let (j21, j22) = e2.grad(s, t);
            let det = j11 * j22 - j12 * j21;
            if det.norm() < 1e-300 {
                break;
            }
            let ds = (f1 * j22 - f2 * j12) / det;
            let dt = (f2 * j11 - f1 * j21) / det;
            s -= ds;
            t -= dt;
        }

        // u^2 Phi_j(s, t) = -T_j; read u^2 off the best-conditioned one.
        let mut best: Option<(f64, Complex64)> = None;
        for (qj, tj) in forms {
            let v = phi(qj).eval(s, t);
            if best.as_ref().map_or(true, |(n, _)| v.norm() > *n) {
                best = Some((v.norm(), -*tj / v));
            }
        }
        let (phi_norm, u2) = best.unwrap();
        if phi_norm < cfg.degenerate {
            continue;
        }
        let u = u2.sqrt();
        let mut qvec = [Complex64::default(); 3];
        qvec[pi] = u;
        qvec[a] = u * s;
        qvec[b] = u * t;

        if let Ok(h) = back_solve_p(m, pts, &qvec) {
            out.push(h);
        }
    }
    Ok(out)
}

/// Recover `(H_0..H_2)` from three separation relations given the q-block:
/// `p(x_i) = -(l_i^4 + q(x_i)^2) / l_i^2`.
fn back_solve_p(
    m: &SpectralModel,
    pts: &[SpectralPoint],
    qvec: &[Complex64; 3],
) -> Result<HamiltonianVector> {
    let mut rows = Vec::with_capacity(3);
    let mut rhs = Vec::with_capacity(3);
    for p in pts.iter().take(3) {
        rows.push(vec![Complex64::new(1.0, 0.0), p.x, p.x * p.x]);
        let q = qvec[0] + qvec[1] * p.x + qvec[2] * p.x * p.x;
        rhs.push(-(p.lambda.powu(4) + q * q) / (p.lambda * p.lambda));
    }
    let sol = solve_dense(&CMatrix::from_rows(rows), &rhs)?;
    let mut h = sol.x;
    h.extend_from_slice(qvec);
    let h = HamiltonianVector(h);
    debug_assert_eq!(h.len(), m.hamiltonian_count());
    Ok(h)
}

/// Equality of so(4) Hamiltonian vectors up to the `q -> -q` sign pair.
pub fn same_up_to_q_sign(a: &HamiltonianVector, b: &HamiltonianVector) -> bool {
    q_sign_distance(a, b) < 1e-6
}

/// Relative distance between so(4) Hamiltonian vectors modulo the q-sign.
pub fn q_sign_distance(a: &HamiltonianVector, b: &HamiltonianVector) -> f64 {
    let scale = a
        .0
        .iter()
        .chain(b.0.iter())
        .map(|c| c.norm())
        .fold(1.0f64, f64::max);
    let p_dist = a.0[..3]
        .iter()
        .zip(&b.0[..3])
        .map(|(x, y)| (x - y).norm())
        .fold(0.0f64, f64::max);
    let plus = a.0[3..]
        .iter()
        .zip(&b.0[3..])
        .map(|(x, y)| (x - y).norm())
        .fold(0.0f64, f64::max);
    let minus = a.0[3..]
        .iter()
        .zip(&b.0[3..])
        .map(|(x, y)| (x + y).norm())
        .fold(0.0f64, f64::max);
    p_dist.max(plus.min(minus)) / scale
}

// ---------------------------------------------------------------------------
// Newton path (general D-series, and the radicals cross-check)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    pub max_iter: usize,
    pub step_tol: f64,
    pub residual_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iter: 100,
            step_tol: 1e-12,
            residual_tol: 1e-9,
        }
    }
}

/// Damped Newton iteration on the full system of separation relations.
/// Works for every series; it is the only solver for D_l with l > 2.
pub fn solve_newton(
    m: &SpectralModel,
    d: &SeparatingDivisor,
    init: &HamiltonianVector,
    cfg: NewtonConfig,
) -> Result<SolveReport> {
    let n = m.hamiltonian_count();
    if d.len() != n || init.len() != n {
        return Err(Error::BadInput(format!(
            "solve_newton: divisor {} / init {} vs N = {}",
            d.len(),
            init.len(),
            n
        )));
    }
    let mut h = init.clone();
    let mut trace = Vec::new();
    let mut cond = f64::NAN;
    for _ in 0..cfg.max_iter {
        let mut rows = Vec::with_capacity(n);
        let mut f = Vec::with_capacity(n);
        for p in &d.points {
            let parts = m.partials(&h, p.x, p.y, p.lambda)?;
            rows.push(parts.d_h);
            f.push(parts.value);
        }
        let fnorm = f.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        trace.push(fnorm);
        if fnorm < cfg.residual_tol {
            let res = divisor_residual(m, &h, d);
            return Ok(SolveReport {
                candidates: vec![h],
                residuals: vec![res],
                condition: cond,
                method: SolveMethod::Newton,
                trace,
            });
        }
        let jac = CMatrix::from_rows(rows);
        let rhs: Vec<Complex64> = f.iter().map(|&v| -v).collect();
        let sol = solve_dense(&jac, &rhs)?;
        cond = sol.condition;
        let hscale = h.0.iter().map(|c| c.norm()).fold(1.0f64, f64::max);
        let mut alpha = 1.0f64;
        let mut accepted = false;
        for _ in 0..30 {
            let ht = HamiltonianVector(
                h.0.iter()
                    .zip(&sol.x)
                    .map(|(&hv, &dv)| hv + alpha * dv)
                    .collect(),
            );
            let ft = d
                .points
                .iter()
                .map(|p| m.eval_r(&ht, p.x, p.y, p.lambda).norm())
                .fold(0.0f64, f64::max);
            if ft < fnorm {
                let step = sol.x.iter().map(|c| c.norm()).fold(0.0f64, f64::max) * alpha;
                h = ht;
                accepted = true;
                if step < cfg.step_tol * hscale {
                    let res = divisor_residual(m, &h, d);
                    if res < cfg.residual_tol {
                        trace.push(ft);
                        return Ok(SolveReport {
                            candidates: vec![h],
                            residuals: vec![res],
                            condition: cond,
                            method: SolveMethod::Newton,
                            trace,
                        });
                    }
                }
                break;
            }
            alpha /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence {
        context: "solve_newton: separation relations".into(),
        iterations: cfg.max_iter,
        residual: *trace.last().unwrap_or(&f64::INFINITY),
    })
}

/// Radicals route with a deterministic multi-start Newton rescue on
/// degenerate elimination data.
pub fn solve_so4(m: &SpectralModel, d: &SeparatingDivisor) -> Result<SolveReport> {
    match solve_so4_radicals(m, d, So4Config::default()) {
        Ok(report) => Ok(report),
        Err(Error::EliminationDegenerate(why)) => {
            let n = m.hamiltonian_count();
            for k in 0..8u64 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5017 + k);
                let init = HamiltonianVector(
                    (0..n)
                        .map(|_| crate::sampling::random_annulus(&mut rng, 0.2, 1.2))
                        .collect(),
                );
                if let Ok(rep) = solve_newton(m, d, &init, NewtonConfig::default()) {
                    return Ok(rep);
                }
            }
            Err(Error::EliminationDegenerate(why))
        }
        Err(e) => Err(e),
    }
}

/// Condition estimate of the separation matrix (linear series).
pub fn separation_condition(m: &SpectralModel, d: &SeparatingDivisor) -> Result<f64> {
    let (mat, _) = separation_matrix(m, d)?;
    let inv = invert(&mat)?;
    Ok(mat.norm_inf() * inv.norm_inf())
}

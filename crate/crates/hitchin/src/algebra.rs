//! Complex polynomials, dense linear solves and the closed-form quartic:
//! the numeric substrate for every other module.
//!
//! The root finder is a simultaneous Aberth-Ehrlich iteration started on a
//! scaled circle; it is robust for the moderate degrees (<= ~20) arising
//! from the spectral-curve resolvents. All tolerances are explicit
//! parameters with the defaults collected in [`Tolerances`].

use num_complex::Complex64;

use crate::{Error, Result};

/// Default tolerances of the algebra kernels.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Backward-error bound accepted for a polynomial root.
    pub root_residual: f64,
    /// Pivot threshold (relative to the matrix scale) below which
    /// elimination reports [`Error::SingularMatrix`].
    pub pivot: f64,
    /// Clustering radius factor for multiplicity estimation.
    pub cluster: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root_residual: 1e-10,
            pivot: 1e-12,
            cluster: 1e-7,
        }
    }
}

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

/// Dense complex polynomial, coefficients in ascending degree order.
///
/// The coefficient vector never ends in an exact zero; the zero polynomial
/// is the empty vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CPoly {
    coeffs: Vec<Complex64>,
}

impl CPoly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().map_or(false, |c| c.norm_sqr() == 0.0) {
            coeffs.pop();
        }
        CPoly { coeffs }
    }

    pub fn zero() -> Self {
        CPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        CPoly::new(vec![c])
    }

    pub fn one() -> Self {
        CPoly::constant(Complex64::new(1.0, 0.0))
    }

    /// `c * x^k`.
    pub fn monomial(c: Complex64, k: usize) -> Self {
        let mut v = vec![Complex64::default(); k + 1];
        v[k] = c;
        CPoly::new(v)
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        CPoly::new(coeffs.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        let mut acc = Complex64::default();
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Value and first derivative in one Horner sweep.
    pub fn eval_with_derivative(&self, x: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::default();
        let mut dp = Complex64::default();
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> CPoly {
        if self.coeffs.len() <= 1 {
            return CPoly::zero();
        }
        CPoly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (i as f64 + 1.0))
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> CPoly {
        CPoly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn add(&self, other: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut v = vec![Complex64::default(); n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            v[i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            v[i] += c;
        }
        CPoly::new(v)
    }

    pub fn sub(&self, other: &CPoly) -> CPoly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &CPoly) -> CPoly {
        if self.is_zero() || other.is_zero() {
            return CPoly::zero();
        }
        let mut v = vec![Complex64::default(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        CPoly::new(v)
    }

    /// Monic polynomial with the given roots, scaled by `leading`.
    pub fn from_roots(leading: Complex64, roots: &[Complex64]) -> CPoly {
        let mut p = CPoly::constant(leading);
        for &r in roots {
            p = p.mul(&CPoly::new(vec![-r, Complex64::new(1.0, 0.0)]));
        }
        p
    }

    /// Backward error of `x` as a root: `|p(x)| / sum_i |c_i||x|^i`.
    pub fn root_backward_error(&self, x: Complex64) -> f64 {
        let mut denom = 0.0;
        let ax = x.norm();
        let mut pw = 1.0;
        for &c in &self.coeffs {
            denom += c.norm() * pw;
            pw *= ax;
        }
        if denom == 0.0 {
            return 0.0;
        }
        self.eval(x).norm() / denom
    }
}

/// All roots of `p`, with multiplicity, by simultaneous Aberth-Ehrlich
/// iteration. `tol` bounds the accepted backward error of each root.
pub fn poly_roots(p: &CPoly, tol: f64) -> Result<Vec<Complex64>> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let mut coeffs = p.coeffs().to_vec();
    // Exact zero constant terms deflate to roots at the origin.
    let mut roots = Vec::new();
    while coeffs.len() > 1 && coeffs[0].norm_sqr() == 0.0 {
        coeffs.remove(0);
        roots.push(Complex64::default());
    }
    let d = coeffs.len() - 1;
    if d == 0 {
        if roots.is_empty() {
            return Err(Error::BadInput("constant polynomial has no roots".into()));
        }
        return Ok(roots);
    }
    if d == 1 {
        roots.push(-coeffs[0] / coeffs[1]);
        return Ok(roots);
    }

    let lead = coeffs[d];
    let mut radius: f64 = 0.0;
    for (i, c) in coeffs.iter().enumerate().take(d) {
        let bound = (c.norm() / lead.norm()).powf(1.0 / (d - i) as f64);
        radius = radius.max(bound);
    }
    radius = 2.0 * radius.max(0.5);

    let poly = CPoly::new(coeffs);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.376;
            radius * Complex64::new(theta.cos(), theta.sin())
        })
        .collect();

    let max_iter = 400;
    let mut converged = false;
    for _ in 0..max_iter {
        let mut max_step = 0.0f64;
        for i in 0..d {
            let (pv, dpv) = poly.eval_with_derivative(z[i]);
            if poly.root_backward_error(z[i]) < 1e-16 {
                continue;
            }
            let newton = if dpv.norm_sqr() > 0.0 {
                pv / dpv
            } else {
                // A flat spot: nudge off it.
                Complex64::new(1e-8 * (1.0 + z[i].norm()), 0.0)
            };
            let mut s = Complex64::default();
            for j in 0..d {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff.norm_sqr() > 0.0 {
                        s += diff.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * s;
            let w = if denom.norm_sqr() > 1e-30 {
                newton / denom
            } else {
                newton
            };
            z[i] -= w;
            if !z[i].re.is_finite() || !z[i].im.is_finite() {
                return Err(Error::NonConvergence {
                    context: "poly_roots: iterate diverged".into(),
                    iterations: max_iter,
                    residual: f64::INFINITY,
                });
            }
            max_step = max_step.max(w.norm() / (1.0 + z[i].norm()));
        }
        if max_step < 1e-14 {
            converged = true;
            break;
        }
    }

    let worst = z
        .iter()
        .map(|&r| poly.root_backward_error(r))
        .fold(0.0f64, f64::max);
    // Multiple roots converge linearly; accept them on the residual test
    // even if the step criterion was not met.
    if worst > tol {
        return Err(Error::NonConvergence {
            context: if converged {
                "poly_roots: residual above tolerance".into()
            } else {
                "poly_roots: iteration budget exhausted".into()
            },
            iterations: max_iter,
            residual: worst,
        });
    }
    roots.extend(z);
    Ok(roots)
}

/// Group near-coincident roots. Returns `(representative, multiplicity)`
/// pairs; two roots belong to one cluster when their distance is below
/// `radius_factor * scale`, with `scale = max(1, max |root|)`.
pub fn cluster_roots(roots: &[Complex64], radius_factor: f64) -> Vec<(Complex64, usize)> {
    let scale = roots.iter().map(|r| r.norm()).fold(1.0f64, f64::max);
    let radius = radius_factor * scale;
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        if let Some((c, m)) = clusters
            .iter_mut()
            .find(|(c, _)| (*c - r).norm() <= radius)
        {
            // Running mean keeps the representative centered.
            *c = (*c * (*m as f64) + r) / (*m as f64 + 1.0);
            *m += 1;
        } else {
            clusters.push((r, 1));
        }
    }
    clusters
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::default(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        CMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> CMatrix {
        let mut t = CMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum::<Complex64>()
            })
            .collect()
    }

    pub fn mul_mat(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        out
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|c| c.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorization with partial pivoting.
struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    sign_swaps: usize,
}

fn lu_factor(m: &CMatrix, pivot_tol: f64) -> Result<Lu> {
    assert_eq!(m.rows, m.cols, "lu_factor requires a square matrix");
    let n = m.rows;
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    let scale = lu.data.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let threshold = pivot_tol * scale.max(1e-300);
    for k in 0..n {
        let (pivot_row, pivot_mag) = (k..n)
            .map(|r| (r, lu[(r, k)].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if pivot_mag <= threshold {
            return Err(Error::SingularMatrix);
        }
        if pivot_row != k {
            for c in 0..n {
                let tmp = lu[(k, c)];
                lu[(k, c)] = lu[(pivot_row, c)];
                lu[(pivot_row, c)] = tmp;
            }
            perm.swap(k, pivot_row);
            swaps += 1;
        }
        let pivot = lu[(k, k)];
        for r in (k + 1)..n {
            let f = lu[(r, k)] / pivot;
            lu[(r, k)] = f;
            for c in (k + 1)..n {
                let sub = f * lu[(k, c)];
                lu[(r, c)] -= sub;
            }
        }
    }
    Ok(Lu {
        lu,
        perm,
        sign_swaps: swaps,
    })
}

impl Lu {
    fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for k in 0..n {
            for r in (k + 1)..n {
                let sub = self.lu[(r, k)] * x[k];
                x[r] -= sub;
            }
        }
        for k in (0..n).rev() {
            for c in (k + 1)..n {
                let sub = self.lu[(k, c)] * x[c];
                x[k] -= sub;
            }
            x[k] /= self.lu[(k, k)];
        }
        x
    }

    fn determinant(&self) -> Complex64 {
        let mut det = if self.sign_swaps % 2 == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        };
        for k in 0..self.lu.rows {
            det *= self.lu[(k, k)];
        }
        det
    }
}

/// Result of a dense solve, with a condition-number estimate.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub x: Vec<Complex64>,
    pub condition: f64,
}

/// Solve `m x = rhs` by elimination with partial pivoting.
pub fn solve_dense(m: &CMatrix, rhs: &[Complex64]) -> Result<DenseSolution> {
    if m.rows != m.cols || m.rows != rhs.len() {
        return Err(Error::BadInput(format!(
            "solve_dense: shape mismatch {}x{} vs rhs {}",
            m.rows,
            m.cols,
            rhs.len()
        )));
    }
    let lu = lu_factor(m, Tolerances::default().pivot)?;
    let x = lu.solve(rhs);
    let inv = invert_with(&lu, m.rows);
    let condition = m.norm_inf() * inv.norm_inf();
    Ok(DenseSolution { x, condition })
}

fn invert_with(lu: &Lu, n: usize) -> CMatrix {
    let mut inv = CMatrix::zeros(n, n);
    let mut e = vec![Complex64::default(); n];
    for c in 0..n {
        e[c] = Complex64::new(1.0, 0.0);
        let col = lu.solve(&e);
        e[c] = Complex64::default();
        for r in 0..n {
            inv[(r, c)] = col[r];
        }
    }
    inv
}

/// Matrix inverse via LU.
pub fn invert(m: &CMatrix) -> Result<CMatrix> {
    let lu = lu_factor(m, Tolerances::default().pivot)?;
    Ok(invert_with(&lu, m.rows))
}

/// Determinant via LU. Singularity reported as determinant zero.
pub fn determinant(m: &CMatrix) -> Complex64 {
    match lu_factor(m, 0.0) {
        Ok(lu) => lu.determinant(),
        Err(_) => Complex64::default(),
    }
}

/// Basis of the (right) nullspace of a possibly rectangular matrix.
/// Entries below `rel_tol * scale` are treated as zero pivots.
pub fn nullspace(m: &CMatrix, rel_tol: f64) -> Vec<Vec<Complex64>> {
    let rows = m.rows;
    let cols = m.cols;
    let mut a = m.clone();
    let scale = a.data.iter().map(|c| c.norm()).fold(1e-300f64, f64::max);
    let threshold = rel_tol * scale;

    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row >= rows {
            break;
        }
        let (pr, mag) = (row..rows)
            .map(|r| (r, a[(r, col)].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if mag <= threshold {
            continue;
        }
        if pr != row {
            for c in 0..cols {
                let tmp = a[(row, c)];
                a[(row, c)] = a[(pr, c)];
                a[(pr, c)] = tmp;
            }
        }
        let pivot = a[(row, col)];
        for c in 0..cols {
            a[(row, c)] /= pivot;
        }
        for r in 0..rows {
            if r != row {
                let f = a[(r, col)];
                if f.norm_sqr() > 0.0 {
                    for c in 0..cols {
                        let sub = f * a[(row, c)];
                        a[(r, c)] -= sub;
                    }
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }

    let free_cols: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    let mut basis = Vec::new();
    for &fc in &free_cols {
        let mut v = vec![Complex64::default(); cols];
        v[fc] = Complex64::new(1.0, 0.0);
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -a[(r, fc)];
        }
        // Normalize for conditioning downstream.
        let nrm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in v.iter_mut() {
            *c /= nrm;
        }
        basis.push(v);
    }
    basis
}

// ---------------------------------------------------------------------------
// Quartic in radicals
// ---------------------------------------------------------------------------

fn solve_quadratic(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 2] {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // Pick the sign that avoids cancellation in -b +- disc.
    let s = if (b + disc).norm() >= (b - disc).norm() {
        -b - disc
    } else {
        -b + disc
    };
    let q = s / 2.0;
    if q.norm_sqr() == 0.0 {
        return [Complex64::default(), Complex64::default()];
    }
    [q / a, c / q]
}

/// Roots of the monic cubic `t^3 + a2 t^2 + a1 t + a0` by Cardano's formula.
pub fn solve_cubic_monic(a2: Complex64, a1: Complex64, a0: Complex64) -> [Complex64; 3] {
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    if p.norm() < 1e-300 && q.norm() < 1e-300 {
        return [-shift; 3];
    }
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let u3a = -q / 2.0 + disc;
    let u3b = -q / 2.0 - disc;
    let u3 = if u3a.norm() >= u3b.norm() { u3a } else { u3b };
    let u = u3.cbrt();
    let omega = Complex64::new(-0.5, 0.75f64.sqrt());
    let mut roots = [Complex64::default(); 3];
    for (k, root) in roots.iter_mut().enumerate() {
        let uk = u * omega.powu(k as u32);
        let v = if uk.norm_sqr() > 0.0 {
            -p / (3.0 * uk)
        } else {
            Complex64::default()
        };
        *root = uk + v - shift;
    }
    roots
}

/// The four roots of `c4 l^4 + c3 l^3 + c2 l^2 + c1 l + c0` by the
/// resolvent-cubic procedure, Newton-polished against the input.
pub fn solve_quartic_radicals(
    c4: Complex64,
    c3: Complex64,
    c2: Complex64,
    c1: Complex64,
    c0: Complex64,
) -> Result<[Complex64; 4]> {
    if c4.norm_sqr() == 0.0 {
        return Err(Error::BadInput(
            "solve_quartic_radicals: leading coefficient is zero".into(),
        ));
    }
    let b3 = c3 / c4;
    let b2 = c2 / c4;
    let b1 = c1 / c4;
    let b0 = c0 / c4;
    let shift = b3 / 4.0;
    // Depressed quartic t^4 + p t^2 + q t + r.
    let p = b2 - 3.0 * b3 * b3 / 8.0;
    let q = b1 - b3 * b2 / 2.0 + b3 * b3 * b3 / 8.0;
    let r = b0 - b3 * b1 / 4.0 + b3 * b3 * b2 / 16.0 - 3.0 * b3 * b3 * b3 * b3 / 256.0;

    let coeff_scale = [p.norm(), q.norm(), r.norm(), 1.0]
        .into_iter()
        .fold(0.0f64, f64::max);

    let t_roots: [Complex64; 4];
    if q.norm() <= 1e-14 * coeff_scale {
        // Biquadratic.
        let mu = solve_quadratic(Complex64::new(1.0, 0.0), p, r);
        let s0 = mu[0].sqrt();
        let s1 = mu[1].sqrt();
        t_roots = [s0, -s0, s1, -s1];
    } else {
        let resolvent = solve_cubic_monic(-p, -4.0 * r, 4.0 * p * r - q * q);
        // The factorization needs alpha^2 = u - p != 0; pick the best u.
        let u = resolvent
            .into_iter()
            .max_by(|a, b| (*a - p).norm().total_cmp(&(*b - p).norm()))
            .unwrap();
        let alpha = (u - p).sqrt();
        if alpha.norm() <= 1e-14 * coeff_scale.sqrt().max(1.0) {
            return Err(Error::NonConvergence {
                context: "solve_quartic_radicals: degenerate resolvent".into(),
                iterations: 0,
                residual: alpha.norm(),
            });
        }
        let beta = (u - q / alpha) / 2.0;
        let gamma = (u + q / alpha) / 2.0;
        let r01 = solve_quadratic(Complex64::new(1.0, 0.0), alpha, beta);
        let r23 = solve_quadratic(Complex64::new(1.0, 0.0), -alpha, gamma);
        t_roots = [r01[0], r01[1], r23[0], r23[1]];
    }

    let quartic = CPoly::new(vec![c0, c1, c2, c3, c4]);
    let mut out = [Complex64::default(); 4];
    for (i, &t) in t_roots.iter().enumerate() {
        let mut z = t - shift;
        // Two Newton passes tighten the closed-form roots.
        for _ in 0..2 {
            let (pv, dpv) = quartic.eval_with_derivative(z);
            if dpv.norm_sqr() < 1e-60 {
                break;
            }
            let step = pv / dpv;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            z -= step;
        }
        out[i] = z;
    }
    Ok(out)
}

/// Greedy minimal pairing distance between two equally sized root multisets.
/// Used by tests comparing independent root computations.
pub fn multiset_match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for &ra in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, &rb)| (j, (ra - rb).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn roots_of_x2_plus_1() {
        let p = CPoly::from_real(&[1.0, 0.0, 1.0]);
        let roots = poly_roots(&p, 1e-10).unwrap();
        let expected = [c(0.0, 1.0), c(0.0, -1.0)];
        assert!(multiset_match_distance(&roots, &expected) < 1e-12);
    }

    #[test]
    fn roots_of_x3_minus_1() {
        let p = CPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]);
        let roots = poly_roots(&p, 1e-10).unwrap();
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        let expected: Vec<Complex64> = (0..3)
            .map(|k| Complex64::from_polar(1.0, tau * k as f64))
            .collect();
        assert!(multiset_match_distance(&roots, &expected) < 1e-12);
    }

    #[test]
    fn random_degree_8_residuals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let mut coeffs: Vec<Complex64> = (0..8)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            coeffs.push(c(1.0, 0.0));
            let p = CPoly::new(coeffs);
            let roots = poly_roots(&p, 1e-10).unwrap();
            assert_eq!(roots.len(), 8);
            for &r in &roots {
                assert!(p.eval(r).norm() < 1e-10, "residual {}", p.eval(r).norm());
            }
        }
    }

    #[test]
    fn zero_polynomial_rejected() {
        assert!(matches!(
            poly_roots(&CPoly::zero(), 1e-10),
            Err(Error::ZeroPolynomial)
        ));
    }

    #[test]
    fn multiple_root_cluster() {
        // (x-1)^3 (x+2)
        let p = CPoly::from_roots(
            c(1.0, 0.0),
            &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)],
        );
        let roots = poly_roots(&p, 1e-8).unwrap();
        let clusters = cluster_roots(&roots, 1e-4);
        let mut mults: Vec<usize> = clusters.iter().map(|(_, m)| *m).collect();
        mults.sort_unstable();
        assert_eq!(mults, vec![1, 3]);
    }

    #[test]
    fn solve_identity() {
        let m = CMatrix::identity(4);
        let rhs = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 0.0), c(7.0, -1.0)];
        let sol = solve_dense(&m, &rhs).unwrap();
        for (a, b) in sol.x.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn solve_hand_2x2() {
        let m = CMatrix::from_rows(vec![
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(-1.0, 0.0)],
        ]);
        let sol = solve_dense(&m, &[c(2.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((sol.x[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((sol.x[1] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn solve_random_10x10_residual() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let m = CMatrix::from_rows(
                (0..10)
                    .map(|_| {
                        (0..10)
                            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                            .collect()
                    })
                    .collect(),
            );
            let rhs: Vec<Complex64> = (0..10)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let sol = solve_dense(&m, &rhs).unwrap();
            let back = m.mul_vec(&sol.x);
            let res = back
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(res < 1e-12, "residual {res}");
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let m = CMatrix::from_rows(vec![
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ]);
        assert!(matches!(
            solve_dense(&m, &[c(1.0, 0.0), c(2.0, 0.0)]),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn nullspace_of_rank_deficient() {
        // Rows span a 2-dim subspace of C^4 -> nullspace dim 2.
        let m = CMatrix::from_rows(vec![
            vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        ]);
        let basis = nullspace(&m, 1e-12);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            let img = m.mul_vec(v);
            assert!(img.iter().all(|e| e.norm() < 1e-12));
        }
    }

    #[test]
    fn quartic_roots_of_unity() {
        let roots = solve_quartic_radicals(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(-1.0, 0.0),
        )
        .unwrap();
        let expected = [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)];
        assert!(multiset_match_distance(&roots, &expected) < 1e-12);
    }

    #[test]
    fn quartic_1234() {
        // (l-1)(l-2)(l-3)(l-4) expanded; verified by substitution below.
        let p = CPoly::from_roots(
            c(1.0, 0.0),
            &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)],
        );
        let cs = p.coeffs();
        let roots =
            solve_quartic_radicals(cs[4], cs[3], cs[2], cs[1], cs[0]).unwrap();
        for &r in &roots {
            assert!(p.eval(r).norm() < 1e-9, "residual {}", p.eval(r).norm());
        }
        let expected = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)];
        assert!(multiset_match_distance(&roots, &expected) < 1e-8);
    }

    #[test]
    fn quartic_quadruple_zero() {
        let roots = solve_quartic_radicals(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
        )
        .unwrap();
        for &r in &roots {
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn quartic_agrees_with_aberth() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let cs: Vec<Complex64> = (0..5)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            if cs[4].norm() < 0.1 {
                continue;
            }
            let p = CPoly::new(cs.clone());
            let radical = solve_quartic_radicals(cs[4], cs[3], cs[2], cs[1], cs[0]).unwrap();
            let aberth = poly_roots(&p, 1e-10).unwrap();
            assert!(multiset_match_distance(&radical, &aberth) < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn reconstruct_from_roots(parts in proptest::collection::vec(-1.0f64..1.0, 8..=16)) {
            // Interpret pairs as complex roots; rebuild the monic polynomial,
            // find its roots, rebuild again and compare coefficients.
            let roots: Vec<Complex64> = parts.chunks(2)
                .filter(|ch| ch.len() == 2)
                .map(|ch| c(ch[0], ch[1]))
                .collect();
            prop_assume!(roots.len() >= 2);
            // Keep roots separated so the polynomial is well conditioned.
            for i in 0..roots.len() {
                for j in (i+1)..roots.len() {
                    prop_assume!((roots[i]-roots[j]).norm() > 0.05);
                }
            }
            let p = CPoly::from_roots(c(1.0, 0.0), &roots);
            let found = poly_roots(&p, 1e-8).unwrap();
            let q = CPoly::from_roots(c(1.0, 0.0), &found);
            let scale = p.coeffs().iter().map(|cc| cc.norm()).fold(1.0f64, f64::max);
            for k in 0..=p.degree() {
                prop_assert!((p.coeff(k) - q.coeff(k)).norm() < 1e-8 * scale);
            }
        }

        #[test]
        fn dense_solve_multiply_back(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 6;
            let m = CMatrix::from_rows((0..n).map(|_| {
                (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
            }).collect());
            let rhs: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            match solve_dense(&m, &rhs) {
                Ok(sol) => {
                    if sol.condition < 1e6 {
                        let back = m.mul_vec(&sol.x);
                        let rhs_scale = rhs.iter().map(|v| v.norm()).fold(1.0f64, f64::max);
                        let res = back.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0f64, f64::max);
                        prop_assert!(res < 1e-10 * rhs_scale);
                    }
                }
                Err(Error::SingularMatrix) => {}
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
    }
}

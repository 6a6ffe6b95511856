//! The spectral curve `R(x, y, l; H) = l^n + sum_i r_i(x, y) l^{n - d_i}`
//! over a hyperelliptic base: evaluation, partial derivatives, branch and
//! singular points, Riemann-Hurwitz genus and the gluing/cycle counts.
//!
//! For series B the curve carries the trivial component `l = 0`; the model
//! exposes the nontrivial component (the full polynomial divided by `l`),
//! which has the same shape as the C-series curve of equal rank. For
//! series D the last coefficient is the square of the Pfaffian invariant.

use num_complex::Complex64;

use crate::algebra::{cluster_roots, poly_roots, solve_quartic_radicals, CPoly};
use crate::curves::BaseCurve;
use crate::lie::{classical_data, hamiltonian_layout, HamiltonianLayout, LayoutBlock, LieType, Series};
use crate::{Error, Result};

/// Ordered vector of the `N` independent Hamiltonians, indexed by the
/// flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianVector(pub Vec<Complex64>);

impl HamiltonianVector {
    pub fn zeros(n: usize) -> Self {
        HamiltonianVector(vec![Complex64::default(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// Max relative deviation from another vector.
    pub fn rel_distance(&self, other: &HamiltonianVector) -> f64 {
        let scale = self
            .0
            .iter()
            .chain(other.0.iter())
            .map(|c| c.norm())
            .fold(1.0f64, f64::max);
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max)
            / scale
    }
}

/// A point of the spectral curve, with optional sheet bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub x: Complex64,
    pub y: Complex64,
    pub lambda: Complex64,
    /// Base sheet used when the point was constructed, if known.
    pub y_sheet: Option<u8>,
}

impl SpectralPoint {
    pub fn new(x: Complex64, y: Complex64, lambda: Complex64) -> Self {
        SpectralPoint {
            x,
            y,
            lambda,
            y_sheet: None,
        }
    }
}

/// Partial derivatives of `R` at a point, together with its value.
#[derive(Debug, Clone)]
pub struct Partials {
    pub value: Complex64,
    pub d_lambda: Complex64,
    /// Total x-derivative at fixed sheet, using `dy/dx = P'(x)/(2y)`.
    pub d_x: Complex64,
    pub d_h: Vec<Complex64>,
}

/// Spectral-curve model: Lie type, base curve and Hamiltonian layout.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    lie: LieType,
    base: BaseCurve,
    layout: HamiltonianLayout,
    n_standard: usize,
    n_sheets: usize,
}

impl SpectralModel {
    pub fn new(lie: LieType, base: BaseCurve) -> SpectralModel {
        let data = classical_data(lie);
        let layout = hamiltonian_layout(lie, base.genus());
        // Series B: the component l = 0 is dropped everywhere.
        let n_sheets = if lie.series == Series::B {
            data.n - 1
        } else {
            data.n
        };
        SpectralModel {
            lie,
            base,
            layout,
            n_standard: data.n,
            n_sheets,
        }
    }

    pub fn lie(&self) -> LieType {
        self.lie
    }

    pub fn base(&self) -> &BaseCurve {
        &self.base
    }

    pub fn genus(&self) -> usize {
        self.base.genus()
    }

    pub fn layout(&self) -> &HamiltonianLayout {
        &self.layout
    }

    /// Dimension of the standard representation.
    pub fn n_standard(&self) -> usize {
        self.n_standard
    }

    /// Sheet count of the (nontrivial component of the) spectral covering
    /// over the base curve.
    pub fn n_sheets(&self) -> usize {
        self.n_sheets
    }

    pub fn hamiltonian_count(&self) -> usize {
        self.layout.len()
    }

    fn check_h(&self, h: &HamiltonianVector) -> Result<()> {
        if h.len() != self.layout.len() {
            return Err(Error::BadInput(format!(
                "Hamiltonian vector length {} does not match layout length {}",
                h.len(),
                self.layout.len()
            )));
        }
        Ok(())
    }

    /// Exponent of `lambda` multiplying block `i` in the component the
    /// model exposes. The Pfaffian block of series D sits at exponent 0
    /// with its invariant squared.
    pub fn lambda_exponent(&self, block: &LayoutBlock) -> usize {
        if block.pfaffian {
            self.n_sheets - 2 * block.degree
        } else {
            self.n_sheets - block.degree
        }
    }

    /// True when the exposed component involves only even powers of
    /// `lambda`, i.e. carries the involution `lambda -> -lambda`.
    pub fn has_lambda_involution(&self) -> bool {
        self.n_sheets % 2 == 0
            && self
                .layout
                .blocks
                .iter()
                .all(|b| self.lambda_exponent(b) % 2 == 0)
    }

    /// Value of one invariant block `r_i(x, y)` (non-squared).
    pub fn block_value(
        &self,
        h: &HamiltonianVector,
        block: &LayoutBlock,
        x: Complex64,
        y: Complex64,
    ) -> Complex64 {
        let mut acc = Complex64::default();
        let mut pw = Complex64::new(1.0, 0.0);
        let mut k_prev = 0usize;
        for (j, &k) in block.basis.family0.iter().enumerate() {
            for _ in k_prev..k {
                pw *= x;
            }
            k_prev = k;
            acc += h.0[block.offset + j] * pw;
        }
        let off1 = block.offset + block.basis.family0.len();
        let mut pw = Complex64::new(1.0, 0.0);
        let mut s_prev = 0usize;
        for (j, &s) in block.basis.family1.iter().enumerate() {
            for _ in s_prev..s {
                pw *= x;
            }
            s_prev = s;
            acc += h.0[off1 + j] * y * pw;
        }
        acc
    }

    /// Total x-derivative of one block at fixed sheet; `dydx` is needed
    /// only when the block has y-terms.
    fn block_dx(
        &self,
        h: &HamiltonianVector,
        block: &LayoutBlock,
        x: Complex64,
        y: Complex64,
        dydx: Option<Complex64>,
    ) -> Result<Complex64> {
        let mut acc = Complex64::default();
        for (j, &k) in block.basis.family0.iter().enumerate() {
            if k > 0 {
                acc += h.0[block.offset + j] * (k as f64) * x.powu(k as u32 - 1);
            }
        }
        if !block.basis.family1.is_empty() {
            let dydx = dydx.ok_or(Error::BranchPointDerivative)?;
            let off1 = block.offset + block.basis.family0.len();
            for (j, &s) in block.basis.family1.iter().enumerate() {
                let c = h.0[off1 + j];
                let xs = x.powu(s as u32);
                let mut term = dydx * xs;
                if s > 0 {
                    term += y * (s as f64) * x.powu(s as u32 - 1);
                }
                acc += c * term;
            }
        }
        Ok(acc)
    }

    /// The two polynomials `(f0, f1)` with `r_i(x, y) = f0(x) + y f1(x)`
    /// for a block at the given Hamiltonian values.
    pub fn block_polys(&self, h: &HamiltonianVector, block: &LayoutBlock) -> (CPoly, CPoly) {
        let mut f0 = vec![Complex64::default(); block.basis.family0.last().map_or(0, |&k| k + 1)];
        for (j, &k) in block.basis.family0.iter().enumerate() {
            f0[k] = h.0[block.offset + j];
        }
        let off1 = block.offset + block.basis.family0.len();
        let mut f1 = vec![Complex64::default(); block.basis.family1.last().map_or(0, |&s| s + 1)];
        for (j, &s) in block.basis.family1.iter().enumerate() {
            f1[s] = h.0[off1 + j];
        }
        (CPoly::new(f0), CPoly::new(f1))
    }

    /// Value of `R` (the exposed component) at `(x, y, lambda)`.
    pub fn eval_r(
        &self,
        h: &HamiltonianVector,
        x: Complex64,
        y: Complex64,
        lambda: Complex64,
    ) -> Complex64 {
        let mut acc = lambda.powu(self.n_sheets as u32);
        for block in &self.layout.blocks {
            let r = self.block_value(h, block, x, y);
            let r = if block.pfaffian { r * r } else { r };
            let e = self.lambda_exponent(block);
            acc += r * lambda.powu(e as u32);
        }
        acc
    }

    /// Value and partial derivatives of `R` at `(x, y, lambda)`.
    pub fn partials(
        &self,
        h: &HamiltonianVector,
        x: Complex64,
        y: Complex64,
        lambda: Complex64,
    ) -> Result<Partials> {
        self.check_h(h)?;
        let needs_dydx = self
            .layout
            .blocks
            .iter()
            .any(|b| !b.basis.family1.is_empty());
        let dydx = if needs_dydx {
            let y_scale = 1.0 + self.base.eval_p(x).norm().sqrt();
            if y.norm() < 1e-12 * y_scale {
                return Err(Error::BranchPointDerivative);
            }
            Some(self.base.eval_dp(x) / (2.0 * y))
        } else {
            None
        };

        let n = self.n_sheets as u32;
        let mut value = lambda.powu(n);
        let mut d_lambda = (n as f64) * lambda.powu(n - 1);
        let mut d_x = Complex64::default();
        let mut d_h = vec![Complex64::default(); self.layout.len()];

        for block in &self.layout.blocks {
            let e = self.lambda_exponent(block) as u32;
            let le = lambda.powu(e);
            let r = self.block_value(h, block, x, y);
            let drdx = self.block_dx(h, block, x, y, dydx)?;
            let (rval, rdx) = if block.pfaffian {
                (r * r, 2.0 * r * drdx)
            } else {
                (r, drdx)
            };
            value += rval * le;
            d_x += rdx * le;
            if e > 0 {
                d_lambda += rval * (e as f64) * lambda.powu(e - 1);
            }
            // dR/dH for the block coefficients.
            let factor = if block.pfaffian { 2.0 * r * le } else { le };
            for (j, &k) in block.basis.family0.iter().enumerate() {
                d_h[block.offset + j] = factor * x.powu(k as u32);
            }
            let off1 = block.offset + block.basis.family0.len();
            for (j, &s) in block.basis.family1.iter().enumerate() {
                d_h[off1 + j] = factor * y * x.powu(s as u32);
            }
        }
        Ok(Partials {
            value,
            d_lambda,
            d_x,
            d_h,
        })
    }

    /// `R` as a polynomial in `lambda` at fixed `(x, y)`.
    pub fn fiber_poly(&self, h: &HamiltonianVector, x: Complex64, y: Complex64) -> CPoly {
        let mut coeffs = vec![Complex64::default(); self.n_sheets + 1];
        coeffs[self.n_sheets] = Complex64::new(1.0, 0.0);
        for block in &self.layout.blocks {
            let r = self.block_value(h, block, x, y);
            let r = if block.pfaffian { r * r } else { r };
            coeffs[self.lambda_exponent(block)] += r;
        }
        CPoly::new(coeffs)
    }

    /// All `n_sheets` values of `lambda` over `(x, y)`.
    pub fn fiber_roots(
        &self,
        h: &HamiltonianVector,
        x: Complex64,
        y: Complex64,
    ) -> Result<Vec<Complex64>> {
        let poly = self.fiber_poly(h, x, y);
        match self.n_sheets {
            2 => {
                // lambda^2 + c0 (classical rank-1 shape) or general quadratic.
                let c0 = poly.coeff(0);
                let c1 = poly.coeff(1);
                let disc = (c1 * c1 - 4.0 * c0).sqrt();
                Ok(vec![(-c1 + disc) / 2.0, (-c1 - disc) / 2.0])
            }
            4 => {
                let r = solve_quartic_radicals(
                    poly.coeff(4),
                    poly.coeff(3),
                    poly.coeff(2),
                    poly.coeff(1),
                    poly.coeff(0),
                )?;
                Ok(r.to_vec())
            }
            _ => poly_roots(&poly, 1e-9),
        }
    }

    /// Relative residual of a point against both curve equations.
    pub fn point_residual(&self, h: &HamiltonianVector, p: &SpectralPoint) -> f64 {
        let base = self.base.on_curve_error(p.x, p.y);
        let r = self.eval_r(h, p.x, p.y, p.lambda);
        let scale = 1.0 + p.lambda.norm().powi(self.n_sheets as i32);
        base.max(r.norm() / scale)
    }
}

// ---------------------------------------------------------------------------
// Branch and singular points
// ---------------------------------------------------------------------------

/// Zeros on the curve of a function `f0(x) + y f1(x)`. When `f1 = 0`
/// every x-root contributes both sheets; otherwise the sheet is pinned by
/// `y = -f0/f1`.
fn zeros_on_curve(
    base: &BaseCurve,
    f0: &CPoly,
    f1: &CPoly,
    tol: f64,
) -> Result<Vec<(Complex64, Complex64)>> {
    if f1.is_zero() {
        if f0.is_zero() {
            return Err(Error::NonGeneric(
                "invariant vanishes identically on the curve".into(),
            ));
        }
        if f0.degree() == 0 {
            return Ok(Vec::new());
        }
        let roots = poly_roots(f0, tol)?;
        let mut out = Vec::with_capacity(2 * roots.len());
        for x in roots {
            out.push((x, base.lift(x, 0).y));
            out.push((x, base.lift(x, 1).y));
        }
        return Ok(out);
    }
    // f0^2 - P f1^2 = 0, with y = -f0/f1 at every root.
    let resolvent = f0.mul(f0).sub(&base.poly().mul(&f1.mul(f1)));
    if resolvent.is_zero() {
        return Err(Error::NonGeneric("resolvent vanished identically".into()));
    }
    let roots = poly_roots(&resolvent, tol)?;
    let mut out = Vec::with_capacity(roots.len());
    for x in roots {
        let f1x = f1.eval(x);
        let y = if f1x.norm() > 1e-10 * (1.0 + f0.eval(x).norm()) {
            -f0.eval(x) / f1x
        } else {
            // Degenerate alignment: fall back to the sheet minimizing |r|.
            let y0 = base.lift(x, 0).y;
            if (f0.eval(x) + y0 * f1x).norm() <= (f0.eval(x) - y0 * f1x).norm() {
                y0
            } else {
                -y0
            }
        };
        out.push((x, y));
    }
    Ok(out)
}

/// Square of a split function `(f0 + y f1)^2`, reduced by `y^2 = P`.
fn split_square(base: &BaseCurve, f0: &CPoly, f1: &CPoly) -> (CPoly, CPoly) {
    let part0 = f0.mul(f0).add(&base.poly().mul(&f1.mul(f1)));
    let part1 = f0.mul(f1).scale(Complex64::new(2.0, 0.0));
    (part0, part1)
}

/// Finite branch points of the spectral covering over the base curve:
/// solutions of `R = 0`, `dR/dlambda = 0`. Counting convention: finite
/// points only.
pub fn branch_points(
    m: &SpectralModel,
    h: &HamiltonianVector,
    tol: f64,
) -> Result<Vec<SpectralPoint>> {
    let report = genericity_check(m, h)?;
    if !report.generic {
        return Err(Error::NonGeneric(report.issues.join("; ")));
    }
    let blocks = &m.layout().blocks;
    match (m.lie().series, m.n_sheets()) {
        // Rank-1 shape: R = l^2 + r_2, branch points at l = 0, r_2 = 0.
        (_, 2) => {
            let (f0, f1) = m.block_polys(h, &blocks[0]);
            let zeros = zeros_on_curve(m.base(), &f0, &f1, tol)?;
            Ok(zeros
                .into_iter()
                .map(|(x, y)| SpectralPoint::new(x, y, Complex64::default()))
                .collect())
        }
        // Biquadratic shape: R = l^4 + l^2 r + c with c = r_4 (B/C) or q^2 (D).
        (series, 4) => {
            let (r0, r1) = m.block_polys(h, &blocks[0]);
            let mut points = Vec::new();
            if series == Series::D {
                // Branch locus: q^2 - p^2/4 = 0 with lambda^2 = -p/2.
                // The locus lambda = 0, q = 0 consists of nodes, not
                // branch points; see `singular_points`.
                let (q0, q1) = m.block_polys(h, &blocks[1]);
                let (qq0, qq1) = split_square(m.base(), &q0, &q1);
                let (pp0, pp1) = split_square(m.base(), &r0, &r1);
                let quarter = Complex64::new(-0.25, 0.0);
                let g0 = qq0.add(&pp0.scale(quarter));
                let g1 = qq1.add(&pp1.scale(quarter));
                for (x, y) in zeros_on_curve(m.base(), &g0, &g1, tol)? {
                    let p = m.block_value(h, &blocks[0], x, y);
                    let l = (-p / 2.0).sqrt();
                    points.push(SpectralPoint::new(x, y, l));
                    points.push(SpectralPoint::new(x, y, -l));
                }
            } else {
                // Type 1: lambda = 0, r_4 = 0.
                let (c0, c1) = m.block_polys(h, &blocks[1]);
                for (x, y) in zeros_on_curve(m.base(), &c0, &c1, tol)? {
                    points.push(SpectralPoint::new(x, y, Complex64::default()));
                }
                // Type 2: lambda^2 = -r_2/2, r_4 - r_2^2/4 = 0.
                let (sq0, sq1) = split_square(m.base(), &r0, &r1);
                let quarter = Complex64::new(-0.25, 0.0);
                let g0 = c0.add(&sq0.scale(quarter));
                let g1 = c1.add(&sq1.scale(quarter));
                for (x, y) in zeros_on_curve(m.base(), &g0, &g1, tol)? {
                    let r2 = m.block_value(h, &blocks[0], x, y);
                    let l = (-r2 / 2.0).sqrt();
                    points.push(SpectralPoint::new(x, y, l));
                    points.push(SpectralPoint::new(x, y, -l));
                }
            }
            Ok(points)
        }
        _ => Err(Error::UnsupportedSeries(format!(
            "branch point enumeration implemented for the rank-1/rank-2 shapes, not {}",
            m.lie()
        ))),
    }
}

/// Singular points of the spectral curve. Empty for generic Hamiltonians
/// in series A/B/C; the D-series curve has nodes at `lambda = 0, q = 0`.
pub fn singular_points(m: &SpectralModel, h: &HamiltonianVector) -> Result<Vec<SpectralPoint>> {
    let report = genericity_check(m, h)?;
    if !report.generic {
        return Err(Error::NonGeneric(report.issues.join("; ")));
    }
    if m.lie().series != Series::D {
        return Ok(Vec::new());
    }
    let blocks = &m.layout().blocks;
    let pf = blocks.last().expect("D layout has blocks");
    let (q0, q1) = m.block_polys(h, pf);
    let zeros = zeros_on_curve(m.base(), &q0, &q1, 1e-9)?;
    Ok(zeros
        .into_iter()
        .map(|(x, y)| SpectralPoint::new(x, y, Complex64::default()))
        .collect())
}

/// Genus from the Riemann-Hurwitz relation `2g' - 2 = n(2g - 2) + nu`.
/// For singular curves this is the genus of the normalization.
pub fn riemann_hurwitz_genus(n_sheets: usize, g_base: usize, nu: usize) -> Result<usize> {
    let rhs = n_sheets as isize * (2 * g_base as isize - 2) + nu as isize;
    if rhs % 2 != 0 || rhs < -2 {
        return Err(Error::ParityError {
            sheets: n_sheets,
            base_genus: g_base,
            branch_points: nu,
        });
    }
    Ok((rhs / 2 + 1) as usize)
}

/// Cut and cycle bookkeeping of the n-sheeted gluing picture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GluingSummary {
    pub sheets: usize,
    pub branch_points: usize,
    /// Cuts used to glue the sheets: nu/2.
    pub cuts: usize,
    /// Cuts carrying independent cycles: nu/2 - n + 1.
    pub independent_cuts: usize,
    /// Independent cycles on each sheet (the base genus).
    pub per_sheet_cycles: usize,
    /// Total cycle count; equals the (normalization) genus.
    pub total_cycles: usize,
    pub genus: usize,
}

pub fn gluing_summary(m: &SpectralModel, h: &HamiltonianVector) -> Result<GluingSummary> {
    let nu = branch_points(m, h, 1e-9)?.len();
    let n = m.n_sheets();
    let g = m.genus();
    if nu % 2 != 0 || nu / 2 + 1 < n {
        return Err(Error::ParityError {
            sheets: n,
            base_genus: g,
            branch_points: nu,
        });
    }
    let cuts = nu / 2;
    let independent = cuts + 1 - n;
    let total = independent + n * g;
    let genus = riemann_hurwitz_genus(n, g, nu)?;
    debug_assert_eq!(total, genus);
    Ok(GluingSummary {
        sheets: n,
        branch_points: nu,
        cuts,
        independent_cuts: independent,
        per_sheet_cycles: g,
        total_cycles: total,
        genus,
    })
}

// ---------------------------------------------------------------------------
// Genericity
// ---------------------------------------------------------------------------

/// Report of the genericity probes: multiple roots of the branch
/// resolvents, degree drops, identically vanishing invariants.
#[derive(Debug, Clone)]
pub struct GenericityReport {
    pub generic: bool,
    pub issues: Vec<String>,
}

/// Two roots closer than this factor times the root scale count as one.
const CLUSTER_FACTOR: f64 = 1e-6;

fn probe_poly(label: &str, p: &CPoly, expected_degree: usize, issues: &mut Vec<String>) {
    if p.is_zero() {
        issues.push(format!("{label} vanishes identically"));
        return;
    }
    if p.degree() < expected_degree {
        issues.push(format!(
            "{label} degree dropped to {} (expected {expected_degree}); branch data escapes to infinity",
            p.degree()
        ));
    }
    if p.degree() == 0 {
        return;
    }
    match poly_roots(p, 1e-8) {
        Ok(roots) => {
            if cluster_roots(&roots, CLUSTER_FACTOR).iter().any(|(_, m)| *m > 1) {
                issues.push(format!("{label} has a multiple root"));
            }
        }
        Err(e) => issues.push(format!("{label}: root finding failed ({e})")),
    }
}

/// The resolvent whose x-roots carry the zeros of `f0 + y f1` on the curve.
fn on_curve_resolvent(base: &BaseCurve, f0: &CPoly, f1: &CPoly) -> CPoly {
    if f1.is_zero() {
        f0.clone()
    } else {
        f0.mul(f0).sub(&base.poly().mul(&f1.mul(f1)))
    }
}

pub fn genericity_check(m: &SpectralModel, h: &HamiltonianVector) -> Result<GenericityReport> {
    m.check_h(h)?;
    let mut issues = Vec::new();
    let blocks = &m.layout().blocks;
    let g = m.genus();
    match (m.lie().series, m.n_sheets()) {
        (_, 2) => {
            let (f0, f1) = m.block_polys(h, &blocks[0]);
            let res = on_curve_resolvent(m.base(), &f0, &f1);
            let expected = if f1.is_zero() { 2 * (g - 1) } else { 4 * g - 4 };
            probe_poly("r2 resolvent", &res, expected, &mut issues);
        }
        (Series::D, 4) => {
            let (p0, p1) = m.block_polys(h, &blocks[0]);
            let (q0, q1) = m.block_polys(h, &blocks[1]);
            if q0.is_zero() && q1.is_zero() {
                issues.push("Pfaffian q vanishes identically; curve degenerates to l^2 (l^2 + p)".into());
            } else {
                let qres = on_curve_resolvent(m.base(), &q0, &q1);
                let exp_q = if q1.is_zero() { 2 * (g - 1) } else { 4 * (g - 1) + 1 };
                probe_poly("q resolvent", &qres, exp_q.min(qres.degree().max(exp_q)), &mut issues);
                // Branch resolvent q^2 - p^2/4 on the curve.
                let (qq0, qq1) = split_square(m.base(), &q0, &q1);
                let (pp0, pp1) = split_square(m.base(), &p0, &p1);
                let quarter = Complex64::new(-0.25, 0.0);
                let g0 = qq0.add(&pp0.scale(quarter));
                let g1 = qq1.add(&pp1.scale(quarter));
                let res = on_curve_resolvent(m.base(), &g0, &g1);
                let expected = if g1.is_zero() { 4 * (g - 1) } else { 8 * (g - 1) };
                probe_poly("q^2 - p^2/4 resolvent", &res, expected, &mut issues);
                // Nodes must stay clear of lambda^2 = -p/2 collisions: p must
                // not vanish at a q-zero (else the node meets lambda = 0 only).
                if let Ok(qzeros) = zeros_on_curve(m.base(), &q0, &q1, 1e-8) {
                    for (x, y) in qzeros {
                        let p = m.block_value(h, &blocks[0], x, y);
                        if p.norm() < 1e-8 {
                            issues.push("p and q vanish together; singular point degenerates".into());
                        }
                    }
                }
            }
        }
        (_, 4) => {
            let (r20, r21) = m.block_polys(h, &blocks[0]);
            let (r40, r41) = m.block_polys(h, &blocks[1]);
            let res4 = on_curve_resolvent(m.base(), &r40, &r41);
            let exp4 = if r41.is_zero() { 4 * (g - 1) } else { 8 * (g - 1) };
            probe_poly("r4 resolvent", &res4, exp4, &mut issues);
            let (sq0, sq1) = split_square(m.base(), &r20, &r21);
            let quarter = Complex64::new(-0.25, 0.0);
            let g0 = r40.add(&sq0.scale(quarter));
            let g1 = r41.add(&sq1.scale(quarter));
            let res2 = on_curve_resolvent(m.base(), &g0, &g1);
            let exp2 = if g1.is_zero() { 4 * (g - 1) } else { 8 * (g - 1) };
            probe_poly("r4 - r2^2/4 resolvent", &res2, exp2, &mut issues);
        }
        _ => {
            // Other shapes carry no genericity probes yet; report generic
            // so the shared evaluation paths stay usable.
        }
    }
    Ok(GenericityReport {
        generic: issues.is_empty(),
        issues,
    })
}

/// Expected finite branch-point count for the implemented shapes.
pub fn expected_branch_count(lie: LieType, genus: usize) -> Option<usize> {
    match (lie.series, lie.rank) {
        (Series::A, 1) => Some(4 * genus - 4),
        (Series::B, 2) | (Series::C, 2) => Some(24 * (genus - 1)),
        (Series::D, 2) => Some(16 * (genus - 1)),
        _ => None,
    }
}

/// Expected singular-point count (nodes) for the implemented shapes.
pub fn expected_singular_count(lie: LieType, genus: usize) -> Option<usize> {
    match (lie.series, lie.rank) {
        (Series::A, 1) | (Series::B, 2) | (Series::C, 2) => Some(0),
        (Series::D, 2) => Some(4 * (genus - 1)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model(name: &str) -> SpectralModel {
        let lie = LieType::parse(name).unwrap();
        let base = sampling::standard_curve(2).unwrap();
        SpectralModel::new(lie, base)
    }

    #[test]
    fn eval_r_zero_hamiltonians() {
        let m = model("A1");
        let h = HamiltonianVector::zeros(3);
        let v = m.eval_r(&h, c(0.3, 0.1), c(1.0, 0.0), c(2.0, 0.0));
        assert!((v - c(4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn eval_r_d2_matches_direct_formula() {
        let m = model("D2");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let x = c(0.4, -0.2);
        let y = m.base().lift(x, 0).y;
        let l = c(0.7, 0.3);
        let p = h.0[0] + x * h.0[1] + x * x * h.0[2];
        let q = h.0[3] + x * h.0[4] + x * x * h.0[5];
        let direct = l.powu(4) + l * l * p + q * q;
        assert!((m.eval_r(&h, x, y, l) - direct).norm() < 1e-12);
    }

    #[test]
    fn b2_exposes_nontrivial_component() {
        let m = model("B2");
        assert_eq!(m.n_standard(), 5);
        assert_eq!(m.n_sheets(), 4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let x = c(0.2, 0.5);
        let y = m.base().lift(x, 1).y;
        let l = c(-0.3, 0.8);
        let r2 = m.block_value(&h, &m.layout().blocks[0], x, y);
        let r4 = m.block_value(&h, &m.layout().blocks[1], x, y);
        let expect = l.powu(4) + l * l * r2 + r4;
        assert!((m.eval_r(&h, x, y, l) - expect).norm() < 1e-12);
    }

    #[test]
    fn d2_partial_lambda_formula() {
        let m = model("D2");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let x = c(0.1, 0.6);
        let y = m.base().lift(x, 0).y;
        let l = c(0.5, -0.4);
        let p = h.0[0] + x * h.0[1] + x * x * h.0[2];
        let parts = m.partials(&h, x, y, l).unwrap();
        let expect = 4.0 * l.powu(3) + 2.0 * l * p;
        assert!((parts.d_lambda - expect).norm() < 1e-12);
    }

    #[test]
    fn a1_dh_is_monomial_row() {
        let m = model("A1");
        let h = HamiltonianVector::zeros(3);
        let x = c(0.8, -0.1);
        let y = m.base().lift(x, 0).y;
        let l = c(0.2, 0.9);
        let parts = m.partials(&h, x, y, l).unwrap();
        assert!((parts.d_h[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((parts.d_h[1] - x).norm() < 1e-15);
        assert!((parts.d_h[2] - x * x).norm() < 1e-15);
    }

    #[test]
    fn partials_match_finite_differences() {
        for name in ["A1", "C2", "D2"] {
            let m = model(name);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
            let h = sampling::random_hamiltonians(&m, &mut rng);
            let x = c(0.37, 0.21);
            let y = m.base().lift(x, 0).y;
            let l = c(0.45, -0.33);
            let parts = m.partials(&h, x, y, l).unwrap();

            let eps = 1e-6;
            // lambda derivative.
            let dl = (m.eval_r(&h, x, y, l + c(eps, 0.0)) - m.eval_r(&h, x, y, l - c(eps, 0.0)))
                / (2.0 * eps);
            assert!(
                (dl - parts.d_lambda).norm() < 1e-6 * (1.0 + parts.d_lambda.norm()),
                "{name}: d_lambda"
            );
            // Total x derivative at fixed sheet: move y along the sheet.
            let xp = x + c(eps, 0.0);
            let xm = x - c(eps, 0.0);
            let track = |xx: Complex64| {
                let y0 = m.base().lift(xx, 0).y;
                if (y0 - y).norm() <= (y0 + y).norm() {
                    y0
                } else {
                    -y0
                }
            };
            let dx = (m.eval_r(&h, xp, track(xp), l) - m.eval_r(&h, xm, track(xm), l))
                / (2.0 * eps);
            assert!(
                (dx - parts.d_x).norm() < 1e-6 * (1.0 + parts.d_x.norm()),
                "{name}: d_x ({} vs {})",
                dx,
                parts.d_x
            );
            // H derivatives.
            for j in 0..h.len() {
                let mut hp = h.clone();
                hp.0[j] += c(eps, 0.0);
                let mut hm = h.clone();
                hm.0[j] -= c(eps, 0.0);
                let dh =
                    (m.eval_r(&hp, x, y, l) - m.eval_r(&hm, x, y, l)) / (2.0 * eps);
                assert!(
                    (dh - parts.d_h[j]).norm() < 1e-6 * (1.0 + parts.d_h[j].norm()),
                    "{name}: d_h[{j}]"
                );
            }
        }
    }

    #[test]
    fn c2_branch_point_derivative_error() {
        let m = model("C2");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let x = m.base().finite_branch_x()[0];
        let y = Complex64::default();
        assert!(matches!(
            m.partials(&h, x, y, c(0.3, 0.3)),
            Err(Error::BranchPointDerivative)
        ));
    }

    #[test]
    fn branch_point_counts_rank2() {
        let cases = [("A1", 4usize), ("D2", 16), ("C2", 24), ("B2", 24)];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
        for (name, expect) in cases {
            let m = model(name);
            let h = sampling::random_hamiltonians(&m, &mut rng);
            let pts = branch_points(&m, &h, 1e-9).unwrap();
            assert_eq!(pts.len(), expect, "{name}");
            for p in &pts {
                let parts = m.partials(&h, p.x, p.y, p.lambda).unwrap();
                assert!(
                    parts.value.norm() < 1e-7,
                    "{name}: |R| = {}",
                    parts.value.norm()
                );
                assert!(
                    parts.d_lambda.norm() < 1e-6,
                    "{name}: |R_l| = {}",
                    parts.d_lambda.norm()
                );
            }
        }
    }

    #[test]
    fn c2_branch_split_8_plus_16() {
        let m = model("C2");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let pts = branch_points(&m, &h, 1e-9).unwrap();
        let at_zero = pts.iter().filter(|p| p.lambda.norm() < 1e-10).count();
        assert_eq!(at_zero, 8);
        assert_eq!(pts.len() - at_zero, 16);
        // The nonzero-lambda points satisfy lambda^2 = -r2/2.
        for p in pts.iter().filter(|p| p.lambda.norm() >= 1e-10) {
            let r2 = m.block_value(&h, &m.layout().blocks[0], p.x, p.y);
            assert!((p.lambda * p.lambda + r2 / 2.0).norm() < 1e-8);
        }
    }

    #[test]
    fn branch_set_symmetric_under_involutions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(32);
        for name in ["A1", "D2", "C2"] {
            let m = model(name);
            let h = sampling::random_hamiltonians(&m, &mut rng);
            let pts = branch_points(&m, &h, 1e-9).unwrap();
            assert!(m.has_lambda_involution(), "{name}");
            for p in &pts {
                let image = c(p.lambda.re, p.lambda.im) * -1.0;
                let found = pts.iter().any(|q| {
                    (q.x - p.x).norm() < 1e-7
                        && (q.y - p.y).norm() < 1e-7
                        && (q.lambda - image).norm() < 1e-7
                });
                assert!(found, "{name}: sigma image of a branch point missing");
            }
        }
    }

    #[test]
    fn singular_points_d2() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let m = model("D2");
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let sing = singular_points(&m, &h).unwrap();
        assert_eq!(sing.len(), 4);
        for p in &sing {
            assert!(p.lambda.norm() == 0.0);
            let q = m.block_value(&h, &m.layout().blocks[1], p.x, p.y);
            assert!(q.norm() < 1e-8);
        }
        let a1 = model("A1");
        let ha = sampling::random_hamiltonians(&a1, &mut rng);
        assert!(singular_points(&a1, &ha).unwrap().is_empty());
        let c2 = model("C2");
        let hc = sampling::random_hamiltonians(&c2, &mut rng);
        assert!(singular_points(&c2, &hc).unwrap().is_empty());
    }

    #[test]
    fn riemann_hurwitz_table() {
        assert_eq!(riemann_hurwitz_genus(2, 2, 4).unwrap(), 5);
        assert_eq!(riemann_hurwitz_genus(4, 2, 16).unwrap(), 13);
        assert_eq!(riemann_hurwitz_genus(4, 2, 24).unwrap(), 17);
        assert!(matches!(
            riemann_hurwitz_genus(2, 2, 3),
            Err(Error::ParityError { .. })
        ));
    }

    #[test]
    fn gluing_summaries() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(34);
        let m = model("A1");
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let s = gluing_summary(&m, &h).unwrap();
        assert_eq!(
            (s.sheets, s.cuts, s.independent_cuts, s.total_cycles),
            (2, 2, 1, 5)
        );
        let m = model("D2");
        let h = sampling::random_hamiltonians(&m, &mut rng);
        assert_eq!(gluing_summary(&m, &h).unwrap().total_cycles, 13);
        let m = model("C2");
        let h = sampling::random_hamiltonians(&m, &mut rng);
        assert_eq!(gluing_summary(&m, &h).unwrap().total_cycles, 17);
    }

    #[test]
    fn genericity_flags_double_root() {
        let m = model("A1");
        // r2 = (x-1)^2 = 1 - 2x + x^2.
        let h = HamiltonianVector(vec![c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)]);
        let report = genericity_check(&m, &h).unwrap();
        assert!(!report.generic);
        assert!(matches!(
            branch_points(&m, &h, 1e-9),
            Err(Error::NonGeneric(_))
        ));
    }

    #[test]
    fn genericity_flags_zero_pfaffian() {
        let m = model("D2");
        let mut h = HamiltonianVector::zeros(6);
        h.0[0] = c(1.0, 0.0);
        h.0[1] = c(0.3, 0.0);
        h.0[2] = c(1.0, 0.5);
        let report = genericity_check(&m, &h).unwrap();
        assert!(!report.generic);
    }

    #[test]
    fn random_hamiltonians_generic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(35);
        for name in ["A1", "B2", "C2", "D2"] {
            let m = model(name);
            for _ in 0..5 {
                let h = sampling::random_hamiltonians(&m, &mut rng);
                assert!(genericity_check(&m, &h).unwrap().generic, "{name}");
            }
        }
    }

    #[test]
    fn d2_node_has_two_unswapped_branches() {
        // Around a node the quartic in lambda has two roots near zero that
        // continue to two analytic branches; a loop around the node keeps
        // each branch on itself, and the involution swaps them.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(36);
        let m = model("D2");
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let node = singular_points(&m, &h).unwrap()[0];
        let radius = 1e-3;
        let steps = 64;
        // Start on the y-sheet of the node and pick the two small roots.
        let start_x = node.x + radius;
        let sheet_y = |xx: Complex64, yref: Complex64| {
            let y0 = m.base().lift(xx, 0).y;
            if (y0 - yref).norm() <= (y0 + yref).norm() {
                y0
            } else {
                -y0
            }
        };
        let y_start = sheet_y(start_x, node.y);
        let fiber = m.fiber_roots(&h, start_x, y_start).unwrap();
        let mut small: Vec<Complex64> = fiber.clone();
        small.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let (mut b1, mut b2) = (small[0], small[1]);
        assert!(b1.norm() < 0.1 && b2.norm() < 0.1);
        // sigma maps the two local branches to each other.
        assert!((b1 + b2).norm() < 1e-6 * (1.0 + b1.norm()));
        let (b1_0, b2_0) = (b1, b2);
        let mut yref = y_start;
        for k in 1..=steps {
            let th = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
            let xx = node.x + radius * c(th.cos(), th.sin());
            let yy = sheet_y(xx, yref);
            let roots = m.fiber_roots(&h, xx, yy).unwrap();
            let pick = |target: Complex64| {
                roots
                    .iter()
                    .copied()
                    .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
                    .unwrap()
            };
            b1 = pick(b1);
            b2 = pick(b2);
            yref = yy;
        }
        assert!((b1 - b1_0).norm() < 1e-8, "branch 1 swapped around the node");
        assert!((b2 - b2_0).norm() < 1e-8, "branch 2 swapped around the node");
    }
}

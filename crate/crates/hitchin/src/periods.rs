//! Cut integrals, the period matrix `A^{-1} = (2 int_{l_i} w_k)`, basis
//! normalization, angle coordinates, and the so(4) Prym map.
//!
//! A cut is a path between two branch points of the spectral covering (or
//! two base branch points lifted to a fixed sheet); the associated cycle
//! traverses the cut on both glued sheets, whence the factor 2. Endpoint
//! square-root singularities are removed by the quadrature substitution.

use num_complex::Complex64;

use crate::algebra::{invert, CMatrix};
use crate::diffs::AngleDifferential;
use crate::quad::{EndpointSingularities, PathIntegrator, QuadConfig};
use crate::sov::SeparatingDivisor;
use crate::spectral::{branch_points, singular_points, HamiltonianVector, SpectralModel, SpectralPoint};
use crate::track::{route, TrackSeed, XPath};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    /// Connects two base branch points (y = 0 at the ends).
    Base,
    /// Connects two branch points of the spectral covering.
    Spectral,
}

/// A cut with its routed path and deterministic seeding data.
#[derive(Debug, Clone)]
pub struct Cut {
    pub kind: CutKind,
    pub a: Complex64,
    pub b: Complex64,
    pub path: XPath,
    /// Fiber references near `a` picking the tracked sheet.
    pub seed_y: Complex64,
    pub seed_lambda: Complex64,
}

/// Differential basis, chosen cuts, the matrix `A^{-1}` of doubled cut
/// integrals, its inverse `A`, and the normalized-basis coefficients.
///
/// `normalized[k]` holds the coefficients of the k-th normalized
/// differential over the raw basis (the k-th column of `A`), so that
/// `2 int_{l_i} (normalized_k) = delta_{ik}`.
#[derive(Debug, Clone)]
pub struct PeriodData {
    pub cuts: Vec<Cut>,
    pub ainv: CMatrix,
    pub a: CMatrix,
    pub normalized: Vec<Vec<Complex64>>,
}

/// All x-values over which the fibers degenerate: base branch points,
/// spectral branch points and singular points. Paths are routed around
/// these.
pub fn special_x(m: &SpectralModel, h: &HamiltonianVector) -> Result<Vec<Complex64>> {
    let mut xs: Vec<Complex64> = m.base().finite_branch_x().to_vec();
    for p in branch_points(m, h, 1e-9)? {
        if xs.iter().all(|&q| (q - p.x).norm() > 1e-9) {
            xs.push(p.x);
        }
    }
    for p in singular_points(m, h)? {
        if xs.iter().all(|&q| (q - p.x).norm() > 1e-9) {
            xs.push(p.x);
        }
    }
    Ok(xs)
}

fn clearance_for(specials: &[Complex64], a: Complex64, b: Complex64) -> f64 {
    let mut min_gap = f64::INFINITY;
    for (i, &p) in specials.iter().enumerate() {
        for &q in specials.iter().skip(i + 1) {
            let d = (p - q).norm();
            if d > 1e-9 {
                min_gap = min_gap.min(d);
            }
        }
    }
    let span = (a - b).norm().max(1.0);
    (0.3 * min_gap).min(0.2 * span)
}

/// Build a cut between two special x-values, routed around the remaining
/// special points, with deterministic sheet seeds probed near `a`.
pub fn build_cut(
    m: &SpectralModel,
    h: &HamiltonianVector,
    kind: CutKind,
    a: Complex64,
    b: Complex64,
    y_sheet: u8,
    specials: &[Complex64],
) -> Result<Cut> {
    let clearance = clearance_for(specials, a, b);
    let obstacles: Vec<Complex64> = specials
        .iter()
        .copied()
        .filter(|&p| (p - a).norm() > 1e-9 && (p - b).norm() > 1e-9)
        .collect();
    let path = route(a, b, &obstacles, clearance);
    // Probe the fiber a short way along the path to fix the tracked sheet.
    let anchor = a + (path.nodes[1] - a) * 0.05;
    let seed_y = m.base().lift(anchor, y_sheet).y;
    let roots = m.fiber_roots(h, anchor, seed_y)?;
    let seed_lambda = match kind {
        // For a spectral cut, follow one member of the colliding pair:
        // deterministically the root of largest modulus among those
        // nearest the collision value at `a`.
        CutKind::Spectral => {
            let pa = m.fiber_poly(h, a, m.base().lift(a, y_sheet).y);
            let target = nearest_double_root(&pa)?;
            let mut near: Vec<Complex64> = roots.clone();
            near.sort_by(|p, q| (p - target).norm().total_cmp(&(q - target).norm()));
            // The two nearest are the colliding pair; pick the
            // lexicographically larger for determinism.
            let mut pair = [near[0], near[1]];
            pair.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
            pair[1]
        }
        // For a base cut any lambda-sheet works; pick lexicographically.
        CutKind::Base => {
            let mut sorted = roots.clone();
            sorted.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
            sorted[0]
        }
    };
    Ok(Cut {
        kind,
        a,
        b,
        path,
        seed_y,
        seed_lambda,
    })
}

/// The value where two fiber roots collide (a double root of the fiber
/// polynomial), located from the derivative's roots.
fn nearest_double_root(p: &crate::algebra::CPoly) -> Result<Complex64> {
    let dp = p.derivative();
    let crit = crate::algebra::poly_roots(&dp, 1e-8)?;
    crit.into_iter()
        .min_by(|u, v| p.eval(*u).norm().total_cmp(&p.eval(*v).norm()))
        .ok_or_else(|| Error::BadInput("fiber polynomial has no critical points".into()))
}

/// Doubled integrals of every differential over one cut.
pub fn cut_integrals(
    m: &SpectralModel,
    h: &HamiltonianVector,
    cut: &Cut,
    diffs: &[AngleDifferential],
    cfg: QuadConfig,
) -> Result<Vec<Complex64>> {
    let integrator = PathIntegrator::new(m, h, cfg);
    let seed = TrackSeed::Near {
        y: cut.seed_y,
        lambda: cut.seed_lambda,
    };
    let f = |x: Complex64, y: Complex64, l: Complex64| {
        crate::diffs::basis_values(m, h, diffs, x, y, l)
    };
    let (vals, _) = integrator.integrate_vec(&cut.path, seed, EndpointSingularities::both(), &f)?;
    Ok(vals.into_iter().map(|v| 2.0 * v).collect())
}

/// Assemble the period data over the given cuts.
pub fn period_matrix(
    m: &SpectralModel,
    h: &HamiltonianVector,
    cuts: Vec<Cut>,
    diffs: &[AngleDifferential],
    cfg: QuadConfig,
) -> Result<PeriodData> {
    let n = diffs.len();
    if cuts.len() != n {
        return Err(Error::BadInput(format!(
            "{} cuts for {} differentials",
            cuts.len(),
            n
        )));
    }
    let mut ainv = CMatrix::zeros(n, n);
    for (i, cut) in cuts.iter().enumerate() {
        let row = cut_integrals(m, h, cut, diffs, cfg)?;
        for (k, v) in row.into_iter().enumerate() {
            ainv[(i, k)] = v;
        }
    }
    let a = invert(&ainv).map_err(|_| Error::SingularPeriodMatrix)?;
    let cond = ainv.norm_inf() * a.norm_inf();
    if !cond.is_finite() || cond > 1e10 {
        return Err(Error::SingularPeriodMatrix);
    }
    let normalized = (0..n)
        .map(|k| (0..n).map(|mrow| a[(mrow, k)]).collect())
        .collect();
    Ok(PeriodData {
        cuts,
        ainv,
        a,
        normalized,
    })
}

/// Independent re-integration of the normalized basis over the same cuts:
/// returns `max |2 int_{l_i} w_hat_k - delta_{ik}|`. Uses a refined
/// quadrature so the check does not merely replay the original numbers.
pub fn normalization_residual(
    m: &SpectralModel,
    h: &HamiltonianVector,
    pd: &PeriodData,
    diffs: &[AngleDifferential],
    cfg: QuadConfig,
) -> Result<f64> {
    let n = diffs.len();
    let mut worst = 0.0f64;
    for (i, cut) in pd.cuts.iter().enumerate() {
        let raw = cut_integrals(m, h, cut, diffs, cfg)?;
        for k in 0..n {
            let val: Complex64 = pd.normalized[k]
                .iter()
                .zip(&raw)
                .map(|(&c, &v)| c * v)
                .sum();
            let target = if i == k { 1.0 } else { 0.0 };
            worst = worst.max((val - Complex64::new(target, 0.0)).norm());
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Built-in cut choices
// ---------------------------------------------------------------------------

/// The two cut choices for the rank-1 system at genus 2: three cuts among
/// the finite base branch points, or two of those plus the cut connecting
/// the two branch points of the spectral covering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A1CutChoice {
    ThreeVertical,
    TwoVerticalOneHorizontal,
}

/// Candidate base-point pairs ordered by ascending distance with a
/// lexicographic tie-break.
fn base_pair_candidates(m: &SpectralModel) -> Vec<(Complex64, Complex64)> {
    let mut roots: Vec<Complex64> = m.base().finite_branch_x().to_vec();
    roots.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
    let mut pairs = Vec::new();
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            pairs.push((roots[i], roots[j]));
        }
    }
    pairs.sort_by(|u, v| {
        (u.0 - u.1)
            .norm()
            .total_cmp(&(v.0 - v.1).norm())
            .then(u.0.re.total_cmp(&v.0.re))
            .then(u.0.im.total_cmp(&v.0.im))
    });
    pairs
}

/// Greedy selection of `count` rows spanning the best-conditioned
/// subspace: repeatedly take the row with the largest component outside
/// the span of the rows already chosen.
fn greedy_independent_rows(rows: &[Vec<Complex64>], count: usize) -> Result<Vec<usize>> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut ortho: Vec<Vec<Complex64>> = Vec::new();
    for _ in 0..count {
        let mut best: Option<(usize, f64, Vec<Complex64>)> = None;
        for (i, row) in rows.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut v = row.clone();
            for u in &ortho {
                let dot: Complex64 = u.iter().zip(&v).map(|(&a, &b)| a.conj() * b).sum();
                for (vk, uk) in v.iter_mut().zip(u) {
                    *vk -= dot * uk;
                }
            }
            let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |(_, n, _)| norm > *n) {
                best = Some((i, norm, v));
            }
        }
        let (i, norm, mut v) = best.ok_or(Error::SingularPeriodMatrix)?;
        if norm < 1e-12 {
            return Err(Error::SingularPeriodMatrix);
        }
        for c in v.iter_mut() {
            *c /= norm;
        }
        chosen.push(i);
        ortho.push(v);
    }
    Ok(chosen)
}

/// Build the cuts of an A1 genus-2 cut choice. The selection evaluates a
/// deterministic candidate pool and keeps the best-conditioned rows.
pub fn a1_cuts(
    m: &SpectralModel,
    h: &HamiltonianVector,
    choice: A1CutChoice,
    diffs: &[AngleDifferential],
    cfg: QuadConfig,
) -> Result<Vec<Cut>> {
    if m.lie().series != crate::lie::Series::A || m.lie().rank != 1 {
        return Err(Error::UnsupportedSeries(format!(
            "built-in cut choices cover A1, not {}",
            m.lie()
        )));
    }
    let specials = special_x(m, h)?;
    let vertical_needed = match choice {
        A1CutChoice::ThreeVertical => 3,
        A1CutChoice::TwoVerticalOneHorizontal => 2,
    };
    // Integrate a pool of base-cut candidates and keep independent rows.
    let candidates = base_pair_candidates(m);
    let pool: Vec<(Cut, Vec<Complex64>)> = candidates
        .iter()
        .take(6)
        .filter_map(|&(a, b)| {
            let cut = build_cut(m, h, CutKind::Base, a, b, 0, &specials).ok()?;
            let row = cut_integrals(m, h, &cut, diffs, cfg).ok()?;
            Some((cut, row))
        })
        .collect();
    if pool.len() < vertical_needed {
        return Err(Error::SingularPeriodMatrix);
    }
    let rows: Vec<Vec<Complex64>> = pool.iter().map(|(_, r)| r.clone()).collect();
    let mut cuts = Vec::new();
    match choice {
        A1CutChoice::ThreeVertical => {
            for i in greedy_independent_rows(&rows, 3)? {
                cuts.push(pool[i].0.clone());
            }
        }
        A1CutChoice::TwoVerticalOneHorizontal => {
            // The horizontal cut joins the two branch x-values of the
            // spectral covering on a fixed base sheet.
            let bps = branch_points(m, h, 1e-9)?;
            let mut xs: Vec<Complex64> = Vec::new();
            for p in &bps {
                if xs.iter().all(|&q| (q - p.x).norm() > 1e-9) {
                    xs.push(p.x);
                }
            }
            if xs.len() != 2 {
                return Err(Error::NonGeneric(format!(
                    "expected 2 spectral branch x-values, found {}",
                    xs.len()
                )));
            }
            xs.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
            let horizontal = build_cut(m, h, CutKind::Spectral, xs[0], xs[1], 0, &specials)?;
            let hrow = cut_integrals(m, h, &horizontal, diffs, cfg)?;
            let mut all_rows = rows.clone();
            all_rows.push(hrow);
            // Force the horizontal cut in, then the two best vertical rows.
            let hidx = all_rows.len() - 1;
            let mut chosen = vec![hidx];
            let remaining = greedy_with_preselected(&all_rows, &chosen, 3)?;
            chosen = remaining;
            for i in chosen {
                if i == hidx {
                    cuts.push(horizontal.clone());
                } else {
                    cuts.push(pool[i].0.clone());
                }
            }
        }
    }
    Ok(cuts)
}

/// Greedy completion of a preselected row set to `count` rows.
fn greedy_with_preselected(
    rows: &[Vec<Complex64>],
    preselected: &[usize],
    count: usize,
) -> Result<Vec<usize>> {
    let mut chosen: Vec<usize> = preselected.to_vec();
    let mut ortho: Vec<Vec<Complex64>> = Vec::new();
    let orthonormalize = |ortho: &mut Vec<Vec<Complex64>>, row: &[Complex64]| -> f64 {
        let mut v = row.to_vec();
        for u in ortho.iter() {
            let dot: Complex64 = u.iter().zip(&v).map(|(&a, &b)| a.conj() * b).sum();
            for (vk, uk) in v.iter_mut().zip(u) {
                *vk -= dot * uk;
            }
        }
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm >= 1e-12 {
            for c in v.iter_mut() {
                *c /= norm;
            }
            ortho.push(v);
        }
        norm
    };
    for &i in preselected {
        if orthonormalize(&mut ortho, &rows[i]) < 1e-12 {
            return Err(Error::SingularPeriodMatrix);
        }
    }
    while chosen.len() < count {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut v = row.clone();
            for u in &ortho {
                let dot: Complex64 = u.iter().zip(&v).map(|(&a, &b)| a.conj() * b).sum();
                for (vk, uk) in v.iter_mut().zip(u) {
                    *vk -= dot * uk;
                }
            }
            let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if best.map_or(true, |(_, n)| norm > n) {
                best = Some((i, norm));
            }
        }
        let (i, norm) = best.ok_or(Error::SingularPeriodMatrix)?;
        if norm < 1e-12 {
            return Err(Error::SingularPeriodMatrix);
        }
        orthonormalize(&mut ortho, &rows[i]);
        chosen.push(i);
    }
    Ok(chosen)
}

/// Deterministic default cuts for the so(4) system at genus 2: the two
/// spectral cuts joining branch points of equal resolvent type over both
/// base sheets, completed by base cuts to the six needed, filtered for
/// independence.
pub fn d2_cuts(
    m: &SpectralModel,
    h: &HamiltonianVector,
    diffs: &[AngleDifferential],
    cfg: QuadConfig,
) -> Result<Vec<Cut>> {
    if m.lie().series != crate::lie::Series::D || m.lie().rank != 2 {
        return Err(Error::UnsupportedSeries(format!(
            "d2_cuts covers D2, not {}",
            m.lie()
        )));
    }
    let specials = special_x(m, h)?;
    let bps = branch_points(m, h, 1e-9)?;
    let mut xs: Vec<Complex64> = Vec::new();
    for p in &bps {
        if xs.iter().all(|&q| (q - p.x).norm() > 1e-7) {
            xs.push(p.x);
        }
    }
    if xs.len() != 4 {
        return Err(Error::NonGeneric(format!(
            "expected 4 spectral branch x-values, found {}",
            xs.len()
        )));
    }
    // Classify by resolvent type: q - p/2 or q + p/2 vanishing.
    let blocks = &m.layout().blocks;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for &x in &xs {
        let y = m.base().lift(x, 0).y;
        let p = m.block_value(h, &blocks[0], x, y);
        let q = m.block_value(h, &blocks[1], x, y);
        if (q - p / 2.0).norm() <= (q + p / 2.0).norm() {
            plus.push(x);
        } else {
            minus.push(x);
        }
    }
    if plus.len() != 2 || minus.len() != 2 {
        return Err(Error::NonGeneric(
            "branch x-values did not split 2+2 by resolvent type".into(),
        ));
    }
    let mut pool: Vec<Cut> = Vec::new();
    for sheet in 0..2u8 {
        pool.push(build_cut(m, h, CutKind::Spectral, plus[0], plus[1], sheet, &specials)?);
        pool.push(build_cut(m, h, CutKind::Spectral, minus[0], minus[1], sheet, &specials)?);
    }
    for &(a, b) in base_pair_candidates(m).iter().take(4) {
        pool.push(build_cut(m, h, CutKind::Base, a, b, 0, &specials)?);
    }
    let rows: Vec<Vec<Complex64>> = pool
        .iter()
        .map(|cut| cut_integrals(m, h, cut, diffs, cfg))
        .collect::<Result<_>>()?;
    let chosen = greedy_independent_rows(&rows, diffs.len())?;
    Ok(chosen.into_iter().map(|i| pool[i].clone()).collect())
}

// ---------------------------------------------------------------------------
// Angle coordinates
// ---------------------------------------------------------------------------

/// Angle coordinates of a divisor: `phi_j = sum_i int^{P_i} w_j` from the
/// given base point (a fixed point of the involution for A1/B/C) along
/// routed paths. Well-defined modulo the period lattice; the paths are
/// deterministic so repeated calls agree exactly.
pub fn angle_coordinates(
    m: &SpectralModel,
    h: &HamiltonianVector,
    divisor: &SeparatingDivisor,
    base: &SpectralPoint,
    diffs: &[AngleDifferential],
    cfg: QuadConfig,
) -> Result<Vec<Complex64>> {
    let specials = special_x(m, h)?;
    let mut phi = vec![Complex64::default(); diffs.len()];
    for p in &divisor.points {
        let vals = angle_integral_to_base(m, h, p, base, diffs, &specials, cfg, None)?;
        for (acc, v) in phi.iter_mut().zip(&vals) {
            *acc += v;
        }
    }
    Ok(phi)
}

/// `int_{base}^{point} w_j` for every j. The integration tracks from the
/// regular divisor point towards the (singular) base point and negates.
/// An optional waypoint deforms the path within its homotopy class.
#[allow(clippy::too_many_arguments)]
pub fn angle_integral_to_base(
    m: &SpectralModel,
    h: &HamiltonianVector,
    point: &SpectralPoint,
    base: &SpectralPoint,
    diffs: &[AngleDifferential],
    specials: &[Complex64],
    cfg: QuadConfig,
    waypoint: Option<Complex64>,
) -> Result<Vec<Complex64>> {
    let clearance = clearance_for(specials, point.x, base.x);
    let obstacles: Vec<Complex64> = specials
        .iter()
        .copied()
        .filter(|&q| (q - base.x).norm() > 1e-9 && (q - point.x).norm() > 1e-9)
        .collect();
    let path = match waypoint {
        None => route(point.x, base.x, &obstacles, clearance),
        Some(w) => {
            let first = route(point.x, w, &obstacles, clearance);
            let second = route(w, base.x, &obstacles, clearance);
            first.join(&second)
        }
    };
    let integrator = PathIntegrator::new(m, h, cfg);
    let seed = TrackSeed::Exact {
        y: point.y,
        lambda: point.lambda,
    };
    let f = |x: Complex64, y: Complex64, l: Complex64| {
        crate::diffs::basis_values(m, h, diffs, x, y, l)
    };
    let (vals, _) = integrator.integrate_vec(
        &path,
        seed,
        EndpointSingularities {
            start: false,
            end: true,
        },
        &f,
    )?;
    Ok(vals.into_iter().map(|v| -v).collect())
}

// ---------------------------------------------------------------------------
// The so(4) Prym map
// ---------------------------------------------------------------------------

/// Linear combinations applied to the raw differential basis when
/// evaluating Prym integrals.
pub enum BasisWeights<'a> {
    Raw,
    Normalized(&'a PeriodData),
}

fn combined_values(
    m: &SpectralModel,
    h: &HamiltonianVector,
    diffs: &[AngleDifferential],
    weights: &BasisWeights,
    x: Complex64,
    y: Complex64,
    l: Complex64,
) -> Vec<Complex64> {
    let raw = crate::diffs::basis_values(m, h, diffs, x, y, l);
    match weights {
        BasisWeights::Raw => raw,
        BasisWeights::Normalized(pd) => pd
            .normalized
            .iter()
            .map(|row| row.iter().zip(&raw).map(|(&c, &v)| c * v).sum())
            .collect(),
    }
}

/// Integrate the (possibly normalized) basis along a path from an exactly
/// known start point.
pub fn path_integral(
    m: &SpectralModel,
    h: &HamiltonianVector,
    diffs: &[AngleDifferential],
    weights: &BasisWeights,
    path: &XPath,
    start_y: Complex64,
    start_lambda: Complex64,
    cfg: QuadConfig,
) -> Result<(Vec<Complex64>, crate::track::TrackState)> {
    let integrator = PathIntegrator::new(m, h, cfg);
    let f = |x: Complex64, y: Complex64, l: Complex64| {
        combined_values(m, h, diffs, weights, x, y, l)
    };
    integrator.integrate_vec(
        path,
        TrackSeed::Exact {
            y: start_y,
            lambda: start_lambda,
        },
        EndpointSingularities::none(),
        &f,
    )
}

/// The Prym map value `eta(P) = (2 int_{gamma1} w + int_rho w) / 2`,
/// where `gamma1` runs from `Q1` to `P` and `rho` from `Q2 = sigma(Q1)`
/// to `Q1`. Both paths are verified to arrive on the expected sheet.
#[allow(clippy::too_many_arguments)]
pub fn prym_map_so4(
    m: &SpectralModel,
    h: &HamiltonianVector,
    diffs: &[AngleDifferential],
    weights: &BasisWeights,
    p: &SpectralPoint,
    q1: &SpectralPoint,
    rho: &XPath,
    gamma1: &XPath,
    cfg: QuadConfig,
) -> Result<Vec<Complex64>> {
    if (gamma1.start() - q1.x).norm() > 1e-9 || (gamma1.end() - p.x).norm() > 1e-9 {
        return Err(Error::BadInput("gamma1 must run from Q1 to P".into()));
    }
    if (rho.start() - q1.x).norm() > 1e-9 || (rho.end() - q1.x).norm() > 1e-9 {
        return Err(Error::BadInput(
            "rho must run from Q2 = sigma(Q1) back to Q1 (same x)".into(),
        ));
    }
    let (gamma_vals, gamma_end) =
        path_integral(m, h, diffs, weights, gamma1, q1.y, q1.lambda, cfg)?;
    let scale = 1.0 + p.lambda.norm();
    if (gamma_end.y - p.y).norm() > 1e-6 * scale || (gamma_end.lambda - p.lambda).norm() > 1e-6 * scale
    {
        return Err(Error::TrackingLoss {
            x: gamma_end.x,
            detail: "gamma1 does not arrive at P on the requested sheet".into(),
        });
    }
    // rho starts at sigma(Q1): same (x, y), negated lambda.
    let (rho_vals, rho_end) = path_integral(m, h, diffs, weights, rho, q1.y, -q1.lambda, cfg)?;
    if (rho_end.y - q1.y).norm() > 1e-6 * scale || (rho_end.lambda - q1.lambda).norm() > 1e-6 * scale
    {
        return Err(Error::TrackingLoss {
            x: rho_end.x,
            detail: "rho does not arrive at Q1 (is it a sigma-connecting path?)".into(),
        });
    }
    Ok(gamma_vals
        .iter()
        .zip(&rho_vals)
        .map(|(&g, &r)| g + r / 2.0)
        .collect())
}

/// Search for a closed x-loop realizing the involution by monodromy: a
/// path from `sigma(Q1)` back to `Q1`. Composite loops around pairs of
/// spectral branch x-values are tried in deterministic order.
pub fn sigma_connecting_loop(
    m: &SpectralModel,
    h: &HamiltonianVector,
    q1: &SpectralPoint,
    cfg: QuadConfig,
) -> Result<XPath> {
    let specials = special_x(m, h)?;
    let bps = branch_points(m, h, 1e-9)?;
    let mut xs: Vec<Complex64> = Vec::new();
    for p in &bps {
        if xs.iter().all(|&q| (q - p.x).norm() > 1e-7) {
            xs.push(p.x);
        }
    }
    xs.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
    let radius_for = |center: Complex64| {
        let nearest = specials
            .iter()
            .filter(|&&s| (s - center).norm() > 1e-9)
            .map(|&s| (s - center).norm())
            .fold(f64::INFINITY, f64::min);
        (0.3 * nearest).min(0.25)
    };
    let loop_around = |center: Complex64, from: Complex64| -> XPath {
        let r = radius_for(center);
        let obstacles: Vec<Complex64> = specials
            .iter()
            .copied()
            .filter(|&s| (s - center).norm() > 1e-9)
            .collect();
        let dir = (from - center) / (from - center).norm();
        let entry = center + dir * r;
        let approach = route(from, entry, &obstacles, clearance_for(&specials, from, entry));
        let mut circle_nodes: Vec<Complex64> = (0..=24)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / 24.0;
                center + r * dir * Complex64::from_polar(1.0, th)
            })
            .collect();
        let first = circle_nodes[0];
        *circle_nodes.last_mut().unwrap() = first;
        let back = approach.reversed();
        approach
            .join(&XPath::polyline(circle_nodes))
            .join(&back)
    };
    let integrator = PathIntegrator::new(m, h, cfg);
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            if i == j {
                continue;
            }
            let candidate = loop_around(xs[i], q1.x).join(&loop_around(xs[j], q1.x));
            let f = |_x: Complex64, _y: Complex64, _l: Complex64| vec![Complex64::default()];
            let seed = TrackSeed::Exact {
                y: q1.y,
                lambda: -q1.lambda,
            };
            if let Ok((_, end)) = integrator.integrate_vec(
                &candidate,
                seed,
                EndpointSingularities::none(),
                &f,
            ) {
                let scale = 1.0 + q1.lambda.norm();
                if (end.y - q1.y).norm() < 1e-7 * scale
                    && (end.lambda - q1.lambda).norm() < 1e-7 * scale
                {
                    return Ok(candidate);
                }
            }
        }
    }
    Err(Error::TrackingLoss {
        x: q1.x,
        detail: "no composite loop realizes the involution from this point".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffs::differential_basis;
    use crate::lie::LieType;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model(name: &str) -> SpectralModel {
        SpectralModel::new(
            LieType::parse(name).unwrap(),
            sampling::standard_curve(2).unwrap(),
        )
    }

    fn a1_setup(seed: u64) -> (SpectralModel, HamiltonianVector) {
        let m = model("A1");
        let h = sampling::random_hamiltonians(&m, &mut ChaCha8Rng::seed_from_u64(seed));
        (m, h)
    }

    #[test]
    fn a1_three_vertical_periods_normalize() {
        let (m, h) = a1_setup(11);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let cuts = a1_cuts(&m, &h, A1CutChoice::ThreeVertical, &diffs, cfg).unwrap();
        let pd = period_matrix(&m, &h, cuts, &diffs, cfg).unwrap();
        // A * Ainv = I.
        let prod = pd.a.mul_mat(&pd.ainv);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - c(target, 0.0)).norm() < 1e-8);
            }
        }
        let res = normalization_residual(&m, &h, &pd, &diffs, cfg.refined()).unwrap();
        assert!(res < 1e-6, "normalization residual {res}");
    }

    #[test]
    fn a1_mixed_cut_choice_normalizes() {
        let (m, h) = a1_setup(12);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let cuts = a1_cuts(&m, &h, A1CutChoice::TwoVerticalOneHorizontal, &diffs, cfg).unwrap();
        assert_eq!(
            cuts.iter().filter(|c| c.kind == CutKind::Spectral).count(),
            1
        );
        let pd = period_matrix(&m, &h, cuts, &diffs, cfg).unwrap();
        let res = normalization_residual(&m, &h, &pd, &diffs, cfg.refined()).unwrap();
        assert!(res < 1e-6, "normalization residual {res}");
    }

    #[test]
    fn both_choices_give_bases_of_the_same_space() {
        let (m, h) = a1_setup(13);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let pd1 = period_matrix(
            &m,
            &h,
            a1_cuts(&m, &h, A1CutChoice::ThreeVertical, &diffs, cfg).unwrap(),
            &diffs,
            cfg,
        )
        .unwrap();
        let pd2 = period_matrix(
            &m,
            &h,
            a1_cuts(&m, &h, A1CutChoice::TwoVerticalOneHorizontal, &diffs, cfg).unwrap(),
            &diffs,
            cfg,
        )
        .unwrap();
        // Both normalized coefficient matrices are invertible, so the two
        // normalized families span the same 3-dimensional space; the
        // change of basis is finite and nonsingular.
        let t = pd2.a.mul_mat(&invert(&pd1.a).unwrap());
        let det = crate::algebra::determinant(&t);
        assert!(det.norm() > 1e-8 && det.norm() < 1e8, "det {}", det.norm());
    }

    #[test]
    fn cut_integral_consistent_with_loop_integral() {
        // The cycle around a cut equals the doubled segment integral up to
        // orientation: |loop| = |2 int|.
        let (m, h) = a1_setup(14);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let cuts = a1_cuts(&m, &h, A1CutChoice::ThreeVertical, &diffs, cfg).unwrap();
        let cut = &cuts[0];
        let seg = cut_integrals(&m, &h, cut, &diffs, cfg).unwrap();
        // Stadium loop around the same endpoints (straight-chord cuts only).
        if cut.path.nodes.len() == 2 {
            let margin = 0.25 * (cut.b - cut.a).norm().min(0.3);
            let loop_path = XPath::stadium(cut.a, cut.b, margin, 16);
            let integrator = PathIntegrator::new(&m, &h, cfg);
            let x0 = loop_path.start();
            let seed = TrackSeed::Near {
                y: m.base().lift(x0, 0).y,
                lambda: c(1.0, 1.0),
            };
            let f = |x: Complex64, y: Complex64, l: Complex64| {
                crate::diffs::basis_values(&m, &h, &diffs, x, y, l)
            };
            let (loop_vals, end) = integrator
                .integrate_vec(&loop_path, seed, EndpointSingularities::none(), &f)
                .unwrap();
            // The loop closes (trivial monodromy around the pair).
            let start_state = {
                let mut tr = crate::track::Tracker::seed(&m, &h, x0, seed).unwrap();
                tr.step_to(x0).unwrap();
                tr.state()
            };
            assert!((end.y - start_state.y).norm() < 1e-8);
            for (a, b) in loop_vals.iter().zip(&seg) {
                assert!(
                    (a.norm() - b.norm()).abs() < 1e-6 * (1.0 + b.norm()),
                    "loop {} vs 2*segment {}",
                    a.norm(),
                    b.norm()
                );
            }
        }
    }

    #[test]
    fn angle_coordinates_zero_at_base() {
        let (m, h) = a1_setup(15);
        let diffs = differential_basis(&m);
        // Base point: a branch point (lambda = 0, fixed by the involution).
        let base = branch_points(&m, &h, 1e-9).unwrap()[0];
        let divisor = SeparatingDivisor {
            points: vec![base, base, base],
        };
        let phi = angle_coordinates(&m, &h, &divisor, &base, &diffs, QuadConfig::default()).unwrap();
        for v in phi {
            assert!(v.norm() < 1e-9);
        }
    }

    #[test]
    fn angle_coordinates_homotopy_invariant() {
        let (m, h) = a1_setup(16);
        let diffs = differential_basis(&m);
        let base = branch_points(&m, &h, 1e-9).unwrap()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let d = crate::sov::sample_divisor(&m, &h, &mut rng).unwrap();
        let specials = special_x(&m, &h).unwrap();
        let p = &d.points[0];
        let cfg = QuadConfig::default();
        let direct =
            angle_integral_to_base(&m, &h, p, &base, &diffs, &specials, cfg, None).unwrap();
        // A nearby waypoint keeps the path in the same homotopy class.
        let mid = (p.x + base.x) / 2.0;
        let clear = specials
            .iter()
            .map(|&s| (s - mid).norm())
            .fold(f64::INFINITY, f64::min);
        let waypoint = mid + c(0.0, 1.0) * (0.3 * clear);
        let detour =
            angle_integral_to_base(&m, &h, p, &base, &diffs, &specials, cfg, Some(waypoint))
                .unwrap();
        for (a, b) in direct.iter().zip(&detour) {
            assert!(
                (a - b).norm() < 1e-8 * (1.0 + b.norm()),
                "homotopy deviation {}",
                (a - b).norm()
            );
        }
    }

    #[test]
    fn angle_coordinates_shift_by_period_under_cycle() {
        let (m, h) = a1_setup(17);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let cuts = a1_cuts(&m, &h, A1CutChoice::ThreeVertical, &diffs, cfg).unwrap();
        let pd = period_matrix(&m, &h, cuts, &diffs, cfg).unwrap();
        // Integrate the raw basis around the cycle of cut 0 (stadium) from
        // a divisor point, and compare with the Ainv row.
        let cut = &pd.cuts[0];
        if cut.path.nodes.len() != 2 {
            return; // routed with detours; the simple stadium does not apply
        }
        let margin = 0.25 * (cut.b - cut.a).norm().min(0.3);
        let loop_path = XPath::stadium(cut.a, cut.b, margin, 16);
        let integrator = PathIntegrator::new(&m, &h, cfg);
        let seed = TrackSeed::Near {
            y: m.base().lift(loop_path.start(), 0).y,
            lambda: c(1.0, 1.0),
        };
        let f = |x: Complex64, y: Complex64, l: Complex64| {
            crate::diffs::basis_values(&m, &h, &diffs, x, y, l)
        };
        let (cycle_vals, _) = integrator
            .integrate_vec(&loop_path, seed, EndpointSingularities::none(), &f)
            .unwrap();
        // Appending this cycle to any angle path shifts phi by the cycle
        // integrals, which match the Ainv row up to orientation.
        let row: Vec<Complex64> = (0..3).map(|k| pd.ainv[(0, k)]).collect();
        let dplus = cycle_vals
            .iter()
            .zip(&row)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        let dminus = cycle_vals
            .iter()
            .zip(&row)
            .map(|(a, b)| (a + b).norm())
            .fold(0.0f64, f64::max);
        let scale = row.iter().map(|v| v.norm()).fold(1e-12, f64::max);
        assert!(
            dplus.min(dminus) < 1e-6 * scale.max(1.0),
            "cycle vs period row: +{dplus} -{dminus}"
        );
    }

    fn d2_setup(seed: u64) -> (SpectralModel, HamiltonianVector) {
        let m = model("D2");
        let h = sampling::random_hamiltonians(&m, &mut ChaCha8Rng::seed_from_u64(seed));
        (m, h)
    }

    #[test]
    fn sigma_antisymmetry_of_path_integrals() {
        let (m, h) = d2_setup(21);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..3 {
            let x0 = sampling::random_annulus(&mut rng, 0.5, 1.2);
            let x1 = sampling::random_annulus(&mut rng, 0.5, 1.2);
            let xm = sampling::random_annulus(&mut rng, 0.4, 1.3);
            let path = XPath::polyline(vec![x0, xm, x1]);
            let y0 = m.base().lift(x0, 0).y;
            let l0 = m.fiber_roots(&h, x0, y0).unwrap()[0];
            let (fwd, _) =
                path_integral(&m, &h, &diffs, &BasisWeights::Raw, &path, y0, l0, cfg).unwrap();
            let (img, _) =
                path_integral(&m, &h, &diffs, &BasisWeights::Raw, &path, y0, -l0, cfg).unwrap();
            for (a, b) in fwd.iter().zip(&img) {
                assert!(
                    (a + b).norm() < 1e-8 * (1.0 + a.norm()),
                    "sigma antisymmetry broken: {} vs {}",
                    a,
                    b
                );
            }
        }
    }

    #[test]
    fn rho_plus_sigma_rho_vanishes() {
        let (m, h) = d2_setup(23);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let x0 = c(0.55, 0.35);
        let y0 = m.base().lift(x0, 0).y;
        let l0 = m.fiber_roots(&h, x0, y0).unwrap()[0];
        let q1 = SpectralPoint::new(x0, y0, l0);
        let rho = sigma_connecting_loop(&m, &h, &q1, cfg).unwrap();
        // int over rho from sigma(Q1), plus int over rho from sigma of its
        // start state again (the sigma image of the path), must cancel.
        let (v1, end1) =
            path_integral(&m, &h, &diffs, &BasisWeights::Raw, &rho, y0, -l0, cfg).unwrap();
        assert!((end1.lambda - l0).norm() < 1e-7);
        let (v2, _) =
            path_integral(&m, &h, &diffs, &BasisWeights::Raw, &rho, y0, l0, cfg).unwrap();
        for (a, b) in v1.iter().zip(&v2) {
            assert!(
                (a + b).norm() < 1e-8 * (1.0 + a.norm()),
                "rho + sigma(rho) integral nonzero: {}",
                (a + b).norm()
            );
        }
    }

    #[test]
    fn prym_map_trivial_gamma() {
        let (m, h) = d2_setup(24);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let x0 = c(0.6, 0.3);
        let y0 = m.base().lift(x0, 0).y;
        let l0 = m.fiber_roots(&h, x0, y0).unwrap()[1];
        let q1 = SpectralPoint::new(x0, y0, l0);
        let rho = sigma_connecting_loop(&m, &h, &q1, cfg).unwrap();
        // P = Q1 with trivial gamma1: eta = (1/2) int_rho.
        let gamma1 = XPath::polyline(vec![x0, x0]);
        let eta = prym_map_so4(
            &m, &h, &diffs, &BasisWeights::Raw, &q1, &q1, &rho, &gamma1, cfg,
        )
        .unwrap();
        let (rho_vals, _) =
            path_integral(&m, &h, &diffs, &BasisWeights::Raw, &rho, y0, -l0, cfg).unwrap();
        for (e, r) in eta.iter().zip(&rho_vals) {
            assert!((e - r / 2.0).norm() < 1e-10 * (1.0 + r.norm()));
        }
    }

    #[test]
    fn prym_skew_symmetry_via_paper_construction() {
        // 2 eta(sigma P) = int_{sigma(gamma)} w + int_{rho + sigma rho} w
        //                = -2 eta(P).
        let (m, h) = d2_setup(25);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let x0 = c(0.62, 0.28);
        let y0 = m.base().lift(x0, 0).y;
        let l0 = m.fiber_roots(&h, x0, y0).unwrap()[0];
        let q1 = SpectralPoint::new(x0, y0, l0);
        let rho = sigma_connecting_loop(&m, &h, &q1, cfg).unwrap();
        // A target point P reached by a short path.
        let xp = c(0.2, 0.75);
        let gamma1 = route(x0, xp, &special_x(&m, &h).unwrap(), 0.15);
        let (gvals, gend) =
            path_integral(&m, &h, &diffs, &BasisWeights::Raw, &gamma1, y0, l0, cfg).unwrap();
        let p = SpectralPoint::new(gend.x, gend.y, gend.lambda);
        let eta_p = prym_map_so4(
            &m, &h, &diffs, &BasisWeights::Raw, &p, &q1, &rho, &gamma1, cfg,
        )
        .unwrap();
        let _ = gvals;
        // eta(sigma P) along gamma' = sigma(rho) + sigma(gamma1), starting
        // from Q1: track the same x-paths with negated initial lambda
        // relative to their sigma-preimages.
        let (srho_vals, srho_end) =
            path_integral(&m, &h, &diffs, &BasisWeights::Raw, &rho, y0, l0, cfg).unwrap();
        assert!((srho_end.lambda + l0).norm() < 1e-7);
        let (sgamma_vals, sgend) = path_integral(
            &m, &h, &diffs, &BasisWeights::Raw, &gamma1, srho_end.y, srho_end.lambda, cfg,
        )
        .unwrap();
        assert!((sgend.lambda + p.lambda).norm() < 1e-7, "arrived at sigma(P)");
        // eta(sigma P) with gamma1' = sigma(rho)+sigma(gamma1):
        // 2 eta(sigma P) = 2 (int srho + int sgamma) + int rho.
        let (rho_vals, _) =
            path_integral(&m, &h, &diffs, &BasisWeights::Raw, &rho, y0, -l0, cfg).unwrap();
        for k in 0..diffs.len() {
            let eta_sigma_p = srho_vals[k] + sgamma_vals[k] + rho_vals[k] / 2.0;
            assert!(
                (eta_sigma_p + eta_p[k]).norm() < 1e-7 * (1.0 + eta_p[k].norm()),
                "skew-symmetry defect {}",
                (eta_sigma_p + eta_p[k]).norm()
            );
        }
    }

    #[test]
    fn d2_period_normalization() {
        let (m, h) = d2_setup(26);
        let diffs = differential_basis(&m);
        let cfg = QuadConfig::default();
        let cuts = d2_cuts(&m, &h, &diffs, cfg).unwrap();
        assert_eq!(cuts.len(), 6);
        let pd = period_matrix(&m, &h, cuts, &diffs, cfg).unwrap();
        let res = normalization_residual(&m, &h, &pd, &diffs, cfg.refined()).unwrap();
        assert!(res < 1e-6, "normalization residual {res}");
    }
}

//! Hamiltonian dynamics in the separating coordinates: the Poisson
//! structure `{l_i, x_j} = delta_ij y_i`, vector fields of the recovered
//! Hamiltonians via implicit differentiation of the separation relations,
//! adaptive Runge-Kutta flows, and the linear-angle-rate check.
//!
//! The flows are Hamiltonian for `sigma = sum_i dl_i ^ dx_i / y_i`. With
//! the convention `X_H = {H, .}` the angle rates come out as
//! `dphi_m/dt = -delta_{jm}` under the flow of `H_j`; the measured global
//! sign is reported rather than hidden.

use num_complex::Complex64;

use crate::algebra::{invert, CMatrix};
use crate::lie::Series;
use crate::sov::{self, NewtonConfig, SeparatingDivisor};
use crate::spectral::{HamiltonianVector, SpectralModel, SpectralPoint};
use crate::{Error, Result};

/// Ordered phase-space point: the divisor triples with smoothly evolved
/// (sheet-continuous) y-components.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub lambda: Vec<Complex64>,
}

impl PhaseState {
    pub fn from_divisor(d: &SeparatingDivisor) -> PhaseState {
        PhaseState {
            x: d.points.iter().map(|p| p.x).collect(),
            y: d.points.iter().map(|p| p.y).collect(),
            lambda: d.points.iter().map(|p| p.lambda).collect(),
        }
    }

    pub fn to_divisor(&self) -> SeparatingDivisor {
        SeparatingDivisor {
            points: (0..self.len())
                .map(|i| SpectralPoint::new(self.x[i], self.y[i], self.lambda[i]))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Max drift off the base curve, `|y_i^2 - P(x_i)|` (relative).
    pub fn curve_defect(&self, m: &SpectralModel) -> f64 {
        (0..self.len())
            .map(|i| m.base().on_curve_error(self.x[i], self.y[i]))
            .fold(0.0f64, f64::max)
    }
}

/// An observable's partial derivatives at a phase point.
#[derive(Debug, Clone)]
pub struct Observable {
    pub d_x: Vec<Complex64>,
    pub d_lambda: Vec<Complex64>,
}

impl Observable {
    /// The coordinate function `x_i`.
    pub fn coordinate_x(n: usize, i: usize) -> Observable {
        let mut d_x = vec![Complex64::default(); n];
        d_x[i] = Complex64::new(1.0, 0.0);
        Observable {
            d_x,
            d_lambda: vec![Complex64::default(); n],
        }
    }

    /// The coordinate function `lambda_i`.
    pub fn coordinate_lambda(n: usize, i: usize) -> Observable {
        let mut d_lambda = vec![Complex64::default(); n];
        d_lambda[i] = Complex64::new(1.0, 0.0);
        Observable {
            d_x: vec![Complex64::default(); n],
            d_lambda,
        }
    }
}

/// `{f, g} = sum_i y_i (df/dl_i dg/dx_i - df/dx_i dg/dl_i)`.
pub fn poisson_bracket(f: &Observable, g: &Observable, s: &PhaseState) -> Complex64 {
    (0..s.len())
        .map(|i| s.y[i] * (f.d_lambda[i] * g.d_x[i] - f.d_x[i] * g.d_lambda[i]))
        .sum()
}

/// Partial derivatives of every Hamiltonian in the separating coordinates,
/// from implicit differentiation of `R(x_k, y_k, l_k; H(x, l)) = 0`:
/// `dH_j/dx_k = -(M^{-1})_{jk} R'_x(k)` and likewise for `lambda`, with
/// `M_{kj} = dR/dH_j` at point `k`.
#[derive(Debug, Clone)]
pub struct HamiltonianGradients {
    /// `d_x[j][k] = dH_j / dx_k`.
    pub d_x: CMatrix,
    /// `d_lambda[j][k] = dH_j / dl_k`.
    pub d_lambda: CMatrix,
}

impl HamiltonianGradients {
    pub fn observable(&self, j: usize) -> Observable {
        Observable {
            d_x: self.d_x.row(j).to_vec(),
            d_lambda: self.d_lambda.row(j).to_vec(),
        }
    }
}

pub fn hamiltonian_gradients(
    m: &SpectralModel,
    h: &HamiltonianVector,
    s: &PhaseState,
) -> Result<HamiltonianGradients> {
    let n = m.hamiltonian_count();
    if s.len() != n {
        return Err(Error::BadInput(format!(
            "phase state has {} points, expected {}",
            s.len(),
            n
        )));
    }
    let mut rows = Vec::with_capacity(n);
    let mut rx = Vec::with_capacity(n);
    let mut rl = Vec::with_capacity(n);
    for k in 0..n {
        let parts = m.partials(h, s.x[k], s.y[k], s.lambda[k])?;
        rows.push(parts.d_h);
        rx.push(parts.d_x);
        rl.push(parts.d_lambda);
    }
    let mat = CMatrix::from_rows(rows);
    let minv = invert(&mat)?;
    let mut d_x = CMatrix::zeros(n, n);
    let mut d_lambda = CMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            d_x[(j, k)] = -minv[(j, k)] * rx[k];
            d_lambda[(j, k)] = -minv[(j, k)] * rl[k];
        }
    }
    Ok(HamiltonianGradients { d_x, d_lambda })
}

/// Re-solve the Hamiltonians from the current phase point, warm-starting
/// the quadratic (D-series) case.
pub fn resolve_hamiltonians(
    m: &SpectralModel,
    s: &PhaseState,
    warm: &HamiltonianVector,
) -> Result<HamiltonianVector> {
    let d = s.to_divisor();
    if m.lie().series == Series::D {
        let cfg = NewtonConfig {
            max_iter: 30,
            ..NewtonConfig::default()
        };
        Ok(sov::solve_newton(m, &d, warm, cfg)?.candidates.remove(0))
    } else {
        Ok(sov::solve_linear(m, &d)?.candidates.remove(0))
    }
}

// ---------------------------------------------------------------------------
// Flow integration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub max_steps: usize,
    /// Accumulate the angle coordinates along the trajectory.
    pub track_angles: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            dt_initial: 1e-3,
            dt_min: 1e-12,
            max_steps: 200_000,
            track_angles: false,
        }
    }
}

/// Time series of a Hamiltonian flow.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub hamiltonian_index: usize,
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// Hamiltonians re-solved at each stored step.
    pub hamiltonians: Vec<HamiltonianVector>,
    /// Accumulated angle coordinates (when requested), phi(t) - phi(0).
    pub angles: Option<Vec<Vec<Complex64>>>,
    /// The global sign convention of `X_H = {H, .}` in the angle rates.
    pub angle_sign: f64,
}

/// Derivative of the flow of `H_j` at a state, with optional angle rates:
/// `dx_k = y_k dH_j/dl_k`, `dl_k = -y_k dH_j/dx_k`,
/// `dy_k = P'(x_k)/(2 y_k) dx_k`,
/// `dphi_m = sum_k w_m(P_k) dx_k`.
fn flow_derivative(
    m: &SpectralModel,
    j: usize,
    s: &PhaseState,
    warm: &HamiltonianVector,
    track_angles: bool,
) -> Result<(Vec<Complex64>, HamiltonianVector)> {
    let n = s.len();
    let h = resolve_hamiltonians(m, s, warm)?;
    let grads = hamiltonian_gradients(m, &h, s)?;
    let dim = if track_angles { 3 * n + n } else { 3 * n };
    let mut out = vec![Complex64::default(); dim];
    let mut dxs = Vec::with_capacity(n);
    for k in 0..n {
        let y = s.y[k];
        let y_scale = 1.0 + m.base().eval_p(s.x[k]).norm().sqrt();
        if y.norm() < 1e-9 * y_scale {
            return Err(Error::StepCollapse { time: f64::NAN });
        }
        let dx = y * grads.d_lambda[(j, k)];
        let dl = -y * grads.d_x[(j, k)];
        let dy = m.base().eval_dp(s.x[k]) / (2.0 * y) * dx;
        out[k] = dx;
        out[n + k] = dl;
        out[2 * n + k] = dy;
        dxs.push(dx);
    }
    if track_angles {
        for (mrow, slot) in out[3 * n..].iter_mut().enumerate() {
            let mut rate = Complex64::default();
            for k in 0..n {
                let parts = m.partials(&h, s.x[k], s.y[k], s.lambda[k])?;
                rate += parts.d_h[mrow] / (parts.d_lambda * s.y[k]) * dxs[k];
            }
            *slot = rate;
        }
    }
    Ok((out, h))
}

fn state_from_vec(v: &[Complex64], n: usize) -> PhaseState {
    PhaseState {
        x: v[..n].to_vec(),
        y: v[2 * n..3 * n].to_vec(),
        lambda: v[n..2 * n].to_vec(),
    }
}

fn vec_from_state(s: &PhaseState, extra: usize) -> Vec<Complex64> {
    let n = s.len();
    let mut v = Vec::with_capacity(3 * n + extra);
    v.extend_from_slice(&s.x);
    v.extend_from_slice(&s.lambda);
    v.extend_from_slice(&s.y);
    v.extend(std::iter::repeat(Complex64::default()).take(extra));
    v
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate the flow of Hamiltonian `j` from `s0` to `t_end` (which may
/// be negative) with an adaptive embedded Runge-Kutta pair. `h0` must
/// solve the separation relations at `s0`; it warm-starts the per-stage
/// re-solve and (for series D) selects the q-sign branch, which the state
/// alone does not determine. After each accepted step the y-components
/// are projected back onto the curve (`y = +-sqrt(P(x))`, sign by
/// continuity).
pub fn flow(
    m: &SpectralModel,
    h0: &HamiltonianVector,
    s0: &PhaseState,
    j: usize,
    t_end: f64,
    opts: FlowOptions,
) -> Result<FlowTrace> {
    let n = s0.len();
    if j >= m.hamiltonian_count() || n != m.hamiltonian_count() {
        return Err(Error::BadInput(
            "flow: hamiltonian index or state size out of range".into(),
        ));
    }
    let init_residual = sov::divisor_residual(m, h0, &s0.to_divisor());
    if init_residual > 1e-7 {
        return Err(Error::BadInput(format!(
            "flow: h0 does not solve the separation relations (residual {init_residual:.3e})"
        )));
    }
    let extra = if opts.track_angles { n } else { 0 };
    let mut warm = resolve_hamiltonians(m, s0, h0)?;
    let mut v = vec_from_state(s0, extra);
    let mut t = 0.0f64;
    let direction = if t_end >= 0.0 { 1.0 } else { -1.0 };
    let mut dt = opts.dt_initial.min(t_end.abs().max(1e-30)) * direction;

    let mut times = vec![0.0];
    let mut states = vec![s0.clone()];
    let mut hamiltonians = vec![warm.clone()];
    let mut angles: Option<Vec<Vec<Complex64>>> = if opts.track_angles {
        Some(vec![vec![Complex64::default(); n]])
    } else {
        None
    };

    let deriv = |state_vec: &[Complex64], warm: &HamiltonianVector| -> Result<(Vec<Complex64>, HamiltonianVector)> {
        let s = state_from_vec(state_vec, n);
        flow_derivative(m, j, &s, warm, opts.track_angles)
    };

    let mut steps = 0usize;
    while (t_end - t) * direction > 1e-14 * t_end.abs().max(1.0) {
        if steps > opts.max_steps {
            return Err(Error::NonConvergence {
                context: "flow: step budget exhausted".into(),
                iterations: steps,
                residual: (t_end - t).abs(),
            });
        }
        steps += 1;
        if (t + dt - t_end) * direction > 0.0 {
            dt = t_end - t;
        }
        // Runge-Kutta stages.
        let mut k: Vec<Vec<Complex64>> = Vec::with_capacity(7);
        let mut stage_warm = warm.clone();
        let mut failed = false;
        for stage in 0..7 {
            let mut arg = v.clone();
            for (si, kk) in k.iter().enumerate() {
                let a = DP_A[stage][si];
                if a != 0.0 {
                    for (ai, ki) in arg.iter_mut().zip(kk) {
                        *ai += dt * a * ki;
                    }
                }
            }
            let _ = DP_C[stage];
            match deriv(&arg, &stage_warm) {
                Ok((d, hh)) => {
                    stage_warm = hh;
                    k.push(d);
                }
                Err(Error::StepCollapse { .. }) | Err(Error::SingularMatrix) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            dt *= 0.5;
            if dt.abs() < opts.dt_min {
                return Err(Error::StepCollapse { time: t });
            }
            continue;
        }
        let mut v5 = v.clone();
        let mut v4 = v.clone();
        for (si, kk) in k.iter().enumerate() {
            for i in 0..v.len() {
                v5[i] += dt * DP_B5[si] * kk[i];
                v4[i] += dt * DP_B4[si] * kk[i];
            }
        }
        let mut err = 0.0f64;
        for i in 0..v.len() {
            let scale = opts.abs_tol + opts.rel_tol * v[i].norm().max(v5[i].norm());
            err = err.max((v5[i] - v4[i]).norm() / scale);
        }
        if err <= 1.0 {
            t += dt;
            v = v5;
            // Project y back onto the curve, sign by continuity.
            for i in 0..n {
                let yi = v[2 * n + i];
                let ys = m.base().eval_p(v[i]).sqrt();
                v[2 * n + i] = if (ys - yi).norm() <= (ys + yi).norm() {
                    ys
                } else {
                    -ys
                };
            }
            let s = state_from_vec(&v, n);
            warm = resolve_hamiltonians(m, &s, &warm)?;
            times.push(t);
            states.push(s);
            hamiltonians.push(warm.clone());
            if let Some(acc) = &mut angles {
                acc.push(v[3 * n..].to_vec());
            }
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        dt *= factor;
        if dt.abs() < opts.dt_min {
            return Err(Error::StepCollapse { time: t });
        }
    }
    Ok(FlowTrace {
        hamiltonian_index: j,
        times,
        states,
        hamiltonians,
        angles,
        angle_sign: -1.0,
    })
}

/// Result of the angle-rate measurement along a flow trace.
#[derive(Debug, Clone)]
pub struct AngleRateReport {
    /// Fitted complex rates `dphi_m/dt`.
    pub rates: Vec<Complex64>,
    /// The measured global sign: rates approximate `sign * delta_{jm}`.
    pub sign: f64,
    /// `max_m |rate_m - sign * delta_{jm}|`.
    pub max_deviation: f64,
}

/// Check that the angle coordinates evolve linearly with unit rate in the
/// conjugate slot and stay constant elsewhere.
pub fn angle_rate_check(trace: &FlowTrace, j: usize) -> Result<AngleRateReport> {
    let angles = trace
        .angles
        .as_ref()
        .ok_or_else(|| Error::BadInput("trace was run without angle tracking".into()))?;
    let t_total = trace.times.last().copied().unwrap_or(0.0) - trace.times[0];
    if t_total == 0.0 {
        return Ok(AngleRateReport {
            rates: vec![Complex64::default(); angles[0].len()],
            sign: trace.angle_sign,
            max_deviation: 0.0,
        });
    }
    let first = &angles[0];
    let last = angles.last().unwrap();
    let rates: Vec<Complex64> = last
        .iter()
        .zip(first)
        .map(|(a, b)| (a - b) / t_total)
        .collect();
    let sign = trace.angle_sign;
    let max_deviation = rates
        .iter()
        .enumerate()
        .map(|(mrow, r)| {
            let target = if mrow == j {
                Complex64::new(sign, 0.0)
            } else {
                Complex64::default()
            };
            (r - target).norm()
        })
        .fold(0.0f64, f64::max);
    Ok(AngleRateReport {
        rates,
        sign,
        max_deviation,
    })
}

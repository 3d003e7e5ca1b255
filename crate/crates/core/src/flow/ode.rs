//! Explicit Runge–Kutta kernels for autonomous systems `ẋ = f(x)`.

use crate::error::{Error, Result};
use crate::scalar::Real;

fn axpy<S: Real>(x: &[S], h: S, terms: &[(f64, &[S])]) -> Vec<S> {
    let mut out = x.to_vec();
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        let ch = h * S::from_f64(c);
        for (o, &kv) in out.iter_mut().zip(k) {
            *o += ch * kv;
        }
    }
    out
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<S: Real>(f: &mut impl FnMut(&[S]) -> Result<Vec<S>>, x: &[S], h: S) -> Result<Vec<S>> {
    let k1 = f(x)?;
    let k2 = f(&axpy(x, h, &[(0.5, &k1)]))?;
    let k3 = f(&axpy(x, h, &[(0.5, &k2)]))?;
    let k4 = f(&axpy(x, h, &[(1.0, &k3)]))?;
    Ok(axpy(x, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]))
}

// Dormand–Prince 5(4) tableau; stage times are not needed for autonomous systems.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Step-size controller settings for [`Rk45`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10 }
    }
}

/// Adaptive Dormand–Prince 4(5) with a PI step-size controller.
#[derive(Clone, Debug)]
pub struct Rk45 {
    pub tol: Tolerances,
    pub h: f64,
    err_prev: f64,
}

impl Rk45 {
    const SAFETY: f64 = 0.9;
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;

    pub fn new(tol: Tolerances, h0: f64) -> Self {
        Self { tol, h: h0, err_prev: 1.0 }
    }

    /// Advances from `t` by one accepted step that does not pass `t_end`.
    /// Returns the new time and state.
    pub fn step<S: Real>(
        &mut self,
        f: &mut impl FnMut(&[S]) -> Result<Vec<S>>,
        t: f64,
        x: &[S],
        t_end: f64,
    ) -> Result<(f64, Vec<S>)> {
        let mut k: Vec<Vec<S>> = Vec::with_capacity(7);
        let k1 = f(x)?;
        loop {
            let h = self.h.min(t_end - t);
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            let hs = S::from_f64(h);
            k.clear();
            k.push(k1.clone());
            for s in 1..7 {
                let terms: Vec<(f64, &[S])> = (0..s).map(|j| (A[s][j], k[j].as_slice())).collect();
                let stage = f(&axpy(x, hs, &terms))?;
                k.push(stage);
            }
            // The last stage sits at the fifth-order solution (FSAL).
            let terms: Vec<(f64, &[S])> = (0..6).map(|j| (A[6][j], k[j].as_slice())).collect();
            let x_new = axpy(x, hs, &terms);
            let err_terms: Vec<(f64, &[S])> = (0..7).map(|j| (E[j], k[j].as_slice())).collect();
            let err_vec = axpy(&vec![S::zero(); x.len()], hs, &err_terms);
            let err = (x
                .iter()
                .zip(&x_new)
                .zip(&err_vec)
                .map(|((a, b), e)| {
                    let sc = self.tol.atol + self.tol.rtol * a.to_f64().abs().max(b.to_f64().abs());
                    (e.to_f64() / sc).powi(2)
                })
                .sum::<f64>()
                / x.len().max(1) as f64)
                .sqrt();
            if !err.is_finite() {
                self.h = h * 0.2;
                continue;
            }
            if err <= 1.0 {
                let fac = if err == 0.0 {
                    5.0
                } else {
                    Self::SAFETY * err.powf(-Self::ALPHA) * self.err_prev.powf(Self::BETA)
                };
                self.err_prev = err.max(1e-4);
                let t_new = if h == t_end - t { t_end } else { t + h };
                self.h = h * fac.clamp(0.2, 5.0);
                return Ok((t_new, x_new));
            }
            self.h = h * (Self::SAFETY * err.powf(-0.2)).max(0.2);
        }
    }
}

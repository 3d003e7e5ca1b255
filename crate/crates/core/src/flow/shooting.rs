use std::thread;

use super::{flow_map, integrate, IntegratorConfig, TrajectoryLog};
use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf, Matrix};
use crate::quasivel::MechanicalSystem;
use crate::reduction::ReducedProblem;
use crate::skinner_rusk::W1State;

/// Two-point boundary data for the optimal control problem and the Newton
/// settings used to solve it.
///
/// The unknowns are the initial `(ẏ^a, p, p̃_α)`, `2n` numbers in that order,
/// matched against the `2n` terminal conditions on `(q, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BvpSpec {
    pub q0: Vec<f64>,
    pub y0: Vec<f64>,
    pub qf: Vec<f64>,
    pub yf: Vec<f64>,
    pub guess: Vec<f64>,
    pub max_iter: usize,
    /// Converged when `max |terminal mismatch| ≤ residual_tol`.
    pub residual_tol: f64,
    /// Relative central-difference step for the shooting Jacobian.
    pub fd_step: f64,
}

impl BvpSpec {
    /// Zero initial guess, 50 iterations, tolerance `1e-10`, step `1e-6`.
    pub fn new(q0: Vec<f64>, y0: Vec<f64>, qf: Vec<f64>, yf: Vec<f64>) -> Self {
        let n = q0.len();
        Self { q0, y0, qf, yf, guess: vec![0.0; 2 * n], max_iter: 50, residual_tol: 1e-10, fd_step: 1e-6 }
    }

    pub fn with_guess(mut self, guess: Vec<f64>) -> Self {
        self.guess = guess;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, v, len) in [
            ("q0", &self.q0, n),
            ("y0", &self.y0, n),
            ("qf", &self.qf, n),
            ("yf", &self.yf, n),
            ("guess", &self.guess, 2 * n),
        ] {
            if v.len() != len {
                return Err(Error::Dimension(format!("{name} must have {len} entries, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        if !(self.residual_tol > 0.0) || !(self.fd_step > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("residual_tol, fd_step and max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ShootOutcome {
    pub log: TrajectoryLog<f64>,
    pub converged: bool,
    /// Final `max |terminal mismatch|`.
    pub residual: f64,
    pub iterations: usize,
    pub initial: W1State<f64>,
}

const MAX_BACKTRACKS: usize = 20;
/// Above this condition number the Newton step falls back to regularized
/// least squares.
const CONDITION_LIMIT: f64 = 1e10;

fn initial_state(spec: &BvpSpec, m: usize, z: &[f64]) -> Result<W1State<f64>> {
    let n = spec.q0.len();
    W1State::new(spec.q0.clone(), spec.y0.clone(), z[..m].to_vec(), z[m..m + n].to_vec(), z[m + n..].to_vec())
}

fn mismatch<M: MechanicalSystem>(rp: &ReducedProblem<M>, spec: &BvpSpec, cfg: &IntegratorConfig, z: &[f64]) -> Result<Vec<f64>> {
    let end = flow_map(rp, &initial_state(spec, rp.actuated(), z)?, cfg)?;
    Ok(end.q.iter().zip(&spec.qf).chain(end.y.iter().zip(&spec.yf)).map(|(a, b)| a - b).collect())
}

fn jacobian<M: MechanicalSystem>(rp: &ReducedProblem<M>, spec: &BvpSpec, cfg: &IntegratorConfig, z: &[f64]) -> Result<Matrix<f64>> {
    let k = z.len();
    let steps: Vec<f64> = z.iter().map(|v| spec.fd_step * v.abs().max(1.0)).collect();
    let cols: Vec<Result<Vec<f64>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..k)
            .map(|i| {
                let h = steps[i];
                s.spawn(move || {
                    let mut zp = z.to_vec();
                    zp[i] += h;
                    let mut zm = z.to_vec();
                    zm[i] -= h;
                    let (rp_, rm_) = (mismatch(rp, spec, cfg, &zp)?, mismatch(rp, spec, cfg, &zm)?);
                    Ok(rp_.iter().zip(&rm_).map(|(a, b)| (a - b) / (2.0 * h)).collect())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("shooting thread panicked")).collect()
    });
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_fn(k, k, |r, c| cols[c][r]))
}

/// Newton step `J δ = −r`, or the Tikhonov-regularized least-squares step
/// `(JᵀJ + λI) δ = −Jᵀr` when `J` is singular or badly conditioned. The
/// latter gives a near minimum-norm step when some unknowns do not affect
/// the terminal state at all.
fn newton_step(j: &Matrix<f64>, r: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = r.iter().map(|v| -v).collect();
    if j.condition() < CONDITION_LIMIT {
        if let Some(d) = j.solve(&neg) {
            return d;
        }
    }
    let jt = j.transpose();
    let mut a = jt.matmul(j);
    let k = a.nrows();
    let scale = (0..k).fold(0.0_f64, |m, i| m.max(a[(i, i)])).max(f64::MIN_POSITIVE);
    for i in 0..k {
        a[(i, i)] += 1e-12 * scale;
    }
    a.solve(&jt.mul_vec(&neg)).unwrap_or_else(|| vec![0.0; k])
}

/// Single shooting with a central-difference Jacobian and backtracking.
///
/// On convergence the extremal is integrated once more with full recording.
/// Otherwise returns [`Error::NoConvergence`] with the best mismatch seen, or
/// the error of the offending trial if the iteration could not even start.
pub fn shoot<M: MechanicalSystem>(rp: &ReducedProblem<M>, spec: &BvpSpec, cfg: &IntegratorConfig) -> Result<ShootOutcome> {
    cfg.validate()?;
    spec.validate(rp.dim())?;
    let mut z = spec.guess.clone();
    let mut r = mismatch(rp, spec, cfg, &z)?;
    let mut iterations = 0;
    while norm_inf(&r) > spec.residual_tol && iterations < spec.max_iter {
        iterations += 1;
        let j = jacobian(rp, spec, cfg, &z)?;
        let delta = newton_step(&j, &r);
        let mut t = 1.0;
        let mut accepted = None;
        let mut last_err = None;
        let mut any_ok = false;
        for _ in 0..=MAX_BACKTRACKS {
            let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            match mismatch(rp, spec, cfg, &trial) {
                Ok(rt) if norm2(&rt) < norm2(&r) || norm_inf(&rt) <= spec.residual_tol => {
                    accepted = Some((trial, rt));
                    break;
                }
                Ok(_) => any_ok = true,
                Err(e) => last_err = Some(e),
            }
            t *= 0.5;
        }
        match (accepted, last_err) {
            (Some((zt, rt)), _) => {
                z = zt;
                r = rt;
            }
            // every trial along the step failed: report the offending trial
            (None, Some(e)) if !any_ok => return Err(e),
            (None, _) => break,
        }
    }
    let residual = norm_inf(&r);
    if residual > spec.residual_tol {
        return Err(Error::NoConvergence { iterations, best_residual: residual });
    }
    let initial = initial_state(spec, rp.actuated(), &z)?;
    let log = integrate(rp, &initial, cfg)?;
    Ok(ShootOutcome { log, converged: true, residual, iterations, initial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::PointMassLq;

    #[test]
    fn equilibrium_converges_immediately() {
        let rp = ReducedProblem::new(PointMassLq).unwrap();
        let spec = BvpSpec::new(vec![0.3, -0.1], vec![0.0; 2], vec![0.3, -0.1], vec![0.0; 2]);
        let out = shoot(&rp, &spec, &IntegratorConfig::rk4(0.0, 1.0, 1e-2)).unwrap();
        assert!(out.converged && out.iterations <= 2);
        assert_eq!(out.log.total_cost(), 0.0);
        assert!(out.log.controls.iter().all(|u| u[0] == 0.0));
    }

    #[test]
    fn point_mass_rest_to_rest() {
        let rp = ReducedProblem::new(PointMassLq).unwrap();
        let spec = BvpSpec::new(vec![0.0; 2], vec![0.0; 2], vec![1.0, 0.0], vec![0.0; 2]);
        let out = shoot(&rp, &spec, &IntegratorConfig::rk4(0.0, 1.0, 1e-2)).unwrap();
        assert!(out.residual <= 1e-10);
        for (t, u) in out.log.times.iter().zip(&out.log.controls) {
            assert!((u[0] - (6.0 - 12.0 * t)).abs() < 1e-6);
        }
        assert!((out.log.total_cost() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn unreachable_target_reports_no_convergence() {
        // The auxiliary velocity never changes, so y₂(tf) = 1 is unreachable from 0.
        let rp = ReducedProblem::new(PointMassLq).unwrap();
        let spec = BvpSpec { max_iter: 5, ..BvpSpec::new(vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], vec![0.0, 1.0]) };
        assert!(matches!(
            shoot(&rp, &spec, &IntegratorConfig::rk4(0.0, 1.0, 0.1)),
            Err(Error::NoConvergence { best_residual, .. }) if (best_residual - 1.0).abs() < 1e-12
        ));
    }

    #[test]
    fn spec_validation() {
        let spec = BvpSpec::new(vec![0.0; 2], vec![0.0; 2], vec![1.0, 0.0], vec![0.0; 2]);
        assert!(spec.validate(2).is_ok());
        assert!(spec.validate(3).is_err());
        assert!(BvpSpec { fd_step: 0.0, ..spec.clone() }.validate(2).is_err());
        assert!(spec.with_guess(vec![0.0; 3]).validate(2).is_err());
    }
}

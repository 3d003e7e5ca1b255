//! Invariant checks run by `quasicontrol check` against the configured system.

use quasicontrol::quasivel::{quasi_to_velocity, structure_coefficients, velocity_to_quasi};
use quasicontrol::skinner_rusk::{lift_to_w1, presymplectic_residual, primary_constraints, regularity};
use quasicontrol::{
    integrate, shoot, BvpSpec, DiffConfig, IntegratorConfig, MechanicalSystem, ReducedProblem, Result, W1StateF64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    /// Set when the check could not be evaluated.
    pub error: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.measured <= self.tolerance
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => format!("{verdict} {}: {e}", self.name),
            None => format!("{verdict} {}: {:.3e} (tolerance {:.1e})", self.name, self.measured, self.tolerance),
        }
    }
}

fn outcome(name: &'static str, tolerance: f64, r: Result<f64>) -> CheckOutcome {
    match r {
        Ok(v) if v.is_nan() => CheckOutcome { name, measured: v, tolerance, error: Some("NaN".into()) },
        Ok(measured) => CheckOutcome { name, measured, tolerance, error: None },
        Err(e) => CheckOutcome { name, measured: f64::INFINITY, tolerance, error: Some(e.to_string()) },
    }
}

const SAMPLES: usize = 10;
const FD_STEP: f64 = 1e-6;

fn samples(w: &W1StateF64, rng: &mut ChaCha8Rng) -> Vec<W1StateF64> {
    let (n, m) = (w.n(), w.m());
    let base = w.to_vec();
    (0..SAMPLES)
        .map(|_| {
            let x: Vec<f64> = base.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
            W1StateF64::from_slice(n, m, &x).expect("perturbed state has the right shape")
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn frame_round_trip<M: MechanicalSystem>(sys: &M, states: &[W1StateF64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for w in states {
        let v = quasi_to_velocity(sys, &w.q, &w.y);
        worst = worst.max(max_abs_diff(&velocity_to_quasi(sys, &w.q, &v)?, &w.y));
    }
    Ok(worst)
}

/// `[X_A, X_B] = DX_B·X_A − DX_A·X_B` with `DX` by central differences,
/// expressed back in the frame and compared with the library coefficients.
fn bracket_oracle<M: MechanicalSystem>(sys: &M, states: &[W1StateF64]) -> Result<f64> {
    let n = sys.dim();
    let mut worst: f64 = 0.0;
    for w in states {
        let q = &w.q;
        let x = sys.frame(q);
        let dx: Vec<_> = (0..n)
            .map(|d| {
                let (mut qp, mut qm) = (q.clone(), q.clone());
                qp[d] += FD_STEP;
                qm[d] -= FD_STEP;
                let (fp, fm) = (sys.frame(&qp), sys.frame(&qm));
                quasicontrol::Matrix::from_fn(n, n, |i, j| (fp[(i, j)] - fm[(i, j)]) / (2.0 * FD_STEP))
            })
            .collect();
        let lib = structure_coefficients(sys, q, &DiffConfig::dual())?;
        for a in 0..n {
            for b in 0..n {
                let bracket: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|d| dx[d][(i, b)] * x[(d, a)] - dx[d][(i, a)] * x[(d, b)]).sum())
                    .collect();
                let c = velocity_to_quasi(sys, q, &bracket)?;
                for (dd, cv) in c.iter().enumerate() {
                    worst = worst.max((cv - lib.get(dd, a, b)).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn presymplectic<M: MechanicalSystem>(rp: &ReducedProblem<M>, states: &[W1StateF64]) -> Result<f64> {
    states.iter().try_fold(0.0_f64, |m, w| Ok(m.max(presymplectic_residual(rp, w)?)))
}

/// `∂φ_a/∂ẏ^b` by central differences on `W₀` against `−R_ab`.
fn regularity_jacobian<M: MechanicalSystem>(rp: &ReducedProblem<M>, states: &[W1StateF64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for w in states {
        let r = regularity(rp, w)?.r;
        let w0 = lift_to_w1(rp, w)?;
        for b in 0..w.m() {
            let (mut wp, mut wm) = (w0.clone(), w0.clone());
            wp.ydot_a[b] += FD_STEP;
            wm.ydot_a[b] -= FD_STEP;
            let (fp, fm) = (primary_constraints(rp, &wp)?, primary_constraints(rp, &wm)?);
            for a in 0..w.m() {
                let d = (fp[a] - fm[a]) / (2.0 * FD_STEP);
                worst = worst.max((d + r[(a, b)]).abs());
            }
        }
    }
    Ok(worst)
}

/// Shoots the rest-to-rest unit transfer of the point mass and compares with
/// the hand-solved control `u = 6 − 12t` and cost 6.
fn lq_closed_form<M: MechanicalSystem>(rp: &ReducedProblem<M>) -> Result<(f64, f64)> {
    let spec = BvpSpec::new(vec![0.0; 2], vec![0.0; 2], vec![1.0, 0.0], vec![0.0; 2]);
    let out = shoot(rp, &spec, &IntegratorConfig::rk4(0.0, 1.0, 1e-2))?;
    let u_err = out.log.times.iter().zip(&out.log.controls).fold(0.0_f64, |m, (t, u)| m.max((u[0] - (6.0 - 12.0 * t)).abs()));
    Ok((u_err, (out.log.total_cost() - 6.0).abs()))
}

/// Runs every check; `lq` adds the point-mass closed-form comparison.
pub fn run<M: MechanicalSystem>(
    rp: &ReducedProblem<M>,
    state: &W1StateF64,
    cfg: &IntegratorConfig,
    seed: u64,
    lq: bool,
) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = vec![state.clone()];
    states.extend(samples(state, &mut rng));

    let mut out = vec![
        outcome("frame round trip", 1e-10, frame_round_trip(&rp.sys, &states)),
        outcome("structure coefficients vs bracket oracle", 1e-6, bracket_oracle(&rp.sys, &states)),
        outcome("presymplectic equation residual", 1e-6, presymplectic(rp, &states)),
        outcome("regularity matrix as constraint Jacobian", 1e-6, regularity_jacobian(rp, &states)),
    ];
    match integrate(rp, state, cfg) {
        Ok(log) => {
            let halted = log.halted.as_ref().map(|e| e.to_string());
            out.push(CheckOutcome {
                name: "constraint preservation",
                measured: log.max_constraint_residual(),
                tolerance: 1e-6,
                error: halted.clone(),
            });
            out.push(CheckOutcome {
                name: "hamiltonian preservation",
                measured: log.hamiltonian_drift(),
                tolerance: 1e-8,
                error: halted,
            });
        }
        Err(e) => {
            out.push(outcome("constraint preservation", 1e-6, Err(e.clone())));
            out.push(outcome("hamiltonian preservation", 1e-8, Err(e)));
        }
    }
    if lq {
        match lq_closed_form(rp) {
            Ok((u, c)) => {
                out.push(outcome("LQ control closed form", 1e-6, Ok(u)));
                out.push(outcome("LQ cost closed form", 1e-4, Ok(c)));
            }
            Err(e) => out.push(outcome("LQ closed form", 1e-6, Err(e))),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use quasicontrol::{PlanarRigidBody, PlanarRigidBodyParams, PointMassLq};

    fn rest(n: usize, m: usize) -> W1StateF64 {
        W1StateF64::from_slice(n, m, &vec![0.1; 4 * n]).unwrap()
    }

    #[test]
    fn rigid_body_passes() {
        let rp = ReducedProblem::new(PlanarRigidBody::new(PlanarRigidBodyParams::unit()).unwrap()).unwrap();
        let cfg = IntegratorConfig::rk4(0.0, 0.2, 1e-3);
        for c in run(&rp, &rest(3, 2), &cfg, 1, false) {
            assert!(c.passed(), "{}", c.line());
        }
    }

    #[test]
    fn point_mass_passes_with_closed_form() {
        let rp = ReducedProblem::new(PointMassLq).unwrap();
        let res = run(&rp, &rest(2, 1), &IntegratorConfig::rk4(0.0, 1.0, 1e-2), 3, true);
        assert_eq!(res.len(), 8);
        assert!(res.iter().all(CheckOutcome::passed), "{res:?}");
    }

    #[test]
    fn singular_frame_fails() {
        let sys = PlanarRigidBody::with_completion_scale(PlanarRigidBodyParams::unit(), 0.0).unwrap();
        let rp = ReducedProblem::new(sys).unwrap();
        let res = run(&rp, &rest(3, 2), &IntegratorConfig::rk4(0.0, 0.01, 1e-3), 1, false);
        assert!(!res[0].passed());
        assert!(res[0].line().contains("singular"), "{}", res[0].line());
    }
}

//! Reduction of the underactuated optimal control problem to a second-order
//! variational problem with constraints.
//!
//! The unactuated Hamel rows `Φ^α = E_α(q, y, ẏ)` are the constraints; they
//! cut the submanifold `M` out of the second-order tangent bundle. On `M` the
//! coordinates are `(q, y, ẏ^a)` and the unactuated accelerations follow as
//! `ẏ^α = G^α(q, y, ẏ^a)`. The actuated rows give back the controls,
//! `u_a = E_a`, and the cost becomes the Lagrangian `L̃_M = C(q, y, u)`.

use crate::error::{Error, Result};
use crate::linalg::{is_numerically_singular, Matrix};
use crate::numdiff::DiffConfig;
use crate::quasivel::{hamel_linear, HamelLinear, MechanicalSystem, SecondOrderPoint};
use crate::scalar::Real;

/// How `ẏ^α = G^α` is obtained from `Φ^α = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConstraintSolver {
    /// One linear solve against the unactuated block of the velocity Hessian.
    #[default]
    Linear,
    /// Newton iteration on `Φ^α`.
    Newton,
}

/// An underactuated system together with the numerical settings used to
/// build its reduced problem.
#[derive(Clone, Debug)]
pub struct ReducedProblem<M> {
    pub sys: M,
    pub diff: DiffConfig,
    /// Relative threshold: the unactuated block `W` is singular when
    /// `|det W| ≤ tol · max|W|^(n−m)`.
    pub hessian_block_tolerance: f64,
    pub solver: ConstraintSolver,
}

impl<M: MechanicalSystem> ReducedProblem<M> {
    /// Uses dual-number derivatives; every built-in system supports them.
    pub fn new(sys: M) -> Result<Self> {
        crate::quasivel::validate_system(&sys)?;
        Ok(Self { sys, diff: DiffConfig::dual(), hessian_block_tolerance: 1e-10, solver: ConstraintSolver::Linear })
    }

    pub fn with_diff(mut self, diff: DiffConfig) -> Self {
        self.diff = diff;
        self
    }

    pub fn with_solver(mut self, solver: ConstraintSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    pub fn actuated(&self) -> usize {
        self.sys.actuated()
    }

    pub fn unactuated(&self) -> usize {
        self.sys.dim() - self.sys.actuated()
    }
}

/// Everything known at a point `(q, y, ẏ^a)` of `M`.
#[derive(Clone, Debug)]
pub struct MPoint<S> {
    /// `G^α`, the unactuated accelerations.
    pub g: Vec<S>,
    /// Full acceleration `(ẏ^a, G^α)`.
    pub ydot: Vec<S>,
    /// Recovered controls `u_a`.
    pub controls: Vec<S>,
    /// `L̃_M`
    pub ltilde: S,
}

/// `Φ^α(q, y, ẏ)`, the unactuated Hamel residuals. Zero exactly on `M`.
pub fn constraint_values<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, pt: &SecondOrderPoint<S>) -> Result<Vec<S>> {
    let h = hamel_linear(&rp.sys, &pt.q, &pt.y, &rp.diff)?;
    Ok(h.residual(&pt.ydot).split_off(rp.actuated()))
}

/// The actuated residuals `u_a = E_a(q, y, ẏ)`.
pub fn recover_controls<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, pt: &SecondOrderPoint<S>) -> Result<Vec<S>> {
    let h = hamel_linear(&rp.sys, &pt.q, &pt.y, &rp.diff)?;
    let mut e = h.residual(&pt.ydot);
    e.truncate(rp.actuated());
    Ok(e)
}

fn unactuated_block<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, h: &HamelLinear<S>) -> Result<Matrix<S>> {
    let (n, m) = (rp.dim(), rp.actuated());
    let w = h.mass.block(m, n, m, n);
    let det = w.det();
    if is_numerically_singular(&w, det, rp.hessian_block_tolerance) {
        let scale = w.max_abs().powi((n - m) as i32);
        return Err(Error::SingularHessianBlock { det: det.to_f64(), threshold: rp.hessian_block_tolerance * scale });
    }
    Ok(w)
}

fn solve_from_linear<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    h: &HamelLinear<S>,
    ydot_a: &[S],
) -> Result<Vec<S>> {
    let (n, m) = (rp.dim(), rp.actuated());
    if ydot_a.len() != m {
        return Err(Error::Dimension(format!("expected {m} actuated accelerations, got {}", ydot_a.len())));
    }
    let w = unactuated_block(rp, h)?;
    let lu = w.lu().ok_or(Error::SingularHessianBlock { det: 0.0, threshold: 0.0 })?;
    match rp.solver {
        ConstraintSolver::Linear => {
            let rhs: Vec<S> = (m..n)
                .map(|al| {
                    let coupling = (0..m).fold(S::zero(), |acc, b| acc + h.mass[(al, b)] * ydot_a[b]);
                    -(coupling + h.bias[al])
                })
                .collect();
            Ok(lu.solve(&rhs))
        }
        ConstraintSolver::Newton => {
            let mut ydot = ydot_a.to_vec();
            ydot.resize(n, S::zero());
            for _ in 0..50 {
                let phi = h.residual(&ydot).split_off(m);
                let step = lu.solve(&phi);
                for (k, s) in step.iter().enumerate() {
                    ydot[m + k] -= *s;
                }
                let size = step.iter().fold(0.0_f64, |a, s| a.max(s.to_f64().abs()));
                let scale = ydot[m..].iter().fold(1.0_f64, |a, s| a.max(s.to_f64().abs()));
                if size <= 1e-14 * scale {
                    break;
                }
            }
            Ok(ydot.split_off(m))
        }
    }
}

/// `G^α(q, y, ẏ^a)` such that `Φ^α(q, y, (ẏ^a, G^α)) = 0`.
pub fn solve_constraints<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    q: &[S],
    y: &[S],
    ydot_a: &[S],
) -> Result<Vec<S>> {
    let h = hamel_linear(&rp.sys, q, y, &rp.diff)?;
    solve_from_linear(rp, &h, ydot_a)
}

/// Evaluates the constraint solve, the controls and `L̃_M` in one pass.
pub fn m_point<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, q: &[S], y: &[S], ydot_a: &[S]) -> Result<MPoint<S>> {
    let h = hamel_linear(&rp.sys, q, y, &rp.diff)?;
    m_point_from(rp, &h, q, y, ydot_a)
}

/// As [`m_point`], with the Hamel linear form at `(q, y)` already known.
pub(crate) fn m_point_from<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    h: &HamelLinear<S>,
    q: &[S],
    y: &[S],
    ydot_a: &[S],
) -> Result<MPoint<S>> {
    let m = rp.actuated();
    let g = solve_from_linear(rp, &h, ydot_a)?;
    let ydot: Vec<S> = ydot_a.iter().chain(&g).copied().collect();
    let mut controls = h.residual(&ydot);
    controls.truncate(m);
    let ltilde = rp.sys.cost(q, y, &controls);
    if !ltilde.is_finite() {
        return Err(Error::non_finite(&[q, y, ydot_a].concat()));
    }
    Ok(MPoint { g, ydot, controls, ltilde })
}

/// `L̃_M(q, y, ẏ^a) = C(q, y, u(q, y, ẏ^a, G(q, y, ẏ^a)))`.
pub fn tilde_l<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, q: &[S], y: &[S], ydot_a: &[S]) -> Result<S> {
    Ok(m_point(rp, q, y, ydot_a)?.ltilde)
}

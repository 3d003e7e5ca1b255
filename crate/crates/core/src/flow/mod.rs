//! Integration of the `W₁` dynamics, invariant monitors, and single
//! shooting for the two-point boundary value problem.

pub mod ode;
mod shooting;
mod symplectic;

pub use ode::Tolerances;
pub use shooting::{shoot, BvpSpec, ShootOutcome};
pub use symplectic::{monitor_symplecticity, pulled_back_form};

use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::numdiff::DiffConfig;
use crate::quasivel::{controlled_dynamics, MechanicalSystem};
use crate::reduction::{m_point, ReducedProblem};
use crate::scalar::Real;
use crate::skinner_rusk::{field_and_cost, hamiltonian, lift_to_w1, primary_constraints, regularity, W1State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4,
    /// Adaptive Dormand–Prince 4(5).
    Rk45,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for RK4; initial step for RK45.
    pub dt: f64,
    pub tol: Tolerances,
    pub t0: f64,
    pub tf: f64,
    /// Record every k-th step (the last step is always recorded).
    pub save_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { method: Method::Rk4, dt: 1e-3, tol: Tolerances::default(), t0: 0.0, tf: 1.0, save_every: 1 }
    }
}

impl IntegratorConfig {
    pub fn rk4(t0: f64, tf: f64, dt: f64) -> Self {
        Self { method: Method::Rk4, dt, t0, tf, ..Self::default() }
    }

    pub fn rk45(t0: f64, tf: f64, tol: Tolerances) -> Self {
        Self { method: Method::Rk45, dt: ((tf - t0) / 100.0).max(1e-6), tol, t0, tf, ..Self::default() }
    }

    pub fn with_save_every(mut self, k: usize) -> Self {
        self.save_every = k;
        self
    }

    /// A zero-length span is accepted and yields a single record.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.t0.is_finite() && self.tf.is_finite()) || self.tf < self.t0 {
            return bad(format!("need finite t0 <= tf, got [{}, {}]", self.t0, self.tf));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.tf > self.t0 && self.dt > (self.tf - self.t0) * (1.0 + 1e-12) {
            return bad(format!("dt = {} exceeds the span {}", self.dt, self.tf - self.t0));
        }
        if self.save_every == 0 {
            return bad("save_every must be at least 1".into());
        }
        if self.method == Method::Rk45 && !(self.tol.rtol > 0.0 && self.tol.atol > 0.0) {
            return bad(format!("tolerances must be positive, got {:?}", self.tol));
        }
        Ok(())
    }

    /// Number of RK4 steps; the step is `(tf − t0) / steps`.
    pub fn fixed_steps(&self) -> usize {
        let span = self.tf - self.t0;
        if span == 0.0 {
            0
        } else {
            ((span / self.dt) - 1e-9).ceil().max(1.0) as usize
        }
    }
}

/// A recorded extremal, with per-record invariant monitors.
#[derive(Clone, Debug)]
pub struct TrajectoryLog<S> {
    pub times: Vec<f64>,
    pub states: Vec<W1State<S>>,
    /// `H̃` at the lifted state.
    pub hamiltonian: Vec<S>,
    /// `max_a |φ_a|` at the lifted state.
    pub constraint_residual: Vec<f64>,
    /// Recovered controls `u_a`.
    pub controls: Vec<Vec<S>>,
    /// Running cost `∫ L̃_M dt` from `t0`, integrated with the state.
    pub cost: Vec<S>,
    /// Set when integration stopped early; the records up to that point are
    /// kept.
    pub halted: Option<Error>,
}

impl<S: Real> TrajectoryLog<S> {
    fn empty() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            hamiltonian: Vec::new(),
            constraint_residual: Vec::new(),
            controls: Vec::new(),
            cost: Vec::new(),
            halted: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&W1State<S>> {
        self.states.last()
    }

    /// `max_t |H̃(t) − H̃(t0)|`
    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.hamiltonian.first().map_or(0.0, |h| h.to_f64());
        self.hamiltonian.iter().fold(0.0, |m, h| m.max((h.to_f64() - h0).abs()))
    }

    pub fn max_constraint_residual(&self) -> f64 {
        self.constraint_residual.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.last().map_or(0.0, |c| c.to_f64())
    }

    fn record<M: MechanicalSystem>(&mut self, rp: &ReducedProblem<M>, t: f64, w: W1State<S>, cost: S) -> Result<()> {
        let lifted = lift_to_w1(rp, &w)?;
        let phi = primary_constraints(rp, &lifted)?;
        let h = hamiltonian(rp, &lifted)?;
        let u = m_point(rp, &w.q, &w.y, &w.ydot_a)?.controls;
        self.times.push(t);
        self.states.push(w);
        self.hamiltonian.push(h);
        self.constraint_residual.push(norm_inf(&phi));
        self.controls.push(u);
        self.cost.push(cost);
        Ok(())
    }
}

fn augmented_field<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, x: &[S]) -> Result<Vec<S>> {
    let (n, m) = (rp.dim(), rp.actuated());
    let w = W1State::from_slice(n, m, &x[..4 * n])?;
    let (f, l) = field_and_cost(rp, &w)?;
    let mut v = f.to_vec();
    v.push(l);
    Ok(v)
}

fn split<S: Real>(n: usize, m: usize, x: &[S]) -> Result<(W1State<S>, S)> {
    Ok((W1State::from_slice(n, m, &x[..4 * n])?, x[4 * n]))
}

/// Integrates the extremal flow from `w0`.
///
/// Errors at `w0` (including a failed regularity check) are returned as
/// `Err`. Failures after the first step stop the integration and are stored
/// in [`TrajectoryLog::halted`] with the partial trajectory.
pub fn integrate<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    w0: &W1State<S>,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryLog<S>> {
    cfg.validate()?;
    let (n, m) = (rp.dim(), rp.actuated());
    if w0.n() != n || w0.m() != m {
        return Err(Error::Dimension(format!("initial state has (n, m) = ({}, {}), system ({n}, {m})", w0.n(), w0.m())));
    }
    let rep = regularity(rp, w0)?;
    if !rep.symplectic {
        let scale = rep.r.max_abs().powi(m as i32);
        return Err(Error::RegularityFailure {
            det: rep.det.to_f64(),
            threshold: crate::skinner_rusk::REGULARITY_TOLERANCE * scale,
        });
    }
    let mut log = TrajectoryLog::empty();
    log.record(rp, cfg.t0, w0.clone(), S::zero())?;
    let mut x = w0.to_vec();
    x.push(S::zero());
    let mut f = |z: &[S]| augmented_field(rp, z);

    let outcome: Result<()> = (|| {
        match cfg.method {
            Method::Rk4 => {
                let steps = cfg.fixed_steps();
                let h = (cfg.tf - cfg.t0) / steps.max(1) as f64;
                for k in 1..=steps {
                    x = ode::rk4_step(&mut f, &x, S::from_f64(h))?;
                    if k % cfg.save_every == 0 || k == steps {
                        let t = if k == steps { cfg.tf } else { cfg.t0 + k as f64 * h };
                        let (w, c) = split(n, m, &x)?;
                        log.record(rp, t, w, c)?;
                    }
                }
            }
            Method::Rk45 => {
                let mut rk = ode::Rk45::new(cfg.tol, cfg.dt);
                let mut t = cfg.t0;
                let mut k = 0;
                while t < cfg.tf {
                    (t, x) = rk.step(&mut f, t, &x, cfg.tf)?;
                    k += 1;
                    if k % cfg.save_every == 0 || t >= cfg.tf {
                        let (w, c) = split(n, m, &x)?;
                        log.record(rp, t, w, c)?;
                    }
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        log.halted = Some(e);
    }
    Ok(log)
}

/// Final state of the flow from `w0`, without recording; errors anywhere
/// along the way are returned.
pub fn flow_map<M: MechanicalSystem>(rp: &ReducedProblem<M>, w0: &W1State<f64>, cfg: &IntegratorConfig) -> Result<W1State<f64>> {
    let log = integrate(rp, w0, &IntegratorConfig { save_every: usize::MAX, ..*cfg })?;
    if let Some(e) = log.halted {
        return Err(e);
    }
    Ok(log.states.last().cloned().expect("log holds the initial state"))
}

/// An open-loop control sampled at increasing times, evaluated by cubic
/// Lagrange interpolation through the four nearest samples (exact at the
/// samples).
#[derive(Clone, Debug)]
pub struct SampledControl {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl SampledControl {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::Dimension(format!("need matching samples, got {} times, {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("sample times must increase".into()));
        }
        Ok(Self { times, values })
    }

    pub fn from_log<S: Real>(log: &TrajectoryLog<S>) -> Result<Self> {
        Self::new(log.times.clone(), log.controls.iter().map(|u| crate::scalar::primal(u)).collect())
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        let i = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        if self.times[i] == t {
            return self.values[i].clone();
        }
        if i + 1 < n && self.times[i + 1] == t {
            return self.values[i + 1].clone();
        }
        let lo = i.saturating_sub(1).min(n.saturating_sub(4));
        let idx: Vec<usize> = (lo..(lo + 4).min(n)).collect();
        let mut out = vec![0.0; self.values[0].len()];
        for &j in &idx {
            let w = idx.iter().filter(|&&k| k != j).fold(1.0, |acc, &k| {
                acc * (t - self.times[k]) / (self.times[j] - self.times[k])
            });
            for (o, v) in out.iter_mut().zip(&self.values[j]) {
                *o += w * v;
            }
        }
        out
    }
}

/// RK4 integration of the controlled Hamel equations `E_a = u_a(t)`,
/// `E_α = 0` over `steps` equal steps. Returns `(t, q, y)` at every step.
///
/// This path uses only `quasivel`, none of the Skinner–Rusk machinery.
pub fn integrate_controlled<M: MechanicalSystem>(
    sys: &M,
    diff: &DiffConfig,
    q0: &[f64],
    y0: &[f64],
    u: impl Fn(f64) -> Vec<f64>,
    t0: f64,
    tf: f64,
    steps: usize,
) -> Result<Vec<(f64, Vec<f64>, Vec<f64>)>> {
    let n = sys.dim();
    if q0.len() != n || y0.len() != n || steps == 0 {
        return Err(Error::Dimension(format!("need q0, y0 of length {n} and at least one step")));
    }
    // Time rides along as the last component so the autonomous kernel applies.
    let mut f = |x: &[f64]| -> Result<Vec<f64>> {
        let (dq, dy) = controlled_dynamics(sys, &x[..n], &x[n..2 * n], &u(x[2 * n]), diff)?;
        Ok([&dq[..], &dy, &[1.0]].concat())
    };
    let h = (tf - t0) / steps as f64;
    let mut x = [q0, y0, &[t0]].concat();
    let mut out = vec![(t0, q0.to_vec(), y0.to_vec())];
    for k in 1..=steps {
        x = ode::rk4_step(&mut f, &x, h)?;
        let t = if k == steps { tf } else { t0 + k as f64 * h };
        out.push((t, x[..n].to_vec(), x[n..2 * n].to_vec()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{PlanarRigidBody, PlanarRigidBodyParams, PointMassLq};
    use approx::assert_relative_eq;

    fn body() -> ReducedProblem<PlanarRigidBody> {
        ReducedProblem::new(PlanarRigidBody::new(PlanarRigidBodyParams::unit()).unwrap()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::rk4(0.0, 1.0, 1e-3).validate().is_ok());
        assert!(IntegratorConfig::rk4(0.0, 0.0, 1e-3).validate().is_ok());
        assert!(IntegratorConfig::rk4(1.0, 0.0, 1e-3).validate().is_err());
        assert!(IntegratorConfig::rk4(0.0, 1.0, 2.0).validate().is_err());
        assert!(IntegratorConfig::rk4(0.0, 1.0, 0.0).validate().is_err());
        assert!(IntegratorConfig::rk4(0.0, 1.0, 1e-3).with_save_every(0).validate().is_err());
        assert_eq!(IntegratorConfig::rk4(0.0, 1.0, 1e-3).fixed_steps(), 1000);
        assert_eq!(IntegratorConfig::rk4(0.0, 1.0, 0.3).fixed_steps(), 4);
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let rp = body();
        let w = W1State::new(vec![0.0; 3], vec![0.0; 3], vec![0.0; 2], vec![0.0; 3], vec![0.0]).unwrap();
        let log = integrate(&rp, &w, &IntegratorConfig::rk4(0.0, 1.0, 0.01)).unwrap();
        assert!(log.halted.is_none());
        assert_eq!(log.len(), 101);
        assert!(log.states.iter().all(|s| s == &w));
        assert_eq!(log.total_cost(), 0.0);
    }

    #[test]
    fn zero_span_gives_single_record() {
        let rp = body();
        let w = W1State::new(vec![0.1; 3], vec![1.0, 0.0, 0.0], vec![0.0; 2], vec![0.0; 3], vec![0.0]).unwrap();
        let log = integrate(&rp, &w, &IntegratorConfig::rk4(0.0, 0.0, 1e-3)).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.states[0], w);
        assert!(log.constraint_residual[0] <= 1e-12);
    }

    #[test]
    fn save_every_thins_records() {
        let rp = ReducedProblem::new(PointMassLq).unwrap();
        let w = W1State::new(vec![0.0; 2], vec![1.0, 0.5], vec![0.0], vec![0.0; 2], vec![0.0]).unwrap();
        let log = integrate(&rp, &w, &IntegratorConfig::rk4(0.0, 1.0, 1e-3).with_save_every(10)).unwrap();
        assert_eq!(log.len(), 101);
        let last = log.last_state().unwrap();
        assert_relative_eq!(last.q[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(last.q[1], 0.5, epsilon = 1e-13);
        assert!(log.controls.iter().all(|u| u[0] == 0.0));
    }

    #[test]
    fn point_mass_extremal_is_the_cubic() {
        // x(t) = 3t² − 2t³: v(0) = 0, a(0) = 6, p₁ = 12 (ȧ = −p₁).
        let rp = ReducedProblem::new(PointMassLq).unwrap();
        let w = W1State::new(vec![0.0; 2], vec![0.0; 2], vec![6.0], vec![12.0, 0.0], vec![0.0]).unwrap();
        for cfg in [IntegratorConfig::rk4(0.0, 1.0, 1e-2), IntegratorConfig::rk45(0.0, 1.0, Tolerances::default())] {
            let log = integrate(&rp, &w, &cfg).unwrap();
            for (t, s) in log.times.iter().zip(&log.states) {
                assert!((s.q[0] - (3.0 * t * t - 2.0 * t.powi(3))).abs() < 1e-10);
            }
            for (t, u) in log.times.iter().zip(&log.controls) {
                assert!((u[0] - (6.0 - 12.0 * t)).abs() < 1e-10);
            }
            assert_relative_eq!(log.total_cost(), 6.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn regularity_failure_at_start_is_an_error() {
        let rp = ReducedProblem::new(
            PlanarRigidBody::new(PlanarRigidBodyParams::unit()).unwrap().with_cost(crate::systems::CostKind::Constant(1.0)),
        )
        .unwrap();
        let w = W1State::new(vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0; 2], vec![0.0; 3], vec![0.0]).unwrap();
        assert!(matches!(
            integrate(&rp, &w, &IntegratorConfig::rk4(0.0, 1.0, 0.1)),
            Err(Error::RegularityFailure { .. })
        ));
    }

    #[test]
    fn sampled_control_interpolates_cubics_exactly() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let g = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let c = SampledControl::new(times.clone(), times.iter().map(|&t| vec![g(t)]).collect()).unwrap();
        for t in [0.0, 0.03, 0.15, 0.5, 0.97, 1.0] {
            assert_relative_eq!(c.eval(t)[0], g(t), epsilon = 1e-13);
        }
    }

    #[test]
    fn controlled_point_mass_follows_the_control() {
        let out = integrate_controlled(&PointMassLq, &DiffConfig::dual(), &[0.0, 0.0], &[0.0, 0.0], |t| vec![6.0 - 12.0 * t], 0.0, 1.0, 100)
            .unwrap();
        let (t, q, y) = out.last().unwrap();
        assert_eq!(*t, 1.0);
        assert_relative_eq!(q[0], 1.0, epsilon = 1e-12);
        assert!(y[0].abs() < 1e-12);
    }
}

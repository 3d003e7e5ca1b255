//! Built-in systems: the planar rigid body with an offset thruster, a point
//! mass with an uncontrolled auxiliary coordinate, and identity-frame wrappers
//! around arbitrary coordinate Lagrangians.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quasivel::{validate_system, MechanicalSystem};
use crate::scalar::Real;

/// Running cost attached to a built-in system.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum CostKind {
    /// `½|u|²`
    #[default]
    Quadratic,
    /// A constant, independent of the state and control.
    Constant(f64),
}

impl CostKind {
    pub fn eval<T: Real>(&self, u: &[T]) -> T {
        match *self {
            CostKind::Quadratic => u.iter().fold(T::zero(), |a, &v| a + v * v) * T::from_f64(0.5),
            CostKind::Constant(c) => T::from_f64(c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarRigidBodyParams {
    /// kg
    pub mass: f64,
    /// kg·m², about the center of mass
    pub inertia: f64,
    /// m, distance from the center of mass to the point where the force acts
    pub offset: f64,
}

impl PlanarRigidBodyParams {
    pub fn unit() -> Self {
        Self { mass: 1.0, inertia: 1.0, offset: 1.0 }
    }
}

/// Rigid body in the plane, `Q = ℝ² × S¹` with coordinates `(x, y, θ)`,
/// actuated by a body-fixed force applied at distance `h` along the body
/// x-axis.
///
/// The actuated frame fields are
/// `X₁ = (cos θ/m, sin θ/m, 0)` and `X₂ = (−sin θ/m, cos θ/m, −h/J)`, and the
/// completion is `X₃ = (h sin θ, −h cos θ, −1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarRigidBody {
    params: PlanarRigidBodyParams,
    cost: CostKind,
    completion_scale: f64,
}

impl PlanarRigidBody {
    pub fn new(params: PlanarRigidBodyParams) -> Result<Self> {
        Self::with_completion_scale(params, 1.0)
    }

    /// Scales the completion field `X₃`; zero gives a degenerate frame.
    pub fn with_completion_scale(params: PlanarRigidBodyParams, scale: f64) -> Result<Self> {
        let PlanarRigidBodyParams { mass, inertia, offset } = params;
        for (name, v) in [("mass", mass), ("inertia", inertia), ("offset", offset)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSystem(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !scale.is_finite() {
            return Err(Error::InvalidSystem(format!("completion scale must be finite, got {scale}")));
        }
        let sys = Self { params, cost: CostKind::Quadratic, completion_scale: scale };
        validate_system(&sys)?;
        Ok(sys)
    }

    pub fn with_cost(mut self, cost: CostKind) -> Self {
        self.cost = cost;
        self
    }

    pub fn params(&self) -> PlanarRigidBodyParams {
        self.params
    }
}

impl MechanicalSystem for PlanarRigidBody {
    fn dim(&self) -> usize {
        3
    }

    fn actuated(&self) -> usize {
        2
    }

    fn lagrangian<T: Real>(&self, _q: &[T], v: &[T]) -> T {
        let m = T::from_f64(self.params.mass);
        let j = T::from_f64(self.params.inertia);
        (m * (v[0] * v[0] + v[1] * v[1]) + j * v[2] * v[2]) * T::from_f64(0.5)
    }

    fn frame<T: Real>(&self, q: &[T]) -> Matrix<T> {
        let PlanarRigidBodyParams { mass, inertia, offset } = self.params;
        let (s, c) = q[2].sin_cos();
        let inv_m = T::from_f64(1.0 / mass);
        let h = T::from_f64(offset);
        let k = T::from_f64(self.completion_scale);
        Matrix::from_rows(&[
            vec![c * inv_m, -s * inv_m, k * h * s],
            vec![s * inv_m, c * inv_m, -k * h * c],
            vec![T::zero(), T::from_f64(-offset / inertia), -k],
        ])
    }

    fn cost<T: Real>(&self, _q: &[T], _y: &[T], u: &[T]) -> T {
        self.cost.eval(u)
    }

    fn periodic(&self) -> Vec<bool> {
        vec![false, false, true]
    }
}

/// A unit point mass on a line driven by `u`, together with an uncontrolled
/// auxiliary coordinate. Identity frame, `L = ½|v|²`, cost `½u²`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointMassLq;

impl MechanicalSystem for PointMassLq {
    fn dim(&self) -> usize {
        2
    }

    fn actuated(&self) -> usize {
        1
    }

    fn lagrangian<T: Real>(&self, _q: &[T], v: &[T]) -> T {
        (v[0] * v[0] + v[1] * v[1]) * T::from_f64(0.5)
    }

    fn frame<T: Real>(&self, _q: &[T]) -> Matrix<T> {
        Matrix::identity(2)
    }

    fn cost<T: Real>(&self, _q: &[T], _y: &[T], u: &[T]) -> T {
        CostKind::Quadratic.eval(u)
    }
}

/// A Lagrangian in ordinary coordinates, `L(q, q̇)`.
pub trait VelocityLagrangian: Send + Sync {
    fn eval<T: Real>(&self, q: &[T], v: &[T]) -> T;
}

/// `L = ½|v|²`
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FreeParticle;

impl VelocityLagrangian for FreeParticle {
    fn eval<T: Real>(&self, _q: &[T], v: &[T]) -> T {
        v.iter().fold(T::zero(), |a, &x| a + x * x) * T::from_f64(0.5)
    }
}

/// `L = ½|v|² − ½k|q|²`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicOscillator {
    pub stiffness: f64,
}

impl VelocityLagrangian for HarmonicOscillator {
    fn eval<T: Real>(&self, q: &[T], v: &[T]) -> T {
        let kin = v.iter().fold(T::zero(), |a, &x| a + x * x);
        let pot = q.iter().fold(T::zero(), |a, &x| a + x * x) * T::from_f64(self.stiffness);
        (kin - pot) * T::from_f64(0.5)
    }
}

/// Identity-frame system: quasivelocities are the coordinate velocities and
/// the Hamel equations are the Euler–Lagrange equations of `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateSystem<L> {
    lagrangian: L,
    n: usize,
    m: usize,
    cost: CostKind,
}

impl<L: VelocityLagrangian> CoordinateSystem<L> {
    pub fn new(lagrangian: L, n: usize, m: usize) -> Result<Self> {
        let sys = Self { lagrangian, n, m, cost: CostKind::Quadratic };
        validate_system(&sys)?;
        Ok(sys)
    }

    pub fn with_cost(mut self, cost: CostKind) -> Self {
        self.cost = cost;
        self
    }

    pub fn inner(&self) -> &L {
        &self.lagrangian
    }
}

/// Wraps a coordinate Lagrangian with the identity frame.
pub fn coordinate_wrap<L: VelocityLagrangian>(lagrangian: L, n: usize, m: usize) -> Result<CoordinateSystem<L>> {
    CoordinateSystem::new(lagrangian, n, m)
}

impl<L: VelocityLagrangian> MechanicalSystem for CoordinateSystem<L> {
    fn dim(&self) -> usize {
        self.n
    }

    fn actuated(&self) -> usize {
        self.m
    }

    fn lagrangian<T: Real>(&self, q: &[T], v: &[T]) -> T {
        self.lagrangian.eval(q, v)
    }

    fn frame<T: Real>(&self, _q: &[T]) -> Matrix<T> {
        Matrix::identity(self.n)
    }

    fn cost<T: Real>(&self, _q: &[T], _y: &[T], u: &[T]) -> T {
        self.cost.eval(u)
    }
}

//! Quasivelocity frames, structure coefficients and the Hamel equations.
//!
//! A frame is an `n×n` matrix `X(q)` whose column `B` holds the components
//! `X_B^A(q)` of the vector field `X_B`. Quasivelocities `y` are the
//! components of a velocity in that frame, `q̇ = X(q) y`. The first `m`
//! columns are the actuated directions, the remaining `n − m` the
//! unactuated completion.
//!
//! The Hamel residual used throughout is
//!
//! ```text
//! E_A = d/dt(∂l/∂y^A) − X_A^B ∂l/∂q^B + C^D_{AB} y^B ∂l/∂y^D − F_B X_A^B
//! ```
//!
//! with the time derivative expanded by the chain rule, so `E` is a function
//! of `(q, y, ẏ)` that is affine in `ẏ`: `E = M(q,y) ẏ + b(q,y)` where `M` is
//! the velocity Hessian of `l`. The controlled equations read `E_a = u_a` and
//! `E_α = 0`.

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::numdiff::{central, forward, DiffConfig, DiffScheme};
use crate::scalar::{all_finite, primal, Real};

/// Condition number above which a frame is treated as singular.
pub const FRAME_CONDITION_LIMIT: f64 = 1e12;

/// How a system's Lagrangian is supplied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LagrangianForm {
    /// `L(q, q̇)`; the reduced form is `l(q, y) = L(q, X(q) y)`.
    Velocity,
    /// `l(q, y)` directly in quasivelocities.
    Quasi,
}

/// A controlled mechanical system described in a quasivelocity frame.
///
/// Every callback is generic over the scalar type so the library can
/// differentiate through it exactly with dual numbers.
pub trait MechanicalSystem: Send + Sync {
    /// Configuration dimension `n`.
    fn dim(&self) -> usize;

    /// Number of controls `m`, `0 < m < n`.
    fn actuated(&self) -> usize;

    fn lagrangian_form(&self) -> LagrangianForm {
        LagrangianForm::Velocity
    }

    /// `L(q, q̇)` or `l(q, y)`, according to [`MechanicalSystem::lagrangian_form`].
    fn lagrangian<T: Real>(&self, q: &[T], vel: &[T]) -> T;

    /// Frame matrix with column `B` equal to `X_B(q)`.
    fn frame<T: Real>(&self, q: &[T]) -> Matrix<T>;

    /// External force covector `F_A(q, q̇)`.
    fn force<T: Real>(&self, q: &[T], _v: &[T]) -> Vec<T> {
        vec![T::zero(); q.len()]
    }

    /// Running cost `C(q, y, u)`.
    fn cost<T: Real>(&self, q: &[T], y: &[T], u: &[T]) -> T;

    /// Per-coordinate angle flags; only used to wrap output.
    fn periodic(&self) -> Vec<bool> {
        vec![false; self.dim()]
    }
}

/// Rejects systems that are not underactuated in the required sense.
pub fn validate_system<M: MechanicalSystem>(sys: &M) -> Result<()> {
    let (n, m) = (sys.dim(), sys.actuated());
    if n == 0 {
        return Err(Error::InvalidSystem("configuration dimension must be positive".into()));
    }
    if m == 0 || m >= n {
        return Err(Error::InvalidSystem(format!(
            "need 0 < m < n for an underactuated system, got n = {n}, m = {m}"
        )));
    }
    Ok(())
}

/// Structure coefficients `C^D_{AB}` stored as `[D][A][B]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureCoefficients<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> StructureCoefficients<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, d: usize, a: usize, b: usize) -> T {
        self.data[(d * self.n + a) * self.n + b]
    }

    #[inline]
    fn set(&mut self, d: usize, a: usize, b: usize, v: T) {
        self.data[(d * self.n + a) * self.n + b] = v;
    }

    /// Entries with `|C| > tol`, as `(D, A, B, value)`, zero-based.
    pub fn nonzero(&self, tol: f64) -> Vec<(usize, usize, usize, T)> {
        let mut out = Vec::new();
        for d in 0..self.n {
            for a in 0..self.n {
                for b in 0..self.n {
                    let v = self.get(d, a, b);
                    if v.to_f64().abs() > tol {
                        out.push((d, a, b, v));
                    }
                }
            }
        }
        out
    }

    pub fn primal(&self) -> StructureCoefficients<f64> {
        StructureCoefficients { n: self.n, data: primal(&self.data) }
    }
}

/// Frame data at a configuration.
#[derive(Clone, Debug)]
pub struct FramePoint<T> {
    pub q: Vec<T>,
    pub x: Matrix<T>,
    pub x_inv: Matrix<T>,
    pub coefficients: StructureCoefficients<T>,
}

/// A point `(q, y, ẏ)` of the second-order tangent bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderPoint<T> {
    pub q: Vec<T>,
    pub y: Vec<T>,
    pub ydot: Vec<T>,
}

impl<T: Real> SecondOrderPoint<T> {
    pub fn new(q: Vec<T>, y: Vec<T>, ydot: Vec<T>) -> Result<Self> {
        if q.len() != y.len() || y.len() != ydot.len() {
            return Err(Error::Dimension(format!(
                "second-order point needs equal lengths, got {}/{}/{}",
                q.len(),
                y.len(),
                ydot.len()
            )));
        }
        if !(all_finite(&q) && all_finite(&y) && all_finite(&ydot)) {
            return Err(Error::non_finite(&[q, y, ydot].concat()));
        }
        Ok(Self { q, y, ydot })
    }
}

pub fn quasi_to_velocity<M: MechanicalSystem, S: Real>(sys: &M, q: &[S], y: &[S]) -> Vec<S> {
    sys.frame(q).mul_vec(y)
}

pub fn velocity_to_quasi<M: MechanicalSystem, S: Real>(sys: &M, q: &[S], v: &[S]) -> Result<Vec<S>> {
    let x = sys.frame(q);
    let inv = checked_inverse(&x, q)?;
    Ok(inv.mul_vec(v))
}

fn checked_inverse<S: Real>(x: &Matrix<S>, q: &[S]) -> Result<Matrix<S>> {
    let singular = || Error::SingularFrame { q: primal(q), condition: f64::INFINITY };
    let inv = x.inverse().ok_or_else(singular)?;
    let condition = x.norm1() * inv.norm1();
    if !(condition <= FRAME_CONDITION_LIMIT) {
        return Err(Error::SingularFrame { q: primal(q), condition });
    }
    Ok(inv)
}

/// `l(q, y)`, induced from `L(q, q̇)` when the system supplies the velocity form.
pub fn reduced_lagrangian<M: MechanicalSystem, S: Real>(sys: &M, q: &[S], y: &[S]) -> S {
    match sys.lagrangian_form() {
        LagrangianForm::Quasi => sys.lagrangian(q, y),
        LagrangianForm::Velocity => sys.lagrangian(q, &quasi_to_velocity(sys, q, y)),
    }
}

/// `∂X/∂q^D` for each `D`, as `n` matrices.
pub fn frame_derivative<M: MechanicalSystem, S: Real>(sys: &M, q: &[S], cfg: &DiffConfig) -> Result<Vec<Matrix<S>>> {
    let n = q.len();
    let jac = match cfg.scheme {
        DiffScheme::DualNumber => forward::jacobian(|z: &[Dual<S>]| sys.frame(z).as_slice().to_vec(), q)?,
        DiffScheme::CentralDifference => central::jacobian(|z: &[S]| sys.frame(z).as_slice().to_vec(), q, cfg.step)?,
    };
    // jac row (C*n + B), column D
    Ok((0..n).map(|d| Matrix::from_fn(n, n, |c, b| jac[(c * n + b, d)])).collect())
}

/// Components of `[X_A, X_B]` in the coordinate basis: column `(A, B)` of the
/// returned vector-of-vectors, indexed `[A][B][C]`.
fn brackets<S: Real>(x: &Matrix<S>, dx: &[Matrix<S>]) -> Vec<Vec<Vec<S>>> {
    let n = x.nrows();
    let mut out = vec![vec![vec![S::zero(); n]; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let mut v = vec![S::zero(); n];
            for (c, vc) in v.iter_mut().enumerate() {
                for (d, dxd) in dx.iter().enumerate() {
                    *vc += x[(d, a)] * dxd[(c, b)] - x[(d, b)] * dxd[(c, a)];
                }
            }
            out[b][a] = v.iter().map(|&e| -e).collect();
            out[a][b] = v;
        }
    }
    out
}

/// Lie bracket `[X_A, X_B](q)` in coordinates, for all pairs, indexed `[A][B][C]`.
pub fn frame_brackets<M: MechanicalSystem, S: Real>(sys: &M, q: &[S], cfg: &DiffConfig) -> Result<Vec<Vec<Vec<S>>>> {
    let x = sys.frame(q);
    let dx = frame_derivative(sys, q, cfg)?;
    Ok(brackets(&x, &dx))
}

fn coefficients_from<S: Real>(x_inv: &Matrix<S>, x: &Matrix<S>, dx: &[Matrix<S>]) -> StructureCoefficients<S> {
    let n = x.nrows();
    let br = brackets(x, dx);
    let mut c = StructureCoefficients::zeros(n);
    let half = S::from_f64(0.5);
    for a in 0..n {
        for b in a + 1..n {
            let ab = x_inv.mul_vec(&br[a][b]);
            let ba = x_inv.mul_vec(&br[b][a]);
            for d in 0..n {
                let v = (ab[d] - ba[d]) * half;
                c.set(d, a, b, v);
                c.set(d, b, a, -v);
            }
        }
    }
    c
}

/// `C^D_{AB}(q)` from `[X_A, X_B] = C^D_{AB} X_D`.
pub fn structure_coefficients<M: MechanicalSystem, S: Real>(
    sys: &M,
    q: &[S],
    cfg: &DiffConfig,
) -> Result<StructureCoefficients<S>> {
    Ok(frame_point(sys, q, cfg)?.coefficients)
}

pub fn frame_point<M: MechanicalSystem, S: Real>(sys: &M, q: &[S], cfg: &DiffConfig) -> Result<FramePoint<S>> {
    let x = sys.frame(q);
    if !all_finite(x.as_slice()) {
        return Err(Error::non_finite(q));
    }
    let x_inv = checked_inverse(&x, q)?;
    let dx = frame_derivative(sys, q, cfg)?;
    let coefficients = coefficients_from(&x_inv, &x, &dx);
    Ok(FramePoint { q: q.to_vec(), x, x_inv, coefficients })
}

/// First and second derivatives of `l(q, y)` needed by the Hamel equations.
#[derive(Clone, Debug)]
pub struct LagrangianDerivatives<S> {
    pub value: S,
    /// `∂l/∂q^A`
    pub dq: Vec<S>,
    /// `∂l/∂y^A`
    pub dy: Vec<S>,
    /// `∂²l/∂y^A∂y^B`
    pub yy: Matrix<S>,
    /// `[A][D] = ∂²l/∂y^A∂q^D`
    pub yq: Matrix<S>,
}

pub fn lagrangian_derivatives<M: MechanicalSystem, S: Real>(
    sys: &M,
    q: &[S],
    y: &[S],
    cfg: &DiffConfig,
) -> Result<LagrangianDerivatives<S>> {
    let n = q.len();
    let z: Vec<S> = q.iter().chain(y).copied().collect();
    match cfg.scheme {
        DiffScheme::DualNumber => lagrangian_derivatives_dual(sys, &z, n),
        DiffScheme::CentralDifference => {
            let f = |w: &[S]| reduced_lagrangian(sys, &w[..n], &w[n..]);
            let value = f(&z);
            if !value.is_finite() {
                return Err(Error::non_finite(&z));
            }
            let g = central::gradient(f, &z, cfg.step)?;
            let h2 = cfg.second_order_step();
            let mut cols = Vec::with_capacity(n);
            let mut w = z.clone();
            for j in 0..n {
                let k = n + j;
                let hj = S::from_f64(h2 * z[k].to_f64().abs().max(1.0));
                w[k] = z[k] + hj;
                let gp = central::gradient(f, &w, h2)?;
                w[k] = z[k] - hj;
                let gm = central::gradient(f, &w, h2)?;
                w[k] = z[k];
                cols.push(gp.iter().zip(&gm).map(|(&a, &b)| (a - b) / (hj + hj)).collect::<Vec<S>>());
            }
            // cols[j][i] = ∂²l/∂z_i∂y_j
            let yy = Matrix::from_fn(n, n, |a, b| cols[b][n + a]).symmetrize();
            let yq = Matrix::from_fn(n, n, |a, d| cols[a][d]);
            Ok(LagrangianDerivatives { value, dq: g[..n].to_vec(), dy: g[n..].to_vec(), yy, yq })
        }
    }
}

fn lagrangian_derivatives_dual<M: MechanicalSystem, S: Real>(
    sys: &M,
    z: &[S],
    n: usize,
) -> Result<LagrangianDerivatives<S>> {
    let mut value = S::zero();
    let mut grad = vec![S::zero(); 2 * n];
    let mut yy = Matrix::zeros(n, n);
    let mut yq = Matrix::zeros(n, n);
    // outer tangent along z_i, inner tangent along y_j
    for i in 0..2 * n {
        let j_start = if i < n { 0 } else { i - n };
        for j in j_start..n {
            let w: Vec<Dual<Dual<S>>> = z
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let inner = if k == n + j { S::one() } else { S::zero() };
                    let outer = if k == i { S::one() } else { S::zero() };
                    Dual::new(Dual::new(v, inner), Dual::new(outer, S::zero()))
                })
                .collect();
            let r = reduced_lagrangian(sys, &w[..n], &w[n..]);
            if !r.is_finite() {
                return Err(Error::non_finite(z));
            }
            value = r.re.re;
            grad[i] = r.eps.re;
            grad[n + j] = r.re.eps;
            if i < n {
                yq[(j, i)] = r.eps.eps;
            } else {
                let a = i - n;
                yy[(a, j)] = r.eps.eps;
                yy[(j, a)] = r.eps.eps;
            }
        }
    }
    Ok(LagrangianDerivatives { value, dq: grad[..n].to_vec(), dy: grad[n..].to_vec(), yy, yq })
}

/// The Hamel residual written as `E(q, y, ẏ) = M ẏ + b`.
#[derive(Clone, Debug)]
pub struct HamelLinear<S> {
    /// `∂²l/∂y∂y`
    pub mass: Matrix<S>,
    /// Every term of `E` that does not multiply `ẏ`.
    pub bias: Vec<S>,
}

impl<S: Real> HamelLinear<S> {
    pub fn map<T: Real>(&self, f: impl Fn(S) -> T) -> HamelLinear<T> {
        HamelLinear { mass: self.mass.map(&f), bias: self.bias.iter().map(|&b| f(b)).collect() }
    }

    pub fn residual(&self, ydot: &[S]) -> Vec<S> {
        self.mass.mul_vec(ydot).into_iter().zip(&self.bias).map(|(a, &b)| a + b).collect()
    }
}

pub fn hamel_linear<M: MechanicalSystem, S: Real>(sys: &M, q: &[S], y: &[S], cfg: &DiffConfig) -> Result<HamelLinear<S>> {
    let n = sys.dim();
    if q.len() != n || y.len() != n {
        return Err(Error::Dimension(format!("expected q, y of length {n}")));
    }
    let fp = frame_point(sys, q, cfg)?;
    let ld = lagrangian_derivatives(sys, q, y, cfg)?;
    let v = fp.x.mul_vec(y);
    let force = sys.force(q, &v);
    // d/dt(∂l/∂y) non-ẏ part, minus X_A(l), minus F(X_A)
    let mut bias = ld.yq.mul_vec(&v);
    let xl = fp.x.tr_mul_vec(&ld.dq);
    let fx = fp.x.tr_mul_vec(&force);
    for a in 0..n {
        let mut curv = S::zero();
        for b in 0..n {
            for d in 0..n {
                curv += fp.coefficients.get(d, a, b) * y[b] * ld.dy[d];
            }
        }
        bias[a] = bias[a] - xl[a] + curv - fx[a];
    }
    if !all_finite(&bias) {
        return Err(Error::non_finite(&[q, y].concat()));
    }
    Ok(HamelLinear { mass: ld.yy, bias })
}

/// `E_A(q, y, ẏ)`; the controlled equations are `E_a = u_a`, `E_α = 0`.
pub fn hamel_residual<M: MechanicalSystem, S: Real>(sys: &M, pt: &SecondOrderPoint<S>, cfg: &DiffConfig) -> Result<Vec<S>> {
    Ok(hamel_linear(sys, &pt.q, &pt.y, cfg)?.residual(&pt.ydot))
}

/// Accelerations produced by generalized inputs `E = rhs`.
fn solve_accelerations<S: Real>(h: &HamelLinear<S>, rhs: &[S]) -> Result<Vec<S>> {
    let det = h.mass.det();
    if crate::linalg::is_numerically_singular(&h.mass, det, 1e-12) {
        return Err(Error::SingularMassMatrix { det: det.to_f64() });
    }
    let r: Vec<S> = rhs.iter().zip(&h.bias).map(|(&a, &b)| a - b).collect();
    h.mass.solve(&r).ok_or(Error::SingularMassMatrix { det: det.to_f64() })
}

/// Unforced, uncontrolled Hamel flow: `(q̇, ẏ)` with `E(q, y, ẏ) = 0`.
pub fn free_dynamics<M: MechanicalSystem, S: Real>(sys: &M, q: &[S], y: &[S], cfg: &DiffConfig) -> Result<(Vec<S>, Vec<S>)> {
    let h = hamel_linear(sys, q, y, cfg)?;
    let ydot = solve_accelerations(&h, &vec![S::zero(); q.len()])?;
    Ok((quasi_to_velocity(sys, q, y), ydot))
}

/// Controlled Hamel flow: `(q̇, ẏ)` with `E_a = u_a` and `E_α = 0`.
pub fn controlled_dynamics<M: MechanicalSystem, S: Real>(
    sys: &M,
    q: &[S],
    y: &[S],
    u: &[S],
    cfg: &DiffConfig,
) -> Result<(Vec<S>, Vec<S>)> {
    let (n, m) = (sys.dim(), sys.actuated());
    if u.len() != m {
        return Err(Error::Dimension(format!("expected {m} controls, got {}", u.len())));
    }
    let h = hamel_linear(sys, q, y, cfg)?;
    let mut rhs = vec![S::zero(); n];
    rhs[..m].copy_from_slice(u);
    let ydot = solve_accelerations(&h, &rhs)?;
    Ok((quasi_to_velocity(sys, q, y), ydot))
}

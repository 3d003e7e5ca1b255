//! The Skinner–Rusk presymplectic system on `W₀ = M ×_{TQ} T*TQ`.
//!
//! Coordinates on `W₀` are `(q, y, ẏ^a, p, p̃)` and
//!
//! ```text
//! Ω  = dq^A ∧ dp_A + dy^A ∧ dp̃_A
//! H̃  = p·X(q)y + p̃_a ẏ^a + p̃_α G^α − L̃_M
//! φ_a = ∂H̃/∂ẏ^a
//! ```
//!
//! `W₁ = {φ = 0}` is parametrized by `(q, y, ẏ^a, p, p̃_α)`; `p̃_a` is always
//! recovered from `φ_a = 0`, never carried. The dynamics on `W₁` is explicit
//! when the regularity matrix `R_ab = ∂²(L̃_M − p̃_α G^α)/∂ẏ^a∂ẏ^b` is
//! invertible.
//!
//! Internally everything is expressed through
//! `K = H̃ − p̃_a ẏ^a = p·X(q)y + p̃_α G^α − L̃_M`, which does not involve `p̃_a`.

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::linalg::{dot, is_numerically_singular, Matrix};
use crate::numdiff::forward;
use crate::quasivel::{hamel_linear, quasi_to_velocity, HamelLinear, MechanicalSystem};
use crate::reduction::{m_point, m_point_from, ReducedProblem};
use crate::scalar::{all_finite, Real};

/// Relative tolerance of the regularity gate:
/// `|det R| > tol · (max|R_ab|)^m`.
pub const REGULARITY_TOLERANCE: f64 = 1e-10;

/// A point of `W₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct W0State<S> {
    pub q: Vec<S>,
    pub y: Vec<S>,
    pub ydot_a: Vec<S>,
    pub p: Vec<S>,
    pub ptilde: Vec<S>,
}

impl<S: Real> W0State<S> {
    pub fn new(q: Vec<S>, y: Vec<S>, ydot_a: Vec<S>, p: Vec<S>, ptilde: Vec<S>) -> Result<Self> {
        let n = q.len();
        if y.len() != n || p.len() != n || ptilde.len() != n || ydot_a.len() >= n {
            return Err(Error::Dimension(format!(
                "W0 state needs q, y, p, p̃ of one length n and fewer than n accelerations; got {}, {}, {}, {} and {}",
                n,
                y.len(),
                p.len(),
                ptilde.len(),
                ydot_a.len()
            )));
        }
        let w = Self { q, y, ydot_a, p, ptilde };
        if !all_finite(&w.to_vec()) {
            return Err(Error::non_finite(&w.to_vec()));
        }
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        4 * self.q.len() + self.ydot_a.len()
    }

    /// Flattened in the order `(q, y, ẏ^a, p, p̃)`.
    pub fn to_vec(&self) -> Vec<S> {
        [&self.q[..], &self.y, &self.ydot_a, &self.p, &self.ptilde].concat()
    }

    pub fn from_slice(n: usize, m: usize, v: &[S]) -> Result<Self> {
        if v.len() != 4 * n + m {
            return Err(Error::Dimension(format!("W0 vector must have {} entries, got {}", 4 * n + m, v.len())));
        }
        let (q, r) = v.split_at(n);
        let (y, r) = r.split_at(n);
        let (yd, r) = r.split_at(m);
        let (p, pt) = r.split_at(n);
        Self::new(q.to_vec(), y.to_vec(), yd.to_vec(), p.to_vec(), pt.to_vec())
    }
}

/// A point of `W₁`, or a tangent vector to it (same layout).
#[derive(Clone, Debug, PartialEq)]
pub struct W1State<S> {
    pub q: Vec<S>,
    pub y: Vec<S>,
    pub ydot_a: Vec<S>,
    pub p: Vec<S>,
    pub ptilde_alpha: Vec<S>,
}

impl<S: Real> W1State<S> {
    pub fn new(q: Vec<S>, y: Vec<S>, ydot_a: Vec<S>, p: Vec<S>, ptilde_alpha: Vec<S>) -> Result<Self> {
        let n = q.len();
        let m = ydot_a.len();
        if y.len() != n || p.len() != n || m >= n || ptilde_alpha.len() != n - m {
            return Err(Error::Dimension(format!(
                "W1 state needs q, y, p of length n, m < n accelerations and n − m unactuated momenta; \
                 got {}, {}, {}, {} and {}",
                n,
                y.len(),
                p.len(),
                m,
                ptilde_alpha.len()
            )));
        }
        let w = Self { q, y, ydot_a, p, ptilde_alpha };
        if !all_finite(&w.to_vec()) {
            return Err(Error::non_finite(&w.to_vec()));
        }
        Ok(w)
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.ydot_a.len()
    }

    /// `4n`
    pub fn dim(&self) -> usize {
        4 * self.q.len()
    }

    /// Flattened in the order `(q, y, ẏ^a, p, p̃_α)`.
    pub fn to_vec(&self) -> Vec<S> {
        [&self.q[..], &self.y, &self.ydot_a, &self.p, &self.ptilde_alpha].concat()
    }

    /// Inverse of [`W1State::to_vec`]. Does not check finiteness, so it can
    /// also hold tangent vectors and intermediate stages.
    pub fn from_slice(n: usize, m: usize, v: &[S]) -> Result<Self> {
        if v.len() != 4 * n || m >= n {
            return Err(Error::Dimension(format!("W1 vector must have {} entries, got {}", 4 * n, v.len())));
        }
        let (q, r) = v.split_at(n);
        let (y, r) = r.split_at(n);
        let (yd, r) = r.split_at(m);
        let (p, pa) = r.split_at(n);
        Ok(Self { q: q.to_vec(), y: y.to_vec(), ydot_a: yd.to_vec(), p: p.to_vec(), ptilde_alpha: pa.to_vec() })
    }

    pub fn map<T: Real>(&self, f: impl Fn(S) -> T) -> W1State<T> {
        let g = |v: &[S]| v.iter().map(|&x| f(x)).collect::<Vec<T>>();
        W1State {
            q: g(&self.q),
            y: g(&self.y),
            ydot_a: g(&self.ydot_a),
            p: g(&self.p),
            ptilde_alpha: g(&self.ptilde_alpha),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RegularityReport<S> {
    pub r: Matrix<S>,
    pub det: S,
    /// 1-norm condition number of `R` (infinite when singular).
    pub condition: f64,
    pub symplectic: bool,
}

fn check_dims<M: MechanicalSystem>(rp: &ReducedProblem<M>, n: usize, m: usize) -> Result<()> {
    if n != rp.dim() || m != rp.actuated() {
        return Err(Error::Dimension(format!(
            "state has (n, m) = ({n}, {m}) but the system has ({}, {})",
            rp.dim(),
            rp.actuated()
        )));
    }
    Ok(())
}

fn lift<S: Real>(v: &[S]) -> Vec<Dual<S>> {
    v.iter().map(|&x| Dual::constant(x)).collect()
}

/// `K = p·X(q)y + p̃_α G^α − L̃_M`.
fn k_value<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    q: &[S],
    y: &[S],
    ydot_a: &[S],
    p: &[S],
    ptilde_alpha: &[S],
) -> Result<S> {
    let mp = m_point(rp, q, y, ydot_a)?;
    let v = quasi_to_velocity(&rp.sys, q, y);
    Ok(dot(p, &v) + dot(ptilde_alpha, &mp.g) - mp.ltilde)
}

/// `H̃ = p·X(q)y + p̃_a ẏ^a + p̃_α G^α − L̃_M`.
pub fn hamiltonian<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, w: &W0State<S>) -> Result<S> {
    let m = w.ydot_a.len();
    check_dims(rp, w.q.len(), m)?;
    let k = k_value(rp, &w.q, &w.y, &w.ydot_a, &w.p, &w.ptilde[m..])?;
    Ok(k + dot(&w.ptilde[..m], &w.ydot_a))
}

/// `(∂G^α/∂ẏ^a, ∂L̃_M/∂ẏ^a)`; the first has shape `(n−m) × m`.
fn ydot_sensitivities<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    q: &[S],
    y: &[S],
    ydot_a: &[S],
) -> Result<(Matrix<S>, Vec<S>)> {
    let (qd, yd) = (lift(q), lift(y));
    let jac = forward::try_jacobian(
        |z| {
            let mp = m_point(rp, &qd, &yd, z)?;
            let mut out = mp.g;
            out.push(mp.ltilde);
            Ok(out)
        },
        ydot_a,
    )?;
    let k = rp.unactuated();
    let dg = jac.block(0, k, 0, ydot_a.len());
    Ok((dg, jac.row(k).to_vec()))
}

/// `φ_a = p̃_a + p̃_α ∂G^α/∂ẏ^a − ∂L̃_M/∂ẏ^a`.
pub fn primary_constraints<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, w: &W0State<S>) -> Result<Vec<S>> {
    let m = w.ydot_a.len();
    check_dims(rp, w.q.len(), m)?;
    let (dg, dl) = ydot_sensitivities(rp, &w.q, &w.y, &w.ydot_a)?;
    let pta = &w.ptilde[m..];
    Ok((0..m).map(|a| w.ptilde[a] + (0..pta.len()).fold(S::zero(), |s, al| s + pta[al] * dg[(al, a)]) - dl[a]).collect())
}

/// The point of `W₀` over `w` with `φ_a = 0`:
/// `p̃_a = −p̃_α ∂G^α/∂ẏ^a + ∂L̃_M/∂ẏ^a`.
pub fn lift_to_w1<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, w: &W1State<S>) -> Result<W0State<S>> {
    let m = w.m();
    check_dims(rp, w.n(), m)?;
    let (dg, dl) = ydot_sensitivities(rp, &w.q, &w.y, &w.ydot_a)?;
    let pta = &w.ptilde_alpha;
    let mut ptilde: Vec<S> =
        (0..m).map(|a| dl[a] - (0..pta.len()).fold(S::zero(), |s, al| s + pta[al] * dg[(al, a)])).collect();
    ptilde.extend_from_slice(pta);
    Ok(W0State { q: w.q.clone(), y: w.y.clone(), ydot_a: w.ydot_a.clone(), p: w.p.clone(), ptilde })
}

fn dd<S: Real>(re: S, inner: S, outer: S) -> Dual<Dual<S>> {
    Dual::new(Dual::new(re, inner), Dual::new(outer, S::zero()))
}

/// `K` with the Hamel linear form at `(q, y)` supplied.
fn k_from<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    h: &HamelLinear<S>,
    q: &[S],
    y: &[S],
    ydot_a: &[S],
    p: &[S],
    ptilde_alpha: &[S],
) -> Result<S> {
    let mp = m_point_from(rp, h, q, y, ydot_a)?;
    let v = quasi_to_velocity(&rp.sys, q, y);
    Ok(dot(p, &v) + dot(ptilde_alpha, &mp.g) - mp.ltilde)
}

/// Hessian in `ẏ^a` of `L̃_M − p̃_α G^α`. `(q, y)` are fixed, so the Hamel
/// form is evaluated once and lifted.
fn regularity_matrix<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    h: &HamelLinear<S>,
    w: &W1State<S>,
) -> Result<Matrix<S>> {
    let c = |x: S| Dual::constant(Dual::constant(x));
    let h2 = h.map(c);
    let (q2, y2): (Vec<_>, Vec<_>) = (w.q.iter().map(|&x| c(x)).collect(), w.y.iter().map(|&x| c(x)).collect());
    let pta2: Vec<Dual<Dual<S>>> = w.ptilde_alpha.iter().map(|&x| c(x)).collect();
    let hess = forward::try_hessian(
        |z| {
            let mp = m_point_from(rp, &h2, &q2, &y2, z)?;
            Ok(mp.ltilde - dot(&pta2, &mp.g))
        },
        &w.ydot_a,
    )?;
    Ok(hess.hessian.symmetrize())
}

fn report<S: Real>(r: Matrix<S>) -> RegularityReport<S> {
    let det = r.det();
    let symplectic = !is_numerically_singular(&r, det, REGULARITY_TOLERANCE);
    let condition = r.primal().condition();
    RegularityReport { r, det, condition, symplectic }
}

/// `R_ab = ∂²L̃_M/∂ẏ^a∂ẏ^b − p̃_α ∂²G^α/∂ẏ^a∂ẏ^b` and the verdict on whether
/// `(W₁, Ω_{W₁})` is symplectic at `w`.
pub fn regularity<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, w: &W1State<S>) -> Result<RegularityReport<S>> {
    check_dims(rp, w.n(), w.m())?;
    let h = hamel_linear(&rp.sys, &w.q, &w.y, &rp.diff)?;
    Ok(report(regularity_matrix(rp, &h, w)?))
}

/// The unique vector field on `W₁` solving `i_X Ω = dH̃`, in `W₁` coordinates.
///
/// `q̇ = Xy`, `ẏ = (ẏ^a, G^α)`, `ṗ = −∂K/∂q`, `p̃̇_α = −∂K/∂y^α`. For `ÿ^a`,
/// the time derivative of `p̃_a = g_a(q, y, ẏ^a, p̃_α)` must equal
/// `−∂K/∂y^a`; expanding it gives `R ÿ = −∂K/∂y^a − (∂g_a/∂z)·ż` with
/// `z = (q, y, p̃_α)` and `ż` already known.
pub fn w1_vector_field<M: MechanicalSystem, S: Real>(rp: &ReducedProblem<M>, w: &W1State<S>) -> Result<W1State<S>> {
    field_and_cost(rp, w).map(|(f, _)| f)
}

/// The vector field together with the running cost `L̃_M` at `w`.
pub(crate) fn field_and_cost<M: MechanicalSystem, S: Real>(
    rp: &ReducedProblem<M>,
    w: &W1State<S>,
) -> Result<(W1State<S>, S)> {
    let (n, m) = (w.n(), w.m());
    check_dims(rp, n, m)?;
    let mp = m_point(rp, &w.q, &w.y, &w.ydot_a)?;
    let dq = quasi_to_velocity(&rp.sys, &w.q, &w.y);
    let dy = mp.ydot;

    let (yd1, p1, pta1) = (lift(&w.ydot_a), lift(&w.p), lift(&w.ptilde_alpha));
    let qy = [&w.q[..], &w.y].concat();
    let grad = forward::try_gradient(|z| k_value(rp, &z[..n], &z[n..], &yd1, &p1, &pta1), &qy)?;
    let dp: Vec<S> = grad[..n].iter().map(|&v| -v).collect();
    let dpta: Vec<S> = grad[n + m..].iter().map(|&v| -v).collect();

    // Mixed second derivatives of K: ẏ^a (inner tangent) against the known
    // motion of (q, y, p̃_α) (outer tangent). Only the outer tangent reaches
    // the Hamel form, so it is evaluated once at first order and lifted.
    let q1: Vec<Dual<S>> = w.q.iter().zip(&dq).map(|(&x, &d)| Dual::new(x, d)).collect();
    let y1: Vec<Dual<S>> = w.y.iter().zip(&dy).map(|(&x, &d)| Dual::new(x, d)).collect();
    let h1 = hamel_linear(&rp.sys, &q1, &y1, &rp.diff)?;
    let outer = |d: Dual<S>| dd(d.re, S::zero(), d.eps);
    let h2 = h1.map(outer);
    let q2: Vec<_> = q1.iter().map(|&d| outer(d)).collect();
    let y2: Vec<_> = y1.iter().map(|&d| outer(d)).collect();
    let p2: Vec<_> = w.p.iter().map(|&x| dd(x, S::zero(), S::zero())).collect();
    let pta2: Vec<_> = w.ptilde_alpha.iter().zip(&dpta).map(|(&x, &d)| dd(x, S::zero(), d)).collect();
    let mut mixed = Vec::with_capacity(m);
    for a in 0..m {
        let yd2: Vec<_> = (0..m)
            .map(|b| dd(w.ydot_a[b], if a == b { S::one() } else { S::zero() }, S::zero()))
            .collect();
        let k = k_from(rp, &h2, &q2, &y2, &yd2, &p2, &pta2)?;
        if !k.is_finite() {
            return Err(Error::non_finite(&w.to_vec()));
        }
        mixed.push(k.eps.eps);
    }

    let h0 = hamel_linear(&rp.sys, &w.q, &w.y, &rp.diff)?;
    let rep = report(regularity_matrix(rp, &h0, w)?);
    // mixed_a = −(∂g_a/∂z)·ż because g_a = −∂K/∂ẏ^a.
    let rhs: Vec<S> = (0..m).map(|a| mixed[a] - grad[n + a]).collect();
    let yddot = rep.r.solve(&rhs).ok_or(Error::RegularityFailure { det: 0.0, threshold: 0.0 })?;

    let out = W1State { q: dq, y: dy, ydot_a: yddot, p: dp, ptilde_alpha: dpta };
    if !all_finite(&out.to_vec()) {
        return Err(Error::non_finite(&w.to_vec()));
    }
    Ok((out, mp.ltilde))
}

/// The constant skew matrix of `Ω` in the coordinate order `(q, y, ẏ^a, p, p̃)`:
/// `Ω(u, v) = uᵀ Ω v`.
pub fn presymplectic_form(n: usize, m: usize) -> Matrix<f64> {
    let mut om = Matrix::zeros(4 * n + m, 4 * n + m);
    let (p0, pt0) = (2 * n + m, 3 * n + m);
    for a in 0..n {
        om[(a, p0 + a)] = 1.0;
        om[(p0 + a, a)] = -1.0;
        om[(n + a, pt0 + a)] = 1.0;
        om[(pt0 + a, n + a)] = -1.0;
    }
    om
}

/// Differential of the lift `W₁ → W₀` by central differences, `(4n+m) × 4n`.
pub fn lift_differential<M: MechanicalSystem>(rp: &ReducedProblem<M>, w: &W1State<f64>, step: f64) -> Result<Matrix<f64>> {
    let (n, m) = (w.n(), w.m());
    let x = w.to_vec();
    let f = |v: &[f64]| -> Result<Vec<f64>> { Ok(lift_to_w1(rp, &W1State::from_slice(n, m, v)?)?.to_vec()) };
    let mut cols = Vec::with_capacity(x.len());
    let mut z = x.clone();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        z[i] = x[i] + h;
        let fp = f(&z)?;
        z[i] = x[i] - h;
        let fm = f(&z)?;
        z[i] = x[i];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    Ok(Matrix::from_fn(4 * n + m, x.len(), |r, c| cols[c][r]))
}

fn central_directional(f: impl Fn(&[f64]) -> Result<f64>, x: &[f64], dir: &[f64], step: f64) -> Result<f64> {
    let zp: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
    let zm: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - step * d).collect();
    Ok((f(&zp)? - f(&zm)?) / (2.0 * step))
}

/// `max_V |Ω(X, V) − dH̃(V)|` over the images `V` of the coordinate basis of
/// `T W₁` in `T W₀`, with `X` the lifted vector field.
///
/// Only `w1_vector_field` comes from the exact-derivative pipeline; the lift
/// differential and `dH̃` are central differences of plain `f64` evaluations.
pub fn presymplectic_residual<M: MechanicalSystem>(rp: &ReducedProblem<M>, w: &W1State<f64>) -> Result<f64> {
    let (n, m) = (w.n(), w.m());
    let field = w1_vector_field(rp, w)?.to_vec();
    let dl = lift_differential(rp, w, 1e-6)?;
    let x_lift = dl.mul_vec(&field);
    let om = presymplectic_form(n, m);
    let base = lift_to_w1(rp, w)?.to_vec();
    let h = |v: &[f64]| hamiltonian(rp, &W0State::from_slice(n, m, v)?);
    let om_x = om.tr_mul_vec(&x_lift);
    let mut worst: f64 = 0.0;
    for i in 0..4 * n {
        let v = dl.column(i);
        let scale = crate::linalg::norm_inf(&v).max(1.0);
        let dh = central_directional(&h, &base, &v, 1e-5 / scale)?;
        worst = worst.max((dot(&om_x, &v) - dh).abs());
    }
    Ok(worst)
}

/// `max_a |dφ_a(X₀)|`, where `X₀` is the lifted field with its `p̃_a` rows
/// replaced by the Hamilton equation `p̃̇_a = −∂H̃/∂y^a`. Vanishes when
/// the field is tangent to `W₁`.
pub fn constraint_drift_rate<M: MechanicalSystem>(rp: &ReducedProblem<M>, w: &W1State<f64>) -> Result<f64> {
    let (n, m) = (w.n(), w.m());
    let field = w1_vector_field(rp, w)?.to_vec();
    let base = lift_to_w1(rp, w)?.to_vec();
    let mut x0 = lift_differential(rp, w, 1e-6)?.mul_vec(&field);
    let h = |v: &[f64]| hamiltonian(rp, &W0State::from_slice(n, m, v)?);
    let pt0 = 3 * n + m;
    for a in 0..m {
        let mut e = vec![0.0; 4 * n + m];
        e[n + a] = 1.0;
        x0[pt0 + a] = -central_directional(&h, &base, &e, 1e-5 * base[n + a].abs().max(1.0))?;
    }
    let scale = crate::linalg::norm_inf(&x0).max(1.0);
    let step = 1e-5 / scale;
    let mut worst: f64 = 0.0;
    for a in 0..m {
        let phi = |v: &[f64]| Ok(primary_constraints(rp, &W0State::from_slice(n, m, v)?)?[a]);
        worst = worst.max(central_directional(phi, &base, &x0, step)?.abs());
    }
    Ok(worst)
}

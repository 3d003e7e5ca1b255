//! Differentiation kernel: gradients, Jacobians, Hessians and directional
//! derivatives by central differences or forward-mode dual numbers.
//!
//! The [`central`] and [`forward`] submodules work on closures at a fixed
//! scalar type. The top-level functions dispatch on a [`DiffConfig`] and take
//! scalar-generic functions ([`ScalarFunction`], [`VectorFunction`]).

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DiffScheme {
    #[default]
    CentralDifference,
    DualNumber,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffConfig {
    pub scheme: DiffScheme,
    /// Central-difference step, scaled per coordinate by `max(1, |x_i|)`.
    pub step: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self { scheme: DiffScheme::CentralDifference, step: f64::EPSILON.cbrt() }
    }
}

impl DiffConfig {
    pub fn central(step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidConfig(format!("difference step must be positive, got {step}")));
        }
        Ok(Self { scheme: DiffScheme::CentralDifference, step })
    }

    pub fn dual() -> Self {
        Self { scheme: DiffScheme::DualNumber, ..Self::default() }
    }

    /// Step used for second derivatives, `step^(3/4)`; with the default step
    /// this is ε^(1/4), which balances truncation against rounding for a
    /// difference of differences.
    pub fn second_order_step(&self) -> f64 {
        self.step.powf(0.75)
    }
}

/// A scalar function that can be evaluated at any [`Real`] type.
pub trait ScalarFunction {
    fn eval<T: Real>(&self, x: &[T]) -> T;
}

/// A vector-valued function that can be evaluated at any [`Real`] type.
pub trait VectorFunction {
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T>;
}

fn checked<T: Real>(v: T, x: &[T]) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::non_finite(x))
    }
}

fn checked_vec<T: Real>(v: Vec<T>, x: &[T]) -> Result<Vec<T>> {
    if v.iter().all(|e| e.is_finite()) {
        Ok(v)
    } else {
        Err(Error::non_finite(x))
    }
}

pub fn gradient<S: Real, F: ScalarFunction>(f: &F, x: &[S], cfg: &DiffConfig) -> Result<Vec<S>> {
    match cfg.scheme {
        DiffScheme::CentralDifference => central::gradient(|z: &[S]| f.eval(z), x, cfg.step),
        DiffScheme::DualNumber => forward::gradient(|z: &[Dual<S>]| f.eval(z), x),
    }
}

pub fn jacobian<S: Real, F: VectorFunction>(f: &F, x: &[S], cfg: &DiffConfig) -> Result<Matrix<S>> {
    match cfg.scheme {
        DiffScheme::CentralDifference => central::jacobian(|z: &[S]| f.eval(z), x, cfg.step),
        DiffScheme::DualNumber => forward::jacobian(|z: &[Dual<S>]| f.eval(z), x),
    }
}

pub fn hessian<S: Real, F: ScalarFunction>(f: &F, x: &[S], cfg: &DiffConfig) -> Result<Matrix<S>> {
    match cfg.scheme {
        DiffScheme::CentralDifference => {
            central::hessian(|z: &[S]| f.eval(z), x, cfg.second_order_step())
        }
        DiffScheme::DualNumber => forward::hessian(|z: &[Dual<Dual<S>>]| f.eval(z), x).map(|h| h.hessian),
    }
}

pub fn directional<S: Real, F: ScalarFunction>(f: &F, x: &[S], dir: &[S], cfg: &DiffConfig) -> Result<S> {
    match cfg.scheme {
        DiffScheme::CentralDifference => central::directional(|z: &[S]| f.eval(z), x, dir, cfg.step),
        DiffScheme::DualNumber => forward::directional(|z: &[Dual<S>]| f.eval(z), x, dir).map(|(_, d)| d),
    }
}

/// Central differences on closures.
pub mod central {
    use super::*;

    #[inline]
    fn scaled_step<S: Real>(x: S, step: f64) -> f64 {
        step * x.to_f64().abs().max(1.0)
    }

    pub fn gradient<S: Real>(f: impl Fn(&[S]) -> S, x: &[S], step: f64) -> Result<Vec<S>> {
        let mut z = x.to_vec();
        let mut g = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let h = S::from_f64(scaled_step(x[i], step));
            z[i] = x[i] + h;
            let fp = checked(f(&z), &z)?;
            z[i] = x[i] - h;
            let fm = checked(f(&z), &z)?;
            z[i] = x[i];
            g.push((fp - fm) / (h + h));
        }
        Ok(g)
    }

    /// Row `i` of the result is the gradient of component `i`.
    pub fn jacobian<S: Real>(f: impl Fn(&[S]) -> Vec<S>, x: &[S], step: f64) -> Result<Matrix<S>> {
        let mut z = x.to_vec();
        let mut cols: Vec<Vec<S>> = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let h = S::from_f64(scaled_step(x[i], step));
            z[i] = x[i] + h;
            let fp = checked_vec(f(&z), &z)?;
            z[i] = x[i] - h;
            let fm = checked_vec(f(&z), &z)?;
            z[i] = x[i];
            cols.push(fp.iter().zip(&fm).map(|(&a, &b)| (a - b) / (h + h)).collect());
        }
        let rows = cols.first().map_or(0, Vec::len);
        Ok(Matrix::from_fn(rows, x.len(), |r, c| cols[c][r]))
    }

    /// Hessian by central differencing of central gradients, symmetrized.
    pub fn hessian<S: Real>(f: impl Fn(&[S]) -> S, x: &[S], step: f64) -> Result<Matrix<S>> {
        let n = x.len();
        let mut z = x.to_vec();
        let mut h = Matrix::zeros(n, n);
        for j in 0..n {
            let hj = S::from_f64(scaled_step(x[j], step));
            z[j] = x[j] + hj;
            let gp = gradient(&f, &z, step)?;
            z[j] = x[j] - hj;
            let gm = gradient(&f, &z, step)?;
            z[j] = x[j];
            for i in 0..n {
                h[(i, j)] = (gp[i] - gm[i]) / (hj + hj);
            }
        }
        Ok(h.symmetrize())
    }

    pub fn directional<S: Real>(f: impl Fn(&[S]) -> S, x: &[S], dir: &[S], step: f64) -> Result<S> {
        let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.to_f64().abs()));
        let h = S::from_f64(step * scale);
        let zp: Vec<S> = x.iter().zip(dir).map(|(&a, &d)| a + h * d).collect();
        let zm: Vec<S> = x.iter().zip(dir).map(|(&a, &d)| a - h * d).collect();
        let fp = checked(f(&zp), &zp)?;
        let fm = checked(f(&zm), &zm)?;
        Ok((fp - fm) / (h + h))
    }
}

/// Forward-mode differentiation with (nested) dual numbers.
///
/// The `try_` variants accept fallible closures and stop at the first error.
pub mod forward {
    use super::*;
    use crate::dual;

    fn finite<T: Real>(v: T, x: &[impl Real]) -> Result<T> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite(x))
        }
    }

    pub fn try_gradient<S: Real>(mut f: impl FnMut(&[Dual<S>]) -> Result<Dual<S>>, x: &[S]) -> Result<Vec<S>> {
        (0..x.len()).map(|i| Ok(finite(f(&dual::seeded_axis(x, i))?, x)?.eps)).collect()
    }

    pub fn gradient<S: Real>(f: impl Fn(&[Dual<S>]) -> Dual<S>, x: &[S]) -> Result<Vec<S>> {
        try_gradient(|z| Ok(f(z)), x)
    }

    pub fn try_jacobian<S: Real>(
        mut f: impl FnMut(&[Dual<S>]) -> Result<Vec<Dual<S>>>,
        x: &[S],
    ) -> Result<Matrix<S>> {
        let mut cols = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let out = f(&dual::seeded_axis(x, i))?;
            if !out.iter().all(|v| v.is_finite()) {
                return Err(Error::non_finite(x));
            }
            cols.push(out.into_iter().map(|v| v.eps).collect::<Vec<_>>());
        }
        let rows = cols.first().map_or(0, Vec::len);
        Ok(Matrix::from_fn(rows, x.len(), |r, c| cols[c][r]))
    }

    /// Row `i` of the result is the gradient of component `i`.
    pub fn jacobian<S: Real>(f: impl Fn(&[Dual<S>]) -> Vec<Dual<S>>, x: &[S]) -> Result<Matrix<S>> {
        try_jacobian(|z| Ok(f(z)), x)
    }

    /// Value and derivative along `dir`.
    pub fn directional<S: Real>(f: impl Fn(&[Dual<S>]) -> Dual<S>, x: &[S], dir: &[S]) -> Result<(S, S)> {
        let v = finite(f(&dual::seeded(x, dir)), x)?;
        Ok((v.re, v.eps))
    }

    /// Values and derivatives along `dir` of a fallible vector function.
    pub fn try_directional_vec<S: Real>(
        mut f: impl FnMut(&[Dual<S>]) -> Result<Vec<Dual<S>>>,
        x: &[S],
        dir: &[S],
    ) -> Result<(Vec<S>, Vec<S>)> {
        let v = f(&dual::seeded(x, dir))?;
        if !v.iter().all(|e| e.is_finite()) {
            return Err(Error::non_finite(x));
        }
        Ok(v.into_iter().map(|e| (e.re, e.eps)).unzip())
    }

    pub struct SecondOrder<S> {
        pub value: S,
        pub gradient: Vec<S>,
        pub hessian: Matrix<S>,
    }

    fn two_tangents<S: Real>(x: &[S], inner: impl Fn(usize) -> S, outer: impl Fn(usize) -> S) -> Vec<Dual<Dual<S>>> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| Dual::new(Dual::new(v, inner(k)), Dual::new(outer(k), S::zero())))
            .collect()
    }

    fn unit<S: Real>(k: usize, i: usize) -> S {
        if k == i {
            S::one()
        } else {
            S::zero()
        }
    }

    /// Value, gradient and Hessian from `n(n+1)/2` forward-over-forward
    /// evaluations.
    pub fn try_hessian<S: Real>(
        mut f: impl FnMut(&[Dual<Dual<S>>]) -> Result<Dual<Dual<S>>>,
        x: &[S],
    ) -> Result<SecondOrder<S>> {
        let n = x.len();
        let mut value = S::zero();
        let mut gradient = vec![S::zero(); n];
        let mut hessian = Matrix::zeros(n, n);
        if n == 0 {
            value = finite(f(&[])?, x)?.re.re;
        }
        for i in 0..n {
            for j in i..n {
                let r = finite(f(&two_tangents(x, |k| unit(k, j), |k| unit(k, i)))?, x)?;
                if i == j {
                    value = r.re.re;
                    gradient[i] = r.eps.re;
                }
                hessian[(i, j)] = r.eps.eps;
                hessian[(j, i)] = r.eps.eps;
            }
        }
        Ok(SecondOrder { value, gradient, hessian })
    }

    pub fn hessian<S: Real>(f: impl Fn(&[Dual<Dual<S>>]) -> Dual<Dual<S>>, x: &[S]) -> Result<SecondOrder<S>> {
        try_hessian(|z| Ok(f(z)), x)
    }

    /// For each axis `j` in `axes`: the first derivative `∂f/∂x_j` and the
    /// mixed derivative `dirᵀ ∇(∂f/∂x_j)`. One evaluation per axis.
    pub fn try_mixed_along<S: Real>(
        mut f: impl FnMut(&[Dual<Dual<S>>]) -> Result<Dual<Dual<S>>>,
        x: &[S],
        dir: &[S],
        axes: &[usize],
    ) -> Result<(Vec<S>, Vec<S>)> {
        let mut first = Vec::with_capacity(axes.len());
        let mut mixed = Vec::with_capacity(axes.len());
        for &a in axes {
            let r = finite(f(&two_tangents(x, |k| unit(k, a), |k| dir[k]))?, x)?;
            first.push(r.re.eps);
            mixed.push(r.eps.eps);
        }
        Ok((first, mixed))
    }
}

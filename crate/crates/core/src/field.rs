//! Analytic scalar/vector fields with optional exact derivatives, and a small
//! bivariate polynomial type used to generate them.
//!
//! Derivatives are never approximated numerically: a field either carries an
//! analytic gradient/Hessian or operations that need one refuse to run.

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Symmetric second-derivative matrix of a scalar field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Hessian {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Hessian {
    /// Second directional derivative along the (unit) direction `t`.
    pub fn along(self, t: Vec2) -> f64 {
        self.xx * t.x * t.x + 2.0 * self.xy * t.x * t.y + self.yy * t.y * t.y
    }

    pub fn laplacian(self) -> f64 {
        self.xx + self.yy
    }

    /// xx - yy, the combination entering the Raviart-Thomas error expansion.
    pub fn deviator(self) -> f64 {
        self.xx - self.yy
    }
}

type ValueFn = Box<dyn Fn(Vec2) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
type HessFn = Box<dyn Fn(Vec2) -> Hessian + Send + Sync>;
type VecFn = Box<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
type DivFn = Box<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// Scalar field given by closures, with optional analytic derivatives.
pub struct ScalarField {
    value: ValueFn,
    grad: Option<GradFn>,
    hess: Option<HessFn>,
}

impl ScalarField {
    pub fn new(value: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { value: Box::new(value), grad: None, hess: None }
    }

    pub fn with_gradient(mut self, grad: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    pub fn with_hessian(mut self, hess: impl Fn(Vec2) -> Hessian + Send + Sync + 'static) -> Self {
        self.hess = Some(Box::new(hess));
        self
    }

    pub fn value(&self, x: Vec2) -> f64 {
        (self.value)(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn has_hessian(&self) -> bool {
        self.hess.is_some()
    }

    pub fn gradient(&self, x: Vec2) -> Result<Vec2> {
        match &self.grad {
            Some(g) => Ok(g(x)),
            None => Err(Error::MissingDerivative("an analytic gradient")),
        }
    }

    pub fn hessian(&self, x: Vec2) -> Result<Hessian> {
        match &self.hess {
            Some(h) => Ok(h(x)),
            None => Err(Error::MissingDerivative("an analytic Hessian")),
        }
    }
}

/// Vector field given by a closure, with optional analytic divergence.
pub struct VectorField {
    value: VecFn,
    div: Option<DivFn>,
}

impl VectorField {
    pub fn new(value: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        VectorField { value: Box::new(value), div: None }
    }

    pub fn with_divergence(mut self, div: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> Self {
        self.div = Some(Box::new(div));
        self
    }

    pub fn constant(v: Vec2) -> Self {
        VectorField::new(move |_| v).with_divergence(|_| 0.0)
    }

    pub fn value(&self, x: Vec2) -> Vec2 {
        (self.value)(x)
    }

    pub fn divergence(&self, x: Vec2) -> Result<f64> {
        match &self.div {
            Some(d) => Ok(d(x)),
            None => Err(Error::MissingDerivative("an analytic divergence")),
        }
    }
}

/// Bivariate polynomial stored as a monomial list `c * x^i * y^j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly2 {
    terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    pub fn new(terms: &[(u32, u32, f64)]) -> Self {
        let mut p = Poly2 { terms: terms.to_vec() };
        p.compress();
        p
    }

    pub fn constant(c: f64) -> Self {
        Poly2::new(&[(0, 0, c)])
    }

    fn compress(&mut self) {
        self.terms.sort_by_key(|&(i, j, _)| (i, j));
        let mut out: Vec<(u32, u32, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, j, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += c,
                _ => out.push((i, j, c)),
            }
        }
        out.retain(|&(_, _, c)| c != 0.0);
        self.terms = out;
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(i, j, _)| i + j).max().unwrap_or(0)
    }

    pub fn value(&self, p: Vec2) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * p.x.powi(i as i32) * p.y.powi(j as i32))
            .sum()
    }

    pub fn dx(&self) -> Poly2 {
        Poly2::new(
            &self
                .terms
                .iter()
                .filter(|&&(i, _, _)| i > 0)
                .map(|&(i, j, c)| (i - 1, j, c * i as f64))
                .collect::<Vec<_>>(),
        )
    }

    pub fn dy(&self) -> Poly2 {
        Poly2::new(
            &self
                .terms
                .iter()
                .filter(|&&(_, j, _)| j > 0)
                .map(|&(i, j, c)| (i, j - 1, c * j as f64))
                .collect::<Vec<_>>(),
        )
    }

    pub fn grad(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.dx().value(p), self.dy().value(p))
    }

    pub fn hessian(&self, p: Vec2) -> Hessian {
        Hessian {
            xx: self.dx().dx().value(p),
            xy: self.dx().dy().value(p),
            yy: self.dy().dy().value(p),
        }
    }

    /// Random polynomial of total degree `deg` with coefficients in [-1, 1].
    pub fn random(deg: u32, rng: &mut impl rand::Rng) -> Poly2 {
        let mut terms = Vec::new();
        for i in 0..=deg {
            for j in 0..=(deg - i) {
                terms.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        Poly2::new(&terms)
    }

    pub fn as_field(&self) -> ScalarField {
        let v = self.clone();
        let g = self.clone();
        let h = self.clone();
        ScalarField::new(move |x| v.value(x))
            .with_gradient(move |x| g.grad(x))
            .with_hessian(move |x| h.hessian(x))
    }

    /// Gradient as a vector field with analytic divergence (the Laplacian).
    pub fn grad_field(&self) -> VectorField {
        let g = self.clone();
        let lap_x = self.dx().dx();
        let lap_y = self.dy().dy();
        VectorField::new(move |x| g.grad(x))
            .with_divergence(move |x| lap_x.value(x) + lap_y.value(x))
    }
}

/// Dirichlet Laplace eigenvalue (m^2 + n^2) pi^2 of the unit square.
pub fn square_eigenvalue(m: u32, n: u32) -> f64 {
    ((m * m + n * n) as f64) * std::f64::consts::PI * std::f64::consts::PI
}

/// L2-normalized eigenfunction 2 sin(m pi x) sin(n pi y) of the unit square,
/// with analytic gradient and Hessian.
pub fn square_eigenfunction(m: u32, n: u32) -> ScalarField {
    use std::f64::consts::PI;
    let (a, b) = (m as f64 * PI, n as f64 * PI);
    ScalarField::new(move |p: Vec2| 2.0 * (a * p.x).sin() * (b * p.y).sin())
        .with_gradient(move |p: Vec2| {
            Vec2::new(
                2.0 * a * (a * p.x).cos() * (b * p.y).sin(),
                2.0 * b * (a * p.x).sin() * (b * p.y).cos(),
            )
        })
        .with_hessian(move |p: Vec2| Hessian {
            xx: -2.0 * a * a * (a * p.x).sin() * (b * p.y).sin(),
            xy: 2.0 * a * b * (a * p.x).cos() * (b * p.y).cos(),
            yy: -2.0 * b * b * (a * p.x).sin() * (b * p.y).sin(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_derivatives_match_hand_expansion() {
        // p = 3 x^2 y - 2 y^3 + x
        let p = Poly2::new(&[(2, 1, 3.0), (0, 3, -2.0), (1, 0, 1.0)]);
        let at = Vec2::new(0.7, -1.3);
        assert_eq!(p.grad(at).x, 6.0 * at.x * at.y + 1.0);
        assert_eq!(p.grad(at).y, 3.0 * at.x * at.x - 6.0 * at.y * at.y);
        let h = p.hessian(at);
        assert_eq!(h.xx, 6.0 * at.y);
        assert_eq!(h.xy, 6.0 * at.x);
        assert_eq!(h.yy, -12.0 * at.y);
    }

    #[test]
    fn eigenfunction_satisfies_pde() {
        let u = square_eigenfunction(2, 3);
        let lambda = square_eigenvalue(2, 3);
        let x = Vec2::new(0.31, 0.57);
        let lap = u.hessian(x).unwrap().laplacian();
        assert!((lap + lambda * u.value(x)).abs() < 1e-10 * lambda);
    }

    #[test]
    fn missing_derivative_is_refused() {
        let f = ScalarField::new(|p: Vec2| p.x);
        assert!(matches!(f.gradient(Vec2::ZERO), Err(Error::MissingDerivative(_))));
    }
}

//! The common interface for anything the losses and metrics can score,
//! whether a network or a closed-form oracle.

use ndarray::Array2;

use crate::domain::Hyperplane;

/// A real field on `R^d` with spatial derivatives up to order two.
pub trait Evaluable: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn hessian(&self, x: &[f64]) -> Array2<f64>;

    /// Hyperplanes across which the field (or a derivative) is non-smooth.
    /// Quadrature aligns panel edges to these; smooth fields return none.
    fn kinks(&self) -> Vec<Hyperplane> {
        Vec::new()
    }
}

impl<E: Evaluable + ?Sized> Evaluable for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        (**self).hessian(x)
    }
    fn kinks(&self) -> Vec<Hyperplane> {
        (**self).kinks()
    }
}

type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type HessFn = Box<dyn Fn(&[f64]) -> Array2<f64> + Send + Sync>;

/// An oracle built from closures.
pub struct FnField {
    dim: usize,
    value: ValueFn,
    gradient: GradFn,
    hessian: HessFn,
}

impl FnField {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> Array2<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
        }
    }

    /// The constant field `c`.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(
            dim,
            move |_| c,
            move |_| vec![0.0; dim],
            move |_| Array2::zeros((dim, dim)),
        )
    }

    /// The zero field.
    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }
}

impl Evaluable for FnField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        (self.hessian)(x)
    }
}

/// `inner + shift`.
pub struct Shifted<E> {
    pub inner: E,
    pub shift: f64,
}

impl<E: Evaluable> Evaluable for Shifted<E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) + self.shift
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.inner.gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        self.inner.hessian(x)
    }
    fn kinks(&self) -> Vec<Hyperplane> {
        self.inner.kinks()
    }
}

/// `a + scale·b`, used for perturbation tests.
pub struct Combination<A, B> {
    pub a: A,
    pub b: B,
    pub scale: f64,
}

impl<A: Evaluable, B: Evaluable> Evaluable for Combination<A, B> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.a.value(x) + self.scale * self.b.value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.gradient(x);
        for (gi, bi) in g.iter_mut().zip(self.b.gradient(x)) {
            *gi += self.scale * bi;
        }
        g
    }
    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        self.a.hessian(x) + self.b.hessian(x) * self.scale
    }
    fn kinks(&self) -> Vec<Hyperplane> {
        let mut k = self.a.kinks();
        k.extend(self.b.kinks());
        k
    }
}

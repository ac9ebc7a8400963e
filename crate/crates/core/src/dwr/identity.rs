//! Error representation for stationary points of a functional on a subspace.

use crate::fem::quadrature::gauss_1d;
use crate::linalg::dot;
use crate::Real;

type Value<'a, T> = Box<dyn Fn(&[T]) -> T + 'a>;
type Derivative<'a, T> = Box<dyn Fn(&[T], &[T]) -> T + 'a>;
type ThirdDerivative<'a, T> = Box<dyn Fn(&[T], &[T], &[T], &[T]) -> T + 'a>;

/// A differentiable functional `L` on `ℝⁿ` with `L′` and optionally `L‴`.
pub struct AbstractFunctional<'a, T> {
    pub value: Value<'a, T>,
    pub derivative: Derivative<'a, T>,
    pub third_derivative: Option<ThirdDerivative<'a, T>>,
}

impl<'a, T: Real> AbstractFunctional<'a, T> {
    pub fn new(value: impl Fn(&[T]) -> T + 'a, derivative: impl Fn(&[T], &[T]) -> T + 'a) -> Self {
        Self { value: Box::new(value), derivative: Box::new(derivative), third_derivative: None }
    }

    pub fn with_third_derivative(mut self, d3: impl Fn(&[T], &[T], &[T], &[T]) -> T + 'a) -> Self {
        self.third_derivative = Some(Box::new(d3));
        self
    }

    /// `½xᵀAx − b·x` for a dense symmetric `A`.
    pub fn quadratic(a: &'a [Vec<T>], b: &'a [T]) -> Self {
        let apply = move |x: &[T]| -> Vec<T> { a.iter().map(|row| dot(row, x)).collect() };
        Self::new(move |x| T::half() * dot(x, &apply(x)) - dot(b, x), move |x, d| dot(&apply(x), d) - dot(b, d))
    }

    /// Largest `|L′(x_h)(φ)|` over the given subspace basis.
    pub fn stationarity_defect(&self, x_h: &[T], basis: &[Vec<T>]) -> T {
        basis.iter().map(|phi| (self.derivative)(x_h, phi).abs()).fold(T::zero(), T::max)
    }
}

/// Result of the abstract identity `L(x) − L(x_h) = ½L′(x_h)(x − y_h) + R_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityEvaluation<T> {
    pub estimate: T,
    /// `R_h = ½∫₀¹ L‴(x_h + s e)(e, e, e) s(s − 1) ds`, when `L‴` is known.
    pub remainder: Option<T>,
}

/// Evaluates the error representation of a stationary point `x_h`.
///
/// `y_h` is any element of the discrete subspace; the caller guarantees that
/// `x_h` is stationary there (see [`AbstractFunctional::stationarity_defect`]).
pub fn abstract_error_identity<T: Real>(
    l: &AbstractFunctional<'_, T>,
    x: &[T],
    x_h: &[T],
    y_h: &[T],
) -> IdentityEvaluation<T> {
    let dir: Vec<T> = x.iter().zip(y_h).map(|(&a, &b)| a - b).collect();
    let estimate = T::half() * (l.derivative)(x_h, &dir);
    let remainder = l.third_derivative.as_ref().map(|d3| {
        let e: Vec<T> = x.iter().zip(x_h).map(|(&a, &b)| a - b).collect();
        let integral: T = gauss_1d::<T>(5)
            .into_iter()
            .map(|(s, w)| {
                let p: Vec<T> = x_h.iter().zip(&e).map(|(&xh, &ei)| xh + s * ei).collect();
                w * d3(&p, &e, &e, &e) * s * (s - T::one())
            })
            .sum();
        T::half() * integral
    });
    IdentityEvaluation { estimate, remainder }
}

/// Both sides of the trapezoidal-rule error formula
/// `∫₀¹ f ds − ½(f(0) + f(1)) = ½∫₀¹ f″(s) s(s − 1) ds`, each integral by
/// composite Simpson with 20 panels.
pub fn trapezoid_kernel_check<T: Real>(f: impl Fn(T) -> T, f2: impl Fn(T) -> T) -> (T, T) {
    let left = simpson(&f) - T::half() * (f(T::zero()) + f(T::one()));
    let right = T::half() * simpson(|s| f2(s) * s * (s - T::one()));
    (left, right)
}

fn simpson<T: Real>(f: impl Fn(T) -> T) -> T {
    const PANELS: usize = 20;
    let h = T::one() / T::from_count(PANELS);
    let mut acc = T::zero();
    for k in 0..PANELS {
        let a = T::from_count(k) * h;
        acc += h / T::lit(6.0) * (f(a) + T::lit(4.0) * f(a + h * T::half()) + f(a + h));
    }
    acc
}

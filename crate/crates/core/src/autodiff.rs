//! Reverse-mode differentiation on a scalar tape.
//!
//! Kernels are written once against [`Real`] and run either on plain `f64`
//! or on tape variables [`Var`]. The value carried by a `Var` is produced by
//! exactly the same floating-point operations as the `f64` path, so both
//! evaluations agree bit for bit.
//!
//! Kinks follow one convention everywhere: `max(a, b)` selects `b` on ties
//! and `min(a, b)` selects `b` on ties, so `relu(z) = max(z, 0)` has
//! derivative 0 at `z = 0`.

use std::cell::{Cell, RefCell};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar arithmetic shared by `f64` and tape variables.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A value that does not depend on any input.
    fn constant(x: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn max(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;

    fn relu(self) -> Self {
        self.max(Self::constant(0.0))
    }

    fn square(self) -> Self {
        self * self
    }

    /// `c - self`.
    fn rsub(self, c: f64) -> Self {
        -self + c
    }
}

impl Real for f64 {
    #[inline]
    fn constant(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        if self > other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        if self < other {
            self
        } else {
            other
        }
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Append-only record of elementary operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A scalar on a [`Tape`], or a constant when `tape` is `None`.
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { nodes: RefCell::new(Vec::with_capacity(n)) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.nodes.borrow_mut().clear();
    }

    /// A new independent variable.
    pub fn var(&self, x: f64) -> Var<'_> {
        let idx = self.push(Node { parents: [NO_PARENT; 2], partials: [0.0; 2] });
        Var { tape: Some(self), idx, val: x }
    }

    pub fn vars(&self, xs: &[f64]) -> Vec<Var<'_>> {
        xs.iter().map(|&x| self.var(x)).collect()
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < NO_PARENT as usize, "tape exceeds 2^32 - 1 nodes");
        nodes.push(node);
        idx as u32
    }

    /// Adjoints of every node with respect to `out`.
    pub fn adjoints(&self, out: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        if out.tape.is_none() {
            return adj;
        }
        adj[out.idx as usize] = 1.0;
        for i in (0..=out.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NO_PARENT {
                    adj[p as usize] += a * node.partials[k];
                }
            }
        }
        adj
    }
}

thread_local! {
    static SHARED_TAPE: Tape = Tape::with_capacity(1 << 12);
    static SHARED_BUSY: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` on a cleared, thread-local tape. Nested calls fall back to a
/// fresh tape so an outer recording is never disturbed.
pub fn with_tape<R>(f: impl FnOnce(&Tape) -> R) -> R {
    if SHARED_BUSY.with(|b| b.replace(true)) {
        return f(&Tape::new());
    }
    struct Release;
    impl Drop for Release {
        fn drop(&mut self) {
            SHARED_BUSY.with(|b| b.set(false));
        }
    }
    let _release = Release;
    SHARED_TAPE.with(|tape| {
        tape.clear();
        f(tape)
    })
}

impl<'t> Var<'t> {
    pub fn index(&self) -> Option<usize> {
        self.tape.map(|_| self.idx as usize)
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Self {
        match self.tape {
            None => Var { tape: None, idx: NO_PARENT, val },
            Some(t) => {
                let idx = t.push(Node { parents: [self.idx, NO_PARENT], partials: [d, 0.0] });
                Var { tape: Some(t), idx, val }
            }
        }
    }

    #[inline]
    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        match self.tape.or(other.tape) {
            None => Var { tape: None, idx: NO_PARENT, val },
            Some(t) => {
                let pa = if self.tape.is_some() { self.idx } else { NO_PARENT };
                let pb = if other.tape.is_some() { other.idx } else { NO_PARENT };
                let idx = t.push(Node { parents: [pa, pb], partials: [da, db] });
                Var { tape: Some(t), idx, val }
            }
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, c: f64) -> Self {
        self.unary(self.val + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, c: f64) -> Self {
        self.unary(self.val - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, c: f64) -> Self {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl<'t> Real for Var<'t> {
    fn constant(x: f64) -> Self {
        Var { tape: None, idx: NO_PARENT, val: x }
    }
    #[inline]
    fn value(self) -> f64 {
        self.val
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    #[inline]
    fn max(self, o: Self) -> Self {
        if self.val > o.val {
            self.binary(o, self.val, 1.0, 0.0)
        } else {
            self.binary(o, o.val, 0.0, 1.0)
        }
    }
    #[inline]
    fn min(self, o: Self) -> Self {
        if self.val < o.val {
            self.binary(o, self.val, 1.0, 0.0)
        } else {
            self.binary(o, o.val, 0.0, 1.0)
        }
    }
}

/// Componentwise mean.
pub fn mean<S: Real>(xs: &[S]) -> S {
    let mut acc = S::constant(0.0);
    for &x in xs {
        acc = acc + x;
    }
    acc / xs.len() as f64
}

/// A scalar function of a real vector, evaluable on any [`Real`].
pub trait ScalarFn {
    fn eval<S: Real>(&self, x: &[S]) -> S;
}

/// Value and gradient of `f` at `theta` by one reverse sweep.
pub fn grad<F: ScalarFn + ?Sized>(f: &F, theta: &[f64]) -> (f64, Vec<f64>) {
    with_tape(|tape| {
        let xs = tape.vars(theta);
        let out = f.eval(&xs);
        let adj = tape.adjoints(out);
        let g = xs.iter().map(|x| adj[x.idx as usize]).collect();
        (out.value(), g)
    })
}

/// Central finite differences of `f` at `theta` with step `h`.
pub fn finite_diff<F: ScalarFn + ?Sized>(f: &F, theta: &[f64], h: f64) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let xi = x[i];
            x[i] = xi + h;
            let up = f.eval(&x);
            x[i] = xi - h;
            let down = f.eval(&x);
            x[i] = xi;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i - b_i| / max(‖a‖∞, ‖b‖∞)`, or 0 when both vanish.
pub fn relative_discrepancy(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Largest relative discrepancy between the reverse-mode gradient and
/// central finite differences.
pub fn finite_diff_check<F: ScalarFn + ?Sized>(f: &F, theta: &[f64], h: f64) -> f64 {
    let (_, g) = grad(f, theta);
    relative_discrepancy(&g, &finite_diff(f, theta, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    struct Square;
    impl ScalarFn for Square {
        fn eval<S: Real>(&self, x: &[S]) -> S {
            x[0] * x[0]
        }
    }

    struct Relu;
    impl ScalarFn for Relu {
        fn eval<S: Real>(&self, x: &[S]) -> S {
            x[0].relu()
        }
    }

    struct Quadratic;
    impl ScalarFn for Quadratic {
        fn eval<S: Real>(&self, x: &[S]) -> S {
            x[0] * x[0] * 3.0 + x[0] * x[1] - x[1] * x[1] * 0.5 + x[1] * 2.0
        }
    }

    struct Constant;
    impl ScalarFn for Constant {
        fn eval<S: Real>(&self, _x: &[S]) -> S {
            S::constant(4.0)
        }
    }

    struct Mixed;
    impl ScalarFn for Mixed {
        fn eval<S: Real>(&self, x: &[S]) -> S {
            let a = (x[0] * 0.3).exp() / (x[1].square() + 1.0);
            let b = (x[2].square() + 2.0).ln().sqrt();
            let c = x[0].min(x[1]) - x[2].max(x[1]).rsub(1.0);
            mean(&[a, b, c])
        }
    }

    #[test]
    fn square_at_three() {
        let (v, g) = grad(&Square, &[3.0]);
        assert_eq!(v, 9.0);
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn relu_kink_has_zero_derivative() {
        let (_, g) = grad(&Relu, &[0.0]);
        assert_eq!(g, vec![0.0]);
        let (_, g) = grad(&Relu, &[1e-300]);
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn quadratic_matches_finite_differences() {
        assert!(finite_diff_check(&Quadratic, &[0.7, -1.3], 1e-5) < 1e-9);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let (v, g) = grad(&Constant, &[1.0, 2.0]);
        assert_eq!(v, 4.0);
        assert_eq!(g, vec![0.0, 0.0]);
        assert_eq!(finite_diff_check(&Constant, &[1.0, 2.0], 1e-5), 0.0);
    }

    #[test]
    fn mixed_primitives_match_finite_differences() {
        let mut s = RngStream::new(5, "mixed");
        for _ in 0..100 {
            let x = s.standard_normal(3);
            assert!(finite_diff_check(&Mixed, &x, 1e-6) < 1e-6);
        }
    }

    #[test]
    fn tape_value_is_bit_identical() {
        let x = [0.31, -1.7, 2.2];
        let plain = Mixed.eval(&x);
        let (taped, _) = grad(&Mixed, &x);
        assert_eq!(plain.to_bits(), taped.to_bits());
    }

    #[test]
    fn nested_tapes_do_not_interfere() {
        let outer = with_tape(|t| {
            let x = t.var(2.0);
            let inner = grad(&Square, &[5.0]);
            let y = x * x * x;
            (t.adjoints(y)[x.index().unwrap()], inner)
        });
        assert_eq!(outer.0, 12.0);
        assert_eq!(outer.1, (25.0, vec![10.0]));
    }

    struct Lin(f64, f64);
    impl ScalarFn for Lin {
        fn eval<S: Real>(&self, x: &[S]) -> S {
            Quadratic.eval(x) * self.0 + Mixed.eval(&[x[0], x[1], x[0]]) * self.1
        }
    }

    proptest! {
        #[test]
        fn gradient_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, x0 in -2.0..2.0f64, x1 in -2.0..2.0f64) {
            let x = [x0, x1];
            let (_, g) = grad(&Lin(a, b), &x);
            let (_, gq) = grad(&Quadratic, &x);
            let (_, gm) = grad(&Mixed, &[x0, x1, x0]);
            let expect = [a * gq[0] + b * (gm[0] + gm[2]), a * gq[1] + b * gm[1]];
            for i in 0..2 {
                prop_assert!((g[i] - expect[i]).abs() <= 1e-12 * (1.0 + expect[i].abs()));
            }
        }
    }
}

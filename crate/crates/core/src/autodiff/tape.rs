//! Reverse-mode tape over scalar operations.
//!
//! The tape stores, per node, its parent indices and the local partial
//! derivatives computed during the forward evaluation. A single reverse sweep
//! then accumulates exact adjoints for every node. Because network jet
//! propagation is itself recorded as elementary operations, adjoints of jet
//! components with respect to parameters are exact third-order mixed
//! derivatives, not approximations.

use std::cell::RefCell;

use super::scalar::Scalar;
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

struct Nodes {
    parents: Vec<[u32; 2]>,
    partials: Vec<[f64; 2]>,
    values: Vec<f64>,
}

/// Expression tape. Create one per gradient evaluation.
pub struct Tape {
    nodes: RefCell<Nodes>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Nodes {
                parents: Vec::new(),
                partials: Vec::new(),
                values: Vec::new(),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers an independent leaf (a parameter or input).
    pub fn leaf(&self, value: f64) -> Var<'_> {
        self.push(value, NONE, 0.0, NONE, 0.0)
    }

    fn push(&self, value: f64, p0: u32, d0: f64, p1: u32, d1: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.values.len();
        assert!(idx < NONE as usize, "tape overflow");
        nodes.parents.push([p0, p1]);
        nodes.partials.push([d0, d1]);
        nodes.values.push(value);
        Var {
            tape: self,
            idx: idx as u32,
        }
    }

    /// Scans for the first non-finite recorded value, if any.
    pub fn first_non_finite(&self) -> Option<(usize, f64)> {
        let nodes = self.nodes.borrow();
        nodes
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
            .map(|(i, v)| (i, *v))
    }

    /// Reverse sweep seeding `output` with 1. Returns adjoints for all nodes.
    pub fn gradient(&self, output: Var<'_>) -> Adjoints {
        assert!(std::ptr::eq(output.tape, self), "var from another tape");
        let nodes = self.nodes.borrow();
        let n = nodes.values.len();
        let mut adj = vec![0.0; n];
        adj[output.idx as usize] = 1.0;
        for i in (0..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let [p0, p1] = nodes.parents[i];
            let [d0, d1] = nodes.partials[i];
            if p0 != NONE {
                adj[p0 as usize] += d0 * a;
            }
            if p1 != NONE {
                adj[p1 as usize] += d1 * a;
            }
        }
        Adjoints { adj }
    }
}

/// Result of a reverse sweep.
pub struct Adjoints {
    adj: Vec<f64>,
}

impl Adjoints {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adj[v.idx as usize]
    }
}

impl<'t> Var<'t> {
    pub fn val(self) -> f64 {
        self.tape.nodes.borrow().values[self.idx as usize]
    }

    fn unary(self, value: f64, d: f64) -> Var<'t> {
        self.tape.push(value, self.idx, d, NONE, 0.0)
    }

    fn binary(self, rhs: Var<'t>, value: f64, dl: f64, dr: f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape), "vars from different tapes");
        self.tape.push(value, self.idx, dl, rhs.idx, dr)
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.val() + rhs.val(), 1.0, 1.0)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.val() - rhs.val(), 1.0, -1.0)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.val(), rhs.val());
        self.binary(rhs, a * b, b, a)
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.val(), rhs.val());
        self.binary(rhs, a / b, 1.0 / b, -a / (b * b))
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.val(), -1.0)
    }
}

impl<'t> Scalar for Var<'t> {
    fn lift(self, c: f64) -> Self {
        // Constants have no parents; their adjoints are discarded.
        self.tape.leaf(c)
    }

    fn value(self) -> f64 {
        self.val()
    }

    fn tanh(self) -> Self {
        let y = self.val().tanh();
        self.unary(y, 1.0 - y * y)
    }

    fn exp(self) -> Self {
        let y = self.val().exp();
        self.unary(y, y)
    }

    fn sin(self) -> Self {
        let x = self.val();
        self.unary(x.sin(), x.cos())
    }

    fn cos(self) -> Self {
        let x = self.val();
        self.unary(x.cos(), -x.sin())
    }

    fn ln(self) -> Self {
        let x = self.val();
        self.unary(x.ln(), 1.0 / x)
    }

    fn scale(self, c: f64) -> Self {
        self.unary(self.val() * c, c)
    }

    fn add_const(self, c: f64) -> Self {
        self.unary(self.val() + c, 1.0)
    }
}

/// Checks a finished tape for non-finite intermediates.
pub(crate) fn check_finite(tape: &Tape, context: &str) -> Result<()> {
    if let Some((idx, v)) = tape.first_non_finite() {
        return Err(Error::numeric(format!(
            "non-finite intermediate {v} at tape node {idx} while evaluating {context}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let x = tape.leaf(3.0);
        let y = tape.leaf(-2.0);
        let z = x * y + x;
        assert_eq!(z.val(), -3.0);
        let g = tape.gradient(z);
        assert_eq!(g.wrt(x), -1.0); // y + 1
        assert_eq!(g.wrt(y), 3.0); // x
    }

    #[test]
    fn fanout_accumulates() {
        let tape = Tape::new();
        let x = tape.leaf(3.0);
        let y = x + x;
        let g = tape.gradient(y);
        assert_eq!(g.wrt(x), 2.0);
    }

    #[test]
    fn tanh_derivative() {
        let tape = Tape::new();
        let x = tape.leaf(0.7);
        let y = Scalar::tanh(x);
        let g = tape.gradient(y);
        let expect = 1.0 - 0.7f64.tanh().powi(2);
        assert!((g.wrt(x) - expect).abs() < 1e-15);
    }

    #[test]
    fn division_partials() {
        let tape = Tape::new();
        let a = tape.leaf(1.5);
        let b = tape.leaf(4.0);
        let q = a / b;
        let g = tape.gradient(q);
        assert!((g.wrt(a) - 0.25).abs() < 1e-15);
        assert!((g.wrt(b) + 1.5 / 16.0).abs() < 1e-15);
    }
}

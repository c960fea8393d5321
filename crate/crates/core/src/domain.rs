//! Axis-aligned box domains.

use crate::error::{Error, Result};

/// Closed axis-aligned box `[lo_i, hi_i]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::config(format!(
                "box bounds must be non-empty and of equal length ({} vs {})",
                lo.len(),
                hi.len()
            )));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(Error::config(format!(
                    "degenerate box: [{l}, {h}] is not a proper interval"
                )));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        BoxDomain::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn axis_len(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.axis_len(i)).product()
    }

    /// Membership in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Surface measure of face `(axis, upper)`.
    pub fn face_measure(&self, axis: usize) -> f64 {
        (0..self.dim())
            .filter(|&i| i != axis)
            .map(|i| self.axis_len(i))
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate() {
        assert!(BoxDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn volume_and_membership() {
        let b = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(b.volume(), 6.0);
        assert!(b.contains(&[1.0, 3.0]));
        assert!(!b.contains(&[1.0001, 0.5]));
        assert_eq!(b.face_measure(0), 3.0);
        assert_eq!(b.face_measure(1), 2.0);
    }
}

//! Small numerical helpers shared across modules.

use std::ops::{Add, Mul, Neg, Sub};

/// Least-squares slope of `ln y` against `ln x`. Pairs with non-positive
/// entries are skipped; `None` if fewer than two remain.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    linear_slope(&pts)
}

pub fn linear_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// `start, start·ratio, …` up to and including the first value `≥ stop`.
pub fn geometric_ladder(start: f64, stop: f64, ratio: f64) -> Vec<f64> {
    assert!(start > 0.0 && ratio > 1.0);
    let mut out = vec![start];
    let mut r = start;
    while r < stop {
        r *= ratio;
        out.push(r);
    }
    out
}

pub fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

/// Arithmetic needed to evaluate polynomials over `f64` or dual numbers.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn scale(self, c: f64) -> Self;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }

    fn scale(self, c: f64) -> Self {
        self * c
    }
}

/// Forward-mode dual number carrying a gradient in up to three variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub grad: [f64; 3],
}

impl Dual {
    pub fn variable(value: f64, axis: usize) -> Self {
        let mut grad = [0.0; 3];
        grad[axis] = 1.0;
        Dual { value, grad }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            value: self.value + o.value,
            grad: [self.grad[0] + o.grad[0], self.grad[1] + o.grad[1], self.grad[2] + o.grad[2]],
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            value: self.value - o.value,
            grad: [self.grad[0] - o.grad[0], self.grad[1] - o.grad[1], self.grad[2] - o.grad[2]],
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        let (a, b) = (self.value, o.value);
        Dual {
            value: a * b,
            grad: [
                self.grad[0] * b + a * o.grad[0],
                self.grad[1] * b + a * o.grad[1],
                self.grad[2] * b + a * o.grad[2],
            ],
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.scale(-1.0)
    }
}

impl Scalar for Dual {
    fn constant(c: f64) -> Self {
        Dual {
            value: c,
            grad: [0.0; 3],
        }
    }

    fn scale(self, c: f64) -> Self {
        Dual {
            value: self.value * c,
            grad: [self.grad[0] * c, self.grad[1] * c, self.grad[2] * c],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 2.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn ladder_covers_stop() {
        let l = geometric_ladder(0.1, 1.0, 2f64.sqrt());
        assert!(*l.last().unwrap() >= 1.0 && l[l.len() - 2] < 1.0);
    }

    #[test]
    fn dual_product_rule() {
        let x = Dual::variable(2.0, 0);
        let y = Dual::variable(3.0, 1);
        let f = x * x * y - y.scale(4.0);
        assert_eq!(f.value, 0.0);
        assert_eq!(f.grad, [12.0, 0.0, 0.0]);
    }
}

//! Small numerical helpers: fits, quadrature, Gaussian functions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Ordinary least squares `y ≈ intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Fit `y_n ≈ C γ^n` by least squares on `log y` over the points with
/// `y > floor`, then raise `C` so the envelope dominates every point.
/// Returns `(C, γ)`; an identically negligible curve gives `(0, 0)`.
pub fn exponential_envelope(ns: &[f64], ys: &[f64], floor: f64) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > floor)
        .map(|(&n, &y)| (n, y.ln()))
        .collect();
    if pts.is_empty() {
        return (0.0, 0.0);
    }
    let gamma = if pts.len() == 1 {
        0.0
    } else {
        let (xs, ls): (Vec<f64>, Vec<f64>) = pts.iter().cloned().unzip();
        linear_fit(&xs, &ls).1.exp().min(1.0)
    };
    let c = ns
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > floor)
        .map(|(&n, &y)| if gamma > 0.0 { y / gamma.powf(n) } else { y })
        .fold(0.0, f64::max);
    (c, gamma)
}

/// Trapezoid rule on a sorted grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
        .sum()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn normal_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// True when every value is at most the running maximum of the values that
/// follow it scaled by `1 + slack`, i.e. the curve is non-increasing up to a
/// relative slack.
pub fn non_increasing(ys: &[f64], slack: f64) -> bool {
    ys.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack) + 1e-15)
}

/// Non-increasing in envelope: each point is below the maximum of all earlier
/// points times `(1 + slack)`, and the last point is below the first.
pub fn decreasing_envelope(ys: &[f64], slack: f64) -> bool {
    if ys.len() < 2 {
        return true;
    }
    let mut run = ys[0];
    for &y in &ys[1..] {
        if y > run * (1.0 + slack) + 1e-15 {
            return false;
        }
        run = run.max(y);
    }
    ys[ys.len() - 1] <= ys[0] + 1e-15
}

/// Evenly spaced grid `lo, lo + step, ..., <= hi`.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Continuous, compactly supported, piecewise-linear test function given by
/// its knots; zero outside `[xs[0], xs[last]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestKernel {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl TestKernel {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InvalidArgument("kernel needs at least two knots with values".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("kernel knots must be strictly increasing".into()));
        }
        if ys[0] != 0.0 || ys[ys.len() - 1] != 0.0 {
            return Err(Error::InvalidArgument("kernel must vanish at both ends".into()));
        }
        Ok(TestKernel { xs, ys })
    }

    /// Triangle of height 1 on `[-half_width, half_width]`.
    pub fn triangle(half_width: f64) -> Self {
        TestKernel { xs: vec![-half_width, 0.0, half_width], ys: vec![0.0, 1.0, 0.0] }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo || x >= hi {
            return 0.0;
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let w = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] * (1.0 - w) + self.ys[i + 1] * w
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.xs, &self.ys)
    }
}

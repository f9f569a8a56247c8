use nalgebra::DVector;

use crate::certificate::{ContractionCertificate, Side};
use crate::quadrature::gauss_legendre;
use crate::{Error, Result};

/// `1/h` as an integer, if `h` divides the unit horizon.
pub fn steps_per_unit(h: f64) -> Result<usize> {
    if !(h > 0.0) || h > 1.0 {
        return Err(Error::StepMismatch {
            step: h,
            what: "delay horizon",
            value: 1.0,
        });
    }
    let m = (1.0 / h).round();
    if (m * h - 1.0).abs() > 1e-9 {
        return Err(Error::StepMismatch {
            step: h,
            what: "delay horizon",
            value: 1.0,
        });
    }
    Ok(m as usize)
}

/// Number of steps of size `h` in `t`, if `h` divides `t`.
pub(crate) fn step_count(h: f64, t: f64, what: &'static str) -> Result<usize> {
    let k = (t / h).round();
    if !(t >= 0.0) || (k * h - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::StepMismatch {
            step: h,
            what,
            value: t,
        });
    }
    Ok(k as usize)
}

/// Cubic Hermite interpolation on `[0, 1]` with slopes scaled by `h`.
#[inline]
pub(crate) fn hermite(v0: f64, d0: f64, v1: f64, d1: f64, h: f64, theta: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    (2.0 * t3 - 3.0 * t2 + 1.0) * v0
        + (t3 - 2.0 * t2 + theta) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * v1
        + (t3 - t2) * h * d1
}

/// Piecewise-cubic data on a uniform grid of `[-1, 0]`.
pub(crate) trait Cells {
    fn dim(&self) -> usize;
    fn cell_count(&self) -> usize;
    /// Value at `-1 + (k + theta) h` into `out`.
    fn eval_cell(&self, k: usize, theta: f64, out: &mut [f64]);
}

/// A history segment `f` on `[-1, 0]`: samples and slopes on a grid of step
/// `h`, `1/h + 1` points, with cubic Hermite interpolation between them.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySegment {
    h: f64,
    dim: usize,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HistorySegment {
    pub fn from_samples(h: f64, dim: usize, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        let m = steps_per_unit(h)?;
        for (what, v) in [("values", &values), ("slopes", &slopes)] {
            if v.len() != (m + 1) * dim {
                return Err(Error::Dimension {
                    expected: (m + 1) * dim,
                    found: v.len(),
                    context: format!("history {what}"),
                });
            }
        }
        Ok(Self {
            h,
            dim,
            values,
            slopes,
        })
    }

    pub fn from_fn_with_derivative<F, G>(h: f64, dim: usize, f: F, df: G) -> Result<Self>
    where
        F: Fn(f64) -> DVector<f64>,
        G: Fn(f64) -> DVector<f64>,
    {
        let m = steps_per_unit(h)?;
        let mut values = Vec::with_capacity((m + 1) * dim);
        let mut slopes = Vec::with_capacity((m + 1) * dim);
        for k in 0..=m {
            let s = -1.0 + k as f64 * h;
            values.extend(f(s).iter());
            slopes.extend(df(s).iter());
        }
        Self::from_samples(h, dim, values, slopes)
    }

    /// Samples `f`; slopes by second-order finite differences that stay
    /// inside `[-1, 0]`.
    pub fn from_fn<F: Fn(f64) -> DVector<f64>>(h: f64, dim: usize, f: F) -> Result<Self> {
        let delta = 1e-5;
        let df = |s: f64| {
            if s - delta < -1.0 {
                (f(s) * -3.0 + f(s + delta) * 4.0 - f(s + 2.0 * delta)) / (2.0 * delta)
            } else if s + delta > 0.0 {
                (f(s) * 3.0 - f(s - delta) * 4.0 + f(s - 2.0 * delta)) / (2.0 * delta)
            } else {
                (f(s + delta) - f(s - delta)) / (2.0 * delta)
            }
        };
        Self::from_fn_with_derivative(h, dim, &f, df)
    }

    pub fn constant(value: &DVector<f64>, h: f64) -> Result<Self> {
        let dim = value.len();
        Self::from_fn_with_derivative(h, dim, |_| value.clone(), |_| DVector::zeros(dim))
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node_slope(&self, k: usize) -> &[f64] {
        &self.slopes[k * self.dim..(k + 1) * self.dim]
    }

    /// Hermite interpolant at `sigma ∈ [-1, 0]`.
    pub fn eval(&self, sigma: f64) -> DVector<f64> {
        let m = self.cell_count();
        let x = ((sigma + 1.0) / self.h).clamp(0.0, m as f64);
        let k = (x.floor() as usize).min(m - 1);
        let mut out = vec![0.0; self.dim];
        self.eval_cell(k, x - k as f64, &mut out);
        DVector::from_vec(out)
    }
}

impl Cells for HistorySegment {
    fn dim(&self) -> usize {
        self.dim
    }

    fn cell_count(&self) -> usize {
        self.len() - 1
    }

    fn eval_cell(&self, k: usize, theta: f64, out: &mut [f64]) {
        let n = self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            *o = hermite(
                self.values[k * n + i],
                self.slopes[k * n + i],
                self.values[(k + 1) * n + i],
                self.slopes[(k + 1) * n + i],
                self.h,
                theta,
            );
        }
    }
}

/// Quadrature for `∫_{-1}^0 τ(s) |f(s)|² ds` on cells of step `h`: four
/// Gauss points per cell, cells split at atom locations.
#[derive(Clone, Debug)]
pub struct NormPlan {
    h: f64,
    cells: usize,
    // (cell, theta, w·τ)
    entries: Vec<(usize, f64, f64)>,
}

impl NormPlan {
    pub fn new(cert: &ContractionCertificate, h: f64) -> Result<Self> {
        Self::from_weight(h, |s| cert.tau(s, Side::Right), &atom_locations(cert))
    }

    /// Plan for the unweighted `L²` norm.
    pub fn unweighted(h: f64) -> Result<Self> {
        Self::from_weight(h, |_| 1.0, &[])
    }

    fn from_weight<T: Fn(f64) -> f64>(h: f64, tau: T, cuts: &[f64]) -> Result<Self> {
        let m = steps_per_unit(h)?;
        let rule = gauss_legendre(4);
        let mut entries = Vec::with_capacity(4 * m);
        for k in 0..m {
            let left = -1.0 + k as f64 * h;
            let right = left + h;
            let mut pts = vec![left, right];
            pts.extend(cuts.iter().copied().filter(|&c| c > left + 1e-14 && c < right - 1e-14));
            pts.sort_by(f64::total_cmp);
            for w in pts.windows(2) {
                let mapped = rule.mapped(w[0], w[1]);
                for (&s, &wt) in mapped.nodes.iter().zip(&mapped.weights) {
                    entries.push((k, (s - left) / h, wt * tau(s)));
                }
            }
        }
        Ok(Self {
            h,
            cells: m,
            entries,
        })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub(crate) fn squared<C: Cells + ?Sized>(&self, x: &[f64], cells: &C) -> f64 {
        debug_assert_eq!(cells.cell_count(), self.cells);
        let mut buf = vec![0.0; cells.dim()];
        let head: f64 = x.iter().map(|v| v * v).sum();
        let tail: f64 = self
            .entries
            .iter()
            .map(|&(k, theta, w)| {
                cells.eval_cell(k, theta, &mut buf);
                w * buf.iter().map(|v| v * v).sum::<f64>()
            })
            .sum();
        head + tail
    }
}

fn atom_locations(cert: &ContractionCertificate) -> Vec<f64> {
    cert.weight
        .kernel()
        .atoms()
        .iter()
        .map(|a| a.location)
        .collect()
}

/// `‖(x, f)‖_τ = (|x|² + ∫ τ(s) |f(s)|² ds)^{1/2}`.
pub fn weighted_norm(
    x: &DVector<f64>,
    segment: &HistorySegment,
    cert: &ContractionCertificate,
) -> Result<f64> {
    if x.len() != segment.dim() {
        return Err(Error::Dimension {
            expected: segment.dim(),
            found: x.len(),
            context: "state vs segment".into(),
        });
    }
    let plan = NormPlan::new(cert, segment.step())?;
    Ok(plan.squared(x.as_slice(), segment).sqrt())
}

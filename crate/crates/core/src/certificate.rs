//! Equivalent inner products certifying `A - μI` dissipative.
//!
//! For `B - λI` dissipative and `V = |ζ|(0) - |ζ|(-1)`, the weight
//!
//! ```text
//! τ(s) = e^{-2μs} [ γ - K ∫_{[s,0]} e^{2μr} d|ζ|(r) ],   γ = μ - λ,  K = V / (μ - λ)
//! ```
//!
//! makes `((A - μI)x, x)_τ ≤ 0`. It is bounded away from zero exactly when
//! the gap `(μ - λ)² - V ∫ e^{2μr} d|ζ|(r)` is positive.
//!
//! The moment carries `e^{+2μr}`. One display in the source derivation writes
//! the opposite sign; the sufficient bound `μ > λ + (V ∫ e^{2λr} d|ζ|)^{1/2}`
//! and the scalar identity at the dominant root only hold with `e^{+2μr}`.

use nalgebra::DMatrix;

use crate::kernel::{
    dissipativity_lambda, exp_moment, sq_exp_moment, total_variation, DelayKernel,
    LinearDelaySystem, TailMoments,
};
use crate::linalg::{ensure_finite, ensure_square, eigenvalues, rank, sym_eigmin};
use crate::{Error, Result};

/// Which one-sided limit of `τ` a sample belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TauSample {
    pub s: f64,
    pub value: f64,
    pub side: Side,
}

/// The weight `τ`, evaluable anywhere on `[-1, 0]` and sampled on a grid.
#[derive(Clone, Debug)]
pub struct WeightFunction {
    /// Rate in the exponential factor of `τ`.
    pub mu: f64,
    pub gamma: f64,
    /// `K = V / (2μ - 2λ - γ)`.
    pub scale: f64,
    tail: TailMoments,
    pub grid: Vec<TauSample>,
}

impl WeightFunction {
    /// The weight for dissipativity constant `lambda` at rate `mu`, with
    /// `points_per_panel` interior samples per panel. No positivity check.
    pub fn new(kernel: &DelayKernel, lambda: f64, mu: f64, points_per_panel: usize) -> Result<Self> {
        if !(mu > lambda) {
            return Err(Error::RateBelowLambda { mu, lambda });
        }
        let gamma = mu - lambda;
        let v = total_variation(kernel);
        let scale = v / (2.0 * mu - 2.0 * lambda - gamma);
        let mut w = Self {
            mu,
            gamma,
            scale,
            tail: kernel.tail_moments(mu),
            grid: Vec::new(),
        };
        w.grid = w.sample(points_per_panel);
        Ok(w)
    }

    pub fn kernel(&self) -> &DelayKernel {
        self.tail.kernel()
    }

    /// `τ(s)`; `Side::Left` includes an atom sitting at `s`.
    pub fn eval(&self, s: f64, side: Side) -> f64 {
        (-2.0 * self.mu * s).exp() * self.bracket(s, side)
    }

    /// The bracket `γ - K ∫_{[s,0]} e^{2μr} d|ζ|(r)`, nondecreasing in `s`.
    pub fn bracket(&self, s: f64, side: Side) -> f64 {
        self.gamma - self.scale * self.tail.at(s, side == Side::Left)
    }

    /// `∫_{[s,0]} e^{2μr} d|ζ|(r)`.
    pub fn tail_moment(&self, s: f64, side: Side) -> f64 {
        self.tail.at(s, side == Side::Left)
    }

    fn sample(&self, points_per_panel: usize) -> Vec<TauSample> {
        let bounds = self.kernel().panel_boundaries();
        let mut grid = Vec::new();
        for (i, w) in bounds.windows(2).enumerate() {
            if i == 0 {
                grid.push(self.sample_at(w[0], Side::Left));
            }
            grid.push(self.sample_at(w[0], Side::Right));
            for k in 1..=points_per_panel {
                let s = w[0] + (w[1] - w[0]) * k as f64 / (points_per_panel + 1) as f64;
                grid.push(self.sample_at(s, Side::Right));
            }
            grid.push(self.sample_at(w[1], Side::Left));
        }
        grid.push(self.sample_at(0.0, Side::Right));
        grid
    }

    fn sample_at(&self, s: f64, side: Side) -> TauSample {
        TauSample {
            s,
            value: self.eval(s, side),
            side,
        }
    }

    /// Lower bound `min(1, e^{2μ}) · bracket(-1⁻)` valid on all of `[-1, 0]`.
    pub fn analytic_lower_bound(&self) -> f64 {
        (2.0 * self.mu).exp().min(1.0) * self.bracket(-1.0, Side::Left)
    }

    /// `(c1, c2)`: sampled minimum supplemented by the analytic bound, and the
    /// sampled maximum.
    pub fn bounds(&self) -> (f64, f64) {
        let (lo, hi) = self
            .grid
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                (lo.min(t.value), hi.max(t.value))
            });
        (lo.min(self.analytic_lower_bound()), hi)
    }
}

/// Weight, rate and norm-equivalence constants of a dissipativity
/// certificate.
#[derive(Clone, Debug)]
pub struct ContractionCertificate {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub weight: WeightFunction,
    pub c1: f64,
    pub c2: f64,
    pub gap: f64,
}

impl ContractionCertificate {
    pub fn tau(&self, s: f64, side: Side) -> f64 {
        self.weight.eval(s, side)
    }
}

/// `(μ - λ)² - V ∫ e^{2μr} d|ζ|(r)`.
pub fn dissipativity_gap(lambda: f64, mu: f64, kernel: &DelayKernel) -> Result<f64> {
    if !(mu > lambda) {
        return Err(Error::RateBelowLambda { mu, lambda });
    }
    Ok(gap_unchecked(lambda, mu, kernel))
}

fn gap_unchecked(lambda: f64, mu: f64, kernel: &DelayKernel) -> f64 {
    let d = mu - lambda;
    d * d - total_variation(kernel) * exp_moment(kernel, mu)
}

/// `(λ - μ)² - ∫ e^{2μρ} ‖ζ(ρ)‖² dρ` for atom-free kernels.
pub fn density_gap(lambda: f64, mu: f64, kernel: &DelayKernel) -> Result<f64> {
    if !kernel.atoms().is_empty() {
        return Err(Error::AtomsPresent);
    }
    if !(mu > lambda) {
        return Err(Error::RateBelowLambda { mu, lambda });
    }
    let d = mu - lambda;
    Ok(d * d - sq_exp_moment(kernel, mu)?)
}

/// Infimum of the certified rates, to absolute accuracy `tol`.
///
/// The gap is strictly increasing on `(λ, ∞)`, so exponential bracketing
/// followed by bisection converges. The returned value lies within `tol/2`
/// of the infimum; every `μ > result + tol` has a positive gap.
pub fn min_mu(lambda: f64, kernel: &DelayKernel, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    let v = total_variation(kernel);
    if v == 0.0 {
        return Ok(lambda);
    }
    let mut lo = lambda;
    let mut step = 1.0;
    let mut hi = lambda + step;
    while gap_unchecked(lambda, hi, kernel) <= 0.0 {
        lo = hi;
        step *= 2.0;
        hi = lambda + step;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap_unchecked(lambda, mid, kernel) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form sufficient conditions.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CorollaryBounds {
    /// `λ + (V ∫ e^{2λr} d|ζ|)^{1/2}`; any larger rate is certified.
    pub mu_sufficient: f64,
    /// `λ + V < 0`: `A` itself is dissipative in a renormed space.
    pub zero_dissipative: bool,
    /// `max(0, λ + V)`, the classical comparison bound.
    pub webb_mu: f64,
}

pub fn corollary_bounds(lambda: f64, kernel: &DelayKernel) -> CorollaryBounds {
    let v = total_variation(kernel);
    CorollaryBounds {
        mu_sufficient: lambda + (v * exp_moment(kernel, lambda)).sqrt(),
        zero_dissipative: lambda + v < 0.0,
        webb_mu: (lambda + v).max(0.0),
    }
}

/// Builds the weight at rate `mu` and checks it defines an equivalent norm.
pub fn build_certificate(
    system: &LinearDelaySystem,
    mu: f64,
    grid_points_per_panel: usize,
) -> Result<ContractionCertificate> {
    let lambda = dissipativity_lambda(system.drift())?;
    let gap = dissipativity_gap(lambda, mu, system.kernel())?;
    if !(gap > 0.0) {
        return Err(Error::NoCertificate { gap });
    }
    let weight = WeightFunction::new(system.kernel(), lambda, mu, grid_points_per_panel)?;
    let (c1, c2) = weight.bounds();
    debug_assert!(c1 > 0.0 && c2 >= c1);
    Ok(ContractionCertificate {
        lambda,
        mu,
        gamma: weight.gamma,
        weight,
        c1,
        c2,
        gap,
    })
}

#[derive(Clone, Debug)]
pub struct ShiftedCertificate {
    pub nu: f64,
    /// Dissipativity constant of `B - νI`.
    pub shifted_lambda: f64,
    /// Rate-`ν` certificate for `A`; its weight is the rate-0 weight of the
    /// shifted system.
    pub certificate: ContractionCertificate,
}

/// Generalized-contraction renorming: `A - νI` is dissipative for
/// `ν = max(0, λ + V) + 1`, using the rate-0 weight of the system with drift
/// `B - νI`.
pub fn generalized_contraction_shift(system: &LinearDelaySystem) -> Result<ShiftedCertificate> {
    let lambda = dissipativity_lambda(system.drift())?;
    let v = total_variation(system.kernel());
    let nu = (lambda + v).max(0.0) + 1.0;
    let shifted = system.shifted(-nu);
    let inner = build_certificate(&shifted, 0.0, 16)?;
    // A - νI differs from the shifted generator by -ν on the history part,
    // which only lowers the form.
    let certificate = ContractionCertificate {
        lambda,
        mu: nu,
        gamma: nu - lambda,
        weight: inner.weight,
        c1: inner.c1,
        c2: inner.c2,
        gap: inner.gap,
    };
    Ok(ShiftedCertificate {
        nu,
        shifted_lambda: inner.lambda,
        certificate,
    })
}

/// Symmetric positive-definite `Q` with `AᵀQ + QA = -CᵀC`.
#[derive(Clone, Debug)]
pub struct RenormMatrix {
    pub q: DMatrix<f64>,
    pub gamma_lower: f64,
}

/// Solves the Lyapunov equation `AᵀQ + QA = -CᵀC` on the `n(n+1)/2`
/// symmetric unknowns by a dense LU solve.
pub fn lyapunov_renorm(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<RenormMatrix> {
    let n = ensure_square(a)?;
    ensure_finite(a, "A")?;
    ensure_finite(c, "C")?;
    if c.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            found: c.ncols(),
            context: "columns of C".into(),
        });
    }
    let abscissa = eigenvalues(a)
        .iter()
        .fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
    if abscissa >= 0.0 {
        return Err(Error::Unstable(abscissa));
    }
    // observability stack [C; CA; …; CA^{n-1}]
    let p = c.nrows();
    let mut stack = DMatrix::zeros(p * n, n);
    let mut block = c.clone();
    for k in 0..n {
        stack.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block = &block * a;
    }
    let r = rank(&stack, 1e-10);
    if r < n {
        return Err(Error::Unobservable { rank: r, n });
    }

    let idx = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + j
    };
    let m = n * (n + 1) / 2;
    let mut lhs = DMatrix::zeros(m, m);
    let ctc = c.transpose() * c;
    let mut rhs = nalgebra::DVector::zeros(m);
    for i in 0..n {
        for j in i..n {
            let row = idx(i, j);
            for k in 0..n {
                // (AᵀQ)_ij = Σ_k A_ki Q_kj,  (QA)_ij = Σ_k Q_ik A_kj
                lhs[(row, idx(k, j))] += a[(k, i)];
                lhs[(row, idx(i, k))] += a[(k, j)];
            }
            rhs[row] = -ctc[(i, j)];
        }
    }
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Lyapunov system"))?;
    let q = DMatrix::from_fn(n, n, |i, j| sol[idx(i, j)]);
    let gamma_lower = sym_eigmin(&q);
    if !(gamma_lower > 0.0) {
        return Err(Error::Unobservable { rank: r, n });
    }
    Ok(RenormMatrix { q, gamma_lower })
}

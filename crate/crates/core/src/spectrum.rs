//! Characteristic roots and generator spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::discretization::discretize_generator;
use crate::kernel::LinearDelaySystem;
use crate::linalg::{complex_det, complex_min_singular, eigenvalues};
use crate::quadrature::gauss_legendre;
use crate::{Error, Result};

/// Eigenvalues with characteristic residual above this are flagged spurious.
pub const SPURIOUS_RESIDUAL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub spurious: bool,
}

impl Eigenvalue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumApproximation {
    pub eigenvalues: Vec<Eigenvalue>,
    /// Largest real part over non-spurious eigenvalues (over all of them if
    /// every eigenvalue is flagged).
    pub abscissa: f64,
    pub abscissa_unfiltered: f64,
    pub nodes_per_panel: usize,
    pub panels: Vec<(f64, f64)>,
}

impl SpectrumApproximation {
    /// Non-spurious eigenvalue with the largest real part.
    pub fn dominant(&self) -> Option<&Eigenvalue> {
        self.eigenvalues
            .iter()
            .filter(|e| !e.spurious)
            .max_by(|a, b| a.re.total_cmp(&b.re))
    }

    /// CSV with header `re,im,residual,spurious`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,residual,spurious\n");
        for e in &self.eigenvalues {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{}\n",
                e.re, e.im, e.residual, e.spurious
            ));
        }
        out
    }
}

/// Real root `γ*` of `γ = b + c e^{-γ}` for `c > 0`, the dominant
/// characteristic root of `u' = b u(t) + c u(t-1)`.
///
/// Newton from `b + c`, falling back to bisection on a sign-change bracket
/// `[b, hi]` whenever an iterate leaves it.
pub fn dominant_real_root(b: f64, c: f64, tol: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::NonPositiveDelayCoefficient(c));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    let h = |g: f64| g - b - c * (-g).exp();
    // h(b) < 0; h is increasing
    let mut lo = b;
    let mut hi = b + c + 1.0;
    while h(hi) <= 0.0 {
        lo = hi;
        hi = b + 2.0 * (hi - b);
    }
    let mut g = (b + c).clamp(lo, hi);
    for _ in 0..200 {
        let val = h(g);
        if val.abs() <= tol {
            return Ok(g);
        }
        if val < 0.0 {
            lo = lo.max(g);
        } else {
            hi = hi.min(g);
        }
        let next = g - val / (1.0 + c * (-g).exp());
        g = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(g)
}

/// `Δ(θ) = θI - B - Σ e^{θrᵢ} Cᵢ - ∫ e^{θσ} ζ(σ) dσ`.
pub fn characteristic_matrix(system: &LinearDelaySystem, theta: Complex64) -> DMatrix<Complex64> {
    let n = system.dim();
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { theta } else { Complex64::new(0.0, 0.0) };
        diag - system.drift()[(i, j)]
    });
    let kernel = system.kernel();
    for atom in kernel.atoms() {
        let e = (theta * atom.location).exp();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= e * atom.weight[(i, j)];
            }
        }
    }
    if let Some(d) = kernel.density() {
        let order = (d.quadrature_order() + (theta.norm().ceil() as usize) / 2).min(400);
        let rule = gauss_legendre(order);
        for (p, w) in d.breakpoints().windows(2).enumerate() {
            let mapped = rule.mapped(w[0], w[1]);
            let piece = &d.pieces()[p];
            for (&s, &wt) in mapped.nodes.iter().zip(&mapped.weights) {
                let e = (theta * s).exp() * wt;
                let local = s - w[0];
                for (k, coeff) in piece.coeffs.iter().enumerate() {
                    let pk = local.powi(k as i32);
                    for i in 0..n {
                        for j in 0..n {
                            m[(i, j)] -= e * coeff[(i, j)] * pk;
                        }
                    }
                }
            }
        }
    }
    m
}

/// `|det Δ(θ)|`, zero exactly on characteristic roots.
pub fn verify_characteristic(system: &LinearDelaySystem, theta: Complex64) -> f64 {
    complex_det(&characteristic_matrix(system, theta)).norm()
}

/// Backward error `min_v ‖Δ(θ) v‖ / ‖v‖` (smallest singular value).
pub fn characteristic_residual(system: &LinearDelaySystem, theta: Complex64) -> f64 {
    complex_min_singular(&characteristic_matrix(system, theta))
}

/// Eigenvalues of the discretized generator with characteristic residuals.
pub fn generator_eigenvalues(
    system: &LinearDelaySystem,
    nodes_per_panel: usize,
) -> Result<SpectrumApproximation> {
    let disc = discretize_generator(system, nodes_per_panel)?;
    let mut eigs: Vec<Eigenvalue> = eigenvalues(&disc.matrix)
        .into_iter()
        .map(|z| {
            let residual = characteristic_residual(system, z);
            let residual = if residual.is_finite() { residual } else { f64::INFINITY };
            Eigenvalue {
                re: z.re,
                im: z.im,
                residual,
                spurious: !(residual <= SPURIOUS_RESIDUAL),
            }
        })
        .collect();
    eigs.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let unfiltered = eigs.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
    let filtered = eigs
        .iter()
        .filter(|e| !e.spurious)
        .fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
    Ok(SpectrumApproximation {
        eigenvalues: eigs,
        abscissa: if filtered.is_finite() { filtered } else { unfiltered },
        abscissa_unfiltered: unfiltered,
        nodes_per_panel,
        panels: disc.panels,
    })
}

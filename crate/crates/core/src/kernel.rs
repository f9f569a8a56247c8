//! Delay measures, drift matrices and the scalar functionals built on them.
//!
//! The delay measure `ζ` on `[-1, 0]` is a finite set of matrix point masses
//! plus an optional piecewise-polynomial matrix density. Its total variation
//! measure `|ζ|` uses the spectral norm of each matrix.
//!
//! Systems with a delay horizon `r ≠ 1` are rescaled by `t → t/r` before they
//! are represented here; see [`LinearDelaySystem::from_horizon`].

use nalgebra::{DMatrix, DVector};

use crate::linalg::{ensure_finite, ensure_square, spectral_norm, sym_eigmax, symmetric_part};
use crate::quadrature::{gauss_legendre, Rule};
use crate::{Error, Result};

/// Locations closer than this are treated as the same point.
pub(crate) const LOCATION_EPS: f64 = 1e-12;

/// A point mass `C δ_r` of the delay measure.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayAtom {
    pub location: f64,
    pub weight: DMatrix<f64>,
}

impl DelayAtom {
    pub fn new(location: f64, weight: DMatrix<f64>) -> Self {
        Self { location, weight }
    }

    pub fn scalar(location: f64, c: f64) -> Self {
        Self::new(location, DMatrix::from_element(1, 1, c))
    }
}

/// One polynomial piece of the density, `Σ_k coeffs[k] (σ - left)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityPiece {
    pub coeffs: Vec<DMatrix<f64>>,
}

impl DensityPiece {
    pub fn constant(m: DMatrix<f64>) -> Self {
        Self { coeffs: vec![m] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    fn eval(&self, local: f64) -> DMatrix<f64> {
        let mut iter = self.coeffs.iter().rev();
        let mut acc = iter.next().cloned().expect("piece has coefficients");
        for c in iter {
            acc = acc * local + c;
        }
        acc
    }
}

/// Piecewise-polynomial matrix density on `[-1, 0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayDensity {
    breakpoints: Vec<f64>,
    pieces: Vec<DensityPiece>,
    dim: usize,
}

impl DelayDensity {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<DensityPiece>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidDensity("need at least two breakpoints".into()));
        }
        if breakpoints[0] != -1.0 || *breakpoints.last().unwrap() != 0.0 {
            return Err(Error::InvalidDensity(
                "breakpoints must start at -1 and end at 0".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidDensity(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if pieces.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidDensity(format!(
                "{} pieces for {} intervals",
                pieces.len(),
                breakpoints.len() - 1
            )));
        }
        let mut dim = None;
        for (i, piece) in pieces.iter().enumerate() {
            if piece.coeffs.is_empty() {
                return Err(Error::InvalidDensity(format!("piece {i} has no coefficients")));
            }
            for c in &piece.coeffs {
                let n = ensure_square(c)?;
                ensure_finite(c, "density coefficient")?;
                match dim {
                    None => dim = Some(n),
                    Some(d) if d != n => {
                        return Err(Error::Dimension {
                            expected: d,
                            found: n,
                            context: format!("density piece {i}"),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Self {
            breakpoints,
            pieces,
            dim: dim.unwrap(),
        })
    }

    /// Constant density on the whole horizon.
    pub fn constant(m: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![-1.0, 0.0], vec![DensityPiece::constant(m)])
    }

    pub fn scalar_constant(v: f64) -> Self {
        Self::constant(DMatrix::from_element(1, 1, v)).expect("1x1 constant density")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(DensityPiece::degree).max().unwrap_or(0)
    }

    /// Gauss order used for per-piece integrals of `|ζ|`-type integrands.
    pub fn quadrature_order(&self) -> usize {
        (self.max_degree() + 40).div_ceil(2)
    }

    fn piece_index(&self, sigma: f64, from_left: bool) -> usize {
        let last = self.pieces.len() - 1;
        let mut idx = self.breakpoints[1..]
            .iter()
            .position(|&b| sigma < b)
            .unwrap_or(last);
        // at an interior breakpoint the left piece owns the left limit
        if from_left && idx > 0 && (sigma - self.breakpoints[idx]).abs() <= LOCATION_EPS {
            idx -= 1;
        }
        idx.min(last)
    }

    /// Density value at `sigma`; at breakpoints the right piece is used.
    pub fn eval(&self, sigma: f64) -> DMatrix<f64> {
        self.eval_side(sigma, false)
    }

    /// Density value, taking the left piece at breakpoints when `from_left`.
    pub fn eval_side(&self, sigma: f64, from_left: bool) -> DMatrix<f64> {
        let i = self.piece_index(sigma, from_left);
        self.pieces[i].eval(sigma - self.breakpoints[i])
    }

    pub fn norm_at(&self, sigma: f64) -> f64 {
        spectral_norm(&self.eval(sigma))
    }

    /// Quadrature panels for integrating `‖ζ(σ)‖` on `[a, b] ⊂ [-1, 0]`:
    /// split at breakpoints and, for scalar densities, at sign changes.
    fn norm_panels(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![a, b];
        for (i, w) in self.breakpoints.windows(2).enumerate() {
            if w[0] > a && w[0] < b {
                cuts.push(w[0]);
            }
            if self.dim == 1 {
                for r in scalar_real_roots(&self.pieces[i], w[1] - w[0]) {
                    let x = w[0] + r;
                    if x > a && x < b {
                        cuts.push(x);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= LOCATION_EPS);
        cuts.windows(2)
            .filter(|w| w[1] - w[0] > LOCATION_EPS)
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// `∫_a^b weight(σ) ‖ζ(σ)‖^power dσ` by per-panel Gauss–Legendre.
    pub fn integrate_norm<F: Fn(f64) -> f64>(&self, a: f64, b: f64, power: i32, weight: F) -> f64 {
        let rule = gauss_legendre(self.quadrature_order());
        self.integrate_norm_with(&rule, a, b, power, weight)
    }

    pub(crate) fn integrate_norm_with<F: Fn(f64) -> f64>(
        &self,
        rule: &Rule,
        a: f64,
        b: f64,
        power: i32,
        weight: F,
    ) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.norm_panels(a, b)
            .into_iter()
            .map(|(l, r)| {
                let mid = 0.5 * (l + r);
                let i = self.piece_index(mid, false);
                let piece = &self.pieces[i];
                let base = self.breakpoints[i];
                rule.mapped(l, r)
                    .integrate(|s| weight(s) * spectral_norm(&piece.eval(s - base)).powi(power))
            })
            .sum()
    }
}

/// Real roots of a scalar polynomial piece inside `(0, width)`.
fn scalar_real_roots(piece: &DensityPiece, width: f64) -> Vec<f64> {
    let c: Vec<f64> = piece.coeffs.iter().map(|m| m[(0, 0)]).collect();
    let mut deg = c.len() - 1;
    while deg > 0 && c[deg] == 0.0 {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let eval = |x: f64| c[..=deg].iter().rev().fold(0.0, |acc, &a| acc * x + a);
    let roots: Vec<f64> = if deg == 1 {
        vec![-c[0] / c[1]]
    } else {
        // companion matrix of the monic polynomial
        let lead = c[deg];
        let comp = DMatrix::from_fn(deg, deg, |i, j| {
            if i == 0 {
                -c[deg - 1 - j] / lead
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        comp.complex_eigenvalues()
            .iter()
            .filter(|z| z.im.abs() <= 1e-8 * (1.0 + z.re.abs()))
            .map(|z| z.re)
            .collect()
    };
    roots
        .into_iter()
        .filter(|&r| r > LOCATION_EPS && r < width - LOCATION_EPS)
        // only sign changes produce kinks in |p|
        .filter(|&r| {
            let h = 1e-7 * width;
            eval(r - h) * eval(r + h) < 0.0
        })
        .collect()
}

/// The delay measure `ζ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayKernel {
    atoms: Vec<DelayAtom>,
    density: Option<DelayDensity>,
    dim: usize,
}

impl DelayKernel {
    /// Validates and stores a kernel; atoms are kept sorted by location.
    pub fn new(dim: usize, atoms: Vec<DelayAtom>, density: Option<DelayDensity>) -> Result<Self> {
        for (index, atom) in atoms.iter().enumerate() {
            if !atom.location.is_finite() || atom.location < -1.0 || atom.location > 0.0 {
                return Err(Error::DelayOutOfRange {
                    index,
                    delay: atom.location,
                });
            }
            let n = ensure_square(&atom.weight)?;
            if n != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: n,
                    context: format!("atom {index}"),
                });
            }
            ensure_finite(&atom.weight, "atom matrix")?;
        }
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                if (atoms[i].location - atoms[j].location).abs() <= LOCATION_EPS {
                    return Err(Error::DuplicateAtom {
                        first: i,
                        second: j,
                        location: atoms[i].location,
                    });
                }
            }
        }
        if let Some(d) = &density {
            if d.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: d.dim(),
                    context: "density".into(),
                });
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        Ok(Self {
            atoms,
            density,
            dim,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            atoms: Vec::new(),
            density: None,
            dim,
        }
    }

    /// Scalar kernel with a single atom `c δ_r`.
    pub fn scalar_atom(location: f64, c: f64) -> Result<Self> {
        Self::new(1, vec![DelayAtom::scalar(location, c)], None)
    }

    pub fn atoms(&self) -> &[DelayAtom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&DelayDensity> {
        self.density.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.density.is_none()
    }

    pub fn atom_norms(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| spectral_norm(&a.weight)).collect()
    }

    /// True when all of `|ζ|` sits at `r = 0`.
    pub fn mass_only_at_zero(&self) -> bool {
        let dens_mass = self
            .density
            .as_ref()
            .map_or(0.0, |d| d.integrate_norm(-1.0, 0.0, 1, |_| 1.0));
        dens_mass == 0.0
            && self
                .atoms
                .iter()
                .zip(self.atom_norms())
                .all(|(a, n)| n == 0.0 || a.location == 0.0)
    }

    /// Sorted panel boundaries: `-1`, `0`, atom locations and density
    /// breakpoints.
    pub fn panel_boundaries(&self) -> Vec<f64> {
        let mut pts = vec![-1.0, 0.0];
        pts.extend(self.atoms.iter().map(|a| a.location));
        if let Some(d) = &self.density {
            pts.extend_from_slice(d.breakpoints());
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|x, y| (*x - *y).abs() <= LOCATION_EPS);
        pts
    }

    /// Cumulative moments `∫_{[s,0]} e^{2μr} d|ζ|(r)` for a fixed `μ`.
    pub fn tail_moments(&self, mu: f64) -> TailMoments {
        TailMoments::new(self.clone(), mu)
    }

    /// Applies `∫ dζ(σ) f(σ)` to a function given pointwise.
    pub fn apply<F: Fn(f64) -> DVector<f64>>(&self, f: F) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for a in &self.atoms {
            out += &a.weight * f(a.location);
        }
        if let Some(d) = &self.density {
            let rule = gauss_legendre(d.quadrature_order());
            for w in d.breakpoints().windows(2) {
                let mapped = rule.mapped(w[0], w[1]);
                for (&s, &wt) in mapped.nodes.iter().zip(&mapped.weights) {
                    out += d.eval(s) * f(s) * wt;
                }
            }
        }
        out
    }
}

/// Precomputed tail integrals `I(s) = ∫_{[s,0]} e^{2μr} d|ζ|(r)`.
///
/// The atom at `s` itself is included for the left limit and excluded for
/// the right limit; `I` jumps there by `e^{2μs} ‖C‖`.
#[derive(Clone, Debug)]
pub struct TailMoments {
    kernel: DelayKernel,
    mu: f64,
    atom_norms: Vec<f64>,
    // (left, right, ∫ over [left, 0] of the density part)
    panels: Vec<(f64, f64, f64)>,
    rule: Option<Rule>,
}

impl TailMoments {
    fn new(kernel: DelayKernel, mu: f64) -> Self {
        let atom_norms = kernel.atom_norms();
        let (panels, rule) = match &kernel.density {
            None => (Vec::new(), None),
            Some(d) => {
                let rule = gauss_legendre(d.quadrature_order());
                let bps = d.breakpoints();
                let mut panels = Vec::with_capacity(bps.len() - 1);
                let mut acc = 0.0;
                for w in bps.windows(2).rev() {
                    acc += d.integrate_norm_with(&rule, w[0], w[1], 1, |r| (2.0 * mu * r).exp());
                    panels.push((w[0], w[1], acc));
                }
                panels.reverse();
                (panels, Some(rule))
            }
        };
        Self {
            kernel,
            mu,
            atom_norms,
            panels,
            rule,
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kernel(&self) -> &DelayKernel {
        &self.kernel
    }

    /// Total moment over `[-1, 0]`.
    pub fn total(&self) -> f64 {
        self.at(-1.0, true)
    }

    /// `I(s)`; `include_atom_at_s` selects the left limit at an atom.
    pub fn at(&self, s: f64, include_atom_at_s: bool) -> f64 {
        let mu = self.mu;
        let mut sum = 0.0;
        for (a, &norm) in self.kernel.atoms.iter().zip(&self.atom_norms) {
            let at_s = (a.location - s).abs() <= LOCATION_EPS;
            if (at_s && include_atom_at_s) || (!at_s && a.location > s) {
                sum += (2.0 * mu * a.location).exp() * norm;
            }
        }
        if let (Some(d), Some(rule)) = (&self.kernel.density, &self.rule) {
            for (i, &(left, right, cum)) in self.panels.iter().enumerate() {
                if s <= left + LOCATION_EPS {
                    sum += cum;
                    break;
                }
                if s < right {
                    let rest = self.panels.get(i + 1).map_or(0.0, |p| p.2);
                    sum += rest
                        + d.integrate_norm_with(rule, s, right, 1, |r| (2.0 * mu * r).exp());
                    break;
                }
            }
        }
        sum
    }
}

/// Drift `B` plus delay measure `ζ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDelaySystem {
    drift: DMatrix<f64>,
    kernel: DelayKernel,
}

impl LinearDelaySystem {
    pub fn new(drift: DMatrix<f64>, kernel: DelayKernel) -> Result<Self> {
        let n = ensure_square(&drift)?;
        ensure_finite(&drift, "drift")?;
        if n != kernel.dim() {
            return Err(Error::Dimension {
                expected: n,
                found: kernel.dim(),
                context: "kernel vs drift".into(),
            });
        }
        Ok(Self { drift, kernel })
    }

    /// `u' = b u(t) + c u(t + r)`.
    pub fn scalar(b: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        let atoms = atoms.iter().map(|&(r, c)| DelayAtom::scalar(r, c)).collect();
        Self::new(
            DMatrix::from_element(1, 1, b),
            DelayKernel::new(1, atoms, None)?,
        )
    }

    /// Rescales `u'(t) = B u(t) + Σ Cᵢ u(t - dᵢ)`, `0 ≤ dᵢ ≤ horizon`, onto the
    /// unit horizon via `v(s) = u(horizon · s)`.
    pub fn from_horizon(
        drift: DMatrix<f64>,
        delayed: Vec<(f64, DMatrix<f64>)>,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
        }
        let n = ensure_square(&drift)?;
        let atoms = delayed
            .into_iter()
            .map(|(d, c)| DelayAtom::new(-d / horizon, c * horizon))
            .collect();
        Self::new(drift * horizon, DelayKernel::new(n, atoms, None)?)
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.drift
    }

    pub fn kernel(&self) -> &DelayKernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// Same kernel, drift `B + shift·I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let n = self.dim();
        Self {
            drift: &self.drift + DMatrix::identity(n, n) * shift,
            kernel: self.kernel.clone(),
        }
    }
}

/// Smallest `λ` with `B - λI` dissipative: the top eigenvalue of `(B + Bᵀ)/2`.
pub fn dissipativity_lambda(b: &DMatrix<f64>) -> Result<f64> {
    ensure_square(b)?;
    ensure_finite(b, "drift")?;
    Ok(sym_eigmax(&symmetric_part(b)))
}

/// Total variation `V = |ζ|(0) - |ζ|(-1)`.
pub fn total_variation(kernel: &DelayKernel) -> f64 {
    exp_moment(kernel, 0.0)
}

/// `∫_{-1}^0 e^{2μr} d|ζ|(r)`.
pub fn exp_moment(kernel: &DelayKernel, mu: f64) -> f64 {
    let atoms: f64 = kernel
        .atoms
        .iter()
        .zip(kernel.atom_norms())
        .map(|(a, n)| (2.0 * mu * a.location).exp() * n)
        .sum();
    let dens = kernel
        .density
        .as_ref()
        .map_or(0.0, |d| d.integrate_norm(-1.0, 0.0, 1, |r| (2.0 * mu * r).exp()));
    atoms + dens
}

/// `∫_{-1}^0 e^{2μρ} ‖ζ(ρ)‖² dρ` for atom-free kernels.
pub fn sq_exp_moment(kernel: &DelayKernel, mu: f64) -> Result<f64> {
    if !kernel.atoms.is_empty() {
        return Err(Error::AtomsPresent);
    }
    Ok(kernel
        .density
        .as_ref()
        .map_or(0.0, |d| d.integrate_norm(-1.0, 0.0, 2, |r| (2.0 * mu * r).exp())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(dissipativity_lambda(&m1(-1.0)).unwrap(), -1.0);
        let skew = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(dissipativity_lambda(&skew).unwrap().abs() < 1e-15);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        // symmetric part [[0,-1/2],[-1/2,-3]]: eigenvalues (-3 ± √10)/2
        let oracle = (-3.0 + 10f64.sqrt()) / 2.0;
        assert!((dissipativity_lambda(&b).unwrap() - oracle).abs() < 1e-14);
        assert!((oracle - 0.0811).abs() < 1e-4);
    }

    #[test]
    fn lambda_rejects_non_square() {
        let b = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(
            dissipativity_lambda(&b),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&DelayKernel::empty(1)), 0.0);
        assert_eq!(total_variation(&DelayKernel::scalar_atom(-1.0, 1.0).unwrap()), 1.0);
        let k = DelayKernel::new(
            1,
            vec![DelayAtom::scalar(-1.0, 1.0), DelayAtom::scalar(-0.5, 0.5)],
            Some(DelayDensity::scalar_constant(1.0)),
        )
        .unwrap();
        assert!((total_variation(&k) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn exp_moment_examples() {
        let atom = DelayKernel::scalar_atom(-1.0, 1.0).unwrap();
        assert!((exp_moment(&atom, 1.0) - (-2.0f64).exp()).abs() < 1e-15);
        let dens = DelayKernel::new(1, vec![], Some(DelayDensity::scalar_constant(1.0))).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((exp_moment(&dens, 1.0) - exact).abs() < 1e-14);
        assert!((exact - 0.432332).abs() < 1e-6);
        assert_eq!(exp_moment(&dens, 0.0), total_variation(&dens));
    }

    #[test]
    fn sq_exp_moment_examples() {
        let zero = DelayKernel::new(1, vec![], Some(DelayDensity::scalar_constant(0.0))).unwrap();
        assert_eq!(sq_exp_moment(&zero, 3.0).unwrap(), 0.0);
        let one = DelayKernel::new(1, vec![], Some(DelayDensity::scalar_constant(1.0))).unwrap();
        assert!((sq_exp_moment(&one, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let two = DelayKernel::new(1, vec![], Some(DelayDensity::scalar_constant(2.0))).unwrap();
        let exact = 4.0 * (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((sq_exp_moment(&two, 1.0).unwrap() - exact).abs() < 1e-13);
        assert!((exact - 1.729329).abs() < 1e-6);
        let atom = DelayKernel::scalar_atom(-1.0, 1.0).unwrap();
        assert!(matches!(sq_exp_moment(&atom, 0.0), Err(Error::AtomsPresent)));
    }

    #[test]
    fn kernel_validation() {
        let err = DelayKernel::new(1, vec![DelayAtom::scalar(0.0, 1.0), DelayAtom::scalar(-1.5, 1.0)], None);
        assert!(matches!(err, Err(Error::DelayOutOfRange { index: 1, .. })));
        let dup = DelayKernel::new(1, vec![DelayAtom::scalar(-0.5, 1.0), DelayAtom::scalar(-0.5, 2.0)], None);
        assert!(matches!(dup, Err(Error::DuplicateAtom { .. })));
        let dim = DelayKernel::new(2, vec![DelayAtom::scalar(-0.5, 1.0)], None);
        assert!(matches!(dim, Err(Error::Dimension { .. })));
        let bad_bp = DelayDensity::new(vec![-1.0, 0.5, 0.0], vec![DensityPiece::constant(m1(1.0)); 2]);
        assert!(bad_bp.is_err());
        let bad_end = DelayDensity::new(vec![-0.9, 0.0], vec![DensityPiece::constant(m1(1.0))]);
        assert!(bad_end.is_err());
    }

    #[test]
    fn scalar_density_split_at_sign_change() {
        // ζ(σ) = σ + 1/2 on [-1, 0]: ∫|ζ| = 1/4
        let d = DelayDensity::new(
            vec![-1.0, 0.0],
            vec![DensityPiece {
                coeffs: vec![m1(-0.5), m1(1.0)],
            }],
        )
        .unwrap();
        let k = DelayKernel::new(1, vec![], Some(d)).unwrap();
        assert!((total_variation(&k) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tail_moments_jump_at_atoms() {
        let k = DelayKernel::new(
            1,
            vec![DelayAtom::scalar(-0.5, 2.0)],
            Some(DelayDensity::scalar_constant(1.0)),
        )
        .unwrap();
        let t = k.tail_moments(0.0);
        assert!((t.at(-0.5, true) - 2.5).abs() < 1e-14);
        assert!((t.at(-0.5, false) - 0.5).abs() < 1e-14);
        assert!((t.at(-1.0, true) - 3.0).abs() < 1e-14);
        assert!((t.total() - total_variation(&k)).abs() < 1e-14);
        assert!(t.at(0.0, false).abs() < 1e-15);
    }

    #[test]
    fn horizon_rescaling() {
        // u'(t) = -u(t) + 0.5 u(t - 2)  →  v'(s) = -2 v(s) + 1.0 v(s - 1)
        let sys = LinearDelaySystem::from_horizon(m1(-1.0), vec![(2.0, m1(0.5))], 2.0).unwrap();
        assert_eq!(sys.drift()[(0, 0)], -2.0);
        assert_eq!(sys.kernel().atoms()[0].location, -1.0);
        assert_eq!(sys.kernel().atoms()[0].weight[(0, 0)], 1.0);
    }
}

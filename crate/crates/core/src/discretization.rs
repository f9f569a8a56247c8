//! Discretized delay generator.
//!
//! The history `[-1, 0]` is split into panels at atom locations and density
//! breakpoints. Each panel carries `N` Legendre–Gauss–Lobatto nodes and the
//! collocation derivative. Panels are coupled upwind: the right end of every
//! panel is pulled towards the left end of its right neighbour (or towards
//! the state `x` on the last panel) by a penalty scaled with the inverse end
//! weight. The state block `x` evolves by `B x + Φ f`.
//!
//! With diagonal quadrature weights `W` the derivative satisfies
//! `W D + Dᵀ W = diag(-1, 0, …, 0, 1)`, so for piecewise constant `τ` the
//! discrete energy balance reproduces the continuous one term by term, with
//! an extra `-τ (f_R - g)²` at each coupling.

use nalgebra::DMatrix;

use crate::certificate::Side;
use crate::kernel::{LinearDelaySystem, LOCATION_EPS};
use crate::quadrature::{gauss_lobatto, legendre, lobatto_derivative};
use crate::{Error, Result};

pub const MIN_NODES_PER_PANEL: usize = 4;

#[derive(Clone, Debug)]
pub struct GeneratorDiscretization {
    /// Generator matrix, Kronecker-expanded over the `n` state components.
    pub matrix: DMatrix<f64>,
    /// Quadrature weight of each history node; they sum to 1.
    pub quad_weights: Vec<f64>,
    pub node_locations: Vec<f64>,
    /// Panel index of each history node.
    pub panel_map: Vec<usize>,
    /// One-sided limit of piecewise-smooth data seen from inside the panel.
    pub node_sides: Vec<Side>,
    pub panels: Vec<(f64, f64)>,
    pub nodes_per_panel: usize,
    pub dim: usize,
}

impl GeneratorDiscretization {
    /// Number of history nodes.
    pub fn node_count(&self) -> usize {
        self.node_locations.len()
    }

    /// Row/column of component `i` of history node `j`.
    pub fn index(&self, node: usize, comp: usize) -> usize {
        self.dim + node * self.dim + comp
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Basis of piecewise Legendre polynomials of degree `<= degree` per
    /// panel, plus the state block; columns of the returned matrix.
    pub fn polynomial_basis(&self, degree: usize) -> DMatrix<f64> {
        let n = self.dim;
        let npp = self.nodes_per_panel;
        let degree = degree.min(npp - 1);
        let ref_nodes = gauss_lobatto(npp).nodes;
        let cols = n + self.panels.len() * (degree + 1) * n;
        let mut basis = DMatrix::zeros(self.size(), cols);
        for i in 0..n {
            basis[(i, i)] = 1.0;
        }
        let mut col = n;
        for p in 0..self.panels.len() {
            for k in 0..=degree {
                for comp in 0..n {
                    for (local, &x) in ref_nodes.iter().enumerate() {
                        let node = p * npp + local;
                        basis[(self.index(node, comp), col)] = legendre(k, x).0;
                    }
                    col += 1;
                }
            }
        }
        basis
    }
}

/// Panel boundaries with every atom location and density breakpoint.
pub fn panel_layout(system: &LinearDelaySystem) -> Result<Vec<(f64, f64)>> {
    let kernel = system.kernel();
    let mut pts = vec![-1.0, 0.0];
    pts.extend(kernel.atoms().iter().map(|a| a.location));
    if let Some(d) = kernel.density() {
        pts.extend_from_slice(d.breakpoints());
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut panels = Vec::with_capacity(pts.len() - 1);
    for w in pts.windows(2) {
        if w[1] - w[0] < LOCATION_EPS {
            return Err(Error::DegeneratePanel {
                left: w[0],
                right: w[1],
            });
        }
        panels.push((w[0], w[1]));
    }
    Ok(panels)
}

pub fn discretize_generator(
    system: &LinearDelaySystem,
    nodes_per_panel: usize,
) -> Result<GeneratorDiscretization> {
    if nodes_per_panel < MIN_NODES_PER_PANEL {
        return Err(Error::TooFewNodes {
            min: MIN_NODES_PER_PANEL,
            found: nodes_per_panel,
        });
    }
    let npp = nodes_per_panel;
    let n = system.dim();
    let panels = panel_layout(system)?;
    let rule = gauss_lobatto(npp);
    let deriv = lobatto_derivative(npp);
    let node_count = panels.len() * npp;
    let size = n + node_count * n;
    let mut a = DMatrix::zeros(size, size);

    let mut quad_weights = Vec::with_capacity(node_count);
    let mut node_locations = Vec::with_capacity(node_count);
    let mut panel_map = Vec::with_capacity(node_count);
    let mut node_sides = Vec::with_capacity(node_count);
    let idx = |node: usize, comp: usize| n + node * n + comp;

    for (p, &(left, right)) in panels.iter().enumerate() {
        let half = 0.5 * (right - left);
        for k in 0..npp {
            node_locations.push(left + half * (rule.nodes[k] + 1.0));
            quad_weights.push(half * rule.weights[k]);
            panel_map.push(p);
            node_sides.push(if k == 0 { Side::Right } else { Side::Left });
        }
        let base = p * npp;
        for k in 0..npp {
            for j in 0..npp {
                let d = deriv[k][j] / half;
                if d != 0.0 {
                    for c in 0..n {
                        a[(idx(base + k, c), idx(base + j, c))] = d;
                    }
                }
            }
        }
        // upwind coupling at the right end
        let end = base + npp - 1;
        let penalty = 1.0 / (half * rule.weights[npp - 1]);
        for c in 0..n {
            a[(idx(end, c), idx(end, c))] -= penalty;
            let source = if p + 1 == panels.len() {
                c
            } else {
                idx(base + npp, c)
            };
            a[(idx(end, c), source)] += penalty;
        }
    }

    // state row: B x + Σ Cᵢ f(rᵢ) + Σ_j w_j ζ(s_j) f_j
    let b = system.drift();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += b[(i, j)];
        }
    }
    let kernel = system.kernel();
    for atom in kernel.atoms() {
        let col_of = |comp: usize| -> usize {
            if atom.location.abs() <= LOCATION_EPS {
                comp
            } else {
                let p = panels
                    .iter()
                    .position(|&(l, _)| (l - atom.location).abs() <= LOCATION_EPS)
                    .expect("atoms are panel boundaries");
                idx(p * npp, comp)
            }
        };
        for i in 0..n {
            for j in 0..n {
                a[(i, col_of(j))] += atom.weight[(i, j)];
            }
        }
    }
    if let Some(d) = kernel.density() {
        for node in 0..node_count {
            let z = d.eval_side(node_locations[node], node_sides[node] == Side::Left);
            let w = quad_weights[node];
            for i in 0..n {
                for j in 0..n {
                    a[(i, idx(node, j))] += w * z[(i, j)];
                }
            }
        }
    }

    Ok(GeneratorDiscretization {
        matrix: a,
        quad_weights,
        node_locations,
        panel_map,
        node_sides,
        panels,
        nodes_per_panel: npp,
        dim: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{DelayAtom, DelayDensity, DelayKernel};

    #[test]
    fn empty_kernel_state_row_is_drift() {
        let sys = LinearDelaySystem::scalar(-1.0, &[]).unwrap();
        let disc = discretize_generator(&sys, 8).unwrap();
        assert_eq!(disc.size(), 9);
        assert_eq!(disc.matrix[(0, 0)], -1.0);
        for j in 1..9 {
            assert_eq!(disc.matrix[(0, j)], 0.0);
        }
        let total: f64 = disc.quad_weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn atom_couples_to_its_node() {
        let sys = LinearDelaySystem::scalar(-2.0, &[(-1.0, 1.0)]).unwrap();
        let disc = discretize_generator(&sys, 16).unwrap();
        assert_eq!(disc.node_locations[0], -1.0);
        assert_eq!(disc.matrix[(0, disc.index(0, 0))], 1.0);
    }

    #[test]
    fn interior_atom_is_a_panel_boundary() {
        let r = -1.0 / 2f64.sqrt();
        let sys = LinearDelaySystem::scalar(-2.0, &[(r, 0.7)]).unwrap();
        let disc = discretize_generator(&sys, 8).unwrap();
        assert_eq!(disc.panels.len(), 2);
        assert_eq!(disc.node_locations[8], r);
        assert_eq!(disc.matrix[(0, disc.index(8, 0))], 0.7);
        let total: f64 = disc.quad_weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn atom_at_zero_acts_on_state() {
        let sys = LinearDelaySystem::scalar(-2.0, &[(0.0, 0.5), (-1.0, 1.0)]).unwrap();
        let disc = discretize_generator(&sys, 6).unwrap();
        assert_eq!(disc.matrix[(0, 0)], -1.5);
    }

    #[test]
    fn density_row_integrates_polynomials() {
        // Φf = ∫ 1 · f for f(σ) = σ²: 1/3
        let k = DelayKernel::new(1, vec![], Some(DelayDensity::scalar_constant(1.0))).unwrap();
        let sys = LinearDelaySystem::new(DMatrix::from_element(1, 1, 0.0), k).unwrap();
        let disc = discretize_generator(&sys, 6).unwrap();
        let got: f64 = (0..disc.node_count())
            .map(|j| disc.matrix[(0, disc.index(j, 0))] * disc.node_locations[j].powi(2))
            .sum();
        assert!((got - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_exact_on_continuous_polynomials() {
        let k = DelayKernel::new(2, vec![DelayAtom::new(-0.4, DMatrix::identity(2, 2))], None).unwrap();
        let sys = LinearDelaySystem::new(DMatrix::zeros(2, 2), k).unwrap();
        let disc = discretize_generator(&sys, 7).unwrap();
        // f(σ) = (σ³, 1 - σ), x = f(0): coupling terms vanish
        let mut v = nalgebra::DVector::zeros(disc.size());
        v[0] = 0.0;
        v[1] = 1.0;
        for j in 0..disc.node_count() {
            let s = disc.node_locations[j];
            v[disc.index(j, 0)] = s.powi(3);
            v[disc.index(j, 1)] = 1.0 - s;
        }
        let av = &disc.matrix * &v;
        for j in 0..disc.node_count() {
            let s = disc.node_locations[j];
            assert!((av[disc.index(j, 0)] - 3.0 * s * s).abs() < 1e-11);
            assert!((av[disc.index(j, 1)] + 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_too_few_nodes() {
        let sys = LinearDelaySystem::scalar(-1.0, &[]).unwrap();
        assert!(matches!(discretize_generator(&sys, 3), Err(Error::TooFewNodes { .. })));
    }
}

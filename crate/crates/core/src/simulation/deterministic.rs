use nalgebra::DVector;
use serde::Serialize;

use super::history::{step_count, steps_per_unit, hermite, Cells, HistorySegment, NormPlan};
use crate::certificate::ContractionCertificate;
use crate::kernel::{LinearDelaySystem, LOCATION_EPS};
use crate::{Error, Result};

/// Ratio tolerance for integration error in [`contraction_report`].
pub const CONTRACTION_SLACK: f64 = 1e-4;

/// Spacing of norm checkpoints, in time units.
const CHECKPOINT_SPACING: f64 = 0.05;

/// Solution of a linear delay equation on a uniform grid.
#[derive(Clone, Debug)]
pub struct DeterministicTrajectory {
    pub h: f64,
    pub dim: usize,
    pub times: Vec<f64>,
    /// `u(t_k)`, `dim` values per time.
    pub states: Vec<f64>,
    /// `(t, ‖(u(t), u_t)‖_τ)` at checkpoint times, once recorded.
    pub segment_norms: Vec<(f64, f64)>,
    derivs: Vec<f64>,
    history: HistorySegment,
}

impl DeterministicTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// The segment `u_{t_k}` on `[-1, 0]`.
    pub fn segment(&self, k: usize) -> HistorySegment {
        let view = SegmentView { traj: self, end: k };
        let m = view.cell_count();
        let mut values = Vec::with_capacity((m + 1) * self.dim);
        let mut slopes = Vec::with_capacity((m + 1) * self.dim);
        for i in 0..=m {
            let g = k as isize - m as isize + i as isize;
            let (v, d) = self.node(g);
            values.extend_from_slice(v);
            slopes.extend_from_slice(d);
        }
        HistorySegment::from_samples(self.h, self.dim, values, slopes)
            .expect("segment grid matches the trajectory")
    }

    fn node(&self, g: isize) -> (&[f64], &[f64]) {
        let n = self.dim;
        if g < 0 {
            let k = (g + self.history.cell_count() as isize) as usize;
            (self.history.node(k), self.history.node_slope(k))
        } else {
            let k = g as usize;
            (&self.states[k * n..(k + 1) * n], &self.derivs[k * n..(k + 1) * n])
        }
    }

    fn segment_norm(&self, k: usize, plan: &NormPlan) -> f64 {
        let view = SegmentView { traj: self, end: k };
        plan.squared(self.state(k), &view).sqrt()
    }

    /// Fills `segment_norms` every `CHECKPOINT_SPACING` time units and at
    /// the final time.
    pub fn record_norms(&mut self, cert: &ContractionCertificate) -> Result<()> {
        let plan = NormPlan::new(cert, self.h)?;
        let norms = checkpoints(self.len(), self.h)
            .into_iter()
            .map(|k| (self.times[k], self.segment_norm(k, &plan)))
            .collect();
        self.segment_norms = norms;
        Ok(())
    }

    /// CSV `t,u0,…,norm`; the norm column is empty away from checkpoints.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 0..self.dim {
            out.push_str(&format!(",u{i}"));
        }
        out.push_str(",norm\n");
        let mut norms = self.segment_norms.iter().peekable();
        for (k, &t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:.16e}"));
            for v in self.state(k) {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push(',');
            if let Some(&&(tn, norm)) = norms.peek() {
                if (tn - t).abs() <= 0.5 * self.h {
                    out.push_str(&format!("{norm:.16e}"));
                    norms.next();
                }
            }
            out.push('\n');
        }
        out
    }
}

fn checkpoints(len: usize, h: f64) -> Vec<usize> {
    let stride = ((CHECKPOINT_SPACING / h).round() as usize).max(1);
    let mut ks: Vec<usize> = (0..len).step_by(stride).collect();
    if ks.last() != Some(&(len - 1)) {
        ks.push(len - 1);
    }
    ks
}

/// Timeline window `[t_end - 1, t_end]`, history included.
struct SegmentView<'a> {
    traj: &'a DeterministicTrajectory,
    end: usize,
}

impl Cells for SegmentView<'_> {
    fn dim(&self) -> usize {
        self.traj.dim
    }

    fn cell_count(&self) -> usize {
        self.traj.history.cell_count()
    }

    fn eval_cell(&self, k: usize, theta: f64, out: &mut [f64]) {
        let g = self.end as isize - self.cell_count() as isize + k as isize;
        let (v0, d0) = self.traj.node(g);
        let (v1, d1) = if g == -1 {
            let m = self.cell_count();
            (self.traj.history.node(m), self.traj.history.node_slope(m))
        } else {
            self.traj.node(g + 1)
        };
        for i in 0..out.len() {
            out[i] = hermite(v0[i], d0[i], v1[i], d1[i], self.traj.h, theta);
        }
    }
}

/// Delay terms snapped to the step grid.
pub(super) struct GridKernel {
    pub(super) n: usize,
    pub(super) m: usize,
    /// `B` plus every term acting on `u(t)`, row-major.
    b: Vec<f64>,
    /// `(steps back, matrix)`, `steps back ≥ 1`.
    atoms: Vec<(usize, Vec<f64>)>,
    /// Trapezoid weight times density at `σ_l = -1 + l h`, `l < m`.
    density: Vec<Vec<f64>>,
}

impl GridKernel {
    pub(super) fn new(system: &LinearDelaySystem, h: f64, m: usize) -> Self {
        let n = system.dim();
        let flat = |a: &nalgebra::DMatrix<f64>| -> Vec<f64> {
            (0..n).flat_map(|i| (0..n).map(move |j| a[(i, j)])).collect()
        };
        let mut b = flat(system.drift());
        let mut atoms = Vec::new();
        for atom in system.kernel().atoms() {
            let exact = -atom.location / h;
            let k = exact.round();
            if (exact - k).abs() > 1e-9 * exact.abs().max(1.0) {
                log::warn!(
                    "atom at {} snapped to grid point {} (h = {h})",
                    atom.location,
                    -k * h
                );
            }
            let w = flat(&atom.weight);
            if k == 0.0 {
                b.iter_mut().zip(&w).for_each(|(x, y)| *x += y);
            } else {
                atoms.push((k as usize, w));
            }
        }
        let mut density = Vec::new();
        if let Some(d) = system.kernel().density() {
            for l in 0..=m {
                let s = if l == m { 0.0 } else { -1.0 + l as f64 * h };
                let z = if l == 0 {
                    d.eval_side(s, false)
                } else if l == m || d.breakpoints().iter().all(|&p| (p - s).abs() > LOCATION_EPS) {
                    d.eval_side(s, true)
                } else {
                    (d.eval_side(s, true) + d.eval_side(s, false)) * 0.5
                };
                let w = if l == 0 || l == m { 0.5 * h } else { h };
                let z = flat(&(z * w));
                if l == m {
                    b.iter_mut().zip(&z).for_each(|(x, y)| *x += y);
                } else {
                    density.push(z);
                }
            }
        }
        Self {
            n,
            m,
            b,
            atoms,
            density,
        }
    }
}

impl GridKernel {
    /// Grid right-hand side; `past(j)` is the value `j ∈ [1, m]` steps back.
    pub(super) fn apply<'a, P: Fn(usize) -> &'a [f64]>(&self, now: &[f64], past: P, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        mat_acc(&self.b, now, out);
        for (back, w) in &self.atoms {
            mat_acc(w, past(*back), out);
        }
        for (l, w) in self.density.iter().enumerate() {
            mat_acc(w, past(self.m - l), out);
        }
    }
}

#[inline]
pub(super) fn mat_acc(a: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        *o += row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
    }
}

/// Where delayed values at a stage come from.
#[derive(Clone, Copy)]
enum Stage {
    /// `t_n + c h` with `c ∈ {0, 1}`.
    Node(usize),
    /// `t_n + h/2`.
    Mid,
}

struct Integrator<'a> {
    kernel: GridKernel,
    history: &'a HistorySegment,
    h: f64,
}

impl Integrator<'_> {
    fn delayed(&self, states: &[f64], derivs: &[f64], pos: isize, mid: bool, out: &mut [f64]) {
        let n = self.kernel.n;
        let m = self.kernel.m as isize;
        let node = |g: isize| -> (&[f64], &[f64]) {
            if g < 0 {
                let k = (g + m) as usize;
                (self.history.node(k), self.history.node_slope(k))
            } else {
                let k = g as usize;
                (&states[k * n..(k + 1) * n], &derivs[k * n..(k + 1) * n])
            }
        };
        if !mid {
            out.copy_from_slice(node(pos).0);
        } else {
            let (v0, d0) = node(pos);
            let (v1, d1) = if pos == -1 {
                (self.history.node(m as usize), self.history.node_slope(m as usize))
            } else {
                node(pos + 1)
            };
            for i in 0..n {
                out[i] = hermite(v0[i], d0[i], v1[i], d1[i], self.h, 0.5);
            }
        }
    }

    /// Right-hand side at step `n` and stage `stage` with current value `y`.
    fn rhs(&self, states: &[f64], derivs: &[f64], step: usize, stage: Stage, y: &[f64], out: &mut [f64]) {
        let k = &self.kernel;
        out.iter_mut().for_each(|o| *o = 0.0);
        mat_acc(&k.b, y, out);
        let mut buf = vec![0.0; k.n];
        let (base, mid) = match stage {
            Stage::Node(c) => (step as isize + c as isize, false),
            Stage::Mid => (step as isize, true),
        };
        for (back, w) in &k.atoms {
            self.delayed(states, derivs, base - *back as isize, mid, &mut buf);
            mat_acc(w, &buf, out);
        }
        for (l, w) in k.density.iter().enumerate() {
            self.delayed(states, derivs, base - k.m as isize + l as isize, mid, &mut buf);
            mat_acc(w, &buf, out);
        }
    }
}

/// Classical RK4 with step `h` for `u' = B u(t) + ∫ dζ(σ) u(t+σ)`, `u(0) = x0`,
/// `u = history` on `[-1, 0)`.
///
/// Delayed values at half steps come from the cubic Hermite interpolant of
/// the stored grid values and slopes. Atoms are snapped to the grid; the
/// density integral uses the trapezoid rule on the same grid.
pub fn integrate_dde(
    system: &LinearDelaySystem,
    x0: &DVector<f64>,
    history: &HistorySegment,
    t_final: f64,
    h: f64,
) -> Result<DeterministicTrajectory> {
    let n = system.dim();
    let m = steps_per_unit(h)?;
    let steps = step_count(h, t_final, "t_final")?;
    if (history.step() - h).abs() > 1e-15 {
        return Err(Error::StepMismatch {
            step: h,
            what: "history grid step",
            value: history.step(),
        });
    }
    if x0.len() != n || history.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            found: if x0.len() != n { x0.len() } else { history.dim() },
            context: "initial data vs system".into(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("x0".into()));
    }

    let integ = Integrator {
        kernel: GridKernel::new(system, h, m),
        history,
        h,
    };
    let mut states = Vec::with_capacity((steps + 1) * n);
    let mut derivs = Vec::with_capacity((steps + 1) * n);
    states.extend(x0.iter());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let y: Vec<f64> = states[step * n..(step + 1) * n].to_vec();
        integ.rhs(&states, &derivs, step, Stage::Node(0), &y, &mut k1);
        derivs.extend_from_slice(&k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        integ.rhs(&states, &derivs, step, Stage::Mid, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        integ.rhs(&states, &derivs, step, Stage::Mid, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        integ.rhs(&states, &derivs, step, Stage::Node(1), &tmp, &mut k4);
        for i in 0..n {
            states.push(y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
    }
    let y: Vec<f64> = states[steps * n..].to_vec();
    integ.rhs(&states, &derivs, steps, Stage::Node(0), &y, &mut k1);
    derivs.extend_from_slice(&k1);

    Ok(DeterministicTrajectory {
        h,
        dim: n,
        times: (0..=steps).map(|k| k as f64 * h).collect(),
        states,
        segment_norms: Vec::new(),
        derivs,
        history: history.clone(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub mu: f64,
    pub initial_norm: f64,
    /// `max_t ‖state(t)‖_τ / (e^{μt} ‖state(0)‖_τ)`.
    pub max_ratio: f64,
    pub pass: bool,
    /// `(t, ‖state(t)‖_τ)`.
    pub checkpoints: Vec<(f64, f64)>,
}

pub fn contraction_report(
    trajectory: &DeterministicTrajectory,
    cert: &ContractionCertificate,
) -> Result<ContractionReport> {
    if cert.weight.kernel().dim() != trajectory.dim {
        return Err(Error::Dimension {
            expected: trajectory.dim,
            found: cert.weight.kernel().dim(),
            context: "certificate vs trajectory".into(),
        });
    }
    let plan = NormPlan::new(cert, trajectory.h)?;
    let points: Vec<(f64, f64)> = checkpoints(trajectory.len(), trajectory.h)
        .into_iter()
        .map(|k| (trajectory.times[k], trajectory.segment_norm(k, &plan)))
        .collect();
    let initial = points[0].1;
    if !(initial > 0.0) {
        return Err(Error::ZeroInitialNorm);
    }
    let max_ratio = points
        .iter()
        .map(|&(t, norm)| norm / ((cert.mu * t).exp() * initial))
        .fold(0.0, f64::max);
    Ok(ContractionReport {
        mu: cert.mu,
        initial_norm: initial,
        max_ratio,
        pass: max_ratio <= 1.0 + CONTRACTION_SLACK,
        checkpoints: points,
    })
}

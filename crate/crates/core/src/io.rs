//! JSON formats for systems and reports.
//!
//! A system file looks like
//!
//! ```json
//! {"B": [[-2.0]],
//!  "kernel": {"atoms": [{"delay": -1.0, "matrix": [[1.0]]}],
//!             "density": {"breakpoints": [-1.0, 0.0],
//!                         "pieces": [{"coeffs": [[[0.5]]]}]}}}
//! ```
//!
//! Density coefficients are matrices multiplying powers of `σ - left`, where
//! `left` is the piece's left breakpoint.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::certificate::{ContractionCertificate, CorollaryBounds, TauSample};
use crate::discretization::GeneratorDiscretization;
use crate::kernel::{DelayAtom, DelayDensity, DelayKernel, DensityPiece, LinearDelaySystem};
use crate::operator_check::{weighted_gram, DissipativityReport};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub delay: f64,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<PieceSpec>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
}

/// Serialized form of a [`LinearDelaySystem`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub kernel: KernelSpec,
}

fn matrix(rows: &[Vec<f64>], context: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::InvalidArgument(format!("{context}: empty matrix")));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(Error::Dimension {
            expected: c,
            found: row.len(),
            context: format!("{context}, row {i}"),
        });
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl SystemSpec {
    pub fn to_system(&self) -> Result<LinearDelaySystem> {
        let b = matrix(&self.b, "B")?;
        let atoms = self
            .kernel
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if !(a.delay >= -1.0 && a.delay <= 0.0) {
                    return Err(Error::DelayOutOfRange {
                        index: i,
                        delay: a.delay,
                    });
                }
                Ok(DelayAtom::new(a.delay, matrix(&a.matrix, &format!("atom {i}"))?))
            })
            .collect::<Result<Vec<_>>>()?;
        let density = match &self.kernel.density {
            None => None,
            Some(d) => {
                let pieces = d
                    .pieces
                    .iter()
                    .enumerate()
                    .map(|(p, piece)| {
                        let coeffs = piece
                            .coeffs
                            .iter()
                            .enumerate()
                            .map(|(k, c)| matrix(c, &format!("density piece {p} coeff {k}")))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(DensityPiece { coeffs })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(DelayDensity::new(d.breakpoints.clone(), pieces)?)
            }
        };
        let kernel = DelayKernel::new(b.nrows(), atoms, density)?;
        LinearDelaySystem::new(b, kernel)
    }

    pub fn from_system(system: &LinearDelaySystem) -> Self {
        let kernel = system.kernel();
        Self {
            b: rows(system.drift()),
            kernel: KernelSpec {
                atoms: kernel
                    .atoms()
                    .iter()
                    .map(|a| AtomSpec {
                        delay: a.location,
                        matrix: rows(&a.weight),
                    })
                    .collect(),
                density: kernel.density().map(|d| DensitySpec {
                    breakpoints: d.breakpoints().to_vec(),
                    pieces: d
                        .pieces()
                        .iter()
                        .map(|p| PieceSpec {
                            coeffs: p.coeffs.iter().map(rows).collect(),
                        })
                        .collect(),
                }),
            },
        }
    }
}

pub fn parse_system(text: &str) -> Result<LinearDelaySystem> {
    let spec: SystemSpec = serde_json::from_str(text)?;
    spec.to_system()
}

pub fn load_system(path: &Path) -> Result<LinearDelaySystem> {
    parse_system(&std::fs::read_to_string(path)?)
}

pub fn system_to_json(system: &LinearDelaySystem) -> String {
    serde_json::to_string_pretty(&SystemSpec::from_system(system)).expect("plain data serializes")
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub gap: f64,
    pub c1: f64,
    pub c2: f64,
    pub tau: Vec<TauSample>,
    pub bounds: CorollaryBounds,
}

impl CertificateReport {
    pub fn new(cert: &ContractionCertificate, bounds: CorollaryBounds) -> Self {
        Self {
            lambda: cert.lambda,
            mu: cert.mu,
            gamma: cert.gamma,
            gap: cert.gap,
            c1: cert.c1,
            c2: cert.c2,
            tau: cert.weight.grid.clone(),
            bounds,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeDump {
    pub s: f64,
    pub quad_weight: f64,
    pub gram: f64,
    pub panel: usize,
}

/// Dissipativity report with the nodes and Gram weights used.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    #[serde(flatten)]
    pub report: DissipativityReport,
    pub pass: bool,
    pub panels: Vec<(f64, f64)>,
    pub nodes: Vec<NodeDump>,
}

impl CheckReport {
    pub fn new(
        report: DissipativityReport,
        disc: &GeneratorDiscretization,
        cert: &ContractionCertificate,
    ) -> Self {
        let gram = weighted_gram(disc, cert);
        let nodes = (0..disc.node_count())
            .map(|j| NodeDump {
                s: disc.node_locations[j],
                quad_weight: disc.quad_weights[j],
                gram: gram[disc.index(j, 0)],
                panel: disc.panel_map[j],
            })
            .collect();
        Self {
            pass: report.passes(),
            report,
            panels: disc.panels.clone(),
            nodes,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

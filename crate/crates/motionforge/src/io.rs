//! File formats: system JSON, rigidity-report JSON, trajectory JSON/CSV, and
//! the seeded random plane projection of trajectories.
//!
//! Vertex indices are 1-based in every file format and 0-based in memory.
//! All writers are deterministic: identical inputs (including seeds) yield
//! byte-identical output.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constraint::{
    distance_constraint, planarity_constraint, unit_norm_constraint, volume2d_constraint,
    ConstraintKind, ConstraintSystem, QuadraticConstraint, TrivialKind,
};
use crate::error::{Error, Result};
use crate::rigidity::{RigidityReport, SecondOrderStatus, SecondOrderVerdict};
use crate::tracking::{DeformationPath, EventKind};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintJson {
    Distance {
        vertices: [usize; 2],
        target: f64,
    },
    Planarity {
        face: usize,
        vertices: [usize; 2],
    },
    UnitNorm {
        vertex: usize,
    },
    Volume2d {
        vertices: [usize; 3],
        target: f64,
    },
    Generic {
        quad: Vec<Vec<f64>>,
        linear: Vec<f64>,
        constant: f64,
    },
}

fn default_trivial_kind() -> String {
    "euclidean".into()
}

/// On-disk form of a constraint system. Pin rows are not listed; they are
/// regenerated from `pinned` and the realization on load.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemJson {
    pub dim: usize,
    pub vertices: usize,
    /// Blocks beyond this count are facet normals, not points. Defaults to
    /// `vertices`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_vertices: Option<usize>,
    #[serde(default = "default_trivial_kind")]
    pub trivial_kind: String,
    pub realization: Vec<f64>,
    pub pinned: Vec<usize>,
    pub constraints: Vec<ConstraintJson>,
}

pub fn system_to_json(system: &ConstraintSystem) -> SystemJson {
    let mut constraints = Vec::new();
    for c in &system.constraints {
        match c.kind {
            ConstraintKind::Pin => {}
            ConstraintKind::Distance => constraints.push(ConstraintJson::Distance {
                vertices: [c.refs[0] + 1, c.refs[1] + 1],
                target: c.target,
            }),
            ConstraintKind::Planarity => constraints.push(ConstraintJson::Planarity {
                face: c.refs[0] + 1,
                vertices: [c.refs[1] + 1, c.refs[2] + 1],
            }),
            ConstraintKind::UnitNorm => constraints.push(ConstraintJson::UnitNorm {
                vertex: c.refs[0] + 1,
            }),
            ConstraintKind::Volume2D => constraints.push(ConstraintJson::Volume2d {
                vertices: [c.refs[0] + 1, c.refs[1] + 1, c.refs[2] + 1],
                target: c.target,
            }),
            ConstraintKind::Generic => {
                let n = c.quad.nrows();
                constraints.push(ConstraintJson::Generic {
                    quad: (0..n)
                        .map(|i| (0..n).map(|j| c.quad[(i, j)]).collect())
                        .collect(),
                    linear: c.lin.iter().cloned().collect(),
                    constant: c.const_term,
                });
            }
        }
    }
    SystemJson {
        dim: system.dim,
        vertices: system.n_vertices,
        point_vertices: if system.point_vertices == system.n_vertices {
            None
        } else {
            Some(system.point_vertices)
        },
        trivial_kind: match system.trivial_kind {
            TrivialKind::Euclidean => "euclidean",
            TrivialKind::VolumePreserving => "volume_preserving",
            TrivialKind::PinsOnly => "pins_only",
        }
        .into(),
        realization: system.realization.iter().cloned().collect(),
        pinned: system.pinned.iter().map(|&v| v + 1).collect(),
        constraints,
    }
}

fn check_vertex(v1: usize, n: usize, what: &str) -> Result<usize> {
    if v1 == 0 || v1 > n {
        return Err(Error::InvalidSystem(format!(
            "{what} index {v1} out of range 1..={n}"
        )));
    }
    Ok(v1 - 1)
}

pub fn system_from_json(json: &SystemJson) -> Result<ConstraintSystem> {
    let d = json.dim;
    let n = json.vertices;
    if d == 0 || n == 0 {
        return Err(Error::InvalidSystem("dim and vertices must be positive".into()));
    }
    if json.realization.len() != d * n {
        return Err(Error::InvalidSystem(format!(
            "realization has {} entries, expected dim*vertices = {}",
            json.realization.len(),
            d * n
        )));
    }
    let trivial_kind = match json.trivial_kind.as_str() {
        "euclidean" => TrivialKind::Euclidean,
        "volume_preserving" => TrivialKind::VolumePreserving,
        "pins_only" => TrivialKind::PinsOnly,
        other => {
            return Err(Error::InvalidSystem(format!(
                "unknown trivial_kind `{other}` (expected euclidean, volume_preserving, or pins_only)"
            )));
        }
    };
    let point_vertices = json.point_vertices.unwrap_or(n);
    if point_vertices > n {
        return Err(Error::InvalidSystem(format!(
            "point_vertices {point_vertices} exceeds vertices {n}"
        )));
    }
    let mut constraints = Vec::with_capacity(json.constraints.len());
    for c in &json.constraints {
        constraints.push(match c {
            ConstraintJson::Distance { vertices, target } => distance_constraint(
                d,
                n,
                check_vertex(vertices[0], n, "distance vertex")?,
                check_vertex(vertices[1], n, "distance vertex")?,
                *target,
            )?,
            ConstraintJson::Planarity { face, vertices } => planarity_constraint(
                d,
                n,
                check_vertex(*face, n, "planarity face")?,
                check_vertex(vertices[0], n, "planarity vertex")?,
                check_vertex(vertices[1], n, "planarity vertex")?,
            )?,
            ConstraintJson::UnitNorm { vertex } => {
                unit_norm_constraint(d, n, check_vertex(*vertex, n, "unit_norm vertex")?)
            }
            ConstraintJson::Volume2d { vertices, target } => {
                if d != 2 {
                    return Err(Error::InvalidSystem(
                        "volume2d constraints require dim = 2".into(),
                    ));
                }
                volume2d_constraint(
                    n,
                    check_vertex(vertices[0], n, "volume2d vertex")?,
                    check_vertex(vertices[1], n, "volume2d vertex")?,
                    check_vertex(vertices[2], n, "volume2d vertex")?,
                    *target,
                )?
            }
            ConstraintJson::Generic {
                quad,
                linear,
                constant,
            } => {
                let nn = d * n;
                if quad.len() != nn || quad.iter().any(|row| row.len() != nn) || linear.len() != nn
                {
                    return Err(Error::InvalidSystem(format!(
                        "generic constraint matrices must be {nn}x{nn} and {nn}"
                    )));
                }
                QuadraticConstraint::new(
                    DMatrix::from_fn(nn, nn, |i, j| quad[i][j]),
                    DVector::from_column_slice(linear),
                    *constant,
                    ConstraintKind::Generic,
                )?
            }
        });
    }
    let mut pinned = Vec::with_capacity(json.pinned.len());
    for &v1 in &json.pinned {
        pinned.push(check_vertex(v1, n, "pinned vertex")?);
    }
    let realization = DVector::from_column_slice(&json.realization);
    Ok(
        ConstraintSystem::new(d, n, realization, constraints, pinned, trivial_kind)?
            .with_point_vertices(point_vertices),
    )
}

pub fn load_system(path: &Path) -> Result<ConstraintSystem> {
    let text = fs::read_to_string(path)?;
    let json: SystemJson = serde_json::from_str(&text)?;
    system_from_json(&json)
}

pub fn save_system(path: &Path, system: &ConstraintSystem) -> Result<()> {
    write_pretty(path, &system_to_json(system))
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

fn matrix_to_json(m: &DMatrix<f64>) -> MatrixJson {
    let mut data = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            data.push(m[(i, j)]);
        }
    }
    MatrixJson {
        rows: m.nrows(),
        cols: m.ncols(),
        data,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondOrderJson {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_flex: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportJson {
    pub rank: usize,
    pub flex_dim: usize,
    pub trivial_dim: usize,
    pub nontrivial_dim: usize,
    pub stress_dim: usize,
    pub inf_rigid: bool,
    pub rank_tol: f64,
    pub flex_basis: MatrixJson,
    pub trivial_basis: MatrixJson,
    pub nontrivial_flex_basis: MatrixJson,
    pub stress_basis: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_order: Option<SecondOrderJson>,
}

pub fn report_to_json(
    report: &RigidityReport,
    second_order: Option<&SecondOrderVerdict>,
) -> ReportJson {
    ReportJson {
        rank: report.rank,
        flex_dim: report.flex_dim(),
        trivial_dim: report.trivial_dim(),
        nontrivial_dim: report.nontrivial_dim(),
        stress_dim: report.stress_dim(),
        inf_rigid: report.inf_rigid,
        rank_tol: report.rank_tol,
        flex_basis: matrix_to_json(&report.flex_basis),
        trivial_basis: matrix_to_json(&report.trivial_basis),
        nontrivial_flex_basis: matrix_to_json(&report.nontrivial_flex_basis),
        stress_basis: matrix_to_json(&report.stress_basis),
        second_order: second_order.map(|v| SecondOrderJson {
            status: match v.status {
                SecondOrderStatus::SecondOrderRigid => "second_order_rigid",
                SecondOrderStatus::FlexibleWitness => "flexible_witness",
                SecondOrderStatus::Unknown => "unknown",
            }
            .into(),
            witness_flex: v.witness_flex.as_ref().map(|w| w.iter().cloned().collect()),
        }),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EventJson {
    /// Frame index the event produced.
    pub step: usize,
    pub kind: String,
    /// 1-based vertex pair, sticky contacts only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryJson {
    /// Echo of the input system.
    pub system: SystemJson,
    pub frames: Vec<Vec<f64>>,
    pub step_sizes: Vec<f64>,
    pub events: Vec<EventJson>,
    pub residuals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub fn trajectory_to_json(system: &ConstraintSystem, path: &DeformationPath) -> TrajectoryJson {
    TrajectoryJson {
        system: system_to_json(system),
        frames: path
            .realizations
            .iter()
            .map(|x| x.iter().cloned().collect())
            .collect(),
        step_sizes: path.step_sizes.clone(),
        events: path
            .events
            .iter()
            .map(|e| match &e.kind {
                EventKind::RankDrop => EventJson {
                    step: e.step,
                    kind: "rank_drop".into(),
                    pair: None,
                },
                EventKind::QuadraticEscape => EventJson {
                    step: e.step,
                    kind: "quadratic_escape".into(),
                    pair: None,
                },
                EventKind::CuspFallback => EventJson {
                    step: e.step,
                    kind: "cusp_fallback".into(),
                    pair: None,
                },
                EventKind::StickyContact { pair } => EventJson {
                    step: e.step,
                    kind: "sticky_contact".into(),
                    pair: Some([pair.0 + 1, pair.1 + 1]),
                },
            })
            .collect(),
        residuals: path.residual_log.clone(),
        failure: path.failure.clone(),
    }
}

pub fn save_trajectory(path: &Path, traj: &TrajectoryJson) -> Result<()> {
    write_pretty(path, traj)
}

pub fn load_trajectory(path: &Path) -> Result<TrajectoryJson> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn frame_has_event(events: &[EventJson], frame: usize) -> bool {
    events.iter().any(|e| e.step == frame)
}

/// One row per frame: the flattened coordinates x_1_1 .. x_n_d, the residual,
/// and a 0/1 event flag.
pub fn trajectory_csv(traj: &TrajectoryJson) -> String {
    let d = traj.system.dim;
    let n = traj.system.vertices;
    let mut out = String::new();
    for j in 1..=n {
        for c in 1..=d {
            out.push_str(&format!("x_{j}_{c},"));
        }
    }
    out.push_str("residual,event\n");
    for (fi, frame) in traj.frames.iter().enumerate() {
        for v in frame {
            out.push_str(&format!("{v},"));
        }
        let residual = traj.residuals.get(fi).cloned().unwrap_or(f64::NAN);
        let flag = u8::from(frame_has_event(&traj.events, fi));
        out.push_str(&format!("{residual},{flag}\n"));
    }
    out
}

/// Orthogonal 2 x n projection: thin QR of a seeded n x 2 Gaussian matrix,
/// transposed. Rows are orthonormal to machine precision.
pub fn random_projection(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss: DMatrix<f64> =
        DMatrix::from_fn(n, 2, |_, _| StandardNormal.sample(&mut rng));
    let qr = gauss.qr();
    qr.q().transpose()
}

/// One row per frame: the two projected coordinates and a 0/1 event flag.
pub fn projection_csv(traj: &TrajectoryJson, seed: u64) -> Result<String> {
    let first = traj
        .frames
        .first()
        .ok_or_else(|| Error::InvalidSystem("trajectory has no frames".into()))?;
    let proj = random_projection(first.len(), seed);
    let mut out = String::from("u,v,event\n");
    for (fi, frame) in traj.frames.iter().enumerate() {
        if frame.len() != first.len() {
            return Err(Error::InvalidSystem(format!(
                "frame {fi} has {} coordinates, expected {}",
                frame.len(),
                first.len()
            )));
        }
        let x = DVector::from_column_slice(frame);
        let p = &proj * x;
        let flag = u8::from(frame_has_event(&traj.events, fi));
        out.push_str(&format!("{},{},{flag}\n", p[0], p[1]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn builtin_systems_round_trip_field_identically() {
        for name in catalog::BUILTIN_NAMES {
            let sys = catalog::builtin(name).unwrap();
            let json = system_to_json(&sys);
            let text = serde_json::to_string(&json).unwrap();
            let parsed: SystemJson = serde_json::from_str(&text).unwrap();
            let reloaded = system_from_json(&parsed).unwrap();
            assert_eq!(sys, reloaded, "{name}");
            // And the re-serialized form is byte-identical.
            assert_eq!(
                text,
                serde_json::to_string(&system_to_json(&reloaded)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn generic_constraint_round_trips() {
        let n = 4;
        let quad = DMatrix::from_fn(n, n, |i, j| (i + 2 * j) as f64 / 7.0);
        let lin = DVector::from_fn(n, |i, _| i as f64 - 1.5);
        let sys = ConstraintSystem::new(
            2,
            2,
            DVector::from_column_slice(&[1.0, 0.0, 0.0, 1.0]),
            vec![QuadraticConstraint::new(
                quad.clone(),
                lin.clone(),
                {
                    // Pick the constant so the given realization is feasible.
                    let x = DVector::from_column_slice(&[1.0, 0.0, 0.0, 1.0]);
                    let q = (&quad + quad.transpose()) * 0.5;
                    -(x.dot(&(&q * &x)) + lin.dot(&x))
                },
                ConstraintKind::Generic,
            )
            .unwrap()],
            vec![],
            TrivialKind::Euclidean,
        )
        .unwrap();
        let reloaded = system_from_json(&system_to_json(&sys)).unwrap();
        assert_eq!(sys, reloaded);
    }

    #[test]
    fn bad_vertex_index_is_rejected() {
        let sys = catalog::builtin("four_bar").unwrap();
        let mut json = system_to_json(&sys);
        if let ConstraintJson::Distance { vertices, .. } = &mut json.constraints[0] {
            vertices[0] = 9;
        }
        assert!(system_from_json(&json).is_err());
    }

    #[test]
    fn zero_based_index_is_rejected() {
        let sys = catalog::builtin("four_bar").unwrap();
        let mut json = system_to_json(&sys);
        json.pinned[0] = 0;
        assert!(system_from_json(&json).is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let sys = catalog::builtin("four_bar").unwrap();
        let path = crate::tracking::DeformationPath {
            realizations: vec![sys.realization.clone(); 2],
            tangents: vec![DVector::zeros(8); 2],
            step_sizes: vec![0.1],
            curve_lengths: vec![0.1],
            events: vec![],
            residual_log: vec![0.0, 0.0],
            failure: None,
        };
        let csv = trajectory_csv(&trajectory_to_json(&sys, &path));
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "x_1_1,x_1_2,x_2_1,x_2_2,x_3_1,x_3_2,x_4_1,x_4_2,residual,event"
        );
        assert_eq!(lines.next().unwrap(), "0,0,1,0,0,1,1,1,0,0");
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn projection_rows_are_orthonormal() {
        for seed in 0..5u64 {
            let p = random_projection(22, seed);
            let gram = &p * p.transpose();
            assert!((gram[(0, 0)] - 1.0).abs() <= 1e-12);
            assert!((gram[(1, 1)] - 1.0).abs() <= 1e-12);
            assert!(gram[(0, 1)].abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_is_seed_deterministic() {
        let a = random_projection(10, 3);
        let b = random_projection(10, 3);
        assert_eq!(a, b);
        let c = random_projection(10, 4);
        assert!(a != c);
    }

    #[test]
    fn projection_of_empty_trajectory_is_an_error() {
        let sys = catalog::builtin("four_bar").unwrap();
        let traj = TrajectoryJson {
            system: system_to_json(&sys),
            frames: vec![],
            step_sizes: vec![],
            events: vec![],
            residuals: vec![],
            failure: None,
        };
        assert!(projection_csv(&traj, 0).is_err());
    }

    #[test]
    fn event_frames_are_flagged() {
        let sys = catalog::builtin("four_bar").unwrap();
        let traj = TrajectoryJson {
            system: system_to_json(&sys),
            frames: vec![vec![0.0; 8]; 3],
            step_sizes: vec![],
            events: vec![EventJson {
                step: 1,
                kind: "rank_drop".into(),
                pair: None,
            }],
            residuals: vec![0.0; 3],
            failure: None,
        };
        let csv = projection_csv(&traj, 0).unwrap();
        let flags: Vec<&str> = csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap())
            .collect();
        assert_eq!(flags, vec!["0", "1", "0"]);
    }
}

//! Quadratic geometric constraint systems: rigidity analysis, retraction onto
//! the constraint variety, and deformation-path tracking.
//!
//! A system is a list of quadratic equations g_i(x) = x^T A_i x + b_i^T x + c_i
//! in the stacked coordinates of n vertices in R^d, together with a feasible
//! realization. [`rigidity`] classifies infinitesimal flexes and stresses at a
//! point, [`retraction`] pulls perturbed points back onto the variety by a
//! Lagrange homotopy, and [`tracking`] chains retractions into discrete
//! deformation paths, stepping through rank-drop singularities. [`catalog`]
//! holds the constructors for the supported system classes and the named
//! examples used throughout the tests.

pub mod catalog;
pub mod constraint;
pub mod error;
pub mod flex;
pub mod io;
pub mod linalg;
pub mod newton;
pub mod retraction;
pub mod rigidity;
pub mod svg;
pub mod tracking;

pub use constraint::{ConstraintKind, ConstraintSystem, QuadraticConstraint, TrivialKind};
pub use error::{Error, Result};
pub use rigidity::{analyze, analyze_at, RigidityReport, SecondOrderStatus};
pub use retraction::TrackerConfig;
pub use tracking::{track_path, DeformationPath, EventKind, PathEvent};

//! Shared numerical plumbing.

pub(crate) mod dop853;
pub mod diff;
pub mod grid;
pub mod ode;
pub mod product;
pub mod quad;
pub mod roots;
pub mod shooting;
pub mod spline;

pub use diff::{differentiate_smooth, DiffMethod};
pub use ode::{integrate_system, integrate_third_order, OdeTolerance, SystemTrajectory, Trajectory};
pub use product::{truncated_product, ProductValue};
pub use quad::{gauss_legendre, quad_adaptive, quad_principal_value, CompositeRule};
pub use roots::{find_bracketed_root, scan_brackets};
pub use spline::CubicSpline;
pub use grid::PanelGrid;
pub use shooting::{null_solution, BoundaryRows, NullSolution};

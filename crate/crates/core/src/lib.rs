//! LiDAR odometry on dual quaternions.
//!
//! Poses, points, lines, planes and triangle-descriptor frames are all
//! handled as (unit) dual quaternions. Quaternions are stored `(w, x, y, z)`
//! with the Hamilton product.

pub mod cloud;
pub mod descriptor;
pub mod dq;
pub mod eval;
pub mod exec;
pub mod features;
pub mod io;
pub mod kdtree;
pub mod manifold;
pub mod map;
pub mod pipeline;
pub mod residuals;
pub mod run;
pub mod solver;
pub mod synth;

pub use dq::{DualQuaternion, Quaternion, RigidTransform, UnitDualQuaternion, Vec3};
pub use manifold::{boxminus, boxplus, dq_exp, dq_log, TangentVector};

//! Geometry of finite-dimensional `l^p`: norms, the normalized duality map
//! `U: B -> B*`, one-sided moduli of convexity and smoothness, and the
//! functional `V(Ux, y)` that replaces `|x - y|^2 / 2` outside Hilbert space.

pub mod fuzz;
pub mod lyapunov;
pub mod moduli;
pub mod space;

pub use fuzz::{geometry_fuzz, random_in_ball, CheckSummary, FuzzReport};
pub use lyapunov::{GeometryConstants, InequalityRecord, L_DEFAULT};
pub use moduli::{invert_increasing, invert_unbounded};
pub use space::{pairing, DualPair, LpSpace};

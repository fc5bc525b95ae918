//! Space-time paths: the data type, the validity predicates and the two
//! backward constructions.

pub mod construct;
pub mod path;
pub mod trajectory;
pub mod validate;

pub use construct::{
    construct_decreasing_stp, construct_impatient_stp, impatient_modify, simplify, Construction, StpError,
    StpOutcome,
};
pub use path::{Adjacency, MoveKind, SpaceTimePath, TimeEdge};
pub use trajectory::{Process, StateHistory, Trajectory};
pub use validate::{
    is_closed_in, is_impatient, is_simple, is_x_closed_moving, validate_impatient_path, validate_pivotal_path,
    Verdict,
};

//! Computation DAGs of recursive bilinear matrix multiplication: construction,
//! edge expansion, two-level memory simulation, closed-form communication
//! bounds and an executable multiplier whose traces match the constructed graphs.

pub mod bounds;
pub mod cdag;
pub mod expansion;
pub mod iosim;
pub mod mm;
pub mod scheme;

pub use cdag::{Cdag, Part, VertexKind};
pub use scheme::{BilinearScheme, SchemeReport};

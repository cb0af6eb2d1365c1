//! Heat-conduction topology optimization on a 2D cell grid.

pub mod banded;
pub mod continuation;
pub mod filter;
pub mod grid;
pub mod heat;
pub mod material;
pub mod model;
pub mod overhang;

pub use continuation::{cycle_csv, field_dump, run_continuation, ContinuationResult, CycleRecord, DemoConfig};
pub use grid::Grid;
pub use material::MaterialModel;
pub use model::{topo_problem, FieldTriple, TopoLimits, TopoModel};
pub use overhang::OverhangModel;

//! Seeded region growing on 2D images and 3D volumes.
//!
//! Two growth engines share one label-map model: the classic best-first
//! engine grows every region by the globally most similar frontier site,
//! and the stack engine floods each seed with a pluggable homogeneity
//! criterion (plain intensity, or the gradient-based `Gn`/`Gm` costs).

pub mod criterion;
pub mod error;
pub mod gradient;
pub mod grid;
pub mod grow;
pub mod io;
pub mod phantom;
pub mod properties;

pub use criterion::{
    admit, cost_gm, cost_gn, AdmissionContext, CriterionConfig, DEFAULT_K, DEFAULT_TM,
};
pub use error::{Axis, Error, Result};
pub use gradient::{
    compute_gradient, compute_gradient_with, magnitude_at, GradientField, GradientOperator,
};
pub use grid::{neighbors, site_index, GridDims, NeighborIter, Neighborhood, ScalarGrid, Site};
pub use grow::{
    grow, grow_classic, grow_stack, Engine, FrontierEntry, GrowReport, LabelMap, RegionId,
    RegionStats, RegionSummary, SeedSet, Termination,
};
pub use phantom::{generate_phantom, DiskLayout, PhantomKind, PhantomSpec};
pub use properties::{
    check_properties, Counterexample, PropertyReport, RegionPredicate, MAX_COUNTEREXAMPLES,
};

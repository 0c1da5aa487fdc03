//! Traffic models of linear PETC loops.

pub mod backend;
pub mod model;
pub mod region;

pub use backend::{region_nonempty, Backend, EmptinessCertificate, RegionStatus};
pub use model::{
    build_traffic_model, compute_regions, compute_transitions, AbstractionOptions, RegionSet,
    TrafficModel, Transition,
};
pub use region::{inter_sample_k, region_membership, region_of, RegionLabel};

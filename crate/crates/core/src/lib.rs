//! Brain-network-inspired Network-on-Chip synthesis and evaluation.
//!
//! Numeric kernels are generic over [`num::Scalar`] (`f32` or `f64`). The
//! root aliases fix the scalar to `f64`; the `*F32` aliases fix it to `f32`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Symmetric and pairwise tables read better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod community;
pub mod error;
pub mod grid;
pub mod io;
pub mod mapping;
pub mod num;
mod par;
pub mod powermodel;
pub mod routing;
pub mod simulator;
pub mod topogen;

pub use error::{Error, Result};
pub use grid::Topology;
pub use routing::TurnSet;

macro_rules! aliases {
    ($($name:ident / $name32:ident => $($seg:ident)::+;)*) => {
        $(
            pub type $name = $($seg)::+<f64>;
            pub type $name32 = $($seg)::+<f32>;
        )*
    };
}

aliases! {
    GrowthParams / GrowthParamsF32 => topogen::GrowthParams;
    SweepConfig / SweepConfigF32 => topogen::SweepConfig;
    SweepResult / SweepResultF32 => topogen::SweepResult;
    PowerParams / PowerParamsF32 => powermodel::PowerParams;
    PowerReport / PowerReportF32 => powermodel::PowerReport;
    TopologyMetrics / TopologyMetricsF32 => grid::TopologyMetrics;
    CommunityPartition / CommunityPartitionF32 => community::CommunityPartition;
    HubSet / HubSetF32 => community::HubSet;
    Flow / FlowF32 => mapping::Flow;
    TaskGraph / TaskGraphF32 => mapping::TaskGraph;
    MappingCostParams / MappingCostParamsF32 => mapping::MappingCostParams;
    MappingSolution / MappingSolutionF32 => mapping::MappingSolution;
    RoutingParams / RoutingParamsF32 => routing::RoutingParams;
    RoutingSolution / RoutingSolutionF32 => routing::RoutingSolution;
    TrafficSpec / TrafficSpecF32 => simulator::TrafficSpec;
    SimReport / SimReportF32 => simulator::SimReport;
}

/// Routing instance over a borrowed topology.
pub type RoutingProblem<'a> = routing::RoutingProblem<'a, f64>;
pub type RoutingProblemF32<'a> = routing::RoutingProblem<'a, f32>;

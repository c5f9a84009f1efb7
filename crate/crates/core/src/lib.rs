//! netjam-core: packet traffic on growing complex networks.
//!
//! Networks grow between the scale-free (p=0) and random-growth (p=1) limits;
//! every node creates packets at rate λk_i and forwards 1+β_ik_i per step
//! along shortest paths with queue-aware tie-breaking. The toolkit locates
//! the congestion boundary β_c(λ) from the growth of the mean backlog and
//! compares it with the calibrated line β_c = hλ/α₁ − 1/k_max, for β assigned
//! network-wide ("normal") or only to the highest-degree hubs ("efficient").
//!
//! Modules: [`netgen`] (growth + structure), [`routing`] (all-pairs hops,
//! next-hop choice), [`traffic`] (synchronous dynamics), [`analysis`]
//! (profiles, slopes, β_c search), [`theory`] (the analytic line and its
//! calibration), [`ensemble`] (seed discipline and parallel realizations).

pub mod analysis;
pub mod ensemble;
pub mod netgen;
pub mod routing;
mod stats;
pub mod theory;
pub mod traffic;

pub use analysis::{
    beta_c_curve, degree_profile, find_beta_c, fit_curve_slope, growth_slope, AnalysisError,
    DegreeProfile, PhaseResult, ProfileBin, SearchParams, SlopeEstimate, SnapshotSample,
};
pub use ensemble::{
    build_ensemble, collect_snapshots, derive_seed, mean_series, snapshot_over, structural_stats,
    EnsembleError, GraphInstance, GraphShape, MeanSeries, StructuralStats, STREAM_GRAPH,
    STREAM_POINT, STREAM_TRAFFIC,
};
pub use netgen::{
    degree_histogram, generate_network, mean_path_length, DegreeHistogram, Graph, GrowthConfig,
    NetgenError,
};
pub use routing::{
    compute_distances, next_hop_candidates, select_next_hop, DistanceMatrix, RoutingError,
};
pub use stats::LinearFit;
pub use theory::{
    balance_check, beta_c_predicted, calibrate_alpha1, gamma_of_p, kmax_estimate, lambda_min,
    BalanceReport, Calibration, TheoryError, TheoryParams, TheoryReport, TheoryRow,
};
pub use traffic::{
    creation_count, delivery_quota, run, Approach, HubSelection, Packet, PlanSpec, RatePlan,
    RunOptions, Sim, Snapshot, TimeSeries, TrafficError, TrafficTemplate,
};

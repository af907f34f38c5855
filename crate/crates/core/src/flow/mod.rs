//! Mean curvature flow of geodesic spheres, reduced to the radius ODE.

mod checks;
mod model;
pub mod ode;
mod trajectory;

pub use checks::{
    evolution_check, invariance_run, minimal_sphere_check, nonconvex_witness, pinched_grid,
    pinching_invariance_run, shadow_checks, summarize, Comparison, EvolutionQuantity,
    EvolutionReport, ExtinctionBounds, InvarianceReport, InvarianceRun, MinimalSphereReport,
    ShadowReport, MATCH_TOL, ORDER_BAND, ROUNDNESS_TOL, SHADOW_TOL, VOLUME_TOL,
};
pub use model::{
    bisect, focal_radius, minimal_radius, minimal_radius_closed_form, multiplicities,
    negative_intervals, pinch_q_generic, pinch_range, pinch_range_generic, pinch_test_closed_form,
    sphere_point_data, PinchRange, SphereModel, SphereRates, SphereScalars, RANGE_GRID, ROOT_TOL,
};
pub use trajectory::{
    integrate, read_trajectory_csv, FlowSample, StepPolicy, Termination, Trajectory,
    STATIONARY_TOL, TRAJECTORY_CSV_HEADER,
};

//! Lagrangian representation-formula machinery for the stagnation-point
//! form of the 2D Euler equations on [0, 1]:
//!
//! u_xt + u u_xx - u_x^2 = -2 int_0^1 u_x^2 dx
//!
//! under periodic or Dirichlet boundary conditions. The crate evaluates
//! u_x along particle trajectories from closed-form kernel integrals,
//! builds the internal-time map eta(t), classifies initial data into
//! finite-time-blowup versus global regimes, verifies the predicted
//! asymptotic rates, and cross-validates against a direct PDE solver.

pub mod classifier;
pub mod error;
pub mod initial_data;
pub mod lagrangian;
pub mod pde;
pub mod quadrature;
pub mod special;
pub mod time_map;

pub use classifier::{
    classify, verify_rates, Governing, Outcome, RateFit, RateReport, RegularityVerdict,
};
pub use error::{Error, Result};
pub use initial_data::{
    critical_profile, minimizer_labels, BoundaryCondition, CriticalProfile, DatumForm,
    InitialDatum, Maximizer, MaximizerKind,
};
pub use quadrature::{
    asymptotic_rates, jacobian, kbar, kernel_value, KernelValue, RateModel,
};
pub use lagrangian::{
    eulerian_slice, eulerian_values, extrema, flow_map, nonlocal_term, sample, ux_along,
    uxx_along, uxxx_along, FieldSlice, LagrangianSample, SliceEval,
};
pub use pde::{compare, evolve_direct, ComparisonReport, DirectSolution, EvolveStatus};
pub use special::{beta_integral, gamma, lgamma};
pub use time_map::{blowup_time, build_map, EtaPoint, EtaTimeMap, MapSample};

//! Fluctuation functionals, conservation ledgers, inequality monitors, and
//! decay-rate fits over simulation traces.

pub mod checks;
pub mod fits;
pub mod functionals;
pub mod trace;

pub use checks::{
    check_conservation, check_growth_bound, check_monotone_fluctuations,
    check_pointwise_contraction, check_riccati, check_seminorm_budget, check_theorem_envelope,
    check_umax_monotone, BoundReport, CheckError, CheckRecord, ConservationTols, RiccatiForm,
};
pub use fits::{fit_decay_exponent, fit_points, FitError, FitModel, FitResult, FitSeries};
pub use functionals::{
    comp_sum, comp_sum_parts, diameter_agents, energy_fluctuations_agents,
    energy_fluctuations_hydro, fractional_seminorm, holder_quotient, mean_velocity, scaled_mass,
    support_width, uniform_fluctuation_agents, uniform_fluctuation_hydro, FunctionalError,
};
pub use trace::{DiagnosticsTrace, Sample, TraceError, TraceMeta};

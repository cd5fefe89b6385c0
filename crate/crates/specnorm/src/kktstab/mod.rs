//! KKT systems of spectral-norm regularized programs: residual map, solver, certificate
//! checkers, stability reports and a planted-instance generator.

pub mod checks;
pub mod generate;
pub mod instance;
pub mod report;
pub mod solver;

pub use checks::{
    check_condition, check_rcq, check_sosc_dual, check_sosc_primal, check_srcq_dual, check_srcq_primal,
    check_ssrcq, check_wsosc, recheck_witness, witness_delta, CheckContext, Condition, Evidence, Status, KKT_TOL,
    Verdict, Witness, WitnessCheck,
};
pub use generate::{generate_certified, Plant, SeedSpec};
pub use instance::{
    kkt_dirderiv, kkt_residual, proj_dirderiv_polyhedral, HQuadratic, KktPoint, Linearization, ProblemInstance,
    Triple,
};
pub use report::{
    default_radii, f_prime_kernel_search, perturbation_experiment, stability_report, FPrimeSearch, KappaRow,
    KappaTable, ReportOptions, StabilityReport, Statement, F_PRIME_ZERO,
};
pub use solver::{newton, solve, solve_from, solve_perturbed, SolveOptions, SolveReport};

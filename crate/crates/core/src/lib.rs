//! Pair correlation between zeros and Chern-connection critical points of
//! Gaussian analytic functions: exact Bargmann-Fock evaluation, Monte Carlo
//! simulation of random analytic functions and SU(2) polynomials, and the
//! estimators that tie the two together.

pub mod correlator;
pub mod covariance;
pub mod critical;
pub mod estimator;
pub mod gafsim;
pub mod numerics;
pub mod poly;
pub mod projective;
pub mod quadrature;
pub mod rng;

//! Certified verification engine for the maximal sum of pairwise distances of
//! four points on the closed unit hemisphere.
//!
//! Two exact stages establish the bound 4 + 4*sqrt2:
//!
//! * [`local`] mechanizes the symbolic analysis around the optimal square
//!   configuration: a polynomial majorization of the six distances whose
//!   nonpositivity on a parameter box is reduced, exactly in Q(sqrt2), to the
//!   negative semidefiniteness of a 3x3 matrix.
//! * [`search`] covers the rest of the feasible set with grid cubes and
//!   eliminates every cube by certified interval tests, subdividing
//!   breadth-first and refining depth-first.
//!
//! [`exact`] supplies the arithmetic substrate (big rationals, Q(sqrt2),
//! certified square-root bounds), [`geometry`] the feasible set and its grid,
//! [`oracle`] independent floating-point cross-checks, and [`cert`] the
//! machine-checkable certificate formats and the comparison report.

pub mod cert;
pub mod exact;
pub mod geometry;
pub mod local;
pub mod oracle;
pub mod poly;
pub mod search;

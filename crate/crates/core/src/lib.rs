//! Robust mixed-integer linear optimization under ellipsoidal coefficient
//! uncertainty.
//!
//! The centerpiece is a cutting-plane decomposition: a master MILP over the
//! nominal rows plus accumulated tangent-hyperplane cuts alternates with
//! closed-form worst-case subproblems until every conic constraint
//! `aᵀx + β√(xᵀΣx) ≤ b` holds. Around it sit a self-contained MILP engine,
//! a first-order reliability layer (violation probabilities for a solved
//! design), a budget-of-uncertainty baseline reformulation, and generators
//! for two benchmark families.

pub mod budget;
pub mod cuts;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod model;
pub mod milp;
pub mod reliability;

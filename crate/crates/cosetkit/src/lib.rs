//! Coset incidence systems over finitely presented groups.

pub mod abelian;
pub mod canonical;
pub mod constructions;
pub mod finite;
pub mod fixtures;
pub mod presentation;
pub mod structured;
pub mod gog;
pub mod incidence;
pub mod io;
pub mod report;

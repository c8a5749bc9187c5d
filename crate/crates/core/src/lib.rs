pub mod analysis;
pub mod coupled_solver;
pub mod fem_core;
pub mod geometry;
pub mod rigid_body;

pub mod adjoint;
pub mod dirichlet;
pub mod eigen;
pub mod error;
pub mod expr;
pub mod mesh;
pub mod operator;
pub mod resonance;
pub mod sparse;

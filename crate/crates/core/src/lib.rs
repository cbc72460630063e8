pub mod ade;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod smoothing;
pub mod step_control;
pub mod optimizers;
pub mod planning;
pub mod io;
pub mod evaluation;

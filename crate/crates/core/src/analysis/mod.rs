//! Fitting, distribution-shape classification and the classical reference map.

mod classical;
mod fit;
pub mod lm;
mod shape;

pub use classical::{classical_diffusion, ClassicalTrace};
pub use fit::{fit_energy_curve, FitOptions, FitResult};
pub use shape::{classify_distribution, Shape, ShapeVerdict, SHAPE_MARGIN};

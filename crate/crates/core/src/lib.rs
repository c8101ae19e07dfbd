pub mod dispersion;
pub mod dps;
pub mod error;
pub mod geometry;
pub mod io;
pub mod optimize;
pub mod par;
pub mod rfcore;
pub mod sensitivity;
pub mod soilcal;

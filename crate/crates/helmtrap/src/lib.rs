pub mod cli;
pub mod geometry;
pub mod layer_ops;
pub mod morawetz;
pub mod quadrature;
pub mod quasimode;
pub mod scattering;
pub mod spectra;
pub mod special_functions;

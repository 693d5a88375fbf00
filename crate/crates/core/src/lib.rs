pub mod chern_calculus;
pub mod cli;
pub mod energy;
pub mod flow_engine;
pub mod form_algebra;
pub mod surface_model;
pub mod spectral_engine;

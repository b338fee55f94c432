pub mod autodiff;
pub mod baselines;
pub mod checkpoint;
pub mod graph;
pub mod nst;
pub mod training;

pub mod experiment;
pub mod formulations;
pub mod interference;
pub mod lp;
pub mod net;
pub mod propagation;
pub mod schedule;

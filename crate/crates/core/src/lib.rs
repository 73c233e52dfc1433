pub mod allocation;
pub mod domain;
pub mod policies;
pub mod selfcheck;
pub mod sim;
pub mod stochastic;
pub mod vfa;

pub mod asymptotics;
pub mod dyadic;
pub mod model;
pub mod montecarlo;
pub mod shadow;
pub mod walk;
pub mod cli;

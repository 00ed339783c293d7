pub mod fading;
pub mod numerics;
pub mod interference;
pub mod coverage;
pub mod rate;
pub mod montecarlo;

pub mod augment;
pub mod expr;
pub mod hybridtime;
pub mod scalarfn;
pub mod lyapunov;
pub mod pipeline;
pub mod smallgain;
pub mod system;

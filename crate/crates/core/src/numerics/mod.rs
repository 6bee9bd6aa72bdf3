//! Small numerical kernels: adaptive quadrature and an embedded RK integrator.

pub mod ode;
pub mod quadrature;

//! Discrete-time double integrator along a lane axis.
//!
//! The lane frame is 1D: positive direction is the direction of travel and
//! the intersection center sits at coordinate 0. Discretization is exact
//! zero-order hold, so n steps of `step` reproduce the closed-form
//! x(t) = x0 + v0 t + u t^2 / 2 at the sample points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
}

/// Longitudinal state of one agent in its lane frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub pos: f64,
    pub vel: f64,
}

impl StateVector {
    pub fn new(pos: f64, vel: f64) -> Self {
        StateVector { pos, vel }
    }
}

/// State-transition and input matrices for one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsMatrices {
    /// [[1, dt], [0, 1]]
    pub a: [[f64; 2]; 2],
    /// [dt^2/2, dt]
    pub b: [f64; 2],
    pub dt: f64,
}

/// Exact zero-order-hold discretization of the double integrator.
pub fn discretize_double_integrator(dt: f64) -> Result<DynamicsMatrices, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::NonPositiveDt(dt));
    }
    Ok(DynamicsMatrices {
        a: [[1.0, dt], [0.0, 1.0]],
        b: [dt * dt / 2.0, dt],
        dt,
    })
}

/// One controlled step: A * state + B * u.
pub fn step(state: StateVector, u: f64, mats: &DynamicsMatrices) -> StateVector {
    StateVector {
        pos: mats.a[0][0] * state.pos + mats.a[0][1] * state.vel + mats.b[0] * u,
        vel: mats.a[1][0] * state.pos + mats.a[1][1] * state.vel + mats.b[1] * u,
    }
}

/// Constant-velocity advance used outside the control region.
pub fn kinematic_advance(pos: f64, v: f64, dt: f64) -> f64 {
    pos + v * dt
}

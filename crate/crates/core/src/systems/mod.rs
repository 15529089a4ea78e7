//! Model catalog: vector-space systems, rigid bodies, and named constructors.

pub mod catalog;
pub mod mech;
pub mod rigid;

pub use catalog::{
    build, catalog, make_ballistic_analog, make_constrained_pendulum, make_lattice, make_oscillator, make_rigid_pair,
    make_two_body, model_info, pendulum_state, resolve_params, thermal_state, BallisticParams, Model, ModelInfo,
    ModelKind, Params, RigidPairParams, TwoBodyParams,
};
pub use mech::{Constraint, ForceField, Matrix, MechSystem, PhaseState, ScalarField, Symmetry, ThermalBath, Vector};
pub use rigid::{
    Alignment, Body, BodyGradient, LieBodyState, LieBodySystem, LieState, LinearPosition, PointLoad, Pose,
    RigidBodySystem, RigidDrag, RigidField, Spring,
};

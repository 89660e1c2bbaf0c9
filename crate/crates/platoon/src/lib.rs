//! Smooth trajectory construction for vehicle platoons on a signalized
//! single-lane road, with reachability bounds, a kinematic-wave reference
//! model and a car-following benchmark.

pub mod idm_bench;
pub mod io;
pub mod kinematics;
pub mod kwt;
pub mod lab;
pub mod planner;
pub mod shooting_ops;
pub mod shooting_proc;
pub mod timegeo;

pub use kinematics::{
    pointwise_min, segment_distance, trajectory_distance, KinematicsError, QuadraticSegment, QuasiTrajectory,
    StatePoint, Trajectory,
};

pub use idm_bench::{simulate_idm, IdmError, IdmParams, Perception};
pub use kwt::{kwt_platoon, KwtPlatoon};
pub use lab::{generate_boundary, generate_boundary_dispersed, lead_profile, ScenarioConfig};
pub use planner::{
    shoot_platoon_pshl, shoot_platoon_sh, shoot_platoon_shl, validate_platoon, BoundaryCondition, ControlAccels,
    PlatoonResult, SignalTiming, VehicleLimits,
};
pub use shooting_ops::{bso, fso, ShootResult};
pub use shooting_proc::{bsp, efsp, fsp};
pub use timegeo::{cone_bounds, is_proper, prism_bounds};

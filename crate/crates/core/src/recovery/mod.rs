//! Skid-steer rollback simulator.
//!
//! Each control tick scans the world, folds the scan into a decaying
//! robot-centred costmap, asks the potential-field controller for a twist,
//! smooths it and integrates the unicycle model. A rollback ends on reaching
//! the checkpoint, on collision, on stalling or when the time budget runs out.

pub mod apf;
pub mod costmap;
pub mod kinematics;
pub mod reward;
pub mod rollback;
pub mod smoother;
pub mod world;

pub use apf::{apf_command, ApfCommand, ApfConfig};
pub use costmap::{Costmap, CostmapConfig};
pub use kinematics::{body_twist, integrate_kinematics, wheel_speeds, Integrator, KinematicParams, RobotState};
pub use reward::{reward_components, RewardBreakdown, RewardContext};
pub use rollback::{run_batch, run_rollback, run_scenario, Outcome, RecoveryError, RecoveryOutcome, RollbackConfig};
pub use smoother::{smooth_action, SmootherConfig};
pub use world::{generate_scenario, Obstacle, Scenario, World, WorldGenConfig};

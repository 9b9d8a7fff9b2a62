//! Sign-language animation toolchain for a humanoid robot arm.
//!
//! The pipeline reads a URDF arm model ([`robot_model`]), solves inverse
//! kinematics for each waypoint of a declarative sign ([`kinematics`],
//! [`lexicon`]), turns the joint values into keyframe curves with automatic
//! Bezier tangents ([`animation`]) and writes them as `.qanim` files
//! ([`qanim`]). Signs can be chained into sentences ([`sentence`]), and
//! recognition-study results can be audited with exact binomial tests
//! ([`stats`]).

pub mod animation;
pub mod fsutil;
pub mod kinematics;
pub mod lexicon;
pub mod qanim;
pub mod robot_model;
pub mod sentence;
pub mod stats;

pub use animation::{ActuatorCurve, Animation, Key, Tangent};
pub use kinematics::{
    forward, jacobian, mirror, solve_ik, HandState, IkGoal, IkOptions, IkSolution, IkStatus, JointVector, MirrorMap,
    Pose,
};
pub use lexicon::{compile_lexicon, compile_sign, parse_sign, validate_sign, CompileOptions, CompileReport, SignDefinition};
pub use qanim::{emit_qanim, format_number, parse_qanim};
pub use robot_model::{build_chain, parse_urdf, KinematicChain, RobotModel};
pub use sentence::{compose, sov_order, GlossSentence};
pub use stats::{analyze, binomial_tail, load_records};

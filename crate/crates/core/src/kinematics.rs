//! Forward kinematics, geometric Jacobian, weighted damped-least-squares IK
//! and right-to-left arm mirroring.

use nalgebra::{DMatrix, DVector, Isometry3, Matrix6xX, UnitQuaternion, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robot_model::KinematicChain;

const QUATERNION_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid IK options: {0}")]
    InvalidOptions(String),
    #[error("invalid IK goal: {0}")]
    InvalidGoal(String),
    #[error("joint `{0}` has no mirror map entry")]
    UnmappedJoint(String),
    #[error("invalid mirror map: {0}")]
    InvalidMirrorMap(String),
    #[error("quaternion norm {0} is not 1")]
    NonUnitQuaternion(f64),
}

/// Joint-space configuration, labeled with the chain's joint names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointVector {
    pub names: Vec<String>,
    /// Angles [rad].
    pub values: Vec<f64>,
}

impl JointVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self, KinematicsError> {
        if names.len() != values.len() {
            return Err(KinematicsError::DimensionMismatch { expected: names.len(), got: values.len() });
        }
        Ok(Self { names, values })
    }

    pub fn for_chain(chain: &KinematicChain, values: Vec<f64>) -> Result<Self, KinematicsError> {
        Self::new(chain.joint_names(), values)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn within_limits(&self, chain: &KinematicChain, slack: f64) -> bool {
        self.values.len() == chain.dof()
            && chain.joints.iter().zip(&self.values).all(|(j, &v)| v >= j.lower - slack && v <= j.upper + slack)
    }
}

/// Task-space pose in the base frame.
///
/// Serialized as `{"position": [x, y, z], "orientation": [w, x, y, z]}`
/// (scalar-first quaternion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.orientation.quaternion();
        PoseRepr { position: p.position.into(), orientation: [q.w, q.i, q.j, q.k] }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = KinematicsError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Ok(Pose { position: Vector3::from(r.position), orientation: unit_quaternion_wxyz(r.orientation)? })
    }
}

/// Builds a unit quaternion from scalar-first components, rejecting non-unit input.
pub fn unit_quaternion_wxyz(wxyz: [f64; 4]) -> Result<UnitQuaternion<f64>, KinematicsError> {
    let q = nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() >= QUATERNION_NORM_TOLERANCE {
        return Err(KinematicsError::NonUnitQuaternion(norm));
    }
    Ok(UnitQuaternion::new_unchecked(q))
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(self.position.into(), self.orientation)
    }

    pub fn orientation_wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HandState {
    Open,
    Closed,
    #[default]
    Neutral,
}

pub const DEFAULT_WEIGHTS: [f64; 6] = [0.1, 0.1, 0.1, 1.0, 1.0, 1.0];

/// IK target with per-component priorities.
///
/// `weights` is ordered `[w_ox, w_oy, w_oz, w_px, w_py, w_pz]`: three
/// orientation components followed by three position components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkGoal {
    pub target: Pose,
    #[serde(default = "default_weights")]
    pub weights: [f64; 6],
    #[serde(default)]
    pub hand_state: HandState,
    #[serde(default)]
    pub mirror: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_weights() -> [f64; 6] {
    DEFAULT_WEIGHTS
}

impl IkGoal {
    pub fn new(target: Pose, weights: [f64; 6]) -> Self {
        Self { target, weights, hand_state: HandState::Neutral, mirror: false, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(KinematicsError::InvalidGoal("weights must be finite and nonnegative".into()));
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err(KinematicsError::InvalidGoal("at least one weight must be positive".into()));
        }
        if !self.target.position.iter().all(|v| v.is_finite()) {
            return Err(KinematicsError::InvalidGoal("target position is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkOptions {
    /// Positional tolerance [m].
    pub tol_pos: f64,
    /// Orientation tolerance [rad].
    pub tol_ori: f64,
    pub max_iterations: usize,
    pub max_restarts: usize,
    pub lambda0: f64,
    /// Starting configuration for restart 0; mid-range of the limits when absent.
    pub initial_guess: Option<Vec<f64>>,
    pub unreachable_factor: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            tol_pos: 1e-3,
            tol_ori: 1e-2,
            max_iterations: 300,
            max_restarts: 16,
            lambda0: 1e-3,
            initial_guess: None,
            unreachable_factor: 100.0,
        }
    }
}

impl IkOptions {
    pub fn validate(&self, chain: &KinematicChain) -> Result<(), KinematicsError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tol_pos) || !positive(self.tol_ori) {
            return Err(KinematicsError::InvalidOptions("tolerances must be positive".into()));
        }
        if !positive(self.lambda0) || !positive(self.unreachable_factor) {
            return Err(KinematicsError::InvalidOptions("lambda0 and unreachable_factor must be positive".into()));
        }
        if let Some(guess) = &self.initial_guess {
            if guess.len() != chain.dof() {
                return Err(KinematicsError::DimensionMismatch { expected: chain.dof(), got: guess.len() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IkStatus {
    Converged,
    BestEffort,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: JointVector,
    /// ‖W·e‖ where e stacks the angle-axis orientation error [rad] and the
    /// position error [m]; mixed units, scaled by the weights.
    pub residual: f64,
    pub status: IkStatus,
    pub iterations: usize,
    pub restarts_used: usize,
    /// Unweighted ‖p_target − p(q)‖ [m].
    pub position_error: f64,
    /// Unweighted rotation angle between target and achieved orientation [rad].
    pub orientation_error: f64,
}

fn check_dim(chain: &KinematicChain, q: &[f64]) -> Result<(), KinematicsError> {
    if q.len() != chain.dof() {
        return Err(KinematicsError::DimensionMismatch { expected: chain.dof(), got: q.len() });
    }
    Ok(())
}

/// World frames of every revolute joint (before its own rotation) and of the tip.
pub fn joint_frames(chain: &KinematicChain, q: &[f64]) -> Result<(Vec<Isometry3<f64>>, Isometry3<f64>), KinematicsError> {
    check_dim(chain, q)?;
    let mut frames = Vec::with_capacity(chain.dof());
    let mut t = Isometry3::identity();
    for (joint, &angle) in chain.joints.iter().zip(q) {
        t *= joint.origin;
        frames.push(t);
        t *= UnitQuaternion::from_axis_angle(&joint.axis, angle);
    }
    t *= chain.tip_offset;
    Ok((frames, t))
}

/// Tip pose for configuration `q`.
pub fn forward(chain: &KinematicChain, q: &[f64]) -> Result<Pose, KinematicsError> {
    let (_, tip) = joint_frames(chain, q)?;
    Ok(Pose { position: tip.translation.vector, orientation: tip.rotation })
}

/// Geometric Jacobian in the base frame: rows 0..3 angular, rows 3..6 linear.
pub fn jacobian(chain: &KinematicChain, q: &[f64]) -> Result<Matrix6xX<f64>, KinematicsError> {
    let (frames, tip) = joint_frames(chain, q)?;
    let p_tip = tip.translation.vector;
    let mut jac = Matrix6xX::zeros(chain.dof());
    for (i, (frame, joint)) in frames.iter().zip(&chain.joints).enumerate() {
        let z = frame.rotation * joint.axis.into_inner();
        let v = z.cross(&(p_tip - frame.translation.vector));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&z);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&v);
    }
    Ok(jac)
}

/// Stacked task error `[angle-axis(R_target·R(q)ᵀ); p_target − p(q)]`.
pub fn pose_error(target: &Pose, current: &Pose) -> Vector6<f64> {
    let rot = (target.orientation * current.orientation.inverse()).scaled_axis();
    let pos = target.position - current.position;
    Vector6::new(rot.x, rot.y, rot.z, pos.x, pos.y, pos.z)
}

struct Attempt {
    q: Vec<f64>,
    error: Vector6<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

struct Solver<'a> {
    chain: &'a KinematicChain,
    goal: &'a IkGoal,
    options: &'a IkOptions,
    weights: Vector6<f64>,
}

impl Solver<'_> {
    fn evaluate(&self, q: &[f64]) -> (Vector6<f64>, f64) {
        let pose = forward(self.chain, q).expect("dimension checked");
        let e = pose_error(&self.goal.target, &pose);
        let cost = e.component_mul(&self.weights).norm_squared();
        (e, cost)
    }

    fn meets_tolerance(&self, e: &Vector6<f64>) -> bool {
        let active = |range: std::ops::Range<usize>| -> f64 {
            range.filter(|&k| self.weights[k] > 0.0).map(|k| e[k] * e[k]).sum::<f64>().sqrt()
        };
        active(0..3) <= self.options.tol_ori && active(3..6) <= self.options.tol_pos
    }

    fn run(&self, start: Vec<f64>) -> Attempt {
        let n = self.chain.dof();
        let mut q: Vec<f64> = start.iter().zip(&self.chain.joints).map(|(v, j)| j.clamp(*v)).collect();
        let (mut e, mut cost) = self.evaluate(&q);
        let mut lambda = self.options.lambda0;
        let mut iterations = 0;
        let w2 = self.weights.component_mul(&self.weights);

        while !self.meets_tolerance(&e) && iterations < self.options.max_iterations {
            let jac = jacobian(self.chain, &q).expect("dimension checked");
            let mut jtw2 = jac.transpose();
            for (k, mut col) in jtw2.column_iter_mut().enumerate() {
                col *= w2[k];
            }
            let mut normal: DMatrix<f64> = &jtw2 * &jac;
            for i in 0..n {
                normal[(i, i)] += lambda;
            }
            let rhs: DVector<f64> = &jtw2 * e;
            let Some(step) = normal.cholesky().map(|c| c.solve(&rhs)) else {
                lambda *= 2.0;
                iterations += 1;
                continue;
            };
            let candidate: Vec<f64> =
                q.iter().zip(step.iter()).zip(&self.chain.joints).map(|((v, d), j)| j.clamp(v + d)).collect();
            iterations += 1;

            let moved = candidate.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved < 1e-15 {
                break;
            }
            let (e_new, cost_new) = self.evaluate(&candidate);
            if cost_new < cost {
                let gain = cost - cost_new;
                q = candidate;
                e = e_new;
                cost = cost_new;
                lambda = (lambda * 0.5).max(1e-12);
                if gain <= 1e-15 * cost.max(1e-300) {
                    break;
                }
            } else {
                lambda *= 2.0;
                if lambda > 1e8 {
                    break;
                }
            }
        }
        let converged = self.meets_tolerance(&e);
        Attempt { q, error: e, cost, iterations, converged }
    }
}

/// Weighted damped-least-squares IK with joint-limit clamping and seeded restarts.
pub fn solve_ik(chain: &KinematicChain, goal: &IkGoal, options: &IkOptions) -> Result<IkSolution, KinematicsError> {
    options.validate(chain)?;
    goal.validate()?;
    let solver = Solver { chain, goal, options, weights: Vector6::from(goal.weights) };

    let mut rng = ChaCha8Rng::seed_from_u64(goal.seed);
    let mut best: Option<Attempt> = None;
    let mut restarts_used = 0;
    for restart in 0..=options.max_restarts {
        let start = if restart == 0 {
            options.initial_guess.clone().unwrap_or_else(|| chain.joints.iter().map(|j| j.mid_range()).collect())
        } else {
            chain.joints.iter().map(|j| if j.upper > j.lower { rng.random_range(j.lower..=j.upper) } else { j.lower }).collect()
        };
        let attempt = solver.run(start);
        restarts_used = restart;
        let done = attempt.converged;
        let better = match &best {
            None => true,
            Some(b) => (attempt.converged && !b.converged) || (attempt.converged == b.converged && attempt.cost < b.cost),
        };
        if better {
            best = Some(attempt);
        }
        if done {
            break;
        }
    }

    let best = best.expect("at least one attempt runs");
    let weighted_pos = Vector3::new(
        best.error[3] * goal.weights[3],
        best.error[4] * goal.weights[4],
        best.error[5] * goal.weights[5],
    )
    .norm();
    let status = if best.converged {
        IkStatus::Converged
    } else if weighted_pos > options.unreachable_factor * options.tol_pos {
        IkStatus::Unreachable
    } else {
        IkStatus::BestEffort
    };
    Ok(IkSolution {
        q: JointVector::for_chain(chain, best.q)?,
        residual: best.cost.sqrt(),
        status,
        iterations: best.iterations,
        restarts_used,
        position_error: best.error.fixed_rows::<3>(3).norm(),
        orientation_error: best.error.fixed_rows::<3>(0).norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorEntry {
    pub source: String,
    pub target: String,
    /// +1 or −1.
    pub sign: i8,
}

/// Right-arm to left-arm joint renaming with per-joint sign flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MirrorMap {
    pub entries: Vec<MirrorEntry>,
}

impl MirrorMap {
    pub fn new(entries: Vec<MirrorEntry>) -> Result<Self, KinematicsError> {
        for e in &entries {
            if e.sign != 1 && e.sign != -1 {
                return Err(KinematicsError::InvalidMirrorMap(format!("sign of `{}` must be ±1", e.source)));
            }
        }
        let mut sources: Vec<&str> = entries.iter().map(|e| e.source.as_str()).collect();
        sources.sort_unstable();
        if sources.windows(2).any(|w| w[0] == w[1]) {
            return Err(KinematicsError::InvalidMirrorMap("duplicate source joint".into()));
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self, KinematicsError> {
        let entries: Vec<MirrorEntry> =
            serde_json::from_str(text).map_err(|e| KinematicsError::InvalidMirrorMap(e.to_string()))?;
        Self::new(entries)
    }

    /// Sagittal reflection for the Pepper arm: pitch joints (about y) keep
    /// their sign, roll and yaw joints (about z and x) flip it.
    pub fn pepper_default() -> Self {
        let entry = |s: &str, t: &str, sign| MirrorEntry { source: s.into(), target: t.into(), sign };
        Self {
            entries: vec![
                entry("RShoulderPitch", "LShoulderPitch", 1),
                entry("RShoulderRoll", "LShoulderRoll", -1),
                entry("RElbowYaw", "LElbowYaw", -1),
                entry("RElbowRoll", "LElbowRoll", -1),
                entry("RWristYaw", "LWristYaw", -1),
                entry("RHand", "LHand", 1),
            ],
        }
    }

    pub fn lookup(&self, source: &str) -> Option<&MirrorEntry> {
        self.entries.iter().find(|e| e.source == source)
    }

    /// Every chain joint must have exactly one entry.
    pub fn check_covers(&self, chain: &KinematicChain) -> Result<(), KinematicsError> {
        for j in &chain.joints {
            if self.lookup(&j.name).is_none() {
                return Err(KinematicsError::UnmappedJoint(j.name.clone()));
            }
        }
        Ok(())
    }
}

/// Renames `q` onto the mirrored arm and applies each entry's sign.
pub fn mirror(q: &JointVector, map: &MirrorMap) -> Result<JointVector, KinematicsError> {
    let mut names = Vec::with_capacity(q.names.len());
    let mut values = Vec::with_capacity(q.values.len());
    for (name, &value) in q.names.iter().zip(&q.values) {
        let entry = map.lookup(name).ok_or_else(|| KinematicsError::UnmappedJoint(name.clone()))?;
        names.push(entry.target.clone());
        values.push(f64::from(entry.sign) * value);
    }
    JointVector::new(names, values)
}

//! Declarative sign definitions and the sign → animation compiler.
//!
//! A sign is a list of timed right-hand waypoints (position, orientation,
//! IK weights, hand state). Compilation solves IK per waypoint, optionally
//! mirrors the result onto the left arm, and emits one auto-tangent curve
//! per actuator. Documents are JSON, one `<GLOSS>.sign.json` per sign; see
//! `docs/lexicon-schema.md` in the repository.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::animation::{ActuatorCurve, Animation, AnimationError, DEGREE};
use crate::fsutil::write_atomic;
use crate::kinematics::{
    mirror, solve_ik, unit_quaternion_wxyz, HandState, IkGoal, IkOptions, IkStatus, JointVector, KinematicsError,
    MirrorMap, Pose, DEFAULT_WEIGHTS,
};
use crate::qanim::{emit_qanim, QanimError};
use crate::robot_model::KinematicChain;

pub const SIGN_SUFFIX: &str = ".sign.json";
pub const QANIM_SUFFIX: &str = ".qanim";
/// Largest deviation from unit norm accepted (and renormalized) in hand-written quaternions.
pub const QUATERNION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("waypoint times must increase strictly (waypoint {index})")]
    NonIncreasingTimes { index: usize },
    #[error("sign `{0}` is declared manual-only")]
    ManualOnly(String),
    #[error("sign `{}` failed to compile: {}", .0.gloss, .0.reasons.join("; "))]
    FailedCompile(Box<CompileReport>),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Animation(#[from] AnimationError),
    #[error(transparent)]
    Qanim(#[from] QanimError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl LexiconError {
    fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        LexiconError::SchemaViolation { path: path.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        LexiconError::Io { path: path.to_path_buf(), message: err.to_string() }
    }
}

fn default_weights() -> [f64; 6] {
    DEFAULT_WEIGHTS
}

fn default_repetitions() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    /// Seconds from the start of the sign.
    pub time: f64,
    /// Right-hand target in the base frame [m].
    pub position: [f64; 3],
    /// Scalar-first unit quaternion.
    pub orientation: [f64; 4],
    #[serde(default = "default_weights")]
    pub weights: [f64; 6],
    #[serde(default)]
    pub hand_state: HandState,
}

impl Waypoint {
    pub fn pose(&self) -> Result<Pose, KinematicsError> {
        Ok(Pose::new(Vector3::from(self.position), unit_quaternion_wxyz(self.orientation)?))
    }
}

/// Posture held by the left arm in a two-handed sign that is not mirrored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ArmHold {
    /// Left-arm joint angles [rad]; joints not listed hold 0.
    #[serde(default)]
    pub joints: BTreeMap<String, f64>,
    #[serde(default)]
    pub hand_state: HandState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignDefinition {
    pub gloss: String,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub two_handed: bool,
    /// Left arm performs the mirror image of the right arm.
    #[serde(default)]
    pub mirrored: bool,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    /// Declared non-automatable; batch builds skip it.
    #[serde(default)]
    pub manual_only: bool,
    pub waypoints: Vec<Waypoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_hold: Option<ArmHold>,
}

/// Uppercase identifier usable as a gloss and file stem.
pub fn is_gloss(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() && c.is_uppercase())
        && s.chars().all(|c| (c.is_alphabetic() && c.is_uppercase()) || c.is_ascii_digit() || c == '_')
}

/// Parses and validates a sign document. Orientations within 1e-6 of unit
/// norm are renormalized.
pub fn parse_sign(document: &str) -> Result<SignDefinition, LexiconError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let mut sign: SignDefinition = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        LexiconError::schema(if path == "." { "$".to_string() } else { format!("$.{path}") }, e.inner().to_string())
    })?;

    if !is_gloss(&sign.gloss) {
        return Err(LexiconError::schema("$.gloss", "gloss must be an uppercase identifier"));
    }
    if sign.repetitions == 0 {
        return Err(LexiconError::schema("$.repetitions", "must be positive"));
    }
    if sign.mirrored && !sign.two_handed {
        return Err(LexiconError::schema("$.mirrored", "a mirrored sign must be two-handed"));
    }
    if sign.left_hold.is_some() && (!sign.two_handed || sign.mirrored) {
        return Err(LexiconError::schema("$.left_hold", "only two-handed, non-mirrored signs hold the left arm"));
    }
    match sign.waypoints.len() {
        0 => return Err(LexiconError::schema("$.waypoints", "at least one waypoint required")),
        1 if sign.repetitions > 1 => {
            return Err(LexiconError::schema("$.waypoints", "a repeated sign needs at least two waypoints"))
        }
        _ => {}
    }
    for (i, wp) in sign.waypoints.iter_mut().enumerate() {
        let at = |field: &str| format!("$.waypoints[{i}].{field}");
        if !wp.time.is_finite() || wp.time < 0.0 {
            return Err(LexiconError::schema(at("time"), "must be a nonnegative number"));
        }
        if !wp.position.iter().all(|v| v.is_finite()) {
            return Err(LexiconError::schema(at("position"), "must be finite"));
        }
        let norm = wp.orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_TOLERANCE {
            return Err(LexiconError::schema(at("orientation"), format!("quaternion norm {norm} is not 1")));
        }
        wp.orientation.iter_mut().for_each(|v| *v /= norm);
        if wp.weights.iter().any(|w| !w.is_finite() || *w < 0.0) || wp.weights.iter().all(|w| *w == 0.0) {
            return Err(LexiconError::schema(at("weights"), "nonnegative with at least one positive entry"));
        }
    }
    if sign.waypoints[0].time != 0.0 {
        return Err(LexiconError::schema("$.waypoints[0].time", "first waypoint must be at t = 0"));
    }
    if let Some(i) = sign.waypoints.windows(2).position(|w| w[1].time <= w[0].time) {
        return Err(LexiconError::NonIncreasingTimes { index: i + 1 });
    }
    Ok(sign)
}

/// Axis-aligned box in the base frame that hands must stay out of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeepOutRegion {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl KeepOutRegion {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Option<Self> {
        (0..3).all(|k| min[k] <= max[k]).then_some(Self { min, max })
    }

    /// Placeholder box around the chest tablet of the bundled fixture.
    pub fn pepper_tablet() -> Self {
        Self { min: [0.03, -0.13, -0.22], max: [0.16, 0.13, 0.02] }
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| 0.5 * (self.min[k] + self.max[k]))
    }
}

impl Default for KeepOutRegion {
    fn default() -> Self {
        Self::pepper_tablet()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Diagnostic {
    KeepOutViolation { waypoint: usize },
    LikelyUnreachable { waypoint: usize, distance: f64, reach: f64 },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::KeepOutViolation { waypoint } => {
                write!(f, "waypoint {waypoint}: inside the keep-out region")
            }
            Diagnostic::LikelyUnreachable { waypoint, distance, reach } => write!(
                f,
                "waypoint {waypoint}: {distance:.3} m from the shoulder exceeds arm length {reach:.3} m"
            ),
        }
    }
}

/// Static checks that need no IK solve.
pub fn validate_sign(sign: &SignDefinition, chain: &KinematicChain, keepout: &KeepOutRegion) -> Vec<Diagnostic> {
    let shoulder = chain.root_position();
    let reach = chain.reach();
    let mut out = Vec::new();
    for (i, wp) in sign.waypoints.iter().enumerate() {
        if keepout.contains(&wp.position) {
            out.push(Diagnostic::KeepOutViolation { waypoint: i });
        }
        let distance = (Vector3::from(wp.position) - shoulder).norm();
        if distance > reach {
            out.push(Diagnostic::LikelyUnreachable { waypoint: i, distance, reach });
        }
    }
    out
}

/// Hand actuator values on a nominal 0..1 range, scaled on output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandMapping {
    pub open: f64,
    pub closed: f64,
    pub neutral: f64,
    /// Multiplier applied to the nominal value before it is written.
    pub hand_scale: f64,
    /// `unit` attribute of the hand curves.
    pub hand_unit: String,
    pub right_actuator: String,
    pub left_actuator: String,
}

impl Default for HandMapping {
    fn default() -> Self {
        Self {
            open: 0.98,
            closed: 0.02,
            neutral: 0.5,
            hand_scale: 1.0,
            hand_unit: "dimensionless".into(),
            right_actuator: "RHand".into(),
            left_actuator: "LHand".into(),
        }
    }
}

impl HandMapping {
    pub fn value(&self, state: HandState) -> f64 {
        self.hand_scale
            * match state {
                HandState::Open => self.open,
                HandState::Closed => self.closed,
                HandState::Neutral => self.neutral,
            }
    }

    pub fn is_hand(&self, actuator: &str) -> bool {
        actuator == self.right_actuator || actuator == self.left_actuator
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileOptions {
    pub fps: u32,
    pub ik: IkOptions,
    pub hand: HandMapping,
    pub keepout: KeepOutRegion,
    /// Refuse signs with keep-out violations.
    pub strict: bool,
    /// Start each waypoint's solve from the previous waypoint's solution.
    pub warm_start: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            fps: 25,
            ik: IkOptions::default(),
            hand: HandMapping::default(),
            keepout: KeepOutRegion::default(),
            strict: false,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompileStatus {
    Automated,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointReport {
    pub index: usize,
    pub frame: u32,
    pub status: IkStatus,
    pub residual: f64,
    pub position_error: f64,
    pub orientation_error: f64,
    pub iterations: usize,
    pub restarts_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub gloss: String,
    pub status: CompileStatus,
    pub waypoints: Vec<WaypointReport>,
    pub reasons: Vec<String>,
    pub warnings: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CompileReport {
    fn new(gloss: &str, diagnostics: Vec<Diagnostic>) -> Self {
        Self {
            gloss: gloss.into(),
            status: CompileStatus::Automated,
            waypoints: Vec::new(),
            reasons: Vec::new(),
            warnings: Vec::new(),
            diagnostics,
        }
    }
}

/// FNV-1a; the IK seed must not depend on the std hasher's randomization.
fn stable_hash(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn waypoint_seed(gloss: &str, index: usize) -> u64 {
    stable_hash(format!("{gloss}#{index}").as_bytes())
}

/// Waypoint time [s] to key frame.
pub fn time_to_frame(time: f64, fps: u32) -> u32 {
    (time * f64::from(fps)).round() as u32
}

/// Frames of every key, in order, with the waypoint each one replays.
/// Repeated signs are cyclic: each repetition returns to the first waypoint
/// over the same number of frames as the first stroke.
fn key_schedule(frames: &[u32], repetitions: u32) -> Vec<(u32, usize)> {
    if repetitions <= 1 {
        return frames.iter().copied().zip(0..).collect();
    }
    let period = frames[frames.len() - 1] + (frames[1] - frames[0]);
    let mut out = Vec::with_capacity(frames.len() * repetitions as usize + 1);
    for r in 0..repetitions {
        out.extend(frames.iter().enumerate().map(|(i, f)| (f + r * period, i)));
    }
    out.push((repetitions * period, 0));
    out
}

/// Solves every waypoint and builds the sign's animation.
pub fn compile_sign(
    sign: &SignDefinition,
    chain: &KinematicChain,
    mirror_map: &MirrorMap,
    options: &CompileOptions,
) -> Result<(Animation, CompileReport), LexiconError> {
    if sign.manual_only {
        return Err(LexiconError::ManualOnly(sign.gloss.clone()));
    }
    let diagnostics = validate_sign(sign, chain, &options.keepout);
    let mut report = CompileReport::new(&sign.gloss, diagnostics);
    if options.strict {
        let violations: Vec<String> = report
            .diagnostics
            .iter()
            .filter(|d| matches!(d, Diagnostic::KeepOutViolation { .. }))
            .map(ToString::to_string)
            .collect();
        if !violations.is_empty() {
            report.status = CompileStatus::Failed;
            report.reasons = violations;
            return Err(LexiconError::FailedCompile(Box::new(report)));
        }
    }
    if sign.two_handed {
        mirror_map.check_covers(chain)?;
    }

    let frames: Vec<u32> = sign.waypoints.iter().map(|w| time_to_frame(w.time, options.fps)).collect();
    if let Some(i) = frames.windows(2).position(|w| w[1] <= w[0]) {
        return Err(LexiconError::schema(
            format!("$.waypoints[{}].time", i + 1),
            format!("rounds onto the same frame as its predecessor at {} fps", options.fps),
        ));
    }

    let mut solutions: Vec<JointVector> = Vec::with_capacity(sign.waypoints.len());
    for (i, wp) in sign.waypoints.iter().enumerate() {
        let goal = IkGoal {
            target: wp.pose()?,
            weights: wp.weights,
            hand_state: wp.hand_state,
            mirror: sign.mirrored,
            seed: waypoint_seed(&sign.gloss, i),
        };
        let mut ik = options.ik.clone();
        if options.warm_start {
            if let Some(prev) = solutions.last() {
                ik.initial_guess = Some(prev.values.clone());
            }
        }
        let sol = solve_ik(chain, &goal, &ik)?;
        match sol.status {
            IkStatus::Converged => {}
            IkStatus::BestEffort => report.warnings.push(format!(
                "waypoint {i}: best-effort solve (position error {:.4} m, orientation error {:.4} rad)",
                sol.position_error, sol.orientation_error
            )),
            IkStatus::Unreachable => report.reasons.push(format!(
                "waypoint {i}: kinematic infeasibility (position error {:.4} m)",
                sol.position_error
            )),
        }
        report.waypoints.push(WaypointReport {
            index: i,
            frame: frames[i],
            status: sol.status,
            residual: sol.residual,
            position_error: sol.position_error,
            orientation_error: sol.orientation_error,
            iterations: sol.iterations,
            restarts_used: sol.restarts_used,
        });
        solutions.push(sol.q);
    }
    if !report.reasons.is_empty() {
        report.status = CompileStatus::Failed;
        return Err(LexiconError::FailedCompile(Box::new(report)));
    }

    let schedule = key_schedule(&frames, sign.repetitions);
    let last_frame = schedule.last().map_or(0, |(f, _)| *f);
    let hand = &options.hand;
    let mut animation = Animation::new(options.fps);
    let joint_curve = |name: &str, per_waypoint: &dyn Fn(usize) -> f64| {
        let points: Vec<(u32, f64)> = schedule.iter().map(|&(f, i)| (f, per_waypoint(i))).collect();
        ActuatorCurve::auto(name, &points)
    };
    let hand_curve = |name: &str, per_waypoint: &dyn Fn(usize) -> f64| {
        let points: Vec<(u32, f64)> = schedule.iter().map(|&(f, i)| (f, per_waypoint(i))).collect();
        ActuatorCurve::auto_with_unit(name, hand.hand_unit.clone(), &points)
    };

    for (j, name) in chain.joint_names().iter().enumerate() {
        animation.curves.push(joint_curve(name, &|i| solutions[i].values[j].to_degrees())?);
    }
    animation.curves.push(hand_curve(&hand.right_actuator, &|i| hand.value(sign.waypoints[i].hand_state))?);

    if sign.mirrored {
        let left: Vec<JointVector> = solutions.iter().map(|q| mirror(q, mirror_map)).collect::<Result<_, _>>()?;
        for (j, name) in left[0].names.iter().enumerate() {
            animation.curves.push(joint_curve(name, &|i| left[i].values[j].to_degrees())?);
        }
        animation.curves.push(hand_curve(&hand.left_actuator, &|i| hand.value(sign.waypoints[i].hand_state))?);
    } else if sign.two_handed {
        let hold = sign.left_hold.clone().unwrap_or_default();
        let targets: Vec<&str> = chain
            .joints
            .iter()
            .map(|j| mirror_map.lookup(&j.name).map(|e| e.target.as_str()).expect("coverage checked"))
            .collect();
        if let Some(unknown) = hold.joints.keys().find(|k| !targets.contains(&k.as_str())) {
            return Err(LexiconError::schema(format!("$.left_hold.joints.{unknown}"), "not a left-arm joint"));
        }
        let span: Vec<u32> = if last_frame == 0 { vec![0] } else { vec![0, last_frame] };
        for name in targets {
            let value = hold.joints.get(name).copied().unwrap_or(0.0).to_degrees();
            let points: Vec<(u32, f64)> = span.iter().map(|&f| (f, value)).collect();
            animation.curves.push(ActuatorCurve::auto_with_unit(name, DEGREE, &points)?);
        }
        let value = hand.value(hold.hand_state);
        let points: Vec<(u32, f64)> = span.iter().map(|&f| (f, value)).collect();
        animation.curves.push(ActuatorCurve::auto_with_unit(hand.left_actuator.clone(), hand.hand_unit.clone(), &points)?);
    }

    animation.validate()?;
    Ok((animation, report))
}

pub fn sign_path(dir: &Path, gloss: &str) -> PathBuf {
    dir.join(format!("{gloss}{SIGN_SUFFIX}"))
}

/// `*.sign.json` files in `dir`, sorted by name.
pub fn sign_files(dir: &Path) -> Result<Vec<PathBuf>, LexiconError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| LexiconError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(SIGN_SUFFIX)))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_sign(path: &Path) -> Result<SignDefinition, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|e| LexiconError::io(path, e))?;
    parse_sign(&text)
}

/// Loads the sign for `gloss` from a lexicon directory.
pub fn load_gloss(dir: &Path, gloss: &str) -> Result<Option<SignDefinition>, LexiconError> {
    let path = sign_path(dir, gloss);
    if !path.is_file() {
        return Ok(None);
    }
    load_sign(&path).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    /// Gloss, or the file name when the document could not be parsed.
    pub name: String,
    pub status: CompileStatus,
    pub output: Option<PathBuf>,
    pub report: Option<CompileReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchReport {
    pub entries: Vec<BatchEntry>,
    pub automated: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl BatchReport {
    pub fn summary(&self) -> String {
        format!("{} automated, {} failed, {} skipped", self.automated, self.failed, self.skipped)
    }
}

fn build_one(
    path: &Path,
    out_dir: &Path,
    chain: &KinematicChain,
    mirror_map: &MirrorMap,
    options: &CompileOptions,
) -> BatchEntry {
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let failed = |name: String, error: String, report: Option<CompileReport>| BatchEntry {
        name,
        status: CompileStatus::Failed,
        output: None,
        report,
        error: Some(error),
    };
    let sign = match load_sign(path) {
        Ok(s) => s,
        Err(e) => return failed(file_name.trim_end_matches(SIGN_SUFFIX).to_string(), e.to_string(), None),
    };
    if sign.manual_only {
        return BatchEntry { name: sign.gloss, status: CompileStatus::Skipped, output: None, report: None, error: None };
    }
    let result = compile_sign(&sign, chain, mirror_map, options).and_then(|(anim, report)| {
        let out = out_dir.join(format!("{}{QANIM_SUFFIX}", sign.gloss));
        let text = emit_qanim(&anim)?;
        write_atomic(&out, text.as_bytes()).map_err(|e| LexiconError::io(&out, e))?;
        Ok((out, report))
    });
    match result {
        Ok((out, report)) => BatchEntry {
            name: sign.gloss,
            status: CompileStatus::Automated,
            output: Some(out),
            report: Some(report),
            error: None,
        },
        Err(LexiconError::FailedCompile(report)) => {
            let msg = report.reasons.join("; ");
            failed(sign.gloss, msg, Some(*report))
        }
        Err(e) => failed(sign.gloss, e.to_string(), None),
    }
}

/// Compiles every sign document in `dir` into `out_dir`. Per-file failures
/// are recorded in the report, not returned.
pub fn compile_lexicon(
    dir: &Path,
    out_dir: &Path,
    chain: &KinematicChain,
    mirror_map: &MirrorMap,
    options: &CompileOptions,
) -> Result<BatchReport, LexiconError> {
    let files = sign_files(dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| LexiconError::io(out_dir, e))?;
    let mut entries: Vec<BatchEntry> =
        files.par_iter().map(|path| build_one(path, out_dir, chain, mirror_map, options)).collect();
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    let count = |s: CompileStatus| entries.iter().filter(|e| e.status == s).count();
    Ok(BatchReport {
        automated: count(CompileStatus::Automated),
        failed: count(CompileStatus::Failed),
        skipped: count(CompileStatus::Skipped),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward;

    fn doc(waypoints: &str, extra: &str) -> String {
        format!(r#"{{"gloss": "TEST", "category": "demo"{extra}, "waypoints": [{waypoints}]}}"#)
    }

    fn wp(t: f64, p: [f64; 3]) -> String {
        format!(r#"{{"time": {t}, "position": [{}, {}, {}], "orientation": [1, 0, 0, 0]}}"#, p[0], p[1], p[2])
    }

    #[test]
    fn minimal_static_sign() {
        let sign = parse_sign(&doc(&wp(0.0, [0.1, -0.2, 0.1]), "")).unwrap();
        assert_eq!(sign.waypoints.len(), 1);
        assert_eq!(sign.repetitions, 1);
        assert_eq!(sign.waypoints[0].weights, DEFAULT_WEIGHTS);
        assert_eq!(sign.waypoints[0].hand_state, HandState::Neutral);
    }

    #[test]
    fn schema_errors() {
        let p = [0.1, -0.2, 0.1];
        let three = [wp(0.0, p), wp(0.5, p), wp(0.5, p)].join(",");
        assert!(matches!(parse_sign(&doc(&three, "")), Err(LexiconError::NonIncreasingTimes { index: 2 })));

        let err = parse_sign(&doc(&wp(0.0, p), r#", "mirrored": true"#)).unwrap_err();
        assert!(matches!(err, LexiconError::SchemaViolation { path, .. } if path == "$.mirrored"));

        let err = parse_sign(&doc(&wp(0.0, p), r#", "repetitions": 2"#)).unwrap_err();
        assert!(matches!(err, LexiconError::SchemaViolation { .. }));

        let err = parse_sign(&doc(&wp(0.0, p), r#", "colour": 2"#)).unwrap_err();
        assert!(matches!(err, LexiconError::SchemaViolation { .. }));

        let bad_hand = doc(&wp(0.0, p).replace('}', r#", "hand_state": "pinch"}"#), "");
        let err = parse_sign(&bad_hand).unwrap_err();
        assert!(matches!(err, LexiconError::SchemaViolation { path, .. } if path.contains("hand_state")));

        let late = doc(&wp(0.2, p), "");
        assert!(matches!(parse_sign(&late), Err(LexiconError::SchemaViolation { .. })));

        let lower = doc(&wp(0.0, p), "").replace("TEST", "test");
        assert!(matches!(parse_sign(&lower), Err(LexiconError::SchemaViolation { path, .. }) if path == "$.gloss"));
    }

    #[test]
    fn key_schedule_repeats_cyclically() {
        assert_eq!(key_schedule(&[0, 30], 1), vec![(0, 0), (30, 1)]);
        assert_eq!(key_schedule(&[0, 30], 2), vec![(0, 0), (30, 1), (60, 0), (90, 1), (120, 0)]);
    }

    #[test]
    fn validate_examples() {
        let chain = KinematicChain::pepper_right_arm();
        let keepout = KeepOutRegion::default();
        let inside = parse_sign(&doc(&wp(0.0, keepout.center()), "")).unwrap();
        assert_eq!(validate_sign(&inside, &chain, &keepout), vec![Diagnostic::KeepOutViolation { waypoint: 0 }]);

        let far = parse_sign(&doc(&wp(0.0, [2.0, 0.0, 0.0]), "")).unwrap();
        assert!(matches!(validate_sign(&far, &chain, &keepout)[..], [Diagnostic::LikelyUnreachable { waypoint: 0, .. }]));

        let q = [0.3, -0.4, 1.0, 0.8, 0.2];
        let p: [f64; 3] = forward(&chain, &q).unwrap().position.into();
        let free = parse_sign(&doc(&wp(0.0, p), "")).unwrap();
        assert!(!keepout.contains(&p));
        assert!(validate_sign(&free, &chain, &keepout).is_empty());
    }

    #[test]
    fn frames_from_times() {
        assert_eq!(time_to_frame(1.2, 25), 30);
        assert_eq!(time_to_frame(0.0, 25), 0);
        assert_eq!(time_to_frame(0.02, 25), 1);
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(waypoint_seed("AMARE", 0), waypoint_seed("AMARE", 0));
        assert_ne!(waypoint_seed("AMARE", 0), waypoint_seed("AMARE", 1));
        // FNV-1a reference value for the empty input
        assert_eq!(stable_hash(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(stable_hash(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}

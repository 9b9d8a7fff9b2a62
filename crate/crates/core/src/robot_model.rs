//! URDF subset parsing and serial chain extraction.
//!
//! Only the kinematic skeleton is read: links, `revolute` and `fixed` joints,
//! joint origins, axes and limits. Meshes, inertia and collision data are
//! skipped silently.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::Serialize;
use thiserror::Error;

/// Torso plus right arm, the chain the IK solver runs on.
pub const PEPPER_RIGHT_ARM_URDF: &str = include_str!("../data/pepper_right_arm.urdf");
/// Torso plus both arms. The left arm is the sagittal mirror of the right.
pub const PEPPER_TWO_ARMS_URDF: &str = include_str!("../data/pepper_two_arms.urdf");

pub const PEPPER_BASE_LINK: &str = "torso";
pub const PEPPER_RIGHT_TIP: &str = "r_gripper";
pub const PEPPER_LEFT_TIP: &str = "l_gripper";

const AXIS_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("joint `{joint}`: unsupported joint type `{kind}`")]
    UnsupportedJointType { joint: String, kind: String },
    #[error("joint `{joint}` references unknown link `{link}`")]
    DanglingLinkReference { joint: String, link: String },
    #[error("joint `{0}` has a non-unit axis")]
    NonUnitAxis(String),
    #[error("joint `{0}` has lower limit above upper limit")]
    InvertedLimits(String),
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },
    #[error("joint graph contains a cycle through link `{0}`")]
    Cycle(String),
    #[error("no kinematic path from `{base}` to `{tip}`")]
    NoPath { base: String, tip: String },
    #[error("link `{0}` has more than one parent joint; path is ambiguous")]
    AmbiguousPath(String),
    #[error("chain from `{base}` to `{tip}` has no revolute joint")]
    NoDof { base: String, tip: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Fixed,
}

impl JointKind {
    fn as_str(self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSpec {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Origin translation in the parent frame [m].
    pub origin_xyz: [f64; 3],
    /// Origin rotation as roll-pitch-yaw [rad].
    pub origin_rpy: [f64; 3],
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
}

impl JointSpec {
    pub fn origin(&self) -> Isometry3<f64> {
        let [x, y, z] = self.origin_xyz;
        let [r, p, yaw] = self.origin_rpy;
        Isometry3::from_parts(
            Translation3::new(x, y, z),
            UnitQuaternion::from_euler_angles(r, p, yaw),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    /// Non-fatal findings, e.g. limits defaulted to ±π.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

fn parse_triple(text: &str, joint: &str, what: &str) -> Result<[f64; 3], ModelError> {
    let parts: Vec<f64> = text
        .split_whitespace()
        .map(str::parse::<f64>)
        .collect::<Result<_, _>>()
        .map_err(|e| ModelError::MalformedXml(format!("joint `{joint}` {what}: {e}")))?;
    match parts.as_slice() {
        [a, b, c] if parts.iter().all(|v| v.is_finite()) => Ok([*a, *b, *c]),
        _ => Err(ModelError::MalformedXml(format!(
            "joint `{joint}` {what}: expected three finite numbers, got `{text}`"
        ))),
    }
}

fn parse_scalar(text: &str, joint: &str, what: &str) -> Result<f64, ModelError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ModelError::MalformedXml(format!("joint `{joint}` {what}: `{text}`")))
}

/// Parses a URDF document into a [`RobotModel`].
pub fn parse_urdf(text: &str) -> Result<RobotModel, ModelError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| ModelError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "robot" {
        return Err(ModelError::MalformedXml(format!(
            "expected <robot> root, found <{}>",
            root.tag_name().name()
        )));
    }
    let name = root.attribute("name").unwrap_or_default().to_string();

    let mut links = Vec::new();
    let mut link_names = HashSet::new();
    for node in root.children().filter(|n| n.has_tag_name("link")) {
        let link = node
            .attribute("name")
            .ok_or_else(|| ModelError::MalformedXml("<link> without name".into()))?;
        if !link_names.insert(link.to_string()) {
            return Err(ModelError::DuplicateName { kind: "link", name: link.into() });
        }
        links.push(LinkSpec { name: link.to_string() });
    }

    let mut joints = Vec::new();
    let mut warnings = Vec::new();
    let mut joint_names = HashSet::new();
    for node in root.children().filter(|n| n.has_tag_name("joint")) {
        let jname = node
            .attribute("name")
            .ok_or_else(|| ModelError::MalformedXml("<joint> without name".into()))?
            .to_string();
        if !joint_names.insert(jname.clone()) {
            return Err(ModelError::DuplicateName { kind: "joint", name: jname });
        }
        let kind = match node.attribute("type") {
            Some("revolute") => JointKind::Revolute,
            Some("fixed") => JointKind::Fixed,
            Some(other) => {
                return Err(ModelError::UnsupportedJointType { joint: jname, kind: other.into() })
            }
            None => {
                return Err(ModelError::MalformedXml(format!("joint `{jname}` has no type")))
            }
        };
        let link_attr = |tag: &str| -> Result<String, ModelError> {
            node.children()
                .find(|n| n.has_tag_name(tag))
                .and_then(|n| n.attribute("link"))
                .map(str::to_string)
                .ok_or_else(|| ModelError::MalformedXml(format!("joint `{jname}` lacks <{tag} link=…>")))
        };
        let parent = link_attr("parent")?;
        let child = link_attr("child")?;
        for link in [&parent, &child] {
            if !link_names.contains(link) {
                return Err(ModelError::DanglingLinkReference { joint: jname, link: link.clone() });
            }
        }

        let (mut origin_xyz, mut origin_rpy) = ([0.0; 3], [0.0; 3]);
        if let Some(origin) = node.children().find(|n| n.has_tag_name("origin")) {
            if let Some(xyz) = origin.attribute("xyz") {
                origin_xyz = parse_triple(xyz, &jname, "origin xyz")?;
            }
            if let Some(rpy) = origin.attribute("rpy") {
                origin_rpy = parse_triple(rpy, &jname, "origin rpy")?;
            }
        }

        let axis = match node.children().find(|n| n.has_tag_name("axis")).and_then(|n| n.attribute("xyz")) {
            Some(xyz) => parse_triple(xyz, &jname, "axis")?,
            None => [1.0, 0.0, 0.0],
        };
        let (mut lower, mut upper) = (0.0, 0.0);
        if kind == JointKind::Revolute {
            let norm = Vector3::from(axis).norm();
            if (norm - 1.0).abs() >= AXIS_NORM_TOLERANCE {
                return Err(ModelError::NonUnitAxis(jname));
            }
            match node.children().find(|n| n.has_tag_name("limit")) {
                Some(limit) => {
                    lower = limit.attribute("lower").map(|v| parse_scalar(v, &jname, "lower")).transpose()?.unwrap_or(0.0);
                    upper = limit.attribute("upper").map(|v| parse_scalar(v, &jname, "upper")).transpose()?.unwrap_or(0.0);
                }
                None => {
                    let msg = format!("joint `{jname}` has no <limit>; defaulting to ±π");
                    log::warn!("{msg}");
                    warnings.push(msg);
                    lower = -PI;
                    upper = PI;
                }
            }
            if lower > upper {
                return Err(ModelError::InvertedLimits(jname));
            }
        }

        joints.push(JointSpec { name: jname, kind, parent, child, origin_xyz, origin_rpy, axis, lower, upper });
    }

    let model = RobotModel { name, links, joints, warnings };
    model.check_acyclic()?;
    Ok(model)
}

impl RobotModel {
    fn check_acyclic(&self) -> Result<(), ModelError> {
        let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
        for j in &self.joints {
            children.entry(j.parent.as_str()).or_default().push(j.child.as_str());
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&str, u8> = HashMap::new();
        for start in self.links.iter().map(|l| l.name.as_str()) {
            if state.get(start).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            state.insert(start, 1);
            while let Some((link, idx)) = stack.pop() {
                let next = children.get(link).and_then(|c| c.get(idx)).copied();
                match next {
                    Some(child) => {
                        stack.push((link, idx + 1));
                        match state.get(child).copied().unwrap_or(0) {
                            1 => return Err(ModelError::Cycle(child.to_string())),
                            0 => {
                                state.insert(child, 1);
                                stack.push((child, 0));
                            }
                            _ => {}
                        }
                    }
                    None => {
                        state.insert(link, 2);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn joint(&self, name: &str) -> Option<&JointSpec> {
        self.joints.iter().find(|j| j.name == name)
    }

    /// Writes the model back out as URDF. Parsing the output yields an equal model.
    pub fn to_urdf(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(out, "<robot name=\"{}\">", xml_escape(&self.name));
        for link in &self.links {
            let _ = writeln!(out, "  <link name=\"{}\"/>", xml_escape(&link.name));
        }
        let triple = |v: [f64; 3]| format!("{:?} {:?} {:?}", v[0], v[1], v[2]);
        for j in &self.joints {
            let _ = writeln!(out, "  <joint name=\"{}\" type=\"{}\">", xml_escape(&j.name), j.kind.as_str());
            let _ = writeln!(out, "    <parent link=\"{}\"/>", xml_escape(&j.parent));
            let _ = writeln!(out, "    <child link=\"{}\"/>", xml_escape(&j.child));
            let _ = writeln!(out, "    <origin xyz=\"{}\" rpy=\"{}\"/>", triple(j.origin_xyz), triple(j.origin_rpy));
            if j.kind == JointKind::Revolute {
                let _ = writeln!(out, "    <axis xyz=\"{}\"/>", triple(j.axis));
                let _ = writeln!(out, "    <limit lower=\"{:?}\" upper=\"{:?}\"/>", j.lower, j.upper);
            }
            out.push_str("  </joint>\n");
        }
        out.push_str("</robot>\n");
        out
    }
}

pub(crate) fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// One revolute joint of a [`KinematicChain`], with all fixed transforms
/// between the previous revolute joint and this one folded into `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainJoint {
    pub name: String,
    pub origin: Isometry3<f64>,
    pub axis: Unit<Vector3<f64>>,
    pub lower: f64,
    pub upper: f64,
}

impl ChainJoint {
    pub fn clamp(&self, angle: f64) -> f64 {
        angle.clamp(self.lower, self.upper)
    }

    pub fn mid_range(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Serial revolute chain from a base link to a tip link.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    pub base: String,
    pub tip: String,
    pub joints: Vec<ChainJoint>,
    /// Constant transform from the last revolute joint to the tip frame.
    pub tip_offset: Isometry3<f64>,
}

impl KinematicChain {
    /// Degrees of freedom.
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }

    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.joints.iter().map(|j| (j.lower, j.upper)).collect()
    }

    /// Sum of the translation lengths from the first joint to the tip; an
    /// upper bound on the distance the tip can get from the first joint.
    pub fn reach(&self) -> f64 {
        self.joints.iter().skip(1).map(|j| j.origin.translation.vector.norm()).sum::<f64>()
            + self.tip_offset.translation.vector.norm()
    }

    /// Position of the first joint in the base frame (it does not move with q).
    pub fn root_position(&self) -> Vector3<f64> {
        self.joints[0].origin.translation.vector
    }

    /// The Pepper torso + right arm chain bundled with the crate.
    pub fn pepper_right_arm() -> Self {
        let model = parse_urdf(PEPPER_RIGHT_ARM_URDF).expect("bundled fixture parses");
        build_chain(&model, PEPPER_BASE_LINK, PEPPER_RIGHT_TIP).expect("bundled fixture chain")
    }
}

/// Extracts the unique path `base → tip` and folds fixed joints into constants.
pub fn build_chain(model: &RobotModel, base: &str, tip: &str) -> Result<KinematicChain, ModelError> {
    let no_path = || ModelError::NoPath { base: base.into(), tip: tip.into() };
    let known: HashSet<&str> = model.links.iter().map(|l| l.name.as_str()).collect();
    if !known.contains(base) || !known.contains(tip) {
        return Err(no_path());
    }
    if base == tip {
        return Err(ModelError::NoDof { base: base.into(), tip: tip.into() });
    }

    let mut parents: BTreeMap<&str, Vec<&JointSpec>> = BTreeMap::new();
    for j in &model.joints {
        parents.entry(j.child.as_str()).or_default().push(j);
    }

    // Walk upward from the tip; each link must have exactly one parent joint.
    let mut path = Vec::new();
    let mut link = tip;
    while link != base {
        let joint = match parents.get(link).map(Vec::as_slice) {
            None | Some([]) => return Err(no_path()),
            Some([single]) => *single,
            Some(_) => return Err(ModelError::AmbiguousPath(link.to_string())),
        };
        path.push(joint);
        link = joint.parent.as_str();
        if path.len() > model.joints.len() {
            return Err(ModelError::Cycle(link.to_string()));
        }
    }
    path.reverse();

    let mut joints = Vec::new();
    let mut pending = Isometry3::identity();
    for j in path {
        pending *= j.origin();
        if j.kind == JointKind::Revolute {
            joints.push(ChainJoint {
                name: j.name.clone(),
                origin: pending,
                axis: Unit::new_normalize(Vector3::from(j.axis)),
                lower: j.lower,
                upper: j.upper,
            });
            pending = Isometry3::identity();
        }
    }
    if joints.is_empty() {
        return Err(ModelError::NoDof { base: base.into(), tip: tip.into() });
    }
    Ok(KinematicChain { base: base.into(), tip: tip.into(), joints, tip_offset: pending })
}

//! Gloss sequences composed into one animation.
//!
//! Layout of a composed sentence, in frames:
//!
//! ```text
//! rest | lead-in | sign 1 | transition | sign 2 | ... | sign n | lead-out | rest
//! ```
//!
//! Sign keys are copied with their tangents, so each sign segment samples
//! exactly like the standalone sign. Keys added at segment boundaries get
//! flat handles, which is also what a standalone sign has at its ends.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::animation::{ActuatorCurve, Animation, AnimationError, Key, Tangent};
use crate::kinematics::HandState;
use crate::lexicon::HandMapping;

pub const DEFAULT_TRANSITION_FRAMES: u32 = 10;
pub const DEFAULT_LEAD_FRAMES: u32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SentenceError {
    #[error("unknown gloss `{0}`")]
    UnknownGloss(String),
    #[error("sign `{gloss}` runs at {found} fps, sentence at {expected} fps")]
    FpsMismatch { gloss: String, expected: u32, found: u32 },
    #[error("invalid sentence: {0}")]
    Invalid(String),
    #[error(transparent)]
    Animation(#[from] AnimationError),
}

fn default_transition() -> u32 {
    DEFAULT_TRANSITION_FRAMES
}

fn default_lead() -> u32 {
    DEFAULT_LEAD_FRAMES
}

/// Sentence file contents (`<name>.sentence.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceDocument {
    pub glosses: Vec<String>,
    #[serde(default = "default_transition")]
    pub transition_frames: u32,
    /// Per-boundary overrides; must have `glosses.len() - 1` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<u32>>,
    #[serde(default = "default_lead")]
    pub lead_in_frames: u32,
    #[serde(default = "default_lead")]
    pub lead_out_frames: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlossSentence {
    pub glosses: Vec<String>,
    /// Frames between consecutive signs, one per boundary.
    pub transitions: Vec<u32>,
    pub lead_in: u32,
    pub lead_out: u32,
}

impl GlossSentence {
    pub fn uniform(glosses: Vec<String>, transition: u32, lead_in: u32, lead_out: u32) -> Self {
        let transitions = vec![transition; glosses.len().saturating_sub(1)];
        Self { glosses, transitions, lead_in, lead_out }
    }

    pub fn from_document(doc: SentenceDocument) -> Result<Self, SentenceError> {
        let boundaries = doc.glosses.len().saturating_sub(1);
        let transitions = match doc.transitions {
            Some(t) if t.len() != boundaries => {
                return Err(SentenceError::Invalid(format!("expected {boundaries} transitions, got {}", t.len())))
            }
            Some(t) => t,
            None => vec![doc.transition_frames; boundaries],
        };
        Ok(Self { glosses: doc.glosses, transitions, lead_in: doc.lead_in_frames, lead_out: doc.lead_out_frames })
    }

    pub fn parse(text: &str) -> Result<Self, SentenceError> {
        let doc: SentenceDocument = serde_json::from_str(text).map_err(|e| SentenceError::Invalid(e.to_string()))?;
        Self::from_document(doc)
    }
}

/// Subject-object-verb ordering.
pub fn sov_order(subject: &str, object: &str, verb: &str) -> Vec<String> {
    vec![subject.to_string(), object.to_string(), verb.to_string()]
}

/// Joint posture the robot starts from and returns to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RestPosture {
    /// Joint angles [rad]; unlisted joints rest at 0.
    pub joints: BTreeMap<String, f64>,
    pub hand_state: HandState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ComposeOptions {
    pub rest: RestPosture,
    pub hand: HandMapping,
}

impl ComposeOptions {
    /// Rest value of an actuator in its curve unit.
    pub fn rest_value(&self, actuator: &str) -> f64 {
        if self.hand.is_hand(actuator) {
            self.hand.value(self.rest.hand_state)
        } else {
            self.rest.joints.get(actuator).copied().unwrap_or(0.0).to_degrees()
        }
    }
}

/// Appends `key`, merging with the previous key when both land on one frame.
fn push_key(keys: &mut Vec<Key>, key: Key) {
    match keys.last_mut() {
        Some(prev) if prev.frame == key.frame => {
            prev.value = key.value;
            prev.right = key.right;
        }
        _ => keys.push(key),
    }
}

fn bare_key(frame: u32, value: f64) -> Key {
    Key { frame, value, left: None, right: None }
}

/// Concatenates compiled signs with rest lead-in/out and flat transitions.
pub fn compose(
    sentence: &GlossSentence,
    signs: &BTreeMap<String, Animation>,
    options: &ComposeOptions,
) -> Result<Animation, SentenceError> {
    if sentence.glosses.is_empty() {
        return Err(SentenceError::Invalid("sentence has no glosses".into()));
    }
    if sentence.transitions.len() != sentence.glosses.len() - 1 {
        return Err(SentenceError::Invalid("one transition per gloss boundary required".into()));
    }
    if sentence.transitions.contains(&0) {
        return Err(SentenceError::Invalid("transitions must be at least one frame".into()));
    }
    let parts: Vec<&Animation> = sentence
        .glosses
        .iter()
        .map(|g| signs.get(g).ok_or_else(|| SentenceError::UnknownGloss(g.clone())))
        .collect::<Result<_, _>>()?;
    let fps = parts[0].fps;
    for (gloss, anim) in sentence.glosses.iter().zip(&parts) {
        if anim.fps != fps {
            return Err(SentenceError::FpsMismatch { gloss: gloss.clone(), expected: fps, found: anim.fps });
        }
        anim.validate()?;
    }

    let mut offsets = Vec::with_capacity(parts.len());
    let mut cursor = sentence.lead_in;
    for (i, anim) in parts.iter().enumerate() {
        offsets.push(cursor);
        cursor += anim.last_frame() + sentence.transitions.get(i).copied().unwrap_or(0);
    }
    let end = cursor + sentence.lead_out;

    // actuators in order of first appearance
    let mut templates: Vec<&ActuatorCurve> = Vec::new();
    for anim in &parts {
        for c in &anim.curves {
            if !templates.iter().any(|t| t.actuator == c.actuator) {
                templates.push(c);
            }
        }
    }

    let mut out = Animation::new(fps);
    for template in templates {
        let rest = options.rest_value(&template.actuator);
        let mut keys: Vec<Key> = Vec::new();
        let mut current = rest;
        if sentence.lead_in > 0 {
            keys.push(bare_key(0, rest));
        }
        for (anim, &offset) in parts.iter().zip(&offsets) {
            let duration = anim.last_frame();
            match anim.curve(&template.actuator) {
                Some(curve) => {
                    if curve.first_frame() > 0 {
                        push_key(&mut keys, bare_key(offset, curve.keys[0].value));
                    }
                    for k in &curve.keys {
                        push_key(&mut keys, Key { frame: k.frame + offset, ..k.clone() });
                    }
                    current = curve.keys[curve.keys.len() - 1].value;
                    if curve.last_frame() < duration {
                        push_key(&mut keys, bare_key(offset + duration, current));
                    }
                }
                None => {
                    push_key(&mut keys, bare_key(offset, current));
                    push_key(&mut keys, bare_key(offset + duration, current));
                }
            }
        }
        if sentence.lead_out > 0 {
            push_key(&mut keys, bare_key(end, rest));
        }

        let last = keys.len() - 1;
        for i in 0..keys.len() {
            if i == 0 {
                keys[i].left = None;
            } else if keys[i].left.is_none() {
                keys[i].left = Some(Tangent::flat(-f64::from(keys[i].frame - keys[i - 1].frame) / 3.0));
            }
            if i == last {
                keys[i].right = None;
            } else if keys[i].right.is_none() {
                keys[i].right = Some(Tangent::flat(f64::from(keys[i + 1].frame - keys[i].frame) / 3.0));
            }
        }
        out.curves.push(ActuatorCurve {
            actuator: template.actuator.clone(),
            unit: template.unit.clone(),
            mute: template.mute,
            keys,
        });
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sign(points: &[(u32, f64)]) -> Animation {
        Animation { fps: 25, curves: vec![ActuatorCurve::auto("A", points).unwrap()] }
    }

    #[test]
    fn sov() {
        assert_eq!(sov_order("IO", "MELA", "MANGIARE"), ["IO", "MELA", "MANGIARE"]);
        assert_eq!(sov_order("IO", "CASA", "ANDARE"), ["IO", "CASA", "ANDARE"]);
        assert_eq!(sov_order("B", "C", "A").last().map(String::as_str), Some("A"));
    }

    #[test]
    fn single_gloss_identity() {
        let a = sign(&[(0, 1.0), (10, 5.0), (25, -2.0)]);
        let signs = BTreeMap::from([("X".to_string(), a.clone())]);
        let s = GlossSentence::uniform(vec!["X".into()], 10, 0, 0);
        assert_eq!(compose(&s, &signs, &ComposeOptions::default()).unwrap(), a);
    }

    #[test]
    fn absent_actuators_hold() {
        let mut two = sign(&[(0, 1.0), (10, 2.0)]);
        two.curves.push(ActuatorCurve::auto("B", &[(0, 7.0), (10, 8.0)]).unwrap());
        let signs = BTreeMap::from([("ONE".to_string(), sign(&[(0, 3.0), (20, 4.0)])), ("TWO".to_string(), two)]);
        let s = GlossSentence::uniform(vec!["ONE".into(), "TWO".into()], 5, 4, 6);
        let out = compose(&s, &signs, &ComposeOptions::default()).unwrap();
        assert_eq!(out.last_frame(), 4 + 20 + 5 + 10 + 6);
        let b = out.curve("B").unwrap();
        // rest through ONE, explicit holds at ONE's start and end
        assert_eq!(b.points()[..3], [(0, 0.0), (4, 0.0), (24, 0.0)]);
        assert_eq!(b.sample(10.0), 0.0);
        assert_eq!(b.sample(29.0 + 10.0), 8.0);
    }

    #[test]
    fn errors() {
        let signs = BTreeMap::from([("X".to_string(), sign(&[(0, 1.0)]))]);
        let s = GlossSentence::uniform(vec!["X".into(), "Y".into()], 10, 0, 0);
        assert_eq!(compose(&s, &signs, &ComposeOptions::default()).unwrap_err(), SentenceError::UnknownGloss("Y".into()));
        let mut slow = sign(&[(0, 1.0)]);
        slow.fps = 30;
        let signs = BTreeMap::from([("X".to_string(), sign(&[(0, 1.0)])), ("Y".to_string(), slow)]);
        assert!(matches!(compose(&s, &signs, &ComposeOptions::default()), Err(SentenceError::FpsMismatch { .. })));
        let s = GlossSentence::uniform(vec!["X".into(), "X".into()], 0, 0, 0);
        assert!(matches!(compose(&s, &signs, &ComposeOptions::default()), Err(SentenceError::Invalid(_))));
    }

    #[test]
    fn document_defaults() {
        let s = GlossSentence::parse(r#"{"glosses": ["A", "B", "C"]}"#).unwrap();
        assert_eq!(s.transitions, vec![DEFAULT_TRANSITION_FRAMES; 2]);
        assert_eq!((s.lead_in, s.lead_out), (DEFAULT_LEAD_FRAMES, DEFAULT_LEAD_FRAMES));
        assert!(GlossSentence::parse(r#"{"glosses": ["A", "B"], "transitions": [1, 2]}"#).is_err());
    }
}

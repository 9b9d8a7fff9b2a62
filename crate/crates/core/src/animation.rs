//! Keyframe curves with automatic Bezier tangents.
//!
//! Every key carries up to two tangent handles. A handle is an offset from
//! its key: `abscissa` in frames (negative on the left side, positive on the
//! right) and `ordinate` in the curve's unit. A segment between two keys is
//! the cubic Bezier through the key, its right handle, the next key's left
//! handle and the next key.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnimationError {
    #[error("key frames must be strictly increasing (frame {0} follows {1})")]
    NonMonotoneFrames(u32, u32),
    #[error("curve has no keys")]
    EmptyKeys,
    #[error("animation has no curves")]
    EmptyAnimation,
    #[error("fps must be positive")]
    ZeroFps,
    #[error("duplicate actuator `{0}`")]
    DuplicateActuator(String),
    #[error("actuator `{actuator}`: {reason}")]
    BadTangents { actuator: String, reason: String },
    #[error("non-finite value on actuator `{0}`")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    BezierAuto,
}

impl Interpolation {
    pub fn as_str(self) -> &'static str {
        match self {
            Interpolation::BezierAuto => "bezier_auto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    /// Offset along the frame axis; ≤ 0 for left handles, ≥ 0 for right ones.
    pub abscissa: f64,
    /// Offset along the value axis.
    pub ordinate: f64,
    #[serde(default)]
    pub interp: Interpolation,
}

impl Tangent {
    pub fn new(abscissa: f64, ordinate: f64) -> Self {
        Self { abscissa, ordinate, interp: Interpolation::BezierAuto }
    }

    /// A flat handle reaching `abscissa` frames away.
    pub fn flat(abscissa: f64) -> Self {
        Self::new(abscissa, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Key {
    pub frame: u32,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<Tangent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Tangent>,
}

pub const DEGREE: &str = "degree";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorCurve {
    pub actuator: String,
    pub unit: String,
    #[serde(default)]
    pub mute: bool,
    pub keys: Vec<Key>,
}

/// Builds auto-tangent keys from `(frame, value)` pairs.
///
/// Both handles of a segment reach the same distance along the frame axis:
/// a third of the segment's gap, shortened to a third of the previous
/// segment's gap when that one is narrower (gaps 30, 20, 30 give handle
/// lengths 10, 20/3, 20/3). The slope at an interior key is the Catmull-Rom
/// slope, forced to zero where the key is a local extremum or equals a
/// neighbour; endpoint slopes are zero.
pub fn auto_tangent_keys(points: &[(u32, f64)]) -> Result<Vec<Key>, AnimationError> {
    if points.is_empty() {
        return Err(AnimationError::EmptyKeys);
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(AnimationError::NonMonotoneFrames(w[1].0, w[0].0));
        }
    }
    let gaps: Vec<f64> = points.windows(2).map(|w| f64::from(w[1].0 - w[0].0)).collect();
    let reach: Vec<f64> =
        gaps.iter().enumerate().map(|(s, &g)| if s == 0 { g } else { g.min(gaps[s - 1]) } / 3.0).collect();

    let last = points.len() - 1;
    let keys = points
        .iter()
        .enumerate()
        .map(|(i, &(frame, value))| {
            let slope = if i == 0 || i == last {
                0.0
            } else {
                let (f0, v0) = points[i - 1];
                let (f2, v2) = points[i + 1];
                if (value - v0) * (v2 - value) <= 0.0 {
                    0.0
                } else {
                    (v2 - v0) / f64::from(f2 - f0)
                }
            };
            let left = (i > 0).then(|| Tangent::new(-reach[i - 1], -slope * reach[i - 1]));
            let right = (i < last).then(|| Tangent::new(reach[i], slope * reach[i]));
            Key { frame, value, left, right }
        })
        .collect();
    Ok(keys)
}

impl ActuatorCurve {
    /// A curve in degrees with auto tangents.
    pub fn auto(actuator: impl Into<String>, points: &[(u32, f64)]) -> Result<Self, AnimationError> {
        Self::auto_with_unit(actuator, DEGREE, points)
    }

    pub fn auto_with_unit(
        actuator: impl Into<String>,
        unit: impl Into<String>,
        points: &[(u32, f64)],
    ) -> Result<Self, AnimationError> {
        Ok(Self { actuator: actuator.into(), unit: unit.into(), mute: false, keys: auto_tangent_keys(points)? })
    }

    pub fn points(&self) -> Vec<(u32, f64)> {
        self.keys.iter().map(|k| (k.frame, k.value)).collect()
    }

    pub fn first_frame(&self) -> u32 {
        self.keys.first().map_or(0, |k| k.frame)
    }

    pub fn last_frame(&self) -> u32 {
        self.keys.last().map_or(0, |k| k.frame)
    }

    pub fn validate(&self) -> Result<(), AnimationError> {
        let bad = |reason: &str| AnimationError::BadTangents { actuator: self.actuator.clone(), reason: reason.into() };
        if self.keys.is_empty() {
            return Err(AnimationError::EmptyKeys);
        }
        for w in self.keys.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(AnimationError::NonMonotoneFrames(w[1].frame, w[0].frame));
            }
        }
        let last = self.keys.len() - 1;
        for (i, key) in self.keys.iter().enumerate() {
            let finite = key.value.is_finite()
                && [key.left, key.right].iter().flatten().all(|t| t.abscissa.is_finite() && t.ordinate.is_finite());
            if !finite {
                return Err(AnimationError::NonFinite(self.actuator.clone()));
            }
            if (i > 0) != key.left.is_some() {
                return Err(bad("only non-first keys carry a left tangent"));
            }
            if (i < last) != key.right.is_some() {
                return Err(bad("only non-last keys carry a right tangent"));
            }
            if let Some(t) = key.left {
                let gap = f64::from(key.frame - self.keys[i - 1].frame);
                if t.abscissa > 0.0 || -t.abscissa > gap {
                    return Err(bad("left tangent abscissa out of range"));
                }
            }
            if let Some(t) = key.right {
                let gap = f64::from(self.keys[i + 1].frame - key.frame);
                if t.abscissa < 0.0 || t.abscissa > gap {
                    return Err(bad("right tangent abscissa out of range"));
                }
            }
        }
        Ok(())
    }

    /// Value at `frame`, clamped to the curve's key span.
    pub fn sample(&self, frame: f64) -> f64 {
        let keys = &self.keys;
        let Some(first) = keys.first() else { return f64::NAN };
        let last = &keys[keys.len() - 1];
        if keys.len() == 1 || frame <= f64::from(first.frame) {
            return first.value;
        }
        if frame >= f64::from(last.frame) {
            return last.value;
        }
        // index of the segment start: last key with key.frame <= frame
        let i = keys.partition_point(|k| f64::from(k.frame) <= frame) - 1;
        let (a, b) = (&keys[i], &keys[i + 1]);
        if f64::from(a.frame) == frame {
            return a.value;
        }
        // Work in segment-local frames so shifted copies of a curve sample identically.
        let gap = f64::from(b.frame - a.frame);
        let local = frame - f64::from(a.frame);
        let right = a.right.unwrap_or(Tangent::flat(0.0));
        let left = b.left.unwrap_or(Tangent::flat(0.0));
        let (x1, y1) = (right.abscissa, a.value + right.ordinate);
        let (x2, y2) = (gap + left.abscissa, b.value + left.ordinate);
        let t = invert_monotone(|t| bezier(0.0, x1, x2, gap, t), local);
        bezier(a.value, y1, y2, b.value, t)
    }
}

fn bezier(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let s = 1.0 - t;
    s * s * s * p0 + 3.0 * s * s * t * p1 + 3.0 * s * t * t * p2 + t * t * t * p3
}

/// Bisection for `x(t) = target` on [0, 1] down to 1e-9 frames.
fn invert_monotone(x: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let xm = x(mid);
        if (xm - target).abs() <= 1e-9 {
            return mid;
        }
        if xm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Animation {
    pub fps: u32,
    pub curves: Vec<ActuatorCurve>,
}

impl Animation {
    pub fn new(fps: u32) -> Self {
        Self { fps, curves: Vec::new() }
    }

    pub fn curve(&self, actuator: &str) -> Option<&ActuatorCurve> {
        self.curves.iter().find(|c| c.actuator == actuator)
    }

    pub fn actuators(&self) -> Vec<&str> {
        self.curves.iter().map(|c| c.actuator.as_str()).collect()
    }

    /// Last key frame over all curves.
    pub fn last_frame(&self) -> u32 {
        self.curves.iter().map(ActuatorCurve::last_frame).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), AnimationError> {
        if self.fps == 0 {
            return Err(AnimationError::ZeroFps);
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.curves {
            if !seen.insert(c.actuator.as_str()) {
                return Err(AnimationError::DuplicateActuator(c.actuator.clone()));
            }
            c.validate()?;
        }
        Ok(())
    }

    /// Samples every curve at `frame`; each curve clamps to its own key span.
    pub fn sample(&self, frame: f64) -> Result<BTreeMap<String, f64>, AnimationError> {
        if self.curves.is_empty() {
            return Err(AnimationError::EmptyAnimation);
        }
        Ok(self.curves.iter().map(|c| (c.actuator.clone(), c.sample(frame))).collect())
    }
}

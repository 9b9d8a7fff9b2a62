//! Regenerates `demo_lexicon/` from joint-space keyframes.
//!
//! Each waypoint is the forward kinematics of an in-limit right-arm
//! configuration, so every target is reachable by construction.
//!
//! ```text
//! cargo run -p signforge --example gen_demo_lexicon -- demo_lexicon
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use signforge::kinematics::{forward, DEFAULT_WEIGHTS};
use signforge::lexicon::{sign_path, validate_sign, ArmHold, KeepOutRegion, SignDefinition, Waypoint};
use signforge::{HandState, KinematicChain};

use HandState::{Closed, Neutral, Open};

struct Demo {
    gloss: &'static str,
    category: &'static str,
    two_handed: bool,
    mirrored: bool,
    repetitions: u32,
    /// (seconds, [shoulder pitch, shoulder roll, elbow yaw, elbow roll, wrist yaw] in degrees, hand)
    keys: &'static [(f64, [f64; 5], HandState)],
    left_hold: Option<[f64; 5]>,
}

const DEMOS: &[Demo] = &[
    Demo {
        gloss: "IO",
        category: "pronoun",
        two_handed: false,
        mirrored: false,
        repetitions: 1,
        keys: &[(0.0, [20.0, -10.0, 70.0, 60.0, 0.0], Closed), (0.6, [10.0, -5.0, 80.0, 80.0, 0.0], Closed)],
        left_hold: None,
    },
    Demo {
        gloss: "MELA",
        category: "noun",
        two_handed: false,
        mirrored: false,
        repetitions: 1,
        keys: &[
            (0.0, [-30.0, -15.0, 60.0, 85.0, -40.0], Closed),
            (0.4, [-30.0, -15.0, 60.0, 85.0, 10.0], Closed),
            (0.8, [-30.0, -15.0, 60.0, 85.0, -40.0], Closed),
        ],
        left_hold: None,
    },
    Demo {
        gloss: "MANGIARE",
        category: "verb",
        two_handed: false,
        mirrored: false,
        repetitions: 2,
        keys: &[(0.0, [0.0, -20.0, 70.0, 60.0, 0.0], Neutral), (0.4, [-25.0, -15.0, 70.0, 88.0, 0.0], Neutral)],
        left_hold: None,
    },
    Demo {
        gloss: "FATTO",
        category: "verb",
        two_handed: true,
        mirrored: true,
        repetitions: 1,
        keys: &[(0.0, [10.0, -10.0, 90.0, 70.0, 30.0], Closed), (0.5, [0.0, -45.0, 30.0, 20.0, -60.0], Open)],
        left_hold: None,
    },
    Demo {
        gloss: "CASA",
        category: "noun",
        two_handed: true,
        mirrored: true,
        repetitions: 1,
        keys: &[
            (0.0, [-40.0, -5.0, 80.0, 60.0, -80.0], Open),
            (0.5, [-10.0, -30.0, 70.0, 45.0, -80.0], Open),
            (1.0, [10.0, -35.0, 60.0, 30.0, -80.0], Open),
        ],
        left_hold: None,
    },
    Demo {
        gloss: "STUDIARE",
        category: "verb",
        two_handed: false,
        mirrored: false,
        repetitions: 1,
        keys: &[
            (0.0, [15.0, -25.0, 100.0, 50.0, 0.0], Open),
            (0.4, [5.0, -25.0, 100.0, 60.0, 0.0], Open),
            (0.8, [15.0, -25.0, 100.0, 50.0, 0.0], Open),
        ],
        left_hold: None,
    },
    Demo {
        gloss: "ANDARE",
        category: "verb",
        two_handed: true,
        mirrored: false,
        repetitions: 1,
        keys: &[(0.0, [20.0, -15.0, 60.0, 50.0, 0.0], Neutral), (0.8, [-5.0, -40.0, 30.0, 20.0, 0.0], Open)],
        left_hold: Some([60.0, 10.0, -40.0, -30.0, 0.0]),
    },
    Demo {
        gloss: "ACQUA",
        category: "noun",
        two_handed: false,
        mirrored: false,
        repetitions: 2,
        keys: &[(0.0, [-20.0, -10.0, 50.0, 85.0, 0.0], Closed), (0.32, [-28.0, -10.0, 50.0, 85.0, 0.0], Closed)],
        left_hold: None,
    },
    Demo {
        gloss: "IDEA",
        category: "noun",
        two_handed: false,
        mirrored: false,
        repetitions: 1,
        keys: &[(0.0, [-50.0, -20.0, 70.0, 85.0, 0.0], Closed), (0.6, [-60.0, -45.0, 40.0, 50.0, 20.0], Open)],
        left_hold: None,
    },
    Demo {
        gloss: "AMARE",
        category: "verb",
        two_handed: true,
        mirrored: true,
        repetitions: 2,
        keys: &[(0.0, [20.0, -5.0, 80.0, 75.0, 0.0], Closed), (0.5, [30.0, -10.0, 100.0, 60.0, 30.0], Closed)],
        left_hold: None,
    },
];

fn round(x: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    let r = (x * s).round() / s;
    if r == 0.0 { 0.0 } else { r }
}

fn waypoint(chain: &KinematicChain, time: f64, deg: &[f64; 5], hand_state: HandState) -> Waypoint {
    let q: Vec<f64> = deg.iter().map(|d| d.to_radians()).collect();
    let pose = forward(chain, &q).unwrap();
    let c = pose.orientation.coords;
    Waypoint {
        time,
        position: pose.position.map(|v| round(v, 4)).into(),
        orientation: [c.w, c.x, c.y, c.z].map(|v| round(v, 8)),
        weights: DEFAULT_WEIGHTS,
        hand_state,
    }
}

/// Puts arrays of numbers on one line.
fn compact_arrays(pretty: &str) -> String {
    let lines: Vec<&str> = pretty.lines().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if line.ends_with('[') {
            let close = lines[i + 1..].iter().position(|l| l.trim().starts_with(']')).map(|p| p + i + 1);
            if let Some(close) = close {
                let items: Vec<&str> = lines[i + 1..close].iter().map(|l| l.trim().trim_end_matches(',')).collect();
                if items.iter().all(|t| t.parse::<f64>().is_ok()) {
                    out.push_str(&format!("{line}{}{}\n", items.join(", "), lines[close].trim()));
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_str(line);
        out.push('\n');
        i += 1;
    }
    out
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo_lexicon".into()));
    std::fs::create_dir_all(&out).unwrap();
    let chain = KinematicChain::pepper_right_arm();
    let keepout = KeepOutRegion::pepper_tablet();
    for demo in DEMOS {
        for (_, deg, _) in demo.keys {
            let within = deg.iter().zip(&chain.joints).all(|(d, j)| (j.lower..=j.upper).contains(&d.to_radians()));
            assert!(within, "{}: {deg:?} outside joint limits", demo.gloss);
        }
        let left_hold = demo.left_hold.map(|deg| ArmHold {
            joints: ["LShoulderPitch", "LShoulderRoll", "LElbowYaw", "LElbowRoll", "LWristYaw"]
                .iter()
                .zip(deg)
                .map(|(name, d)| (name.to_string(), round(d.to_radians(), 6)))
                .collect::<BTreeMap<_, _>>(),
            hand_state: Neutral,
        });
        let sign = SignDefinition {
            gloss: demo.gloss.into(),
            category: demo.category.into(),
            two_handed: demo.two_handed,
            mirrored: demo.mirrored,
            repetitions: demo.repetitions,
            manual_only: false,
            waypoints: demo.keys.iter().map(|(t, deg, hand)| waypoint(&chain, *t, deg, *hand)).collect(),
            left_hold,
        };
        let diagnostics = validate_sign(&sign, &chain, &keepout);
        assert!(diagnostics.is_empty(), "{}: {diagnostics:?}", demo.gloss);
        let text = compact_arrays(&serde_json::to_string_pretty(&sign).unwrap());
        std::fs::write(sign_path(&out, demo.gloss), text).unwrap();
    }
    println!("wrote {} signs to {}", DEMOS.len(), out.display());
}

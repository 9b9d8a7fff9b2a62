use std::path::{Path, PathBuf};

use signforge::animation::Animation;
use signforge::kinematics::{forward, MirrorMap};
use signforge::lexicon::{
    compile_lexicon, compile_sign, load_gloss, parse_sign, sign_files, time_to_frame, validate_sign, CompileOptions,
    CompileStatus, Diagnostic, KeepOutRegion, LexiconError, SignDefinition,
};
use signforge::qanim::emit_qanim;
use signforge::KinematicChain;

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo_lexicon")
}

fn demo_signs() -> Vec<SignDefinition> {
    sign_files(&demo_dir()).unwrap().iter().map(|p| signforge::lexicon::load_sign(p).unwrap()).collect()
}

fn compile(sign: &SignDefinition, options: &CompileOptions) -> Result<Animation, LexiconError> {
    compile_sign(sign, &KinematicChain::pepper_right_arm(), &MirrorMap::pepper_default(), options).map(|(a, _)| a)
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn demo_lexicon_is_fully_automated_and_reproducible() {
    let chain = KinematicChain::pepper_right_arm();
    let map = MirrorMap::pepper_default();
    let options = CompileOptions::default();
    let count = sign_files(&demo_dir()).unwrap().len();
    assert_eq!(count, 10);

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = compile_lexicon(&demo_dir(), a.path(), &chain, &map, &options).unwrap();
    let second = compile_lexicon(&demo_dir(), b.path(), &chain, &map, &options).unwrap();
    assert_eq!((first.automated, first.failed, first.skipped), (count, 0, 0), "{:#?}", first.entries);
    assert_eq!(second.automated, count);
    let (fa, fb) = (read_dir_bytes(a.path()), read_dir_bytes(b.path()));
    assert_eq!(fa.len(), count);
    assert_eq!(fa, fb);
}

#[test]
fn demo_signs_are_clean() {
    let chain = KinematicChain::pepper_right_arm();
    for sign in demo_signs() {
        assert_eq!(validate_sign(&sign, &chain, &KeepOutRegion::default()), vec![], "{}", sign.gloss);
    }
}

#[test]
fn empty_directory_gives_empty_report() {
    let (src, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let report = compile_lexicon(
        src.path(),
        out.path(),
        &KinematicChain::pepper_right_arm(),
        &MirrorMap::pepper_default(),
        &CompileOptions::default(),
    )
    .unwrap();
    assert!(report.entries.is_empty());
    assert_eq!(std::fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn manual_only_sign_is_skipped() {
    let (src, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for gloss in ["IO", "MELA"] {
        let mut sign = load_gloss(&demo_dir(), gloss).unwrap().unwrap();
        sign.manual_only = gloss == "MELA";
        let text = serde_json::to_string(&sign).unwrap();
        std::fs::write(signforge::lexicon::sign_path(src.path(), gloss), text).unwrap();
    }
    let report = compile_lexicon(
        src.path(),
        out.path(),
        &KinematicChain::pepper_right_arm(),
        &MirrorMap::pepper_default(),
        &CompileOptions::default(),
    )
    .unwrap();
    assert_eq!((report.automated, report.skipped), (1, 1));
    let mela = report.entries.iter().find(|e| e.name == "MELA").unwrap();
    assert_eq!(mela.status, CompileStatus::Skipped);
    assert_eq!(read_dir_bytes(out.path()).len(), 1);
}

#[test]
fn compilation_is_deterministic() {
    for sign in demo_signs() {
        let a = emit_qanim(&compile(&sign, &CompileOptions::default()).unwrap()).unwrap();
        let b = emit_qanim(&compile(&sign, &CompileOptions::default()).unwrap()).unwrap();
        assert_eq!(a, b, "{}", sign.gloss);
    }
}

#[test]
fn mirrored_left_arm_follows_right_arm() {
    let map = MirrorMap::pepper_default();
    let mirrored: Vec<_> = demo_signs().into_iter().filter(|s| s.mirrored).collect();
    assert!(mirrored.len() >= 2);
    for sign in mirrored {
        let anim = compile(&sign, &CompileOptions::default()).unwrap();
        for entry in &map.entries {
            let right = anim.curve(&entry.source).unwrap();
            let left = anim.curve(&entry.target).unwrap();
            for f in 0..=anim.last_frame() {
                let f = f64::from(f);
                let expected = f64::from(entry.sign) * right.sample(f);
                assert!((left.sample(f) - expected).abs() <= 1e-9, "{} {} at {f}", sign.gloss, entry.target);
            }
        }
    }
}

#[test]
fn waypoint_times_map_to_key_frames() {
    let options = CompileOptions::default();
    let fps = f64::from(options.fps);
    for sign in demo_signs() {
        let anim = compile(&sign, &options).unwrap();
        let frames: Vec<u32> = anim.curves[0].keys.iter().map(|k| k.frame).collect();
        for wp in &sign.waypoints {
            let f = time_to_frame(wp.time, options.fps);
            assert!(frames.contains(&f), "{}: no key at {f}", sign.gloss);
            assert!((f64::from(f) / fps - wp.time).abs() <= 0.5 / fps + 1e-12);
        }
    }
}

#[test]
fn repeated_signs_replay_the_first_half() {
    let repeated: Vec<_> = demo_signs().into_iter().filter(|s| s.repetitions == 2).collect();
    assert!(!repeated.is_empty());
    for sign in repeated {
        let anim = compile(&sign, &CompileOptions::default()).unwrap();
        let d = anim.last_frame() / 2;
        for curve in &anim.curves {
            let first: Vec<(u32, f64)> = curve.points().into_iter().filter(|p| p.0 <= d).collect();
            let second: Vec<(u32, f64)> =
                curve.points().into_iter().filter(|p| p.0 >= d).map(|(f, v)| (f - d, v)).collect();
            assert_eq!(first, second, "{} {}", sign.gloss, curve.actuator);
        }
    }
}

#[test]
fn strict_mode_refuses_keep_out_violations() {
    let mut sign = load_gloss(&demo_dir(), "IO").unwrap().unwrap();
    sign.waypoints[1].position = KeepOutRegion::default().center();
    let chain = KinematicChain::pepper_right_arm();
    let diags = validate_sign(&sign, &chain, &KeepOutRegion::default());
    assert_eq!(diags, vec![Diagnostic::KeepOutViolation { waypoint: 1 }]);
    let strict = CompileOptions { strict: true, ..Default::default() };
    match compile(&sign, &strict) {
        Err(LexiconError::FailedCompile(report)) => assert_eq!(report.status, CompileStatus::Failed),
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn out_of_reach_waypoint_fails() {
    let mut sign = load_gloss(&demo_dir(), "IO").unwrap().unwrap();
    sign.waypoints[1].position = [1.5, -0.8, 0.5];
    match compile(&sign, &CompileOptions::default()) {
        Err(LexiconError::FailedCompile(report)) => {
            assert!(report.reasons.iter().any(|r| r.contains("kinematic infeasibility")), "{:?}", report.reasons)
        }
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn andare_holds_the_left_arm() {
    let sign = load_gloss(&demo_dir(), "ANDARE").unwrap().unwrap();
    assert!(sign.two_handed && !sign.mirrored && sign.left_hold.is_some());
    let anim = compile(&sign, &CompileOptions::default()).unwrap();
    let hold = sign.left_hold.unwrap();
    for (name, rad) in &hold.joints {
        let curve = anim.curve(name).unwrap();
        for f in 0..=anim.last_frame() {
            assert!((curve.sample(f64::from(f)) - rad.to_degrees()).abs() <= 1e-9);
        }
    }
}

#[test]
fn compiled_right_arm_reaches_each_waypoint() {
    let chain = KinematicChain::pepper_right_arm();
    let options = CompileOptions::default();
    for sign in demo_signs() {
        let anim = compile(&sign, &options).unwrap();
        for wp in &sign.waypoints {
            let f = time_to_frame(wp.time, options.fps);
            let q: Vec<f64> =
                chain.joint_names().iter().map(|n| anim.curve(n).unwrap().sample(f64::from(f)).to_radians()).collect();
            let p = forward(&chain, &q).unwrap().position;
            let err = (p - nalgebra::Vector3::from(wp.position)).norm();
            assert!(err <= options.ik.tol_pos, "{} at frame {f}: {err}", sign.gloss);
        }
    }
}

#[test]
fn schema_rejects_unknown_fields() {
    let err = parse_sign(r#"{"gloss": "X", "waypoints": [], "colour": 1}"#).unwrap_err();
    assert!(matches!(err, LexiconError::SchemaViolation { .. }), "{err:?}");
}

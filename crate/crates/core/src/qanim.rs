//! Reading and writing `.qanim` keyframe animation files.

use std::fmt::Write as _;

use thiserror::Error;

use crate::animation::{ActuatorCurve, Animation, AnimationError, Interpolation, Key, Tangent};
use crate::robot_model::xml_escape;

pub const EDITOR_NAMESPACE: &str = "http://www.ald.softbankrobotics.com/animation/editor";
pub const TYPE_VERSION: &str = "2.0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QanimError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("<{element}> is missing attribute `{attribute}`")]
    MissingAttribute { element: String, attribute: String },
    #[error("<{element}> attribute `{attribute}` is not numeric: `{value}`")]
    NonNumericValue { element: String, attribute: String, value: String },
    #[error("cannot format non-finite number {0}")]
    NonFinite(f64),
    #[error("invalid animation: {0}")]
    InvariantViolation(#[from] AnimationError),
}

/// Canonical wire formatting: fixed-point, round-half-even to 7 fractional
/// digits, trailing zeros and a trailing point removed, `-0` printed as `0`.
pub fn format_number(x: f64) -> Result<String, QanimError> {
    if !x.is_finite() {
        return Err(QanimError::NonFinite(x));
    }
    // `{:.7}` rounds the exact binary value half-to-even.
    let mut s = format!("{x:.7}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    Ok(s)
}

/// Serializes an animation in the editor's layout: one element per line,
/// two-space indentation, attributes in the editor's order.
pub fn emit_qanim(animation: &Animation) -> Result<String, QanimError> {
    animation.validate()?;
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let header = format!(
        "<Animation xmlns:editor=\"{EDITOR_NAMESPACE}\" typeVersion=\"{TYPE_VERSION}\" editor:fps=\"{}\"",
        animation.fps
    );
    if animation.curves.is_empty() {
        let _ = writeln!(out, "{header}/>");
        return Ok(out);
    }
    let _ = writeln!(out, "{header}>");
    for curve in &animation.curves {
        let _ = writeln!(
            out,
            "  <ActuatorCurve fps=\"{}\" actuator=\"{}\" mute=\"{}\" unit=\"{}\">",
            animation.fps,
            xml_escape(&curve.actuator),
            curve.mute,
            xml_escape(&curve.unit)
        );
        for key in &curve.keys {
            let open = format!("    <Key value=\"{}\" frame=\"{}\"", format_number(key.value)?, key.frame);
            if key.left.is_none() && key.right.is_none() {
                let _ = writeln!(out, "{open}/>");
                continue;
            }
            let _ = writeln!(out, "{open}>");
            for (side, tangent) in [("left", key.left), ("right", key.right)] {
                if let Some(t) = tangent {
                    let _ = writeln!(
                        out,
                        "      <Tangent side=\"{side}\" abscissaParam=\"{}\" ordinateParam=\"{}\" editor:interpType=\"{}\"/>",
                        format_number(t.abscissa)?,
                        format_number(t.ordinate)?,
                        t.interp.as_str()
                    );
                }
            }
            out.push_str("    </Key>\n");
        }
        out.push_str("  </ActuatorCurve>\n");
    }
    out.push_str("</Animation>\n");
    Ok(out)
}

/// A non-fatal finding while parsing, e.g. an ignored attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic(pub String);

struct Reader {
    diagnostics: Vec<Diagnostic>,
}

impl Reader {
    fn attr<'a>(&self, node: roxmltree::Node<'a, '_>, name: &str, ns: Option<&str>) -> Result<&'a str, QanimError> {
        let found = match ns {
            Some(ns) => node.attribute((ns, name)),
            None => node.attribute(name),
        };
        found.ok_or_else(|| QanimError::MissingAttribute {
            element: node.tag_name().name().into(),
            attribute: ns.map_or_else(|| name.to_string(), |_| format!("editor:{name}")),
        })
    }

    fn number<T: std::str::FromStr>(&self, node: roxmltree::Node, name: &str, ns: Option<&str>) -> Result<T, QanimError> {
        let raw = self.attr(node, name, ns)?;
        raw.trim().parse::<T>().map_err(|_| QanimError::NonNumericValue {
            element: node.tag_name().name().into(),
            attribute: name.into(),
            value: raw.into(),
        })
    }

    fn float(&self, node: roxmltree::Node, name: &str) -> Result<f64, QanimError> {
        let v: f64 = self.number(node, name, None)?;
        if !v.is_finite() {
            return Err(QanimError::NonNumericValue {
                element: node.tag_name().name().into(),
                attribute: name.into(),
                value: v.to_string(),
            });
        }
        Ok(v)
    }

    fn note_unknown(&mut self, node: roxmltree::Node, known: &[&str]) {
        for a in node.attributes() {
            if !known.contains(&a.name()) {
                let msg = format!("ignoring attribute `{}` on <{}>", a.name(), node.tag_name().name());
                log::debug!("{msg}");
                self.diagnostics.push(Diagnostic(msg));
            }
        }
    }
}

/// Parses a `.qanim` document, returning ignored-content diagnostics too.
pub fn parse_qanim_with_diagnostics(text: &str) -> Result<(Animation, Vec<Diagnostic>), QanimError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| QanimError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "Animation" {
        return Err(QanimError::MalformedXml(format!("expected <Animation>, found <{}>", root.tag_name().name())));
    }
    let mut reader = Reader { diagnostics: Vec::new() };
    let fps: u32 = reader.number(root, "fps", Some(EDITOR_NAMESPACE))?;
    reader.note_unknown(root, &["typeVersion", "fps"]);

    let mut curves = Vec::new();
    for node in root.children().filter(roxmltree::Node::is_element) {
        if node.tag_name().name() != "ActuatorCurve" {
            reader.diagnostics.push(Diagnostic(format!("ignoring element <{}>", node.tag_name().name())));
            continue;
        }
        reader.note_unknown(node, &["fps", "actuator", "mute", "unit"]);
        let actuator = reader.attr(node, "actuator", None)?.to_string();
        let unit = reader.attr(node, "unit", None)?.to_string();
        let mute = match node.attribute("mute") {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => {
                return Err(QanimError::NonNumericValue {
                    element: "ActuatorCurve".into(),
                    attribute: "mute".into(),
                    value: other.into(),
                })
            }
        };
        let mut keys = Vec::new();
        for key_node in node.children().filter(|n| n.has_tag_name("Key")) {
            reader.note_unknown(key_node, &["value", "frame"]);
            let mut key = Key {
                frame: reader.number(key_node, "frame", None)?,
                value: reader.float(key_node, "value")?,
                left: None,
                right: None,
            };
            for t in key_node.children().filter(|n| n.has_tag_name("Tangent")) {
                reader.note_unknown(t, &["side", "abscissaParam", "ordinateParam", "interpType"]);
                let interp = reader.attr(t, "interpType", Some(EDITOR_NAMESPACE)).unwrap_or("bezier_auto");
                if interp != Interpolation::BezierAuto.as_str() {
                    reader.diagnostics.push(Diagnostic(format!("treating interpType `{interp}` as bezier_auto")));
                }
                let tangent = Tangent::new(reader.float(t, "abscissaParam")?, reader.float(t, "ordinateParam")?);
                match reader.attr(t, "side", None)? {
                    "left" => key.left = Some(tangent),
                    "right" => key.right = Some(tangent),
                    other => {
                        return Err(QanimError::MalformedXml(format!("Tangent side must be left/right, got `{other}`")))
                    }
                }
            }
            keys.push(key);
        }
        curves.push(ActuatorCurve { actuator, unit, mute, keys });
    }
    Ok((Animation { fps, curves }, reader.diagnostics))
}

pub fn parse_qanim(text: &str) -> Result<Animation, QanimError> {
    parse_qanim_with_diagnostics(text).map(|(a, _)| a)
}

/// Rounds every number to what the wire format can carry, so that
/// `parse_qanim(emit_qanim(a)) == quantize(a)`.
pub fn quantize(animation: &Animation) -> Animation {
    let q = |x: f64| format_number(x).ok().and_then(|s| s.parse().ok()).unwrap_or(x);
    let mut out = animation.clone();
    for key in out.curves.iter_mut().flat_map(|c| c.keys.iter_mut()) {
        key.value = q(key.value);
        for t in [&mut key.left, &mut key.right].into_iter().flatten() {
            t.abscissa = q(t.abscissa);
            t.ordinate = q(t.ordinate);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(20.0 / 3.0).unwrap(), "6.6666667");
        assert_eq!(format_number(90.5273514).unwrap(), "90.5273514");
        assert_eq!(format_number(0.0).unwrap(), "0");
        assert_eq!(format_number(-0.0).unwrap(), "0");
        assert_eq!(format_number(-1e-9).unwrap(), "0");
        assert_eq!(format_number(10.0).unwrap(), "10");
        assert_eq!(format_number(-20.0 / 3.0).unwrap(), "-6.6666667");
        assert_eq!(format_number(1e12).unwrap(), "1000000000000");
        // exact binary tie: 1/256 = 0.00390625 rounds to even
        assert_eq!(format_number(1.0 / 256.0).unwrap(), "0.0039062");
        assert!(matches!(format_number(f64::NAN), Err(QanimError::NonFinite(_))));
    }

    #[test]
    fn empty_animation_is_envelope_only() {
        let text = emit_qanim(&Animation::new(25)).unwrap();
        assert_eq!(
            text,
            format!(
                "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<Animation xmlns:editor=\"{EDITOR_NAMESPACE}\" typeVersion=\"2.0\" editor:fps=\"25\"/>\n"
            )
        );
        assert_eq!(parse_qanim(&text).unwrap(), Animation::new(25));
    }

    #[test]
    fn missing_fps() {
        let err = parse_qanim("<Animation typeVersion=\"2.0\"/>").unwrap_err();
        assert!(matches!(err, QanimError::MissingAttribute { attribute, .. } if attribute == "editor:fps"));
    }

    #[test]
    fn non_numeric_and_unknown_attributes() {
        let doc = format!(
            r#"<Animation xmlns:editor="{EDITOR_NAMESPACE}" editor:fps="25" typeVersion="2.0" color="red">
            <ActuatorCurve unit="degree" actuator="A" fps="25" mute="false"><Key frame="0" value="abc"/></ActuatorCurve></Animation>"#
        );
        assert!(matches!(parse_qanim(&doc), Err(QanimError::NonNumericValue { .. })));
        let doc = doc.replace("abc", "1.5");
        let (anim, diags) = parse_qanim_with_diagnostics(&doc).unwrap();
        assert_eq!(anim.curves[0].keys[0].value, 1.5);
        assert_eq!(diags.len(), 1);
    }

    #[test]
    fn two_curves_in_insertion_order() {
        let mut a = Animation::new(25);
        a.curves.push(ActuatorCurve::auto("Zed", &[(0, 1.0), (10, 2.0)]).unwrap());
        a.curves.push(ActuatorCurve::auto("Alpha", &[(0, 3.0)]).unwrap());
        let text = emit_qanim(&a).unwrap();
        assert!(text.find("Zed").unwrap() < text.find("Alpha").unwrap());
        assert_eq!(text, emit_qanim(&a).unwrap());
        assert_eq!(parse_qanim(&text).unwrap(), quantize(&a));
    }

    #[test]
    fn invalid_animation_refused() {
        let mut a = Animation::new(25);
        a.curves.push(ActuatorCurve::auto("A", &[(0, 1.0)]).unwrap());
        a.curves.push(ActuatorCurve::auto("A", &[(0, 1.0)]).unwrap());
        assert!(matches!(emit_qanim(&a), Err(QanimError::InvariantViolation(_))));
    }
}

//! Text rendering of observations (USER turns).
//!
//! ```text
//! box1: weight 2.07 kg, stability 1.00, size 25x25x20 cm, footprint 625 cm^2
//! current stack: box2,box1
//! preference: Stack the boxes heaviest to lightest
//! ```
//!
//! Only revealed boxes are listed, in reveal order. Sizes are whole
//! centimeters and the footprint is the product of the printed width and depth.

use crate::agents::Observation;
use crate::model::Measurement;

pub fn box_line(id: &str, (w, d, h): (f64, f64, f64), m: &Measurement) -> String {
    let cm = |v: f64| (v * 100.0).round() as i64;
    let (w, d, h) = (cm(w), cm(d), cm(h));
    format!(
        "{id}: weight {:.2} kg, stability {:.2}, size {w}x{d}x{h} cm, footprint {} cm^2",
        m.weight_kg,
        m.stability_audio,
        w * d
    )
}

pub fn stack_line<S: AsRef<str>>(stack: &[S]) -> String {
    if stack.is_empty() {
        "current stack: empty".to_string()
    } else {
        let ids: Vec<&str> = stack.iter().map(AsRef::as_ref).collect();
        format!("current stack: {}", ids.join(","))
    }
}

pub fn render_observation(obs: &Observation) -> String {
    let mut lines: Vec<String> = obs
        .revealed()
        .map(|b| box_line(&b.id, b.dims, b.measurement.as_ref().expect("revealed")))
        .collect();
    lines.push(stack_line(&obs.stack.stacked));
    lines.push(format!("preference: {}", obs.preference_text));
    lines.join("\n")
}

//! Domain types: boxes, their hidden contents, stack states and actions.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keys::KeyBuilder;

/// Largest scenario the enumerator accepts (8! orders).
pub const MAX_BOXES: usize = 8;

/// Default wall thickness of a box in meters.
pub const DEFAULT_WALL: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sphere,
    Cuboid,
    Cylinder,
}

/// A loose object inside a box. Dimensions are meters, density kg/m³.
///
/// For spheres `w == d == h` is the diameter; for cylinders `w == d` is the
/// diameter and `h` the height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentObject {
    pub shape: Shape,
    pub w: f64,
    pub d: f64,
    pub h: f64,
    pub density: f64,
}

impl ContentObject {
    pub fn sphere(diameter: f64, density: f64) -> Result<Self> {
        Self::new(Shape::Sphere, diameter, diameter, diameter, density)
    }

    pub fn cuboid(w: f64, d: f64, h: f64, density: f64) -> Result<Self> {
        Self::new(Shape::Cuboid, w, d, h, density)
    }

    pub fn cylinder(diameter: f64, height: f64, density: f64) -> Result<Self> {
        Self::new(Shape::Cylinder, diameter, diameter, height, density)
    }

    pub fn new(shape: Shape, w: f64, d: f64, h: f64, density: f64) -> Result<Self> {
        let o = ContentObject {
            shape,
            w,
            d,
            h,
            density,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.w, self.d, self.h, self.density];
        if dims.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid(
                "content object",
                format!("dimensions and density must be positive, got {self:?}"),
            ));
        }
        match self.shape {
            Shape::Sphere if self.w != self.d || self.w != self.h => {
                Err(Error::invalid("content object", "sphere needs w == d == h"))
            }
            Shape::Cylinder if self.w != self.d => {
                Err(Error::invalid("content object", "cylinder needs w == d"))
            }
            _ => Ok(()),
        }
    }

    /// Material volume in m³ (true solid volume, not the bounding box).
    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Sphere => PI / 6.0 * self.w.powi(3),
            Shape::Cylinder => PI / 4.0 * self.w * self.w * self.h,
            Shape::Cuboid => self.w * self.d * self.h,
        }
    }

    pub fn bounding_volume(&self) -> f64 {
        self.w * self.d * self.h
    }

    pub fn mass(&self) -> f64 {
        self.volume() * self.density
    }
}

/// Footprint-to-height ratio of a content object; spheres roll, so they score 0.
pub fn object_stability(o: &ContentObject) -> f64 {
    match o.shape {
        Shape::Sphere => 0.0,
        Shape::Cuboid | Shape::Cylinder => o.w.min(o.d) / o.h,
    }
}

/// A closed cuboid container with a wall of thickness `wall`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub id: String,
    pub w: f64,
    pub d: f64,
    pub h: f64,
    #[serde(default = "default_wall")]
    pub wall: f64,
    pub density: f64,
    #[serde(default)]
    pub contents: Vec<ContentObject>,
}

fn default_wall() -> f64 {
    DEFAULT_WALL
}

impl BoxSpec {
    pub fn new(
        id: impl Into<String>,
        (w, d, h): (f64, f64, f64),
        wall: f64,
        density: f64,
        contents: Vec<ContentObject>,
    ) -> Result<Self> {
        let b = BoxSpec {
            id: id.into(),
            w,
            d,
            h,
            wall,
            density,
            contents,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn inner_dims(&self) -> (f64, f64, f64) {
        let t2 = 2.0 * self.wall;
        (self.w - t2, self.d - t2, self.h - t2)
    }

    pub fn outer_volume(&self) -> f64 {
        self.w * self.d * self.h
    }

    pub fn inner_volume(&self) -> f64 {
        let (iw, id, ih) = self.inner_dims();
        iw * id * ih
    }

    pub fn footprint(&self) -> f64 {
        self.w * self.d
    }

    /// Checks geometry and that the contents fit the cavity with bounding
    /// volume at most `fill_fraction` of the inner volume.
    pub fn validate_fill(&self, fill_fraction: f64) -> Result<()> {
        if self.id.is_empty() || self.id.chars().any(|c| !is_id_char(c)) {
            return Err(Error::invalid(
                "box",
                format!("id {:?} must be non-empty [A-Za-z0-9_-]", self.id),
            ));
        }
        let vals = [self.w, self.d, self.h, self.wall, self.density];
        if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid(
                "box",
                format!("{}: dimensions, wall and density must be positive", self.id),
            ));
        }
        if 2.0 * self.wall >= self.w.min(self.d).min(self.h) {
            return Err(Error::invalid(
                "box",
                format!("{}: wall {} too thick", self.id, self.wall),
            ));
        }
        let (iw, id, ih) = self.inner_dims();
        let mut bounding = 0.0;
        for o in &self.contents {
            o.validate()?;
            if o.w > iw || o.d > id || o.h > ih {
                return Err(Error::invalid(
                    "box",
                    format!("{}: content {:?} exceeds cavity", self.id, o),
                ));
            }
            bounding += o.bounding_volume();
        }
        if bounding > fill_fraction * self.inner_volume() {
            return Err(Error::invalid(
                "box",
                format!(
                    "{}: contents occupy {:.3e} m³, more than {} of the cavity",
                    self.id, bounding, fill_fraction
                ),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_fill(1.0)
    }
}

pub(crate) fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Mean stability of the contents; an empty box has nothing to move and scores 1.
pub fn box_stability(b: &BoxSpec) -> f64 {
    if b.contents.is_empty() {
        return 1.0;
    }
    b.contents.iter().map(object_stability).sum::<f64>() / b.contents.len() as f64
}

/// Shell mass plus the mass of every content object, in kg.
pub fn box_weight(b: &BoxSpec) -> f64 {
    let shell = (b.outer_volume() - b.inner_volume()) * b.density;
    shell + b.contents.iter().map(ContentObject::mass).sum::<f64>()
}

/// A stacking scenario. `reveal_order` is the order in which latent
/// properties become known in online mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub boxes: Vec<BoxSpec>,
    pub reveal_order: Vec<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.boxes.is_empty() || self.boxes.len() > MAX_BOXES {
            return Err(Error::invalid(
                "scenario",
                format!("{} boxes, expected 1..={MAX_BOXES}", self.boxes.len()),
            ));
        }
        let mut ids = BTreeSet::new();
        for b in &self.boxes {
            b.validate()?;
            if !ids.insert(b.id.as_str()) {
                return Err(Error::invalid(
                    "scenario",
                    format!("duplicate box id {}", b.id),
                ));
            }
        }
        let reveal: BTreeSet<&str> = self.reveal_order.iter().map(String::as_str).collect();
        if reveal != ids || self.reveal_order.len() != ids.len() {
            return Err(Error::invalid(
                "scenario",
                "reveal_order must be a permutation of the box ids",
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::invalid("scenario json", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn get(&self, id: &str) -> Option<&BoxSpec> {
        self.boxes.iter().find(|b| b.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.boxes.iter().map(|b| b.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Boxes stacked bottom-to-top plus the ones still on the table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackState {
    pub stacked: Vec<String>,
    pub on_table: BTreeSet<String>,
}

impl StackState {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StackState {
            stacked: Vec::new(),
            on_table: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn top(&self) -> Option<&str> {
        self.stacked.last().map(String::as_str)
    }

    pub fn is_complete(&self) -> bool {
        self.on_table.is_empty()
    }

    /// Applies `a` in place; on error the state is unchanged.
    pub fn apply(&mut self, a: &Action) -> Result<()> {
        match a {
            Action::Wait => Ok(()),
            Action::Stack(id) => {
                if !self.on_table.remove(id) {
                    return Err(Error::IllegalAction {
                        action: a.to_string(),
                        reason: if self.stacked.contains(id) {
                            "box is already stacked".into()
                        } else {
                            "unknown box".into()
                        },
                    });
                }
                self.stacked.push(id.clone());
                Ok(())
            }
            Action::Unstack(id) => {
                if self.top() != Some(id.as_str()) {
                    return Err(Error::IllegalAction {
                        action: a.to_string(),
                        reason: match self.top() {
                            Some(top) => format!("top of the stack is {top}"),
                            None => "stack is empty".into(),
                        },
                    });
                }
                self.stacked.pop();
                self.on_table.insert(id.clone());
                Ok(())
            }
        }
    }
}

/// Returns the state after `a`, or `IllegalAction`.
pub fn apply_action(s: &StackState, a: &Action) -> Result<StackState> {
    let mut next = s.clone();
    next.apply(a)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "box", rename_all = "lowercase")]
pub enum Action {
    Stack(String),
    Unstack(String),
    Wait,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Stack(id) => write!(f, "stack {id}"),
            Action::Unstack(id) => write!(f, "unstack {id}"),
            Action::Wait => f.write_str("wait"),
        }
    }
}

/// What lifting and tilting a box reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub box_id: String,
    pub weight_kg: f64,
    pub stability_audio: f64,
}

/// Measurement noise. Both sigmas default to zero (noiseless).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Relative weight noise: weight × (1 + ε), ε ~ N(0, σ²).
    #[serde(default)]
    pub weight_sigma: f64,
    /// Additive noise on the [0, 1] stability reading.
    #[serde(default)]
    pub stability_sigma: f64,
}

impl NoiseConfig {
    pub fn is_noiseless(&self) -> bool {
        self.weight_sigma == 0.0 && self.stability_sigma == 0.0
    }
}

pub fn measure(b: &BoxSpec, noise: &NoiseConfig, rng_key: u64) -> Measurement {
    let weight = box_weight(b);
    let stability = box_stability(b).clamp(0.0, 1.0);
    if noise.is_noiseless() {
        return Measurement {
            box_id: b.id.clone(),
            weight_kg: weight,
            stability_audio: stability,
        };
    }
    let mut rng = KeyBuilder::new("measure").u64(rng_key).str(&b.id).rng();
    let eps = gaussian(&mut rng, noise.weight_sigma);
    let audio = (stability + gaussian(&mut rng, noise.stability_sigma)).clamp(0.0, 1.0);
    Measurement {
        box_id: b.id.clone(),
        // keep the reading physical even for absurd sigmas
        weight_kg: (weight * (1.0 + eps)).max(weight * 1e-3),
        stability_audio: audio,
    }
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube(side: f64, density: f64) -> ContentObject {
        ContentObject::cuboid(side, side, side, density).unwrap()
    }

    fn sample_box(contents: Vec<ContentObject>) -> BoxSpec {
        BoxSpec::new("box1", (0.30, 0.20, 0.15), 0.005, 690.0, contents).unwrap()
    }

    #[test]
    fn object_stability_examples() {
        let sphere = ContentObject::sphere(0.05, 7800.0).unwrap();
        assert_eq!(object_stability(&sphere), 0.0);
        assert_eq!(object_stability(&cube(0.1, 700.0)), 1.0);
        let cyl = ContentObject::cylinder(0.04, 0.08, 2700.0).unwrap();
        assert!((object_stability(&cyl) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn box_stability_examples() {
        let sphere = ContentObject::sphere(0.05, 7800.0).unwrap();
        let cyl = ContentObject::cylinder(0.04, 0.08, 2700.0).unwrap();
        let b = BoxSpec::new(
            "b",
            (0.3, 0.3, 0.3),
            0.005,
            690.0,
            vec![sphere.clone(), cube(0.1, 700.0)],
        )
        .unwrap();
        assert!((box_stability(&b) - 0.5).abs() < 1e-12);
        assert_eq!(box_stability(&sample_box(vec![])), 1.0);
        let b = BoxSpec::new("b", (0.3, 0.3, 0.3), 0.005, 690.0, vec![cyl, sphere]).unwrap();
        assert!((box_stability(&b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn box_weight_examples() {
        // independent route: six wall slabs instead of outer minus inner
        let (w, d, h, t) = (0.30, 0.20, 0.15, 0.005);
        let id = d - 2.0 * t;
        let slabs = 2.0 * w * d * t + 2.0 * w * t * (h - 2.0 * t) + 2.0 * id * t * (h - 2.0 * t);
        let empty = box_weight(&sample_box(vec![]));
        assert!((empty - slabs * 690.0).abs() < 1e-12);
        assert!((empty - 0.887).abs() < 5e-4);

        let full = box_weight(&sample_box(vec![cube(0.05, 7800.0)]));
        assert!((full - empty - 0.975).abs() < 1e-12);
    }

    #[test]
    fn box_validation() {
        assert!(BoxSpec::new("b", (0.1, 0.1, 0.1), 0.05, 690.0, vec![]).is_err());
        assert!(BoxSpec::new("b", (0.1, 0.1, 0.1), 0.005, 690.0, vec![cube(0.095, 1.0)]).is_err());
        assert!(BoxSpec::new("b c", (0.1, 0.1, 0.1), 0.005, 690.0, vec![]).is_err());
        assert!(ContentObject::new(Shape::Cylinder, 0.1, 0.2, 0.1, 1.0).is_err());
        assert!(ContentObject::cuboid(0.0, 0.1, 0.1, 1.0).is_err());
    }

    #[test]
    fn measure_examples() {
        // 1.25 kg, stability 0.8 via a flat stack of known objects
        let c = ContentObject::cuboid(0.08, 0.08, 0.1, 1000.0).unwrap();
        let b = sample_box(vec![c]);
        let m = measure(&b, &NoiseConfig::default(), 9);
        assert_eq!(m.weight_kg, box_weight(&b));
        assert!((m.stability_audio - 0.8).abs() < 1e-12);

        let flat = ContentObject::cuboid(0.17, 0.17, 0.1, 1000.0).unwrap();
        let b = sample_box(vec![flat]);
        assert!(box_stability(&b) > 1.6);
        assert_eq!(measure(&b, &NoiseConfig::default(), 0).stability_audio, 1.0);

        let noisy = NoiseConfig {
            weight_sigma: 0.01,
            stability_sigma: 0.05,
        };
        let a = measure(&b, &noisy, 42);
        assert_eq!(a, measure(&b, &noisy, 42));
        assert_ne!(a.weight_kg, box_weight(&b));
        assert!((0.0..=1.0).contains(&a.stability_audio));
    }

    #[test]
    fn apply_action_examples() {
        let s = StackState::new(["b1", "b2"]);
        let s1 = apply_action(&s, &Action::Stack("b1".into())).unwrap();
        assert_eq!(s1.stacked, vec!["b1"]);
        assert_eq!(s1.on_table, BTreeSet::from(["b2".to_string()]));

        let full = StackState {
            stacked: vec!["b1".into(), "b2".into()],
            on_table: BTreeSet::new(),
        };
        assert!(matches!(
            apply_action(&full, &Action::Unstack("b1".into())),
            Err(Error::IllegalAction { .. })
        ));
        assert!(apply_action(&full, &Action::Stack("b1".into())).is_err());
        assert!(apply_action(&s, &Action::Unstack("b1".into())).is_err());
        assert_eq!(apply_action(&s, &Action::Wait).unwrap(), s);
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = Scenario {
            id: "s".into(),
            seed: u64::MAX - 3,
            boxes: vec![sample_box(vec![
                cube(0.05, 7800.0),
                ContentObject::sphere(0.0317, 19300.0).unwrap(),
            ])],
            reveal_order: vec!["box1".into()],
        };
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let bad = Scenario {
            reveal_order: vec!["nope".into()],
            ..s
        };
        assert!(Scenario::from_json(&bad.to_json()).is_err());
    }

    proptest! {
        #[test]
        fn stability_scale_invariant(w in 0.01f64..0.2, d in 0.01f64..0.2, h in 0.01f64..0.2, k in 0.1f64..10.0) {
            let a = ContentObject::cuboid(w, d, h, 1000.0).unwrap();
            let b = ContentObject::cuboid(w * k, d * k, h * k, 1000.0).unwrap();
            prop_assert!((object_stability(&a) - object_stability(&b)).abs() < 1e-9 * object_stability(&a).max(1.0));
            let taller = ContentObject::cuboid(w, d, h * 1.5, 1000.0).unwrap();
            prop_assert!(object_stability(&taller) < object_stability(&a));
        }

        #[test]
        fn weight_monotone_in_contents(side in 0.005f64..0.05, density in 1.0f64..20000.0) {
            let empty = sample_box(vec![]);
            let full = sample_box(vec![cube(side, density)]);
            prop_assert!(box_weight(&full) > box_weight(&empty));
        }

        #[test]
        fn stack_unstack_inverse(n in 1usize..6, pick in 0usize..6, pre in 0usize..6) {
            let ids: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
            let mut s = StackState::new(ids.clone());
            for id in ids.iter().take(pre.min(n)) {
                s.apply(&Action::Stack(id.clone())).unwrap();
            }
            let table: Vec<String> = s.on_table.iter().cloned().collect();
            if let Some(x) = table.get(pick % table.len().max(1)) {
                let up = apply_action(&s, &Action::Stack(x.clone())).unwrap();
                prop_assert!(up.stacked.iter().all(|i| !up.on_table.contains(i)));
                prop_assert_eq!(up.stacked.len() + up.on_table.len(), n);
                let back = apply_action(&up, &Action::Unstack(x.clone())).unwrap();
                prop_assert_eq!(back, s);
            }
        }
    }
}

//! Quasi-static stacking surrogate.
//!
//! Each placement lands at the center of the box below plus a Gaussian
//! offset. The downward impulse and any loose contents are folded into
//! equivalent horizontal displacements of the center of mass, and every
//! box–box interface is checked against its support rectangle.
//!
//! Disturbances are keyed by `(seed, prefix)`, so the same prefix always
//! yields the same physical stack no matter which full order reaches it.
//! That makes prefix sharing during enumeration exact.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keys::{sha256_hex, KeyBuilder};
use crate::model::{box_stability, box_weight, gaussian, BoxSpec, Scenario, MAX_BOXES};
use crate::preference::PropertyTable;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    /// α ~ |N(0, σ_α²)|
    #[default]
    HalfNormal,
    /// α ~ U(0, σ_α)
    Cap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysParams {
    /// Std-dev of each planar placement offset component, meters.
    pub placement_sigma: f64,
    /// Speed of the box at contact, m/s.
    pub impulse_speed: f64,
    /// Deviation of the impulse from vertical, degrees.
    pub impulse_angle_deg: f64,
    pub impulse_angle_mode: AngleMode,
    /// Seconds; lateral displacement = coeff · speed · sin α.
    pub impulse_coeff: f64,
    /// Margin kept from every support edge, meters.
    pub support_inset: f64,
    /// Fraction of the half footprint that fully loose contents can shift the COM.
    pub slosh_coeff: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            placement_sigma: 0.02,
            impulse_speed: 0.4,
            impulse_angle_deg: 13.0,
            impulse_angle_mode: AngleMode::HalfNormal,
            impulse_coeff: 0.05,
            support_inset: 0.005,
            slosh_coeff: 0.25,
        }
    }
}

impl PhysParams {
    /// No placement noise and no impulse.
    pub fn noiseless() -> Self {
        PhysParams {
            placement_sigma: 0.0,
            impulse_angle_deg: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.placement_sigma,
            self.impulse_speed,
            self.impulse_angle_deg,
            self.impulse_coeff,
            self.support_inset,
            self.slosh_coeff,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "physics params",
                "all values must be finite and >= 0",
            ));
        }
        if self.impulse_angle_deg >= 90.0 {
            return Err(Error::invalid(
                "physics params",
                "impulse angle must be < 90 degrees",
            ));
        }
        Ok(())
    }

    /// Short stable digest used in cache keys.
    pub fn digest(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("params serialize")
                .as_bytes(),
        )[..16]
            .to_string()
    }
}

/// Lateral displacement equivalent of an impulse tilted `alpha_deg` from vertical.
pub fn impulse_displacement(alpha_deg: f64, params: &PhysParams) -> f64 {
    params.impulse_coeff * params.impulse_speed * alpha_deg.to_radians().sin()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    /// Placement offset from the center of the box below.
    pub offset: [f64; 2],
    /// COM displacement caused by the placement impulse.
    pub impulse: [f64; 2],
}

/// Disturbance for the last box of `prefix`.
pub fn sample_disturbance<S: AsRef<str>>(
    seed: u64,
    prefix: &[S],
    params: &PhysParams,
) -> Disturbance {
    assert!(!prefix.is_empty(), "disturbance needs a non-empty prefix");
    let mut rng = KeyBuilder::new("placement").u64(seed).strs(prefix).rng();
    let offset = [
        gaussian(&mut rng, params.placement_sigma),
        gaussian(&mut rng, params.placement_sigma),
    ];
    let alpha = match params.impulse_angle_mode {
        AngleMode::HalfNormal => gaussian(&mut rng, params.impulse_angle_deg).abs(),
        AngleMode::Cap if params.impulse_angle_deg > 0.0 => {
            rng.random_range(0.0..params.impulse_angle_deg)
        }
        AngleMode::Cap => 0.0,
    };
    let heading = rng.random_range(0.0..2.0 * PI);
    let mag = impulse_displacement(alpha, params);
    Disturbance {
        offset,
        impulse: [mag * heading.cos(), mag * heading.sin()],
    }
}

/// Axis-aligned rectangle in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn centered(center: [f64; 2], w: f64, d: f64) -> Self {
        Rect {
            min: [center[0] - w / 2.0, center[1] - d / 2.0],
            max: [center[0] + w / 2.0, center[1] + d / 2.0],
        }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn depth(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
        ]
    }

    /// `None` when the inset swallows the rectangle.
    pub fn inset(&self, margin: f64) -> Option<Rect> {
        let r = Rect {
            min: [self.min[0] + margin, self.min[1] + margin],
            max: [self.max[0] - margin, self.max[1] - margin],
        };
        (r.min[0] <= r.max[0] && r.min[1] <= r.max[1]).then_some(r)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.min[0]..=self.max[0]).contains(&p[0]) && (self.min[1]..=self.max[1]).contains(&p[1])
    }
}

/// Contact patch between the top face of `lower` and the bottom face of `upper`.
pub fn support_region(lower: &Rect, upper: &Rect) -> Option<Rect> {
    let r = Rect {
        min: [
            lower.min[0].max(upper.min[0]),
            lower.min[1].max(upper.min[1]),
        ],
        max: [
            lower.max[0].min(upper.max[0]),
            lower.max[1].min(upper.max[1]),
        ],
    };
    (r.width() > 0.0 && r.depth() > 0.0).then_some(r)
}

/// Static data the stability check needs about one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBody {
    pub w: f64,
    pub d: f64,
    pub h: f64,
    pub mass: f64,
    /// Content stability clamped to [0, 1].
    pub stability: f64,
}

impl BoxBody {
    pub fn of(b: &BoxSpec) -> Self {
        BoxBody {
            w: b.w,
            d: b.d,
            h: b.h,
            mass: box_weight(b),
            stability: box_stability(b).clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedBox {
    pub id: String,
    pub disturbance: Disturbance,
    pub body: BoxBody,
    /// Height of the box's center above the table.
    pub com_height: f64,
}

/// A physical stack, bottom first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhysStack {
    pub boxes: Vec<PlacedBox>,
}

impl PhysStack {
    pub fn ids(&self) -> Vec<String> {
        self.boxes.iter().map(|b| b.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.boxes.iter().any(|b| b.id == id)
    }

    pub fn push(&mut self, id: &str, body: BoxBody, disturbance: Disturbance) {
        let base = self
            .boxes
            .last()
            .map_or(0.0, |b| b.com_height + b.body.h / 2.0);
        self.boxes.push(PlacedBox {
            id: id.to_string(),
            com_height: base + body.h / 2.0,
            body,
            disturbance,
        });
    }

    pub fn pop(&mut self) -> Option<PlacedBox> {
        self.boxes.pop()
    }

    /// Absolute planar centers, the first box offset from the table origin.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        let mut acc = [0.0, 0.0];
        self.boxes
            .iter()
            .map(|b| {
                acc[0] += b.disturbance.offset[0];
                acc[1] += b.disturbance.offset[1];
                acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum Stability {
    Stable,
    /// `interface` k sits between stack positions k−1 and k.
    Collapse {
        interface: usize,
    },
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }
}

/// Checks every box–box interface bottom-up; the table always supports.
///
/// The topmost box carries its placement impulse; impulses of boxes placed
/// earlier have settled.
pub fn check_stable(stack: &PhysStack, params: &PhysParams) -> Stability {
    let n = stack.boxes.len();
    for k in 1..n {
        let lower = &stack.boxes[k - 1].body;
        // positions relative to the lower box, so translation never matters
        let mut rel = [0.0, 0.0];
        let mut moment = [0.0, 0.0];
        let mut mass = 0.0;
        let mut stab_sum = 0.0;
        let mut min_side = f64::INFINITY;
        let mut upper_center = [0.0, 0.0];
        for (j, b) in stack.boxes.iter().enumerate().skip(k) {
            rel[0] += b.disturbance.offset[0];
            rel[1] += b.disturbance.offset[1];
            if j == k {
                upper_center = rel;
            }
            let mut c = rel;
            if j == n - 1 {
                c[0] += b.disturbance.impulse[0];
                c[1] += b.disturbance.impulse[1];
            }
            moment[0] += b.body.mass * c[0];
            moment[1] += b.body.mass * c[1];
            mass += b.body.mass;
            stab_sum += b.body.stability;
            min_side = min_side.min(b.body.w.min(b.body.d));
        }
        let com = [moment[0] / mass, moment[1] / mass];
        let mean_stab = (stab_sum / (n - k) as f64).clamp(0.0, 1.0);
        let slosh = params.slosh_coeff * (1.0 - mean_stab) * (min_side / 2.0);
        let upper = &stack.boxes[k].body;
        let ok = support_region(
            &Rect::centered([0.0, 0.0], lower.w, lower.d),
            &Rect::centered(upper_center, upper.w, upper.d),
        )
        .and_then(|r| r.inset(params.support_inset + slosh))
        .is_some_and(|r| r.contains(com));
        if !ok {
            return Stability::Collapse { interface: k };
        }
    }
    Stability::Stable
}

/// Places `b` with the disturbance keyed by `(seed, new prefix)`.
pub fn place_with_seed(
    stack: &PhysStack,
    b: &BoxSpec,
    seed: u64,
    params: &PhysParams,
) -> std::result::Result<PhysStack, Stability> {
    assert!(
        !stack.contains(&b.id),
        "box {} is already in the stack",
        b.id
    );
    let mut prefix: Vec<&str> = stack.boxes.iter().map(|p| p.id.as_str()).collect();
    prefix.push(&b.id);
    let dist = sample_disturbance(seed, &prefix, params);
    let mut next = stack.clone();
    next.push(&b.id, BoxBody::of(b), dist);
    match check_stable(&next, params) {
        Stability::Stable => Ok(next),
        c => Err(c),
    }
}

/// Places a scenario box using the scenario's own seed.
pub fn place_box(
    stack: &PhysStack,
    scenario: &Scenario,
    box_id: &str,
    params: &PhysParams,
) -> std::result::Result<PhysStack, Stability> {
    let b = scenario
        .get(box_id)
        .unwrap_or_else(|| panic!("scenario {} has no box {box_id}", scenario.id));
    place_with_seed(stack, b, scenario.seed, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum SimOutcome {
    Completed {
        stack: PhysStack,
    },
    Failed {
        stable_prefix: usize,
        interface: usize,
    },
}

/// Places the boxes one by one, stopping at the first collapse.
pub fn simulate_order<S: AsRef<str>>(
    scenario: &Scenario,
    order: &[S],
    params: &PhysParams,
) -> SimOutcome {
    let mut stack = PhysStack::default();
    for (i, id) in order.iter().enumerate() {
        match place_box(&stack, scenario, id.as_ref(), params) {
            Ok(next) => stack = next,
            Err(c) => {
                let interface = match c {
                    Stability::Collapse { interface } => interface,
                    Stability::Stable => unreachable!(),
                };
                return SimOutcome::Failed {
                    stable_prefix: i,
                    interface,
                };
            }
        }
    }
    SimOutcome::Completed { stack }
}

/// One stable prefix, stored as the disturbance of its last box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixEntry {
    pub order: Vec<String>,
    pub disturbance: Disturbance,
}

/// Every stable prefix and completed stack of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackCatalog {
    pub scenario_id: String,
    pub params_digest: String,
    pub props: PropertyTable,
    pub bodies: std::collections::BTreeMap<String, BoxBody>,
    /// Sorted by `order`.
    pub prefixes: Vec<PrefixEntry>,
    /// Sorted completed stable stacks (A_S).
    pub completed: Vec<Vec<String>>,
    /// Placements simulated while building the catalog.
    pub nodes_visited: usize,
}

impl StackCatalog {
    fn find(&self, prefix: &[String]) -> Option<&PrefixEntry> {
        self.prefixes
            .binary_search_by(|e| e.order.as_slice().cmp(prefix))
            .ok()
            .map(|i| &self.prefixes[i])
    }

    pub fn is_stable_prefix(&self, prefix: &[String]) -> bool {
        self.find(prefix).is_some()
    }

    pub fn is_completed(&self, stack: &[String]) -> bool {
        self.completed
            .binary_search_by(|c| c.as_slice().cmp(stack))
            .is_ok()
    }

    /// Rebuilds the physical stack of a stable prefix.
    pub fn stack(&self, prefix: &[String]) -> Option<PhysStack> {
        let mut s = PhysStack::default();
        for j in 1..=prefix.len() {
            let e = self.find(&prefix[..j])?;
            let id = &prefix[j - 1];
            s.push(id, self.bodies.get(id)?.clone(), e.disturbance);
        }
        Some(s)
    }

    /// Completed stacks beginning with `prefix`.
    pub fn completions<'a>(
        &'a self,
        prefix: &'a [String],
    ) -> impl Iterator<Item = &'a Vec<String>> + 'a {
        let start = self.completed.partition_point(|c| c.as_slice() < prefix);
        self.completed[start..]
            .iter()
            .take_while(move |c| c.starts_with(prefix))
    }

    pub fn box_count(&self) -> usize {
        self.bodies.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("catalog serializes")
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

/// Simulates all K! orders through a prefix tree; shared prefixes are simulated once.
pub fn enumerate_stacks(scenario: &Scenario, params: &PhysParams) -> Result<StackCatalog> {
    scenario.validate()?;
    params.validate()?;
    if scenario.len() > MAX_BOXES {
        return Err(Error::invalid("scenario", "too many boxes to enumerate"));
    }
    let all: Vec<&BoxSpec> = scenario.boxes.iter().collect();

    #[derive(Default)]
    struct Found {
        prefixes: Vec<PrefixEntry>,
        completed: Vec<Vec<String>>,
        nodes: usize,
    }

    fn expand(
        stack: &PhysStack,
        b: &BoxSpec,
        rest: Vec<&BoxSpec>,
        seed: u64,
        params: &PhysParams,
        out: &mut Found,
    ) {
        out.nodes += 1;
        let Ok(next) = place_with_seed(stack, b, seed, params) else {
            return;
        };
        let order = next.ids();
        out.prefixes.push(PrefixEntry {
            order: order.clone(),
            disturbance: next.boxes.last().expect("non-empty").disturbance,
        });
        if rest.is_empty() {
            out.completed.push(order);
            return;
        }
        for i in 0..rest.len() {
            let mut others = rest.clone();
            let child = others.remove(i);
            expand(&next, child, others, seed, params, out);
        }
    }

    let branches: Vec<Found> = (0..all.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Found::default();
            let mut rest = all.clone();
            let first = rest.remove(i);
            expand(
                &PhysStack::default(),
                first,
                rest,
                scenario.seed,
                params,
                &mut out,
            );
            out
        })
        .collect();

    let mut prefixes = Vec::new();
    let mut completed = Vec::new();
    let mut nodes = 0;
    for b in branches {
        prefixes.extend(b.prefixes);
        completed.extend(b.completed);
        nodes += b.nodes;
    }
    prefixes.sort_by(|a, b| a.order.cmp(&b.order));
    completed.sort();

    Ok(StackCatalog {
        scenario_id: scenario.id.clone(),
        params_digest: params.digest(),
        props: PropertyTable::from_scenario(scenario),
        bodies: scenario
            .boxes
            .iter()
            .map(|b| (b.id.clone(), BoxBody::of(b)))
            .collect(),
        prefixes,
        completed,
        nodes_visited: nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ContentObject;

    fn body(w: f64, mass: f64, stability: f64) -> BoxBody {
        BoxBody {
            w,
            d: w,
            h: 0.1,
            mass,
            stability,
        }
    }

    fn dist(x: f64) -> Disturbance {
        Disturbance {
            offset: [x, 0.0],
            impulse: [0.0, 0.0],
        }
    }

    fn stack_of(items: &[(BoxBody, Disturbance)]) -> PhysStack {
        let mut s = PhysStack::default();
        for (i, (b, d)) in items.iter().enumerate() {
            s.push(&format!("b{i}"), b.clone(), *d);
        }
        s
    }

    pub(crate) fn cube_scenario(k: usize) -> Scenario {
        let boxes: Vec<BoxSpec> = (1..=k)
            .map(|i| {
                BoxSpec::new(format!("box{i}"), (0.2, 0.2, 0.2), 0.005, 690.0, vec![]).unwrap()
            })
            .collect();
        Scenario {
            id: format!("cubes{k}"),
            seed: 1,
            reveal_order: boxes.iter().map(|b| b.id.clone()).collect(),
            boxes,
        }
    }

    /// Support-polygon oracle: the COM x must lie within the overlap interval
    /// shrunk by the margin (1-D, boxes aligned in y).
    fn interval_oracle(
        lower_half: f64,
        upper_half: f64,
        offset: f64,
        com: f64,
        margin: f64,
    ) -> bool {
        let lo = (-lower_half).max(offset - upper_half) + margin;
        let hi = lower_half.min(offset + upper_half) - margin;
        lo <= hi && com >= lo && com <= hi
    }

    #[test]
    fn disturbance_examples() {
        let p = PhysParams::noiseless();
        let d = sample_disturbance(5, &["a", "b"], &p);
        assert_eq!(d, Disturbance::default());

        let p = PhysParams::default();
        let a = sample_disturbance(5, &["box2", "box1"], &p);
        let b = sample_disturbance(5, &["box2".to_string(), "box1".to_string()], &p);
        assert_eq!(a, b);
        assert_ne!(a, sample_disturbance(5, &["box1", "box2"], &p));

        let expected = 0.05 * 0.4 * (13.0f64 * PI / 180.0).sin();
        assert!((impulse_displacement(13.0, &p) - expected).abs() < 1e-15);
        assert!((expected - 0.0045).abs() < 1e-4);
    }

    #[test]
    fn cap_mode_bounds_the_angle() {
        let p = PhysParams {
            impulse_angle_mode: AngleMode::Cap,
            ..Default::default()
        };
        let max = impulse_displacement(13.0, &p);
        for i in 0..500u64 {
            let d = sample_disturbance(i, &["x"], &p);
            assert!(d.impulse[0].hypot(d.impulse[1]) <= max + 1e-15);
        }
    }

    #[test]
    fn support_region_examples() {
        let lower = Rect::centered([0.0, 0.0], 0.3, 0.2);
        let r = support_region(&lower, &Rect::centered([0.0, 0.0], 0.3, 0.2)).unwrap();
        assert_eq!(r, lower);
        let r = support_region(&lower, &Rect::centered([0.05, 0.0], 0.3, 0.2)).unwrap();
        assert!((r.width() - 0.25).abs() < 1e-12 && (r.depth() - 0.2).abs() < 1e-12);
        assert!(support_region(&lower, &Rect::centered([0.35, 0.0], 0.3, 0.2)).is_none());
    }

    #[test]
    fn check_stable_examples() {
        let p = PhysParams::default();
        assert!(check_stable(&stack_of(&[(body(0.1, 1.0, 0.0), dist(0.3))]), &p).is_stable());
        let two = stack_of(&[
            (body(0.2, 1.0, 1.0), dist(0.0)),
            (body(0.2, 1.0, 1.0), dist(0.0)),
        ]);
        assert!(check_stable(&two, &p).is_stable());

        let off = stack_of(&[
            (body(0.1, 1.0, 1.0), dist(0.0)),
            (body(0.1, 1.0, 1.0), dist(0.06)),
        ]);
        assert!(!interval_oracle(0.05, 0.05, 0.06, 0.06, 0.005));
        assert_eq!(check_stable(&off, &p), Stability::Collapse { interface: 1 });

        // tiny box under a large heavy one
        let tiny = stack_of(&[
            (body(0.05, 0.5, 1.0), dist(0.0)),
            (body(0.4, 20.0, 1.0), dist(0.03)),
        ]);
        assert!(!interval_oracle(0.025, 0.2, 0.03, 0.03, 0.005));
        assert_eq!(
            check_stable(&tiny, &p),
            Stability::Collapse { interface: 1 }
        );
    }

    #[test]
    fn check_matches_interval_oracle() {
        let p = PhysParams {
            slosh_coeff: 0.0,
            ..Default::default()
        };
        for i in 0..400 {
            let x = (i as f64 - 200.0) / 1000.0;
            let s = stack_of(&[
                (body(0.2, 1.0, 1.0), dist(0.0)),
                (body(0.12, 1.0, 1.0), dist(x)),
            ]);
            assert_eq!(
                check_stable(&s, &p).is_stable(),
                interval_oracle(0.1, 0.06, x, x, 0.005),
                "offset {x}"
            );
        }
    }

    #[test]
    fn loose_contents_shrink_support() {
        let p = PhysParams::default();
        let rigid = stack_of(&[
            (body(0.2, 1.0, 1.0), dist(0.0)),
            (body(0.2, 1.0, 1.0), dist(0.075)),
        ]);
        let loose = stack_of(&[
            (body(0.2, 1.0, 1.0), dist(0.0)),
            (body(0.2, 1.0, 0.0), dist(0.075)),
        ]);
        assert!(check_stable(&rigid, &p).is_stable());
        assert!(!check_stable(&loose, &p).is_stable());
    }

    #[test]
    fn place_box_examples() {
        let s = cube_scenario(4);
        let noisy = PhysParams::default();
        assert!(place_box(&PhysStack::default(), &s, "box3", &noisy).is_ok());
        let quiet = PhysParams::noiseless();
        let mut st = PhysStack::default();
        for id in ["box4", "box2", "box1", "box3"] {
            st = place_box(&st, &s, id, &quiet).unwrap();
        }
        assert_eq!(st.len(), 4);
        assert!((st.boxes[3].com_height - 0.7).abs() < 1e-12);
    }

    #[test]
    fn place_box_does_not_mutate_on_collapse() {
        let tiny = BoxSpec::new("tiny", (0.05, 0.05, 0.05), 0.005, 690.0, vec![]).unwrap();
        let big = BoxSpec::new(
            "big",
            (0.4, 0.4, 0.2),
            0.005,
            1530.0,
            vec![ContentObject::cuboid(0.2, 0.2, 0.1, 11300.0).unwrap()],
        )
        .unwrap();
        let p = PhysParams::default();
        // find a seed whose sampled offset is about 3 cm
        let seed = (0..10_000u64)
            .find(|s| {
                let d = sample_disturbance(*s, &["tiny", "big"], &p);
                d.offset[0].abs() > 0.03
            })
            .unwrap();
        let base = place_with_seed(&PhysStack::default(), &tiny, seed, &p).unwrap();
        let before = base.clone();
        assert!(place_with_seed(&base, &big, seed, &p).is_err());
        assert_eq!(base, before);
    }

    #[test]
    fn simulate_order_examples() {
        let s = cube_scenario(3);
        let p = PhysParams::noiseless();
        for order in [["box1", "box2", "box3"], ["box3", "box1", "box2"]] {
            assert!(matches!(
                simulate_order(&s, &order, &p),
                SimOutcome::Completed { .. }
            ));
        }

        let mut s = cube_scenario(3);
        s.boxes[0] = BoxSpec::new("box1", (0.02, 0.02, 0.2), 0.005, 690.0, vec![]).unwrap();
        let out = simulate_order(&s, &["box1", "box2", "box3"], &PhysParams::default());
        assert_eq!(
            out,
            simulate_order(&s, &["box1", "box2", "box3"], &PhysParams::default())
        );
        assert!(matches!(
            out,
            SimOutcome::Failed {
                stable_prefix: 1,
                interface: 1
            }
        ));
    }

    #[test]
    fn enumerate_identical_cubes() {
        let c = enumerate_stacks(&cube_scenario(3), &PhysParams::noiseless()).unwrap();
        assert_eq!(c.completed.len(), 6);
        assert_eq!(c.prefixes.len(), 3 + 6 + 6);
        assert!(c.nodes_visited <= 3 + 6 + 6);
        for a in &c.completed {
            for j in 1..=a.len() {
                assert!(c.is_stable_prefix(&a[..j]));
            }
            assert!(c.is_completed(a));
        }
        let pre = vec!["box2".to_string()];
        assert_eq!(c.completions(&pre).count(), 2);
        let rebuilt = c.stack(&c.completed[0]).unwrap();
        assert_eq!(rebuilt.ids(), c.completed[0]);
    }

    #[test]
    fn nested_stacks_are_stable_without_disturbance() {
        let p = PhysParams {
            support_inset: 0.0,
            ..PhysParams::noiseless()
        };
        let widths = [0.4, 0.33, 0.25, 0.2, 0.13, 0.12];
        let boxes: Vec<BoxSpec> = widths
            .iter()
            .enumerate()
            .map(|(i, w)| {
                BoxSpec::new(format!("n{i}"), (*w, *w * 0.9, 0.1), 0.005, 1530.0, vec![]).unwrap()
            })
            .collect();
        let s = Scenario {
            id: "nested".into(),
            seed: 3,
            reveal_order: boxes.iter().map(|b| b.id.clone()).collect(),
            boxes,
        };
        assert!(matches!(
            simulate_order(&s, &s.reveal_order, &p),
            SimOutcome::Completed { .. }
        ));
    }

    #[test]
    fn params_validation() {
        assert!(PhysParams::default().validate().is_ok());
        let bad = PhysParams {
            impulse_angle_deg: 90.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_ne!(
            PhysParams::default().digest(),
            PhysParams::noiseless().digest()
        );
    }
}

//! Sorting preferences, the normalized Levenshtein compliance distance and
//! the natural-language template bank.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keys::KeyBuilder;
use crate::model::{box_stability, box_weight, Measurement, Scenario};
use crate::sim::StackCatalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceKind {
    Weight,
    Size,
    Footprint,
    Stability,
}

impl PreferenceKind {
    pub const ALL: [PreferenceKind; 4] = [
        PreferenceKind::Weight,
        PreferenceKind::Size,
        PreferenceKind::Footprint,
        PreferenceKind::Stability,
    ];

    /// Size and footprint can be seen; weight and stability need interaction.
    pub fn is_apparent(self) -> bool {
        matches!(self, PreferenceKind::Size | PreferenceKind::Footprint)
    }

    pub fn name(self) -> &'static str {
        match self {
            PreferenceKind::Weight => "weight",
            PreferenceKind::Size => "size",
            PreferenceKind::Footprint => "footprint",
            PreferenceKind::Stability => "stability",
        }
    }

    fn title(self) -> &'static str {
        match self {
            PreferenceKind::Weight => "Weight",
            PreferenceKind::Size => "Size",
            PreferenceKind::Footprint => "Footprint",
            PreferenceKind::Stability => "Stability",
        }
    }
}

impl FromStr for PreferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PreferenceKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("preference", format!("unknown kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Largest key at the bottom.
    #[default]
    DescendingFromBottom,
    AscendingFromBottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preference {
    pub kind: PreferenceKind,
    #[serde(default)]
    pub direction: Direction,
    /// Weight in the joint mean.
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Preference {
    pub fn new(kind: PreferenceKind) -> Self {
        Preference {
            kind,
            direction: Direction::default(),
            weight: 1.0,
        }
    }

    pub fn ascending(kind: PreferenceKind) -> Self {
        Preference {
            direction: Direction::AscendingFromBottom,
            ..Preference::new(kind)
        }
    }

    pub fn is_apparent(&self) -> bool {
        self.kind.is_apparent()
    }
}

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        if self.direction == Direction::AscendingFromBottom {
            f.write_str(":asc")?;
        }
        Ok(())
    }
}

impl FromStr for Preference {
    type Err = Error;

    /// `kind` or `kind:asc` / `kind:desc`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, dir) = match s.split_once(':') {
            Some((k, d)) => (k, Some(d.trim())),
            None => (s, None),
        };
        let kind: PreferenceKind = kind.parse()?;
        match dir {
            None | Some("desc") => Ok(Preference::new(kind)),
            Some("asc") => Ok(Preference::ascending(kind)),
            Some(other) => Err(Error::invalid(
                "preference",
                format!("unknown direction {other:?}"),
            )),
        }
    }
}

/// A non-empty list of preferences with unique kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Preference>", into = "Vec<Preference>")]
pub struct PreferenceSet {
    prefs: Vec<Preference>,
}

impl PreferenceSet {
    pub fn new(prefs: Vec<Preference>) -> Result<Self> {
        if prefs.is_empty() {
            return Err(Error::invalid("preference set", "empty"));
        }
        for (i, p) in prefs.iter().enumerate() {
            if prefs[..i].iter().any(|q| q.kind == p.kind) {
                return Err(Error::invalid(
                    "preference set",
                    format!("duplicate kind {}", p.kind.name()),
                ));
            }
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(Error::invalid("preference set", "weights must be positive"));
            }
        }
        Ok(PreferenceSet { prefs })
    }

    pub fn single(kind: PreferenceKind) -> Self {
        PreferenceSet {
            prefs: vec![Preference::new(kind)],
        }
    }

    pub fn of(kinds: &[PreferenceKind]) -> Result<Self> {
        Self::new(kinds.iter().copied().map(Preference::new).collect())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Preference> {
        self.prefs.iter()
    }

    pub fn as_slice(&self) -> &[Preference] {
        &self.prefs
    }

    pub fn len(&self) -> usize {
        self.prefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefs.is_empty()
    }

    /// Members built on visually apparent properties.
    pub fn apparent(&self) -> Option<PreferenceSet> {
        let prefs: Vec<_> = self
            .prefs
            .iter()
            .copied()
            .filter(Preference::is_apparent)
            .collect();
        (!prefs.is_empty()).then_some(PreferenceSet { prefs })
    }

    /// Comma list, e.g. `weight,size`.
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Human title as used in report tables, e.g. `Weight & Size`.
    pub fn title(&self) -> String {
        self.prefs
            .iter()
            .map(|p| match p.direction {
                Direction::DescendingFromBottom => p.kind.title().to_string(),
                Direction::AscendingFromBottom => format!("{} (asc)", p.kind.title()),
            })
            .collect::<Vec<_>>()
            .join(" & ")
    }

    /// The five sets evaluated in the reference results table.
    pub fn table_sets() -> Vec<PreferenceSet> {
        use PreferenceKind::*;
        [
            &[Footprint][..],
            &[Size],
            &[Weight],
            &[Weight, Size],
            &[Weight, Stability],
        ]
        .into_iter()
        .map(|k| PreferenceSet::of(k).expect("valid"))
        .collect()
    }
}

impl fmt::Display for PreferenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.prefs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for PreferenceSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let prefs = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Preference>>>()?;
        PreferenceSet::new(prefs)
    }
}

impl TryFrom<Vec<Preference>> for PreferenceSet {
    type Error = Error;

    fn try_from(v: Vec<Preference>) -> Result<Self> {
        PreferenceSet::new(v)
    }
}

impl From<PreferenceSet> for Vec<Preference> {
    fn from(p: PreferenceSet) -> Self {
        p.prefs
    }
}

/// Sort keys of one box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxProps {
    pub weight: f64,
    pub size: f64,
    pub footprint: f64,
    pub stability: f64,
}

impl BoxProps {
    pub fn key(&self, kind: PreferenceKind) -> f64 {
        match kind {
            PreferenceKind::Weight => self.weight,
            PreferenceKind::Size => self.size,
            PreferenceKind::Footprint => self.footprint,
            PreferenceKind::Stability => self.stability,
        }
    }
}

/// Per-box sort keys, ground truth or as observed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyTable(pub BTreeMap<String, BoxProps>);

impl PropertyTable {
    pub fn from_scenario(s: &Scenario) -> Self {
        PropertyTable(
            s.boxes
                .iter()
                .map(|b| {
                    (
                        b.id.clone(),
                        BoxProps {
                            weight: box_weight(b),
                            size: b.outer_volume(),
                            footprint: b.footprint(),
                            stability: box_stability(b).clamp(0.0, 1.0),
                        },
                    )
                })
                .collect(),
        )
    }

    /// Apparent keys from geometry plus latent keys from measurements.
    pub fn from_observation<'a>(
        dims: impl IntoIterator<Item = (&'a str, (f64, f64, f64))>,
        measurements: &[Measurement],
    ) -> Self {
        let mut t = BTreeMap::new();
        for (id, (w, d, h)) in dims {
            if let Some(m) = measurements.iter().find(|m| m.box_id == id) {
                t.insert(
                    id.to_string(),
                    BoxProps {
                        weight: m.weight_kg,
                        size: w * d * h,
                        footprint: w * d,
                        stability: m.stability_audio,
                    },
                );
            }
        }
        PropertyTable(t)
    }

    pub fn get(&self, id: &str) -> Option<&BoxProps> {
        self.0.get(id)
    }

    /// Panics if `id` is missing: callers guarantee coverage.
    pub fn key(&self, id: &str, kind: PreferenceKind) -> f64 {
        self.0
            .get(id)
            .unwrap_or_else(|| panic!("property table has no entry for box {id}"))
            .key(kind)
    }
}

/// Stable sort by the preference key; the returned order is bottom-to-top.
pub fn sort_by_preference<S: AsRef<str>>(
    ids: &[S],
    p: &Preference,
    props: &PropertyTable,
) -> Vec<String> {
    let mut keyed: Vec<(f64, &str)> = ids
        .iter()
        .map(|id| (props.key(id.as_ref(), p.kind), id.as_ref()))
        .collect();
    match p.direction {
        Direction::DescendingFromBottom => keyed.sort_by(|a, b| b.0.total_cmp(&a.0)),
        Direction::AscendingFromBottom => keyed.sort_by(|a, b| a.0.total_cmp(&b.0)),
    }
    keyed.into_iter().map(|(_, id)| id.to_string()).collect()
}

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized distance of `a` from its own preference-sorted order; 0 is perfect.
pub fn phi<S: AsRef<str>>(a: &[S], p: &Preference, props: &PropertyTable) -> f64 {
    assert!(!a.is_empty(), "phi of an empty sequence");
    let sorted = sort_by_preference(a, p, props);
    let a: Vec<&str> = a.iter().map(AsRef::as_ref).collect();
    let sorted: Vec<&str> = sorted.iter().map(String::as_str).collect();
    levenshtein(&a, &sorted) as f64 / a.len() as f64
}

/// 1 − weighted mean φ over the set; 1 is perfect compliance.
pub fn joint_score<S: AsRef<str>>(a: &[S], prefs: &PreferenceSet, props: &PropertyTable) -> f64 {
    let total_w: f64 = prefs.iter().map(|p| p.weight).sum();
    let mean = prefs
        .iter()
        .map(|p| p.weight * phi(a, p, props))
        .sum::<f64>()
        / total_w;
    1.0 - mean
}

/// Ranking used for every selection: higher score first, then the
/// lexicographically smaller id sequence.
pub fn rank(score_a: f64, a: &[String], score_b: f64, b: &[String]) -> Ordering {
    score_b.total_cmp(&score_a).then_with(|| a.cmp(b))
}

/// Best (score, stack) among `candidates` under `rank`.
pub fn argmax<'a, I>(candidates: I, score: impl Fn(&[String]) -> f64) -> Option<(&'a [String], f64)>
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut best: Option<(&'a [String], f64)> = None;
    for c in candidates {
        let s = score(c);
        best = match best {
            Some((b, bs)) if rank(bs, b, s, c) != Ordering::Greater => Some((b, bs)),
            _ => Some((c, s)),
        };
    }
    best
}

/// The completed stable stack with the highest joint score.
pub fn best_achievable(
    catalog: &StackCatalog,
    prefs: &PreferenceSet,
) -> Result<(Vec<String>, f64)> {
    best_achievable_with(catalog, prefs, &catalog.props)
}

pub fn best_achievable_with(
    catalog: &StackCatalog,
    prefs: &PreferenceSet,
    props: &PropertyTable,
) -> Result<(Vec<String>, f64)> {
    argmax(catalog.completed.iter().map(Vec::as_slice), |a| {
        joint_score(a, prefs, props)
    })
    .map(|(a, s)| (a.to_vec(), s))
    .ok_or_else(|| Error::NoStableStack(catalog.scenario_id.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Template {
    pub id: u32,
    pub split: Split,
    pub frame: String,
    pub joiner: String,
    /// Per kind: [descending phrase, ascending phrase].
    pub phrases: BTreeMap<PreferenceKind, [String; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateBank {
    pub version: u32,
    pub templates: Vec<Template>,
}

const BUILTIN_TEMPLATES: &str = include_str!("../data/templates.json");

impl TemplateBank {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_TEMPLATES).expect("built-in template bank is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: TemplateBank = serde_json::from_str(text)
            .map_err(|e| Error::invalid("template bank", e.to_string()))?;
        for t in &bank.templates {
            if !t.frame.contains("{}") {
                return Err(Error::invalid(
                    "template bank",
                    format!("template {} lacks {{}}", t.id),
                ));
            }
            if PreferenceKind::ALL
                .iter()
                .any(|k| !t.phrases.contains_key(k))
            {
                return Err(Error::invalid(
                    "template bank",
                    format!("template {} misses a preference kind", t.id),
                ));
            }
        }
        Ok(bank)
    }

    pub fn get(&self, id: u32) -> Result<&Template> {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self, split: Split) -> Vec<u32> {
        self.templates
            .iter()
            .filter(|t| t.split == split)
            .map(|t| t.id)
            .collect()
    }

    pub fn render(
        &self,
        prefs: &PreferenceSet,
        choice: TemplateChoice,
    ) -> Result<RenderedPreference> {
        let id = match choice {
            TemplateChoice::Id(id) => id,
            TemplateChoice::Random { split, key } => {
                let ids = self.ids(split);
                if ids.is_empty() {
                    return Err(Error::UnknownTemplate(format!("no {split:?} templates")));
                }
                let mut rng = KeyBuilder::new("template").u64(key).rng();
                ids[rng.random_range(0..ids.len())]
            }
        };
        let t = self.get(id)?;
        let parts: Vec<&str> = prefs
            .iter()
            .map(|p| {
                let pair = &t.phrases[&p.kind];
                match p.direction {
                    Direction::DescendingFromBottom => pair[0].as_str(),
                    Direction::AscendingFromBottom => pair[1].as_str(),
                }
            })
            .collect();
        Ok(RenderedPreference {
            template_id: id,
            text: t.frame.replacen("{}", &parts.join(&t.joiner), 1),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateChoice {
    Id(u32),
    Random { split: Split, key: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPreference {
    pub template_id: u32,
    pub text: String,
}

/// Renders `prefs` with the built-in bank.
pub fn render_preference(
    prefs: &PreferenceSet,
    choice: TemplateChoice,
) -> Result<RenderedPreference> {
    TemplateBank::builtin().render(prefs, choice)
}

//! Semantic descriptions of services and user requests.
//!
//! A description is a set of `(attribute id, attribute value)` integer
//! tuples, both components in `1..=100`. Descriptions are kept sorted by id
//! and carry unique ids, which makes the canonical text encoding a pure
//! function of the tuple set.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;

use crate::error::{EcoError, Result};

pub const ATTR_MIN: u8 = 1;
pub const ATTR_MAX: u8 = 100;

/// Smallest and largest tuple count of an agent's description.
pub const AGENT_MIN_TUPLES: usize = 3;
pub const AGENT_MAX_TUPLES: usize = 6;

/// Width of one rendered field in characters.
pub const FIELD_CHARS: usize = 6;
/// Bits per encoded tuple: two fields of six 8-bit characters.
pub const BITS_PER_TUPLE: usize = 2 * FIELD_CHARS * 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttributeTuple {
    pub id: u8,
    pub value: u8,
}

impl AttributeTuple {
    pub fn new(id: u8, value: u8) -> Result<Self> {
        let t = AttributeTuple { id, value };
        t.validate()?;
        Ok(t)
    }

    pub fn is_valid(&self) -> bool {
        (ATTR_MIN..=ATTR_MAX).contains(&self.id) && (ATTR_MIN..=ATTR_MAX).contains(&self.value)
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(EcoError::TupleOutOfRange(*self))
        }
    }
}

impl fmt::Display for AttributeTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.id, self.value)
    }
}

impl From<(u8, u8)> for AttributeTuple {
    /// Unchecked conversion; validation happens when the tuple is placed in a
    /// [`SemanticDescription`].
    fn from((id, value): (u8, u8)) -> Self {
        AttributeTuple { id, value }
    }
}

/// A sorted set of attribute tuples with unique ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SemanticDescription {
    tuples: Vec<AttributeTuple>,
}

impl SemanticDescription {
    /// Validates and sorts. Rejects empty input, out-of-range tuples and
    /// repeated ids.
    pub fn new(mut tuples: Vec<AttributeTuple>) -> Result<Self> {
        if tuples.is_empty() {
            return Err(EcoError::EmptyDescription);
        }
        for t in &tuples {
            t.validate()?;
        }
        tuples.sort_unstable();
        for w in tuples.windows(2) {
            if w[0].id == w[1].id {
                return Err(EcoError::DuplicateId(w[0].id));
            }
        }
        Ok(SemanticDescription { tuples })
    }

    pub fn from_pairs(pairs: &[(u8, u8)]) -> Result<Self> {
        Self::new(pairs.iter().copied().map(AttributeTuple::from).collect())
    }

    /// Like [`SemanticDescription::new`] but also enforces the 3..=6 tuple
    /// bound for agent descriptions.
    pub fn new_agent(tuples: Vec<AttributeTuple>) -> Result<Self> {
        let d = Self::new(tuples)?;
        d.validate_agent()?;
        Ok(d)
    }

    pub fn validate_agent(&self) -> Result<()> {
        let n = self.tuples.len();
        if (AGENT_MIN_TUPLES..=AGENT_MAX_TUPLES).contains(&n) {
            Ok(())
        } else {
            Err(EcoError::AgentDescriptionSize(n))
        }
    }

    pub fn tuples(&self) -> &[AttributeTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn value_of(&self, id: u8) -> Option<u8> {
        self.tuples
            .binary_search_by_key(&id, |t| t.id)
            .ok()
            .map(|i| self.tuples[i].value)
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.tuples.iter().map(|t| t.id)
    }

    /// Canonical encoding of this (already validated) description.
    pub fn encode(&self) -> CanonicalEncoding {
        CanonicalEncoding::from_sorted(&self.tuples)
    }
}

impl fmt::Display for SemanticDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.tuples.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

/// Fixed-width text rendering of a description, stored as bytes. Each tuple
/// becomes twelve characters: the id and the value as decimal text, each
/// right-padded with spaces to six characters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalEncoding {
    bytes: Vec<u8>,
}

impl CanonicalEncoding {
    fn from_sorted(tuples: &[AttributeTuple]) -> Self {
        let mut bytes = Vec::with_capacity(tuples.len() * 2 * FIELD_CHARS);
        for t in tuples {
            push_field(&mut bytes, t.id);
            push_field(&mut bytes, t.value);
        }
        CanonicalEncoding { bytes }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }

    /// Bit `i`, most significant bit of each character first.
    pub fn bit(&self, i: usize) -> bool {
        (self.bytes[i / 8] >> (7 - i % 8)) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.bit_len()).map(move |i| self.bit(i))
    }
}

fn push_field(out: &mut Vec<u8>, n: u8) {
    let text = n.to_string();
    out.extend_from_slice(text.as_bytes());
    out.extend(std::iter::repeat(b' ').take(FIELD_CHARS - text.len()));
}

/// Validates, sorts and encodes a raw tuple list.
pub fn canonicalize(tuples: &[AttributeTuple]) -> Result<CanonicalEncoding> {
    Ok(SemanticDescription::new(tuples.to_vec())?.encode())
}

/// Normalized distance between two tuple sets, in `[0, 1]`.
///
/// Ids present in both sets contribute `min(1, |Δvalue| / 100)`, ids present
/// in only one contribute 1, and the sum is divided by the number of distinct
/// ids across both sets.
pub fn difference(a: &SemanticDescription, b: &SemanticDescription) -> f64 {
    difference_sorted(&a.tuples, &b.tuples)
}

fn difference_sorted(a: &[AttributeTuple], b: &[AttributeTuple]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    let mut union = 0usize;
    while i < a.len() || j < b.len() {
        union += 1;
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x.id == y.id => {
                let dv = (x.value as f64 - y.value as f64).abs() / 100.0;
                sum += dv.min(1.0);
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.id < y.id => {
                sum += 1.0;
                i += 1;
            }
            (Some(_), Some(_)) => {
                sum += 1.0;
                j += 1;
            }
            (Some(_), None) => {
                sum += 1.0;
                i += 1;
            }
            (None, Some(_)) => {
                sum += 1.0;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    if union == 0 {
        0.0
    } else {
        sum / union as f64
    }
}

/// Tolerance band around the requested difference accepted by
/// [`generate_variant`].
pub const VARIANT_TOLERANCE: f64 = 0.03;
const VARIANT_ATTEMPTS: usize = 64;
const VARIANT_EDITS: usize = 48;

/// Produces a random description whose difference from `desc` is close to
/// `target_diff`. Returns the closest candidate found when the band cannot be
/// hit within the retry budget. Tuple counts stay within the agent bounds
/// when the input satisfies them.
pub fn generate_variant<R: Rng + ?Sized>(
    desc: &SemanticDescription,
    target_diff: f64,
    rng: &mut R,
) -> SemanticDescription {
    let target = target_diff.clamp(0.0, 1.0);
    if target == 0.0 {
        return desc.clone();
    }
    let (min_len, max_len) = if desc.validate_agent().is_ok() {
        (AGENT_MIN_TUPLES, AGENT_MAX_TUPLES)
    } else {
        (1, usize::MAX)
    };
    if target >= 1.0 {
        return disjoint_variant(desc, rng);
    }

    let mut best = desc.clone();
    let mut best_err = target;
    for _ in 0..VARIANT_ATTEMPTS {
        let mut cand: BTreeMap<u8, u8> = desc.tuples.iter().map(|t| (t.id, t.value)).collect();
        for _ in 0..VARIANT_EDITS {
            let next = edit(desc, &cand, target, min_len, max_len, rng);
            let d = difference_sorted(&desc.tuples, &to_tuples(&next));
            if d > target + VARIANT_TOLERANCE {
                continue;
            }
            cand = next;
            let err = (d - target).abs();
            if err < best_err {
                best_err = err;
                best = SemanticDescription { tuples: to_tuples(&cand) };
            }
            if err <= VARIANT_TOLERANCE {
                return best;
            }
        }
    }
    best
}

fn to_tuples(m: &BTreeMap<u8, u8>) -> Vec<AttributeTuple> {
    m.iter().map(|(&id, &value)| AttributeTuple { id, value }).collect()
}

fn edit<R: Rng + ?Sized>(
    orig: &SemanticDescription,
    cand: &BTreeMap<u8, u8>,
    target: f64,
    min_len: usize,
    max_len: usize,
    rng: &mut R,
) -> BTreeMap<u8, u8> {
    let mut next = cand.clone();
    let current = difference_sorted(&orig.tuples, &to_tuples(cand));
    let roll: f64 = rng.gen();
    if roll < 0.7 {
        // Value nudge sized to the remaining distance.
        let union = (orig.len().max(cand.len()) as f64).max(1.0);
        let remaining = ((target - current) * union * 100.0).ceil().max(1.0) as i32;
        let keys: Vec<u8> = next.keys().copied().collect();
        let id = keys[rng.gen_range(0..keys.len())];
        let v = next[&id] as i32;
        let step = rng.gen_range(1..=remaining.min(99));
        let up = v + step;
        let down = v - step;
        let nv = match (up <= 100, down >= 1) {
            (true, true) => {
                if rng.gen_bool(0.5) {
                    up
                } else {
                    down
                }
            }
            (true, false) => up,
            (false, true) => down,
            (false, false) => v,
        };
        next.insert(id, nv as u8);
    } else if roll < 0.8 {
        // Replace an id with an unused one.
        let keys: Vec<u8> = next.keys().copied().collect();
        let old = keys[rng.gen_range(0..keys.len())];
        let new_id = unused_id(&next, rng);
        let value = next.remove(&old).unwrap_or(1);
        next.insert(new_id, value);
    } else if roll < 0.9 {
        if next.len() > min_len {
            let keys: Vec<u8> = next.keys().copied().collect();
            next.remove(&keys[rng.gen_range(0..keys.len())]);
        }
    } else if next.len() < max_len {
        let new_id = unused_id(&next, rng);
        next.insert(new_id, rng.gen_range(ATTR_MIN..=ATTR_MAX));
    }
    next
}

fn unused_id<R: Rng + ?Sized>(m: &BTreeMap<u8, u8>, rng: &mut R) -> u8 {
    loop {
        let id = rng.gen_range(ATTR_MIN..=ATTR_MAX);
        if !m.contains_key(&id) {
            return id;
        }
    }
}

fn disjoint_variant<R: Rng + ?Sized>(desc: &SemanticDescription, rng: &mut R) -> SemanticDescription {
    let used: BTreeSet<u8> = desc.ids().collect();
    let mut fresh = BTreeMap::new();
    while fresh.len() < desc.len() {
        let id = rng.gen_range(ATTR_MIN..=ATTR_MAX);
        if !used.contains(&id) && !fresh.contains_key(&id) {
            fresh.insert(id, rng.gen_range(ATTR_MIN..=ATTR_MAX));
        }
    }
    SemanticDescription { tuples: to_tuples(&fresh) }
}

/// A user request: an ordered list of tuple groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UserRequest {
    parts: Vec<SemanticDescription>,
}

impl UserRequest {
    pub fn new(parts: Vec<SemanticDescription>) -> Result<Self> {
        if parts.is_empty() {
            return Err(EcoError::EmptyRequest);
        }
        Ok(UserRequest { parts })
    }

    pub fn parts(&self) -> &[SemanticDescription] {
        &self.parts
    }

    /// Mean value per attribute id across all parts, rounded to the nearest
    /// integer. Used to compare whole requests with [`difference`].
    pub fn centroid(&self) -> SemanticDescription {
        let mut acc: BTreeMap<u8, (u32, u32)> = BTreeMap::new();
        for t in self.parts.iter().flat_map(|p| p.tuples()) {
            let e = acc.entry(t.id).or_insert((0, 0));
            e.0 += t.value as u32;
            e.1 += 1;
        }
        let tuples = acc
            .into_iter()
            .map(|(id, (sum, n))| AttributeTuple {
                id,
                value: ((sum as f64 / n as f64).round() as u8).clamp(ATTR_MIN, ATTR_MAX),
            })
            .collect();
        SemanticDescription { tuples }
    }
}

impl fmt::Display for UserRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("]")
    }
}

/// Concatenates the parts' tuples in part order; duplicates are kept.
pub fn flatten(req: &UserRequest) -> Vec<AttributeTuple> {
    req.parts.iter().flat_map(|p| p.tuples().iter().copied()).collect()
}

/// Human-readable labels for attribute ids and values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FilterMap {
    labels: HashMap<u8, String>,
    values: HashMap<(u8, u8), String>,
}

impl FilterMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_label(mut self, id: u8, label: impl Into<String>) -> Self {
        self.labels.insert(id, label.into());
        self
    }

    pub fn with_value(mut self, id: u8, value: u8, text: impl Into<String>) -> Self {
        self.values.insert((id, value), text.into());
        self
    }

    /// Parses the line format: `id<TAB>Label` and `id,value<TAB>Text`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = FilterMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| EcoError::FilterMap { line: n + 1, msg: msg.to_string() };
            let (key, label) = line.split_once('\t').ok_or_else(|| err("missing TAB separator"))?;
            if label.is_empty() {
                return Err(err("empty label"));
            }
            let parse_num = |s: &str| -> Result<u8> {
                let v: u8 = s.trim().parse().map_err(|_| err("attribute number expected"))?;
                if (ATTR_MIN..=ATTR_MAX).contains(&v) {
                    Ok(v)
                } else {
                    Err(err("attribute number out of range 1..=100"))
                }
            };
            match key.split_once(',') {
                Some((id, value)) => {
                    map.values.insert((parse_num(id)?, parse_num(value)?), label.to_string());
                }
                None => {
                    map.labels.insert(parse_num(key)?, label.to_string());
                }
            }
        }
        Ok(map)
    }

    pub fn render_tuple(&self, t: &AttributeTuple) -> String {
        match self.labels.get(&t.id) {
            Some(label) => match self.values.get(&(t.id, t.value)) {
                Some(text) => format!("({label}, {text})"),
                None => format!("({label}, {})", t.value),
            },
            None => format!("({}, {})", t.id, t.value),
        }
    }

    pub fn render_description(&self, desc: &SemanticDescription) -> String {
        let items: Vec<String> = desc.tuples().iter().map(|t| self.render_tuple(t)).collect();
        format!("{{{}}}", items.join(", "))
    }
}

/// Something the semantic filter can render: one line per tuple group.
pub trait Filterable {
    fn groups(&self) -> Vec<&SemanticDescription>;
}

impl Filterable for SemanticDescription {
    fn groups(&self) -> Vec<&SemanticDescription> {
        vec![self]
    }
}

impl Filterable for UserRequest {
    fn groups(&self) -> Vec<&SemanticDescription> {
        self.parts.iter().collect()
    }
}

pub fn apply_filter<F: Filterable + ?Sized>(item: &F, map: &FilterMap) -> String {
    item.groups()
        .into_iter()
        .map(|g| map.render_description(g))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses descriptions written as `{(1,25), (2,35)}` or a bare tuple list
/// `(1,25),(2,35)`. Multiple groups may be given on one line as
/// `[{...}, {...}]`.
pub fn parse_groups(text: &str) -> Result<Vec<SemanticDescription>> {
    let mut groups = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let body = line.trim_start_matches('[').trim_end_matches(']');
        let chunks: Vec<&str> = if body.contains('{') {
            body.split('}')
                .map(|c| c.trim_start_matches([',', ' ']).trim_start_matches('{'))
                .filter(|c| !c.trim().is_empty())
                .collect()
        } else {
            vec![body]
        };
        for chunk in chunks {
            let mut tuples = Vec::new();
            for item in chunk.split(')') {
                let item = item.trim_start_matches([',', ' ']).trim();
                if item.is_empty() {
                    continue;
                }
                let inner = item.trim_start_matches('(');
                let (a, b) = inner
                    .split_once(',')
                    .ok_or_else(|| EcoError::Config(format!("malformed tuple `{item})`")))?;
                let id: u8 = a
                    .trim()
                    .parse()
                    .map_err(|_| EcoError::Config(format!("bad attribute id `{a}`")))?;
                let value: u8 = b
                    .trim()
                    .parse()
                    .map_err(|_| EcoError::Config(format!("bad attribute value `{b}`")))?;
                tuples.push(AttributeTuple { id, value });
            }
            groups.push(SemanticDescription::new(tuples)?);
        }
    }
    Ok(groups)
}

//! Symbolic descriptions of infinite metric graph families.
//!
//! A [`GraphFamilySpec`] is a JSON document (schema `qgends-spec/1`, see
//! `docs/qgends-spec-1.schema.json`). Sequences are restricted to the grammar
//! of [`SequenceSpec`], whose series convergence is decided exactly by
//! [`seq_series_sum`].

use std::collections::BTreeSet;
use std::fmt;

use serde_json::{Map, Value};

use crate::error::SpecError;
use crate::scalar::Scalar;
use crate::series::{NormalForm, SeriesSum};

pub const SCHEMA_VERSION: &str = "qgends-spec/1";

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSpec {
    Constant { c: Scalar },
    Geometric { a: Scalar, r: Scalar },
    /// `a · (n + 1)^(−p)`.
    Power { a: Scalar, p: Scalar },
    /// `prefix[n]` for `n < len(prefix)`, then `tail(n − len(prefix))`.
    Explicit { prefix: Vec<Scalar>, tail: Box<SequenceSpec> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclaredEnds {
    One,
    Two,
    Cantor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGraphSpec {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, Scalar)>,
    pub boundary: Vec<usize>,
    pub root: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    RadialTree {
        b: SequenceSpec,
        ell: SequenceSpec,
    },
    HalfLinePath {
        ell: SequenceSpec,
    },
    FullLinePath {
        ell_pos: SequenceSpec,
        ell_neg: SequenceSpec,
    },
    /// A half-line path `v_0 v_1 …` with a copy of `attachment`, lengths
    /// multiplied by `scaling(n)`, glued by its root to every `v_n`.
    ChainWithAttachments {
        ell: SequenceSpec,
        attachment: Box<GraphFamilySpec>,
        scaling: SequenceSpec,
    },
    /// Spheres `S_0 = {root}, S_1, …` of sizes `sphere_sizes(n)`; vertex `j`
    /// of `S_{n+1}` hangs below vertex `⌊j σ_n / σ_{n+1}⌋` of `S_n` by an
    /// edge of length `ell(n)`. With one declared end every sphere `S_n`,
    /// `n ≥ 1`, is additionally closed into a cycle with edges of length `ell(n)`.
    SphereSymmetric {
        sphere_sizes: SequenceSpec,
        ell: SequenceSpec,
        ends: DeclaredEnds,
        cayley: bool,
    },
    FiniteGraph(FiniteGraphSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphFamilySpec {
    pub family: Family,
    pub name: Option<String>,
    pub notes: Option<String>,
}

/// Cardinalities of end spaces, ordered `Finite(0) < Finite(1) < … <
/// CountablyInfinite < Uncountable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtendedCount {
    Finite(u64),
    CountablyInfinite,
    Uncountable,
}

impl ExtendedCount {
    pub const ZERO: ExtendedCount = ExtendedCount::Finite(0);

    pub fn is_zero(self) -> bool {
        self == ExtendedCount::ZERO
    }

    pub fn is_infinite(self) -> bool {
        !matches!(self, ExtendedCount::Finite(_))
    }

    pub fn add(self, o: ExtendedCount) -> ExtendedCount {
        match (self, o) {
            (ExtendedCount::Finite(a), ExtendedCount::Finite(b)) => ExtendedCount::Finite(a + b),
            (a, b) => a.max(b),
        }
    }

    /// `self` copies repeated countably infinitely often.
    pub fn times_countable(self) -> ExtendedCount {
        match self {
            ExtendedCount::Finite(0) => ExtendedCount::ZERO,
            ExtendedCount::Finite(_) | ExtendedCount::CountablyInfinite => ExtendedCount::CountablyInfinite,
            ExtendedCount::Uncountable => ExtendedCount::Uncountable,
        }
    }

    pub fn to_json(self) -> Value {
        match self {
            ExtendedCount::Finite(k) => Value::from(k),
            ExtendedCount::CountablyInfinite => Value::from("countably_infinite"),
            ExtendedCount::Uncountable => Value::from("uncountable"),
        }
    }
}

impl fmt::Display for ExtendedCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedCount::Finite(k) => write!(f, "{k}"),
            ExtendedCount::CountablyInfinite => f.write_str("countably_infinite"),
            ExtendedCount::Uncountable => f.write_str("uncountable"),
        }
    }
}

impl serde::Serialize for ExtendedCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl SequenceSpec {
    pub fn constant(c: Scalar) -> Self {
        SequenceSpec::Constant { c }
    }

    pub fn geometric(a: Scalar, r: Scalar) -> Self {
        SequenceSpec::Geometric { a, r }
    }

    pub fn power(a: Scalar, p: Scalar) -> Self {
        SequenceSpec::Power { a, p }
    }

    pub fn explicit(prefix: Vec<Scalar>, tail: SequenceSpec) -> Self {
        SequenceSpec::Explicit {
            prefix,
            tail: Box::new(tail),
        }
    }

    pub fn normal_form(&self) -> NormalForm {
        match self {
            SequenceSpec::Constant { c } => NormalForm::constant(c.clone()),
            SequenceSpec::Geometric { a, r } => NormalForm::geometric(a.clone(), r.clone()),
            SequenceSpec::Power { a, p } => NormalForm::power(a.clone(), p.clone()),
            SequenceSpec::Explicit { prefix, tail } => NormalForm::explicit(prefix.clone(), tail.normal_form()),
        }
    }

    /// True when every number in the sequence was given exactly.
    pub fn is_exact(&self) -> bool {
        self.normal_form().is_exact()
    }

    /// Every term multiplied by `c`.
    pub fn scaled(&self, c: &Scalar) -> SequenceSpec {
        match self {
            SequenceSpec::Constant { c: v } => SequenceSpec::Constant { c: v.mul(c) },
            SequenceSpec::Geometric { a, r } => SequenceSpec::Geometric {
                a: a.mul(c),
                r: r.clone(),
            },
            SequenceSpec::Power { a, p } => SequenceSpec::Power {
                a: a.mul(c),
                p: p.clone(),
            },
            SequenceSpec::Explicit { prefix, tail } => SequenceSpec::Explicit {
                prefix: prefix.iter().map(|x| x.mul(c)).collect(),
                tail: Box::new(tail.scaled(c)),
            },
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        match self {
            SequenceSpec::Constant { c } => {
                m.insert("kind".into(), "constant".into());
                m.insert("c".into(), c.to_json());
            }
            SequenceSpec::Geometric { a, r } => {
                m.insert("kind".into(), "geometric".into());
                m.insert("a".into(), a.to_json());
                m.insert("r".into(), r.to_json());
            }
            SequenceSpec::Power { a, p } => {
                m.insert("kind".into(), "power".into());
                m.insert("a".into(), a.to_json());
                m.insert("p".into(), p.to_json());
            }
            SequenceSpec::Explicit { prefix, tail } => {
                m.insert("kind".into(), "explicit".into());
                m.insert("prefix".into(), Value::Array(prefix.iter().map(Scalar::to_json).collect()));
                m.insert("tail".into(), tail.to_json());
            }
        }
        Value::Object(m)
    }

    pub fn from_json(v: &Value, path: &str) -> Result<Self, SpecError> {
        let mut obj = Obj::new(v, path)?;
        let kind = obj.string("kind")?;
        let seq = match kind.as_str() {
            "constant" => SequenceSpec::Constant { c: obj.scalar("c")? },
            "geometric" => SequenceSpec::Geometric {
                a: obj.scalar("a")?,
                r: obj.scalar("r")?,
            },
            "power" => SequenceSpec::Power {
                a: obj.scalar("a")?,
                p: obj.scalar("p")?,
            },
            "explicit" => {
                let prefix = obj
                    .array("prefix")?
                    .iter()
                    .enumerate()
                    .map(|(i, x)| parse_scalar(x, &format!("{path}.prefix[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let tail_path = format!("{path}.tail");
                let tail = SequenceSpec::from_json(obj.required("tail")?, &tail_path)?;
                SequenceSpec::Explicit {
                    prefix,
                    tail: Box::new(tail),
                }
            }
            other => return Err(schema(format!("{path}.kind"), format!("unknown sequence kind {other:?}"))),
        };
        obj.finish()?;
        Ok(seq)
    }

    /// Checks that every term is a positive finite number; `as_length`
    /// selects the error reported on violation.
    fn check_positive(&self, path: &str, as_length: bool) -> Result<(), SpecError> {
        let fail = |p: String, v: &Scalar, what: &str| {
            if as_length {
                SpecError::NonPositiveLength {
                    path: p,
                    value: v.to_string(),
                }
            } else {
                invariant(p, format!("{what} must be positive and finite, got {v}"))
            }
        };
        let ok = |v: &Scalar| v.is_positive() && v.is_finite();
        match self {
            SequenceSpec::Constant { c } if !ok(c) => Err(fail(format!("{path}.c"), c, "c")),
            SequenceSpec::Geometric { a, .. } if !ok(a) => Err(fail(format!("{path}.a"), a, "a")),
            SequenceSpec::Geometric { r, .. } if !ok(r) => Err(fail(format!("{path}.r"), r, "r")),
            SequenceSpec::Power { a, .. } if !ok(a) => Err(fail(format!("{path}.a"), a, "a")),
            SequenceSpec::Power { p, .. } if !p.is_finite() => {
                Err(invariant(format!("{path}.p"), "exponent must be finite".into()))
            }
            SequenceSpec::Explicit { prefix, tail } => {
                for (i, x) in prefix.iter().enumerate() {
                    if !ok(x) {
                        return Err(fail(format!("{path}.prefix[{i}]"), x, "term"));
                    }
                }
                tail.check_positive(&format!("{path}.tail"), as_length)
            }
            _ => Ok(()),
        }
    }
}

/// The `n`-th term; exact when the sequence was given exactly.
pub fn seq_eval(s: &SequenceSpec, n: u64) -> Scalar {
    s.normal_form().term(n)
}

/// `Σ_{n≥0} s(n)`, decided in closed form.
pub fn seq_series_sum(s: &SequenceSpec) -> SeriesSum {
    s.normal_form().sum()
}

impl DeclaredEnds {
    fn as_str(self) -> &'static str {
        match self {
            DeclaredEnds::One => "one",
            DeclaredEnds::Two => "two",
            DeclaredEnds::Cantor => "cantor",
        }
    }
}

impl GraphFamilySpec {
    pub fn new(family: Family) -> Self {
        GraphFamilySpec {
            family,
            name: None,
            notes: None,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match &self.family {
            Family::RadialTree { .. } => "RadialTree",
            Family::HalfLinePath { .. } => "HalfLinePath",
            Family::FullLinePath { .. } => "FullLinePath",
            Family::ChainWithAttachments { .. } => "ChainWithAttachments",
            Family::SphereSymmetric { .. } => "SphereSymmetric",
            Family::FiniteGraph(_) => "FiniteGraph",
        }
    }

    /// The same family with every edge length multiplied by `c > 0`.
    pub fn scaled(&self, c: &Scalar) -> GraphFamilySpec {
        let family = match &self.family {
            Family::RadialTree { b, ell } => Family::RadialTree {
                b: b.clone(),
                ell: ell.scaled(c),
            },
            Family::HalfLinePath { ell } => Family::HalfLinePath { ell: ell.scaled(c) },
            Family::FullLinePath { ell_pos, ell_neg } => Family::FullLinePath {
                ell_pos: ell_pos.scaled(c),
                ell_neg: ell_neg.scaled(c),
            },
            Family::ChainWithAttachments {
                ell,
                attachment,
                scaling,
            } => Family::ChainWithAttachments {
                ell: ell.scaled(c),
                attachment: attachment.clone(),
                scaling: scaling.scaled(c),
            },
            Family::SphereSymmetric {
                sphere_sizes,
                ell,
                ends,
                cayley,
            } => Family::SphereSymmetric {
                sphere_sizes: sphere_sizes.clone(),
                ell: ell.scaled(c),
                ends: *ends,
                cayley: *cayley,
            },
            Family::FiniteGraph(g) => Family::FiniteGraph(FiniteGraphSpec {
                edges: g.edges.iter().map(|(u, v, l)| (*u, *v, l.mul(c))).collect(),
                ..g.clone()
            }),
        };
        GraphFamilySpec {
            family,
            name: self.name.clone(),
            notes: self.notes.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = self.to_json_inner();
        if let Value::Object(map) = &mut m {
            map.insert("schema".into(), SCHEMA_VERSION.into());
        }
        m
    }

    fn to_json_inner(&self) -> Value {
        let mut m = Map::new();
        m.insert("variant".into(), self.variant_name().into());
        if let Some(name) = &self.name {
            m.insert("name".into(), name.clone().into());
        }
        if let Some(notes) = &self.notes {
            m.insert("notes".into(), notes.clone().into());
        }
        match &self.family {
            Family::RadialTree { b, ell } => {
                m.insert("b".into(), b.to_json());
                m.insert("ell".into(), ell.to_json());
            }
            Family::HalfLinePath { ell } => {
                m.insert("ell".into(), ell.to_json());
            }
            Family::FullLinePath { ell_pos, ell_neg } => {
                m.insert("ell_pos".into(), ell_pos.to_json());
                m.insert("ell_neg".into(), ell_neg.to_json());
            }
            Family::ChainWithAttachments {
                ell,
                attachment,
                scaling,
            } => {
                m.insert("ell".into(), ell.to_json());
                m.insert("attachment".into(), attachment.to_json_inner());
                m.insert("scaling".into(), scaling.to_json());
            }
            Family::SphereSymmetric {
                sphere_sizes,
                ell,
                ends,
                cayley,
            } => {
                m.insert("sphere_sizes".into(), sphere_sizes.to_json());
                m.insert("ell".into(), ell.to_json());
                m.insert("ends".into(), ends.as_str().into());
                m.insert("cayley".into(), (*cayley).into());
            }
            Family::FiniteGraph(g) => {
                m.insert("vertices".into(), g.vertices.into());
                m.insert(
                    "edges".into(),
                    Value::Array(
                        g.edges
                            .iter()
                            .map(|(u, v, l)| Value::Array(vec![(*u).into(), (*v).into(), l.to_json()]))
                            .collect(),
                    ),
                );
                m.insert("boundary".into(), Value::Array(g.boundary.iter().map(|&b| b.into()).collect()));
                m.insert("root".into(), g.root.into());
            }
        }
        Value::Object(m)
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("spec json is always serializable")
    }

    pub fn from_json(v: &Value) -> Result<Self, SpecError> {
        let spec = Self::from_json_at(v, "$", true)?;
        spec.validate("$")?;
        Ok(spec)
    }

    fn from_json_at(v: &Value, path: &str, top_level: bool) -> Result<Self, SpecError> {
        let mut obj = Obj::new(v, path)?;
        if let Some(s) = obj.optional("schema") {
            let spath = format!("{path}.schema");
            if !top_level {
                return Err(schema(spath, "schema version only allowed at top level".into()));
            }
            match s.as_str() {
                Some(SCHEMA_VERSION) => {}
                _ => return Err(schema(spath, format!("expected {SCHEMA_VERSION:?}"))),
            }
        }
        let name = obj.optional_string("name")?;
        let notes = obj.optional_string("notes")?;
        let variant = obj.string("variant")?;
        let family = match variant.as_str() {
            "RadialTree" => Family::RadialTree {
                b: obj.sequence("b")?,
                ell: obj.sequence("ell")?,
            },
            "HalfLinePath" => Family::HalfLinePath {
                ell: obj.sequence("ell")?,
            },
            "FullLinePath" => Family::FullLinePath {
                ell_pos: obj.sequence("ell_pos")?,
                ell_neg: obj.sequence("ell_neg")?,
            },
            "ChainWithAttachments" => {
                let ell = obj.sequence("ell")?;
                let apath = format!("{path}.attachment");
                let attachment = Self::from_json_at(obj.required("attachment")?, &apath, false)?;
                let scaling = obj.sequence("scaling")?;
                Family::ChainWithAttachments {
                    ell,
                    attachment: Box::new(attachment),
                    scaling,
                }
            }
            "SphereSymmetric" => {
                let sphere_sizes = obj.sequence("sphere_sizes")?;
                let ell = obj.sequence("ell")?;
                let ends = match obj.string("ends")?.as_str() {
                    "one" => DeclaredEnds::One,
                    "two" => DeclaredEnds::Two,
                    "cantor" => DeclaredEnds::Cantor,
                    other => {
                        return Err(schema(
                            format!("{path}.ends"),
                            format!("expected one, two or cantor, got {other:?}"),
                        ))
                    }
                };
                let cayley = match obj.optional("cayley") {
                    None => false,
                    Some(Value::Bool(b)) => *b,
                    Some(_) => return Err(schema(format!("{path}.cayley"), "expected a boolean".into())),
                };
                Family::SphereSymmetric {
                    sphere_sizes,
                    ell,
                    ends,
                    cayley,
                }
            }
            "FiniteGraph" => Family::FiniteGraph(parse_finite_graph(&mut obj, path)?),
            other => return Err(schema(format!("{path}.variant"), format!("unknown variant {other:?}"))),
        };
        obj.finish()?;
        Ok(GraphFamilySpec { family, name, notes })
    }

    fn validate(&self, path: &str) -> Result<(), SpecError> {
        match &self.family {
            Family::RadialTree { b, ell } => {
                validate_branching(b, &format!("{path}.b"))?;
                ell.check_positive(&format!("{path}.ell"), true)
            }
            Family::HalfLinePath { ell } => ell.check_positive(&format!("{path}.ell"), true),
            Family::FullLinePath { ell_pos, ell_neg } => {
                ell_pos.check_positive(&format!("{path}.ell_pos"), true)?;
                ell_neg.check_positive(&format!("{path}.ell_neg"), true)
            }
            Family::ChainWithAttachments {
                ell,
                attachment,
                scaling,
            } => {
                ell.check_positive(&format!("{path}.ell"), true)?;
                scaling.check_positive(&format!("{path}.scaling"), true)?;
                attachment.validate(&format!("{path}.attachment"))
            }
            Family::SphereSymmetric {
                sphere_sizes,
                ell,
                ends,
                ..
            } => {
                ell.check_positive(&format!("{path}.ell"), true)?;
                validate_spheres(sphere_sizes, *ends, &format!("{path}.sphere_sizes"))
            }
            Family::FiniteGraph(g) => validate_finite_graph(g, path),
        }
    }
}

/// Parse and validate a spec document.
pub fn parse_spec(text: &str) -> Result<GraphFamilySpec, SpecError> {
    let v: Value = serde_json::from_str(text).map_err(|e| schema("$".into(), format!("malformed JSON: {e}")))?;
    GraphFamilySpec::from_json(&v)
}

fn validate_branching(b: &SequenceSpec, path: &str) -> Result<(), SpecError> {
    let nf = b.normal_form();
    let at_least_two = |v: &Scalar| v.to_integer().is_some_and(|i| i >= 2.into()) && v.is_exact();
    for (i, v) in nf.prefix.iter().enumerate() {
        if !at_least_two(v) {
            return Err(invariant(
                format!("{path}[{i}]"),
                format!("branching numbers must be integers >= 2, got {v}"),
            ));
        }
    }
    match nf.eventual_constant() {
        Some(c) if at_least_two(&c) => Ok(()),
        Some(c) => Err(invariant(
            path.into(),
            format!("branching numbers must be integers >= 2, got {c}"),
        )),
        None => Err(invariant(
            path.into(),
            "branching sequence must be eventually constant".into(),
        )),
    }
}

/// Integer-valued and non-decreasing, decided on the normal form.
fn sphere_terms_ok(nf: &NormalForm) -> bool {
    let int = |v: &Scalar| v.is_exact() && v.to_integer().is_some();
    if !nf.prefix.iter().all(int) || !int(&nf.tail.coef) || !int(&nf.tail.ratio) {
        return false;
    }
    if nf.tail.ratio.cmp_value(&Scalar::one()).is_lt() {
        return false;
    }
    nf.tail
        .factors
        .iter()
        .all(|f| f.exponent.is_exact() && f.exponent.to_integer().is_some() && !f.exponent.is_positive())
}

fn validate_spheres(sizes: &SequenceSpec, ends: DeclaredEnds, path: &str) -> Result<(), SpecError> {
    let nf = sizes.normal_form();
    if !sphere_terms_ok(&nf) {
        return Err(invariant(
            path.into(),
            "sphere sizes must be integers given by a non-decreasing integer-valued sequence".into(),
        ));
    }
    if nf.term(0) != Scalar::one() {
        return Err(invariant(format!("{path}[0]"), "the root sphere must have size 1".into()));
    }
    // prefix pairs, the join with the tail, and the first tail step decide every step
    let horizon = nf.prefix.len() as u64 + 2;
    for n in 0..horizon {
        let (a, b) = (nf.term(n), nf.term(n + 1));
        if b.cmp_value(&a).is_lt() {
            return Err(invariant(format!("{path}[{}]", n + 1), "sphere sizes must not decrease".into()));
        }
        let ok = match ends {
            DeclaredEnds::One => n == 0 || a.cmp_value(&Scalar::int(3)).is_ge(),
            DeclaredEnds::Two => b == Scalar::int(2),
            DeclaredEnds::Cantor => b.cmp_value(&a.mul(&Scalar::int(2))).is_ge(),
        };
        if !ok {
            return Err(invariant(
                format!("{path}[{}]", n + 1),
                format!("sphere sizes are inconsistent with declared ends {:?}", ends.as_str()),
            ));
        }
    }
    let tail_ok = match ends {
        DeclaredEnds::One => true,
        DeclaredEnds::Two => nf.eventual_constant() == Some(Scalar::int(2)),
        DeclaredEnds::Cantor => {
            nf.tail.factors.is_empty() && nf.tail.ratio.cmp_value(&Scalar::int(2)).is_ge()
        }
    };
    if !tail_ok {
        return Err(invariant(
            path.into(),
            format!("sphere size tail is inconsistent with declared ends {:?}", ends.as_str()),
        ));
    }
    Ok(())
}

fn parse_finite_graph(obj: &mut Obj<'_>, path: &str) -> Result<FiniteGraphSpec, SpecError> {
    let vertices = obj.usize_field("vertices")?;
    let mut edges = Vec::new();
    for (i, e) in obj.array("edges")?.iter().enumerate() {
        let epath = format!("{path}.edges[{i}]");
        let arr = e
            .as_array()
            .filter(|a| a.len() == 3)
            .ok_or_else(|| schema(epath.clone(), "expected [u, v, length]".into()))?;
        let u = as_index(&arr[0], &format!("{epath}[0]"))?;
        let v = as_index(&arr[1], &format!("{epath}[1]"))?;
        let len = parse_scalar(&arr[2], &format!("{epath}[2]"))?;
        edges.push((u, v, len));
    }
    let boundary = match obj.optional("boundary") {
        None => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, x)| as_index(x, &format!("{path}.boundary[{i}]")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(schema(format!("{path}.boundary"), "expected an array".into())),
    };
    let root = match obj.optional("root") {
        None => 0,
        Some(x) => as_index(x, &format!("{path}.root"))?,
    };
    Ok(FiniteGraphSpec {
        vertices,
        edges,
        boundary,
        root,
    })
}

fn validate_finite_graph(g: &FiniteGraphSpec, path: &str) -> Result<(), SpecError> {
    if g.vertices == 0 {
        return Err(invariant(format!("{path}.vertices"), "at least one vertex required".into()));
    }
    let mut seen = BTreeSet::new();
    let mut parent: Vec<usize> = (0..g.vertices).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, (u, v, len)) in g.edges.iter().enumerate() {
        let epath = format!("{path}.edges[{i}]");
        if *u >= g.vertices || *v >= g.vertices {
            return Err(invariant(epath, "edge endpoint out of range".into()));
        }
        if u == v {
            return Err(invariant(epath, "loops are not allowed".into()));
        }
        if !seen.insert((*u.min(v), *u.max(v))) {
            return Err(invariant(epath, "multiple edges are not allowed".into()));
        }
        if !len.is_positive() || !len.is_finite() {
            return Err(SpecError::NonPositiveLength {
                path: format!("{epath}[2]"),
                value: len.to_string(),
            });
        }
        let (a, b) = (find(&mut parent, *u), find(&mut parent, *v));
        parent[a] = b;
    }
    let r = find(&mut parent, 0);
    if (0..g.vertices).any(|x| find(&mut parent, x) != r) {
        return Err(invariant(format!("{path}.edges"), "graph must be connected".into()));
    }
    for (i, b) in g.boundary.iter().enumerate() {
        if *b >= g.vertices {
            return Err(invariant(format!("{path}.boundary[{i}]"), "vertex out of range".into()));
        }
    }
    if g.root >= g.vertices {
        return Err(invariant(format!("{path}.root"), "vertex out of range".into()));
    }
    Ok(())
}

fn schema(path: String, message: String) -> SpecError {
    SpecError::Schema { path, message }
}

fn invariant(path: String, message: String) -> SpecError {
    SpecError::Invariant { path, message }
}

fn parse_scalar(v: &Value, path: &str) -> Result<Scalar, SpecError> {
    Scalar::from_json(v).map_err(|e| schema(path.into(), e.to_string()))
}

fn as_index(v: &Value, path: &str) -> Result<usize, SpecError> {
    v.as_u64()
        .and_then(|x| usize::try_from(x).ok())
        .ok_or_else(|| schema(path.into(), "expected a non-negative integer".into()))
}

/// A JSON object being consumed field by field; leftover fields are errors.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
    used: BTreeSet<&'a str>,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, path: &str) -> Result<Self, SpecError> {
        let map = v
            .as_object()
            .ok_or_else(|| schema(path.into(), "expected an object".into()))?;
        Ok(Obj {
            map,
            path: path.into(),
            used: BTreeSet::new(),
        })
    }

    fn field_path(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn optional(&mut self, key: &'a str) -> Option<&'a Value> {
        let v = self.map.get(key)?;
        self.used.insert(key);
        Some(v)
    }

    fn required(&mut self, key: &'a str) -> Result<&'a Value, SpecError> {
        let p = self.field_path(key);
        self.optional(key)
            .ok_or_else(|| schema(p, "missing required field".into()))
    }

    fn string(&mut self, key: &'a str) -> Result<String, SpecError> {
        let p = self.field_path(key);
        self.required(key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| schema(p, "expected a string".into()))
    }

    fn optional_string(&mut self, key: &'a str) -> Result<Option<String>, SpecError> {
        let p = self.field_path(key);
        match self.optional(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(schema(p, "expected a string".into())),
        }
    }

    fn scalar(&mut self, key: &'a str) -> Result<Scalar, SpecError> {
        let p = self.field_path(key);
        parse_scalar(self.required(key)?, &p)
    }

    fn usize_field(&mut self, key: &'a str) -> Result<usize, SpecError> {
        let p = self.field_path(key);
        as_index(self.required(key)?, &p)
    }

    fn array(&mut self, key: &'a str) -> Result<&'a Vec<Value>, SpecError> {
        let p = self.field_path(key);
        self.required(key)?
            .as_array()
            .ok_or_else(|| schema(p, "expected an array".into()))
    }

    fn sequence(&mut self, key: &'a str) -> Result<SequenceSpec, SpecError> {
        let p = self.field_path(key);
        SequenceSpec::from_json(self.required(key)?, &p)
    }

    fn finish(self) -> Result<(), SpecError> {
        match self.map.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(schema(self.field_path(k), "unknown field".into())),
            None => Ok(()),
        }
    }
}

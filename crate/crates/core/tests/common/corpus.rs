//! Family specs used by the property and acceptance tests.

use proptest::prelude::*;
use qgends::{parse_spec, GraphFamilySpec};

fn scalar() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["1/3", "1/2", "1", "2", "3"])
}

fn ratio() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["1/8", "1/4", "1/2", "1", "2"])
}

fn exponent() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["-1", "0", "1/2", "1", "2", "3"])
}

fn simple_sequence() -> impl Strategy<Value = String> {
    prop_oneof![
        scalar().prop_map(|c| format!(r#"{{"kind":"constant","c":"{c}"}}"#)),
        (scalar(), ratio()).prop_map(|(a, r)| format!(r#"{{"kind":"geometric","a":"{a}","r":"{r}"}}"#)),
        (scalar(), exponent()).prop_map(|(a, p)| format!(r#"{{"kind":"power","a":"{a}","p":"{p}"}}"#)),
    ]
}

/// Positive length sequences, optionally with an explicit prefix.
pub fn sequence() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => simple_sequence(),
        1 => (prop::collection::vec(scalar(), 1..4), simple_sequence()).prop_map(|(prefix, tail)| {
            let prefix: Vec<String> = prefix.iter().map(|p| format!(r#""{p}""#)).collect();
            format!(r#"{{"kind":"explicit","prefix":[{}],"tail":{tail}}}"#, prefix.join(","))
        }),
    ]
}

fn branching() -> impl Strategy<Value = String> {
    prop_oneof![
        (2u32..=4).prop_map(|b| format!(r#"{{"kind":"constant","c":{b}}}"#)),
        (2u32..=4, 2u32..=3)
            .prop_map(|(p, b)| format!(r#"{{"kind":"explicit","prefix":[{p}],"tail":{{"kind":"constant","c":{b}}}}}"#)),
    ]
}

fn line_family() -> impl Strategy<Value = String> {
    prop_oneof![
        sequence().prop_map(|ell| format!(r#"{{"variant":"HalfLinePath","ell":{ell}}}"#)),
        (sequence(), sequence())
            .prop_map(|(p, n)| format!(r#"{{"variant":"FullLinePath","ell_pos":{p},"ell_neg":{n}}}"#)),
        (branching(), sequence()).prop_map(|(b, ell)| format!(r#"{{"variant":"RadialTree","b":{b},"ell":{ell}}}"#)),
    ]
}

/// Spec text for a random family of any variant.
pub fn family_json() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => line_family(),
        1 => (sequence(), line_family(), sequence()).prop_map(|(ell, att, s)| {
            format!(r#"{{"variant":"ChainWithAttachments","ell":{ell},"attachment":{att},"scaling":{s}}}"#)
        }),
        1 => prop::sample::select(fixed_specs()),
    ]
}

pub fn family() -> impl Strategy<Value = GraphFamilySpec> {
    family_json().prop_map(|t| parse_spec(&t).unwrap_or_else(|e| panic!("{e}: {t}")))
}

/// Hand-picked specs covering the sphere-symmetric and finite variants.
pub fn fixed_specs() -> Vec<String> {
    [
        r#"{"variant":"SphereSymmetric","sphere_sizes":{"kind":"explicit","prefix":[1],"tail":{"kind":"power","a":4,"p":-1}},"ell":{"kind":"constant","c":1},"ends":"one"}"#,
        r#"{"variant":"SphereSymmetric","sphere_sizes":{"kind":"explicit","prefix":[1],"tail":{"kind":"constant","c":2}},"ell":{"kind":"constant","c":1},"ends":"two"}"#,
        r#"{"variant":"SphereSymmetric","sphere_sizes":{"kind":"explicit","prefix":[1],"tail":{"kind":"constant","c":2}},"ell":{"kind":"geometric","a":1,"r":"1/4"},"ends":"two"}"#,
        r#"{"variant":"SphereSymmetric","sphere_sizes":{"kind":"explicit","prefix":[1],"tail":{"kind":"geometric","a":3,"r":3}},"ell":{"kind":"constant","c":1},"ends":"cantor"}"#,
        r#"{"variant":"SphereSymmetric","sphere_sizes":{"kind":"explicit","prefix":[1],"tail":{"kind":"geometric","a":2,"r":2}},"ell":{"kind":"constant","c":1},"ends":"cantor","cayley":true}"#,
        r#"{"variant":"SphereSymmetric","sphere_sizes":{"kind":"explicit","prefix":[1],"tail":{"kind":"geometric","a":2,"r":2}},"ell":{"kind":"geometric","a":1,"r":"1/8"},"ends":"cantor","cayley":true}"#,
        r#"{"variant":"FiniteGraph","vertices":2,"edges":[[0,1,1]]}"#,
        r#"{"variant":"FiniteGraph","vertices":4,"edges":[[0,1,1],[0,2,"1/2"],[0,3,2]],"boundary":[1]}"#,
        r#"{"variant":"FiniteGraph","vertices":3,"edges":[[0,1,1],[1,2,1],[2,0,1]]}"#,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Deterministic corpus: fixed specs plus a grid over the parametric variants.
pub fn corpus() -> Vec<GraphFamilySpec> {
    let ratios = ["1/8", "1/4", "1/2", "1", "2"];
    let powers = ["-1", "0", "1", "2"];
    let mut texts = fixed_specs();
    let geo = |r: &str| format!(r#"{{"kind":"geometric","a":1,"r":"{r}"}}"#);
    let pow = |p: &str| format!(r#"{{"kind":"power","a":1,"p":"{p}"}}"#);
    let mut seqs: Vec<String> = ratios.iter().map(|r| geo(r)).collect();
    seqs.extend(powers.iter().map(|p| pow(p)));
    for s in &seqs {
        texts.push(format!(r#"{{"variant":"HalfLinePath","ell":{s}}}"#));
        for b in [2, 3] {
            texts.push(format!(r#"{{"variant":"RadialTree","b":{{"kind":"constant","c":{b}}},"ell":{s}}}"#));
        }
        for t in &seqs {
            texts.push(format!(r#"{{"variant":"FullLinePath","ell_pos":{s},"ell_neg":{t}}}"#));
        }
    }
    let attachments = [
        format!(r#"{{"variant":"HalfLinePath","ell":{}}}"#, geo("1/2")),
        format!(r#"{{"variant":"FullLinePath","ell_pos":{},"ell_neg":{}}}"#, geo("1/2"), geo("1/2")),
        format!(r#"{{"variant":"FullLinePath","ell_pos":{},"ell_neg":{}}}"#, geo("1/2"), geo("1")),
        format!(r#"{{"variant":"RadialTree","b":{{"kind":"constant","c":2}},"ell":{}}}"#, geo("1/4")),
        format!(r#"{{"variant":"RadialTree","b":{{"kind":"constant","c":2}},"ell":{}}}"#, geo("1/2")),
        r#"{"variant":"FiniteGraph","vertices":2,"edges":[[0,1,1]]}"#.to_string(),
    ];
    for a in &attachments {
        for s in [geo("1/2"), geo("1"), pow("2")] {
            for ell in [geo("1"), geo("1/2")] {
                texts.push(format!(
                    r#"{{"variant":"ChainWithAttachments","ell":{ell},"attachment":{a},"scaling":{s}}}"#
                ));
            }
        }
    }
    texts
        .iter()
        .map(|t| parse_spec(t).unwrap_or_else(|e| panic!("{e}: {t}")))
        .collect()
}

//! Verdicts on self-adjointness, closedness of the Gaffney Laplacian and
//! deficiency indices, each tagged with the rule that produced it.
//!
//! Gaffney rules are tried in a fixed order and the first match wins:
//!
//! 1. no finite volume end: self-adjoint;
//! 2. finitely many, but some, finite volume ends: closed, not self-adjoint;
//! 3. a non-free finite volume end: not closed;
//! 4. a subgraph sequence with vanishing volume (or diameter) and fewer
//!    boundary vertices than ends: not closed;
//! 5. finite total volume: closed exactly when there are finitely many ends;
//! 6. Cayley-type sphere families: not closed exactly when there are
//!    infinitely many ends and a finite volume end;
//! 7. otherwise unknown.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::ends::{enumerate_ends, EndSummary};
use crate::error::{Error, Result};
use crate::graphspec::{ExtendedCount, Family, GraphFamilySpec};
use crate::metric_graph::{total_end_count, volume_family};
use crate::series::{Asymptotics, SeriesSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GaffneyStatus {
    SelfAdjoint,
    ClosedNotSelfAdjoint,
    NotClosed,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleTraceEntry {
    pub rule: String,
    pub citation: String,
    pub inputs: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaffneyVerdict {
    pub status: GaffneyStatus,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KirchhoffVerdict {
    pub verdict: Verdict,
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovVerdict {
    pub unique: bool,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deficiency {
    pub gaffney_min: ExtendedCount,
    pub kirchhoff_min_lower_bound: ExtendedCount,
    pub kirchhoff_min_exact: Option<ExtendedCount>,
    /// Why `kirchhoff_min_exact` is absent.
    pub exact_condition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub name: Option<String>,
    pub variant: String,
    pub volume: Option<f64>,
    pub ends: EndSummary,
    pub kirchhoff_selfadjoint: KirchhoffVerdict,
    pub gaffney_status: GaffneyVerdict,
    pub markovian_unique: MarkovVerdict,
    pub deficiency: Deficiency,
    pub rule_trace: Vec<RuleTraceEntry>,
}

fn entry(rule: &str, citation: &str, inputs: Value) -> RuleTraceEntry {
    RuleTraceEntry {
        rule: rule.into(),
        citation: citation.into(),
        inputs,
    }
}

/// A subgraph sequence `(G_n)` with `vol(G_n) → 0` (or bounded volume and
/// `diam(G_n) → 0`) and `#∂G_n < #C(G_n)`, if the family has one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualifyingSequence {
    pub description: String,
    pub via_diameter: bool,
}

pub fn qualifying_sequence(spec: &GraphFamilySpec) -> Result<Option<QualifyingSequence>> {
    Ok(match &spec.family {
        Family::RadialTree { .. } => volume_family(spec)?.is_finite().then(|| QualifyingSequence {
            description: "subtrees below generation-n vertices".into(),
            via_diameter: false,
        }),
        Family::ChainWithAttachments {
            attachment, scaling, ..
        } => {
            if matches!(attachment.family, Family::ChainWithAttachments { .. }) {
                return Err(Error::UnsupportedFamily("nested chains of attachments".into()));
            }
            let two_ends = total_end_count(attachment) >= ExtendedCount::Finite(2);
            let vanishing = scaling.normal_form().asymptotics() == Asymptotics::TendsToZero;
            let finite_volume = volume_family(attachment)?.is_finite();
            // attachment volume and diameter both scale with s_n, so the
            // vanishing-diameter variant never adds a case here
            (two_ends && vanishing && finite_volume).then(|| QualifyingSequence {
                description: "scaled attachments with at least two ends".into(),
                via_diameter: false,
            })
        }
        _ => None,
    })
}

/// Whether the vertex-weight sums `Σ m(v_k)` diverge along every ray class,
/// a sufficient condition for completeness of `(V, ρ_m)`.
fn star_sums_diverge(spec: &GraphFamilySpec) -> Result<bool> {
    Ok(match &spec.family {
        // m(v_n) is comparable to ℓ_{n−1} + ℓ_n along every ray
        Family::RadialTree { ell, .. } | Family::HalfLinePath { ell } => !ell.normal_form().sum().is_finite(),
        Family::SphereSymmetric { ell, .. } => !ell.normal_form().sum().is_finite(),
        Family::FullLinePath { ell_pos, ell_neg } => {
            !ell_pos.normal_form().sum().is_finite() && !ell_neg.normal_form().sum().is_finite()
        }
        Family::ChainWithAttachments {
            ell,
            attachment,
            scaling,
        } => {
            let chain = !ell.normal_form().sum().is_finite() || !scaling.normal_form().sum().is_finite();
            let template_rays = total_end_count(attachment).is_zero() || star_sums_diverge(attachment)?;
            chain && template_rays
        }
        Family::FiniteGraph(_) => true,
    })
}

fn count_json(c: ExtendedCount) -> Value {
    c.to_json()
}

/// Gaffney status with the rule that decided it.
pub fn gaffney_status(spec: &GraphFamilySpec) -> Result<(GaffneyVerdict, RuleTraceEntry)> {
    let ends = enumerate_ends(spec)?;
    gaffney_from(spec, &ends, &volume_family(spec)?)
}

fn gaffney_from(spec: &GraphFamilySpec, ends: &EndSummary, volume: &SeriesSum) -> Result<(GaffneyVerdict, RuleTraceEntry)> {
    let c0 = ends.finite_volume;
    let decide = |status, rule: &str, citation: &str, inputs: Value| {
        Ok((
            GaffneyVerdict {
                status,
                rule: citation.into(),
            },
            entry(rule, citation, inputs),
        ))
    };
    if c0.is_zero() {
        return decide(
            GaffneyStatus::SelfAdjoint,
            "gaffney.1",
            "Lemma 3.4(v)",
            json!({"finite_volume_ends": count_json(c0)}),
        );
    }
    if !c0.is_infinite() {
        return decide(
            GaffneyStatus::ClosedNotSelfAdjoint,
            "gaffney.2",
            "Theorem 3.10(i); Theorem 3.9",
            json!({"finite_volume_ends": count_json(c0)}),
        );
    }
    if ends.has_nonfree_finite_volume {
        return decide(
            GaffneyStatus::NotClosed,
            "gaffney.3",
            "Theorem 3.10(ii)",
            json!({"finite_volume_ends": count_json(c0), "has_nonfree_finite_volume": true}),
        );
    }
    if let Some(seq) = qualifying_sequence(spec)? {
        let citation = if seq.via_diameter {
            "Proposition 4.1; Remark 4.2"
        } else {
            "Proposition 4.1"
        };
        return decide(
            GaffneyStatus::NotClosed,
            "gaffney.4",
            citation,
            json!({"subgraph_sequence": seq.description}),
        );
    }
    if let SeriesSum::Finite(v) = volume {
        let status = if ends.total.is_infinite() {
            GaffneyStatus::NotClosed
        } else {
            GaffneyStatus::ClosedNotSelfAdjoint
        };
        return decide(
            status,
            "gaffney.5",
            "Corollary 3.11",
            json!({"volume": v.value, "ends": count_json(ends.total)}),
        );
    }
    if let Family::SphereSymmetric { cayley: true, .. } = spec.family {
        let status = if ends.total.is_infinite() {
            GaffneyStatus::NotClosed
        } else {
            GaffneyStatus::ClosedNotSelfAdjoint
        };
        return decide(
            status,
            "gaffney.6",
            "Corollary 3.12",
            json!({"ends": count_json(ends.total), "finite_volume_ends": count_json(c0)}),
        );
    }
    decide(
        GaffneyStatus::Unknown,
        "gaffney.7",
        "open case: infinitely many free finite volume ends without a qualifying subgraph sequence",
        json!({"finite_volume_ends": count_json(c0), "free_finite_volume_ends": count_json(ends.free_finite_volume)}),
    )
}

pub fn deficiency_indices(spec: &GraphFamilySpec) -> Result<(Deficiency, RuleTraceEntry)> {
    Ok(deficiency_from(&enumerate_ends(spec)?))
}

fn deficiency_from(ends: &EndSummary) -> (Deficiency, RuleTraceEntry) {
    let c0 = ends.finite_volume;
    let exact = c0.is_infinite().then_some(c0);
    let d = Deficiency {
        gaffney_min: c0,
        kirchhoff_min_lower_bound: c0,
        kirchhoff_min_exact: exact,
        exact_condition: if exact.is_some() {
            None
        } else {
            Some("requires dom(H) ⊂ H¹".into())
        },
    };
    let e = entry(
        "deficiency",
        "Theorem 3.9; Remark 3.13(i)",
        json!({"finite_volume_ends": count_json(c0)}),
    );
    (d, e)
}

pub fn kirchhoff_selfadjoint_test(spec: &GraphFamilySpec) -> Result<(KirchhoffVerdict, RuleTraceEntry)> {
    let ends = enumerate_ends(spec)?;
    kirchhoff_from(spec, &ends, &volume_family(spec)?)
}

fn kirchhoff_from(spec: &GraphFamilySpec, ends: &EndSummary, volume: &SeriesSum) -> Result<(KirchhoffVerdict, RuleTraceEntry)> {
    let verdict = |v, rule: &str, citation: &str, inputs: Value| {
        Ok((
            KirchhoffVerdict {
                verdict: v,
                rule: Some(citation.into()),
            },
            entry(rule, citation, inputs),
        ))
    };
    if star_sums_diverge(spec)? {
        return verdict(
            Verdict::Yes,
            "kirchhoff.star_metric",
            "Theorem 2.5",
            json!({"star_weight_sums": "divergent along every ray class"}),
        );
    }
    if matches!(spec.family, Family::RadialTree { .. }) && !volume.is_finite() {
        return verdict(
            Verdict::Yes,
            "kirchhoff.radial_volume",
            "Lemma 4.2(i)",
            json!({"volume": "divergent"}),
        );
    }
    if !ends.finite_volume.is_zero() {
        return verdict(
            Verdict::No,
            "kirchhoff.finite_volume_ends",
            "Remark 3.13(i)",
            json!({"finite_volume_ends": count_json(ends.finite_volume)}),
        );
    }
    Ok((
        KirchhoffVerdict {
            verdict: Verdict::Inconclusive,
            rule: None,
        },
        entry(
            "kirchhoff.inconclusive",
            "no sufficient criterion applies",
            json!({"finite_volume_ends": count_json(ends.finite_volume)}),
        ),
    ))
}

/// Full report for one spec.
pub fn classify(spec: &GraphFamilySpec) -> Result<ClassificationReport> {
    let ends = enumerate_ends(spec)?;
    let volume = volume_family(spec)?;
    let (kirchhoff, k_entry) = kirchhoff_from(spec, &ends, &volume)?;
    let (gaffney, g_entry) = gaffney_from(spec, &ends, &volume)?;
    let (deficiency, d_entry) = deficiency_from(&ends);
    let markov = MarkovVerdict {
        unique: gaffney.status == GaffneyStatus::SelfAdjoint,
        rule: "Lemma 3.4".into(),
    };
    let m_entry = entry(
        "markov",
        "Lemma 3.4",
        json!({"gaffney_status": serde_json::to_value(gaffney.status).expect("enum serializes")}),
    );
    Ok(ClassificationReport {
        name: spec.name.clone(),
        variant: spec.variant_name().into(),
        volume: volume.value(),
        ends,
        kirchhoff_selfadjoint: kirchhoff,
        gaffney_status: gaffney,
        markovian_unique: markov,
        deficiency,
        rule_trace: vec![g_entry, d_entry, m_entry, k_entry],
    })
}

/// Reports for many specs, computed concurrently, in input order.
pub fn classify_batch(specs: &[GraphFamilySpec]) -> Vec<Result<ClassificationReport>> {
    specs.par_iter().map(classify).collect()
}

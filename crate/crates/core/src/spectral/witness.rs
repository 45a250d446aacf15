//! Blow-up of the Sobolev ratio along a shrinking subgraph sequence.
//!
//! On `G_n` the witness `f_n` solves `(τ − λ) f = 0`, vanishes at the single
//! boundary vertex and is extended by zero. It lives on two branches leaving
//! the boundary vertex: `φ` on the first and `−φ` on the second, with
//! `φ(0) = 0`, so continuity and the Kirchhoff condition hold at the cut.
//! The radially symmetric channel cannot vanish there, which is why the
//! antisymmetric pair is used.

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::Serialize;

use super::edge::FunctionNorms;
use super::shooting::{propagate, transfer_matrix, ArmSolution, ArmSpec, LayeredSolution};
use crate::classify::qualifying_sequence;
use crate::error::{Error, Result};
use crate::graphspec::{Family, GraphFamilySpec};
use crate::metric_graph::mu_sequence;

pub const MAX_WITNESS_LAYERS: usize = 400;
pub const SAMPLES_PER_LAYER: usize = 64;
/// Layers are added until one contributes less than this fraction of the
/// accumulated energy.
const NEGLIGIBLE: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessRow {
    pub level: u64,
    pub lambda: f64,
    /// Sampled `sup |f_n|` after normalisation.
    pub sup_norm: f64,
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub h_sq: f64,
    pub ratio: f64,
    /// `r_{n+1} / r_n`; absent on the last level.
    pub growth: Option<f64>,
    /// `|f_n|` at the boundary vertex of `G_n`.
    pub boundary_value: f64,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub description: String,
    pub rows: Vec<WitnessRow>,
}

/// The two branches of `G_n` carrying the witness.
fn branches(spec: &GraphFamilySpec, n: u64) -> Result<[ArmSpec; 2]> {
    match &spec.family {
        Family::RadialTree { b, ell } => {
            let mu = mu_sequence(b);
            let arm = ArmSpec {
                ell: ell.normal_form(),
                weight: Some(mu.clone()),
                length_scale: 1.0,
                weight_scale: 1.0 / mu.term_f64(n),
                offset: n,
            };
            Ok([arm.clone(), arm])
        }
        Family::ChainWithAttachments {
            attachment, scaling, ..
        } => {
            let s = scaling.normal_form().term_f64(n);
            match &attachment.family {
                Family::FullLinePath { ell_pos, ell_neg } => Ok([
                    ArmSpec {
                        length_scale: s,
                        ..ArmSpec::unweighted(ell_pos.normal_form())
                    },
                    ArmSpec {
                        length_scale: s,
                        ..ArmSpec::unweighted(ell_neg.normal_form())
                    },
                ]),
                Family::RadialTree { b, ell } => {
                    let mu = mu_sequence(b);
                    let arm = ArmSpec {
                        ell: ell.normal_form(),
                        weight_scale: 1.0 / mu.term_f64(0),
                        weight: Some(mu),
                        length_scale: s,
                        offset: 0,
                    };
                    Ok([arm.clone(), arm])
                }
                _ => Err(Error::UnsupportedFamily(format!(
                    "witness on {} attachments",
                    attachment.variant_name()
                ))),
            }
        }
        _ => Err(Error::NoQualifyingSequence(format!(
            "{} has no witness construction",
            spec.variant_name()
        ))),
    }
}

/// `φ` on one branch with `φ(0) = 0`, `w φ′(0) = 1`, truncated once layers
/// stop contributing.
fn branch_solution(lambda: f64, arm: &ArmSpec) -> Result<ArmSolution> {
    let mut s = Vector2::new(0.0, 1.0);
    let mut layers = Vec::new();
    let mut states = Vec::new();
    let mut total = 0.0;
    for j in 0..MAX_WITNESS_LAYERS {
        let l = arm.layer(j);
        if !(l.length > 0.0) {
            break;
        }
        let piece = ArmSolution {
            layers: vec![l],
            states: vec![[s[0], s[1]]],
        };
        let e = LayeredSolution {
            lambda,
            arms: vec![piece],
        }
        .norms();
        let contribution = e.l2_sq + e.grad_sq;
        if !contribution.is_finite() {
            return Err(Error::ShootingFailure(format!("energy overflow on layer {j}")));
        }
        layers.push(l);
        states.push([s[0], s[1]]);
        total += contribution;
        if j > 0 && contribution < NEGLIGIBLE * total {
            break;
        }
        s = transfer_matrix(lambda, l) * s;
    }
    Ok(ArmSolution { layers, states })
}

fn sampled_sup(lambda: f64, arm: &ArmSolution) -> f64 {
    let f = LayeredSolution {
        lambda,
        arms: vec![arm.clone()],
    };
    f.pieces()
        .iter()
        .flat_map(|(p, _)| (0..=SAMPLES_PER_LAYER).map(move |i| p.value(p.length * i as f64 / SAMPLES_PER_LAYER as f64).abs()))
        .fold(0.0, f64::max)
}

fn level_row(spec: &GraphFamilySpec, lambda: f64, n: u64) -> Result<WitnessRow> {
    let [a, b] = branches(spec, n)?;
    let phi_a = branch_solution(lambda, &a)?;
    let phi_b = branch_solution(lambda, &b)?;
    let neg_b = ArmSolution {
        states: phi_b.states.iter().map(|s| [-s[0], -s[1]]).collect(),
        layers: phi_b.layers.clone(),
    };
    let sup = sampled_sup(lambda, &phi_a).max(sampled_sup(lambda, &neg_b));
    if sup == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let boundary_value = (phi_a.states[0][0].abs()).max(neg_b.states[0][0].abs()) / sup;
    let f = LayeredSolution {
        lambda,
        arms: vec![phi_a, neg_b],
    }
    .scaled(1.0 / sup);
    let norms: FunctionNorms = f.norms();
    Ok(WitnessRow {
        level: n,
        lambda,
        sup_norm: sampled_sup(lambda, &f.arms[0]).max(sampled_sup(lambda, &f.arms[1])),
        l2_sq: norms.l2_sq,
        grad_sq: norms.grad_sq,
        h_sq: norms.h_sq,
        ratio: norms.ratio()?,
        growth: None,
        boundary_value,
        layers: f.arms.iter().map(|a| a.layers.len()).sum(),
    })
}

/// Witness rows for levels `1..=n_max`.
pub fn witness_nonclosed(spec: &GraphFamilySpec, lambda: f64, n_max: u64) -> Result<WitnessReport> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be negative, got {lambda}")));
    }
    let Some(seq) = qualifying_sequence(spec)? else {
        return Err(Error::NoQualifyingSequence(format!(
            "{} has no subgraph sequence with vanishing volume and fewer boundary vertices than ends",
            spec.variant_name()
        )));
    };
    let rows: Vec<Result<WitnessRow>> = (1..=n_max).into_par_iter().map(|n| level_row(spec, lambda, n)).collect();
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    for i in 1..rows.len() {
        rows[i - 1].growth = Some(rows[i].ratio / rows[i - 1].ratio);
    }
    Ok(WitnessReport {
        description: seq.description,
        rows,
    })
}

/// Every layer of a witness level as a stand-alone propagation, for
/// cross-checks against direct transfer.
pub fn witness_branch(spec: &GraphFamilySpec, lambda: f64, n: u64) -> Result<ArmSolution> {
    let [a, _] = branches(spec, n)?;
    let phi = branch_solution(lambda, &a)?;
    Ok(propagate(lambda, &a, Vector2::new(0.0, 1.0), phi.layers.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphspec::parse_spec;

    fn tree(r: &str) -> GraphFamilySpec {
        parse_spec(&format!(
            r#"{{"variant":"RadialTree","b":{{"kind":"constant","c":2}},"ell":{{"kind":"geometric","a":1,"r":"{r}"}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn ratios_grow_on_finite_volume_tree() {
        let rep = witness_nonclosed(&tree("1/4"), -1.0, 5).unwrap();
        assert_eq!(rep.rows.len(), 5);
        for w in rep.rows.windows(2) {
            assert!(w[1].ratio > w[0].ratio);
        }
        assert!(rep.rows[4].ratio / rep.rows[0].ratio >= 10.0);
        for r in &rep.rows {
            assert!(r.boundary_value < 1e-12);
            assert!((r.sup_norm - 1.0).abs() < 1e-12);
            assert!(r.l2_sq >= 0.0 && r.grad_sq >= 0.0 && r.h_sq >= 0.0);
        }
    }

    #[test]
    fn non_qualifying_families() {
        assert!(matches!(
            witness_nonclosed(&tree("1/2"), -1.0, 3),
            Err(Error::NoQualifyingSequence(_))
        ));
        let fg = parse_spec(r#"{"variant":"FiniteGraph","vertices":2,"edges":[[0,1,1]]}"#).unwrap();
        assert!(matches!(witness_nonclosed(&fg, -1.0, 3), Err(Error::NoQualifyingSequence(_))));
    }

    #[test]
    fn chain_witness_grows() {
        let chain = parse_spec(
            r#"{"variant":"ChainWithAttachments","ell":{"kind":"constant","c":1},
                "attachment":{"variant":"FullLinePath","ell_pos":{"kind":"geometric","a":1,"r":"1/2"},"ell_neg":{"kind":"geometric","a":1,"r":"1/2"}},
                "scaling":{"kind":"geometric","a":1,"r":"1/2"}}"#,
        )
        .unwrap();
        let rep = witness_nonclosed(&chain, -1.0, 4).unwrap();
        for w in rep.rows.windows(2) {
            assert!(w[1].ratio > w[0].ratio);
        }
    }
}

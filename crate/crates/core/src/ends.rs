//! End census of graph families and component trees of truncations.
//!
//! The census is symbolic per family; [`truncation_components`] recomputes
//! the components outside combinatorial balls on finite truncations so the
//! census can be cross-checked at desk scale.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphspec::{DeclaredEnds, ExtendedCount, Family, GraphFamilySpec};
use crate::metric_graph::{mu_sequence, total_end_count, truncate, volume_family, MetricGraph};
use crate::scalar::Scalar;
use crate::series::{SeriesSum, SeriesValue};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum VolumeClass {
    /// Carries the volume of the neighbourhood `U_0` of the end.
    FiniteVolume { tail_volume: f64, exact: Option<String> },
    InfiniteVolume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Freeness {
    Free,
    NonFree,
}

/// One class of ends sharing a ray description, volume class and freeness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndDescriptor {
    pub id: usize,
    pub ray: String,
    pub multiplicity: ExtendedCount,
    pub volume_class: VolumeClass,
    pub freeness: Freeness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndSummary {
    pub total: ExtendedCount,
    pub finite_volume: ExtendedCount,
    pub free_finite_volume: ExtendedCount,
    pub has_nonfree_finite_volume: bool,
    pub descriptors: Vec<EndDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub id: usize,
    pub vertices: usize,
    /// Smallest vertex id of the component in the truncation.
    pub representative: usize,
    /// Index of the enclosing component one level up.
    pub parent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentLevel {
    pub radius: u32,
    pub truncation_depth: u32,
    pub components: Vec<Component>,
}

impl VolumeClass {
    fn from_sum(s: &SeriesSum) -> VolumeClass {
        match s {
            SeriesSum::Finite(v) => VolumeClass::finite(v),
            SeriesSum::Divergent => VolumeClass::InfiniteVolume,
        }
    }

    fn finite(v: &SeriesValue) -> VolumeClass {
        VolumeClass::FiniteVolume {
            tail_volume: v.value,
            exact: v.exact.as_ref().map(|q| {
                if q.is_integer() {
                    q.numer().to_string()
                } else {
                    format!("{}/{}", q.numer(), q.denom())
                }
            }),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, VolumeClass::FiniteVolume { .. })
    }
}

impl EndSummary {
    fn from_descriptors(descriptors: Vec<EndDescriptor>) -> EndSummary {
        let mut total = ExtendedCount::ZERO;
        let mut finite_volume = ExtendedCount::ZERO;
        let mut free_finite_volume = ExtendedCount::ZERO;
        let mut has_nonfree_finite_volume = false;
        for d in &descriptors {
            total = total.add(d.multiplicity);
            if d.volume_class.is_finite() {
                finite_volume = finite_volume.add(d.multiplicity);
                match d.freeness {
                    Freeness::Free => free_finite_volume = free_finite_volume.add(d.multiplicity),
                    Freeness::NonFree => has_nonfree_finite_volume |= !d.multiplicity.is_zero(),
                }
            }
        }
        EndSummary {
            total,
            finite_volume,
            free_finite_volume,
            has_nonfree_finite_volume,
            descriptors,
        }
    }
}

fn descriptor(ray: &str, multiplicity: ExtendedCount, volume: &SeriesSum, freeness: Freeness) -> EndDescriptor {
    EndDescriptor {
        id: 0,
        ray: ray.into(),
        multiplicity,
        volume_class: VolumeClass::from_sum(volume),
        freeness,
    }
}

/// Symbolic end census of a family.
pub fn enumerate_ends(spec: &GraphFamilySpec) -> Result<EndSummary> {
    let mut descriptors = match &spec.family {
        Family::RadialTree { .. } => {
            // every neighbourhood of an end contains a whole subtree
            vec![descriptor(
                "radial branch",
                ExtendedCount::Uncountable,
                &volume_family(spec)?,
                Freeness::NonFree,
            )]
        }
        Family::HalfLinePath { ell } => vec![descriptor(
            "chain tail",
            ExtendedCount::Finite(1),
            &ell.normal_form().sum(),
            Freeness::Free,
        )],
        Family::FullLinePath { ell_pos, ell_neg } => vec![
            descriptor("positive tail", ExtendedCount::Finite(1), &ell_pos.normal_form().sum(), Freeness::Free),
            descriptor("negative tail", ExtendedCount::Finite(1), &ell_neg.normal_form().sum(), Freeness::Free),
        ],
        Family::ChainWithAttachments {
            ell,
            attachment,
            scaling,
        } => {
            if matches!(attachment.family, Family::ChainWithAttachments { .. }) {
                return Err(Error::UnsupportedFamily("nested chains of attachments".into()));
            }
            let template = enumerate_ends(attachment)?;
            let attached_volume = match volume_family(attachment)? {
                SeriesSum::Finite(v) if v.value == 0.0 => SeriesSum::Finite(v),
                SeriesSum::Finite(v) => {
                    let factor = match v.exact {
                        Some(q) => Scalar::Exact(q),
                        None => Scalar::Approx(v.value),
                    };
                    scaling.normal_form().sum().scale(&factor)
                }
                SeriesSum::Divergent => SeriesSum::Divergent,
            };
            let tail_volume = ell.normal_form().sum().add(&attached_volume);
            // infinitely many attachment ends accumulate at the chain tail
            let tail_freeness = if template.total.is_zero() {
                Freeness::Free
            } else {
                Freeness::NonFree
            };
            let mut out = vec![descriptor("chain tail", ExtendedCount::Finite(1), &tail_volume, tail_freeness)];
            for d in template.descriptors {
                let volume_class = match d.volume_class {
                    VolumeClass::FiniteVolume { tail_volume, .. } => VolumeClass::FiniteVolume {
                        tail_volume: tail_volume * scaling.normal_form().term_f64(0),
                        exact: None,
                    },
                    VolumeClass::InfiniteVolume => VolumeClass::InfiniteVolume,
                };
                out.push(EndDescriptor {
                    id: 0,
                    ray: format!("attachment: {}", d.ray),
                    multiplicity: d.multiplicity.times_countable(),
                    volume_class,
                    freeness: d.freeness,
                });
            }
            out
        }
        Family::SphereSymmetric { ell, ends, .. } => match ends {
            DeclaredEnds::One => vec![descriptor(
                "sphere tail",
                ExtendedCount::Finite(1),
                &volume_family(spec)?,
                Freeness::Free,
            )],
            DeclaredEnds::Two => {
                let ray = ell.normal_form().sum();
                vec![
                    descriptor("first ray", ExtendedCount::Finite(1), &ray, Freeness::Free),
                    descriptor("second ray", ExtendedCount::Finite(1), &ray, Freeness::Free),
                ]
            }
            DeclaredEnds::Cantor => vec![descriptor(
                "sphere branch",
                ExtendedCount::Uncountable,
                &volume_family(spec)?,
                Freeness::NonFree,
            )],
        },
        Family::FiniteGraph(_) => Vec::new(),
    };
    for (i, d) in descriptors.iter_mut().enumerate() {
        d.id = i;
    }
    Ok(EndSummary::from_descriptors(descriptors))
}

fn find_descriptor(spec: &GraphFamilySpec, end: usize) -> Result<EndDescriptor> {
    enumerate_ends(spec)?
        .descriptors
        .into_iter()
        .find(|d| d.id == end)
        .ok_or_else(|| Error::InvalidArgument(format!("end {end} is not in the census")))
}

pub fn classify_volume(spec: &GraphFamilySpec, end: usize) -> Result<VolumeClass> {
    Ok(find_descriptor(spec, end)?.volume_class)
}

/// Volume of the `n`-th canonical neighbourhood `U_n` of an end class.
pub fn end_tail_volume(spec: &GraphFamilySpec, end: usize, n: u64) -> Result<SeriesSum> {
    let d = find_descriptor(spec, end)?;
    Ok(match &spec.family {
        Family::RadialTree { b, ell } => {
            let mu = mu_sequence(b);
            let per = if n == 0 { 1.0 } else { mu.term_f64(n - 1) };
            mu.mul(&ell.normal_form())
                .tail_sum(n)
                .scale(&Scalar::Approx(1.0 / per))
        }
        Family::HalfLinePath { ell } => ell.normal_form().tail_sum(n),
        Family::FullLinePath { ell_pos, ell_neg } => {
            if d.id == 0 {
                ell_pos.normal_form().tail_sum(n)
            } else {
                ell_neg.normal_form().tail_sum(n)
            }
        }
        _ => match d.volume_class {
            VolumeClass::FiniteVolume { tail_volume, .. } if n == 0 => {
                SeriesSum::Finite(SeriesValue::approx(tail_volume, 0.0))
            }
            VolumeClass::InfiniteVolume => SeriesSum::Divergent,
            _ => {
                return Err(Error::UnsupportedFamily(format!(
                    "tail volumes beyond U_0 for {}",
                    spec.variant_name()
                )))
            }
        },
    })
}

pub fn count_finite_volume(spec: &GraphFamilySpec) -> Result<ExtendedCount> {
    Ok(enumerate_ends(spec)?.finite_volume)
}

pub fn detect_free(spec: &GraphFamilySpec, end: usize) -> Result<Freeness> {
    Ok(find_descriptor(spec, end)?.freeness)
}

pub fn has_nonfree_finite_volume(spec: &GraphFamilySpec) -> Result<bool> {
    Ok(enumerate_ends(spec)?.has_nonfree_finite_volume)
}

/// Connected components of the part of `g` at combinatorial depth `≥ radius`
/// that reach a truncation cut (components of the complement of the ball
/// which are infinite in the full graph). Returns a component label per
/// vertex (`usize::MAX` outside) and the list of labels.
fn outer_components(g: &MetricGraph, radius: u32) -> (Vec<usize>, Vec<(usize, usize)>) {
    let n = g.vertex_count();
    let mut label = vec![usize::MAX; n];
    let mut raw = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX || g.depth(start) < radius {
            continue;
        }
        let id = raw.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut size = 0;
        let mut reaches_cut = false;
        while let Some(x) = stack.pop() {
            size += 1;
            reaches_cut |= g.is_cut(x);
            for &(y, _) in g.incident(x) {
                if label[y] == usize::MAX && g.depth(y) >= radius {
                    label[y] = id;
                    stack.push(y);
                }
            }
        }
        raw.push((size, reaches_cut));
    }
    // keep only unbounded components, renumbered in order of first vertex
    let mut remap = vec![usize::MAX; raw.len()];
    let mut kept = Vec::new();
    for v in 0..n {
        let l = label[v];
        if l != usize::MAX && raw[l].1 && remap[l] == usize::MAX {
            remap[l] = kept.len();
            kept.push((raw[l].0, v));
        }
    }
    let labels = label
        .into_iter()
        .map(|l| if l == usize::MAX { usize::MAX } else { remap[l] })
        .collect();
    (labels, kept)
}

fn levels_on(g: &MetricGraph, radius: u32) -> ComponentLevel {
    let (_, kept) = outer_components(g, radius);
    let parents = if radius == 0 {
        vec![0; kept.len()]
    } else {
        let (up, _) = outer_components(g, radius - 1);
        kept.iter().map(|&(_, rep)| up[rep]).collect()
    };
    ComponentLevel {
        radius,
        truncation_depth: g.provenance().map_or(0, |p| p.depth),
        components: kept
            .iter()
            .zip(parents)
            .enumerate()
            .map(|(id, (&(vertices, representative), parent))| Component {
                id,
                vertices,
                representative,
                parent,
            })
            .collect(),
    }
}

/// Components outside the radius-`R` ball with containment into level `R − 1`.
pub fn truncation_components(spec: &GraphFamilySpec, radius: u32) -> Result<ComponentLevel> {
    let g = truncate(spec, radius + 2)?;
    Ok(levels_on(&g, radius))
}

/// Component levels for `R = 1..=r_max`, computed concurrently.
pub fn component_census(spec: &GraphFamilySpec, r_max: u32) -> Result<Vec<ComponentLevel>> {
    (1..=r_max)
        .into_par_iter()
        .map(|r| truncation_components(spec, r))
        .collect()
}

/// Per-level component counts as CSV with header `radius,components`.
pub fn components_csv(levels: &[ComponentLevel]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["radius", "components"]).expect("in-memory csv");
    for l in levels {
        w.write_record([l.radius.to_string(), l.components.len().to_string()])
            .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Whether truncation component counts agree with the symbolic census:
/// finite censuses must be matched exactly from some radius on, infinite ones
/// must grow without repeating a plateau over the sampled radii.
pub fn census_consistent(spec: &GraphFamilySpec, levels: &[ComponentLevel]) -> bool {
    let counts: Vec<usize> = levels.iter().map(|l| l.components.len()).collect();
    match total_end_count(spec) {
        ExtendedCount::Finite(k) => counts.last().is_some_and(|&c| c as u64 == k),
        _ => counts.windows(2).all(|w| w[1] >= w[0]) && counts.last() > counts.first(),
    }
}

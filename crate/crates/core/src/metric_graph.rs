//! Finite truncations of graph families and their metric quantities.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphspec::{DeclaredEnds, ExtendedCount, Family, FiniteGraphSpec, GraphFamilySpec, SequenceSpec};
use crate::scalar::Scalar;
use crate::series::{NormalForm, SeriesSum, SeriesValue};

pub const DEFAULT_VERTEX_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub variant: String,
    pub name: Option<String>,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: usize,
    pub depth: u32,
    pub boundary: bool,
    /// Total length of incident edges of the full graph that the truncation
    /// dropped; `None` when it cannot be derived.
    pub missing_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GraphDocument {
    vertices: Vec<VertexRecord>,
    edges: Vec<Edge>,
    provenance: Option<Provenance>,
}

/// A finite, simple, connected metric graph. Edges are oriented `u → v`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    depth: Vec<u32>,
    boundary: Vec<bool>,
    missing: Vec<Option<f64>>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    provenance: Option<Provenance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarWeight {
    pub value: f64,
    /// Set when the truncation cut incident edges whose lengths are unknown,
    /// so `value` only bounds the full-graph star weight from below.
    pub lower_bound_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphRow {
    pub index: u64,
    /// `None` for infinite volume.
    pub volume: Option<f64>,
    /// `None` for infinite diameter.
    pub diameter: Option<f64>,
    pub boundary_size: u64,
    pub end_count: ExtendedCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphSequenceReport {
    pub description: String,
    pub rows: Vec<SubgraphRow>,
}

impl MetricGraph {
    /// Builds a graph from an edge list; every vertex gets depth 0 and no
    /// boundary mark.
    pub fn from_edges(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut g = MetricGraph {
            depth: vec![0; vertex_count],
            boundary: vec![false; vertex_count],
            missing: vec![Some(0.0); vertex_count],
            edges: Vec::new(),
            adjacency: vec![Vec::new(); vertex_count],
            provenance: None,
        };
        for e in edges {
            g.push_edge(e)?;
        }
        g.check_connected()?;
        Ok(g)
    }

    fn push_edge(&mut self, e: Edge) -> Result<()> {
        let n = self.vertex_count();
        if e.u >= n {
            return Err(Error::UnknownVertex(e.u));
        }
        if e.v >= n {
            return Err(Error::UnknownVertex(e.v));
        }
        if e.u == e.v || self.adjacency[e.u].iter().any(|&(w, _)| w == e.v) {
            return Err(Error::InvalidArgument(format!("edge {}-{} breaks simplicity", e.u, e.v)));
        }
        if !(e.length > 0.0 && e.length.is_finite()) {
            return Err(Error::InvalidArgument(format!("edge length {} not in (0, inf)", e.length)));
        }
        let idx = self.edges.len();
        self.adjacency[e.u].push((e.v, idx));
        self.adjacency[e.v].push((e.u, idx));
        self.edges.push(e);
        Ok(())
    }

    fn check_connected(&self) -> Result<()> {
        if self.vertex_count() == 0 {
            return Err(Error::InvalidArgument("graph has no vertices".into()));
        }
        let dist = self.bfs_hops(0);
        if dist.iter().any(Option::is_none) {
            return Err(Error::InvalidArgument("graph is not connected".into()));
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.depth.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn depth(&self, v: usize) -> u32 {
        self.depth[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| self.boundary[v]).collect()
    }

    /// Vertices whose full-graph edges were partly removed by truncation.
    pub fn is_cut(&self, v: usize) -> bool {
        self.missing[v] != Some(0.0)
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// `(neighbour, edge index)` pairs.
    pub fn incident(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn set_boundary(&mut self, v: usize, flag: bool) -> Result<()> {
        if v >= self.vertex_count() {
            return Err(Error::UnknownVertex(v));
        }
        self.boundary[v] = flag;
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.volume()
    }

    pub fn scaled(&self, c: f64) -> MetricGraph {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.length *= c;
        }
        for m in g.missing.iter_mut().flatten() {
            *m *= c;
        }
        g
    }

    /// The same graph with every edge orientation reversed.
    pub fn flipped(&self) -> MetricGraph {
        let mut g = self.clone();
        for e in &mut g.edges {
            std::mem::swap(&mut e.u, &mut e.v);
        }
        g
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    /// `m(v) = Σ_{e ∈ E_v} |e|`, completed by the lengths the truncation removed when known.
    pub fn star_weight(&self, v: usize) -> Result<StarWeight> {
        self.check_vertex(v)?;
        let local: f64 = self.adjacency[v].iter().map(|&(_, e)| self.edges[e].length).sum();
        Ok(match self.missing[v] {
            Some(extra) => StarWeight {
                value: local + extra,
                lower_bound_only: false,
            },
            None => StarWeight {
                value: local,
                lower_bound_only: true,
            },
        })
    }

    fn bfs_hops(&self, from: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.vertex_count()];
        let mut queue = VecDeque::from([from]);
        dist[from] = Some(0);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].unwrap_or(0);
            for &(y, _) in &self.adjacency[x] {
                if dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Shortest path lengths from `from` to every vertex.
    pub fn distances_from(&self, from: usize) -> Result<Vec<f64>> {
        self.check_vertex(from)?;
        Ok(self.dijkstra(from, |_| 0.0, |e| self.edges[e].length, 0.0))
    }

    /// Dijkstra with non-negative vertex costs charged on entry and edge costs.
    fn dijkstra(&self, from: usize, vertex_cost: impl Fn(usize) -> f64, edge_cost: impl Fn(usize) -> f64, start: f64) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        let mut dist = vec![f64::INFINITY; self.vertex_count()];
        dist[from] = start;
        let mut heap = BinaryHeap::from([Item(start, from)]);
        while let Some(Item(d, x)) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            for &(y, e) in &self.adjacency[x] {
                let nd = d + edge_cost(e) + vertex_cost(y);
                if nd < dist[y] {
                    dist[y] = nd;
                    heap.push(Item(nd, y));
                }
            }
        }
        dist
    }

    /// The natural path metric `ρ(u, v)`.
    pub fn path_metric(&self, u: usize, v: usize) -> Result<f64> {
        self.check_vertex(v)?;
        Ok(self.distances_from(u)?[v])
    }

    /// The star path metric: least `Σ m(v_k)` over vertex paths from `u` to
    /// `v`, both endpoints included, and `0` for `u = v`. Vertex weights are
    /// charged when a path enters a vertex, which is shortest path search on
    /// the graph with every vertex split into an in/out pair.
    pub fn star_path_metric(&self, u: usize, v: usize) -> Result<f64> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Ok(0.0);
        }
        let m: Vec<f64> = (0..self.vertex_count())
            .map(|x| self.star_weight(x).map(|w| w.value))
            .collect::<Result<_>>()?;
        Ok(self.dijkstra(u, |x| m[x], |_| 0.0, m[u])[v])
    }

    /// `sup ρ(x, y)` over all points `x, y` of the metric graph.
    pub fn diameter(&self) -> f64 {
        let n = self.vertex_count();
        let dist: Vec<Vec<f64>> = (0..n).map(|v| self.dijkstra(v, |_| 0.0, |e| self.edges[e].length, 0.0)).collect();
        let mut best = dist.iter().flatten().cloned().fold(0.0, f64::max);
        for (i, e) in self.edges.iter().enumerate() {
            // farthest point of the same edge pair is the edge midpoint logic below
            for f in &self.edges[i..] {
                best = best.max(edge_pair_diameter(e, f, &dist));
            }
        }
        best
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = GraphDocument {
            vertices: (0..self.vertex_count())
                .map(|v| VertexRecord {
                    id: v,
                    depth: self.depth[v],
                    boundary: self.boundary[v],
                    missing_length: self.missing[v],
                })
                .collect(),
            edges: self.edges.clone(),
            provenance: self.provenance.clone(),
        };
        serde_json::to_value(doc).expect("graph json is always serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let doc: GraphDocument =
            serde_json::from_value(v.clone()).map_err(|e| Error::InvalidArgument(format!("graph json: {e}")))?;
        let n = doc.vertices.len();
        for (i, rec) in doc.vertices.iter().enumerate() {
            if rec.id != i {
                return Err(Error::InvalidArgument("vertex ids must be 0..n in order".into()));
            }
        }
        let mut g = MetricGraph::from_edges(n, doc.edges)?;
        for rec in doc.vertices {
            g.depth[rec.id] = rec.depth;
            g.boundary[rec.id] = rec.boundary;
            g.missing[rec.id] = rec.missing_length;
        }
        g.provenance = doc.provenance;
        Ok(g)
    }

    /// Edge list as CSV with header `u,v,length`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["u", "v", "length"]).expect("in-memory csv");
        for e in &self.edges {
            w.write_record([e.u.to_string(), e.v.to_string(), format_f64(e.length)])
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut edges = Vec::new();
        let mut n = 0;
        for rec in r.deserialize::<Edge>() {
            let e = rec.map_err(|e| Error::InvalidArgument(format!("edge csv: {e}")))?;
            n = n.max(e.u + 1).max(e.v + 1);
            edges.push(e);
        }
        MetricGraph::from_edges(n, edges)
    }
}

/// Shortest round-trip representation of a float.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Largest distance between a point of `e` and a point of `f`.
fn edge_pair_diameter(e: &Edge, f: &Edge, dist: &[Vec<f64>]) -> f64 {
    let (l, m) = (e.length, f.length);
    if std::ptr::eq(e, f) {
        // a point and its antipode on the cycle through the edge
        let around = dist[e.u][e.v];
        return (l + around) / 2.0;
    }
    let (dac, dad, dbc, dbd) = (dist[e.u][f.u], dist[e.u][f.v], dist[e.v][f.u], dist[e.v][f.v]);
    let inner = |s: f64| {
        let a = (s + dac).min(l - s + dbc);
        let b = (s + dad).min(l - s + dbd) + m;
        // max over t ∈ [0, m] of min(a + t, b − t)
        let t = ((b - a) / 2.0).clamp(0.0, m);
        (a + t).min(b - t)
    };
    let mut candidates = vec![0.0, l, (l + dbc - dac) / 2.0, (l + dbd - dad) / 2.0];
    const GRID: usize = 64;
    candidates.extend((1..GRID).map(|i| l * i as f64 / GRID as f64));
    candidates
        .into_iter()
        .filter(|s| (0.0..=l).contains(s))
        .map(inner)
        .fold(0.0, f64::max)
}

/// Incremental builder used by truncation.
struct Builder {
    g: MetricGraph,
    cap: u64,
}

impl Builder {
    fn new(cap: u64) -> Self {
        Builder {
            g: MetricGraph {
                depth: Vec::new(),
                boundary: Vec::new(),
                missing: Vec::new(),
                edges: Vec::new(),
                adjacency: Vec::new(),
                provenance: None,
            },
            cap,
        }
    }

    fn vertex(&mut self, depth: u32) -> Result<usize> {
        let id = self.g.vertex_count();
        if id as u64 >= self.cap {
            return Err(Error::DepthTooLarge {
                vertices: id as u64 + 1,
                cap: self.cap,
            });
        }
        self.g.depth.push(depth);
        self.g.boundary.push(false);
        self.g.missing.push(Some(0.0));
        self.g.adjacency.push(Vec::new());
        Ok(id)
    }

    fn edge(&mut self, u: usize, v: usize, length: f64) -> Result<()> {
        self.g.push_edge(Edge { u, v, length })
    }

    fn cut(&mut self, v: usize, missing: f64) {
        self.g.boundary[v] = true;
        if let Some(m) = &mut self.g.missing[v] {
            *m += missing;
        }
    }
}

fn seq_f64(nf: &NormalForm, n: u64) -> f64 {
    nf.term_f64(n)
}

/// The subgraph spanned by all vertices within combinatorial distance
/// `depth` of the root; vertices whose full-graph edges were cut are marked
/// as boundary.
pub fn truncate(spec: &GraphFamilySpec, depth: u32) -> Result<MetricGraph> {
    truncate_with_cap(spec, depth, DEFAULT_VERTEX_CAP)
}

pub fn truncate_with_cap(spec: &GraphFamilySpec, depth: u32, cap: u64) -> Result<MetricGraph> {
    if depth == 0 {
        return Err(Error::InvalidArgument("truncation depth must be at least 1".into()));
    }
    let mut b = Builder::new(cap);
    let root = b.vertex(0)?;
    grow(&mut b, spec, root, 0, depth, 1.0)?;
    let mut g = b.g;
    g.provenance = Some(Provenance {
        variant: spec.variant_name().into(),
        name: spec.name.clone(),
        depth,
    });
    Ok(g)
}

/// Attach the truncation of `spec`, lengths scaled by `scale`, with its root
/// identified with the existing vertex `root` of depth `base`; vertices are
/// kept up to absolute depth `limit`.
fn grow(b: &mut Builder, spec: &GraphFamilySpec, root: usize, base: u32, limit: u32, scale: f64) -> Result<()> {
    let budget = limit - base;
    match &spec.family {
        Family::RadialTree { b: branching, ell } => {
            let bn = branching.normal_form();
            let ln = ell.normal_form();
            let mut layer = vec![root];
            for n in 0..budget {
                let kids = seq_f64(&bn, n as u64) as usize;
                let len = scale * seq_f64(&ln, n as u64);
                let mut next = Vec::with_capacity(layer.len() * kids);
                for &p in &layer {
                    for _ in 0..kids {
                        let c = b.vertex(base + n + 1)?;
                        b.edge(p, c, len)?;
                        next.push(c);
                    }
                }
                layer = next;
            }
            let kids = seq_f64(&bn, budget as u64);
            let len = scale * seq_f64(&ln, budget as u64);
            for &p in &layer {
                b.cut(p, kids * len);
            }
        }
        Family::HalfLinePath { ell } => {
            let ln = ell.normal_form();
            let end = grow_ray(b, &ln, root, base, budget, scale)?;
            b.cut(end, scale * seq_f64(&ln, budget as u64));
        }
        Family::FullLinePath { ell_pos, ell_neg } => {
            for nf in [ell_pos.normal_form(), ell_neg.normal_form()] {
                let end = grow_ray(b, &nf, root, base, budget, scale)?;
                b.cut(end, scale * seq_f64(&nf, budget as u64));
            }
        }
        Family::ChainWithAttachments {
            ell,
            attachment,
            scaling,
        } => {
            if matches!(attachment.family, Family::ChainWithAttachments { .. }) {
                return Err(Error::UnsupportedFamily("nested chains of attachments".into()));
            }
            let ln = ell.normal_form();
            let sn = scaling.normal_form();
            let mut chain = vec![root];
            let mut prev = root;
            for n in 0..budget {
                let c = b.vertex(base + n + 1)?;
                b.edge(prev, c, scale * seq_f64(&ln, n as u64))?;
                chain.push(c);
                prev = c;
            }
            b.cut(prev, scale * seq_f64(&ln, budget as u64));
            for (n, &v) in chain.iter().enumerate() {
                let s = scale * seq_f64(&sn, n as u64);
                let at = base + n as u32;
                if at == limit {
                    // nothing of the attachment fits; record its root star weight
                    let m = attachment_root_weight(attachment, s);
                    b.cut(v, 0.0);
                    match m {
                        Some(w) => b.cut(v, w),
                        None => b.g.missing[v] = None,
                    }
                } else {
                    grow(b, attachment, v, at, limit, s)?;
                }
            }
        }
        Family::SphereSymmetric {
            sphere_sizes,
            ell,
            ends,
            ..
        } => {
            let sz = sphere_sizes.normal_form();
            let ln = ell.normal_form();
            let mut sphere = vec![root];
            for n in 0..budget {
                let here = sphere.len() as u64;
                let count = seq_f64(&sz, n as u64 + 1) as u64;
                let len = scale * seq_f64(&ln, n as u64);
                let mut next = Vec::with_capacity(count as usize);
                for j in 0..count {
                    let c = b.vertex(base + n + 1)?;
                    let parent = sphere[(j * here / count) as usize];
                    b.edge(parent, c, len)?;
                    next.push(c);
                }
                if *ends == DeclaredEnds::One && count >= 3 {
                    let ring = scale * seq_f64(&ln, n as u64 + 1);
                    for j in 0..next.len() {
                        b.edge(next[j], next[(j + 1) % next.len()], ring)?;
                    }
                }
                sphere = next;
            }
            let here = sphere.len() as f64;
            let count = seq_f64(&sz, budget as u64 + 1);
            let len = scale * seq_f64(&ln, budget as u64);
            for (j, &v) in sphere.iter().enumerate() {
                // children of vertex j: indices i with ⌊i·here/count⌋ = j
                let lo = (j as f64 * count / here).ceil();
                let hi = ((j as f64 + 1.0) * count / here).ceil();
                b.cut(v, (hi - lo) * len);
            }
        }
        Family::FiniteGraph(fg) => grow_finite(b, fg, root, base, limit, scale)?,
    }
    Ok(())
}

fn grow_ray(b: &mut Builder, ln: &NormalForm, root: usize, base: u32, budget: u32, scale: f64) -> Result<usize> {
    let mut prev = root;
    for n in 0..budget {
        let c = b.vertex(base + n + 1)?;
        b.edge(prev, c, scale * seq_f64(ln, n as u64))?;
        prev = c;
    }
    Ok(prev)
}

fn grow_finite(b: &mut Builder, fg: &FiniteGraphSpec, root: usize, base: u32, limit: u32, scale: f64) -> Result<()> {
    let n = fg.vertices;
    let mut adj = vec![Vec::new(); n];
    for (u, v, l) in &fg.edges {
        adj[*u].push((*v, l.to_f64()));
        adj[*v].push((*u, l.to_f64()));
    }
    let mut hops = vec![u32::MAX; n];
    hops[fg.root] = 0;
    let mut queue = VecDeque::from([fg.root]);
    while let Some(x) = queue.pop_front() {
        for &(y, _) in &adj[x] {
            if hops[y] == u32::MAX {
                hops[y] = hops[x] + 1;
                queue.push_back(y);
            }
        }
    }
    let budget = limit - base;
    let mut id = vec![usize::MAX; n];
    id[fg.root] = root;
    let mut order: Vec<usize> = (0..n).filter(|&v| hops[v] <= budget).collect();
    order.sort_by_key(|&v| (hops[v], v));
    for &v in &order {
        if v != fg.root {
            id[v] = b.vertex(base + hops[v])?;
        }
    }
    for (u, v, l) in &fg.edges {
        if id[*u] != usize::MAX && id[*v] != usize::MAX {
            let (a, c) = if hops[*u] <= hops[*v] { (*u, *v) } else { (*v, *u) };
            b.edge(id[a], id[c], scale * l.to_f64())?;
        }
    }
    for &v in &order {
        let dropped: f64 = adj[v]
            .iter()
            .filter(|(w, _)| id[*w] == usize::MAX)
            .map(|(_, l)| scale * l)
            .sum();
        if dropped > 0.0 {
            b.cut(id[v], dropped);
        }
    }
    for &v in &fg.boundary {
        if id[v] != usize::MAX {
            b.g.boundary[id[v]] = true;
        }
    }
    Ok(())
}

fn attachment_root_weight(spec: &GraphFamilySpec, s: f64) -> Option<f64> {
    let w = match &spec.family {
        Family::RadialTree { b, ell } => b.normal_form().term_f64(0) * ell.normal_form().term_f64(0),
        Family::HalfLinePath { ell } => ell.normal_form().term_f64(0),
        Family::FullLinePath { ell_pos, ell_neg } => {
            ell_pos.normal_form().term_f64(0) + ell_neg.normal_form().term_f64(0)
        }
        Family::SphereSymmetric { sphere_sizes, ell, .. } => {
            sphere_sizes.normal_form().term_f64(1) * ell.normal_form().term_f64(0)
        }
        Family::FiniteGraph(fg) => fg
            .edges
            .iter()
            .filter(|(u, v, _)| *u == fg.root || *v == fg.root)
            .map(|(_, _, l)| l.to_f64())
            .sum(),
        Family::ChainWithAttachments { .. } => return None,
    };
    Some(s * w)
}

/// `μ_n = Π_{k≤n} b_k` as a normal form.
pub fn mu_sequence(b: &SequenceSpec) -> NormalForm {
    b.normal_form()
        .cumulative_product()
        .expect("validated branching sequences are eventually constant")
}

/// Total volume of the family, decided in closed form.
pub fn volume_family(spec: &GraphFamilySpec) -> Result<SeriesSum> {
    Ok(match &spec.family {
        Family::RadialTree { b, ell } => mu_sequence(b).mul(&ell.normal_form()).sum(),
        Family::HalfLinePath { ell } => ell.normal_form().sum(),
        Family::FullLinePath { ell_pos, ell_neg } => ell_pos.normal_form().sum().add(&ell_neg.normal_form().sum()),
        Family::ChainWithAttachments {
            ell,
            attachment,
            scaling,
        } => {
            if matches!(attachment.family, Family::ChainWithAttachments { .. }) {
                return Err(Error::UnsupportedFamily("nested chains of attachments".into()));
            }
            let chain = ell.normal_form().sum();
            let attached = match volume_family(attachment)? {
                SeriesSum::Divergent => SeriesSum::Divergent,
                SeriesSum::Finite(v) if v.value == 0.0 => SeriesSum::Finite(v),
                SeriesSum::Finite(v) => match scaling.normal_form().sum() {
                    SeriesSum::Divergent => SeriesSum::Divergent,
                    SeriesSum::Finite(s) => SeriesSum::Finite(product(&v, &s)),
                },
            };
            chain.add(&attached)
        }
        Family::SphereSymmetric {
            sphere_sizes,
            ell,
            ends,
            ..
        } => {
            let sz = sphere_sizes.normal_form();
            let ln = ell.normal_form();
            let radial = sz.shift(1).mul(&ln).sum();
            if *ends == DeclaredEnds::One {
                radial.add(&sz.shift(1).mul(&ln.shift(1)).sum())
            } else {
                radial
            }
        }
        Family::FiniteGraph(fg) => {
            let total = fg.edges.iter().fold(Scalar::zero(), |acc, (_, _, l)| acc.add(l));
            SeriesSum::Finite(match total {
                Scalar::Exact(q) => SeriesValue::exact(q),
                Scalar::Approx(v) => SeriesValue::approx(v, fg.edges.len() as f64 * f64::EPSILON * v),
            })
        }
    })
}

fn product(a: &SeriesValue, b: &SeriesValue) -> SeriesValue {
    match (&a.exact, &b.exact) {
        (Some(x), Some(y)) => SeriesValue::exact(x * y),
        _ => {
            let value = a.value * b.value;
            SeriesValue::approx(
                value,
                a.abs_error * b.value.abs() + b.abs_error * a.value.abs() + a.abs_error * b.abs_error + f64::EPSILON * value.abs(),
            )
        }
    }
}

/// Number of ends of a family, without volume information.
pub(crate) fn total_end_count(spec: &GraphFamilySpec) -> ExtendedCount {
    match &spec.family {
        Family::RadialTree { .. } => ExtendedCount::Uncountable,
        Family::HalfLinePath { .. } => ExtendedCount::Finite(1),
        Family::FullLinePath { .. } => ExtendedCount::Finite(2),
        Family::ChainWithAttachments { attachment, .. } => {
            ExtendedCount::Finite(1).add(total_end_count(attachment).times_countable())
        }
        Family::SphereSymmetric { ends, .. } => match ends {
            DeclaredEnds::One => ExtendedCount::Finite(1),
            DeclaredEnds::Two => ExtendedCount::Finite(2),
            DeclaredEnds::Cantor => ExtendedCount::Uncountable,
        },
        Family::FiniteGraph(_) => ExtendedCount::ZERO,
    }
}

/// Diameter of a family member, `None` when infinite.
pub(crate) fn family_diameter(spec: &GraphFamilySpec) -> Result<Option<f64>> {
    let finite = |s: SeriesSum| s.value();
    Ok(match &spec.family {
        Family::RadialTree { b, ell } => {
            let l = finite(ell.normal_form().sum());
            let two = b.normal_form().term_f64(0) >= 2.0;
            l.map(|l| if two { 2.0 * l } else { l })
        }
        Family::HalfLinePath { ell } => finite(ell.normal_form().sum()),
        Family::FullLinePath { ell_pos, ell_neg } => {
            match (finite(ell_pos.normal_form().sum()), finite(ell_neg.normal_form().sum())) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            }
        }
        Family::FiniteGraph(_) => {
            let g = truncate(spec, u32::try_from(spec_vertex_bound(spec)).unwrap_or(u32::MAX).max(1))?;
            Some(g.diameter())
        }
        Family::ChainWithAttachments { .. } | Family::SphereSymmetric { .. } => None,
    })
}

fn spec_vertex_bound(spec: &GraphFamilySpec) -> usize {
    match &spec.family {
        Family::FiniteGraph(fg) => fg.vertices,
        _ => 1,
    }
}

/// Tail decomposition `(G_n)` of a family for `n = 0..=n_max`: subtrees
/// below one generation-`n` vertex for radial trees, the path beyond `v_n`
/// for half-lines, and the `n`-th attachment for chains.
pub fn subgraph_sequence(spec: &GraphFamilySpec, n_max: u64) -> Result<SubgraphSequenceReport> {
    match &spec.family {
        Family::RadialTree { b, ell } => {
            let mu = mu_sequence(b);
            let ln = ell.normal_form();
            let vol_terms = mu.mul(&ln);
            let rows = (0..=n_max)
                .map(|n| {
                    let per_branch = if n == 0 { 1.0 } else { mu.term_f64(n - 1) };
                    SubgraphRow {
                        index: n,
                        volume: vol_terms.tail_sum(n).value().map(|v| v / per_branch),
                        diameter: ln.tail_sum(n).value().map(|l| 2.0 * l),
                        boundary_size: u64::from(n > 0),
                        end_count: ExtendedCount::Uncountable,
                    }
                })
                .collect();
            Ok(SubgraphSequenceReport {
                description: "subtree below one generation-n vertex".into(),
                rows,
            })
        }
        Family::HalfLinePath { ell } => {
            let ln = ell.normal_form();
            let rows = (0..=n_max)
                .map(|n| {
                    let tail = ln.tail_sum(n).value();
                    SubgraphRow {
                        index: n,
                        volume: tail,
                        diameter: tail,
                        boundary_size: u64::from(n > 0),
                        end_count: ExtendedCount::Finite(1),
                    }
                })
                .collect();
            Ok(SubgraphSequenceReport {
                description: "path beyond vertex n".into(),
                rows,
            })
        }
        Family::ChainWithAttachments {
            attachment, scaling, ..
        } => {
            if matches!(attachment.family, Family::ChainWithAttachments { .. }) {
                return Err(Error::UnsupportedFamily("nested chains of attachments".into()));
            }
            let vol = volume_family(attachment)?.value();
            let diam = family_diameter(attachment)?;
            let ends = total_end_count(attachment);
            let sn = scaling.normal_form();
            let rows = (0..=n_max)
                .map(|n| {
                    let s = sn.term_f64(n);
                    SubgraphRow {
                        index: n,
                        volume: vol.map(|v| s * v),
                        diameter: diam.map(|d| s * d),
                        boundary_size: 1,
                        end_count: ends,
                    }
                })
                .collect();
            Ok(SubgraphSequenceReport {
                description: "attachment glued at chain vertex n".into(),
                rows,
            })
        }
        _ => Err(Error::UnsupportedFamily(format!(
            "{} has no canonical tail decomposition",
            spec.variant_name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphspec::parse_spec;

    fn radial(r: &str) -> GraphFamilySpec {
        parse_spec(&format!(
            r#"{{"variant":"RadialTree","b":{{"kind":"constant","c":2}},"ell":{{"kind":"geometric","a":1,"r":"{r}"}}}}"#
        ))
        .unwrap()
    }

    fn unit_half_line() -> GraphFamilySpec {
        parse_spec(r#"{"variant":"HalfLinePath","ell":{"kind":"constant","c":1}}"#).unwrap()
    }

    #[test]
    fn binary_tree_depth_two() {
        let g = truncate(&radial("1/4"), 2).unwrap();
        assert_eq!(g.vertex_count(), 7);
        assert_eq!(g.edges().len(), 6);
        assert_eq!(g.boundary_vertices().len(), 4);
    }

    #[test]
    fn half_line_depth_five() {
        let g = truncate(&unit_half_line(), 5).unwrap();
        assert_eq!(g.vertex_count(), 6);
        assert_eq!(g.volume(), 5.0);
    }

    #[test]
    fn truncation_volume_matches_brute_force() {
        let g = truncate(&radial("1/4"), 3).unwrap();
        let brute: f64 = (0..3).map(|n| 2f64.powi(n + 1) * 4f64.powi(-n)).sum();
        assert_eq!(g.volume(), 3.5);
        assert_eq!(brute, 3.5);
    }

    #[test]
    fn depth_cap_is_enforced() {
        let err = truncate_with_cap(&radial("1/4"), 20, 1000).unwrap_err();
        assert!(matches!(err, Error::DepthTooLarge { .. }));
    }

    #[test]
    fn family_volumes() {
        match volume_family(&radial("1/4")).unwrap() {
            SeriesSum::Finite(v) => assert_eq!(v.exact, Scalar::int(4).as_exact().cloned()),
            SeriesSum::Divergent => panic!(),
        }
        assert_eq!(volume_family(&radial("1/2")).unwrap(), SeriesSum::Divergent);
        // oracle: partial sums of 2^(n+1) 4^(-n)
        let partial: f64 = (0..60).map(|n| 2f64.powi(n + 1) * 4f64.powi(-n)).sum();
        assert!((partial - 4.0).abs() < 1e-12);
        let fg = parse_spec(r#"{"variant":"FiniteGraph","vertices":3,"edges":[[0,1,"1/2"],[1,2,2]]}"#).unwrap();
        match volume_family(&fg).unwrap() {
            SeriesSum::Finite(v) => assert_eq!(v.exact, Scalar::ratio(5, 2).as_exact().cloned()),
            SeriesSum::Divergent => panic!(),
        }
    }

    #[test]
    fn star_weights() {
        let fg = parse_spec(r#"{"variant":"FiniteGraph","vertices":2,"edges":[[0,1,1]]}"#).unwrap();
        let g = truncate(&fg, 1).unwrap();
        assert_eq!(g.star_weight(0).unwrap().value, 1.0);
        let t = parse_spec(
            r#"{"variant":"RadialTree","b":{"kind":"constant","c":2},"ell":{"kind":"geometric","a":1,"r":"1/4"}}"#,
        )
        .unwrap();
        let g = truncate(&t, 1).unwrap();
        assert_eq!(g.star_weight(0).unwrap().value, 2.0);
        // generation-1 vertex: its parent edge plus the two cut children edges
        let w = g.star_weight(1).unwrap();
        assert_eq!(w.value, 1.5);
        assert!(!w.lower_bound_only);
        assert!(matches!(g.star_weight(99), Err(Error::UnknownVertex(99))));
    }

    #[test]
    fn path_metrics() {
        let g = truncate(&unit_half_line(), 5).unwrap();
        assert_eq!(g.path_metric(0, 3).unwrap(), 3.0);
        assert_eq!(g.star_path_metric(0, 1).unwrap(), 3.0);
        assert_eq!(g.path_metric(2, 2).unwrap(), 0.0);
        assert_eq!(g.star_path_metric(2, 2).unwrap(), 0.0);
    }

    #[test]
    fn star_path_metric_against_exhaustive_paths() {
        // small cycle with a chord; enumerate all simple paths
        let edges = vec![
            Edge { u: 0, v: 1, length: 1.0 },
            Edge { u: 1, v: 2, length: 3.0 },
            Edge { u: 2, v: 3, length: 0.5 },
            Edge { u: 3, v: 0, length: 2.0 },
            Edge { u: 0, v: 2, length: 4.0 },
        ];
        let g = MetricGraph::from_edges(4, edges).unwrap();
        let m: Vec<f64> = (0..4).map(|v| g.star_weight(v).unwrap().value).collect();
        fn best(g: &MetricGraph, m: &[f64], at: usize, goal: usize, seen: &mut Vec<bool>, acc: f64) -> f64 {
            if at == goal {
                return acc;
            }
            let mut out = f64::INFINITY;
            for &(w, _) in g.incident(at) {
                if !seen[w] {
                    seen[w] = true;
                    out = out.min(best(g, m, w, goal, seen, acc + m[w]));
                    seen[w] = false;
                }
            }
            out
        }
        for u in 0..4 {
            for v in 0..4 {
                if u == v {
                    continue;
                }
                let mut seen = vec![false; 4];
                seen[u] = true;
                let want = best(&g, &m, u, v, &mut seen, m[u]);
                assert!((g.star_path_metric(u, v).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diameter_includes_interior_points() {
        // unit cycle of three edges: farthest points are half the perimeter apart
        let edges = vec![
            Edge { u: 0, v: 1, length: 1.0 },
            Edge { u: 1, v: 2, length: 1.0 },
            Edge { u: 2, v: 0, length: 1.0 },
        ];
        let g = MetricGraph::from_edges(3, edges).unwrap();
        assert!((g.diameter() - 1.5).abs() < 1e-12);
        let g = truncate(&unit_half_line(), 4).unwrap();
        assert_eq!(g.diameter(), 4.0);
    }

    #[test]
    fn json_and_csv_round_trip() {
        let g = truncate(&radial("1/4"), 3).unwrap();
        let again = MetricGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g, again);
        let csv = g.to_csv();
        assert!(csv.starts_with("u,v,length\n"));
        let h = MetricGraph::from_csv(&csv).unwrap();
        assert_eq!(h.edges(), g.edges());
    }

    #[test]
    fn subgraph_sequences() {
        let rep = subgraph_sequence(&radial("1/4"), 6).unwrap();
        for w in rep.rows.windows(2) {
            assert!(w[1].volume.unwrap() < w[0].volume.unwrap());
        }
        assert_eq!(rep.rows[3].boundary_size, 1);
        // vol(G_1) = Σ_{k≥1} 2^(k+1) 4^(-k) / 2 = 1
        assert!((rep.rows[1].volume.unwrap() - 1.0).abs() < 1e-15);
        let chain = parse_spec(
            r#"{"variant":"ChainWithAttachments","ell":{"kind":"constant","c":1},
                "attachment":{"variant":"FullLinePath","ell_pos":{"kind":"geometric","a":1,"r":"1/2"},"ell_neg":{"kind":"geometric","a":1,"r":"1/2"}},
                "scaling":{"kind":"geometric","a":1,"r":"1/2"}}"#,
        )
        .unwrap();
        let rep = subgraph_sequence(&chain, 5).unwrap();
        for w in rep.rows.windows(2) {
            assert!((w[1].volume.unwrap() * 2.0 - w[0].volume.unwrap()).abs() < 1e-14);
        }
        let fg = parse_spec(r#"{"variant":"FiniteGraph","vertices":2,"edges":[[0,1,1]]}"#).unwrap();
        assert!(matches!(subgraph_sequence(&fg, 3), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn chain_truncation_glues_scaled_attachments() {
        let chain = parse_spec(
            r#"{"variant":"ChainWithAttachments","ell":{"kind":"constant","c":1},
                "attachment":{"variant":"FullLinePath","ell_pos":{"kind":"constant","c":1},"ell_neg":{"kind":"constant","c":1}},
                "scaling":{"kind":"geometric","a":1,"r":"1/2"}}"#,
        )
        .unwrap();
        let g = truncate(&chain, 3).unwrap();
        // chain v0..v3, attachments at v0 (2 arms of 3), v1 (2 of 2), v2 (2 of 1), v3 (none)
        assert_eq!(g.vertex_count(), 4 + 6 + 4 + 2);
        // v3 is cut: its chain edge and the two attachment edges of length 1/8
        let w = g.star_weight(3).unwrap();
        assert!((w.value - (1.0 + 1.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn sphere_truncation_adds_rings() {
        let s = parse_spec(
            r#"{"variant":"SphereSymmetric","sphere_sizes":{"kind":"explicit","prefix":[1],"tail":{"kind":"constant","c":4}},
                "ell":{"kind":"constant","c":1},"ends":"one"}"#,
        )
        .unwrap();
        let g = truncate(&s, 2).unwrap();
        assert_eq!(g.vertex_count(), 9);
        // 4 + 4 radial edges and two rings of 4
        assert_eq!(g.edges().len(), 16);
    }
}

//! The BDG mapping from labeled forests and bridges to pointed rooted
//! quadrangulations with a boundary, its infinite version, and exact ball
//! samplers for the half-plane limits.
//!
//! Corners are the contour corners of the forest. Corner `i` gets the arc
//! `i -> succ(i)`, the first later corner (cyclically in the finite case)
//! with label one less, or the extra vertex when no such corner exists.
//! Around a vertex the half-edges are listed corner by corner in contour
//! order; within a corner the incoming arcs come first, nearest source
//! first, then the outgoing arc.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::planar_map::{ball_from_half_edge, BallSubmap, HalfEdgeMap, QuadrangulationWithBoundary};
use crate::rng::geometric;
use crate::trees::{
    all_labelings, count_forests, enumerate_bridges, enumerate_forests, forest_corners, gw_probability,
    sample_gw_geometric, uniform_labeling, Bridge, Forest, LabeledTree, PlaneTree, TwoSidedBridge,
    DEFAULT_SIZE_CAP,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointedQuadrangulation {
    pub quad: QuadrangulationWithBoundary,
    pub pointed_vertex: usize,
    /// Label of every vertex of `quad.map`; labels minus the label of the
    /// pointed vertex are distances to it.
    pub labels: Vec<i64>,
}

impl PointedQuadrangulation {
    /// Canonical encoding of the rooted map followed by the canonical
    /// position of the pointed vertex.
    pub fn canonical_encoding(&self) -> Vec<u8> {
        let m = &self.quad.map;
        let mut out = m.canonical_encoding();
        // discovery rank of half-edges in the canonical traversal
        let n = m.num_half_edges();
        let mut rank = vec![usize::MAX; n];
        if let Some(r) = m.root() {
            let mut order = vec![r];
            rank[r] = 0;
            let mut i = 0;
            while i < order.len() {
                let h = order[i];
                i += 1;
                for g in [m.alpha(h), m.rot(h)] {
                    if rank[g] == usize::MAX {
                        rank[g] = order.len();
                        order.push(g);
                    }
                }
            }
        }
        let best = m.vertices().cycles[self.pointed_vertex].iter().map(|&h| rank[h]).min().unwrap_or(0);
        out.extend_from_slice(&(best as u32).to_le_bytes());
        out
    }
}

/// Finite mapping Φ.
pub fn phi_finite(f: &Forest, b: &Bridge) -> Result<PointedQuadrangulation> {
    let sigma = f.num_trees();
    if sigma == 0 || b.sigma() != sigma {
        return Err(Error::DimensionMismatch(format!("{sigma} trees, bridge of length {}", b.values.len())));
    }
    let ds = b.down_steps().positive;
    let corners = forest_corners(f);
    let n_c = corners.len();
    let mut offset = vec![0usize; sigma + 1];
    for i in 0..sigma {
        offset[i + 1] = offset[i] + f.trees[i].tree.num_vertices();
    }
    let bullet = offset[sigma];
    let vert: Vec<usize> = corners.iter().map(|c| offset[c.tree] + c.vertex).collect();
    let label: Vec<i64> =
        corners.iter().map(|c| f.trees[c.tree].label[c.vertex] + b.at(ds[c.tree] as usize)).collect();
    let min = *label.iter().min().unwrap();
    // cyclic successor by a sweep over two periods
    let mut succ = vec![None; n_c];
    let mut next: HashMap<i64, usize> = HashMap::new();
    for j in (0..2 * n_c).rev() {
        let i = j % n_c;
        if j < n_c {
            succ[i] = next.get(&(label[i] - 1)).map(|&k| k % n_c);
        }
        next.insert(label[i], j);
    }
    // arc i: half-edge 2i leaves corner i, 2i+1 arrives at the target
    let h = 2 * n_c;
    let alpha: Vec<usize> = (0..h).map(|x| x ^ 1).collect();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n_c];
    let mut at_bullet = Vec::new();
    for i in 0..n_c {
        match succ[i] {
            Some(c) => incoming[c].push(i),
            None => at_bullet.push(i),
        }
    }
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); bullet + 1];
    for c in 0..n_c {
        let inc = &mut incoming[c];
        inc.sort_by_key(|&i| (c + n_c - i) % n_c);
        let l = &mut lists[vert[c]];
        l.extend(inc.iter().map(|&i| 2 * i + 1));
        l.push(2 * c);
    }
    lists[bullet] = at_bullet.iter().rev().map(|&i| 2 * i + 1).collect();
    let mut rot = vec![0; h];
    for l in &lists {
        for j in 0..l.len() {
            rot[l[j]] = l[(j + 1) % l.len()];
        }
    }
    let d0 = ds[0] as usize;
    let root = if d0 == 0 {
        let last = (0..n_c).rev().find(|&j| corners[j].tree == 0).unwrap();
        2 * last
    } else {
        let mut c = 0;
        for _ in 0..d0 - 1 {
            c = succ[c].ok_or_else(|| Error::InvalidMap("root chain leaves the forest".into()))?;
        }
        2 * c + 1
    };
    let map = HalfEdgeMap::new(alpha, rot, Some(root));
    let verts = map.vertices();
    let mut vlabel = vec![0i64; verts.cycles.len()];
    for c in 0..n_c {
        vlabel[verts.of[2 * c]] = label[c];
    }
    let pv = verts.of[lists[bullet][0]];
    vlabel[pv] = min - 1;
    let quad = QuadrangulationWithBoundary::new(map)?;
    Ok(PointedQuadrangulation { quad, pointed_vertex: pv, labels: vlabel })
}

/// Checks the structural properties of a Φ output: inner faces = forest
/// edges, perimeter 2σ, vertices = forest vertices + 1, unit label steps
/// and labels equal to distances from the pointed vertex.
pub fn check_phi_output(f: &Forest, q: &PointedQuadrangulation) -> Result<()> {
    let m = &q.quad.map;
    let bad = |s: String| Err(Error::InvalidMap(s));
    if q.quad.inner_faces != f.size() || q.quad.sigma != f.num_trees() {
        return bad(format!("faces {} / σ {}", q.quad.inner_faces, q.quad.sigma));
    }
    if m.num_vertices() != f.num_vertices() + 1 || q.quad.num_vertices() != q.quad.inner_faces + q.quad.sigma + 1 {
        return bad("vertex count".into());
    }
    let verts = m.vertices();
    for h in 0..m.num_half_edges() {
        if (q.labels[verts.of[h]] - q.labels[verts.of[m.alpha(h)]]).abs() != 1 {
            return bad(format!("edge {h} label step"));
        }
    }
    let d = m.graph_distances(q.pointed_vertex);
    let base = q.labels[q.pointed_vertex];
    for v in 0..verts.cycles.len() {
        if d[v] != Some((q.labels[v] - base) as usize) {
            return bad(format!("vertex {v}: distance {:?}, label {}", d[v], q.labels[v] - base));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub n: usize,
    pub sigma: usize,
    pub domain: u64,
    pub image: u64,
    pub expected: String,
    pub valid: bool,
    pub elapsed: f64,
}

/// Applies Φ to every element of the domain and counts distinct images.
pub fn phi_bijectivity_audit(n: usize, sigma: usize, budget: u64) -> Result<AuditReport> {
    let start = Instant::now();
    let expected = BigInt::from(3u32).pow(n as u32)
        * BigInt::from(count_forests(n, sigma))
        * BigInt::from(crate::trees::binomial(2 * sigma, sigma));
    if expected > BigInt::from(budget) {
        return Err(Error::BudgetExceeded(format!("domain of size {expected}")));
    }
    let bridges = enumerate_bridges(sigma);
    let mut seen = HashSet::new();
    let mut domain = 0u64;
    let mut valid = true;
    for trees in enumerate_forests(n, sigma, budget as usize)? {
        let per: Vec<Vec<LabeledTree>> = trees.iter().map(all_labelings).collect();
        let mut idx = vec![0usize; sigma];
        loop {
            let f = Forest { trees: (0..sigma).map(|i| per[i][idx[i]].clone()).collect() };
            for b in &bridges {
                domain += 1;
                match phi_finite(&f, b) {
                    Ok(q) => {
                        valid &= check_phi_output(&f, &q).is_ok();
                        seen.insert(q.canonical_encoding());
                    }
                    Err(_) => valid = false,
                }
            }
            let mut i = 0;
            while i < sigma {
                idx[i] += 1;
                if idx[i] < per[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == sigma {
                break;
            }
        }
    }
    Ok(AuditReport {
        n,
        sigma,
        domain,
        image: seen.len() as u64,
        expected: expected.to_string(),
        valid,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Uniformly labeled forest of σ i.i.d. p-GW trees.
pub fn sample_gw_forest<R: Rng + ?Sized>(sigma: usize, p: f64, size_cap: usize, rng: &mut R) -> Result<Forest> {
    let mut trees = Vec::with_capacity(sigma);
    for _ in 0..sigma {
        let t = sample_gw_geometric(p, size_cap, rng)?;
        trees.push(uniform_labeling(&t, rng));
    }
    Ok(Forest { trees })
}

// ---------------------------------------------------------------------------
// Infinite encoding on a line of corners

/// Arcs among a finite run of corners on the line; `succ` is the first later
/// corner with label one less. Only corners with `source_ok` emit arcs.
struct LineArcs {
    map: HalfEdgeMap,
    succ: Vec<Option<usize>>,
    arc_of: Vec<Option<usize>>,
}

fn line_arcs(vertex: &[usize], label: &[i64], source_ok: &[bool], num_vertices: usize) -> LineArcs {
    let n = vertex.len();
    let mut succ = vec![None; n];
    let mut next: HashMap<i64, usize> = HashMap::new();
    for i in (0..n).rev() {
        succ[i] = next.get(&(label[i] - 1)).copied();
        next.insert(label[i], i);
    }
    let mut arc_of = vec![None; n];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut k = 0;
    for i in 0..n {
        if let (true, Some(c)) = (source_ok[i], succ[i]) {
            arc_of[i] = Some(k);
            k += 1;
            incoming[c].push(i);
        }
    }
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); num_vertices];
    for c in 0..n {
        let l = &mut lists[vertex[c]];
        l.extend(incoming[c].iter().rev().map(|&i| 2 * arc_of[i].unwrap() + 1));
        if let Some(a) = arc_of[c] {
            l.push(2 * a);
        }
    }
    let h = 2 * k;
    let alpha: Vec<usize> = (0..h).map(|x| x ^ 1).collect();
    let mut rot = vec![0; h];
    for l in &lists {
        for j in 0..l.len() {
            rot[l[j]] = l[(j + 1) % l.len()];
        }
    }
    LineArcs { map: HalfEdgeMap::new(alpha, rot, None), succ, arc_of }
}

/// A finite window of the infinite encoding: the two-sided walk and the
/// trees grafted at its down-steps (`right[i]` is tree `i ≥ 0`, `left[i]`
/// is tree `-(i+1)`).
#[derive(Clone, Debug)]
pub struct WindowSample {
    pub bridge: TwoSidedBridge,
    pub right: Vec<LabeledTree>,
    pub left: Vec<LabeledTree>,
}

/// Two-sided walk window, each side run until it drops below `-stop_min`;
/// fails with `BudgetExceeded` if a side needs more than `max_len` steps.
pub fn sample_walk_window<R: Rng + ?Sized>(stop_min: i64, max_len: usize, rng: &mut R) -> Result<TwoSidedBridge> {
    let mut side = || {
        let mut v = vec![0i64];
        while *v.last().unwrap() >= -stop_min {
            if v.len() > max_len {
                return Err(Error::BudgetExceeded(format!("walk window longer than {max_len}")));
            }
            let x = *v.last().unwrap() + if rng.gen::<bool>() { 1 } else { -1 };
            v.push(x);
        }
        Ok(v)
    };
    let right = side()?;
    let left = side()?;
    Ok(TwoSidedBridge { right, left })
}

/// Explicit window: the walk runs on each side until it drops below
/// `-stop_min` (at most `max_len` steps), with a p-GW tree at every down-step.
pub fn sample_window<R: Rng + ?Sized>(p: f64, stop_min: i64, max_len: usize, rng: &mut R) -> Result<WindowSample> {
    let bridge = sample_walk_window(stop_min, max_len, rng)?;
    let ds = bridge.down_steps();
    let mut right = Vec::with_capacity(ds.positive.len());
    for _ in &ds.positive {
        right.push(uniform_labeling(&sample_gw_geometric(p, DEFAULT_SIZE_CAP, rng)?, rng));
    }
    let mut left = Vec::with_capacity(ds.negative.len());
    for _ in &ds.negative {
        left.push(uniform_labeling(&sample_gw_geometric(p, DEFAULT_SIZE_CAP, rng)?, rng));
    }
    Ok(WindowSample { bridge, right, left })
}

/// Arcs of the infinite map resolved inside a window.
#[derive(Clone, Debug)]
pub struct WindowFragment {
    /// Half-edge structure on resolved arcs; rooted at the boundary edge of
    /// the bridge step {0,1}.
    pub map: HalfEdgeMap,
    /// Corner index (in window order) of `f(0)`.
    pub corner_zero: usize,
    /// Corners whose successor lies outside the window.
    pub unresolved: Vec<usize>,
    /// Vertex id (in `map`) of every window corner.
    pub corner_vertex: Vec<usize>,
    pub corner_label: Vec<i64>,
}

impl WindowFragment {
    /// Vertex of `f(0)` in `map`.
    pub fn f0_vertex(&self) -> usize {
        self.corner_vertex[self.corner_zero]
    }
}

struct PlacedTree<'a> {
    tree: &'a LabeledTree,
    shift: i64,
    source_ok: Box<dyn Fn(i64) -> bool + 'a>,
}

fn assemble(trees: &[PlacedTree], zero: usize, d0: usize) -> Result<(WindowFragment, Vec<Option<usize>>)> {
    let mut vertex = Vec::new();
    let mut label = Vec::new();
    let mut ok = Vec::new();
    let mut first_corner = Vec::with_capacity(trees.len());
    let mut last_corner = Vec::with_capacity(trees.len());
    let mut base = 0;
    for t in trees {
        first_corner.push(vertex.len());
        for v in t.tree.tree.contour() {
            let l = t.tree.label[v] + t.shift;
            vertex.push(base + v);
            label.push(l);
            ok.push((t.source_ok)(l));
        }
        last_corner.push(vertex.len() - 1);
        base += t.tree.tree.num_vertices();
    }
    let arcs = line_arcs(&vertex, &label, &ok, base);
    let c0 = first_corner[zero];
    let root = if d0 == 0 {
        arcs.arc_of[last_corner[zero]].map(|a| 2 * a)
    } else {
        let mut c = Some(c0);
        for _ in 0..d0 - 1 {
            c = c.and_then(|c| arcs.succ[c]);
        }
        c.and_then(|c| arcs.arc_of[c]).map(|a| 2 * a + 1)
    };
    let root = root.ok_or(Error::UnresolvedSuccessor(c0 as i64))?;
    let map = arcs.map.with_root(Some(root));
    let verts = map.vertices();
    // map vertex ids follow rot orbits; translate corner vertices
    let mut vid = vec![usize::MAX; base];
    for (c, &a) in arcs.arc_of.iter().enumerate() {
        if let Some(a) = a {
            vid[vertex[c]] = verts.of[2 * a];
        }
    }
    let corner_vertex = vertex.iter().map(|&v| vid[v]).collect();
    let unresolved = (0..vertex.len()).filter(|&i| arcs.succ[i].is_none()).collect();
    Ok((WindowFragment { map, corner_zero: c0, unresolved, corner_vertex, corner_label: label }, arcs.arc_of))
}

/// Infinite mapping applied to a window; arcs whose successor is outside
/// the window are reported in `unresolved`.
pub fn phi_window(w: &WindowSample) -> Result<WindowFragment> {
    let ds = w.bridge.down_steps();
    if w.right.len() != ds.positive.len() || w.left.len() != ds.negative.len() || w.right.is_empty() {
        return Err(Error::DimensionMismatch("trees do not match the window's down-steps".into()));
    }
    let mut placed = Vec::new();
    for (i, t) in w.left.iter().enumerate().rev() {
        placed.push(PlacedTree { tree: t, shift: w.bridge.at(ds.negative[i]), source_ok: Box::new(|_| true) });
    }
    let zero = placed.len();
    for (i, t) in w.right.iter().enumerate() {
        placed.push(PlacedTree { tree: t, shift: w.bridge.at(ds.positive[i]), source_ok: Box::new(|_| true) });
    }
    Ok(assemble(&placed, zero, ds.positive[0] as usize)?.0)
}

// ---------------------------------------------------------------------------
// Exact ball sampler

/// Tail quantities for the labeled p-GW tree, cached per p.
///
/// `q[x] = P(min label ≤ -x)`, and `dirty[x]` is the probability that an
/// excursion edge whose top sits `x` levels above the band carries, in its
/// subtree, a tree reaching down into the band.
#[derive(Clone, Debug)]
pub struct LabelTails {
    pub p: f64,
    pub q: Vec<f64>,
    pub dirty: Vec<f64>,
}

impl LabelTails {
    pub fn new(p: f64) -> Self {
        let xs = min_label_root(p);
        let qf = |x: usize| min_label_tail(p, xs, x);
        let xmax = if p == 0.0 {
            4
        } else if xs < 1.0 - 1e-9 {
            ((45.0 / -xs.ln()).ceil() as usize + 8).min(2_000_000)
        } else {
            1_000_000
        };
        let q: Vec<f64> = (0..=xmax + 1).map(qf).collect();
        let mut dirty = vec![0.0; xmax + 2];
        // far away the recursion D = q + D' - D D' behaves like 1/x at p = 1/2
        dirty[xmax + 1] = if xs >= 1.0 - 1e-9 { 1.0 / (xmax + 1) as f64 } else { 0.0 };
        for x in (1..=xmax).rev() {
            let w_next = 1.0 - dirty[x + 1];
            let w = (1.0 - q[x]) / (2.0 - w_next);
            dirty[x] = 1.0 - w;
        }
        LabelTails { p, q, dirty }
    }

    pub fn q(&self, x: i64) -> f64 {
        if x <= 0 {
            1.0
        } else {
            self.q.get(x as usize).copied().unwrap_or(0.0)
        }
    }

    fn d(&self, x: i64) -> f64 {
        self.dirty.get(x as usize).copied().unwrap_or(0.0)
    }
}

/// Root `X ∈ [0,1]` of `X + 1/X = 3/p - 4`.
fn min_label_root(p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let s = 3.0 / p - 4.0;
    if s <= 2.0 {
        return 1.0;
    }
    (s - (s * s - 4.0).sqrt()) / 2.0
}

/// `P(min label ≤ -x)` for a uniformly labeled p-GW tree:
/// `X^x (1-X)^2 (1+X) / ((1-X^{x+1})(1-X^{x+2}))`, and `2/((x+1)(x+2))` at p = 1/2.
pub fn min_label_tail(p: f64, xs: f64, x: usize) -> f64 {
    if x == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if xs >= 1.0 - 1e-9 {
        return 2.0 / ((x as f64 + 1.0) * (x as f64 + 2.0));
    }
    let xf = x as i32;
    xs.powi(xf) * (1.0 - xs).powi(2) * (1.0 + xs) / ((1.0 - xs.powi(xf + 1)) * (1.0 - xs.powi(xf + 2)))
}

#[derive(Clone, Copy)]
enum Mode {
    Free,
    /// conditioned on reaching relative label ≤ -x
    Dip(i64),
    /// conditioned on staying above relative label -y
    Stay(i64),
}

fn uniform_inc<R: Rng + ?Sized>(rng: &mut R) -> i64 {
    rng.gen_range(-1..=1)
}

fn pick3<R: Rng + ?Sized>(rng: &mut R, w: &[f64]) -> usize {
    let t: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * t;
    for (i, x) in w.iter().enumerate() {
        if u < *x {
            return i;
        }
        u -= x;
    }
    w.len() - 1
}

/// Labeled p-GW tree under a conditioning on its minimum label.
fn conditioned_tree<R: Rng + ?Sized>(tails: &LabelTails, root: Mode, rng: &mut R) -> Result<LabeledTree> {
    let p = tails.p;
    let a = |y: i64| 1.0 - tails.q(y);
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut label = vec![0i64];
    let mut stack = vec![(0usize, root)];
    while let Some((v, mode)) = stack.pop() {
        let mut plan: Vec<(i64, Mode)> = Vec::new();
        match mode {
            Mode::Free => {
                for _ in 0..geometric(rng, p) {
                    plan.push((uniform_inc(rng), Mode::Free));
                }
            }
            Mode::Dip(x) => {
                let qx = tails.q(x);
                loop {
                    let mut w = [0.0; 6];
                    for (i, e) in (-1..=1).enumerate() {
                        let qe = tails.q(x + e);
                        w[i] = p * qe / (3.0 * qx);
                        w[3 + i] = p * (1.0 - qe) / 3.0;
                    }
                    let k = pick3(rng, &w);
                    let e = (k % 3) as i64 - 1;
                    if k < 3 {
                        let m = if x + e <= 0 { Mode::Free } else { Mode::Dip(x + e) };
                        plan.push((e, m));
                        break;
                    }
                    plan.push((e, Mode::Stay(x + e)));
                }
                for _ in 0..geometric(rng, p) {
                    plan.push((uniform_inc(rng), Mode::Free));
                }
            }
            Mode::Stay(y) => {
                let ay = a(y);
                loop {
                    if rng.gen::<f64>() * ay < 1.0 - p {
                        break;
                    }
                    let w: Vec<f64> = (-1..=1).map(|e| a(y + e)).collect();
                    let e = pick3(rng, &w) as i64 - 1;
                    plan.push((e, Mode::Stay(y + e)));
                }
            }
        }
        for (e, m) in plan.iter().rev() {
            let c = children.len();
            children.push(Vec::new());
            label.push(label[v] + e);
            children[v].push(c);
            stack.push((c, *m));
        }
        if children.len() > DEFAULT_SIZE_CAP {
            return Err(Error::SizeCapExceeded(DEFAULT_SIZE_CAP));
        }
        // children were pushed in reverse order; restore plane order
        children[v].reverse();
    }
    let (tree, map) = PlaneTree::from_children(&children, 0);
    let mut lab = vec![0; label.len()];
    for (old, &new) in map.iter().enumerate() {
        lab[new] = label[old];
    }
    Ok(LabeledTree { tree, label: lab })
}

/// Trees of one collapsed excursion above the band that reach into it, in
/// contour order, as `(tree, shift)`. The band top is `top`; a tree grafted
/// at height `top + x` is kept iff its minimum relative label is ≤ `-x`.
fn collapsed_excursion<R: Rng + ?Sized>(
    tails: &LabelTails,
    top: i64,
    rng: &mut R,
    out: &mut Vec<(LabeledTree, i64)>,
) -> Result<()> {
    if rng.gen::<f64>() >= tails.d(1) {
        return Ok(());
    }
    dirty_edge(tails, top, 1, rng, out)
}

fn dirty_edge<R: Rng + ?Sized>(
    tails: &LabelTails,
    top: i64,
    x: i64,
    rng: &mut R,
    out: &mut Vec<(LabeledTree, i64)>,
) -> Result<()> {
    let q = tails.q(x);
    let dn = tails.d(x + 1);
    let c = dn / (1.0 + dn);
    let w = [q * c, q * (1.0 - c), (1.0 - q) * c];
    let (own, kids) = match pick3(rng, &w) {
        0 => (true, true),
        1 => (true, false),
        _ => (false, true),
    };
    if kids {
        let k = 1 + geometric(rng, c);
        for _ in 0..k {
            dirty_edge(tails, top, x + 1, rng, out)?;
        }
    }
    if own {
        out.push((conditioned_tree(tails, Mode::Dip(x), rng)?, top + x));
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct BallTree {
    tree: LabeledTree,
    shift: i64,
    /// running minimum of the walk between the tree and f(0)
    mb: i64,
}

/// Everything generated around f(0) for a given working radius.
#[derive(Clone, Debug)]
pub struct InfiniteFragment {
    trees: Vec<BallTree>,
    zero: usize,
    pub d0: usize,
    pub radius: usize,
}

impl InfiniteFragment {
    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn label_zero(&self) -> i64 {
        self.d0 as i64
    }
}

/// One side of the walk seen from its start at `level`, band-explicit with
/// collapsed excursions; stops after a band tree with shift ≤ `stop`.
/// The right side starts with the down-step carrying tree 0.
fn walk_side<R: Rng + ?Sized>(
    tails: &LabelTails,
    start: i64,
    radius: i64,
    stop: i64,
    right: bool,
    rng: &mut R,
) -> Result<Vec<Vec<BallTree>>> {
    let band = radius + 1;
    let p = tails.p;
    let mut blocks: Vec<Vec<BallTree>> = Vec::new();
    let mut level = start;
    let mut m = start;
    let fresh = |rng: &mut R| -> Result<LabeledTree> {
        Ok(uniform_labeling(&sample_gw_geometric(p, DEFAULT_SIZE_CAP, rng)?, rng))
    };
    if right {
        // the down-step at d0 carries tree 0
        let t = fresh(rng)?;
        blocks.push(vec![BallTree { tree: t, shift: level, mb: m }]);
        if level <= stop {
            return Ok(blocks);
        }
        level -= 1;
        m = level;
    }
    loop {
        let up = rng.gen::<bool>();
        // on the right trees sit at down-steps (shift = level before the step);
        // on the left, read away from 0, at up-steps (shift = level after)
        if up {
            if level == m + band {
                let mut ex = Vec::new();
                collapsed_excursion(tails, m + band, rng, &mut ex)?;
                // an excursion read backwards is again an excursion, so the
                // block is in natural order on both sides
                if !ex.is_empty() {
                    blocks.push(ex.into_iter().map(|(t, s)| BallTree { tree: t, shift: s, mb: m }).collect());
                }
                continue;
            }
            level += 1;
            if !right {
                let t = fresh(rng)?;
                blocks.push(vec![BallTree { tree: t, shift: level, mb: m }]);
                if level <= stop {
                    return Ok(blocks);
                }
            }
        } else {
            if right {
                let t = fresh(rng)?;
                blocks.push(vec![BallTree { tree: t, shift: level, mb: m }]);
                if level <= stop {
                    return Ok(blocks);
                }
            }
            level -= 1;
            m = m.min(level);
        }
    }
}

/// Generates the part of the infinite encoding that can influence the ball
/// of radius `radius` around f(0), given the up-run length `d0`.
pub fn sample_fragment<R: Rng + ?Sized>(
    tails: &LabelTails,
    d0: usize,
    radius: usize,
    rng: &mut R,
) -> Result<InfiniteFragment> {
    let l0 = d0 as i64;
    let rad = radius as i64;
    let stop = l0 - rad - 2;
    let right = walk_side(tails, l0, rad, stop, true, rng)?;
    let left = walk_side(tails, 0, rad, stop, false, rng)?;
    let mut trees: Vec<BallTree> = left.into_iter().rev().flatten().collect();
    let zero = trees.len();
    trees.extend(right.into_iter().flatten());
    Ok(InfiniteFragment { trees, zero, d0, radius })
}

/// Builds the ball of radius `r` around the root vertex (`at_root`) or
/// around f(0) from a fragment, using only the corners that the cactus
/// bound allows within distance `rho` of f(0).
pub fn ball_from_fragment(frag: &InfiniteFragment, rho: usize, r: usize, at_root: bool) -> Result<BallSubmap> {
    if rho > frag.radius {
        return Err(Error::OutOfRange(format!("working radius {rho} > generated {}", frag.radius)));
    }
    let l0 = frag.label_zero();
    let stop = l0 - rho as i64 - 2;
    // trees kept on each side: up to the first one with shift ≤ stop
    let mut lo = frag.zero;
    while lo > 0 {
        lo -= 1;
        if frag.trees[lo].shift <= stop {
            break;
        }
    }
    let mut hi = frag.zero;
    while hi + 1 < frag.trees.len() && frag.trees[hi].shift > stop {
        hi += 1;
    }
    let placed: Vec<PlacedTree> = frag.trees[lo..=hi]
        .iter()
        .map(|t| {
            let th = t.mb + rho as i64 + 1;
            PlacedTree { tree: &t.tree, shift: t.shift, source_ok: Box::new(move |l| l <= th) }
        })
        .collect();
    let (wf, arc_of) = assemble(&placed, frag.zero - lo, frag.d0)?;
    if at_root {
        Ok(ball_from_half_edge(&wf.map, wf.map.root().unwrap(), r))
    } else {
        match arc_of[wf.corner_zero] {
            Some(a) if r > 0 => Ok(ball_from_half_edge(&wf.map, 2 * a, r)),
            _ => Ok(crate::planar_map::ball_at_root(&HalfEdgeMap::vertex_map(), 0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Center {
    Root,
    F0,
}

/// Exact sample of `Ball_r` of UIHPQ_p around the root vertex or f(0).
pub fn uihpq_ball<R: Rng + ?Sized>(tails: &LabelTails, r: usize, center: Center, rng: &mut R) -> Result<BallSubmap> {
    let d0 = geometric(rng, 0.5) as usize;
    let rho = match center {
        Center::Root => r + d0,
        Center::F0 => r,
    };
    let frag = sample_fragment(tails, d0, rho, rng)?;
    ball_from_fragment(&frag, rho, r, center == Center::Root)
}

/// Same as [`uihpq_ball`] but generating for twice the working radius and
/// checking that the ball does not change; returns both encodings.
pub fn uihpq_ball_doubling<R: Rng + ?Sized>(
    tails: &LabelTails,
    r: usize,
    center: Center,
    rng: &mut R,
) -> Result<(BallSubmap, bool)> {
    let d0 = geometric(rng, 0.5) as usize;
    let rho = match center {
        Center::Root => r + d0,
        Center::F0 => r,
    };
    let frag = sample_fragment(tails, d0, 2 * rho + 1, rng)?;
    let a = ball_from_fragment(&frag, rho, r, center == Center::Root)?;
    let b = ball_from_fragment(&frag, 2 * rho + 1, r, center == Center::Root)?;
    let same = a.map.canonical_encoding() == b.map.canonical_encoding();
    Ok((a, same))
}

/// Ball around the root from an explicit window (an independent second
/// policy). Both sides of the walk go below `-(r+4)`, which puts every
/// vertex outside the window at distance more than `r + 1` from the root.
pub fn uihpq_ball_window<R: Rng + ?Sized>(p: f64, r: usize, max_len: usize, rng: &mut R) -> Result<BallSubmap> {
    let w = sample_window(p, r as i64 + 4, max_len, rng)?;
    let wf = phi_window(&w)?;
    Ok(ball_from_half_edge(&wf.map, wf.map.root().unwrap(), r))
}

// ---------------------------------------------------------------------------
// p = 0: spine decomposition

/// Spine of the p = 0 half-plane tree read from a window.
#[derive(Clone, Debug, Serialize)]
pub struct SpineDecomposition {
    /// positions (down-step indices) of `s_0..s_k`
    pub spine: Vec<i64>,
    pub labels: Vec<i64>,
    /// root-degree of the subtree hanging on each side of `s_i`
    pub left_children: Vec<usize>,
    pub right_children: Vec<usize>,
    pub left_sizes: Vec<usize>,
    pub right_sizes: Vec<usize>,
}

/// For an all-singleton window: `s_i` is the vertex at the down-step
/// `S_{i+1} - 1` (label `-i`), `S_i = inf{k ≥ 0 : b(k) = -i}`. Vertices of
/// the excursion `[S_i, S_{i+1})` form the left subtrees of `s_i`, vertices
/// on the negative side the right ones.
pub fn uihpq0_spine(w: &TwoSidedBridge, r: usize) -> Result<SpineDecomposition> {
    let (lo, hi) = w.range();
    let ds = w.down_steps();
    let need = r as i64 + 1;
    if w.min_right() > -need - 1 || w.min_left() > -need - 1 {
        return Err(Error::OutOfRange(format!("window too small for spine length {r}")));
    }
    let mut pos: Vec<i64> = ds.negative.iter().rev().copied().collect();
    pos.extend(ds.positive.iter().copied());
    let lab: Vec<i64> = pos.iter().map(|&d| w.at(d)).collect();
    // parent = first later down-step with label one less
    let n = pos.len();
    let mut parent = vec![None; n];
    let mut next: HashMap<i64, usize> = HashMap::new();
    for i in (0..n).rev() {
        parent[i] = next.get(&(lab[i] - 1)).copied();
        next.insert(lab[i], i);
    }
    let first_hit = |lvl: i64| (0..=hi).find(|&k| w.at(k) == lvl);
    let mut spine_idx = Vec::new();
    for i in 0..=r as i64 {
        let s = first_hit(-(i + 1)).ok_or_else(|| Error::OutOfRange("spine beyond window".into()))? - 1;
        spine_idx.push(pos.iter().position(|&d| d == s).unwrap());
    }
    let _ = lo;
    let spine_set: HashMap<usize, usize> = spine_idx.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    // parents lie to the right, so one right-to-left pass assigns every
    // vertex to the spine vertex its parent chain reaches first
    let mut owner = vec![usize::MAX; n];
    let mut child_of_spine = vec![false; n];
    for i in (0..n).rev() {
        if let Some(&k) = spine_set.get(&i) {
            owner[i] = k;
        } else if let Some(j) = parent[i] {
            owner[i] = owner[j];
            child_of_spine[i] = spine_set.contains_key(&j);
        }
    }
    let k = r + 1;
    let mut out = SpineDecomposition {
        spine: spine_idx.iter().map(|&i| pos[i]).collect(),
        labels: spine_idx.iter().map(|&i| lab[i]).collect(),
        left_children: vec![0; k],
        right_children: vec![0; k],
        left_sizes: vec![0; k],
        right_sizes: vec![0; k],
    };
    for i in 0..n {
        let o = owner[i];
        if o == usize::MAX || o >= k || spine_set.contains_key(&i) {
            continue;
        }
        let right_side = pos[i] < 0;
        if right_side {
            out.right_sizes[o] += 1;
            out.right_children[o] += child_of_spine[i] as usize;
        } else {
            out.left_sizes[o] += 1;
            out.left_children[o] += child_of_spine[i] as usize;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Absolute continuity of the contour walks

#[derive(Clone, Debug, Serialize)]
pub struct RadonNikodymReport {
    pub p: String,
    pub x: usize,
    pub cap: usize,
    pub paths: usize,
    pub all_exact: bool,
}

/// For every stopped contour path through the `2x` trees `t_{-x}..t_{x-1}`
/// with `v ≤ cap` edges, checks in exact arithmetic that its probability
/// under p-GW trees is `(4p(1-p))^v (2(1-p))^{2x}` times its probability
/// under critical trees.
pub fn radon_nikodym_check(p: &BigRational, x: usize, cap: usize) -> Result<RadonNikodymReport> {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let one = BigRational::one();
    let four = BigRational::from_integer(BigInt::from(4));
    let two = BigRational::from_integer(BigInt::from(2));
    let mut paths = 0;
    let mut ok = true;
    for v in 0..=cap {
        for trees in enumerate_forests(v, 2 * x, 10_000_000)? {
            paths += 1;
            // contour positions: U = -(corners of t_{-x}..t_{-1}), T = corners of t_0..t_{x-1}
            let corners: Vec<usize> = trees.iter().map(|t| 2 * t.num_edges() + 1).collect();
            let u = -(corners[..x].iter().sum::<usize>() as i64);
            let t = corners[x..].iter().sum::<usize>() as i64;
            let vv = ((t - u - 2 * x as i64) / 2) as usize;
            let pp: BigRational = trees.iter().map(|t| gw_probability(t, p)).product();
            let pc: BigRational = trees.iter().map(|t| gw_probability(t, &half)).product();
            let ratio = num_traits::pow::pow(&four * p * (&one - p), vv)
                * num_traits::pow::pow(&two * (&one - p), 2 * x);
            ok &= vv == v && pp == pc * ratio;
        }
    }
    Ok(RadonNikodymReport { p: p.to_string(), x, cap, paths, all_exact: ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn forest1() -> Forest {
        Forest { trees: vec![LabeledTree::singleton()] }
    }

    #[test]
    fn single_edge_from_both_bridges() {
        for w in ["UD", "DU"] {
            let q = phi_finite(&forest1(), &Bridge::from_word(w).unwrap()).unwrap();
            assert_eq!(q.quad.map.canonical_encoding(), HalfEdgeMap::single_edge().canonical_encoding());
            check_phi_output(&forest1(), &q).unwrap();
        }
        let a = phi_finite(&forest1(), &Bridge::from_word("UD").unwrap()).unwrap();
        let b = phi_finite(&forest1(), &Bridge::from_word("DU").unwrap()).unwrap();
        assert_ne!(a.canonical_encoding(), b.canonical_encoding());
        // for UD the root starts at the pointed vertex
        assert_eq!(a.quad.map.root_vertex(), a.pointed_vertex);
    }

    #[test]
    fn singletons_give_trees() {
        let mut r = Stream::new(4).rng();
        for s in 1..6 {
            let f = Forest { trees: vec![LabeledTree::singleton(); s] };
            let b = crate::trees::sample_uniform_bridge(s, &mut r);
            let q = phi_finite(&f, &b).unwrap();
            assert_eq!(q.quad.map.num_faces(), 1);
            assert_eq!(q.quad.map.num_edges(), s);
        }
    }

    #[test]
    fn boundary_labels_follow_the_bridge() {
        let mut r = Stream::new(8).rng();
        for _ in 0..300 {
            let s = r.gen_range(1..5);
            let f = sample_gw_forest(s, 0.3, 1000, &mut r).unwrap();
            let b = crate::trees::sample_uniform_bridge(s, &mut r);
            let q = phi_finite(&f, &b).unwrap();
            check_phi_output(&f, &q).unwrap();
            let m = &q.quad.map;
            let verts = m.vertices();
            let bd = m.boundary();
            assert_eq!(bd.len(), 2 * s);
            // along the outer face starting at alpha(root) we meet b(1), b(0), b(2σ-1), ...
            let base = q.labels[m.root_vertex()];
            for (i, &h) in bd.iter().enumerate() {
                let j = (2 * s + 1 - i) % (2 * s);
                assert_eq!(q.labels[verts.of[h]] - base, b.at(j), "{}", b.to_word());
            }
        }
    }

    #[test]
    fn small_audits() {
        let a = phi_bijectivity_audit(0, 1, 1000).unwrap();
        assert_eq!((a.domain, a.image, a.valid), (2, 2, true));
        let a = phi_bijectivity_audit(1, 1, 1000).unwrap();
        assert_eq!((a.domain, a.image, a.valid), (6, 6, true));
        let a = phi_bijectivity_audit(1, 2, 1000).unwrap();
        assert_eq!((a.domain, a.image, a.valid), (36, 36, true));
        assert!(phi_bijectivity_audit(6, 6, 1000).is_err());
    }

    #[test]
    fn min_label_tail_solves_its_equation() {
        for &p in &[0.1, 0.25, 0.4, 0.5] {
            let xs = min_label_root(p);
            let a = |x: usize| 1.0 - min_label_tail(p, xs, x);
            for x in 1..40 {
                let s = (a(x - 1) + a(x) + a(x + 1)) / 3.0;
                let g = (1.0 - p) / (1.0 - p * s);
                assert!((a(x) - g).abs() < 1e-12, "p={p} x={x}");
            }
        }
        // Monte Carlo: P(min ≤ -1) at p = 1/4
        let mut r = Stream::new(21).rng();
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| uniform_labeling(&sample_gw_geometric(0.25, 1000, &mut r).unwrap(), &mut r).min_label() <= -1)
            .count();
        let q = min_label_tail(0.25, min_label_root(0.25), 1);
        let f = hits as f64 / n as f64;
        assert!((f - q).abs() < 3.0 * (q * (1.0 - q) / n as f64).sqrt());
    }

    #[test]
    fn conditioned_trees_respect_their_conditioning() {
        let tails = LabelTails::new(0.4);
        let mut r = Stream::new(22).rng();
        for x in 1..5 {
            for _ in 0..300 {
                assert!(conditioned_tree(&tails, Mode::Dip(x), &mut r).unwrap().min_label() <= -x);
                assert!(conditioned_tree(&tails, Mode::Stay(x), &mut r).unwrap().min_label() > -x);
            }
        }
        // law of the root degree given a dip, against rejection sampling
        let n = 40_000;
        let mut a = [0usize; 4];
        let mut b = [0usize; 4];
        for _ in 0..n {
            let t = conditioned_tree(&tails, Mode::Dip(2), &mut r).unwrap();
            a[t.tree.root_degree().min(3)] += 1;
        }
        let mut got = 0;
        while got < n {
            let t = uniform_labeling(&sample_gw_geometric(0.4, 100_000, &mut r).unwrap(), &mut r);
            if t.min_label() <= -2 {
                b[t.tree.root_degree().min(3)] += 1;
                got += 1;
            }
        }
        for k in 0..4 {
            let (fa, fb) = (a[k] as f64 / n as f64, b[k] as f64 / n as f64);
            assert!((fa - fb).abs() < 4.0 * (fa * (1.0 - fa) * 2.0 / n as f64).sqrt() + 1e-3, "{k}: {fa} {fb}");
        }
    }

    #[test]
    fn balls_are_deterministic_and_stable() {
        for &p in &[0.0, 0.25, 0.4] {
            let tails = LabelTails::new(p);
            for i in 0..300 {
                let s = Stream::new(99).child(i);
                let a = uihpq_ball(&tails, 2, Center::Root, &mut s.rng()).unwrap();
                let b = uihpq_ball(&tails, 2, Center::Root, &mut s.rng()).unwrap();
                assert_eq!(a.map.canonical_encoding(), b.map.canonical_encoding());
                assert!(a.map.is_valid(), "{:?}", a.map.validate());
                let (_, same) = uihpq_ball_doubling(&tails, 2, Center::Root, &mut s.child(1).rng()).unwrap();
                assert!(same, "p={p} i={i}");
                if p == 0.0 {
                    assert_eq!(a.map.num_faces(), 1);
                }
            }
        }
        let t = LabelTails::new(0.25);
        let z = uihpq_ball(&t, 0, Center::Root, &mut Stream::new(1).rng()).unwrap();
        assert!(z.map.is_vertex_map());
    }

    #[test]
    fn window_policy_agrees_with_exact_sampler() {
        // windows longer than the cap are dropped; that biases the second
        // law by at most the dropped fraction (about 1% per side at 2e5)
        let tails = LabelTails::new(0.25);
        let n = 3000;
        let mut ids = crate::stats::Interner::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let mut dropped = 0;
        for i in 0..n {
            let s = Stream::new(5).child(i);
            let x = uihpq_ball(&tails, 1, Center::Root, &mut s.rng()).unwrap();
            a.push(ids.id(x.map.canonical_encoding()));
            match uihpq_ball_window(0.25, 1, 200_000, &mut s.child(7).rng()) {
                Ok(y) => b.push(ids.id(y.map.canonical_encoding())),
                Err(Error::BudgetExceeded(_)) => dropped += 1,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(dropped < n / 25, "{dropped}");
        let e = crate::stats::tv_estimate(&a, &b, 20, &mut Stream::new(6).rng());
        assert!(e.corrected < 0.05 + dropped as f64 / n as f64, "{e:?}");
    }

    #[test]
    fn spine_at_p0() {
        let mut r = Stream::new(3).rng();
        let mut kids = 0usize;
        let mut sizes = (0usize, 0usize);
        let m = 3000;
        for _ in 0..m {
            let w = loop {
                if let Ok(w) = sample_walk_window(5, 100_000, &mut r) {
                    break w;
                }
            };
            let s = uihpq0_spine(&w, 3).unwrap();
            for (i, &l) in s.labels.iter().enumerate() {
                assert_eq!(l, -(i as i64));
            }
            kids += s.left_children[1];
            sizes.0 += s.left_sizes[1].min(20);
            sizes.1 += s.right_sizes[1].min(20);
        }
        let mean = kids as f64 / m as f64;
        assert!((mean - 1.0).abs() < 3.0 * (2.0f64 / m as f64).sqrt(), "{mean}");
        let (a, b) = (sizes.0 as f64 / m as f64, sizes.1 as f64 / m as f64);
        assert!((a - b).abs() < 0.35 * a.max(b) + 0.2, "{a} {b}");
    }

    #[test]
    fn radon_nikodym() {
        let third = BigRational::new(BigInt::one(), BigInt::from(3));
        assert!(radon_nikodym_check(&third, 1, 2).unwrap().all_exact);
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        assert!(radon_nikodym_check(&half, 2, 2).unwrap().all_exact);
    }
}

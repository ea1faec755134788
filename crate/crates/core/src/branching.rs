//! Looptree decomposition of quadrangulations with a boundary.
//!
//! `scoop` keeps the boundary (doubling the edges with the outer face on
//! both sides), giving a looptree whose loops are the simple-boundary
//! components. `psi` records the tree of components and one simple-boundary
//! piece per loop; `psi_inverse` glues them back. For `p < 1/2` the
//! half-plane model is the gluing of pieces into the loops of a two-type
//! Kesten tree; [`BranchingSampler`] builds its `Cut_r`.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boltzmann::{offspring_pair, rational_from_decimal, sample_pointed_boltzmann, OffspringPair, SimplePieceSampler};
use crate::error::{Error, Result};
use crate::planar_map::{map_from_str, map_to_string, HalfEdgeMap, Orbits, QuadrangulationWithBoundary};
use crate::trees::{loop_with_roots, sample_kesten_two_type, tree_of, Looptree, Offspring, PlaneTree};

/// Tree of components with one piece per odd-height vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub tree: PlaneTree,
    /// black vertex (preorder id in `tree`) -> simple-boundary piece
    pub pieces: BTreeMap<usize, QuadrangulationWithBoundary>,
}

#[derive(Serialize, Deserialize)]
struct PieceEntry {
    vertex: usize,
    piece: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct DecompositionFile {
    tree: String,
    pieces: Vec<PieceEntry>,
}

impl Decomposition {
    /// JSON: the tree word and `(black vertex, .pmap piece)` pairs.
    pub fn to_json(&self) -> String {
        let pieces = self
            .pieces
            .iter()
            .map(|(&vertex, q)| PieceEntry { vertex, piece: serde_json::from_str(&map_to_string(&q.map)).unwrap() })
            .collect();
        serde_json::to_string(&DecompositionFile { tree: self.tree.to_word(), pieces }).unwrap()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: DecompositionFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let tree = PlaneTree::from_word(&f.tree)?;
        let mut pieces = BTreeMap::new();
        for e in f.pieces {
            let m = map_from_str(&e.piece.to_string())?;
            pieces.insert(e.vertex, QuadrangulationWithBoundary::new(m)?);
        }
        Ok(Decomposition { tree, pieces })
    }
}

/// Boundary bookkeeping of a map: faces and the outer face id.
struct Boundary<'a> {
    m: &'a HalfEdgeMap,
    faces: Orbits,
    outer: usize,
}

impl<'a> Boundary<'a> {
    fn new(m: &'a HalfEdgeMap) -> Self {
        let faces = m.faces();
        let outer = faces.of[m.alpha(m.root().expect("rooted"))];
        Boundary { m, faces, outer }
    }

    /// `h` has the outer face on its right.
    fn on_boundary(&self, h: usize) -> bool {
        self.faces.of[self.m.alpha(h)] == self.outer
    }

    /// Next boundary half-edge of the same component, component on the left.
    fn next(&self, b: usize) -> usize {
        let m = self.m;
        if self.faces.of[b] == self.outer {
            return m.alpha(b);
        }
        let mut g = m.phi(b);
        while !self.on_boundary(g) {
            g = m.rot(g);
        }
        g
    }

    /// Inner faces of the component of inner face `f`.
    fn component(&self, f: usize, mark: &mut [bool]) -> Vec<usize> {
        let mut comp = vec![f];
        mark[f] = true;
        let mut i = 0;
        while i < comp.len() {
            for &h in &self.faces.cycles[comp[i]] {
                let g = self.faces.of[self.m.alpha(h)];
                if g != self.outer && !mark[g] {
                    mark[g] = true;
                    comp.push(g);
                }
            }
            i += 1;
        }
        comp
    }
}

/// Scooped-out map (a looptree) and, for its half-edge `2i`, the boundary
/// half-edge of `q` it copies.
fn scoop_indexed(bd: &Boundary) -> (Looptree, Vec<usize>) {
    let m = bd.m;
    let bds: Vec<usize> = (0..m.num_half_edges()).filter(|&h| bd.on_boundary(h)).collect();
    let mut idx = vec![usize::MAX; m.num_half_edges()];
    for (i, &b) in bds.iter().enumerate() {
        idx[b] = i;
    }
    let n = 2 * bds.len();
    let alpha: Vec<usize> = (0..n).map(|x| x ^ 1).collect();
    let mut phi = vec![0; n];
    for (i, &b) in bds.iter().enumerate() {
        phi[2 * i] = 2 * idx[bd.next(b)];
        let outer_next = m.phi(m.alpha(b));
        phi[2 * i + 1] = 2 * idx[m.alpha(outer_next)] + 1;
    }
    let root = 2 * idx[m.root().unwrap()];
    (Looptree { map: HalfEdgeMap::from_alpha_phi(alpha, &phi, Some(root)) }, bds)
}

/// Keeps the boundary edges of `q`, doubling those with the outer face on
/// both sides.
pub fn scoop(q: &QuadrangulationWithBoundary) -> Looptree {
    if q.map.is_vertex_map() {
        return Looptree { map: HalfEdgeMap::vertex_map() };
    }
    scoop_indexed(&Boundary::new(&q.map)).0
}

pub fn tree_of_components(q: &QuadrangulationWithBoundary) -> Result<PlaneTree> {
    tree_of(&scoop(q))
}

/// Half-edge bijection `a -> b` preserving root, `alpha` and `rot`.
pub fn rooted_isomorphism(a: &HalfEdgeMap, b: &HalfEdgeMap) -> Option<Vec<usize>> {
    let n = a.num_half_edges();
    if n != b.num_half_edges() {
        return None;
    }
    let (ra, rb) = match (a.root(), b.root()) {
        (None, None) => return Some(Vec::new()),
        (Some(x), Some(y)) => (x, y),
        _ => return None,
    };
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    map[ra] = rb;
    used[rb] = true;
    let mut queue = VecDeque::from([ra]);
    while let Some(h) = queue.pop_front() {
        for (x, y) in [(a.alpha(h), b.alpha(map[h])), (a.rot(h), b.rot(map[h]))] {
            if map[x] == usize::MAX {
                if used[y] {
                    return None;
                }
                map[x] = y;
                used[y] = true;
                queue.push_back(x);
            } else if map[x] != y {
                return None;
            }
        }
    }
    map.iter().all(|&x| x != usize::MAX).then_some(map)
}

/// Scratch buffers indexed by half-edges and faces of the source map.
struct Scratch {
    id: Vec<usize>,
    outer_copy: Vec<usize>,
    mark: Vec<bool>,
}

/// The simple-boundary component of `q` on the left of boundary half-edge
/// `b`, rooted at `b`.
fn extract_piece(bd: &Boundary, b: usize, s: &mut Scratch) -> Result<QuadrangulationWithBoundary> {
    let m = bd.m;
    if bd.faces.of[b] == bd.outer {
        return QuadrangulationWithBoundary::new(HalfEdgeMap::single_edge());
    }
    let comp = bd.component(bd.faces.of[b], &mut s.mark);
    let inner: Vec<usize> = comp.iter().flat_map(|&f| bd.faces.cycles[f].iter().copied()).collect();
    for &f in &comp {
        s.mark[f] = false;
    }
    for (k, &h) in inner.iter().enumerate() {
        s.id[h] = k;
    }
    let mut alpha = vec![0; inner.len()];
    for &h in &inner {
        if bd.on_boundary(h) {
            s.outer_copy[h] = alpha.len();
            alpha.push(s.id[h]);
        }
    }
    let mut phi = vec![0; alpha.len()];
    for &h in &inner {
        let k = s.id[h];
        phi[k] = s.id[m.phi(h)];
        if bd.on_boundary(h) {
            alpha[k] = s.outer_copy[h];
            phi[s.outer_copy[bd.next(h)]] = s.outer_copy[h];
        } else {
            alpha[k] = s.id[m.alpha(h)];
        }
    }
    let piece = QuadrangulationWithBoundary::new(HalfEdgeMap::from_alpha_phi(alpha, &phi, Some(s.id[b])))?;
    if !piece.map.is_simple_boundary() {
        return Err(Error::InvalidMap("component without simple boundary".into()));
    }
    Ok(piece)
}

/// Odd-height vertices of a tree with their degrees (children + parent).
fn black_vertices(t: &PlaneTree) -> Vec<(usize, usize)> {
    let d = t.depths();
    (0..t.num_vertices()).filter(|&u| d[u] % 2 == 1).map(|u| (u, t.children(u).len() + 1)).collect()
}

/// Every loop must have a unique vertex closest to the looptree origin, and
/// its root must leave that vertex.
fn check_loop_roots(l: &Looptree, roots: &[Option<usize>]) -> Result<()> {
    let m = &l.map;
    let dist = m.graph_distances(m.root_vertex());
    let verts = m.vertices();
    for &r in roots.iter().flatten() {
        let mut ds = Vec::new();
        let mut h = r;
        loop {
            ds.push(dist[verts.of[h]].unwrap());
            h = m.phi(h);
            if h == r {
                break;
            }
        }
        let min = *ds.iter().min().unwrap();
        if ds[0] != min || ds.iter().filter(|&&d| d == min).count() != 1 {
            return Err(Error::MalformedLooptree("loop without a unique closest vertex".into()));
        }
    }
    Ok(())
}

/// Ψ: tree of components and the pieces.
pub fn psi(q: &QuadrangulationWithBoundary) -> Result<Decomposition> {
    psi_filtered(q, true, None, |_| true)
}

/// Ψ keeping only the pieces accepted by `keep` (which sees the loop
/// degree), and never the piece containing vertex `avoid` in its interior.
fn psi_filtered(
    q: &QuadrangulationWithBoundary,
    check: bool,
    avoid: Option<usize>,
    mut keep: impl FnMut(usize) -> bool,
) -> Result<Decomposition> {
    if q.map.is_vertex_map() {
        return Ok(Decomposition { tree: PlaneTree::singleton(), pieces: BTreeMap::new() });
    }
    let bd = Boundary::new(&q.map);
    let (l, bds) = scoop_indexed(&bd);
    let tree = tree_of(&l)?;
    let (l2, roots) = loop_with_roots(&tree);
    if check {
        check_loop_roots(&l2, &roots)?;
    }
    let iso = rooted_isomorphism(&l2.map, &l.map)
        .ok_or_else(|| Error::MalformedLooptree("Loop(Tree(l)) differs from l".into()))?;
    let n = q.map.num_half_edges();
    let mut s = Scratch { id: vec![0; n], outer_copy: vec![0; n], mark: vec![false; bd.faces.cycles.len()] };
    let mut banned = vec![false; bd.faces.cycles.len()];
    if let Some(v) = avoid {
        let verts = q.map.vertices();
        let around = &verts.cycles[v];
        if around.iter().all(|&h| bd.faces.of[h] != bd.outer) {
            for f in bd.component(bd.faces.of[around[0]], &mut s.mark) {
                s.mark[f] = false;
                banned[f] = true;
            }
        }
    }
    let mut pieces = BTreeMap::new();
    for (u, deg) in black_vertices(&tree) {
        let h = iso[roots[u].unwrap()];
        debug_assert_eq!(h % 2, 0);
        let b = bds[h / 2];
        if banned[bd.faces.of[b]] || !keep(deg) {
            continue;
        }
        pieces.insert(u, extract_piece(&bd, b, &mut s)?);
    }
    Ok(Decomposition { tree, pieces })
}

/// Ψ⁻¹: glues every piece into its loop, root edge on the loop root.
pub fn psi_inverse(d: &Decomposition) -> Result<QuadrangulationWithBoundary> {
    let t = &d.tree;
    if t.num_vertices() == 1 {
        return QuadrangulationWithBoundary::new(HalfEdgeMap::vertex_map());
    }
    let blacks = black_vertices(t);
    if blacks.len() != d.pieces.len() {
        return Err(Error::DimensionMismatch(format!("{} black vertices, {} pieces", blacks.len(), d.pieces.len())));
    }
    for &(u, deg) in &blacks {
        let q = d.pieces.get(&u).ok_or_else(|| Error::DimensionMismatch(format!("no piece for vertex {u}")))?;
        if deg % 2 == 1 || 2 * q.sigma != deg {
            return Err(Error::PerimeterMismatch { expected: deg, found: 2 * q.sigma });
        }
        if !q.map.is_simple_boundary() {
            return Err(Error::NonSimplePiece(u));
        }
    }
    let (l, roots) = loop_with_roots(t);
    let lm = &l.map;
    let lfaces = lm.faces();
    let louter = lfaces.of[lm.alpha(lm.root().unwrap())];
    // ids: outer half-edges of the looptree first, then piece interiors
    let mut id = vec![usize::MAX; lm.num_half_edges()];
    let mut count = 0;
    for &h in &lfaces.cycles[louter] {
        id[h] = count;
        count += 1;
    }
    let mut alpha = vec![usize::MAX; count];
    let mut phi = vec![usize::MAX; count];
    for &h in &lfaces.cycles[louter] {
        phi[id[h]] = id[lm.phi(h)];
    }
    let mut root = None;
    for &(u, deg) in &blacks {
        let q = &d.pieces[&u];
        let lr = roots[u].unwrap();
        let mut loop_h = Vec::with_capacity(deg);
        let mut h = lr;
        for _ in 0..deg {
            loop_h.push(h);
            h = lm.phi(h);
        }
        let is_root_loop = lr == lm.root().unwrap();
        if q.inner_faces == 0 {
            // perimeter 2 without faces: the single edge closes the loop
            let (x0, x1) = (id[lm.alpha(loop_h[0])], id[lm.alpha(loop_h[1])]);
            alpha[x0] = x1;
            alpha[x1] = x0;
            if is_root_loop {
                root = Some(x1);
            }
            continue;
        }
        let bd = Boundary::new(&q.map);
        let base = alpha.len();
        let local: Vec<usize> = (0..q.map.num_half_edges()).filter(|&h| bd.faces.of[h] != bd.outer).collect();
        let mut lid = HashMap::with_capacity(local.len());
        for (k, &h) in local.iter().enumerate() {
            lid.insert(h, base + k);
        }
        alpha.resize(base + local.len(), usize::MAX);
        phi.resize(base + local.len(), usize::MAX);
        for &h in &local {
            phi[lid[&h]] = lid[&q.map.phi(h)];
            if !bd.on_boundary(h) {
                alpha[lid[&h]] = lid[&q.map.alpha(h)];
            }
        }
        let mut b = q.map.root().unwrap();
        for &lh in &loop_h {
            let x = id[lm.alpha(lh)];
            alpha[lid[&b]] = x;
            alpha[x] = lid[&b];
            b = bd.next(b);
        }
        if b != q.map.root().unwrap() {
            return Err(Error::PerimeterMismatch { expected: deg, found: 2 * q.sigma });
        }
        if is_root_loop {
            root = Some(lid[&q.map.root().unwrap()]);
        }
    }
    if alpha.iter().chain(&phi).any(|&x| x == usize::MAX) {
        return Err(Error::InvalidMap("incomplete gluing".into()));
    }
    QuadrangulationWithBoundary::new(HalfEdgeMap::from_alpha_phi(alpha, &phi, root))
}

/// Tree truncated at height `2r`, with the old-to-new vertex map.
fn cut_tree(t: &PlaneTree, r: usize) -> (PlaneTree, Vec<usize>) {
    let d = t.depths();
    let ch: Vec<Vec<usize>> =
        (0..t.num_vertices()).map(|v| if d[v] >= 2 * r { Vec::new() } else { t.children(v).to_vec() }).collect();
    PlaneTree::from_children(&ch, 0)
}

/// Prunes the vertices at height larger than `2r`.
pub fn cut_r(t: &PlaneTree, r: usize) -> PlaneTree {
    cut_tree(t, r).0
}

/// `Cut_r`: the pieces glued into the loops of the pruned tree.
pub fn cut_r_decomposition(d: &Decomposition, r: usize) -> Result<Decomposition> {
    if r == 0 {
        return Err(Error::OutOfRange("Cut_r needs r ≥ 1".into()));
    }
    let (tree, map) = cut_tree(&d.tree, r);
    let depth = d.tree.depths();
    let pieces = d
        .pieces
        .iter()
        .filter(|(&u, _)| depth[u] < 2 * r)
        .map(|(&u, q)| (map[u], q.clone()))
        .collect();
    Ok(Decomposition { tree, pieces })
}

pub fn cut_r_quad(d: &Decomposition, r: usize) -> Result<QuadrangulationWithBoundary> {
    psi_inverse(&cut_r_decomposition(d, r)?)
}

#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq, Eq)]
pub struct PoolStats {
    pub source_samples: usize,
    pub harvested: usize,
    pub dropped: usize,
    pub served: usize,
}

/// Exact `P̂^k` pieces harvested from pointed `P•^σ` samples.
///
/// Given its tree of components, the pieces of a `P^σ` sample are
/// independent with laws `P̂^{deg/2}`; pointing only biases the piece that
/// contains the point, which is skipped. Pieces are queued per perimeter in
/// tree order (which depends on the tree only), so each queue holds i.i.d.
/// samples. Rejection from `P^k` onto a simple boundary would have
/// exponentially small acceptance in `k`.
#[derive(Clone, Debug)]
pub struct PiecePool {
    pub p: f64,
    pub base_sigma: usize,
    pub queue_cap: usize,
    pub max_sources: usize,
    queues: BTreeMap<usize, VecDeque<QuadrangulationWithBoundary>>,
    pub stats: PoolStats,
}

impl PiecePool {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::OutOfRange(format!("piece pool needs p in [0, 1/2), got {p}")));
        }
        Ok(PiecePool {
            p,
            base_sigma: 64,
            queue_cap: 4096,
            max_sources: 2_000_000,
            queues: BTreeMap::new(),
            stats: PoolStats::default(),
        })
    }

    /// One `P̂^k` piece (perimeter `2k`).
    pub fn take<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> Result<QuadrangulationWithBoundary> {
        if k == 0 {
            return Err(Error::OutOfRange("pieces have perimeter ≥ 2".into()));
        }
        if self.p == 0.0 {
            // F̂_k(0) = δ_1(k)
            if k != 1 {
                return Err(Error::OutOfRange(format!("no simple-boundary piece of perimeter {} at p = 0", 2 * k)));
            }
            self.stats.served += 1;
            return QuadrangulationWithBoundary::new(HalfEdgeMap::single_edge());
        }
        let mut sources = 0;
        loop {
            if let Some(q) = self.queues.get_mut(&k).and_then(|x| x.pop_front()) {
                self.stats.served += 1;
                return Ok(q);
            }
            if sources >= self.max_sources {
                return Err(Error::MaxAttemptsExceeded { attempts: sources, rate: 0.0 });
            }
            sources += 1;
            self.harvest(self.base_sigma.max(32 * k), rng)?;
        }
    }

    fn harvest<R: Rng + ?Sized>(&mut self, sigma: usize, rng: &mut R) -> Result<()> {
        // A pointed sample with the point on the boundary has, given its
        // tree, i.i.d. pieces (the weight #∂V depends on the tree only);
        // with the point inside a piece, the other pieces still are.
        let q = sample_pointed_boltzmann(sigma, self.p, rng)?;
        self.stats.source_samples += 1;
        // reserve room per perimeter before extracting anything
        let mut room: BTreeMap<usize, usize> = BTreeMap::new();
        let (cap, queues, stats) = (self.queue_cap, &self.queues, &mut self.stats);
        let d = psi_filtered(&q.quad, false, Some(q.pointed_vertex), |deg| {
            let r = room.entry(deg / 2).or_insert_with(|| cap - queues.get(&(deg / 2)).map_or(0, |x| x.len()));
            if *r == 0 {
                stats.dropped += 1;
                return false;
            }
            *r -= 1;
            true
        })?;
        for (_, piece) in d.pieces {
            self.queues.entry(piece.sigma).or_default().push_back(piece);
            self.stats.harvested += 1;
        }
        Ok(())
    }
}

/// Spine piece sizes: `#C_i` is the edge count of the piece glued into the
/// i-th black spine vertex.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CutsetSample {
    pub sizes: Vec<usize>,
}

/// Samples `Cut_r` of the half-plane model through the branching structure.
#[derive(Clone, Debug)]
pub struct BranchingSampler {
    pub pair: OffspringPair,
    pub pieces: SimplePieceSampler,
    spine_law: Offspring,
}

impl BranchingSampler {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::OutOfRange(format!("branching construction needs p < 1/2, got {p}")));
        }
        let pair = offspring_pair(&rational_from_decimal(p)?, 1e-12)?;
        let spine_law = pair.mu_bullet.size_biased();
        Ok(BranchingSampler { pair, pieces: SimplePieceSampler::new(p)?, spine_law })
    }

    /// Kesten tree truncated at height `2r` with a piece in every loop.
    pub fn sample_decomposition<R: Rng + ?Sized>(&mut self, r: usize, rng: &mut R) -> Result<Decomposition> {
        if r == 0 {
            return Err(Error::OutOfRange("Cut_r needs r ≥ 1".into()));
        }
        let t = sample_kesten_two_type(&self.pair.mu_circ, &self.pair.mu_bullet, 2 * r, rng)?.tree;
        let mut pieces = BTreeMap::new();
        for (u, deg) in black_vertices(&t) {
            pieces.insert(u, self.pieces.sample(deg / 2, rng)?);
        }
        Ok(Decomposition { tree: t, pieces })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, r: usize, rng: &mut R) -> Result<QuadrangulationWithBoundary> {
        psi_inverse(&self.sample_decomposition(r, rng)?)
    }

    /// `Y ~` size-biased μ•, then the edge count of a `P̂^{(Y+1)/2}` piece.
    pub fn spine_cutsets<R: Rng + ?Sized>(&mut self, count: usize, rng: &mut R) -> Result<CutsetSample> {
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count {
            let y = self.spine_law.sample(rng);
            sizes.push(self.pieces.sample(y.div_ceil(2), rng)?.map.num_edges());
        }
        Ok(CutsetSample { sizes })
    }
}

/// `Cut_r` of the half-plane model with skewness `p < 1/2`.
pub fn build_uihpq_branching<R: Rng + ?Sized>(p: f64, r: usize, rng: &mut R) -> Result<QuadrangulationWithBoundary> {
    BranchingSampler::new(p)?.sample(r, rng)
}

pub fn spine_cutsets<R: Rng + ?Sized>(p: f64, count: usize, rng: &mut R) -> Result<CutsetSample> {
    BranchingSampler::new(p)?.spine_cutsets(count, rng)
}

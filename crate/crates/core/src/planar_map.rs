//! Rooted planar maps as half-edge permutation pairs.
//!
//! A map on `H` half-edges is given by the edge involution `alpha` and the
//! vertex rotation `rot`. Faces are the orbits of `rot ∘ alpha`; the face
//! traced by an orbit lies to the left of each of its half-edges. A map with
//! zero half-edges is the vertex map (one vertex, one face).
//!
//! For a quadrangulation with a boundary the root half-edge has the outer
//! face on its right, i.e. `alpha(root)` lies on the outer face.

use std::collections::VecDeque;
use std::fmt;
use std::io::{Read, Write};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HalfEdgeMap {
    alpha: Vec<usize>,
    rot: Vec<usize>,
    root: Option<usize>,
}

/// A violated map invariant, as reported by [`HalfEdgeMap::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    OutOfRange,
    OddHalfEdgeCount,
    AlphaNotInvolution,
    AlphaFixedPoint,
    RotNotPermutation,
    NotConnected,
    Euler(i64),
    BadRoot,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange => write!(f, "ids out of range"),
            Violation::OddHalfEdgeCount => write!(f, "odd number of half-edges"),
            Violation::AlphaNotInvolution => write!(f, "alpha is not an involution"),
            Violation::AlphaFixedPoint => write!(f, "alpha not fixed-point-free"),
            Violation::RotNotPermutation => write!(f, "rot is not a permutation"),
            Violation::NotConnected => write!(f, "not connected"),
            Violation::Euler(chi) => write!(f, "Euler characteristic {chi} != 2"),
            Violation::BadRoot => write!(f, "root missing or out of range"),
        }
    }
}

/// Orbit decomposition of a permutation: `of[h]` is the orbit index of `h`,
/// orbits are numbered by their smallest element.
#[derive(Clone, Debug)]
pub struct Orbits {
    pub of: Vec<usize>,
    pub cycles: Vec<Vec<usize>>,
}

fn orbits(n: usize, next: impl Fn(usize) -> usize) -> Orbits {
    let mut of = vec![usize::MAX; n];
    let mut cycles = Vec::new();
    for s in 0..n {
        if of[s] != usize::MAX {
            continue;
        }
        let id = cycles.len();
        let mut cyc = Vec::new();
        let mut h = s;
        loop {
            of[h] = id;
            cyc.push(h);
            h = next(h);
            if h == s {
                break;
            }
        }
        cycles.push(cyc);
    }
    Orbits { of, cycles }
}

impl HalfEdgeMap {
    /// Builds a map without checking invariants; see [`validate`](Self::validate).
    pub fn new(alpha: Vec<usize>, rot: Vec<usize>, root: Option<usize>) -> Self {
        HalfEdgeMap { alpha, rot, root }
    }

    /// The vertex map: one vertex, no edges.
    pub fn vertex_map() -> Self {
        HalfEdgeMap::new(Vec::new(), Vec::new(), None)
    }

    /// The single-edge map, rooted at half-edge 0.
    pub fn single_edge() -> Self {
        HalfEdgeMap::new(vec![1, 0], vec![0, 1], Some(0))
    }

    /// Builds a map from the edge involution and the face permutation
    /// `phi = rot ∘ alpha`.
    pub fn from_alpha_phi(alpha: Vec<usize>, phi: &[usize], root: Option<usize>) -> Self {
        let rot = (0..alpha.len()).map(|h| phi[alpha[h]]).collect();
        HalfEdgeMap::new(alpha, rot, root)
    }

    pub fn num_half_edges(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_edges(&self) -> usize {
        self.alpha.len() / 2
    }

    pub fn alpha(&self, h: usize) -> usize {
        self.alpha[h]
    }

    pub fn rot(&self, h: usize) -> usize {
        self.rot[h]
    }

    /// Face successor: `rot(alpha(h))`.
    pub fn phi(&self, h: usize) -> usize {
        self.rot[self.alpha[h]]
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn alpha_slice(&self) -> &[usize] {
        &self.alpha
    }

    pub fn rot_slice(&self) -> &[usize] {
        &self.rot
    }

    pub fn with_root(mut self, root: Option<usize>) -> Self {
        self.root = root;
        self
    }

    pub fn is_vertex_map(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Lists every violated invariant; empty iff the map is a valid rooted
    /// planar map.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.alpha.len();
        let mut out = Vec::new();
        if self.rot.len() != n || self.alpha.iter().chain(&self.rot).any(|&x| x >= n) {
            out.push(Violation::OutOfRange);
            return out;
        }
        if n == 0 {
            if self.root.is_some() {
                out.push(Violation::BadRoot);
            }
            return out;
        }
        if n % 2 == 1 {
            out.push(Violation::OddHalfEdgeCount);
        }
        if (0..n).any(|h| self.alpha[self.alpha[h]] != h) {
            out.push(Violation::AlphaNotInvolution);
        }
        if (0..n).any(|h| self.alpha[h] == h) {
            out.push(Violation::AlphaFixedPoint);
        }
        let mut seen = vec![false; n];
        for &x in &self.rot {
            seen[x] = true;
        }
        if seen.iter().any(|s| !s) {
            out.push(Violation::RotNotPermutation);
            return out;
        }
        match self.root {
            Some(r) if r < n => {}
            _ => out.push(Violation::BadRoot),
        }
        if !out.is_empty() {
            return out;
        }
        // connectivity
        let mut mark = vec![false; n];
        let mut stack = vec![0];
        mark[0] = true;
        let mut count = 1;
        while let Some(h) = stack.pop() {
            for g in [self.alpha[h], self.rot[h]] {
                if !mark[g] {
                    mark[g] = true;
                    count += 1;
                    stack.push(g);
                }
            }
        }
        if count != n {
            out.push(Violation::NotConnected);
            return out;
        }
        let chi = self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64;
        if chi != 2 {
            out.push(Violation::Euler(chi));
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn vertices(&self) -> Orbits {
        if self.alpha.is_empty() {
            return Orbits { of: Vec::new(), cycles: vec![Vec::new()] };
        }
        orbits(self.alpha.len(), |h| self.rot[h])
    }

    /// Faces as orbits of `rot ∘ alpha`.
    pub fn faces(&self) -> Orbits {
        if self.alpha.is_empty() {
            return Orbits { of: Vec::new(), cycles: vec![Vec::new()] };
        }
        orbits(self.alpha.len(), |h| self.phi(h))
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices().cycles.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces().cycles.len()
    }

    /// Half-edge representing the outer face: `alpha(root)`.
    pub fn outer_face_rep(&self) -> Option<usize> {
        self.root.map(|r| self.alpha[r])
    }

    /// Outer face as the cyclic sequence of its half-edges, starting at
    /// `alpha(root)`.
    pub fn boundary(&self) -> Vec<usize> {
        let Some(s) = self.outer_face_rep() else { return Vec::new() };
        let mut out = vec![s];
        let mut h = self.phi(s);
        while h != s {
            out.push(h);
            h = self.phi(h);
        }
        out
    }

    /// Origins of the boundary half-edges, in boundary order.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let v = self.vertices();
        self.boundary().iter().map(|&h| v.of[h]).collect()
    }

    /// True iff no vertex repeats along the boundary cycle.
    pub fn is_simple_boundary(&self) -> bool {
        let mut vs = self.boundary_vertices();
        let n = vs.len();
        vs.sort_unstable();
        vs.dedup();
        vs.len() == n
    }

    /// Vertex containing the origin of the root (0 for the vertex map).
    pub fn root_vertex(&self) -> usize {
        match self.root {
            Some(r) => self.vertices().of[r],
            None => 0,
        }
    }

    /// Graph distances from vertex `v` (vertex ids as in [`vertices`](Self::vertices)).
    pub fn graph_distances(&self, v: usize) -> Vec<Option<usize>> {
        let verts = self.vertices();
        distances_with(self, &verts, v, usize::MAX)
    }

    /// Outgoing half-edges at each vertex in rotation order.
    pub fn rotation_lists(&self) -> Vec<Vec<usize>> {
        self.vertices().cycles
    }

    /// Relabels half-edges so that `perm[old] = new`; the map is unchanged up
    /// to isomorphism.
    pub fn relabel(&self, perm: &[usize]) -> HalfEdgeMap {
        let n = self.alpha.len();
        let mut alpha = vec![0; n];
        let mut rot = vec![0; n];
        for h in 0..n {
            alpha[perm[h]] = perm[self.alpha[h]];
            rot[perm[h]] = perm[self.rot[h]];
        }
        HalfEdgeMap::new(alpha, rot, self.root.map(|r| perm[r]))
    }

    /// Canonical byte string: equal iff the rooted maps are isomorphic.
    ///
    /// Words (little-endian u32): version 1, half-edge count, then for every
    /// half-edge in breadth-first discovery order from the root the
    /// discovery indices of its `alpha` and `rot` images.
    pub fn canonical_encoding(&self) -> Vec<u8> {
        let n = self.alpha.len();
        let mut words: Vec<u32> = vec![1, n as u32];
        if let Some(r) = self.root {
            let mut id = vec![u32::MAX; n];
            let mut order = Vec::with_capacity(n);
            id[r] = 0;
            order.push(r);
            let mut i = 0;
            while i < order.len() {
                let h = order[i];
                i += 1;
                for g in [self.alpha[h], self.rot[h]] {
                    if id[g] == u32::MAX {
                        id[g] = order.len() as u32;
                        order.push(g);
                    }
                    words.push(id[g]);
                }
            }
        }
        words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    /// Renumbers half-edges in canonical discovery order.
    pub fn canonical_form(&self) -> HalfEdgeMap {
        let n = self.alpha.len();
        let Some(r) = self.root else { return self.clone() };
        let mut id = vec![usize::MAX; n];
        let mut order = vec![r];
        id[r] = 0;
        let mut i = 0;
        while i < order.len() {
            let h = order[i];
            i += 1;
            for g in [self.alpha[h], self.rot[h]] {
                if id[g] == usize::MAX {
                    id[g] = order.len();
                    order.push(g);
                }
            }
        }
        self.relabel(&id)
    }
}

fn distances_with(m: &HalfEdgeMap, verts: &Orbits, v: usize, cap: usize) -> Vec<Option<usize>> {
    let nv = verts.cycles.len();
    let mut dist = vec![None; nv];
    if nv == 0 {
        return dist;
    }
    dist[v] = Some(0);
    let mut q = VecDeque::from([v]);
    while let Some(u) = q.pop_front() {
        let d = dist[u].unwrap();
        if d >= cap {
            continue;
        }
        for &h in &verts.cycles[u] {
            if m.alpha.is_empty() {
                break;
            }
            let w = verts.of[m.alpha[h]];
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                q.push_back(w);
            }
        }
    }
    dist
}

/// Combinatorial ball: vertices within distance `radius` of `center` and all
/// edges between them. Original half-edge ids are kept in `half_edge_of`.
#[derive(Clone, Debug)]
pub struct BallSubmap {
    pub map: HalfEdgeMap,
    pub radius: usize,
    pub center: usize,
    /// `half_edge_of[new] = old`.
    pub half_edge_of: Vec<usize>,
    /// Distance from the center of every vertex of `map`, indexed by the
    /// vertex ids of `map`.
    pub vertex_distance: Vec<usize>,
}

/// Ball of radius `r` around the origin of half-edge `h`, rooted at `h`
/// (or at the vertex map when `r = 0`).
pub fn ball_from_half_edge(m: &HalfEdgeMap, h: usize, r: usize) -> BallSubmap {
    let verts = m.vertices();
    let c = verts.of[h];
    ball_impl(m, &verts, c, r, Some(h))
}

/// Ball of radius `r` around the root vertex, rooted at the root edge.
pub fn ball_at_root(m: &HalfEdgeMap, r: usize) -> BallSubmap {
    match m.root {
        Some(h) => ball_from_half_edge(m, h, r),
        None => BallSubmap {
            map: HalfEdgeMap::vertex_map(),
            radius: r,
            center: 0,
            half_edge_of: Vec::new(),
            vertex_distance: vec![0],
        },
    }
}

/// Ball around an arbitrary vertex. If the vertex is the root vertex the
/// ball is rooted at the root edge, otherwise at the smallest-id half-edge
/// leaving the center.
pub fn combinatorial_ball(m: &HalfEdgeMap, center: usize, r: usize) -> Result<BallSubmap> {
    let verts = m.vertices();
    if center >= verts.cycles.len() {
        return Err(Error::OutOfRange(format!("center {center}")));
    }
    if m.is_vertex_map() {
        return Ok(ball_at_root(m, r));
    }
    let root = match m.root {
        Some(h) if verts.of[h] == center => h,
        _ => *verts.cycles[center].iter().min().unwrap(),
    };
    Ok(ball_impl(m, &verts, center, r, Some(root)))
}

fn ball_impl(m: &HalfEdgeMap, verts: &Orbits, c: usize, r: usize, root: Option<usize>) -> BallSubmap {
    let dist = distances_with(m, verts, c, r);
    let n = m.num_half_edges();
    let keep: Vec<bool> = (0..n)
        .map(|h| dist[verts.of[h]].is_some() && dist[verts.of[m.alpha[h]]].is_some())
        .collect();
    let mut new_id = vec![usize::MAX; n];
    let mut old = Vec::new();
    for h in 0..n {
        if keep[h] {
            new_id[h] = old.len();
            old.push(h);
        }
    }
    let mut alpha = Vec::with_capacity(old.len());
    let mut rot = Vec::with_capacity(old.len());
    for &h in &old {
        alpha.push(new_id[m.alpha[h]]);
        let mut g = m.rot[h];
        while !keep[g] {
            g = m.rot[g];
        }
        rot.push(new_id[g]);
    }
    let new_root = if old.is_empty() { None } else { root.map(|h| new_id[h]) };
    let map = HalfEdgeMap::new(alpha, rot, new_root);
    let sub_verts = map.vertices();
    let vertex_distance = if old.is_empty() {
        vec![0]
    } else {
        sub_verts.cycles.iter().map(|cyc| dist[verts.of[old[cyc[0]]]].unwrap()).collect()
    };
    BallSubmap { map, radius: r, center: c, half_edge_of: old, vertex_distance }
}

/// Local distance `(1 + sup{r : Ball_r(m1) = Ball_r(m2)})^{-1}`, 0 for
/// isomorphic maps.
pub fn local_distance(m1: &HalfEdgeMap, m2: &HalfEdgeMap) -> Ratio<u64> {
    if m1.canonical_encoding() == m2.canonical_encoding() {
        return Ratio::from_integer(0);
    }
    let mut r = 1;
    loop {
        let b1 = ball_at_root(m1, r);
        let b2 = ball_at_root(m2, r);
        if b1.map.canonical_encoding() != b2.map.canonical_encoding() {
            return Ratio::new(1, r as u64);
        }
        r += 1;
    }
}

/// A map whose inner faces are quadrangles, with the outer face (right of
/// the root) of degree 2σ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadrangulationWithBoundary {
    pub map: HalfEdgeMap,
    pub sigma: usize,
    pub inner_faces: usize,
}

impl QuadrangulationWithBoundary {
    pub fn new(map: HalfEdgeMap) -> Result<Self> {
        let v = map.validate();
        if !v.is_empty() {
            return Err(Error::InvalidMap(
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
            ));
        }
        if map.is_vertex_map() {
            return Ok(QuadrangulationWithBoundary { map, sigma: 0, inner_faces: 0 });
        }
        let faces = map.faces();
        let outer = faces.of[map.outer_face_rep().unwrap()];
        let deg = faces.cycles[outer].len();
        if deg % 2 == 1 {
            return Err(Error::InvalidMap(format!("outer face of odd degree {deg}")));
        }
        for (i, f) in faces.cycles.iter().enumerate() {
            if i != outer && f.len() != 4 {
                return Err(Error::InvalidMap(format!("inner face of degree {}", f.len())));
            }
        }
        Ok(QuadrangulationWithBoundary { map, sigma: deg / 2, inner_faces: faces.cycles.len() - 1 })
    }

    pub fn num_vertices(&self) -> usize {
        self.map.num_vertices()
    }
}

#[derive(Serialize, Deserialize)]
struct PmapFile {
    version: u32,
    half_edges: usize,
    alpha: Vec<usize>,
    rot: Vec<usize>,
    root: Option<usize>,
    outer_face_rep: Option<usize>,
}

/// Serializes to the `.pmap` JSON format.
pub fn write_map<W: Write>(m: &HalfEdgeMap, mut w: W) -> Result<()> {
    let f = PmapFile {
        version: 1,
        half_edges: m.num_half_edges(),
        alpha: m.alpha.clone(),
        rot: m.rot.clone(),
        root: m.root,
        outer_face_rep: m.outer_face_rep(),
    };
    serde_json::to_writer(&mut w, &f).map_err(|e| Error::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn map_to_string(m: &HalfEdgeMap) -> String {
    let mut buf = Vec::new();
    write_map(m, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf8")
}

/// Parses the `.pmap` JSON format; errors carry line/column positions.
pub fn read_map<R: Read>(r: R) -> Result<HalfEdgeMap> {
    let f: PmapFile = serde_json::from_reader(r)
        .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
    if f.version != 1 {
        return Err(Error::Parse(format!("unsupported version {}", f.version)));
    }
    if f.alpha.len() != f.half_edges || f.rot.len() != f.half_edges {
        return Err(Error::Parse(format!(
            "array lengths {} / {} do not match half_edges {}",
            f.alpha.len(),
            f.rot.len(),
            f.half_edges
        )));
    }
    let m = HalfEdgeMap::new(f.alpha, f.rot, f.root);
    if let (Some(o), Some(r)) = (f.outer_face_rep, m.root) {
        if r >= m.num_half_edges() || o != m.alpha[r] {
            return Err(Error::Parse("outer_face_rep inconsistent with root".into()));
        }
    }
    Ok(m)
}

pub fn map_from_str(s: &str) -> Result<HalfEdgeMap> {
    read_map(s.as_bytes())
}

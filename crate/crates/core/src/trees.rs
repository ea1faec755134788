//! Plane trees, labelings, forests, bridges, looptrees and tree samplers.
//!
//! Trees are stored with vertices numbered in depth-first preorder, root 0,
//! so two trees are equal iff their child lists are equal.
//!
//! Serialization: a tree is the balanced-parenthesis word
//! `word(v) = concat over children c of "(" word(c) ")"` (the singleton is the
//! empty word); a forest wraps each tree word in brackets, `[..][..]`.
//! Labels travel as one increment per edge in preorder, written over the
//! alphabet `-`, `0`, `+`. Bridges are step strings over `U`/`D`.

use std::collections::VecDeque;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::planar_map::HalfEdgeMap;
use crate::rng::{geometric, increment};

/// Default cap on sampled tree sizes (edges).
pub const DEFAULT_SIZE_CAP: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlaneTree {
    children: Vec<Vec<usize>>,
}

impl PlaneTree {
    pub fn singleton() -> Self {
        PlaneTree { children: vec![Vec::new()] }
    }

    /// Builds a tree from arbitrary child lists and a root; returns the tree
    /// (renumbered in preorder) and the map `old id -> new id`. Vertices not
    /// reachable from the root are dropped (mapped to `usize::MAX`).
    pub fn from_children(children: &[Vec<usize>], root: usize) -> (Self, Vec<usize>) {
        let mut new_id = vec![usize::MAX; children.len()];
        let mut order = Vec::new();
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            new_id[v] = order.len();
            order.push(v);
            for &c in children[v].iter().rev() {
                stack.push(c);
            }
        }
        let ch = order.iter().map(|&v| children[v].iter().map(|&c| new_id[c]).collect()).collect();
        (PlaneTree { children: ch }, new_id)
    }

    /// Tree whose preorder out-degree sequence is `degs` (a Łukasiewicz word).
    pub fn from_preorder_degrees(degs: &[usize]) -> Result<Self> {
        if degs.is_empty() {
            return Err(Error::Parse("empty degree sequence".into()));
        }
        let mut children = vec![Vec::new(); degs.len()];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for (v, &d) in degs.iter().enumerate() {
            if v > 0 {
                let Some(top) = stack.last_mut() else {
                    return Err(Error::Parse("degree sequence ends early".into()));
                };
                children[top.0].push(v);
                top.1 -= 1;
                if top.1 == 0 {
                    stack.pop();
                }
            }
            if d > 0 {
                stack.push((v, d));
            }
        }
        if !stack.is_empty() {
            return Err(Error::Parse("degree sequence too short".into()));
        }
        Ok(PlaneTree { children })
    }

    pub fn num_vertices(&self) -> usize {
        self.children.len()
    }

    /// |t|, the number of edges.
    pub fn num_edges(&self) -> usize {
        self.children.len() - 1
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn root_degree(&self) -> usize {
        self.children[0].len()
    }

    pub fn preorder_degrees(&self) -> Vec<usize> {
        self.children.iter().map(|c| c.len()).collect()
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut par = vec![None; self.children.len()];
        for (v, ch) in self.children.iter().enumerate() {
            for &c in ch {
                par[c] = Some(v);
            }
        }
        par
    }

    pub fn depths(&self) -> Vec<usize> {
        let mut d = vec![0; self.children.len()];
        // preorder: parents come first
        for v in 0..self.children.len() {
            for &c in &self.children[v] {
                d[c] = d[v] + 1;
            }
        }
        d
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Vertices visited by the contour walk, `2|t| + 1` corners.
    pub fn contour(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.children.len() - 1);
        let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
        out.push(0);
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            if *i < self.children[v].len() {
                let c = self.children[v][*i];
                *i += 1;
                out.push(c);
                stack.push((c, 0));
            } else {
                stack.pop();
                if let Some(&(u, _)) = stack.last() {
                    out.push(u);
                }
            }
        }
        out
    }

    /// Keeps the vertices at height ≤ `h`.
    pub fn truncate(&self, h: usize) -> PlaneTree {
        let d = self.depths();
        let ch: Vec<Vec<usize>> = (0..self.children.len())
            .map(|v| if d[v] >= h { Vec::new() } else { self.children[v].clone() })
            .collect();
        PlaneTree::from_children(&ch, 0).0
    }

    pub fn to_word(&self) -> String {
        let mut s = String::with_capacity(2 * self.num_edges());
        for (c, v) in self.contour().windows(2).map(|w| (w[0], w[1])) {
            // a step to a larger preorder id descends
            s.push(if v > c { '(' } else { ')' });
        }
        s
    }

    pub fn from_word(w: &str) -> Result<Self> {
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        let mut stack = vec![0];
        for (i, ch) in w.chars().enumerate() {
            match ch {
                '(' => {
                    let v = children.len();
                    children.push(Vec::new());
                    children[*stack.last().unwrap()].push(v);
                    stack.push(v);
                }
                ')' => {
                    if stack.len() == 1 {
                        return Err(Error::Parse(format!("unbalanced ')' at {i}")));
                    }
                    stack.pop();
                }
                _ => return Err(Error::Parse(format!("unexpected {ch:?} at {i}"))),
            }
        }
        if stack.len() != 1 {
            return Err(Error::Parse("unbalanced word".into()));
        }
        Ok(PlaneTree { children })
    }
}

/// Exact probability `p^|t| (1-p)^{|t|+1}` of a finite tree under p-GW.
pub fn gw_probability(t: &PlaneTree, p: &BigRational) -> BigRational {
    let e = t.num_edges() as i32;
    let q = BigRational::one() - p;
    num_traits::pow::pow(p.clone(), e as usize) * num_traits::pow::pow(q, (e + 1) as usize)
}

/// Offspring distributions used by the tree samplers.
#[derive(Clone, Debug, PartialEq)]
pub enum Offspring {
    /// `P(k) = (1-q) q^k`.
    Geometric(f64),
    Dirac(usize),
    /// Size-biased geometric: `P(k) = k (1-q)^2 q^{k-1}`.
    SizeBiasedGeometric(f64),
    /// Finite table on `0..pmf.len()`.
    Table { pmf: Vec<f64>, cdf: Vec<f64> },
}

impl Offspring {
    pub fn table(pmf: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Offspring::Table { pmf, cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Offspring::Geometric(q) => geometric(rng, *q) as usize,
            Offspring::Dirac(k) => *k,
            Offspring::SizeBiasedGeometric(q) => 1 + (geometric(rng, *q) + geometric(rng, *q)) as usize,
            Offspring::Table { cdf, .. } => {
                let total = *cdf.last().unwrap_or(&1.0);
                let u = rng.gen::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            }
        }
    }

    pub fn pmf(&self, k: usize) -> f64 {
        match self {
            Offspring::Geometric(q) => (1.0 - q) * q.powi(k as i32),
            Offspring::Dirac(j) => (k == *j) as u8 as f64,
            Offspring::SizeBiasedGeometric(q) => {
                if k == 0 {
                    0.0
                } else {
                    k as f64 * (1.0 - q).powi(2) * q.powi(k as i32 - 1)
                }
            }
            Offspring::Table { pmf, .. } => pmf.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Offspring::Geometric(q) => q / (1.0 - q),
            Offspring::Dirac(k) => *k as f64,
            Offspring::SizeBiasedGeometric(q) => 1.0 + 2.0 * q / (1.0 - q),
            Offspring::Table { pmf, .. } => pmf.iter().enumerate().map(|(k, x)| k as f64 * x).sum(),
        }
    }

    /// The size-biased law `k ν(k) / m`.
    pub fn size_biased(&self) -> Offspring {
        match self {
            Offspring::Geometric(q) => Offspring::SizeBiasedGeometric(*q),
            Offspring::Dirac(k) => Offspring::Dirac(*k),
            Offspring::SizeBiasedGeometric(q) => {
                // rarely needed; tabulate far enough into the tail
                let m = self.mean();
                let n = ((60.0 / -q.ln().min(-1e-9)) as usize).max(64);
                Offspring::table((0..n).map(|k| k as f64 * self.pmf(k) / m).collect())
            }
            Offspring::Table { pmf, .. } => {
                let m = self.mean();
                Offspring::table(pmf.iter().enumerate().map(|(k, x)| k as f64 * x / m).collect())
            }
        }
    }
}

/// Grows a tree in preorder; `draw(depth, rng)` gives the child count.
fn grow<R: Rng + ?Sized>(
    rng: &mut R,
    start_depth: usize,
    size_cap: usize,
    mut draw: impl FnMut(usize, &mut R) -> usize,
) -> Result<PlaneTree> {
    let mut degs = Vec::new();
    let mut stack = vec![start_depth];
    while let Some(d) = stack.pop() {
        let k = draw(d, rng);
        degs.push(k);
        if degs.len() + stack.len() + k > size_cap + 1 {
            return Err(Error::SizeCapExceeded(size_cap));
        }
        stack.extend(std::iter::repeat_n(d + 1, k));
    }
    PlaneTree::from_preorder_degrees(&degs)
}

/// p-Galton–Watson tree with offspring `μ_p(k) = p^k (1-p)`.
pub fn sample_gw_geometric<R: Rng + ?Sized>(p: f64, size_cap: usize, rng: &mut R) -> Result<PlaneTree> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::OutOfRange(format!("p = {p}")));
    }
    grow(rng, 0, size_cap, |_, r| geometric(r, p) as usize)
}

/// Two-type GW tree: `nu_circ` at even heights, `nu_bullet` at odd heights.
pub fn sample_two_type_gw<R: Rng + ?Sized>(
    nu_circ: &Offspring,
    nu_bullet: &Offspring,
    size_cap: usize,
    rng: &mut R,
) -> Result<PlaneTree> {
    grow(rng, 0, size_cap, |d, r| if d % 2 == 0 { nu_circ.sample(r) } else { nu_bullet.sample(r) })
}

/// A tree with a distinguished spine `spine[0] = root, spine[1], ...`.
#[derive(Clone, Debug)]
pub struct SpinedTree {
    pub tree: PlaneTree,
    pub spine: Vec<usize>,
}

/// Two-type Kesten tree truncated at height `height_cap`: spine vertices use
/// the size-biased laws with a uniform spine child, the others the plain laws.
pub fn sample_kesten_two_type<R: Rng + ?Sized>(
    nu_circ: &Offspring,
    nu_bullet: &Offspring,
    height_cap: usize,
    rng: &mut R,
) -> Result<SpinedTree> {
    let prod = nu_circ.mean() * nu_bullet.mean();
    if (prod - 1.0).abs() > 1e-9 {
        return Err(Error::NonCriticalPair(prod));
    }
    let biased = [nu_circ.size_biased(), nu_bullet.size_biased()];
    let plain = [nu_circ, nu_bullet];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut spine = vec![0];
    let mut v = 0;
    for d in 0..height_cap {
        let k = biased[d % 2].sample(rng);
        let s = rng.gen_range(0..k);
        let mut next = 0;
        for i in 0..k {
            if i == s {
                let c = children.len();
                children.push(Vec::new());
                children[v].push(c);
                next = c;
            } else {
                let sub = grow(rng, d + 1, DEFAULT_SIZE_CAP, |dd, r| {
                    if dd >= height_cap {
                        0
                    } else {
                        plain[dd % 2].sample(r)
                    }
                })?;
                let c = graft(&mut children, &sub);
                children[v].push(c);
            }
        }
        spine.push(next);
        v = next;
    }
    let (tree, map) = PlaneTree::from_children(&children, 0);
    Ok(SpinedTree { tree, spine: spine.iter().map(|&s| map[s]).collect() })
}

fn graft(children: &mut Vec<Vec<usize>>, t: &PlaneTree) -> usize {
    let base = children.len();
    for ch in &t.children {
        children.push(ch.iter().map(|c| c + base).collect());
    }
    base
}

/// One-type Kesten tree for `μ_{1/2}`: spine `s_0..s_h` with independent
/// geometric(1/2) numbers of GW(μ_{1/2}) trees grafted on each side.
#[derive(Clone, Debug)]
pub struct GeometricSpine {
    pub tree: PlaneTree,
    pub spine: Vec<usize>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

pub fn sample_kesten_geometric_spine<R: Rng + ?Sized>(height_cap: usize, rng: &mut R) -> Result<GeometricSpine> {
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut spine = vec![0];
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let mut v = 0;
    for d in 0..height_cap {
        let l = geometric(rng, 0.5) as usize;
        let r = geometric(rng, 0.5) as usize;
        left.push(l);
        right.push(r);
        let mut ch = Vec::with_capacity(l + r + 1);
        let mut next = 0;
        for i in 0..=l + r {
            if i == l {
                next = children.len();
                children.push(Vec::new());
                ch.push(next);
            } else {
                let sub = grow(rng, d + 1, DEFAULT_SIZE_CAP, |dd, rr| {
                    if dd >= height_cap {
                        0
                    } else {
                        geometric(rr, 0.5) as usize
                    }
                })?;
                ch.push(graft(&mut children, &sub));
            }
        }
        children[v] = ch;
        spine.push(next);
        v = next;
    }
    let (tree, map) = PlaneTree::from_children(&children, 0);
    Ok(GeometricSpine { tree, spine: spine.iter().map(|&s| map[s]).collect(), left, right })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledTree {
    pub tree: PlaneTree,
    pub label: Vec<i64>,
}

impl LabeledTree {
    pub fn singleton() -> Self {
        LabeledTree { tree: PlaneTree::singleton(), label: vec![0] }
    }

    pub fn is_well_labeled(&self) -> bool {
        self.label.len() == self.tree.num_vertices()
            && self.label[0] == 0
            && (0..self.tree.num_vertices())
                .all(|v| self.tree.children(v).iter().all(|&c| (self.label[c] - self.label[v]).abs() <= 1))
    }

    /// Edge increments in preorder of the child endpoint.
    pub fn increments(&self) -> Vec<i8> {
        let par = self.tree.parents();
        (1..self.tree.num_vertices()).map(|v| (self.label[v] - self.label[par[v].unwrap()]) as i8).collect()
    }

    pub fn from_increments(tree: PlaneTree, inc: &[i8]) -> Result<Self> {
        if inc.len() != tree.num_edges() {
            return Err(Error::DimensionMismatch(format!("{} increments for {} edges", inc.len(), tree.num_edges())));
        }
        let par = tree.parents();
        let mut label = vec![0i64; tree.num_vertices()];
        for v in 1..tree.num_vertices() {
            let d = inc[v - 1];
            if !(-1..=1).contains(&d) {
                return Err(Error::Parse(format!("increment {d}")));
            }
            label[v] = label[par[v].unwrap()] + d as i64;
        }
        Ok(LabeledTree { tree, label })
    }

    pub fn min_label(&self) -> i64 {
        *self.label.iter().min().unwrap()
    }

    /// `word;increments`, increments over `-0+`.
    pub fn to_word(&self) -> String {
        let inc: String = self.increments().iter().map(|&d| ['-', '0', '+'][(d + 1) as usize]).collect();
        format!("{};{}", self.tree.to_word(), inc)
    }

    pub fn from_word(s: &str) -> Result<Self> {
        let (w, i) = s.split_once(';').ok_or_else(|| Error::Parse("missing ';'".into()))?;
        let inc: Result<Vec<i8>> = i
            .chars()
            .map(|c| match c {
                '-' => Ok(-1),
                '0' => Ok(0),
                '+' => Ok(1),
                _ => Err(Error::Parse(format!("bad increment {c:?}"))),
            })
            .collect();
        LabeledTree::from_increments(PlaneTree::from_word(w)?, &inc?)
    }
}

/// Labels with i.i.d. uniform increments in {-1,0,1}.
pub fn uniform_labeling<R: Rng + ?Sized>(t: &PlaneTree, rng: &mut R) -> LabeledTree {
    let mut label = vec![0i64; t.num_vertices()];
    for v in 0..t.num_vertices() {
        for &c in t.children(v) {
            label[c] = label[v] + increment(rng);
        }
    }
    LabeledTree { tree: t.clone(), label }
}

/// All `3^|t|` labelings of `t`.
pub fn all_labelings(t: &PlaneTree) -> Vec<LabeledTree> {
    let e = t.num_edges();
    let mut out = Vec::with_capacity(3usize.pow(e as u32));
    let mut inc = vec![-1i8; e];
    loop {
        out.push(LabeledTree::from_increments(t.clone(), &inc).unwrap());
        let mut i = 0;
        loop {
            if i == e {
                return out;
            }
            if inc[i] < 1 {
                inc[i] += 1;
                break;
            }
            inc[i] = -1;
            i += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Forest {
    pub trees: Vec<LabeledTree>,
}

impl Forest {
    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn size(&self) -> usize {
        self.trees.iter().map(|t| t.tree.num_edges()).sum()
    }

    pub fn num_vertices(&self) -> usize {
        self.trees.iter().map(|t| t.tree.num_vertices()).sum()
    }

    pub fn unlabeled(trees: Vec<PlaneTree>) -> Self {
        Forest {
            trees: trees
                .into_iter()
                .map(|t| {
                    let n = t.num_vertices();
                    LabeledTree { tree: t, label: vec![0; n] }
                })
                .collect(),
        }
    }

    pub fn to_word(&self) -> String {
        self.trees.iter().map(|t| format!("[{}]", t.to_word())).collect()
    }

    pub fn from_word(s: &str) -> Result<Self> {
        let mut trees = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            let body = rest.strip_prefix('[').ok_or_else(|| Error::Parse("expected '['".into()))?;
            let end = body.find(']').ok_or_else(|| Error::Parse("expected ']'".into()))?;
            trees.push(LabeledTree::from_word(&body[..end])?);
            rest = &body[end + 1..];
        }
        Ok(Forest { trees })
    }
}

/// `σ/(2n+σ) · C(2n+σ, n)`, the number of forests of σ trees with n edges.
pub fn count_forests(n: usize, sigma: usize) -> BigUint {
    if sigma == 0 {
        return if n == 0 { BigUint::one() } else { BigUint::zero() };
    }
    binomial(2 * n + sigma, n) * BigUint::from(sigma) / BigUint::from(2 * n + sigma)
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

pub fn catalan(n: usize) -> BigUint {
    binomial(2 * n, n) / BigUint::from(n + 1)
}

/// All plane trees with `m` edges.
pub fn enumerate_trees(m: usize) -> Vec<PlaneTree> {
    fn words(m: usize) -> Vec<String> {
        if m == 0 {
            return vec![String::new()];
        }
        let mut out = Vec::new();
        for a in 0..m {
            for x in words(a) {
                for y in words(m - 1 - a) {
                    out.push(format!("({x}){y}"));
                }
            }
        }
        out
    }
    words(m).iter().map(|w| PlaneTree::from_word(w).unwrap()).collect()
}

/// Every forest of `sigma` trees with `n` edges in total, exactly once.
pub fn enumerate_forests(n: usize, sigma: usize, budget: usize) -> Result<Vec<Vec<PlaneTree>>> {
    if count_forests(n, sigma) > BigUint::from(budget) {
        return Err(Error::BudgetExceeded(format!("{} forests (n={n}, σ={sigma})", count_forests(n, sigma))));
    }
    let by_size: Vec<Vec<PlaneTree>> = (0..=n).map(enumerate_trees).collect();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(
        left: usize,
        slots: usize,
        by_size: &[Vec<PlaneTree>],
        cur: &mut Vec<PlaneTree>,
        out: &mut Vec<Vec<PlaneTree>>,
    ) {
        if slots == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for s in 0..=left {
            for t in &by_size[s] {
                cur.push(t.clone());
                rec(left - s, slots - 1, by_size, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, sigma, &by_size, &mut cur, &mut out);
    Ok(out)
}

/// Splits a forest contour step sequence (`+1` descend, `-1` ascend or move
/// to the next tree) into trees.
fn forest_from_steps(steps: &[i8]) -> Vec<PlaneTree> {
    let mut trees = Vec::new();
    let mut word = String::new();
    let mut h = 0i64;
    for &s in steps {
        if s > 0 {
            word.push('(');
            h += 1;
        } else if h == 0 {
            trees.push(PlaneTree::from_word(&word).unwrap());
            word.clear();
        } else {
            word.push(')');
            h -= 1;
        }
    }
    trees
}

/// Uniform forest of σ trees with n edges (cycle lemma): a uniform
/// arrangement of n up- and n+σ down-steps is rotated to start after its
/// first minimum, then the trees are rotated by a uniform offset.
pub fn sample_uniform_forest<R: Rng + ?Sized>(n: usize, sigma: usize, rng: &mut R) -> Result<Forest> {
    if sigma == 0 {
        return Err(Error::OutOfRange("σ = 0".into()));
    }
    let mut steps: Vec<i8> = std::iter::repeat_n(1, n).chain(std::iter::repeat_n(-1, n + sigma)).collect();
    steps.shuffle(rng);
    let (mut s, mut min, mut arg) = (0i64, 0i64, 0usize);
    for (i, &x) in steps.iter().enumerate() {
        s += x as i64;
        if s < min {
            min = s;
            arg = i + 1;
        }
    }
    let len = steps.len();
    steps.rotate_left(arg % len);
    let mut trees = forest_from_steps(&steps);
    let off = rng.gen_range(0..sigma);
    trees.rotate_left(off);
    Ok(Forest::unlabeled(trees))
}

/// Finite bridge `b(0..2σ-1)` with `b(0)=0`, unit steps and `b(2σ)=0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bridge {
    pub values: Vec<i64>,
}

impl Bridge {
    pub fn from_steps(steps: &[i8]) -> Result<Self> {
        if steps.iter().map(|&s| s as i64).sum::<i64>() != 0 || steps.iter().any(|s| s.abs() != 1) {
            return Err(Error::InvalidMap("not a bridge".into()));
        }
        let mut values = Vec::with_capacity(steps.len());
        let mut v = 0;
        for &s in steps {
            values.push(v);
            v += s as i64;
        }
        Ok(Bridge { values })
    }

    pub fn sigma(&self) -> usize {
        self.values.len() / 2
    }

    /// `b(i)` for `0 ≤ i ≤ 2σ` (with `b(2σ)=0`).
    pub fn at(&self, i: usize) -> i64 {
        if i == self.values.len() {
            0
        } else {
            self.values[i]
        }
    }

    pub fn steps(&self) -> Vec<i8> {
        (0..self.values.len()).map(|i| (self.at(i + 1) - self.at(i)) as i8).collect()
    }

    pub fn to_word(&self) -> String {
        self.steps().iter().map(|&s| if s > 0 { 'U' } else { 'D' }).collect()
    }

    pub fn from_word(w: &str) -> Result<Self> {
        let steps: Result<Vec<i8>> = w
            .chars()
            .map(|c| match c {
                'U' => Ok(1),
                'D' => Ok(-1),
                _ => Err(Error::Parse(format!("bad step {c:?}"))),
            })
            .collect();
        Bridge::from_steps(&steps?)
    }

    /// Down-steps `i` with `b(i+1) = b(i) - 1`, increasing.
    pub fn down_steps(&self) -> DownSteps {
        DownSteps {
            positive: (0..self.values.len()).filter(|&i| self.at(i + 1) < self.at(i)).map(|i| i as i64).collect(),
            negative: Vec::new(),
        }
    }
}

/// All `C(2σ,σ)` bridges of length 2σ.
pub fn enumerate_bridges(sigma: usize) -> Vec<Bridge> {
    let n = 2 * sigma;
    (0u64..1 << n)
        .filter(|m| m.count_ones() as usize == sigma)
        .map(|m| Bridge::from_steps(&(0..n).map(|i| if m >> i & 1 == 1 { 1 } else { -1 }).collect::<Vec<_>>()).unwrap())
        .collect()
}

pub fn sample_uniform_bridge<R: Rng + ?Sized>(sigma: usize, rng: &mut R) -> Bridge {
    let mut steps: Vec<i8> = std::iter::repeat_n(1, sigma).chain(std::iter::repeat_n(-1, sigma)).collect();
    steps.shuffle(rng);
    Bridge::from_steps(&steps).unwrap()
}

/// Positive down-steps are listed increasingly (`d↓(i) = positive[i-1]`),
/// negative ones by decreasing index (`d↓(-i) = negative[i-1]`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DownSteps {
    pub positive: Vec<i64>,
    pub negative: Vec<i64>,
}

impl DownSteps {
    /// `d↓(i)` for `i ≠ 0`.
    pub fn get(&self, i: i64) -> Option<i64> {
        if i > 0 {
            self.positive.get(i as usize - 1).copied()
        } else if i < 0 {
            self.negative.get((-i) as usize - 1).copied()
        } else {
            None
        }
    }
}

/// Window of a two-sided simple random walk with `b(0)=0`:
/// `right[k] = b(k)`, `left[k] = b(-k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoSidedBridge {
    pub right: Vec<i64>,
    pub left: Vec<i64>,
}

impl TwoSidedBridge {
    pub fn at(&self, i: i64) -> i64 {
        if i >= 0 {
            self.right[i as usize]
        } else {
            self.left[(-i) as usize]
        }
    }

    pub fn range(&self) -> (i64, i64) {
        (-(self.left.len() as i64 - 1), self.right.len() as i64 - 1)
    }

    pub fn down_steps(&self) -> DownSteps {
        let (lo, hi) = self.range();
        DownSteps {
            positive: (0..hi).filter(|&i| self.at(i + 1) < self.at(i)).collect(),
            negative: (lo..0).rev().filter(|&i| self.at(i + 1) < self.at(i)).collect(),
        }
    }

    pub fn min_right(&self) -> i64 {
        *self.right.iter().min().unwrap()
    }

    pub fn min_left(&self) -> i64 {
        *self.left.iter().min().unwrap()
    }
}

/// Two-sided walk window: each side runs until its running minimum first
/// goes below `-stop_min`.
pub fn sample_infinite_bridge_window<R: Rng + ?Sized>(stop_min: i64, rng: &mut R) -> TwoSidedBridge {
    let side = |rng: &mut R| {
        let mut v = vec![0i64];
        while *v.last().unwrap() >= -stop_min {
            let x = *v.last().unwrap() + if rng.gen::<bool>() { 1 } else { -1 };
            v.push(x);
        }
        v
    };
    let right = side(rng);
    let left = side(rng);
    TwoSidedBridge { right, left }
}

/// Contour and shifted label functions sampled at integer times `0..=N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContourLabelPair {
    pub c: Vec<i64>,
    pub l: Vec<i64>,
}

/// One contour corner of a forest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Corner {
    pub tree: usize,
    pub vertex: usize,
    pub height: usize,
}

/// Contour corners of a forest, `2|f| + σ` of them.
pub fn forest_corners(f: &Forest) -> Vec<Corner> {
    let mut out = Vec::with_capacity(2 * f.size() + f.num_trees());
    for (i, t) in f.trees.iter().enumerate() {
        let d = t.tree.depths();
        out.extend(t.tree.contour().into_iter().map(|v| Corner { tree: i, vertex: v, height: d[v] }));
    }
    out
}

/// `C(j) = H(f(j)) - I(f(j))` and `L(j) = l(f(j)) + b(d↓(I+1))`, with the
/// end values `C(N) = -σ`, `L(N) = 0`.
pub fn contour_label(f: &Forest, b: &Bridge) -> Result<ContourLabelPair> {
    if f.num_trees() != b.sigma() || f.num_trees() == 0 {
        return Err(Error::DimensionMismatch(format!("{} trees, bridge of length {}", f.num_trees(), b.values.len())));
    }
    let ds = b.down_steps();
    let corners = forest_corners(f);
    let mut c = Vec::with_capacity(corners.len() + 1);
    let mut l = Vec::with_capacity(corners.len() + 1);
    for k in &corners {
        c.push(k.height as i64 - k.tree as i64);
        let shift = b.at(ds.positive[k.tree] as usize);
        l.push(f.trees[k.tree].label[k.vertex] + shift);
    }
    c.push(-(f.num_trees() as i64));
    l.push(0);
    Ok(ContourLabelPair { c, l })
}

/// A looptree: a planar map whose inner faces are the loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Looptree {
    pub map: HalfEdgeMap,
}

/// Loop(t): each odd-height vertex of degree d becomes a loop of length d
/// through its parent and children. Rooted at the edge from the root to the
/// last child of its first child, with that loop on the left.
pub fn loop_of(t: &PlaneTree) -> Looptree {
    loop_with_roots(t).0
}

/// [`loop_of`] together with, for every odd-height vertex `u`, the root of
/// its loop: the half-edge leaving the parent of `u` with the loop on its
/// left.
pub fn loop_with_roots(t: &PlaneTree) -> (Looptree, Vec<Option<usize>>) {
    if t.root_degree() == 0 {
        return (Looptree { map: HalfEdgeMap::vertex_map() }, vec![None]);
    }
    let depth = t.depths();
    let parent = t.parents();
    let n = t.num_vertices();
    // per black u: first edge id
    let mut first_edge = vec![usize::MAX; n];
    let mut e = 0;
    for u in 0..n {
        if depth[u] % 2 == 1 {
            first_edge[u] = e;
            e += t.children(u).len() + 1;
        }
    }
    let h = 2 * e;
    let alpha: Vec<usize> = (0..h).map(|x| x ^ 1).collect();
    let start = |u: usize, i: usize| 2 * (first_edge[u] + i);
    let end = |u: usize, i: usize| 2 * (first_edge[u] + i) + 1;
    let mut rot = vec![0; h];
    for w in 0..n {
        if depth[w] % 2 == 1 {
            continue;
        }
        let mut list = Vec::new();
        let mut tail = None;
        if w != 0 {
            let u = parent[w].unwrap();
            let i = t.children(u).iter().position(|&c| c == w).unwrap() + 1;
            list.push(end(u, i - 1));
            tail = Some(start(u, i));
        }
        for &u in t.children(w) {
            let k = t.children(u).len();
            list.push(start(u, 0));
            list.push(end(u, k));
        }
        list.extend(tail);
        for j in 0..list.len() {
            rot[list[j]] = list[(j + 1) % list.len()];
        }
    }
    let u1 = t.children(0)[0];
    let root = end(u1, t.children(u1).len());
    let roots = (0..n).map(|u| (depth[u] % 2 == 1).then(|| end(u, t.children(u).len()))).collect();
    (Looptree { map: HalfEdgeMap::new(alpha, rot, Some(root)) }, roots)
}

/// Tree(l), the inverse of [`loop_of`].
pub fn tree_of(l: &Looptree) -> Result<PlaneTree> {
    let m = &l.map;
    if m.is_vertex_map() {
        return Ok(PlaneTree::singleton());
    }
    let root = m.root().ok_or_else(|| Error::MalformedLooptree("no root".into()))?;
    let faces = m.faces();
    let verts = m.vertices();
    let outer = faces.of[m.alpha(root)];
    let mut face_seen = vec![false; faces.cycles.len()];
    let mut vert_seen = vec![false; verts.cycles.len()];
    face_seen[outer] = true;
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    // (tree node, first half-edge to scan, stop half-edge, parent loop face)
    let mut queue = VecDeque::new();
    vert_seen[verts.of[root]] = true;
    queue.push_back((0usize, root, root, usize::MAX));
    while let Some((node, first, stop, pface)) = queue.pop_front() {
        let mut g = first;
        loop {
            let f = faces.of[g];
            if f != outer && f != pface {
                if face_seen[f] {
                    return Err(Error::MalformedLooptree(format!("loop {f} attached twice")));
                }
                face_seen[f] = true;
                let black = children.len();
                children.push(Vec::new());
                children[node].push(black);
                let mut orbit = vec![g];
                let mut x = m.phi(g);
                while x != g {
                    orbit.push(x);
                    x = m.phi(x);
                }
                for &y in orbit[1..].iter().rev() {
                    let v = verts.of[y];
                    if vert_seen[v] {
                        return Err(Error::MalformedLooptree(format!("vertex {v} on two loops' paths")));
                    }
                    vert_seen[v] = true;
                    let c = children.len();
                    children.push(Vec::new());
                    children[black].push(c);
                    queue.push_back((c, m.rot(y), y, f));
                }
            }
            g = m.rot(g);
            if g == stop {
                break;
            }
        }
    }
    if face_seen.iter().any(|s| !s) || vert_seen.iter().any(|s| !s) {
        return Err(Error::MalformedLooptree("unreached faces or vertices".into()));
    }
    Ok(PlaneTree::from_children(&children, 0).0)
}

/// Exact comparison of the first `k` trees of a uniform forest of σ trees
/// with n edges against k i.i.d. p-GW trees, over all tuples of total size
/// ≤ `cap`.
#[derive(Clone, Debug)]
pub struct PrefixLaw {
    /// Σ |P−Q| / 2 over the enumerated tuples.
    pub tv_enumerated: BigRational,
    pub residual_p: BigRational,
    pub residual_q: BigRational,
    /// `tv_enumerated + |residual_p − residual_q| / 2 ≤ TV`.
    pub tv_lower: BigRational,
}

pub fn exact_prefix_law_tv(n: usize, sigma: usize, k: usize, p: &BigRational, cap: usize) -> Result<PrefixLaw> {
    if k > sigma || sigma == 0 {
        return Err(Error::OutOfRange(format!("k = {k}, σ = {sigma}")));
    }
    // number of size vectors, bounded by C(cap + k, k)
    if binomial(cap + k, k) > BigUint::from(10_000_000u64) {
        return Err(Error::BudgetExceeded(format!("cap {cap}, k {k}")));
    }
    let total = BigRational::from_integer(BigInt::from(count_forests(n, sigma)));
    let q1 = BigRational::one() - p;
    let cat: Vec<BigInt> = (0..=cap).map(|s| BigInt::from(catalan(s))).collect();
    // number of k-tuples with total size v: coefficient of the k-th
    // convolution power of the Catalan series
    let mut poly = vec![BigInt::zero(); cap + 1];
    poly[0] = BigInt::one();
    for _ in 0..k {
        let mut next = vec![BigInt::zero(); cap + 1];
        for (a, x) in poly.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for s in 0..=cap - a {
                next[a + s] += x * &cat[s];
            }
        }
        poly = next;
    }
    let mut tv = BigRational::zero();
    let mut mass_p = BigRational::zero();
    let mut mass_q = BigRational::zero();
    for (v, mult) in poly.iter().enumerate() {
        if mult.is_zero() {
            continue;
        }
        let pv = if v <= n {
            BigRational::from_integer(BigInt::from(count_forests(n - v, sigma - k))) / &total
        } else {
            BigRational::zero()
        };
        let qv = num_traits::pow::pow(p.clone(), v) * num_traits::pow::pow(q1.clone(), v + k);
        let m = BigRational::from_integer(mult.clone());
        tv += (&pv - &qv).abs() * &m;
        mass_p += &pv * &m;
        mass_q += &qv * &m;
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let tv = tv * &half;
    let rp = BigRational::one() - mass_p;
    let rq = BigRational::one() - mass_q;
    let lower = &tv + (&rp - &rq).abs() * &half;
    Ok(PrefixLaw { tv_enumerated: tv, residual_p: rp, residual_q: rq, tv_lower: lower })
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use std::collections::HashMap;

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn words_round_trip() {
        for m in 0..5 {
            for t in enumerate_trees(m) {
                assert_eq!(PlaneTree::from_word(&t.to_word()).unwrap(), t);
                assert_eq!(PlaneTree::from_preorder_degrees(&t.preorder_degrees()).unwrap(), t);
                assert_eq!(t.contour().len(), 2 * m + 1);
            }
        }
        assert!(PlaneTree::from_word("(()").is_err());
    }

    #[test]
    fn gw_probabilities() {
        assert_eq!(gw_probability(&PlaneTree::singleton(), &rat(1, 2)), rat(1, 2));
        assert_eq!(gw_probability(&PlaneTree::from_word("()").unwrap(), &rat(1, 2)), rat(1, 8));
        for t in enumerate_trees(2) {
            assert_eq!(gw_probability(&t, &rat(1, 3)), rat(8, 243));
        }
        // Σ_{|t| ≤ 6} at p = 1/4 vs simulated tail
        let p = rat(1, 4);
        let s: BigRational = (0..=6).flat_map(enumerate_trees).map(|t| gw_probability(&t, &p)).sum();
        let deficit = to_f64(&(BigRational::one() - s));
        let mut r = Stream::new(3).rng();
        let n = 100_000;
        let big = (0..n).filter(|_| sample_gw_geometric(0.25, 1000, &mut r).unwrap().num_edges() > 6).count();
        let f = big as f64 / n as f64;
        assert!((f - deficit).abs() < 3.0 * (deficit / n as f64).sqrt() + 1e-4, "{f} vs {deficit}");
    }

    #[test]
    fn gw_sampler_moments() {
        let mut r = Stream::new(1).rng();
        assert_eq!(sample_gw_geometric(0.0, 10, &mut r).unwrap(), PlaneTree::singleton());
        let n = 100_000;
        let mean = (0..n).map(|_| sample_gw_geometric(0.25, 1000, &mut r).unwrap().root_degree() as f64).sum::<f64>()
            / n as f64;
        // variance of μ_p is p/(1-p)^2
        let sd = (0.25f64 / 0.75 / 0.75 / n as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 3.0 * sd, "{mean} {sd}");
        assert!(matches!(sample_gw_geometric(0.7, 10, &mut r), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn two_type_and_caps() {
        let mut r = Stream::new(9).rng();
        let t = sample_two_type_gw(&Offspring::Dirac(0), &Offspring::Dirac(3), 10, &mut r).unwrap();
        assert_eq!(t, PlaneTree::singleton());
        assert!(matches!(
            sample_two_type_gw(&Offspring::Dirac(1), &Offspring::Dirac(1), 50, &mut r),
            Err(Error::SizeCapExceeded(50))
        ));
        // 3-vertex path has probability ν◦(1) ν•(1) ν◦(0)
        let nc = Offspring::Geometric(0.5);
        let nb = Offspring::table(vec![0.5, 0.5]);
        let n = 100_000;
        let path = PlaneTree::from_word("(())").unwrap();
        let hits = (0..n).filter(|_| sample_two_type_gw(&nc, &nb, 10_000, &mut r).unwrap() == path).count();
        let prob = 0.25 * 0.5 * 0.5;
        let f = hits as f64 / n as f64;
        assert!((f - prob).abs() < 3.0 * (prob * (1.0 - prob) / n as f64).sqrt());
    }

    #[test]
    fn kesten_spines() {
        let mut r = Stream::new(11).rng();
        let k = sample_kesten_two_type(&Offspring::Geometric(0.5), &Offspring::Dirac(1), 0, &mut r).unwrap();
        assert_eq!(k.tree, PlaneTree::singleton());
        assert_eq!(k.spine, vec![0]);
        let n = 20_000;
        let mut hist = HashMap::new();
        for _ in 0..n {
            let k = sample_kesten_two_type(&Offspring::Geometric(0.5), &Offspring::Dirac(1), 6, &mut r).unwrap();
            assert_eq!(k.spine.len(), 7);
            let d = k.tree.depths();
            for (i, &s) in k.spine.iter().enumerate() {
                assert_eq!(d[s], i);
                if i % 2 == 1 && i < 6 {
                    assert_eq!(k.tree.children(s).len(), 1);
                }
            }
            *hist.entry(k.tree.root_degree()).or_insert(0usize) += 1;
        }
        for kk in 1..5usize {
            let prob = kk as f64 * 0.5f64.powi(kk as i32 + 1);
            let f = *hist.get(&kk).unwrap_or(&0) as f64 / n as f64;
            assert!((f - prob).abs() < 3.0 * (prob * (1.0 - prob) / n as f64).sqrt() + 1e-3, "{kk}: {f} {prob}");
        }
        assert!(matches!(
            sample_kesten_two_type(&Offspring::Geometric(0.4), &Offspring::Dirac(1), 2, &mut r),
            Err(Error::NonCriticalPair(_))
        ));
    }

    #[test]
    fn geometric_spine() {
        let mut r = Stream::new(13).rng();
        let n = 20_000;
        let mut tot = 0;
        for _ in 0..n {
            let g = sample_kesten_geometric_spine(5, &mut r).unwrap();
            assert_eq!(g.spine.len(), 6);
            assert!(g.tree.height() <= 5);
            tot += g.left[0] + g.right[0];
        }
        let m = tot as f64 / n as f64;
        assert!((m - 2.0).abs() < 3.0 * (4.0f64 / n as f64).sqrt());
    }

    #[test]
    fn labelings() {
        let mut r = Stream::new(1).rng();
        assert_eq!(uniform_labeling(&PlaneTree::singleton(), &mut r).label, vec![0]);
        for m in 0..=3 {
            for t in enumerate_trees(m) {
                let all = all_labelings(&t);
                assert_eq!(all.len(), 3usize.pow(m as u32));
                let set: std::collections::HashSet<_> = all.iter().collect();
                assert_eq!(set.len(), all.len());
                assert!(all.iter().all(|l| l.is_well_labeled()));
                for l in &all {
                    assert_eq!(&LabeledTree::from_word(&l.to_word()).unwrap(), l);
                }
            }
        }
        let e = PlaneTree::from_word("()").unwrap();
        let n = 30_000;
        let mut c = [0usize; 3];
        for _ in 0..n {
            c[(uniform_labeling(&e, &mut r).label[1] + 1) as usize] += 1;
        }
        for x in c {
            let f = x as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 3.0 * (2.0 / 9.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn forest_counts() {
        assert_eq!(count_forests(0, 1), BigUint::one());
        assert_eq!(count_forests(1, 2), BigUint::from(2u32));
        assert_eq!(count_forests(2, 1), BigUint::from(2u32));
        for n in 0..=4 {
            for s in 1..=3 {
                let all = enumerate_forests(n, s, 1_000_000).unwrap();
                assert_eq!(BigUint::from(all.len()), count_forests(n, s));
                let set: std::collections::HashSet<_> = all.iter().collect();
                assert_eq!(set.len(), all.len());
            }
        }
        assert!(enumerate_forests(30, 30, 100).is_err());
    }

    #[test]
    fn uniform_forest_chi_square() {
        let mut r = Stream::new(17).rng();
        let all = enumerate_forests(2, 2, 100).unwrap();
        let n = 50_000;
        let mut h: HashMap<Vec<PlaneTree>, usize> = HashMap::new();
        for _ in 0..n {
            let f = sample_uniform_forest(2, 2, &mut r).unwrap();
            assert_eq!(f.size(), 2);
            *h.entry(f.trees.into_iter().map(|t| t.tree).collect()).or_default() += 1;
        }
        assert_eq!(h.len(), all.len());
        let e = n as f64 / all.len() as f64;
        let chi: f64 = all.iter().map(|f| (h[f] as f64 - e).powi(2) / e).sum();
        // 4 degrees of freedom, 1% critical value 13.28
        assert!(chi < 13.28, "chi2 = {chi}");
        let f = sample_uniform_forest(0, 4, &mut r).unwrap();
        assert!(f.trees.iter().all(|t| t.tree.num_edges() == 0));
    }

    #[test]
    fn bridges_and_down_steps() {
        let up = Bridge::from_word("UD").unwrap();
        assert_eq!(up.values, vec![0, 1]);
        assert_eq!(up.down_steps().positive, vec![1]);
        assert_eq!(up.down_steps().get(1), Some(1));
        let down = Bridge::from_word("DU").unwrap();
        assert_eq!(down.down_steps().positive, vec![0]);
        assert_eq!(enumerate_bridges(2).len(), 6);
        let mut r = Stream::new(2).rng();
        let mut h: HashMap<String, usize> = HashMap::new();
        let n = 60_000;
        for _ in 0..n {
            let b = sample_uniform_bridge(2, &mut r);
            assert_eq!(b.down_steps().positive.len(), 2);
            *h.entry(b.to_word()).or_default() += 1;
        }
        let e = n as f64 / 6.0;
        let chi: f64 = h.values().map(|&x| (x as f64 - e).powi(2) / e).sum();
        assert!(h.len() == 6 && chi < 15.09);
        let w = sample_infinite_bridge_window(1, &mut r);
        assert!(w.min_left() < -1 && w.min_right() < -1);
        let ds = w.down_steps();
        if let Some(d) = ds.get(-1) {
            assert!(d < 0 && w.at(d + 1) < w.at(d));
            assert!((d + 1..0).all(|i| w.at(i + 1) > w.at(i)));
        }
    }

    #[test]
    fn contour_label_examples() {
        let f = Forest { trees: vec![LabeledTree::singleton()] };
        let cl = contour_label(&f, &Bridge::from_word("UD").unwrap()).unwrap();
        assert_eq!(cl.c, vec![0, -1]);
        assert_eq!(cl.l, vec![1, 0]);
        let f = Forest { trees: vec![LabeledTree::singleton(); 3] };
        let b = Bridge::from_word("UDUDDU").unwrap();
        let cl = contour_label(&f, &b).unwrap();
        assert_eq!(cl.c, vec![0, -1, -2, -3]);
        assert!(contour_label(&f, &Bridge::from_word("UD").unwrap()).is_err());
    }

    #[test]
    fn looptree_round_trips() {
        let t = PlaneTree::from_word("(())").unwrap();
        let l = loop_of(&t);
        assert!(l.map.is_valid());
        assert_eq!(l.map.num_edges(), 2);
        assert_eq!(l.map.num_vertices(), 2);
        assert_eq!(tree_of(&l).unwrap(), t);
        assert!(loop_of(&PlaneTree::singleton()).map.is_vertex_map());
        for m in 0..=6 {
            for t in enumerate_trees(m) {
                let l = loop_of(&t);
                assert!(l.map.is_vertex_map() || l.map.is_valid(), "{t:?}");
                assert_eq!(tree_of(&l).unwrap(), t);
            }
        }
    }

    #[test]
    fn prefix_law() {
        let p = rat(1, 3);
        let z = exact_prefix_law_tv(0, 3, 2, &p, 4).unwrap();
        assert_eq!(z.tv_lower, BigRational::one() - rat(4, 9));
        // k = σ and cap ≥ n: conditional law is uniform over forests
        let full = exact_prefix_law_tv(2, 2, 2, &p, 2).unwrap();
        assert!(full.residual_p.is_zero());
        let v: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&n| to_f64(&exact_prefix_law_tv(n, n, 1, &p, 12).unwrap().tv_lower))
            .collect();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    }
}

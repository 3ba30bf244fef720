//! Antipole tree: a binary metric index built by splitting on approximate
//! farthest pairs until clusters fall under a diameter threshold.
//!
//! Construction uses randomized tournaments for both the 1-median (cluster
//! centroid) and the antipole pair. Range and k-nearest-neighbor queries use
//! the triangle inequality to skip subtrees and leaf members, and return
//! exactly what a linear scan would.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

pub type PointId = u64;

/// A distance function satisfying the metric axioms. Pruning is only exact
/// when the triangle inequality holds.
pub trait Metric<T: ?Sized> {
    fn distance(&self, a: &T, b: &T) -> f64;
}

impl<T: ?Sized, F> Metric<T> for F
where
    F: Fn(&T, &T) -> f64,
{
    fn distance(&self, a: &T, b: &T) -> f64 {
        self(a, b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricPoint<T> {
    pub id: PointId,
    pub value: T,
}

impl<T> MetricPoint<T> {
    pub fn new(id: PointId, value: T) -> Self {
        Self { id, value }
    }
}

/// Relative slack on pruning comparisons so rounding in the stored radii
/// never drops a point a linear scan would return.
const SLACK: f64 = 1e-12;

#[inline]
fn slack(scale: f64) -> f64 {
    SLACK * scale.abs().max(1.0)
}

/// Points plus a metric, with a distance-call counter.
struct Space<'a, T, M> {
    points: &'a [MetricPoint<T>],
    metric: &'a M,
    calls: Cell<u64>,
}

impl<'a, T, M: Metric<T>> Space<'a, T, M> {
    fn new(points: &'a [MetricPoint<T>], metric: &'a M) -> Self {
        Self {
            points,
            metric,
            calls: Cell::new(0),
        }
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.calls.set(self.calls.get() + 1);
        self.metric
            .distance(&self.points[i].value, &self.points[j].value)
    }

    fn dist_to(&self, q: &T, i: usize) -> f64 {
        self.calls.set(self.calls.get() + 1);
        self.metric.distance(q, &self.points[i].value)
    }

    fn id(&self, i: usize) -> PointId {
        self.points[i].id
    }

    /// Member of `set` with the smallest distance sum, ties to the smallest id.
    fn median(&self, set: &[usize]) -> usize {
        let n = set.len();
        let mut sums = vec![0.0; n];
        for a in 0..n {
            for b in a + 1..n {
                let d = self.dist(set[a], set[b]);
                sums[a] += d;
                sums[b] += d;
            }
        }
        let mut best = 0;
        for k in 1..n {
            let better = match sums[k].total_cmp(&sums[best]) {
                Ordering::Less => true,
                Ordering::Equal => self.id(set[k]) < self.id(set[best]),
                Ordering::Greater => false,
            };
            if better {
                best = k;
            }
        }
        set[best]
    }

    fn local_winner(&self, set: &[usize]) -> Vec<usize> {
        let m = self.median(set);
        let mut out = set.to_vec();
        let pos = out
            .iter()
            .position(|&i| i == m)
            .expect("median is a member");
        out.remove(pos);
        out
    }

    /// Farthest pair of `set`, ties to the lexicographically smallest id pair.
    /// The pair is returned with the smaller id first.
    fn farthest_pair(&self, set: &[usize]) -> (usize, usize) {
        let key = |i: usize, j: usize| {
            let (a, b) = (self.id(i), self.id(j));
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        };
        let mut best = (set[0], set[1]);
        let mut best_d = f64::NEG_INFINITY;
        for a in 0..set.len() {
            for b in a + 1..set.len() {
                let (i, j) = (set[a], set[b]);
                let d = self.dist(i, j);
                let better = match d.total_cmp(&best_d) {
                    Ordering::Greater => true,
                    Ordering::Equal => key(i, j) < key(best.0, best.1),
                    Ordering::Less => false,
                };
                if better {
                    best = (i, j);
                    best_d = d;
                }
            }
        }
        if self.id(best.0) <= self.id(best.1) {
            best
        } else {
            (best.1, best.0)
        }
    }

    fn approx_median(
        &self,
        set: &[usize],
        tau: usize,
        threshold: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let mut s = set.to_vec();
        while s.len() > threshold {
            s.shuffle(rng);
            let mut winners = Vec::with_capacity(s.len() / tau + 1);
            let mut rest = &s[..];
            while rest.len() >= 2 * tau {
                let (t, r) = rest.split_at(tau);
                winners.push(self.median(t));
                rest = r;
            }
            winners.push(self.median(rest));
            s = winners;
        }
        self.median(&s)
    }

    fn approx_antipole(
        &self,
        set: &[usize],
        tau: usize,
        threshold: usize,
        rng: &mut ChaCha8Rng,
    ) -> (usize, usize) {
        let mut s = set.to_vec();
        while s.len() > threshold {
            s.shuffle(rng);
            let mut winners = Vec::with_capacity(s.len());
            let mut rest = &s[..];
            while rest.len() >= 2 * tau {
                let (t, r) = rest.split_at(tau);
                winners.extend(self.local_winner(t));
                rest = r;
            }
            winners.extend(self.local_winner(rest));
            s = winners;
        }
        self.farthest_pair(&s)
    }
}

fn all_indices(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn check_tournament(tau: usize, threshold: usize) -> Result<()> {
    if tau < 3 {
        return Err(invalid(format!(
            "tournament size must be at least 3, got {tau}"
        )));
    }
    if threshold < 2 * tau {
        return Err(invalid(format!(
            "tournament threshold {threshold} must be at least twice the tournament size {tau}"
        )));
    }
    Ok(())
}

/// Index of the point minimizing the sum of distances to all others.
pub fn exact_1_median<T, M: Metric<T>>(points: &[MetricPoint<T>], metric: &M) -> Result<usize> {
    if points.is_empty() {
        return Err(invalid("1-median of an empty set"));
    }
    Ok(Space::new(points, metric).median(&all_indices(points.len())))
}

/// Tournament approximation of the 1-median. Always returns a member index.
pub fn approx_1_median<T, M: Metric<T>>(
    points: &[MetricPoint<T>],
    metric: &M,
    tau: usize,
    small_threshold: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    if points.is_empty() {
        return Err(invalid("1-median of an empty set"));
    }
    check_tournament(tau, small_threshold)?;
    Ok(Space::new(points, metric).approx_median(
        &all_indices(points.len()),
        tau,
        small_threshold,
        rng,
    ))
}

/// Indices of `points` with its exact 1-median removed.
pub fn local_winner<T, M: Metric<T>>(points: &[MetricPoint<T>], metric: &M) -> Result<Vec<usize>> {
    if points.len() < 2 {
        return Err(invalid("local winner needs at least two points"));
    }
    Ok(Space::new(points, metric).local_winner(&all_indices(points.len())))
}

/// Exact farthest pair by pairwise scan.
pub fn find_antipole<T, M: Metric<T>>(
    points: &[MetricPoint<T>],
    metric: &M,
) -> Result<(usize, usize)> {
    if points.len() < 2 {
        return Err(invalid("antipole pair needs at least two points"));
    }
    Ok(Space::new(points, metric).farthest_pair(&all_indices(points.len())))
}

/// Tournament approximation of the farthest pair. Both indices are members.
pub fn approx_antipole<T, M: Metric<T>>(
    points: &[MetricPoint<T>],
    metric: &M,
    tau: usize,
    threshold: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, usize)> {
    if points.len() < 2 {
        return Err(invalid("antipole pair needs at least two points"));
    }
    check_tournament(tau, threshold)?;
    Ok(Space::new(points, metric).approx_antipole(&all_indices(points.len()), tau, threshold, rng))
}

/// Construction parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeParams {
    /// Tournament size.
    pub tau: usize,
    /// Clusters whose approximate diameter is at most `sigma` are not split.
    /// `None` uses the median pairwise distance of a 100-point sample.
    pub sigma: Option<f64>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            tau: 3,
            sigma: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    /// Set size at or below which tournaments fall back to exact scans.
    pub fn small_threshold(&self) -> usize {
        3 * self.tau
    }
}

/// Median pairwise distance over a random sample of up to `sample` points.
/// Falls back to the smallest positive sampled distance, then to 1, so the
/// result is always strictly positive.
pub fn sample_median_distance<T, M: Metric<T>>(
    points: &[MetricPoint<T>],
    metric: &M,
    sample: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let picked: Vec<&MetricPoint<T>> = points
        .choose_multiple(rng, sample.min(points.len()))
        .collect();
    let mut ds = Vec::with_capacity(picked.len() * picked.len() / 2);
    for a in 0..picked.len() {
        for b in a + 1..picked.len() {
            ds.push(metric.distance(&picked[a].value, &picked[b].value));
        }
    }
    if ds.is_empty() {
        return 1.0;
    }
    ds.sort_by(f64::total_cmp);
    let median = ds[ds.len() / 2];
    if median > 0.0 {
        median
    } else {
        ds.into_iter().find(|&d| d > 0.0).unwrap_or(1.0)
    }
}

/// A final cluster: members (point indices), their 1-median and each member's
/// distance to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub centroid: usize,
    pub radius: f64,
    pub member_dist: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Internal {
        a: usize,
        b: usize,
        rad_a: f64,
        rad_b: f64,
        left: usize,
        right: usize,
    },
    Leaf(Cluster),
}

/// An immutable Antipole tree. Nodes live in a preorder arena with the root
/// at index 0; node and cluster fields refer to indices into `points`.
#[derive(Clone, Debug)]
pub struct AntipoleTree<T> {
    points: Vec<MetricPoint<T>>,
    nodes: Vec<Node>,
    sigma: f64,
    build_calls: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeHit {
    pub index: usize,
    pub id: PointId,
    /// Exact distance, or the upper bound `d(q, centroid) + d(m, centroid)`
    /// when the member was admitted without evaluating the metric.
    pub distance: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RangeResult {
    /// Hits ordered by id.
    pub hits: Vec<RangeHit>,
    pub distance_calls: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub id: PointId,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnResult {
    /// Ascending by distance, ties by id.
    pub neighbors: Vec<Neighbor>,
    pub distance_calls: u64,
}

impl<T> AntipoleTree<T> {
    pub fn build<M: Metric<T>>(
        points: Vec<MetricPoint<T>>,
        params: &TreeParams,
        metric: &M,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("cannot build a tree over an empty set"));
        }
        check_tournament(params.tau, params.small_threshold())?;
        let mut seen = std::collections::HashSet::with_capacity(points.len());
        if let Some(p) = points.iter().find(|p| !seen.insert(p.id)) {
            return Err(invalid(format!("duplicate point id {}", p.id)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let sigma = match params.sigma {
            Some(s) if s > 0.0 && s.is_finite() => s,
            Some(s) => return Err(invalid(format!("sigma must be positive, got {s}"))),
            None => sample_median_distance(&points, metric, 100, &mut rng),
        };

        let space = Space::new(&points, metric);
        let tau = params.tau;
        let threshold = params.small_threshold();
        let mut nodes: Vec<Node> = Vec::new();
        // (subset, parent node, is-left-child)
        let mut stack: Vec<(Vec<usize>, Option<(usize, bool)>)> =
            vec![(all_indices(points.len()), None)];

        while let Some((set, parent)) = stack.pop() {
            let idx = nodes.len();
            if let Some((p, is_left)) = parent {
                if let Node::Internal { left, right, .. } = &mut nodes[p] {
                    if is_left {
                        *left = idx;
                    } else {
                        *right = idx;
                    }
                }
            }

            let split = if set.len() <= 2 {
                None
            } else {
                let (a, b) = space.approx_antipole(&set, tau, threshold, &mut rng);
                let dab = space.dist(a, b);
                (dab > sigma).then_some((a, b))
            };

            match split {
                None => {
                    let centroid = space.approx_median(&set, tau, threshold, &mut rng);
                    let member_dist: Vec<f64> =
                        set.iter().map(|&m| space.dist(m, centroid)).collect();
                    let radius = member_dist.iter().copied().fold(0.0, f64::max);
                    nodes.push(Node::Leaf(Cluster {
                        members: set,
                        centroid,
                        radius,
                        member_dist,
                    }));
                }
                Some((a, b)) => {
                    let mut left = vec![a];
                    let mut right = vec![b];
                    let (mut rad_a, mut rad_b) = (0.0f64, 0.0f64);
                    for &p in &set {
                        if p == a || p == b {
                            continue;
                        }
                        let (da, db) = (space.dist(p, a), space.dist(p, b));
                        if da <= db {
                            left.push(p);
                            rad_a = rad_a.max(da);
                        } else {
                            right.push(p);
                            rad_b = rad_b.max(db);
                        }
                    }
                    nodes.push(Node::Internal {
                        a,
                        b,
                        rad_a,
                        rad_b,
                        left: usize::MAX,
                        right: usize::MAX,
                    });
                    stack.push((right, Some((idx, false))));
                    stack.push((left, Some((idx, true))));
                }
            }
        }

        let build_calls = space.calls.get();
        Ok(Self {
            points,
            nodes,
            sigma,
            build_calls,
        })
    }

    /// Reassembles a tree from stored parts, checking structural consistency:
    /// valid links, every point in exactly one leaf, centroids among members.
    pub fn from_parts(points: Vec<MetricPoint<T>>, nodes: Vec<Node>, sigma: f64) -> Result<Self> {
        if points.is_empty() || nodes.is_empty() {
            return Err(invalid("tree needs at least one point and one node"));
        }
        let n = points.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        let mut visited = 0usize;
        while let Some(i) = stack.pop() {
            visited += 1;
            if visited > nodes.len() {
                return Err(invalid("tree links form a cycle"));
            }
            match nodes
                .get(i)
                .ok_or_else(|| invalid(format!("dangling node link {i}")))?
            {
                Node::Internal {
                    a,
                    b,
                    rad_a,
                    rad_b,
                    left,
                    right,
                } => {
                    if *a >= n || *b >= n || !(*rad_a >= 0.0) || !(*rad_b >= 0.0) {
                        return Err(invalid(format!("malformed internal node {i}")));
                    }
                    if *left <= i || *right <= i {
                        return Err(invalid(format!("node {i} is not in preorder")));
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf(c) => {
                    if c.members.is_empty()
                        || c.members.len() != c.member_dist.len()
                        || !c.members.contains(&c.centroid)
                    {
                        return Err(invalid(format!("malformed leaf {i}")));
                    }
                    for (&m, &d) in c.members.iter().zip(&c.member_dist) {
                        if m >= n || seen[m] {
                            return Err(invalid(format!(
                                "point {m} missing or repeated across leaves"
                            )));
                        }
                        if !(d >= 0.0) || d > c.radius {
                            return Err(invalid(format!(
                                "leaf {i} member distance exceeds its radius"
                            )));
                        }
                        seen[m] = true;
                    }
                }
            }
        }
        if visited != nodes.len() {
            return Err(invalid("tree contains unreachable nodes"));
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(invalid(format!("point {m} is not in any leaf")));
        }
        Ok(Self {
            points,
            nodes,
            sigma,
            build_calls: 0,
        })
    }

    pub fn points(&self) -> &[MetricPoint<T>] {
        &self.points
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Distance evaluations spent building the tree (zero for loaded trees).
    pub fn build_calls(&self) -> u64 {
        self.build_calls
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Cluster> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(c) => Some(c),
            Node::Internal { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 1usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Internal { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }

    /// Point indices stored under node `i`.
    pub fn subtree_points(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![i];
        while let Some(j) = stack.pop() {
            match &self.nodes[j] {
                Node::Internal { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf(c) => out.extend_from_slice(&c.members),
            }
        }
        out
    }

    /// Recomputes every stored radius and member distance and reports the
    /// first one the real distances violate.
    pub fn check_radii<M: Metric<T>>(&self, metric: &M) -> std::result::Result<(), String> {
        let space = Space::new(&self.points, metric);
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Internal {
                    a,
                    b,
                    rad_a,
                    rad_b,
                    left,
                    right,
                } => {
                    for p in self.subtree_points(*left) {
                        let d = space.dist(p, *a);
                        if d > rad_a + slack(*rad_a) {
                            return Err(format!(
                                "node {i}: left point {p} at {d} beyond rad_a {rad_a}"
                            ));
                        }
                    }
                    for p in self.subtree_points(*right) {
                        let d = space.dist(p, *b);
                        if d > rad_b + slack(*rad_b) {
                            return Err(format!(
                                "node {i}: right point {p} at {d} beyond rad_b {rad_b}"
                            ));
                        }
                    }
                }
                Node::Leaf(c) => {
                    for (&m, &stored) in c.members.iter().zip(&c.member_dist) {
                        let d = space.dist(m, c.centroid);
                        if d > c.radius + slack(c.radius) || (d - stored).abs() > slack(d) {
                            return Err(format!("leaf {i}: member {m} inconsistent with centroid"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// All points within distance `t` of `q` (closed ball).
    pub fn range_search<M: Metric<T>>(&self, q: &T, t: f64, metric: &M) -> Result<RangeResult> {
        if !(t >= 0.0) {
            return Err(invalid(format!(
                "range threshold must be non-negative, got {t}"
            )));
        }
        let space = Space::new(&self.points, metric);
        let mut hits: HashMap<usize, (f64, bool)> = HashMap::new();
        let mut stack = vec![0usize];

        while let Some(i) = stack.pop() {
            match &self.nodes[i] {
                Node::Internal {
                    a,
                    b,
                    rad_a,
                    rad_b,
                    left,
                    right,
                } => {
                    let da = space.dist_to(q, *a);
                    let db = space.dist_to(q, *b);
                    if da <= t {
                        hits.insert(*a, (da, true));
                    }
                    if db <= t {
                        hits.insert(*b, (db, true));
                    }
                    if da <= t + rad_a + slack(t + rad_a) {
                        stack.push(*left);
                    }
                    if db <= t + rad_b + slack(t + rad_b) {
                        stack.push(*right);
                    }
                }
                Node::Leaf(c) => {
                    let dc = match hits.get(&c.centroid) {
                        Some(&(d, true)) => d,
                        _ => space.dist_to(q, c.centroid),
                    };
                    for (&m, &dm) in c.members.iter().zip(&c.member_dist) {
                        if m == c.centroid {
                            if dc <= t {
                                hits.insert(m, (dc, true));
                            }
                            continue;
                        }
                        if matches!(hits.get(&m), Some((_, true))) {
                            continue;
                        }
                        let eps = slack(dc + dm + t);
                        if dc + dm + eps <= t {
                            hits.insert(m, (dc + dm, false));
                        } else if (dc - dm).abs() > t + eps {
                            continue;
                        } else {
                            let d = space.dist_to(q, m);
                            if d <= t {
                                hits.insert(m, (d, true));
                            }
                        }
                    }
                }
            }
        }

        let mut hits: Vec<RangeHit> = hits
            .into_iter()
            .map(|(index, (distance, exact))| RangeHit {
                index,
                id: self.points[index].id,
                distance,
                exact,
            })
            .collect();
        hits.sort_by_key(|h| h.id);
        Ok(RangeResult {
            hits,
            distance_calls: space.calls.get(),
        })
    }

    /// The `k` nearest points to `q`, by best-first branch and bound.
    pub fn knn_search<M: Metric<T>>(&self, q: &T, k: usize, metric: &M) -> Result<KnnResult> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if k > self.points.len() {
            return Err(invalid(format!(
                "k = {k} exceeds the {} indexed points",
                self.points.len()
            )));
        }
        let space = Space::new(&self.points, metric);
        let mut known: HashMap<usize, f64> = HashMap::new();
        let mut best: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut frontier: BinaryHeap<Frontier> = BinaryHeap::new();
        let mut seq = 0u64;
        let mut push = |frontier: &mut BinaryHeap<Frontier>, bound: f64, item: FrontierItem| {
            frontier.push(Frontier { bound, seq, item });
            seq += 1;
        };

        let bound_of = |best: &BinaryHeap<Candidate>| {
            if best.len() == k {
                best.peek().map_or(f64::INFINITY, |c| c.distance)
            } else {
                f64::INFINITY
            }
        };
        let offer = |best: &mut BinaryHeap<Candidate>,
                     known: &mut HashMap<usize, f64>,
                     index: usize,
                     d: f64| {
            if known.insert(index, d).is_some() {
                return;
            }
            let cand = Candidate {
                distance: d,
                id: self.points[index].id,
                index,
            };
            if best.len() < k {
                best.push(cand);
            } else if cand < *best.peek().expect("heap holds k entries") {
                best.pop();
                best.push(cand);
            }
        };

        push(&mut frontier, 0.0, FrontierItem::Node(0));
        while let Some(Frontier { bound, item, .. }) = frontier.pop() {
            let r = bound_of(&best);
            if bound > r + slack(r) {
                break;
            }
            match item {
                FrontierItem::Node(i) => match &self.nodes[i] {
                    Node::Internal {
                        a,
                        b,
                        rad_a,
                        rad_b,
                        left,
                        right,
                    } => {
                        let da = known
                            .get(a)
                            .copied()
                            .unwrap_or_else(|| space.dist_to(q, *a));
                        let db = known
                            .get(b)
                            .copied()
                            .unwrap_or_else(|| space.dist_to(q, *b));
                        offer(&mut best, &mut known, *a, da);
                        offer(&mut best, &mut known, *b, db);
                        push(
                            &mut frontier,
                            (da - rad_a).max(bound),
                            FrontierItem::Node(*left),
                        );
                        push(
                            &mut frontier,
                            (db - rad_b).max(bound),
                            FrontierItem::Node(*right),
                        );
                    }
                    Node::Leaf(c) => {
                        let dc = known
                            .get(&c.centroid)
                            .copied()
                            .unwrap_or_else(|| space.dist_to(q, c.centroid));
                        offer(&mut best, &mut known, c.centroid, dc);
                        for (&m, &dm) in c.members.iter().zip(&c.member_dist) {
                            if !known.contains_key(&m) {
                                push(
                                    &mut frontier,
                                    (dc - dm).abs().max(bound),
                                    FrontierItem::Member(m),
                                );
                            }
                        }
                    }
                },
                FrontierItem::Member(m) => {
                    if !known.contains_key(&m) {
                        let d = space.dist_to(q, m);
                        offer(&mut best, &mut known, m, d);
                    }
                }
            }
        }

        let mut neighbors: Vec<Neighbor> = best
            .into_vec()
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                id: c.id,
                distance: c.distance,
            })
            .collect();
        neighbors.sort_by(|x, y| x.distance.total_cmp(&y.distance).then(x.id.cmp(&y.id)));
        Ok(KnnResult {
            neighbors,
            distance_calls: space.calls.get(),
        })
    }
}

/// Max-heap entry ordered by (distance, id): the top is the current worst.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    distance: f64,
    id: PointId,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

#[derive(Clone, Copy, Debug)]
enum FrontierItem {
    Node(usize),
    Member(usize),
}

/// Min-heap entry by lower bound (reversed ordering), FIFO among equal bounds.
#[derive(Clone, Copy, Debug)]
struct Frontier {
    bound: f64,
    seq: u64,
    item: FrontierItem,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

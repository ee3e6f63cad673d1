//! Undirected graphs over model variables, triangulation and junction trees.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::event::{ConfigSet, Scope, VarId};
use crate::setfunc::SetFunction;

/// Undirected simple graph whose vertices are the variables `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    cards: Vec<u32>,
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    /// Edgeless graph; `cards[v]` is the domain size of variable `v`.
    pub fn new(cards: Vec<u32>) -> Self {
        let adj = vec![BTreeSet::new(); cards.len()];
        Self { cards, adj }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn cards(&self) -> &[u32] {
        &self.cards
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        let n = self.adj.len();
        if a >= n || b >= n {
            return Err(Error::Configuration(format!("edge ({a}, {b}) references an unknown vertex")));
        }
        if a == b {
            return Err(Error::Configuration(format!("self-loop on vertex {a}")));
        }
        self.adj[a].insert(b);
        self.adj[b].insert(a);
        Ok(())
    }

    /// Adds every edge among `vertices`.
    pub fn add_clique(&mut self, vertices: &[usize]) -> Result<()> {
        for (i, &a) in vertices.iter().enumerate() {
            for &b in &vertices[i + 1..] {
                if a != b {
                    self.add_edge(a, b)?;
                }
            }
        }
        Ok(())
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj.get(a).is_some_and(|s| s.contains(&b))
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nb) in self.adj.iter().enumerate() {
            out.extend(nb.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn is_complete(&self, vertices: &[usize]) -> bool {
        vertices
            .iter()
            .enumerate()
            .all(|(i, &a)| vertices[i + 1..].iter().all(|&b| self.has_edge(a, b)))
    }

    pub fn scope_of(&self, vertices: &[usize]) -> Scope {
        Scope::new(vertices.iter().map(|&v| (VarId(v), self.cards[v])).collect())
            .expect("graph vertices form a scope")
    }
}

/// Min-fill triangulation. Ties go to the smaller current degree, then the
/// earlier vertex. Returns the chordal supergraph and the elimination order,
/// which is a perfect elimination ordering of it.
pub fn triangulate(g: &Graph) -> (Graph, Vec<usize>) {
    let n = g.vertex_count();
    let mut work = g.adj.clone();
    let mut out = g.clone();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);

    for _ in 0..n {
        let mut best: Option<(usize, usize, usize)> = None;
        for v in (0..n).filter(|&v| alive[v]) {
            let nb: Vec<usize> = work[v].iter().copied().collect();
            let mut fill = 0;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if !work[a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            let key = (fill, nb.len(), v);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        let (_, _, v) = best.expect("a live vertex remains");
        let nb: Vec<usize> = work[v].iter().copied().collect();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if work[a].insert(b) {
                    work[b].insert(a);
                    out.add_edge(a, b).expect("fill edge between distinct vertices");
                }
            }
        }
        for &a in &nb {
            work[a].remove(&v);
        }
        work[v].clear();
        alive[v] = false;
        order.push(v);
    }
    (out, order)
}

fn later_neighbors(g: &Graph, pos: &[usize], v: usize) -> Vec<usize> {
    g.neighbors(v).iter().copied().filter(|&u| pos[u] > pos[v]).collect()
}

fn positions(g: &Graph, order: &[usize]) -> Result<Vec<usize>> {
    let n = g.vertex_count();
    if order.len() != n {
        return Err(Error::InvalidOrder(format!(
            "order has {} vertices, graph has {n}",
            order.len()
        )));
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return Err(Error::InvalidOrder(format!("vertex {v} is missing, repeated or unknown")));
        }
        pos[v] = i;
    }
    Ok(pos)
}

pub fn is_perfect_elimination_order(g: &Graph, order: &[usize]) -> bool {
    match positions(g, order) {
        Ok(pos) => order
            .iter()
            .all(|&v| g.is_complete(&later_neighbors(g, &pos, v))),
        Err(_) => false,
    }
}

/// Chordality test by maximum cardinality search: the reverse visiting
/// order is a perfect elimination ordering iff the graph is chordal.
pub fn is_chordal(g: &Graph) -> bool {
    let n = g.vertex_count();
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut visit = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !visited[v])
            .max_by_key(|&v| (weight[v], std::cmp::Reverse(v)))
            .unwrap();
        visited[v] = true;
        visit.push(v);
        for &u in g.neighbors(v) {
            if !visited[u] {
                weight[u] += 1;
            }
        }
    }
    visit.reverse();
    is_perfect_elimination_order(g, &visit)
}

/// Maximal cliques of a chordal graph from a perfect elimination ordering,
/// sorted by their variable lists.
pub fn maximal_cliques(g: &Graph, order: &[usize]) -> Result<Vec<Scope>> {
    let pos = positions(g, order)?;
    let mut candidates: Vec<BTreeSet<usize>> = Vec::with_capacity(order.len());
    for &v in order {
        let later = later_neighbors(g, &pos, v);
        if !g.is_complete(&later) {
            return Err(Error::InvalidOrder(format!(
                "later neighbours of vertex {v} are not complete"
            )));
        }
        let mut c: BTreeSet<usize> = later.into_iter().collect();
        c.insert(v);
        candidates.push(c);
    }
    let mut maximal: Vec<Vec<usize>> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let dominated = candidates
            .iter()
            .enumerate()
            .any(|(j, d)| j != i && c.is_subset(d) && (c.len() < d.len() || j < i));
        if !dominated {
            maximal.push(c.iter().copied().collect());
        }
    }
    maximal.sort();
    Ok(maximal.iter().map(|c| g.scope_of(c)).collect())
}

/// A clique or separator potential. `Unit` is the constant-1 function.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Unit,
    Table(SetFunction),
}

impl Potential {
    pub fn value(&self, set: &ConfigSet) -> f64 {
        match self {
            Potential::Unit => 1.0,
            Potential::Table(f) => f.get(set),
        }
    }

    pub fn table(&self) -> Option<&SetFunction> {
        match self {
            Potential::Unit => None,
            Potential::Table(f) => Some(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeEdge {
    pub a: usize,
    pub b: usize,
    pub separator: Scope,
}

/// Clique tree with potentials on nodes and edges.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionTree {
    pub nodes: Vec<Scope>,
    pub edges: Vec<TreeEdge>,
    pub node_potentials: Vec<Potential>,
    pub edge_potentials: Vec<Potential>,
    /// Index of the artificial empty-scope node joining disconnected
    /// components, if one was needed.
    pub null_node: Option<usize>,
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }
}

/// Maximum-weight spanning tree of the clique graph, weighted by separator
/// size; ties prefer larger `|Ω_S|`, then earlier cliques. Components are
/// joined through an empty-scope node when there is more than one.
pub fn build_junction_tree(cliques: &[Scope]) -> JunctionTree {
    let k = cliques.len();
    let mut candidates = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let sep = cliques[i].intersection(&cliques[j]);
            if !sep.is_empty() {
                candidates.push((sep.len(), sep.size(), i, j, sep));
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.0.cmp(&x.0)
            .then(y.1.cmp(&x.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut dsu = DisjointSets((0..k).collect());
    let mut edges = Vec::new();
    for (_, _, i, j, sep) in candidates {
        if dsu.union(i, j) {
            edges.push(TreeEdge { a: i, b: j, separator: sep });
        }
    }

    let mut nodes = cliques.to_vec();
    let mut roots: Vec<usize> = (0..k).filter(|&i| dsu.find(i) == i).collect();
    roots.sort_unstable();
    let null_node = if k == 0 || roots.len() > 1 {
        nodes.push(Scope::empty());
        let z = nodes.len() - 1;
        for r in roots {
            edges.push(TreeEdge {
                a: r,
                b: z,
                separator: Scope::empty(),
            });
        }
        Some(z)
    } else {
        None
    };
    edges.sort_by_key(|e| (e.a, e.b));

    let node_potentials = vec![Potential::Unit; nodes.len()];
    let edge_potentials = vec![Potential::Unit; edges.len()];
    JunctionTree {
        nodes,
        edges,
        node_potentials,
        edge_potentials,
        null_node,
    }
}

impl JunctionTree {
    /// Tree over `nodes` with the given node pairs as edges; separators are
    /// the endpoint intersections.
    pub fn from_edges(nodes: Vec<Scope>, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = nodes.len();
        let mut edges = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a >= n || b >= n || a == b {
                return Err(Error::Configuration(format!("bad tree edge ({a}, {b})")));
            }
            edges.push(TreeEdge {
                a,
                b,
                separator: nodes[a].intersection(&nodes[b]),
            });
        }
        let t = JunctionTree {
            node_potentials: vec![Potential::Unit; n],
            edge_potentials: vec![Potential::Unit; edges.len()],
            null_node: nodes.iter().position(Scope::is_empty).filter(|_| n > 1),
            nodes,
            edges,
        };
        if !t.is_tree() {
            return Err(Error::Configuration("edges do not form a tree".into()));
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(neighbour, edge index)` pairs of a node.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().enumerate().filter_map(move |(i, e)| {
            if e.a == node {
                Some((e.b, i))
            } else if e.b == node {
                Some((e.a, i))
            } else {
                None
            }
        })
    }

    pub fn is_tree(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 || self.edges.len() != n - 1 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for (u, _) in self.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == n
    }

    /// Breadth-first order from `root` with each node's parent and the edge
    /// to it.
    pub fn bfs(&self, root: usize) -> Vec<(usize, Option<(usize, usize)>)> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = vec![(root, None)];
        seen[root] = true;
        let mut i = 0;
        while i < out.len() {
            let v = out[i].0;
            for (u, e) in self.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    out.push((u, Some((v, e))));
                }
            }
            i += 1;
        }
        out
    }

    /// Nodes on the tree path from `a` to `b`, endpoints included.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let order = self.bfs(a);
        let mut parent = vec![None; self.nodes.len()];
        for (v, p) in &order {
            parent[*v] = p.map(|(u, _)| u);
        }
        let mut out = vec![b];
        let mut cur = b;
        while let Some(p) = parent[cur] {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    /// First node, in canonical order, whose scope contains `scope`.
    pub fn node_containing(&self, scope: &Scope) -> Option<usize> {
        self.nodes.iter().position(|c| scope.is_subset(c))
    }

    pub fn separators_match_endpoints(&self) -> bool {
        self.edges
            .iter()
            .all(|e| e.separator == self.nodes[e.a].intersection(&self.nodes[e.b]))
    }
}

/// Running-intersection check: for every pair of nodes, their common
/// variables appear in every node on the path between them.
pub fn check_junction_property(t: &JunctionTree) -> bool {
    let n = t.nodes.len();
    for a in 0..n {
        for b in (a + 1)..n {
            let common = t.nodes[a].intersection(&t.nodes[b]);
            if common.is_empty() {
                continue;
            }
            if !t.path(a, b).iter().all(|&v| common.is_subset(&t.nodes[v])) {
                return false;
            }
        }
    }
    true
}

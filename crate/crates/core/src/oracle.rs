//! Flat reference implementations used to check the engine.
//!
//! Everything here works on the full joint space and is exponential in the
//! number of configurations; [`size_guard`] bounds it.

use std::collections::BTreeSet;

use itertools::Itertools;

use crate::engine::Model;
use crate::error::{Error, Result};
use crate::event::{ConfigSet, Event, Scope, VariableSet};
use crate::graph::JunctionTree;
use crate::setfunc::{
    check_two_monotone, commonality, conditional_interval, dual, inv_mobius, loc_m, loc_q, lower_at,
    restrict_to_evidence, upper_at, ConditioningInputs, Interval, Role, SetFunction, Status, TOL, ZERO_TOL,
};

pub mod generate;

/// Default bound on the number of joint configurations.
pub const DEFAULT_SIZE_GUARD: usize = 16;
/// Largest `|Ω|` accepted by [`credal_vertices`].
pub const VERTEX_LIMIT: usize = 6;

/// Joint-configuration bound, overridable through `CAPAX_SIZE_GUARD`.
pub fn size_guard() -> usize {
    std::env::var("CAPAX_SIZE_GUARD")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SIZE_GUARD)
}

fn guard(size: usize, limit: usize) -> Result<()> {
    if size > limit {
        return Err(Error::SizeGuard {
            what: "joint configurations",
            size: size as u64,
            limit: limit as u64,
        });
    }
    Ok(())
}

/// Joint Möbius and commonality functions over all variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatJoint {
    pub m_joint: SetFunction,
    pub q_joint: SetFunction,
}

impl FlatJoint {
    pub fn scope(&self) -> &Scope {
        self.m_joint.scope()
    }
}

/// Projection maps from the full scope onto each node (None for the empty
/// node, whose projection of a nonempty event is always `Ω_∅`).
type NodeMap = Option<(Vec<u32>, usize)>;

struct Projector {
    n: usize,
    maps: Vec<NodeMap>,
    seps: Vec<NodeMap>,
}

fn maps_for<'a>(full: &Scope, scopes: impl Iterator<Item = &'a Scope>) -> Result<Vec<NodeMap>> {
    scopes
        .map(|s| {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some((full.projection_map(s)?, s.size())))
            }
        })
        .collect()
}

impl Projector {
    fn new(full: &Scope, tree: &JunctionTree) -> Result<Self> {
        Ok(Projector {
            n: full.size(),
            maps: maps_for(full, tree.nodes.iter())?,
            seps: maps_for(full, tree.edges.iter().map(|e| &e.separator))?,
        })
    }

    fn project(&self, i: usize, a: &ConfigSet) -> ConfigSet {
        match &self.maps[i] {
            Some((map, size)) => a.map_through(map, *size),
            None if a.is_empty() => ConfigSet::empty(1),
            None => ConfigSet::full(1),
        }
    }

    fn cylinder(&self, i: usize, x: &ConfigSet) -> ConfigSet {
        match &self.maps[i] {
            Some((map, _)) => x.preimage(map, self.n),
            None if x.is_empty() => ConfigSet::empty(self.n),
            None => ConfigSet::full(self.n),
        }
    }

    /// `□a`: intersection of the cylinders of `a`'s projections.
    fn rectangularize(&self, a: &ConfigSet) -> ConfigSet {
        let mut r = ConfigSet::full(self.n);
        for i in 0..self.maps.len() {
            r = r.intersection(&self.cylinder(i, &self.project(i, a)));
        }
        r
    }
}

/// `Π φ_C(x_C) / Π φ_S(a_S)` with 0/0 = 0.
fn product_value(tree: &JunctionTree, proj: &Projector, a: &ConfigSet, node_args: &[ConfigSet]) -> Result<f64> {
    let mut num = 1.0;
    for (i, x) in node_args.iter().enumerate() {
        num *= tree.node_potentials[i].value(x);
    }
    let mut den = 1.0;
    for (e, sep) in proj.seps.iter().enumerate() {
        let s = match sep {
            Some((map, size)) => a.map_through(map, *size),
            None if a.is_empty() => ConfigSet::empty(1),
            None => ConfigSet::full(1),
        };
        den *= tree.edge_potentials[e].value(&s);
    }
    if den.abs() <= ZERO_TOL {
        if num.abs() <= ZERO_TOL {
            return Ok(0.0);
        }
        return Err(Error::MalformedModel(
            "a separator potential is zero where the clique product is not".into(),
        ));
    }
    Ok(num / den)
}

/// Sparse Möbius joint from the m-tree: enumerates tuples of nonzero node
/// entries whose cylinders meet in a rectangle that projects back onto each
/// of them.
pub fn assemble_m(tree: &JunctionTree, variables: &VariableSet, limit: usize) -> Result<SetFunction> {
    let full = variables.full_scope();
    guard(full.size(), limit)?;
    let proj = Projector::new(&full, tree)?;
    let mut order: Vec<usize> = tree.bfs(0).into_iter().map(|(n, _)| n).collect();
    order.retain(|&i| !tree.nodes[i].is_empty());
    let entries: Vec<Vec<(ConfigSet, f64)>> = (0..tree.len())
        .map(|i| match tree.node_potentials[i].table() {
            Some(t) => t.iter().filter(|(k, _)| !k.is_empty()).map(|(k, v)| (k.clone(), v)).collect(),
            None => vec![(ConfigSet::full(1), 1.0)],
        })
        .collect();

    let mut out = SetFunction::new(full.clone(), Role::Mobius);
    let mut chosen: Vec<ConfigSet> = tree
        .nodes
        .iter()
        .map(|s| if s.is_empty() { ConfigSet::full(1) } else { ConfigSet::empty(s.size()) })
        .collect();

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        depth: usize,
        current: ConfigSet,
        order: &[usize],
        entries: &[Vec<(ConfigSet, f64)>],
        proj: &Projector,
        chosen: &mut Vec<ConfigSet>,
        tree: &JunctionTree,
        out: &mut SetFunction,
    ) -> Result<()> {
        if depth == order.len() {
            let value = product_value(tree, proj, &current, chosen)?;
            if value.abs() > ZERO_TOL {
                out.insert(current, value);
            }
            return Ok(());
        }
        let node = order[depth];
        for (x, _) in &entries[node] {
            let next = current.intersection(&proj.cylinder(node, x));
            if next.is_empty() {
                continue;
            }
            if order[..=depth]
                .iter()
                .any(|&j| proj.project(j, &next) != if j == node { x.clone() } else { chosen[j].clone() })
            {
                continue;
            }
            chosen[node] = x.clone();
            recurse(depth + 1, next, order, entries, proj, chosen, tree, out)?;
        }
        Ok(())
    }

    if order.is_empty() {
        out.insert(ConfigSet::full(1), 1.0);
        return Ok(out);
    }
    recurse(0, ConfigSet::full(full.size()), &order, &entries, &proj, &mut chosen, tree, &mut out)?;
    Ok(out)
}

/// Dense commonality joint from the q-tree: at every event `A` the product
/// of node potentials at the projections of `□A`.
pub fn assemble_q(tree: &JunctionTree, variables: &VariableSet, limit: usize) -> Result<SetFunction> {
    let full = variables.full_scope();
    guard(full.size(), limit)?;
    let n = full.size();
    let proj = Projector::new(&full, tree)?;
    let mut dense = vec![0.0; 1usize << n];
    for (mask, slot) in dense.iter_mut().enumerate() {
        let a = ConfigSet::Bits(mask as u64);
        let r = proj.rectangularize(&a);
        let args: Vec<ConfigSet> = (0..tree.len()).map(|i| proj.project(i, &r)).collect();
        *slot = product_value(tree, &proj, &r, &args)?;
    }
    SetFunction::from_dense(full, Role::Commonality, &dense)
}

/// Reconstructs both joints from the model's current potentials and, when
/// no evidence has been entered, checks that they are dual.
pub fn assemble_joint(model: &Model) -> Result<FlatJoint> {
    assemble_joint_with_guard(model, size_guard())
}

pub fn assemble_joint_with_guard(model: &Model, limit: usize) -> Result<FlatJoint> {
    let vars = model.variables();
    let m_joint = assemble_m(model.m_tree(), vars, limit)?;
    let q_joint = assemble_q(model.q_tree(), vars, limit)?;
    let joint = FlatJoint { m_joint, q_joint };
    if model.evidence_log().iter().all(|f| f.event.is_full()) {
        let total = joint.m_joint.total();
        if (total - 1.0).abs() > TOL {
            return Err(Error::MalformedModel(format!("joint Möbius masses sum to {total}, not 1")));
        }
        check_dual(&joint, vars)?;
    }
    Ok(joint)
}

/// Errors unless `q_joint = commonality(dual(inv_mobius(m_joint)))`.
pub fn check_dual(joint: &FlatJoint, vars: &VariableSet) -> Result<()> {
    let expected = commonality(&dual(&inv_mobius(&joint.m_joint)?)?)?;
    let mut worst = (0.0f64, ConfigSet::empty(joint.scope().size()));
    let keys: BTreeSet<&ConfigSet> = expected.iter().chain(joint.q_joint.iter()).map(|(k, _)| k).collect();
    for k in keys {
        let d = (expected.get(k) - joint.q_joint.get(k)).abs();
        if d > worst.0 {
            worst = (d, k.clone());
        }
    }
    if worst.0 > TOL {
        let at = vars.event_label(&Event::new(joint.scope().clone(), worst.1));
        return Err(Error::InconsistentPair { max_deviation: worst.0, at });
    }
    Ok(())
}

/// Posterior interval computed directly on the joints. Both events must be
/// over the joint's full scope.
pub fn flat_posterior(j: &FlatJoint, target: &Event, evidence: &Event) -> Result<Interval> {
    let scope = j.scope();
    if target.scope() != scope || evidence.scope() != scope {
        return Err(Error::Scope("flat posterior events must be over the full scope".into()));
    }
    let m = restrict_to_evidence(&j.m_joint, evidence)?;
    let q = restrict_to_evidence(&j.q_joint, evidence)?;
    let e = evidence.set();
    let a = target.set().intersection(e);
    let ac = target.set().complement(scope.size()).intersection(e);
    let inputs = ConditioningInputs {
        low_ae: lower_at(&m, &a),
        up_ace: upper_at(&q, &ac),
        up_ae: upper_at(&q, &a),
        low_ace: lower_at(&m, &ac),
        low_e: lower_at(&m, e),
        up_e: upper_at(&q, e),
        e_subset_a: e.is_subset(target.set()),
        e_subset_ac: a.is_empty(),
    };
    conditional_interval(&inputs)
}

/// Extreme points of the credal set of a 2-monotone lower probability, one
/// per ordering of `Ω`. Each vertex is checked against `p` on every event.
pub fn credal_vertices(p: &SetFunction) -> Result<Vec<Vec<f64>>> {
    let n = p.scope().size();
    if n > VERTEX_LIMIT {
        return Err(Error::SizeGuard {
            what: "configurations for vertex enumeration",
            size: n as u64,
            limit: VERTEX_LIMIT as u64,
        });
    }
    let report = check_two_monotone(p, VERTEX_LIMIT)?;
    if !report.passed() {
        return Err(Error::NotTwoMonotone(report.violation_count));
    }
    let value = |mask: u64| p.get(&ConfigSet::Bits(mask));
    let mut vertices = Vec::new();
    for perm in (0..n).permutations(n) {
        let mut v = vec![0.0; n];
        let mut chain = 0u64;
        for &w in &perm {
            let next = chain | 1 << w;
            v[w] = value(next) - value(chain);
            chain = next;
        }
        vertices.push(v);
    }
    for v in &vertices {
        let total: f64 = v.iter().sum();
        if v.iter().any(|&x| x < -TOL) || (total - 1.0).abs() > TOL {
            return Err(Error::NumericDomain(format!("vertex {v:?} is not a distribution")));
        }
        for mask in 0..(1u64 << n) {
            let pv: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).sum();
            if pv < value(mask) - TOL {
                return Err(Error::NumericDomain(format!("vertex {v:?} does not dominate the lower probability")));
            }
        }
    }
    Ok(vertices)
}

/// Conditional bounds by enumeration of credal vertices, using only the
/// vertices that give the evidence positive probability.
pub fn oracle_conditional(p: &SetFunction, target: &Event, evidence: &Event) -> Result<Interval> {
    if target.scope() != p.scope() || evidence.scope() != p.scope() {
        return Err(Error::Scope("oracle events must be over the lower probability's scope".into()));
    }
    let vertices = credal_vertices(p)?;
    let prob = |v: &[f64], s: &ConfigSet| s.iter().map(|i| v[i as usize]).sum::<f64>();
    let ae = target.set().intersection(evidence.set());
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    let mut min_pe = f64::INFINITY;
    for v in &vertices {
        let pe = prob(v, evidence.set());
        min_pe = min_pe.min(pe);
        if pe > TOL {
            let r = prob(v, &ae) / pe;
            lower = lower.min(r);
            upper = upper.max(r);
        }
    }
    if lower > upper {
        return Ok(Interval::contradiction());
    }
    let status = if min_pe <= TOL { Status::Vacuous } else { Status::Normal };
    Ok(Interval {
        lower: lower.clamp(0.0, 1.0),
        upper: upper.clamp(0.0, 1.0),
        status,
    })
}

/// Result of [`check_markov`]; one flag per tree edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub rectangular_core_ok: bool,
    pub m_factorization_ok: Vec<bool>,
    pub q_factorization_ok: Vec<bool>,
    pub partition_ok: Vec<bool>,
}

impl MarkovReport {
    /// Rectangular core plus both factorizations; the partition condition is
    /// only a sufficient condition and does not count.
    pub fn passed(&self) -> bool {
        self.rectangular_core_ok
            && self.m_factorization_ok.iter().all(|&b| b)
            && self.q_factorization_ok.iter().all(|&b| b)
    }
}

/// Variables on each side of a tree edge.
fn edge_sides(tree: &JunctionTree, e: usize) -> (Scope, Scope) {
    let edge = &tree.edges[e];
    let mut side = vec![false; tree.len()];
    let mut stack = vec![edge.a];
    side[edge.a] = true;
    while let Some(u) = stack.pop() {
        for (v, ei) in tree.neighbors(u) {
            if ei != e && !side[v] {
                side[v] = true;
                stack.push(v);
            }
        }
    }
    let (mut a, mut b) = (Scope::empty(), Scope::empty());
    for (i, s) in tree.nodes.iter().enumerate() {
        if side[i] {
            a = a.union(s);
        } else {
            b = b.union(s);
        }
    }
    (a, b)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den.abs() <= ZERO_TOL {
        (num.abs() <= ZERO_TOL).then_some(0.0)
    } else {
        Some(num / den)
    }
}

fn m_factorizes(m: &SetFunction, a: &Scope, b: &Scope) -> Result<bool> {
    let full = m.scope().clone();
    let n = full.size();
    let s = a.intersection(b);
    let (la, lb, ls) = (loc_m(m, a)?, loc_m(m, b)?, loc_m(m, &s)?);
    let (ma, mb) = (full.projection_map(a)?, full.projection_map(b)?);
    let (sa, sb) = (a.projection_map(&s)?, b.projection_map(&s)?);
    let predicted = |xa: &ConfigSet, xb: &ConfigSet| {
        ratio(la.get(xa) * lb.get(xb), ls.get(&xa.map_through(&sa, s.size())))
    };
    for (x, v) in m.iter() {
        let (xa, xb) = (x.map_through(&ma, a.size()), x.map_through(&mb, b.size()));
        let rect = xa.preimage(&ma, n).intersection(&xb.preimage(&mb, n));
        if &rect != x {
            return Ok(false);
        }
        match predicted(&xa, &xb) {
            Some(p) if (p - v).abs() <= TOL => {}
            _ => return Ok(false),
        }
    }
    for (xa, va) in la.iter() {
        for (xb, vb) in lb.iter() {
            if xa.map_through(&sa, s.size()) != xb.map_through(&sb, s.size()) || va * vb == 0.0 {
                continue;
            }
            let x = xa.preimage(&ma, n).intersection(&xb.preimage(&mb, n));
            if x.map_through(&ma, a.size()) != *xa || x.map_through(&mb, b.size()) != *xb {
                continue;
            }
            match predicted(xa, xb) {
                Some(p) if (p - m.get(&x)).abs() <= TOL => {}
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}

fn q_factorizes(q: &SetFunction, a: &Scope, b: &Scope) -> Result<bool> {
    let full = q.scope().clone();
    let n = full.size();
    let s = a.intersection(b);
    let (qa, qb, qs) = (loc_q(q, a)?, loc_q(q, b)?, loc_q(q, &s)?);
    let (ma, mb, ms) = (full.projection_map(a)?, full.projection_map(b)?, full.projection_map(&s)?);
    for mask in 0..(1u64 << n) {
        let x = ConfigSet::Bits(mask);
        let r = x
            .map_through(&ma, a.size())
            .preimage(&ma, n)
            .intersection(&x.map_through(&mb, b.size()).preimage(&mb, n));
        let num = qa.get(&r.map_through(&ma, a.size())) * qb.get(&r.map_through(&mb, b.size()));
        match ratio(num, qs.get(&r.map_through(&ms, s.size()))) {
            Some(p) if (p - q.get(&x)).abs() <= TOL => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

fn partitions_separator(m: &SetFunction, sep: &Scope) -> Result<bool> {
    let map = m.scope().projection_map(sep)?;
    let blocks: BTreeSet<ConfigSet> = m.iter().map(|(x, _)| x.map_through(&map, sep.size())).collect();
    let mut union = ConfigSet::empty(sep.size());
    for b in &blocks {
        if !union.intersection(b).is_empty() {
            return Ok(false);
        }
        union = union.union(b);
    }
    Ok(union == ConfigSet::full(sep.size()))
}

/// Checks the Markov conditions of the assembled joint against every
/// decomposition induced by a junction-tree edge.
pub fn check_markov(model: &Model) -> Result<MarkovReport> {
    check_markov_with_guard(model, size_guard())
}

pub fn check_markov_with_guard(model: &Model, limit: usize) -> Result<MarkovReport> {
    let vars = model.variables();
    let m = assemble_m(model.m_tree(), vars, limit)?;
    let q = assemble_q(model.q_tree(), vars, limit)?;
    report_for(&m, &q, model.m_tree(), model.q_tree())
}

/// The Markov report for explicit joints and trees.
pub fn report_for(m: &SetFunction, q: &SetFunction, m_tree: &JunctionTree, q_tree: &JunctionTree) -> Result<MarkovReport> {
    let cliques: Vec<Scope> = m_tree.nodes.iter().filter(|s| !s.is_empty()).cloned().collect();
    let mut rectangular_core_ok = true;
    for (x, _) in m.iter() {
        let ev = Event::new(m.scope().clone(), x.clone());
        if !ev.is_rectangle(&cliques)? {
            rectangular_core_ok = false;
            break;
        }
    }
    let mut m_factorization_ok = Vec::new();
    let mut partition_ok = Vec::new();
    for e in 0..m_tree.edges.len() {
        let (a, b) = edge_sides(m_tree, e);
        m_factorization_ok.push(m_factorizes(m, &a, &b)?);
        partition_ok.push(partitions_separator(m, &m_tree.edges[e].separator)?);
    }
    let mut q_factorization_ok = Vec::new();
    for e in 0..q_tree.edges.len() {
        let (a, b) = edge_sides(q_tree, e);
        q_factorization_ok.push(q_factorizes(q, &a, &b)?);
    }
    Ok(MarkovReport {
        rectangular_core_ok,
        m_factorization_ok,
        q_factorization_ok,
        partition_ok,
    })
}

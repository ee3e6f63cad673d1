//! Paired junction-tree model: evidence entry, propagation and posterior
//! queries.
//!
//! A [`Model`] carries two junction trees. The m-tree holds Möbius
//! potentials whose product (over rectangles) is the joint Möbius
//! assignment; the q-tree holds commonality potentials whose product is the
//! joint commonality function. The trees are propagated independently, and
//! a posterior interval is read from one node of each.

use crate::error::{Error, Result, TreeKind};
use crate::event::{ConfigSet, Event, Scope, VariableSet};
use crate::graph::{build_junction_tree, maximal_cliques, triangulate, Graph, JunctionTree, Potential};
use crate::setfunc::{
    commonality, conditional_interval, dual, inv_mobius, loc_m, loc_q, lower_at, restrict_to_evidence,
    upper_at, ConditioningInputs, Interval, Role, SetFunction, Status, TOL, ZERO_TOL,
};

/// A piece of evidence: the true configuration lies in `event`.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub event: Event,
}

impl Finding {
    pub fn new(event: Event) -> Self {
        Self { event }
    }
}

/// A potential declared on a clique of one of the input graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct DeclaredPotential {
    pub clique: Scope,
    pub table: SetFunction,
}

/// An explicit separator potential on the tree edge joining the nodes with
/// scopes `between.0` and `between.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeclaredSeparator {
    pub between: (Scope, Scope),
    pub table: SetFunction,
}

/// Everything needed to assemble a [`Model`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub variables: VariableSet,
    pub m_graph: Graph,
    /// Defaults to `m_graph`.
    pub q_graph: Option<Graph>,
    pub m_potentials: Vec<DeclaredPotential>,
    /// Derived from the m-side when absent (requires `q_graph == m_graph`).
    pub q_potentials: Option<Vec<DeclaredPotential>>,
    pub m_separators: Vec<DeclaredSeparator>,
    pub q_separators: Vec<DeclaredSeparator>,
}

/// Outcome of the last propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Propagated {
    lower_e: f64,
    upper_e: f64,
    contradiction: bool,
    m_singular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    variables: VariableSet,
    m_tree: JunctionTree,
    q_tree: JunctionTree,
    // Trees as built, before any finding.
    m_prior: JunctionTree,
    q_prior: JunctionTree,
    // Trees with every finding applied but not yet propagated; propagation
    // always restarts from these.
    m_base: JunctionTree,
    q_base: JunctionTree,
    evidence_log: Vec<Finding>,
    m_propagated: bool,
    q_propagated: bool,
    state: Option<Propagated>,
}

fn tree_for(graph: &Graph) -> Result<JunctionTree> {
    let (chordal, order) = triangulate(graph);
    let cliques = maximal_cliques(&chordal, &order)?;
    Ok(build_junction_tree(&cliques))
}

/// Potential of the empty-scope node: the joint localized to no variables.
fn null_table(kind: TreeKind) -> SetFunction {
    let mut f = SetFunction::new(Scope::empty(), Role::Potential);
    if kind == TreeKind::Commonality {
        f.insert(ConfigSet::Bits(0), 1.0);
    }
    f.insert(ConfigSet::Bits(1), 1.0);
    f
}

/// Re-expresses `table` over the larger scope `node`, mapping each event to
/// its cylinder.
fn cylinder_table(table: &SetFunction, node: &Scope) -> Result<SetFunction> {
    let mut out = SetFunction::new(node.clone(), Role::Potential);
    for (k, v) in table.iter() {
        let ev = Event::new(table.scope().clone(), k.clone()).extend(node)?;
        out.insert(ev.into_parts().1, v);
    }
    Ok(out)
}

fn bind_potentials(
    tree: &mut JunctionTree,
    declared: &[DeclaredPotential],
    kind: TreeKind,
    vars: &VariableSet,
) -> Result<()> {
    let mut bound = vec![false; tree.len()];
    for d in declared {
        if d.table.scope() != &d.clique {
            return Err(Error::MalformedModel("potential table scope differs from its clique".into()));
        }
        let node = tree.node_containing(&d.clique).ok_or_else(|| {
            Error::MalformedModel(format!(
                "{kind} potential on {:?} is not contained in any junction-tree node",
                vars.scope_names(&d.clique)
            ))
        })?;
        if bound[node] {
            return Err(Error::MalformedModel(format!(
                "two {kind} potentials map to the node {:?}",
                vars.scope_names(&tree.nodes[node])
            )));
        }
        let empty = ConfigSet::empty(d.clique.size());
        match kind {
            TreeKind::Mobius => {
                if d.table.get(&empty).abs() > ZERO_TOL {
                    return Err(Error::MalformedModel("m-potential assigns mass to the empty event".into()));
                }
                if let Some((k, v)) = d.table.iter().find(|(k, v)| k.len() == 1 && *v < 0.0) {
                    return Err(Error::MalformedModel(format!(
                        "m-potential on {:?} is negative ({v}) on the atom {k:?}",
                        vars.scope_names(&d.clique)
                    )));
                }
            }
            TreeKind::Commonality => {
                if d.table.get(&empty) <= ZERO_TOL && d.table.iter().any(|(k, _)| k.is_empty()) {
                    return Err(Error::MalformedModel("q-potential must be positive on the empty event".into()));
                }
            }
        }
        let mut table = cylinder_table(&d.table, &tree.nodes[node])?;
        if kind == TreeKind::Commonality && !d.table.iter().any(|(k, _)| k.is_empty()) {
            table.insert(ConfigSet::empty(tree.nodes[node].size()), 1.0);
        }
        tree.node_potentials[node] = Potential::Table(table);
        bound[node] = true;
    }
    for (i, b) in bound.iter().enumerate() {
        if Some(i) == tree.null_node {
            tree.node_potentials[i] = Potential::Table(null_table(kind));
        } else if !b {
            return Err(Error::MalformedModel(format!(
                "{kind} node {:?} has no potential",
                vars.scope_names(&tree.nodes[i])
            )));
        }
    }
    Ok(())
}

fn bind_separators(tree: &mut JunctionTree, declared: &[DeclaredSeparator], kind: TreeKind) -> Result<()> {
    for d in declared {
        let (x, y) = &d.between;
        let edge = tree
            .edges
            .iter()
            .position(|e| {
                let (a, b) = (&tree.nodes[e.a], &tree.nodes[e.b]);
                (a == x && b == y) || (a == y && b == x)
            })
            .ok_or_else(|| Error::MalformedModel(format!("{kind} separator names no tree edge")))?;
        if d.table.scope() != &tree.edges[edge].separator {
            return Err(Error::MalformedModel(format!(
                "{kind} separator table is not over the separator scope"
            )));
        }
        tree.edge_potentials[edge] = Potential::Table(d.table.clone().with_role(Role::Potential));
    }
    Ok(())
}

fn loc_for(kind: TreeKind, f: &SetFunction, sub: &Scope) -> Result<SetFunction> {
    match kind {
        TreeKind::Mobius => loc_m(f, sub),
        TreeKind::Commonality => loc_q(f, sub),
    }
}

fn table_of(tree: &JunctionTree, node: usize) -> Result<&SetFunction> {
    tree.node_potentials[node]
        .table()
        .ok_or_else(|| Error::MalformedModel(format!("node {node} has no potential table")))
}

/// One propagation step from `from` to `to` across `edge`:
/// the separator becomes `Loc(φ_from, S)` and `φ_to` is rescaled by the
/// ratio of new to old separator values, with 0/0 = 0.
///
/// Returns whether a nonzero value had to be divided by zero.
fn pass_message(tree: &mut JunctionTree, kind: TreeKind, from: usize, to: usize, edge: usize) -> Result<bool> {
    let sep = tree.edges[edge].separator.clone();
    let message = loc_for(kind, table_of(tree, from)?, &sep)?;
    let target = table_of(tree, to)?;
    let map = target.scope().projection_map(&sep)?;
    let old = &tree.edge_potentials[edge];
    let mut singular = false;
    let mut updated = SetFunction::new(target.scope().clone(), Role::Potential);
    for (x, v) in target.iter() {
        let s = x.map_through(&map, sep.size());
        let num = v * message.get(&s);
        let den = old.value(&s);
        let nv = if den.abs() <= ZERO_TOL {
            if num.abs() > ZERO_TOL {
                singular = true;
            }
            0.0
        } else {
            num / den
        };
        updated.insert(x.clone(), nv);
    }
    tree.node_potentials[to] = Potential::Table(updated);
    tree.edge_potentials[edge] = Potential::Table(message);
    Ok(singular)
}

/// Collect towards node 0, then distribute from it, depth by depth.
fn propagate_tree(tree: &mut JunctionTree, kind: TreeKind) -> Result<bool> {
    let order = tree.bfs(0);
    let mut singular = false;
    for &(node, parent) in order.iter().rev() {
        if let Some((p, e)) = parent {
            singular |= pass_message(tree, kind, node, p, e)?;
        }
    }
    for &(node, parent) in &order {
        if let Some((p, e)) = parent {
            singular |= pass_message(tree, kind, p, node, e)?;
        }
    }
    Ok(singular)
}

/// Localizes node `i` of a tree to the empty scope and returns the bound on
/// the whole space: `P(E)` on the m-side, `P̄(E)` on the q-side.
fn total_bound(tree: &JunctionTree, kind: TreeKind) -> Result<f64> {
    let node = tree.null_node.unwrap_or(0);
    let local = loc_for(kind, table_of(tree, node)?, &Scope::empty())?;
    let full = ConfigSet::full(1);
    Ok(match kind {
        TreeKind::Mobius => lower_at(&local, &full),
        TreeKind::Commonality => upper_at(&local, &full),
    })
}

impl Model {
    pub fn build(parts: ModelParts) -> Result<Model> {
        let vars = parts.variables;
        let n = vars.len();
        if parts.m_graph.vertex_count() != n {
            return Err(Error::MalformedModel("m-graph does not cover the declared variables".into()));
        }
        let q_graph = parts.q_graph.unwrap_or_else(|| parts.m_graph.clone());
        if q_graph.vertex_count() != n {
            return Err(Error::MalformedModel("q-graph does not cover the declared variables".into()));
        }

        let mut m_tree = tree_for(&parts.m_graph)?;
        bind_potentials(&mut m_tree, &parts.m_potentials, TreeKind::Mobius, &vars)?;
        bind_separators(&mut m_tree, &parts.m_separators, TreeKind::Mobius)?;

        let mut q_tree = tree_for(&q_graph)?;
        match &parts.q_potentials {
            Some(q) => {
                bind_potentials(&mut q_tree, q, TreeKind::Commonality, &vars)?;
                bind_separators(&mut q_tree, &parts.q_separators, TreeKind::Commonality)?;
            }
            None => {
                if q_tree.nodes != m_tree.nodes || q_tree.edges != m_tree.edges {
                    return Err(Error::MalformedModel(
                        "q-potentials can only be derived when both graphs give the same junction tree".into(),
                    ));
                }
                q_tree = derive_q_tree(&m_tree)?;
            }
        }

        if m_tree.len() == 1 || (m_tree.len() == 2 && m_tree.null_node == Some(1)) {
            let total = table_of(&m_tree, 0)?.total();
            if (total - 1.0).abs() > TOL {
                return Err(Error::MalformedModel(format!("Möbius masses sum to {total}, not 1")));
            }
        }

        Ok(Model::from_trees(vars, m_tree, q_tree))
    }

    /// Wraps already-populated trees.
    pub fn from_trees(variables: VariableSet, m_tree: JunctionTree, q_tree: JunctionTree) -> Model {
        Model {
            variables,
            m_prior: m_tree.clone(),
            q_prior: q_tree.clone(),
            m_base: m_tree.clone(),
            q_base: q_tree.clone(),
            m_tree,
            q_tree,
            evidence_log: Vec::new(),
            m_propagated: false,
            q_propagated: false,
            state: None,
        }
    }

    pub fn variables(&self) -> &VariableSet {
        &self.variables
    }

    pub fn m_tree(&self) -> &JunctionTree {
        &self.m_tree
    }

    pub fn q_tree(&self) -> &JunctionTree {
        &self.q_tree
    }

    pub fn tree(&self, kind: TreeKind) -> &JunctionTree {
        match kind {
            TreeKind::Mobius => &self.m_tree,
            TreeKind::Commonality => &self.q_tree,
        }
    }

    /// The tree of the given kind as built, before any evidence.
    pub fn prior_tree(&self, kind: TreeKind) -> &JunctionTree {
        match kind {
            TreeKind::Mobius => &self.m_prior,
            TreeKind::Commonality => &self.q_prior,
        }
    }

    pub fn evidence_log(&self) -> &[Finding] {
        &self.evidence_log
    }

    pub fn is_propagated(&self) -> bool {
        self.m_propagated && self.q_propagated
    }

    /// Restricts one node per tree to the finding's cylinder.
    pub fn enter_evidence(&mut self, finding: Finding) -> Result<()> {
        let scope = finding.event.scope().clone();
        if finding.event.is_empty() {
            return Err(Error::EmptyEvidence);
        }
        let names = || format!("{:?}", self.variables.scope_names(&scope));
        let m_node = self.m_tree.node_containing(&scope).ok_or_else(|| Error::NonLocalEvidence {
            tree: TreeKind::Mobius,
            scope: names(),
        })?;
        let q_node = self.q_tree.node_containing(&scope).ok_or_else(|| Error::NonLocalEvidence {
            tree: TreeKind::Commonality,
            scope: names(),
        })?;
        if !finding.event.is_full() {
            for (tree, node) in [
                (&mut self.m_tree, m_node),
                (&mut self.m_base, m_node),
                (&mut self.q_tree, q_node),
                (&mut self.q_base, q_node),
            ] {
                let restricted = restrict_to_evidence(table_of(tree, node)?, &finding.event)?;
                tree.node_potentials[node] = Potential::Table(restricted);
            }
            self.m_propagated = false;
            self.q_propagated = false;
            self.state = None;
        }
        self.evidence_log.push(finding);
        Ok(())
    }

    /// Full collect/distribute propagation of both trees.
    ///
    /// A nonzero value divided by zero on the q-side, or an evidence upper
    /// probability of zero, is a contradiction. The same singularity on the
    /// m-side alone only means `P(E) = 0`.
    pub fn propagate(&mut self) -> Result<()> {
        if self.is_propagated() {
            return match self.state {
                Some(s) if s.contradiction => Err(self.contradiction_error(s)),
                _ => Ok(()),
            };
        }
        let mut m_tree = self.m_base.clone();
        let m_singular = propagate_tree(&mut m_tree, TreeKind::Mobius)?;
        let mut q_tree = self.q_base.clone();
        let q_singular = propagate_tree(&mut q_tree, TreeKind::Commonality)?;

        let lower_e = total_bound(&m_tree, TreeKind::Mobius)?;
        let upper_e = total_bound(&q_tree, TreeKind::Commonality)?;
        let empty_q = q_tree
            .nodes
            .iter()
            .enumerate()
            .any(|(i, s)| q_tree.node_potentials[i].value(&ConfigSet::empty(s.size())).abs() <= TOL);
        let state = Propagated {
            lower_e: if m_singular { 0.0 } else { lower_e },
            upper_e,
            contradiction: q_singular || empty_q || upper_e <= TOL,
            m_singular,
        };
        self.m_tree = m_tree;
        self.q_tree = q_tree;
        self.m_propagated = true;
        self.q_propagated = true;
        self.state = Some(state);
        if state.contradiction {
            return Err(self.contradiction_error(state));
        }
        Ok(())
    }

    fn contradiction_error(&self, s: Propagated) -> Error {
        Error::Contradiction(format!("upper probability of the evidence is {:.3e}", s.upper_e.max(0.0)))
    }

    /// Propagates if needed; `Ok(false)` means the evidence is contradictory.
    fn ensure_propagated(&mut self) -> Result<bool> {
        match self.propagate() {
            Ok(()) => Ok(true),
            Err(Error::Contradiction(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// `[P(E), P̄(E)]` for the evidence entered so far.
    pub fn total_evidence_bounds(&mut self) -> Result<Interval> {
        if !self.ensure_propagated()? {
            return Ok(Interval::contradiction());
        }
        let s = self.state.expect("propagated");
        let status = if s.lower_e <= TOL || s.m_singular { Status::Vacuous } else { Status::Normal };
        Ok(Interval {
            lower: s.lower_e.clamp(0.0, 1.0),
            upper: s.upper_e.clamp(0.0, 1.0),
            status,
        })
    }

    /// Posterior lower and upper probability of the cylinder of `target`
    /// given all evidence. Propagates first when needed.
    pub fn query_posterior(&mut self, target: &Event) -> Result<Interval> {
        if !self.ensure_propagated()? {
            return Ok(Interval::contradiction());
        }
        self.query_propagated(target)
    }

    /// Read-only query on an already propagated model.
    pub fn query_propagated(&self, target: &Event) -> Result<Interval> {
        let state = self
            .state
            .filter(|_| self.is_propagated())
            .ok_or_else(|| Error::Configuration("model is not propagated".into()))?;
        if state.contradiction {
            return Ok(Interval::contradiction());
        }
        let inputs = self.conditioning_inputs(target)?;
        conditional_interval(&inputs)
    }

    /// The six bounds and two containment flags for `target` read from the
    /// propagated trees.
    pub fn conditioning_inputs(&self, target: &Event) -> Result<ConditioningInputs> {
        let scope = target.scope();
        let names = || format!("{:?}", self.variables.scope_names(scope));
        let m_node = self.m_tree.node_containing(scope).ok_or_else(|| Error::NonLocalQuery {
            tree: TreeKind::Mobius,
            scope: names(),
        })?;
        let q_node = self.q_tree.node_containing(scope).ok_or_else(|| Error::NonLocalQuery {
            tree: TreeKind::Commonality,
            scope: names(),
        })?;
        let m_local = loc_m(table_of(&self.m_tree, m_node)?, scope)?;
        let q_local = loc_q(table_of(&self.q_tree, q_node)?, scope)?;

        let a = target.set();
        let ac = a.complement(scope.size());
        let full = ConfigSet::full(scope.size());
        let m_singular = self.state.is_some_and(|s| s.m_singular);
        let low = |e: &ConfigSet| if m_singular { 0.0 } else { lower_at(&m_local, e) };
        let up_ae = upper_at(&q_local, a);
        let up_ace = upper_at(&q_local, &ac);
        Ok(ConditioningInputs {
            low_ae: low(a),
            up_ace,
            up_ae,
            low_ace: low(&ac),
            low_e: low(&full),
            up_e: upper_at(&q_local, &full),
            e_subset_a: up_ace <= TOL,
            e_subset_ac: up_ae <= TOL,
        })
    }

    /// Whether every pair of adjacent potentials agrees on its separator
    /// under the tree's localization operator.
    pub fn pairwise_consistent(&self, kind: TreeKind, tol: f64) -> Result<bool> {
        let tree = self.tree(kind);
        for e in &tree.edges {
            let a = loc_for(kind, table_of(tree, e.a)?, &e.separator)?;
            let b = loc_for(kind, table_of(tree, e.b)?, &e.separator)?;
            if !a.approx_eq(&b, tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Commonality potentials for the same tree as `m_tree`, obtained from the
/// propagated Möbius marginals of each clique and separator. This encodes the
/// dual joint whenever the commonality function factorizes on the same
/// graph.
fn derive_q_tree(m_tree: &JunctionTree) -> Result<JunctionTree> {
    let mut marg = m_tree.clone();
    propagate_tree(&mut marg, TreeKind::Mobius)?;
    let to_q = |f: &SetFunction| -> Result<SetFunction> {
        let p = inv_mobius(&f.clone().with_role(Role::Mobius))?;
        let q = commonality(&dual(&p)?)?;
        Ok(q.with_role(Role::Potential))
    };
    let mut q_tree = m_tree.clone();
    for i in 0..marg.len() {
        q_tree.node_potentials[i] = Potential::Table(to_q(table_of(&marg, i)?)?);
    }
    for (i, e) in marg.edges.iter().enumerate() {
        if e.separator.is_empty() {
            continue;
        }
        let sep = match &marg.edge_potentials[i] {
            Potential::Table(t) => t.clone(),
            Potential::Unit => loc_m(table_of(&marg, e.a)?, &e.separator)?,
        };
        q_tree.edge_potentials[i] = Potential::Table(to_q(&sep)?);
    }
    Ok(q_tree)
}

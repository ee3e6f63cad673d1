//! Seeded random models and capacities for differential testing.
//!
//! Models are built so that the Markov conditions hold by construction:
//! every separator gets a random partition of its configurations, and every
//! clique entry projects onto exactly one block of each adjacent separator.
//! Child cliques are conditional (masses sum to 1 per parent block), the
//! root is normalized. The q-side is the commonality function of the dual
//! of the assembled joint, localized back onto the same tree. Candidates
//! that fail any check are discarded and redrawn.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{assemble_joint_with_guard, assemble_m, report_for, FlatJoint};
use crate::engine::{DeclaredPotential, DeclaredSeparator, Finding, Model, ModelParts};
use crate::error::{Error, Result};
use crate::event::{ConfigSet, Event, Scope, VarId, Variable, VariableSet};
use crate::graph::{build_junction_tree, maximal_cliques, triangulate, Graph};
use crate::setfunc::{commonality, dual, inv_mobius, loc_q, Role, SetFunction};

const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone)]
pub struct GeneratedModel {
    pub model: Model,
    /// Joint of the model before any evidence.
    pub joint: FlatJoint,
}

/// A random Markov model with 2 to 4 variables of 2 or 3 values, at most
/// `limit` joint configurations and 1 to 3 cliques.
pub fn random_model<R: Rng>(rng: &mut R, limit: usize) -> Result<GeneratedModel> {
    for _ in 0..MAX_ATTEMPTS {
        if let Ok(Some(g)) = attempt(rng, limit) {
            return Ok(g);
        }
    }
    Err(Error::MalformedModel(format!(
        "no valid model within {MAX_ATTEMPTS} attempts at size guard {limit}"
    )))
}

fn random_partition<R: Rng>(rng: &mut R, size: usize) -> Vec<ConfigSet> {
    let k = rng.gen_range(1..=size);
    let labels: Vec<usize> = (0..size).map(|_| rng.gen_range(0..k)).collect();
    (0..k)
        .map(|b| ConfigSet::from_indices(size, (0..size as u32).filter(|&i| labels[i as usize] == b)))
        .filter(|s| !s.is_empty())
        .collect()
}

fn thin<R: Rng>(rng: &mut R, x: &ConfigSet, universe: usize) -> ConfigSet {
    ConfigSet::from_indices(universe, x.iter().filter(|_| rng.gen_bool(0.6)))
}

struct Side {
    map: Vec<u32>,
    size: usize,
    blocks: Vec<ConfigSet>,
}

fn attempt<R: Rng>(rng: &mut R, limit: usize) -> Result<Option<GeneratedModel>> {
    let nvars = rng.gen_range(2..=4);
    let cards: Vec<usize> = (0..nvars).map(|_| rng.gen_range(2..=3)).collect();
    if cards.iter().product::<usize>() > limit {
        return Ok(None);
    }
    let vars = VariableSet::new(
        cards
            .iter()
            .enumerate()
            .map(|(i, &k)| Variable::new(format!("v{i}"), (0..k).map(|j| j.to_string())))
            .collect(),
    )?;
    let mut g = Graph::new(cards.iter().map(|&k| k as u32).collect());
    for a in 0..nvars {
        for b in (a + 1)..nvars {
            if rng.gen_bool(0.5) {
                g.add_edge(a, b)?;
            }
        }
    }
    let (chordal, order) = triangulate(&g);
    let cliques = maximal_cliques(&chordal, &order)?;
    if cliques.len() > 3 {
        return Ok(None);
    }
    let tree = build_junction_tree(&cliques);
    let partitions: Vec<Vec<ConfigSet>> = tree
        .edges
        .iter()
        .map(|e| random_partition(rng, e.separator.size()))
        .collect();

    let mut declared = Vec::new();
    for (node, parent) in tree.bfs(0) {
        let scope = &tree.nodes[node];
        if scope.is_empty() {
            continue;
        }
        let size = scope.size();
        let side = |e: usize| -> Result<Side> {
            let sep = &tree.edges[e].separator;
            Ok(Side {
                map: scope.projection_map(sep)?,
                size: sep.size(),
                blocks: partitions[e].clone(),
            })
        };
        let parent_side = match parent {
            Some((_, e)) if !tree.edges[e].separator.is_empty() => Some(side(e)?),
            _ => None,
        };
        let children: Vec<Side> = tree
            .neighbors(node)
            .filter(|&(_, e)| Some(e) != parent.map(|p| p.1) && !tree.edges[e].separator.is_empty())
            .map(|(_, e)| side(e))
            .collect::<Result<_>>()?;

        let parent_blocks: Vec<Option<&ConfigSet>> = match &parent_side {
            Some(p) => p.blocks.iter().map(Some).collect(),
            None => vec![None],
        };
        let mut table = SetFunction::new(scope.clone(), Role::Potential);
        for b in parent_blocks {
            let widest = children.iter().map(|c| c.blocks.len()).max().unwrap_or(1);
            let k = rng.gen_range(1..=2).max(widest);
            let perms: Vec<Vec<usize>> = children
                .iter()
                .map(|c| {
                    let mut p: Vec<usize> = (0..c.blocks.len()).collect();
                    p.shuffle(rng);
                    p
                })
                .collect();
            let mut entries: Vec<(ConfigSet, f64)> = Vec::new();
            for j in 0..k {
                let wanted: Vec<&ConfigSet> =
                    children.iter().zip(&perms).map(|(c, p)| &c.blocks[p[j % p.len()]]).collect();
                let mut base = ConfigSet::full(size);
                if let (Some(p), Some(b)) = (&parent_side, b) {
                    base = base.intersection(&b.preimage(&p.map, size));
                }
                for (c, w) in children.iter().zip(&wanted) {
                    base = base.intersection(&w.preimage(&c.map, size));
                }
                let exact = |x: &ConfigSet| {
                    !x.is_empty()
                        && parent_side
                            .as_ref()
                            .zip(b)
                            .is_none_or(|(p, b)| &x.map_through(&p.map, p.size) == b)
                        && children.iter().zip(&wanted).all(|(c, w)| &x.map_through(&c.map, c.size) == *w)
                };
                let mut pick = None;
                for t in 0..20 {
                    let x = if t == 19 { base.clone() } else { thin(rng, &base, size) };
                    if exact(&x) {
                        pick = Some(x);
                        break;
                    }
                }
                if let Some(x) = pick {
                    entries.push((x, rng.gen_range(0.05..1.0)));
                }
            }
            if entries.is_empty() {
                return Ok(None);
            }
            let total: f64 = entries.iter().map(|e| e.1).sum();
            for (x, w) in entries {
                let v = table.get(&x) + w / total;
                table.insert(x, v);
            }
        }
        declared.push(DeclaredPotential {
            clique: scope.clone(),
            table,
        });
    }

    let m_only = Model::build(ModelParts {
        variables: vars.clone(),
        m_graph: g.clone(),
        q_graph: None,
        m_potentials: declared.clone(),
        q_potentials: None,
        m_separators: vec![],
        q_separators: vec![],
    })?;
    let m_joint = assemble_m(m_only.m_tree(), &vars, limit)?;
    let q_joint = commonality(&dual(&inv_mobius(&m_joint)?)?)?;
    let q_potentials = tree
        .nodes
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            Ok(DeclaredPotential {
                clique: s.clone(),
                table: loc_q(&q_joint, s)?.with_role(Role::Potential),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let q_separators = tree
        .edges
        .iter()
        .filter(|e| !e.separator.is_empty())
        .map(|e| {
            Ok(DeclaredSeparator {
                between: (tree.nodes[e.a].clone(), tree.nodes[e.b].clone()),
                table: loc_q(&q_joint, &e.separator)?.with_role(Role::Potential),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = Model::build(ModelParts {
        variables: vars,
        m_graph: g,
        q_graph: None,
        m_potentials: declared,
        q_potentials: Some(q_potentials),
        m_separators: vec![],
        q_separators,
    })?;

    let joint = assemble_joint_with_guard(&model, limit)?;
    let report = report_for(&joint.m_joint, &joint.q_joint, model.m_tree(), model.q_tree())?;
    if !report.passed() || !report.partition_ok.iter().all(|&b| b) {
        return Ok(None);
    }
    if model.clone().propagate().is_err() {
        return Ok(None);
    }
    Ok(Some(GeneratedModel { model, joint }))
}

/// A random nonempty event over a random nonempty part of one clique that
/// fits a node of both trees.
pub fn random_finding<R: Rng>(rng: &mut R, model: &Model) -> Finding {
    let nodes: Vec<&Scope> = model.m_tree().nodes.iter().filter(|s| !s.is_empty()).collect();
    loop {
        let node = nodes[rng.gen_range(0..nodes.len())];
        let pairs: Vec<(VarId, u32)> = node
            .vars()
            .iter()
            .zip(node.cards())
            .filter(|_| rng.gen_bool(0.6))
            .map(|(&v, &c)| (v, c))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let sub = Scope::new(pairs).expect("distinct variables");
        if model.q_tree().node_containing(&sub).is_none() {
            continue;
        }
        let event = random_nonempty_event(rng, &sub);
        return Finding::new(event);
    }
}

/// A random nonempty event over `scope`.
pub fn random_nonempty_event<R: Rng>(rng: &mut R, scope: &Scope) -> Event {
    let n = scope.size();
    loop {
        let set = ConfigSet::from_indices(n, (0..n as u32).filter(|_| rng.gen_bool(0.5)));
        if !set.is_empty() {
            return Event::new(scope.clone(), set);
        }
    }
}

/// A random 2-monotone lower probability on a single variable with `n`
/// values: a belief function, a convex power of a probability, or a convex
/// mixture of the two. About a third of the draws leave some values with
/// upper probability zero.
pub fn random_two_monotone<R: Rng>(rng: &mut R, n: usize) -> SetFunction {
    let scope = Scope::new(vec![(VarId(0), n as u32)]).expect("single variable");
    let all = (1u64 << n) - 1;
    let support = if n > 1 && rng.gen_bool(0.35) {
        let null = loop {
            let m = rng.gen_range(1..all);
            if m != all {
                break m;
            }
        };
        all & !null
    } else {
        all
    };
    let subsets_of_support = |rng: &mut R| loop {
        let m = rng.gen_range(1..=all) & support;
        if m != 0 {
            break m;
        }
    };

    let mut focal: Vec<(u64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| (subsets_of_support(rng), rng.gen_range(0.05..1.0)))
        .collect();
    let ftotal: f64 = focal.iter().map(|f| f.1).sum();
    for f in &mut focal {
        f.1 /= ftotal;
    }
    let mut weights: Vec<f64> = (0..n)
        .map(|i| if support >> i & 1 == 1 { rng.gen_range(0.0..1.0) } else { 0.0 })
        .collect();
    if rng.gen_bool(0.3) {
        let members: Vec<usize> = (0..n).filter(|i| support >> i & 1 == 1).collect();
        if members.len() > 1 {
            weights[*members.choose(rng).unwrap()] = 0.0;
        }
    }
    let wtotal: f64 = weights.iter().sum();
    if wtotal <= 0.0 {
        let first = (0..n).find(|i| support >> i & 1 == 1).unwrap();
        weights[first] = 1.0;
    } else {
        for w in &mut weights {
            *w /= wtotal;
        }
    }
    let power = rng.gen_range(1.0..3.0);
    let lambda = match rng.gen_range(0..3) {
        0 => 1.0,
        1 => 0.0,
        _ => rng.gen_range(0.0..1.0),
    };

    let dense: Vec<f64> = (0..=all)
        .map(|a| {
            if a == all {
                return 1.0;
            }
            let bel: f64 = focal.iter().filter(|(f, _)| f & !a == 0).map(|f| f.1).sum();
            let p0: f64 = (0..n).filter(|i| a >> i & 1 == 1).map(|i| weights[i]).sum();
            lambda * bel + (1.0 - lambda) * p0.min(1.0).powf(power)
        })
        .collect();
    SetFunction::from_dense(scope, Role::Lower, &dense).expect("small scope")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_markov_with_guard, credal_vertices};
    use crate::setfunc::{check_two_monotone, TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_are_markov_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let g = random_model(&mut rng, 16).unwrap();
            assert!((g.joint.m_joint.total() - 1.0).abs() < TOL);
            assert!(check_markov_with_guard(&g.model, 16).unwrap().passed());
            assert!(g.model.m_tree().len() <= 4);
        }
    }

    #[test]
    fn generated_capacities_are_two_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            for _ in 0..10 {
                let p = random_two_monotone(&mut rng, n);
                assert!(check_two_monotone(&p, 6).unwrap().passed());
                assert!(!credal_vertices(&p).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let a = random_model(&mut ChaCha8Rng::seed_from_u64(3), 16).unwrap();
        let b = random_model(&mut ChaCha8Rng::seed_from_u64(3), 16).unwrap();
        assert_eq!(a.model, b.model);
    }
}

//! Finite product spaces and events over them.
//!
//! A [`Scope`] is a set of variables kept in declaration order. Every
//! configuration of a scope has a lexicographic index (first variable most
//! significant), and an [`Event`] is a set of those indices. Events over
//! scopes with at most 64 configurations are stored as a single `u64` bit
//! mask; larger scopes use a sorted index vector.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Index of a variable in its [`VariableSet`]; the order of ids is the
/// canonical variable order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub domain: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name: name.into(),
            domain: domain.into_iter().map(Into::into).collect(),
        }
    }

    pub fn card(&self) -> usize {
        self.domain.len()
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == label)
    }
}

/// The declared variables of a model, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VariableSet {
    vars: Vec<Variable>,
    by_name: HashMap<String, VarId>,
}

impl VariableSet {
    pub fn new(vars: Vec<Variable>) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, v) in vars.iter().enumerate() {
            if v.domain.is_empty() {
                return Err(Error::Configuration(format!("variable {} has an empty domain", v.name)));
            }
            for (j, a) in v.domain.iter().enumerate() {
                if v.domain[..j].contains(a) {
                    return Err(Error::Configuration(format!(
                        "variable {} repeats domain value {a}",
                        v.name
                    )));
                }
            }
            if by_name.insert(v.name.clone(), VarId(i)).is_some() {
                return Err(Error::Configuration(format!("duplicate variable {}", v.name)));
            }
        }
        Ok(Self { vars, by_name })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn id(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &Variable)> {
        self.vars.iter().enumerate().map(|(i, v)| (VarId(i), v))
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    /// Scope over the named variables.
    pub fn scope<S: AsRef<str>>(&self, names: &[S]) -> Result<Scope> {
        let ids = names
            .iter()
            .map(|n| {
                self.id(n.as_ref())
                    .ok_or_else(|| Error::Scope(format!("unknown variable {}", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        self.scope_of(&ids)
    }

    pub fn scope_of(&self, ids: &[VarId]) -> Result<Scope> {
        let mut pairs: Vec<(VarId, u32)> = Vec::with_capacity(ids.len());
        for &id in ids {
            if id.0 >= self.vars.len() {
                return Err(Error::Scope(format!("variable id {} out of range", id.0)));
            }
            pairs.push((id, self.vars[id.0].card() as u32));
        }
        Scope::new(pairs)
    }

    pub fn full_scope(&self) -> Scope {
        let ids: Vec<VarId> = (0..self.vars.len()).map(VarId).collect();
        self.scope_of(&ids).expect("declared variables form a scope")
    }

    pub fn scope_names(&self, scope: &Scope) -> Vec<String> {
        scope.vars().iter().map(|&v| self.get(v).name.clone()).collect()
    }

    /// Human-readable rendering of one configuration of `scope`.
    pub fn config_label(&self, scope: &Scope, index: u32) -> String {
        let values = scope.decode(index);
        let parts: Vec<String> = scope
            .vars()
            .iter()
            .zip(values)
            .map(|(&v, x)| {
                let var = self.get(v);
                format!("{}={}", var.name, var.domain[x as usize])
            })
            .collect();
        format!("({})", parts.join(","))
    }

    pub fn event_label(&self, event: &Event) -> String {
        let parts: Vec<String> = event
            .set()
            .iter()
            .map(|i| self.config_label(event.scope(), i))
            .collect();
        format!("{{{}}}", parts.join(" "))
    }
}

/// An ordered set of variables with their domain sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Scope {
    vars: Vec<VarId>,
    cards: Vec<u32>,
}

impl Scope {
    /// Builds a scope from `(variable, cardinality)` pairs in any order.
    pub fn new(mut pairs: Vec<(VarId, u32)>) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Scope(format!("variable {} repeated in scope", w[0].0 .0)));
            }
        }
        if let Some(p) = pairs.iter().find(|p| p.1 == 0) {
            return Err(Error::Scope(format!("variable {} has an empty domain", p.0 .0)));
        }
        let scope = Self {
            vars: pairs.iter().map(|p| p.0).collect(),
            cards: pairs.iter().map(|p| p.1).collect(),
        };
        if scope.size_u64() > u32::MAX as u64 {
            return Err(Error::SizeGuard {
                what: "scope configuration count",
                size: scope.size_u64(),
                limit: u32::MAX as u64,
            });
        }
        Ok(scope)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn cards(&self) -> &[u32] {
        &self.cards
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    fn size_u64(&self) -> u64 {
        self.cards.iter().map(|&c| c as u64).product()
    }

    /// Number of configurations, `|Ω_scope|`.
    pub fn size(&self) -> usize {
        self.size_u64() as usize
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.vars.binary_search(&v).is_ok()
    }

    pub fn position(&self, v: VarId) -> Option<usize> {
        self.vars.binary_search(&v).ok()
    }

    pub fn is_subset(&self, other: &Scope) -> bool {
        self.vars.iter().all(|&v| other.contains(v))
    }

    pub fn union(&self, other: &Scope) -> Scope {
        let mut pairs: Vec<(VarId, u32)> = self.vars.iter().copied().zip(self.cards.iter().copied()).collect();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if !self.contains(v) {
                pairs.push((v, c));
            }
        }
        Scope::new(pairs).expect("union of valid scopes")
    }

    pub fn intersection(&self, other: &Scope) -> Scope {
        let pairs = self
            .vars
            .iter()
            .zip(&self.cards)
            .filter(|(v, _)| other.contains(**v))
            .map(|(&v, &c)| (v, c))
            .collect();
        Scope::new(pairs).expect("intersection of valid scopes")
    }

    fn strides(&self) -> Vec<u32> {
        let mut strides = vec![1u32; self.cards.len()];
        for i in (0..self.cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    /// Configuration index of a value tuple given in scope order.
    pub fn encode(&self, values: &[u32]) -> u32 {
        debug_assert_eq!(values.len(), self.cards.len());
        values
            .iter()
            .zip(&self.cards)
            .fold(0u32, |acc, (&v, &c)| acc * c + v)
    }

    pub fn decode(&self, mut index: u32) -> Vec<u32> {
        let mut out = vec![0; self.cards.len()];
        for i in (0..self.cards.len()).rev() {
            out[i] = index % self.cards[i];
            index /= self.cards[i];
        }
        out
    }

    /// For every configuration of `self`, the index of its restriction to
    /// `sub`.
    pub fn projection_map(&self, sub: &Scope) -> Result<Vec<u32>> {
        if !sub.is_subset(self) {
            return Err(Error::Scope(format!(
                "cannot project from {:?} onto {:?}",
                self.vars, sub.vars
            )));
        }
        let sub_strides = sub.strides();
        let picks: Vec<(usize, u32)> = sub
            .vars
            .iter()
            .zip(&sub_strides)
            .map(|(v, &s)| (self.position(*v).unwrap(), s))
            .collect();
        let n = self.size();
        let mut out = Vec::with_capacity(n);
        let mut digits = vec![0u32; self.cards.len()];
        for _ in 0..n {
            out.push(picks.iter().map(|&(p, s)| digits[p] * s).sum());
            // odometer increment, last variable fastest
            for i in (0..digits.len()).rev() {
                digits[i] += 1;
                if digits[i] < self.cards[i] {
                    break;
                }
                digits[i] = 0;
            }
        }
        Ok(out)
    }
}

/// Storage for a set of configuration indices of one scope.
///
/// The variant is fixed by the size of the scope: `Bits` when the scope has
/// at most 64 configurations, `Sorted` otherwise. Both variants never appear
/// for the same universe, so derived equality and ordering are structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConfigSet {
    Bits(u64),
    Sorted(Vec<u32>),
}

impl ConfigSet {
    pub fn empty(universe: usize) -> Self {
        if universe <= 64 {
            ConfigSet::Bits(0)
        } else {
            ConfigSet::Sorted(Vec::new())
        }
    }

    pub fn full(universe: usize) -> Self {
        if universe <= 64 {
            ConfigSet::Bits(low_bits(universe))
        } else {
            ConfigSet::Sorted((0..universe as u32).collect())
        }
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = u32>) -> Self {
        if universe <= 64 {
            let mut bits = 0u64;
            for i in indices {
                debug_assert!((i as usize) < universe);
                bits |= 1 << i;
            }
            ConfigSet::Bits(bits)
        } else {
            let mut v: Vec<u32> = indices.into_iter().collect();
            v.sort_unstable();
            v.dedup();
            ConfigSet::Sorted(v)
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ConfigSet::Bits(b) => b.count_ones() as usize,
            ConfigSet::Sorted(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            ConfigSet::Bits(b) => *b == 0,
            ConfigSet::Sorted(v) => v.is_empty(),
        }
    }

    pub fn contains(&self, i: u32) -> bool {
        match self {
            ConfigSet::Bits(b) => i < 64 && b >> i & 1 == 1,
            ConfigSet::Sorted(v) => v.binary_search(&i).is_ok(),
        }
    }

    pub fn iter(&self) -> ConfigIter<'_> {
        match self {
            ConfigSet::Bits(b) => ConfigIter::Bits(*b),
            ConfigSet::Sorted(v) => ConfigIter::Sorted(v.iter()),
        }
    }

    pub fn is_subset(&self, other: &ConfigSet) -> bool {
        match (self, other) {
            (ConfigSet::Bits(a), ConfigSet::Bits(b)) => a & !b == 0,
            _ => self.iter().all(|i| other.contains(i)),
        }
    }

    pub fn intersection(&self, other: &ConfigSet) -> ConfigSet {
        match (self, other) {
            (ConfigSet::Bits(a), ConfigSet::Bits(b)) => ConfigSet::Bits(a & b),
            (ConfigSet::Sorted(a), _) => {
                ConfigSet::Sorted(a.iter().copied().filter(|&i| other.contains(i)).collect())
            }
            (_, ConfigSet::Sorted(b)) => {
                ConfigSet::Sorted(b.iter().copied().filter(|&i| self.contains(i)).collect())
            }
        }
    }

    pub fn union(&self, other: &ConfigSet) -> ConfigSet {
        match (self, other) {
            (ConfigSet::Bits(a), ConfigSet::Bits(b)) => ConfigSet::Bits(a | b),
            _ => {
                let mut v: Vec<u32> = self.iter().chain(other.iter()).collect();
                v.sort_unstable();
                v.dedup();
                ConfigSet::Sorted(v)
            }
        }
    }

    pub fn complement(&self, universe: usize) -> ConfigSet {
        match self {
            ConfigSet::Bits(b) => ConfigSet::Bits(!b & low_bits(universe)),
            ConfigSet::Sorted(v) => {
                let mut out = Vec::with_capacity(universe - v.len());
                let mut it = v.iter().peekable();
                for i in 0..universe as u32 {
                    if it.peek() == Some(&&i) {
                        it.next();
                    } else {
                        out.push(i);
                    }
                }
                ConfigSet::Sorted(out)
            }
        }
    }

    /// Image of this set under a configuration map (e.g. a projection map).
    pub fn map_through(&self, map: &[u32], target_universe: usize) -> ConfigSet {
        if let (ConfigSet::Bits(b), true) = (self, target_universe <= 64) {
            let mut out = 0u64;
            let mut rest = *b;
            while rest != 0 {
                let i = rest.trailing_zeros();
                out |= 1 << map[i as usize];
                rest &= rest - 1;
            }
            return ConfigSet::Bits(out);
        }
        ConfigSet::from_indices(target_universe, self.iter().map(|i| map[i as usize]))
    }

    /// Preimage of this set under a configuration map.
    pub fn preimage(&self, map: &[u32], source_universe: usize) -> ConfigSet {
        ConfigSet::from_indices(
            source_universe,
            (0..map.len() as u32).filter(|&i| self.contains(map[i as usize])),
        )
    }
}

pub enum ConfigIter<'a> {
    Bits(u64),
    Sorted(std::slice::Iter<'a, u32>),
}

impl Iterator for ConfigIter<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        match self {
            ConfigIter::Bits(b) => {
                if *b == 0 {
                    None
                } else {
                    let i = b.trailing_zeros();
                    *b &= *b - 1;
                    Some(i)
                }
            }
            ConfigIter::Sorted(it) => it.next().copied(),
        }
    }
}

fn low_bits(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A set of configurations over a scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    scope: Scope,
    set: ConfigSet,
}

impl Event {
    pub fn new(scope: Scope, set: ConfigSet) -> Self {
        debug_assert!(set.iter().all(|i| (i as usize) < scope.size()));
        Self { scope, set }
    }

    pub fn from_indices(scope: Scope, indices: impl IntoIterator<Item = u32>) -> Self {
        let set = ConfigSet::from_indices(scope.size(), indices);
        Self { scope, set }
    }

    /// Event from value tuples in scope order.
    pub fn from_configs<'a>(scope: Scope, configs: impl IntoIterator<Item = &'a [u32]>) -> Result<Self> {
        let mut idx = Vec::new();
        for c in configs {
            if c.len() != scope.len() || c.iter().zip(scope.cards()).any(|(&v, &k)| v >= k) {
                return Err(Error::Configuration(format!("configuration {c:?} is not well-typed")));
            }
            idx.push(scope.encode(c));
        }
        Ok(Self::from_indices(scope, idx))
    }

    pub fn empty(scope: Scope) -> Self {
        let set = ConfigSet::empty(scope.size());
        Self { scope, set }
    }

    pub fn full(scope: Scope) -> Self {
        let set = ConfigSet::full(scope.size());
        Self { scope, set }
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn set(&self) -> &ConfigSet {
        &self.set
    }

    pub fn into_parts(self) -> (Scope, ConfigSet) {
        (self.scope, self.set)
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.set.len() == self.scope.size()
    }

    pub fn contains_config(&self, values: &[u32]) -> bool {
        self.set.contains(self.scope.encode(values))
    }

    fn same_scope(&self, other: &Event) -> Result<()> {
        if self.scope != other.scope {
            return Err(Error::Scope("events are over different scopes".into()));
        }
        Ok(())
    }

    pub fn is_subset(&self, other: &Event) -> Result<bool> {
        self.same_scope(other)?;
        Ok(self.set.is_subset(&other.set))
    }

    pub fn intersection(&self, other: &Event) -> Result<Event> {
        self.same_scope(other)?;
        Ok(Event::new(self.scope.clone(), self.set.intersection(&other.set)))
    }

    pub fn union(&self, other: &Event) -> Result<Event> {
        self.same_scope(other)?;
        Ok(Event::new(self.scope.clone(), self.set.union(&other.set)))
    }

    pub fn complement(&self) -> Event {
        Event::new(self.scope.clone(), self.set.complement(self.scope.size()))
    }

    /// Restrictions of this event's configurations to `sub`.
    pub fn project(&self, sub: &Scope) -> Result<Event> {
        let map = self.scope.projection_map(sub)?;
        Ok(Event::new(sub.clone(), self.set.map_through(&map, sub.size())))
    }

    /// The cylinder `e × Ω_{super ∖ scope}`.
    pub fn extend(&self, sup: &Scope) -> Result<Event> {
        let map = sup.projection_map(&self.scope)?;
        Ok(Event::new(sup.clone(), self.set.preimage(&map, sup.size())))
    }

    /// Smallest rectangle containing this event with respect to `cliques`:
    /// the intersection over cliques of the cylinders of the projections.
    pub fn rectangularize(&self, cliques: &[Scope]) -> Result<Event> {
        if cliques.is_empty() {
            return if self.is_full() {
                Ok(self.clone())
            } else {
                Err(Error::Configuration(
                    "rectangularization needs at least one clique".into(),
                ))
            };
        }
        let covered = cliques.iter().fold(Scope::empty(), |acc, c| acc.union(c));
        if !self.scope.is_subset(&covered) {
            return Err(Error::Scope("cliques do not cover the event scope".into()));
        }
        let mut acc = ConfigSet::full(self.scope.size());
        for c in cliques {
            let local = c.intersection(&self.scope);
            let cyl = self.project(&local)?.extend(&self.scope)?;
            acc = acc.intersection(&cyl.set);
        }
        Ok(Event::new(self.scope.clone(), acc))
    }

    pub fn is_rectangle(&self, cliques: &[Scope]) -> Result<bool> {
        Ok(self.rectangularize(cliques)? == *self)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.set.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", idx.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn xy() -> (VariableSet, Scope, Scope, Scope) {
        let vars = VariableSet::new(vec![
            Variable::new("x", ["0", "1"]),
            Variable::new("y", ["0", "1"]),
        ])
        .unwrap();
        let x = vars.scope(&["x"]).unwrap();
        let y = vars.scope(&["y"]).unwrap();
        let xy = vars.scope(&["y", "x"]).unwrap();
        (vars, x, y, xy)
    }

    fn ev(scope: &Scope, configs: &[&[u32]]) -> Event {
        Event::from_configs(scope.clone(), configs.iter().copied()).unwrap()
    }

    #[test]
    fn scope_is_sorted_by_declaration() {
        let (vars, _, _, xy) = xy();
        assert_eq!(vars.scope_names(&xy), vec!["x", "y"]);
        assert_eq!(xy.size(), 4);
        assert_eq!(Scope::empty().size(), 1);
    }

    #[test]
    fn projection_examples() {
        let (_, x, _, xy) = xy();
        let diag = ev(&xy, &[&[0, 0], &[1, 1]]);
        assert_eq!(diag.project(&x).unwrap(), Event::full(x.clone()));
        assert_eq!(Event::empty(xy.clone()).project(&x).unwrap(), Event::empty(x.clone()));
        let row = ev(&xy, &[&[0, 0], &[0, 1]]);
        assert_eq!(row.project(&x).unwrap(), ev(&x, &[&[0]]));
    }

    #[test]
    fn project_onto_non_subscope_is_an_error() {
        let (vars, x, _, _) = xy();
        let y = vars.scope(&["y"]).unwrap();
        assert!(Event::full(x).project(&y).is_err());
    }

    #[test]
    fn extension_examples() {
        let (_, x, _, xy) = xy();
        let e = ev(&x, &[&[0]]);
        assert_eq!(e.extend(&xy).unwrap(), ev(&xy, &[&[0, 0], &[0, 1]]));
        assert!(Event::full(x.clone()).extend(&xy).unwrap().is_full());
        assert!(Event::full(xy.clone()).extend(&x).is_err());
    }

    #[test]
    fn rectangularization_examples() {
        let (_, x, y, xy) = xy();
        let diag = ev(&xy, &[&[0, 0], &[1, 1]]);
        let cliques = [x.clone(), y.clone()];
        assert!(diag.rectangularize(&cliques).unwrap().is_full());
        let row = ev(&xy, &[&[0, 0], &[0, 1]]);
        assert_eq!(row.rectangularize(&cliques).unwrap(), row);
        assert_eq!(diag.rectangularize(std::slice::from_ref(&xy)).unwrap(), diag);
        assert!(diag.rectangularize(&[]).is_err());
        assert!(Event::full(xy).rectangularize(&[]).unwrap().is_full());
    }

    #[test]
    fn empty_scope_has_two_events() {
        let s = Scope::empty();
        assert_eq!(Event::full(s.clone()).len(), 1);
        assert_eq!(Event::empty(s).len(), 0);
    }

    #[test]
    fn large_scopes_use_sorted_sets() {
        let vars = VariableSet::new(vec![
            Variable::new("a", (0..9).map(|i| i.to_string())),
            Variable::new("b", (0..9).map(|i| i.to_string())),
        ])
        .unwrap();
        let ab = vars.scope(&["a", "b"]).unwrap();
        let a = vars.scope(&["a"]).unwrap();
        let e = Event::from_configs(ab.clone(), [&[3u32, 4][..], &[3, 5], &[7, 0]]).unwrap();
        assert!(matches!(e.set(), ConfigSet::Sorted(_)));
        assert_eq!(e.project(&a).unwrap(), Event::from_indices(a.clone(), [3, 7]));
        let cyl = Event::from_indices(a, [3]).extend(&ab).unwrap();
        assert_eq!(cyl.len(), 9);
        assert!(e.intersection(&cyl).unwrap().len() == 2);
        assert_eq!(e.complement().len(), 78);
    }

    fn three_vars() -> (VariableSet, Scope) {
        let vars = VariableSet::new(vec![
            Variable::new("a", ["0", "1"]),
            Variable::new("b", ["0", "1", "2"]),
            Variable::new("c", ["0", "1"]),
        ])
        .unwrap();
        let full = vars.full_scope();
        (vars, full)
    }

    proptest! {
        #[test]
        fn project_after_extend_is_identity(bits in 0u64..(1 << 6)) {
            let (vars, full) = three_vars();
            let ab = vars.scope(&["a", "b"]).unwrap();
            let e = Event::new(ab.clone(), ConfigSet::Bits(bits));
            prop_assert_eq!(e.extend(&full).unwrap().project(&ab).unwrap(), e);
        }

        #[test]
        fn extend_after_project_is_superset(bits in 0u64..(1 << 12)) {
            let (vars, full) = three_vars();
            let e = Event::new(full.clone(), ConfigSet::Bits(bits));
            for names in [&["a"][..], &["b", "c"], &["a", "c"]] {
                let s = vars.scope(names).unwrap();
                prop_assert!(e.is_subset(&e.project(&s).unwrap().extend(&full).unwrap()).unwrap());
            }
        }

        #[test]
        fn nested_projection_composes(bits in 0u64..(1 << 12)) {
            let (vars, full) = three_vars();
            let e = Event::new(full, ConfigSet::Bits(bits));
            let bc = vars.scope(&["b", "c"]).unwrap();
            let c = vars.scope(&["c"]).unwrap();
            prop_assert_eq!(e.project(&bc).unwrap().project(&c).unwrap(), e.project(&c).unwrap());
        }

        #[test]
        fn projection_distributes_over_union(a in 0u64..(1 << 12), b in 0u64..(1 << 12)) {
            let (vars, full) = three_vars();
            let ea = Event::new(full.clone(), ConfigSet::Bits(a));
            let eb = Event::new(full, ConfigSet::Bits(b));
            let s = vars.scope(&["a", "c"]).unwrap();
            prop_assert_eq!(
                ea.union(&eb).unwrap().project(&s).unwrap(),
                ea.project(&s).unwrap().union(&eb.project(&s).unwrap()).unwrap()
            );
        }

        #[test]
        fn rectangularization_is_closure(bits in 0u64..(1 << 12)) {
            let (vars, full) = three_vars();
            let cliques = [vars.scope(&["a", "b"]).unwrap(), vars.scope(&["b", "c"]).unwrap()];
            let e = Event::new(full, ConfigSet::Bits(bits));
            let r = e.rectangularize(&cliques).unwrap();
            prop_assert!(e.is_subset(&r).unwrap());
            prop_assert_eq!(r.rectangularize(&cliques).unwrap(), r.clone());
            prop_assert_eq!(e.is_rectangle(&cliques).unwrap(), r == e);
        }
    }
}

//! Sparse set functions and the transform calculus on them.
//!
//! A [`SetFunction`] maps events of one scope to reals, with absent events
//! reading as zero. Commonality-role functions are the one exception: their
//! value at the empty event is 1 unless stored otherwise.
//!
//! The full transforms (Möbius, commonality, duality and their inverses) are
//! dense over `2^|Ω|` events and are guarded by [`DENSE_LIMIT`]. The
//! operations used during propagation ([`loc_m`], [`loc_q`],
//! [`restrict_to_evidence`] and the point evaluators [`lower_at`] /
//! [`upper_at`]) only touch stored entries.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::event::{ConfigSet, Event, Scope};

/// Entries with magnitude at or below this are dropped.
pub const ZERO_TOL: f64 = 1e-12;
/// Comparison tolerance for probabilities.
pub const TOL: f64 = 1e-9;
/// Largest `|Ω_scope|` accepted by the dense transforms.
pub const DENSE_LIMIT: usize = 22;
/// Default `|Ω|` cap for [`check_two_monotone`].
pub const TWO_MONOTONE_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Lower,
    Upper,
    Mobius,
    Commonality,
    Potential,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Lower => "lower",
            Role::Upper => "upper",
            Role::Mobius => "mobius",
            Role::Commonality => "commonality",
            Role::Potential => "potential",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetFunction {
    scope: Scope,
    role: Role,
    entries: BTreeMap<ConfigSet, f64>,
}

impl SetFunction {
    pub fn new(scope: Scope, role: Role) -> Self {
        Self {
            scope,
            role,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a function from `(event, value)` pairs; duplicate events are
    /// rejected.
    pub fn from_entries(
        scope: Scope,
        role: Role,
        entries: impl IntoIterator<Item = (ConfigSet, f64)>,
    ) -> Result<Self> {
        let mut f = Self::new(scope, role);
        for (set, v) in entries {
            if f.entries.contains_key(&set) {
                return Err(Error::Configuration(format!("duplicate event {set:?}")));
            }
            f.check_key(&set)?;
            f.insert(set, v);
        }
        Ok(f)
    }

    /// The function equal to 1 on every event of `scope`.
    pub fn constant_one(scope: Scope, role: Role) -> Result<Self> {
        let n = dense_universe(&scope)?;
        let mut f = Self::new(scope, role);
        for mask in 0..(1u64 << n) {
            f.entries.insert(ConfigSet::Bits(mask), 1.0);
        }
        Ok(f)
    }

    fn check_key(&self, set: &ConfigSet) -> Result<()> {
        let n = self.scope.size();
        let expected = ConfigSet::empty(n);
        let same_variant = std::mem::discriminant(set) == std::mem::discriminant(&expected);
        if !same_variant || set.iter().any(|i| i as usize >= n) {
            return Err(Error::Scope(format!("event {set:?} does not belong to this scope")));
        }
        Ok(())
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn keeps_zero(&self, set: &ConfigSet) -> bool {
        self.role == Role::Commonality && set.is_empty()
    }

    pub fn insert(&mut self, set: ConfigSet, value: f64) {
        debug_assert!(value.is_finite(), "set function values must be finite");
        if value.abs() <= ZERO_TOL && !self.keeps_zero(&set) {
            self.entries.remove(&set);
        } else {
            self.entries.insert(set, value);
        }
    }

    pub fn insert_event(&mut self, event: &Event, value: f64) -> Result<()> {
        if event.scope() != &self.scope {
            return Err(Error::Scope("event scope differs from function scope".into()));
        }
        self.insert(event.set().clone(), value);
        Ok(())
    }

    pub fn get(&self, set: &ConfigSet) -> f64 {
        match self.entries.get(set) {
            Some(&v) => v,
            None if self.role == Role::Commonality && set.is_empty() => 1.0,
            None => 0.0,
        }
    }

    pub fn value(&self, event: &Event) -> Result<f64> {
        if event.scope() != &self.scope {
            return Err(Error::Scope("event scope differs from function scope".into()));
        }
        Ok(self.get(event.set()))
    }

    /// Stored entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&ConfigSet, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    /// Stored entries plus the implicit `Q(∅) = 1` of a commonality function.
    fn iter_with_implicit(&self) -> impl Iterator<Item = (ConfigSet, f64)> + '_ {
        let empty = ConfigSet::empty(self.scope.size());
        let implicit = (self.role == Role::Commonality && !self.entries.contains_key(&empty))
            .then_some((empty, 1.0));
        implicit
            .into_iter()
            .chain(self.entries.iter().map(|(k, &v)| (k.clone(), v)))
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Largest absolute pointwise difference, reading absent entries per role.
    pub fn max_abs_diff(&self, other: &SetFunction) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, v) in self.iter_with_implicit() {
            worst = worst.max((v - other.get(&k)).abs());
        }
        for (k, v) in other.iter_with_implicit() {
            worst = worst.max((v - self.get(&k)).abs());
        }
        worst
    }

    pub fn approx_eq(&self, other: &SetFunction, tol: f64) -> bool {
        self.scope == other.scope && self.max_abs_diff(other) <= tol
    }

    pub fn map_values(&self, f: impl Fn(&ConfigSet, f64) -> f64) -> SetFunction {
        let mut out = SetFunction::new(self.scope.clone(), self.role);
        for (k, v) in self.iter_with_implicit() {
            let nv = f(&k, v);
            out.insert(k, nv);
        }
        out
    }

    /// Dense vector indexed by event bit mask.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let n = dense_universe(&self.scope)?;
        let mut out = vec![0.0; 1 << n];
        if self.role == Role::Commonality {
            out[0] = 1.0;
        }
        for (k, &v) in &self.entries {
            match k {
                ConfigSet::Bits(m) => out[*m as usize] = v,
                ConfigSet::Sorted(_) => unreachable!("dense universes use bit masks"),
            }
        }
        Ok(out)
    }

    pub fn from_dense(scope: Scope, role: Role, values: &[f64]) -> Result<Self> {
        let n = dense_universe(&scope)?;
        if values.len() != 1 << n {
            return Err(Error::Configuration("dense vector has the wrong length".into()));
        }
        let mut f = SetFunction::new(scope, role);
        for (mask, &v) in values.iter().enumerate() {
            f.insert(ConfigSet::Bits(mask as u64), v);
        }
        Ok(f)
    }
}

fn dense_universe(scope: &Scope) -> Result<usize> {
    let n = scope.size();
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard {
            what: "configurations for a dense transform",
            size: n as u64,
            limit: DENSE_LIMIT as u64,
        });
    }
    Ok(n)
}

/// In place: `v[A] = Σ_{B ⊆ A} v[B]`.
pub(crate) fn subset_sum(v: &mut [f64]) {
    let n = v.len().trailing_zeros();
    for bit in 0..n {
        let b = 1usize << bit;
        for mask in 0..v.len() {
            if mask & b != 0 {
                v[mask] += v[mask ^ b];
            }
        }
    }
}

/// In place inverse of [`subset_sum`]: `v[A] = Σ_{B ⊆ A} (-1)^{|A∖B|} v[B]`.
pub(crate) fn subset_difference(v: &mut [f64]) {
    let n = v.len().trailing_zeros();
    for bit in 0..n {
        let b = 1usize << bit;
        for mask in 0..v.len() {
            if mask & b != 0 {
                v[mask] -= v[mask ^ b];
            }
        }
    }
}

fn parity_sign(mask: usize) -> f64 {
    if mask.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Möbius transform `m(A) = Σ_{B⊆A} (-1)^{|A∖B|} P(B)`.
pub fn mobius(p: &SetFunction) -> Result<SetFunction> {
    let mut v = p.to_dense()?;
    subset_difference(&mut v);
    SetFunction::from_dense(p.scope.clone(), Role::Mobius, &v)
}

/// Inverse Möbius transform `P(A) = Σ_{B⊆A} m(B)`.
pub fn inv_mobius(m: &SetFunction) -> Result<SetFunction> {
    let mut v = m.to_dense()?;
    subset_sum(&mut v);
    SetFunction::from_dense(m.scope.clone(), Role::Lower, &v)
}

fn complement_dual(f: &SetFunction, role: Role) -> Result<SetFunction> {
    let v = f.to_dense()?;
    let full = v.len() - 1;
    let out: Vec<f64> = (0..v.len()).map(|a| 1.0 - v[full ^ a]).collect();
    SetFunction::from_dense(f.scope.clone(), role, &out)
}

/// Conjugate upper probability `P̄(A) = 1 - P(Ā)`.
pub fn dual(p: &SetFunction) -> Result<SetFunction> {
    let role = if p.role == Role::Upper { Role::Lower } else { Role::Upper };
    complement_dual(p, role)
}

/// Commonality transform `Q(A) = -Σ_{B⊆A} (-1)^{|B|} P̄(B)` for nonempty
/// `A`, with `Q(∅) = 1`.
pub fn commonality(u: &SetFunction) -> Result<SetFunction> {
    let mut v = u.to_dense()?;
    for (mask, x) in v.iter_mut().enumerate() {
        *x *= parity_sign(mask);
    }
    subset_sum(&mut v);
    for x in v.iter_mut() {
        *x = -*x;
    }
    v[0] = 1.0;
    SetFunction::from_dense(u.scope.clone(), Role::Commonality, &v)
}

/// Inverse commonality transform `P̄(A) = 1 - Σ_{B⊆A} (-1)^{|B|} Q(B)`.
pub fn inv_commonality(q: &SetFunction) -> Result<SetFunction> {
    let q_empty = q.get(&ConfigSet::empty(q.scope.size()));
    if (q_empty - 1.0).abs() > TOL {
        return Err(Error::InvalidCommonality(q_empty));
    }
    let mut v = q.to_dense()?;
    for (mask, x) in v.iter_mut().enumerate() {
        *x *= parity_sign(mask);
    }
    subset_sum(&mut v);
    for x in v.iter_mut() {
        *x = 1.0 - *x;
    }
    SetFunction::from_dense(q.scope.clone(), Role::Upper, &v)
}

/// `Σ_{B ⊆ e} f(B)` over stored entries: the inverse Möbius transform at a
/// single event.
pub fn lower_at(f: &SetFunction, e: &ConfigSet) -> f64 {
    f.iter_with_implicit()
        .filter(|(k, _)| k.is_subset(e))
        .map(|(_, v)| v)
        .sum()
}

/// `1 - Σ_{B ⊆ e} (-1)^{|B|} f(B)`: the inverse commonality transform at a
/// single event.
pub fn upper_at(f: &SetFunction, e: &ConfigSet) -> f64 {
    let s: f64 = f
        .iter_with_implicit()
        .filter(|(k, _)| k.is_subset(e))
        .map(|(k, v)| if k.len() % 2 == 0 { v } else { -v })
        .sum();
    1.0 - s
}

/// Möbius marginal: `Loc^m(m, A)(a) = Σ_{B : B_A = a} m(B)`.
pub fn loc_m(m: &SetFunction, sub: &Scope) -> Result<SetFunction> {
    let map = m.scope.projection_map(sub)?;
    let n_sub = sub.size();
    let mut acc: BTreeMap<ConfigSet, f64> = BTreeMap::new();
    for (k, v) in m.iter_with_implicit() {
        *acc.entry(k.map_through(&map, n_sub)).or_insert(0.0) += v;
    }
    let mut out = SetFunction::new(sub.clone(), m.role);
    for (k, v) in acc {
        out.insert(k, v);
    }
    Ok(out)
}

/// Commonality marginal:
/// `Loc^Q(Q, A)(a) = (-1)^{|a|} Σ_{B : B_A = a} (-1)^{|B|} Q(B)`.
///
/// Absent nonempty events are zero and contribute nothing, so only stored
/// entries (plus the implicit `Q(∅)`) are visited.
pub fn loc_q(q: &SetFunction, sub: &Scope) -> Result<SetFunction> {
    let map = q.scope.projection_map(sub)?;
    let n_sub = sub.size();
    let mut acc: BTreeMap<ConfigSet, f64> = BTreeMap::new();
    for (k, v) in q.iter_with_implicit() {
        let signed = if k.len() % 2 == 0 { v } else { -v };
        *acc.entry(k.map_through(&map, n_sub)).or_insert(0.0) += signed;
    }
    let mut out = SetFunction::new(sub.clone(), q.role);
    for (k, v) in acc {
        let signed = if k.len() % 2 == 0 { v } else { -v };
        out.insert(k, signed);
    }
    Ok(out)
}

/// Zeroes every entry whose event is not contained in the cylinder of `e`.
pub fn restrict_to_evidence(f: &SetFunction, e: &Event) -> Result<SetFunction> {
    let cyl = e.extend(&f.scope)?;
    let mut out = SetFunction::new(f.scope.clone(), f.role);
    for (k, v) in f.iter_with_implicit() {
        if k.is_subset(cyl.set()) {
            out.insert(k, v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Normal,
    /// `P(E) = 0 < P̄(E)`: bounds collapse to {0, 1} values.
    Vacuous,
    /// `P̄(E) = 0`: the evidence is impossible under the prior.
    Contradiction,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Normal => "normal",
            Status::Vacuous => "vacuous",
            Status::Contradiction => "contradiction",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub status: Status,
}

impl Interval {
    pub fn normal(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            status: Status::Normal,
        }
    }

    pub fn contradiction() -> Self {
        Self {
            lower: 0.0,
            upper: 0.0,
            status: Status::Contradiction,
        }
    }

    pub fn approx_eq(&self, other: &Interval, tol: f64) -> bool {
        self.status == other.status
            && (self.status == Status::Contradiction
                || ((self.lower - other.lower).abs() <= tol && (self.upper - other.upper).abs() <= tol))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lower={:.9} upper={:.9} status={}",
            self.lower + 0.0,
            self.upper + 0.0,
            self.status
        )
    }
}

/// The six bound values and two containment flags that determine a
/// conditional interval for target `A` and evidence `E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningInputs {
    /// `P(A ∩ E)`
    pub low_ae: f64,
    /// `P̄(Ā ∩ E)`
    pub up_ace: f64,
    /// `P̄(A ∩ E)`
    pub up_ae: f64,
    /// `P(Ā ∩ E)`
    pub low_ace: f64,
    /// `P(E)`
    pub low_e: f64,
    /// `P̄(E)`
    pub up_e: f64,
    /// `E ⊆ A`
    pub e_subset_a: bool,
    /// `E ⊆ Ā`
    pub e_subset_ac: bool,
}

/// Conditional lower and upper probability of `A` given `E`.
///
/// When `P(E) = 0 < P̄(E)` the bounds are {0, 1}-valued: the lower bound is 1
/// exactly when `E` lies inside `A` up to an event of upper probability zero
/// (either `e_subset_a` is set or `P̄(Ā ∩ E) = 0`), and symmetrically for the
/// upper bound.
pub fn conditional_interval(x: &ConditioningInputs) -> Result<Interval> {
    let values = [
        ("P(A∩E)", x.low_ae),
        ("upper(Ā∩E)", x.up_ace),
        ("upper(A∩E)", x.up_ae),
        ("P(Ā∩E)", x.low_ace),
        ("P(E)", x.low_e),
        ("upper(E)", x.up_e),
    ];
    for (name, v) in values {
        if !v.is_finite() || !(-TOL..=1.0 + TOL).contains(&v) {
            return Err(Error::NumericDomain(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    if x.low_e > x.up_e + TOL {
        return Err(Error::NumericDomain(format!(
            "P(E) = {} exceeds its upper bound {}",
            x.low_e, x.up_e
        )));
    }
    let c = |v: f64| v.clamp(0.0, 1.0);

    if x.up_e <= TOL {
        return Ok(Interval::contradiction());
    }
    if x.low_e <= TOL {
        let inside_a = x.e_subset_a || x.up_ace <= TOL;
        let inside_ac = x.e_subset_ac || x.up_ae <= TOL;
        let (lower, upper) = match (inside_a, inside_ac) {
            (true, false) => (1.0, 1.0),
            (false, true) => (0.0, 0.0),
            (false, false) => (0.0, 1.0),
            (true, true) => {
                return Err(Error::NumericDomain(
                    "evidence lies in both the target and its complement yet has positive upper probability"
                        .into(),
                ))
            }
        };
        return Ok(Interval {
            lower,
            upper,
            status: Status::Vacuous,
        });
    }

    let lower_den = c(x.low_ae) + c(x.up_ace);
    let lower = if lower_den <= ZERO_TOL { 0.0 } else { c(x.low_ae) / lower_den };
    let upper_den = c(x.up_ae) + c(x.low_ace);
    if upper_den <= ZERO_TOL {
        return Err(Error::NumericDomain(
            "upper bound is 0/0 although P(E) > 0; the bounds are inconsistent".into(),
        ));
    }
    let upper = c(x.up_ae) / upper_den;
    Ok(Interval::normal(lower, upper))
}

/// Outcome of [`check_two_monotone`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMonotoneReport {
    pub boundary_ok: bool,
    /// Violating pairs `(A, B, excess)` with
    /// `excess = P(A) + P(B) - P(A∪B) - P(A∩B) > 0`; at most 64 are kept.
    pub violations: Vec<(ConfigSet, ConfigSet, f64)>,
    pub violation_count: usize,
}

impl TwoMonotoneReport {
    pub fn passed(&self) -> bool {
        self.boundary_ok && self.violation_count == 0
    }
}

/// Checks `P(∅) = 0`, `P(Ω) = 1` and supermodularity over every pair of
/// events. Exponential; refuses scopes with more than `cap` configurations.
pub fn check_two_monotone(p: &SetFunction, cap: usize) -> Result<TwoMonotoneReport> {
    let n = p.scope.size();
    if n > cap {
        return Err(Error::SizeGuard {
            what: "configurations for the 2-monotonicity check",
            size: n as u64,
            limit: cap as u64,
        });
    }
    let v = p.to_dense()?;
    let full = v.len() - 1;
    let boundary_ok = v[0].abs() <= TOL && (v[full] - 1.0).abs() <= TOL;
    let mut violations = Vec::new();
    let mut violation_count = 0;
    for a in 0..v.len() {
        for b in (a + 1)..v.len() {
            let excess = v[a] + v[b] - v[a | b] - v[a & b];
            if excess > TOL {
                violation_count += 1;
                if violations.len() < 64 {
                    violations.push((ConfigSet::Bits(a as u64), ConfigSet::Bits(b as u64), excess));
                }
            }
        }
    }
    Ok(TwoMonotoneReport {
        boundary_ok,
        violations,
        violation_count,
    })
}

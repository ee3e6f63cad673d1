//! Model documents, event expressions and the `capax` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{DeclaredPotential, DeclaredSeparator, Finding, Model, ModelParts};
use crate::error::{Error, Result, TreeKind};
use crate::event::{ConfigSet, Event, Scope, Variable, VariableSet};
use crate::graph::{Graph, JunctionTree, Potential};
use crate::oracle;
use crate::setfunc::{check_two_monotone, inv_mobius, Interval, Role, SetFunction, Status, TWO_MONOTONE_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    pub domain: Vec<Value>,
}

/// One entry of a potential: an event listed as configurations
/// (variable name to value maps) and its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub event: Vec<BTreeMap<String, Value>>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialDoc {
    pub clique: Vec<String>,
    pub entries: Vec<EntryDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparatorDoc {
    pub between: [Vec<String>; 2],
    pub entries: Vec<EntryDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindingDoc {
    pub event: Vec<BTreeMap<String, Value>>,
}

/// On-disk model. Graphs are lists of variable groups; every group becomes
/// a complete subgraph, so a plain edge list is the special case of pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub variables: Vec<VariableDoc>,
    pub m_graph: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_graph: Option<Vec<Vec<String>>>,
    pub m_potentials: Vec<PotentialDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_potentials: Option<Vec<PotentialDoc>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_separators: Vec<SeparatorDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q_separators: Vec<SeparatorDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<FindingDoc>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn label(v: &Value, path: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(schema(path, "values must be strings or numbers")),
    }
}

pub fn parse_document(text: &str) -> Result<ModelDocument> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })
}

/// Parses and builds a model from document text.
pub fn parse_model(text: &str) -> Result<Model> {
    build_model(&parse_document(text)?)
}

struct Binder<'a> {
    vars: &'a VariableSet,
}

impl Binder<'_> {
    fn scope(&self, names: &[String], path: &str) -> Result<Scope> {
        for (i, n) in names.iter().enumerate() {
            if self.vars.id(n).is_none() {
                return Err(schema(format!("{path}[{i}]"), format!("undeclared variable `{n}`")));
            }
        }
        self.vars
            .scope(names)
            .map_err(|e| schema(path, e.to_string()))
    }

    fn graph(&self, groups: &[Vec<String>], path: &str) -> Result<Graph> {
        let mut g = Graph::new(self.vars.variables().iter().map(|v| v.card() as u32).collect());
        for (i, group) in groups.iter().enumerate() {
            let p = format!("{path}[{i}]");
            let ids: Vec<usize> = self.scope(group, &p)?.vars().iter().map(|v| v.0).collect();
            if ids.len() != group.len() {
                return Err(schema(p, "repeated variable"));
            }
            g.add_clique(&ids)?;
        }
        Ok(g)
    }

    fn event(&self, scope: &Scope, configs: &[BTreeMap<String, Value>], path: &str) -> Result<ConfigSet> {
        let mut indices = Vec::new();
        for (i, config) in configs.iter().enumerate() {
            let p = format!("{path}[{i}]");
            if config.len() != scope.len() {
                return Err(schema(p, "configuration must assign exactly the scope's variables"));
            }
            let mut values = vec![0u32; scope.len()];
            for (name, v) in config {
                let vp = format!("{p}.{name}");
                let id = self.vars.id(name).ok_or_else(|| schema(&vp, format!("undeclared variable `{name}`")))?;
                let pos = scope
                    .position(id)
                    .ok_or_else(|| schema(&vp, format!("variable `{name}` is outside the scope")))?;
                let l = label(v, &vp)?;
                let idx = self
                    .vars
                    .get(id)
                    .value_index(&l)
                    .ok_or_else(|| schema(&vp, format!("`{l}` is not in the domain of `{name}`")))?;
                values[pos] = idx as u32;
            }
            indices.push(scope.encode(&values));
        }
        Ok(ConfigSet::from_indices(scope.size(), indices))
    }

    fn table(&self, scope: &Scope, entries: &[EntryDoc], path: &str) -> Result<SetFunction> {
        let mut t = SetFunction::new(scope.clone(), Role::Potential);
        let mut seen = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            let p = format!("{path}.entries[{i}]");
            if !e.value.is_finite() {
                return Err(schema(format!("{p}.value"), "value must be finite"));
            }
            let set = self.event(scope, &e.event, &format!("{p}.event"))?;
            if !seen.insert(set.clone()) {
                return Err(schema(p, "duplicate event within a potential"));
            }
            t.insert(set, e.value);
        }
        Ok(t)
    }

    fn potentials(&self, docs: &[PotentialDoc], path: &str) -> Result<Vec<DeclaredPotential>> {
        docs.iter()
            .enumerate()
            .map(|(i, d)| {
                let p = format!("{path}[{i}]");
                let clique = self.scope(&d.clique, &format!("{p}.clique"))?;
                let table = self.table(&clique, &d.entries, &p)?;
                Ok(DeclaredPotential { clique, table })
            })
            .collect()
    }

    fn separators(&self, docs: &[SeparatorDoc], path: &str) -> Result<Vec<DeclaredSeparator>> {
        docs.iter()
            .enumerate()
            .map(|(i, d)| {
                let p = format!("{path}[{i}]");
                let a = self.scope(&d.between[0], &format!("{p}.between[0]"))?;
                let b = self.scope(&d.between[1], &format!("{p}.between[1]"))?;
                let sep = a.intersection(&b);
                let table = self.table(&sep, &d.entries, &p)?;
                Ok(DeclaredSeparator { between: (a, b), table })
            })
            .collect()
    }
}

pub fn build_model(doc: &ModelDocument) -> Result<Model> {
    let mut variables = Vec::new();
    for (i, v) in doc.variables.iter().enumerate() {
        let p = format!("variables[{i}]");
        let domain = v
            .domain
            .iter()
            .enumerate()
            .map(|(j, x)| label(x, &format!("{p}.domain[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        variables.push(Variable::new(v.name.clone(), domain));
    }
    let vars = VariableSet::new(variables).map_err(|e| schema("variables", e.to_string()))?;
    let b = Binder { vars: &vars };
    let parts = ModelParts {
        m_graph: b.graph(&doc.m_graph, "m_graph")?,
        q_graph: doc.q_graph.as_deref().map(|g| b.graph(g, "q_graph")).transpose()?,
        m_potentials: b.potentials(&doc.m_potentials, "m_potentials")?,
        q_potentials: doc
            .q_potentials
            .as_deref()
            .map(|q| b.potentials(q, "q_potentials"))
            .transpose()?,
        m_separators: b.separators(&doc.m_separators, "m_separators")?,
        q_separators: b.separators(&doc.q_separators, "q_separators")?,
        variables: vars.clone(),
    };
    let mut model = Model::build(parts)?;
    for (i, f) in doc.findings.iter().enumerate() {
        let p = format!("findings[{i}].event");
        let names: Vec<String> = f.event.first().map(|c| c.keys().cloned().collect()).unwrap_or_default();
        let scope = b.scope(&names, &p)?;
        let set = b.event(&scope, &f.event, &p)?;
        model.enter_evidence(Finding::new(Event::new(scope, set)))?;
    }
    Ok(model)
}

fn event_doc(vars: &VariableSet, scope: &Scope, set: &ConfigSet) -> Vec<BTreeMap<String, Value>> {
    set.iter()
        .map(|i| {
            scope
                .vars()
                .iter()
                .zip(scope.decode(i))
                .map(|(&v, x)| {
                    let var = vars.get(v);
                    (var.name.clone(), Value::String(var.domain[x as usize].clone()))
                })
                .collect()
        })
        .collect()
}

fn entries_doc(vars: &VariableSet, f: &SetFunction) -> Vec<EntryDoc> {
    f.iter()
        .map(|(k, v)| EntryDoc {
            event: event_doc(vars, f.scope(), k),
            value: v,
        })
        .collect()
}

fn tree_docs(vars: &VariableSet, tree: &JunctionTree) -> (Vec<Vec<String>>, Vec<PotentialDoc>, Vec<SeparatorDoc>) {
    let mut graph = Vec::new();
    let mut potentials = Vec::new();
    for (i, s) in tree.nodes.iter().enumerate() {
        if Some(i) == tree.null_node {
            continue;
        }
        graph.push(vars.scope_names(s));
        if let Some(t) = tree.node_potentials[i].table() {
            potentials.push(PotentialDoc {
                clique: vars.scope_names(s),
                entries: entries_doc(vars, t),
            });
        }
    }
    let separators = tree
        .edges
        .iter()
        .zip(&tree.edge_potentials)
        .filter_map(|(e, p)| match p {
            Potential::Table(t) if !e.separator.is_empty() => Some(SeparatorDoc {
                between: [vars.scope_names(&tree.nodes[e.a]), vars.scope_names(&tree.nodes[e.b])],
                entries: entries_doc(vars, t),
            }),
            _ => None,
        })
        .collect();
    (graph, potentials, separators)
}

/// Canonical document: both prior trees written out explicitly, followed by
/// the evidence log. Loading it rebuilds the same model, minus any
/// propagation state.
pub fn document_from_model(model: &Model) -> ModelDocument {
    let vars = model.variables();
    let (m_graph, m_potentials, m_separators) = tree_docs(vars, model.prior_tree(TreeKind::Mobius));
    let (q_graph, q_potentials, q_separators) = tree_docs(vars, model.prior_tree(TreeKind::Commonality));
    ModelDocument {
        variables: vars
            .variables()
            .iter()
            .map(|v| VariableDoc {
                name: v.name.clone(),
                domain: v.domain.iter().cloned().map(Value::String).collect(),
            })
            .collect(),
        q_graph: (q_graph != m_graph).then_some(q_graph),
        m_graph,
        m_potentials,
        q_potentials: Some(q_potentials),
        m_separators,
        q_separators,
        findings: model
            .evidence_log()
            .iter()
            .map(|f| FindingDoc {
                event: event_doc(vars, f.event.scope(), f.event.set()),
            })
            .collect(),
    }
}

pub fn serialize_model(model: &Model) -> String {
    serde_json::to_string_pretty(&document_from_model(model)).expect("documents serialize")
}

struct RawAtom<'a> {
    name_pos: usize,
    name: &'a str,
    value_pos: usize,
    value: &'a str,
}

struct ExprParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn err(position: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            position,
            message: message.into(),
        }
    }

    fn peek(&mut self) -> Option<char> {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
        self.text[self.pos..].chars().next()
    }

    fn word(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.peek();
        let start = self.pos;
        let len: usize = self.text[start..]
            .chars()
            .take_while(|&c| c.is_alphanumeric() || "_-.+:".contains(c))
            .map(char::len_utf8)
            .sum();
        if len == 0 {
            return Err(Self::err(start, format!("expected {what}")));
        }
        self.pos += len;
        Ok((start, &self.text[start..start + len]))
    }

    fn expr(&mut self) -> Result<Vec<Vec<RawAtom<'a>>>> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                None => return Ok(terms),
                Some('|') => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(c) => return Err(Self::err(self.pos, format!("unexpected `{c}`"))),
            }
        }
    }

    fn term(&mut self) -> Result<Vec<RawAtom<'a>>> {
        let mut atoms = vec![self.atom()?];
        while self.peek() == Some('&') {
            self.pos += 1;
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn atom(&mut self) -> Result<RawAtom<'a>> {
        let (name_pos, name) = self.word("a variable name")?;
        if self.peek() != Some('=') {
            return Err(Self::err(self.pos, "expected `=`"));
        }
        self.pos += 1;
        let (value_pos, value) = self.word("a value")?;
        Ok(RawAtom {
            name_pos,
            name,
            value_pos,
            value,
        })
    }
}

/// Parses `expr := term ('|' term)*`, `term := atom ('&' atom)*`,
/// `atom := IDENT '=' VALUE` into the event over the mentioned variables.
/// Error positions are byte offsets into `text`.
pub fn parse_event(text: &str, vars: &VariableSet) -> Result<Event> {
    let raw = ExprParser { text, pos: 0 }.expr()?;
    let mut terms = Vec::new();
    let mut ids = BTreeSet::new();
    for term in &raw {
        let mut atoms = Vec::new();
        for a in term {
            let id = vars
                .id(a.name)
                .ok_or_else(|| ExprParser::err(a.name_pos, format!("unknown variable `{}`", a.name)))?;
            let value = vars.get(id).value_index(a.value).ok_or_else(|| {
                ExprParser::err(a.value_pos, format!("`{}` is not a value of `{}`", a.value, a.name))
            })?;
            ids.insert(id);
            atoms.push((id, value as u32));
        }
        terms.push(atoms);
    }
    let ids: Vec<_> = ids.into_iter().collect();
    let scope = vars.scope_of(&ids)?;
    let satisfied = (0..scope.size() as u32).filter(|&i| {
        let values = scope.decode(i);
        terms.iter().any(|t| {
            t.iter()
                .all(|&(id, v)| values[scope.position(id).expect("mentioned variable")] == v)
        })
    });
    let set = ConfigSet::from_indices(scope.size(), satisfied);
    Ok(Event::new(scope, set))
}

#[derive(Parser)]
#[command(name = "capax", version, about = "Exact inference for 2-monotone lower probabilities on junction trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a model and check its structure; --deep also runs the flat checks.
    Validate {
        file: PathBuf,
        #[arg(long)]
        deep: bool,
    },
    /// Posterior bounds for each target given all evidence.
    Query {
        file: PathBuf,
        #[arg(long, value_name = "EXPR")]
        evidence: Vec<String>,
        #[arg(long, value_name = "EXPR")]
        target: Vec<String>,
        #[arg(long)]
        deep_check: bool,
    },
    /// Posterior bounds computed on the flat joint, without junction trees.
    Oracle {
        file: PathBuf,
        #[arg(long, value_name = "EXPR")]
        evidence: Vec<String>,
        #[arg(long, value_name = "EXPR", required = true)]
        target: Vec<String>,
    },
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONTRADICTION: i32 = 1;
    pub const INVALID_MODEL: i32 = 2;
    pub const USAGE: i32 = 3;
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Contradiction(_) => exit::CONTRADICTION,
        Error::Parse { .. }
        | Error::NonLocalEvidence { .. }
        | Error::NonLocalQuery { .. }
        | Error::EmptyEvidence => exit::USAGE,
        _ => exit::INVALID_MODEL,
    }
}

fn load(file: &PathBuf) -> Result<Model> {
    let text = std::fs::read_to_string(file)?;
    parse_model(&text)
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    exit::OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    exit::USAGE
                }
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn line(out: &mut dyn Write, label: &str, iv: &Interval) -> Result<()> {
    writeln!(out, "{} {}", label.trim(), iv)?;
    Ok(())
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Validate { file, deep } => {
            let model = load(&file)?;
            writeln!(
                out,
                "ok: {} variables, m-tree {} nodes, q-tree {} nodes",
                model.variables().len(),
                model.m_tree().len(),
                model.q_tree().len()
            )?;
            if deep {
                return deep_check(&model, out, err);
            }
            Ok(exit::OK)
        }
        Command::Query {
            file,
            evidence,
            target,
            deep_check: deep,
        } => {
            let mut model = load(&file)?;
            if deep {
                let code = deep_check(&model, &mut std::io::sink(), err)?;
                if code != exit::OK {
                    return Ok(code);
                }
            }
            let vars = model.variables().clone();
            let findings = evidence
                .iter()
                .map(|e| parse_event(e, &vars))
                .collect::<Result<Vec<_>>>()?;
            let targets = target
                .iter()
                .map(|t| parse_event(t, &vars))
                .collect::<Result<Vec<_>>>()?;
            for f in findings {
                model.enter_evidence(Finding::new(f))?;
            }
            let contradiction = match model.propagate() {
                Ok(()) => false,
                Err(Error::Contradiction(msg)) => {
                    writeln!(err, "contradiction: the evidence has upper probability 0 ({msg})")?;
                    true
                }
                Err(e) => return Err(e),
            };
            if targets.is_empty() {
                line(out, "evidence", &model.total_evidence_bounds()?)?;
            }
            for (text, t) in target.iter().zip(&targets) {
                line(out, text, &model.query_posterior(t)?)?;
            }
            Ok(if contradiction { exit::CONTRADICTION } else { exit::OK })
        }
        Command::Oracle { file, evidence, target } => {
            let model = load(&file)?;
            let joint = oracle::assemble_joint(&model)?;
            let vars = model.variables();
            let full = vars.full_scope();
            let mut e = Event::full(full.clone());
            for text in &evidence {
                e = e.intersection(&parse_event(text, vars)?.extend(&full)?)?;
            }
            let targets = target
                .iter()
                .map(|t| parse_event(t, vars)?.extend(&full))
                .collect::<Result<Vec<_>>>()?;
            let mut contradiction = false;
            for (text, t) in target.iter().zip(&targets) {
                let iv = oracle::flat_posterior(&joint, t, &e)?;
                contradiction |= iv.status == Status::Contradiction;
                line(out, text, &iv)?;
            }
            if contradiction {
                writeln!(err, "contradiction: the evidence has upper probability 0")?;
                return Ok(exit::CONTRADICTION);
            }
            Ok(exit::OK)
        }
    }
}

fn ok(flag: bool) -> &'static str {
    if flag {
        "ok"
    } else {
        "FAILED"
    }
}

/// Flat joint assembly with the dual check, the Markov report and, for small
/// spaces, a 2-monotonicity check of the joint lower probability.
fn deep_check(model: &Model, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let joint = match oracle::assemble_joint(model) {
        Ok(j) => j,
        Err(e @ Error::InconsistentPair { .. }) => {
            writeln!(err, "dual-consistency check failed: {e}")?;
            return Ok(exit::INVALID_MODEL);
        }
        Err(e) => return Err(e),
    };
    writeln!(out, "dual consistency: ok")?;
    let report = oracle::report_for(&joint.m_joint, &joint.q_joint, model.m_tree(), model.q_tree())?;
    let vars = model.variables();
    writeln!(out, "rectangular core: {}", ok(report.rectangular_core_ok))?;
    for (i, e) in model.m_tree().edges.iter().enumerate() {
        let sep = vars.scope_names(&e.separator).join(",");
        writeln!(out, "m-factorization at separator {{{sep}}}: {}", ok(report.m_factorization_ok[i]))?;
        writeln!(
            out,
            "partition condition at separator {{{sep}}}: {}",
            if report.partition_ok[i] { "holds" } else { "does not hold" }
        )?;
    }
    for (i, e) in model.q_tree().edges.iter().enumerate() {
        let sep = vars.scope_names(&e.separator).join(",");
        writeln!(out, "q-factorization at separator {{{sep}}}: {}", ok(report.q_factorization_ok[i]))?;
    }
    let n = joint.scope().size();
    if n <= TWO_MONOTONE_CAP {
        let p = inv_mobius(&joint.m_joint)?.with_role(Role::Lower);
        let r = check_two_monotone(&p, TWO_MONOTONE_CAP)?;
        if r.passed() {
            writeln!(out, "2-monotone: ok")?;
        } else {
            writeln!(
                err,
                "warning: the joint lower probability is not 2-monotone ({} violating pairs); bounds are valid but may not be exact",
                r.violation_count
            )?;
        }
    }
    if !report.passed() {
        writeln!(err, "model is not Markov with respect to its graphs")?;
        return Ok(exit::INVALID_MODEL);
    }
    Ok(exit::OK)
}

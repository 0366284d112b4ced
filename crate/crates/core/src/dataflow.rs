//! Def-use indices, function-level aliasing, backward tracking of IPC
//! arguments along a call chain, and parameter escape analysis.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::callgraph::{CallChain, CallbackTable};
use crate::config::suffix_match;
use crate::error::{Error, Result};
use crate::ir::walk::FlatBody;
use crate::ir::{Corpus, Loc, MethodDef, MethodRef, Operand, Rvalue, Statement};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DefUseIndex {
    pub defs: BTreeMap<String, Vec<usize>>,
    pub uses: BTreeMap<String, Vec<usize>>,
}

pub fn def_use(method: &MethodDef) -> DefUseIndex {
    let mut index = DefUseIndex::default();
    for p in &method.params {
        index.uses.entry(p.name.clone()).or_default();
    }
    for s in FlatBody::new(&method.body).iter() {
        for r in s.stmt.reads() {
            let uses = index.uses.entry(r.name().to_string()).or_default();
            if uses.last() != Some(&s.index) {
                uses.push(s.index);
            }
        }
        if let Some(w) = s.stmt.writes() {
            index.defs.entry(w.name().to_string()).or_default().push(s.index);
        }
    }
    index
}

/// Union-find over the copy assignments of one method. Two locations are
/// aliases when one is copied from the other, directly or transitively.
#[derive(Debug, Clone, Default)]
pub struct Aliases {
    parent: BTreeMap<String, String>,
}

impl Aliases {
    pub fn of_method(method: &MethodDef) -> Self {
        let mut a = Aliases::default();
        for s in FlatBody::new(&method.body).iter() {
            if let Statement::Assign { lhs, rhs: Rvalue::Use(src) } = s.stmt {
                if let (Some(l), Some(r)) = (lhs.as_loc(), src.as_loc()) {
                    a.union(l.name(), r.name());
                }
            }
        }
        a
    }

    fn find(&self, name: &str) -> String {
        let mut cur = name;
        while let Some(p) = self.parent.get(cur) {
            if p == cur {
                break;
            }
            cur = p;
        }
        cur.to_string()
    }

    fn union(&mut self, a: &str, b: &str) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller name becomes the root so the structure is order-independent
            let (root, child) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent.insert(child, root.clone());
            self.parent.entry(root.clone()).or_insert(root);
        }
    }

    pub fn same(&self, a: &str, b: &str) -> bool {
        self.find(a) == self.find(b)
    }

    /// Alias class of `name`, including `name` itself.
    pub fn class_of(&self, name: &str) -> BTreeSet<String> {
        let root = self.find(name);
        let mut out: BTreeSet<String> =
            self.parent.keys().filter(|k| self.find(k) == root).cloned().collect();
        out.insert(name.to_string());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Fact {
    Copied,
    Compared,
    PassedAsArg,
    StoredToField,
    Returned,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Step {
    pub method: MethodRef,
    pub index: usize,
    pub fact: Fact,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Origin {
    Parameter { method: MethodRef, name: String, position: usize },
    CallResult { method: MethodRef, index: usize, target: MethodRef },
    Literal { method: MethodRef, index: Option<usize> },
    Field { method: MethodRef, path: String },
    Computed { method: MethodRef, index: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "at", rename_all = "camelCase")]
pub enum Sink {
    /// An `if` at (method, index) comparing the value.
    Guard(MethodRef, usize),
    Callee(MethodRef),
    Field(String),
}

/// The tracked value inside one chain method: its alias class and the call
/// site at which it leaves the method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LinkTrace {
    pub method: MethodRef,
    pub cutoff: usize,
    /// Argument position at the cutoff call.
    pub position: usize,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TaintTrace {
    pub origin: Origin,
    pub steps: Vec<Step>,
    pub sinks: BTreeSet<Sink>,
    /// Innermost link first.
    pub links: Vec<LinkTrace>,
}

impl TaintTrace {
    pub fn is_literal(&self) -> bool {
        matches!(self.origin, Origin::Literal { .. })
    }
}

fn operand_in(op: &Operand, members: &BTreeSet<String>) -> bool {
    op.as_loc().is_some_and(|l| members.contains(l.name()))
}

/// Copy/compare/call/store/return facts of one statement on the alias class.
/// Arithmetic does not carry the value, and a fresh definition is an origin,
/// not a step.
pub fn statement_fact(stmt: &Statement, members: &BTreeSet<String>) -> Option<Fact> {
    match stmt {
        Statement::Invoke(inv) => {
            let used = inv.receiver.iter().chain(inv.args.iter()).any(|o| operand_in(o, members));
            used.then_some(Fact::PassedAsArg)
        }
        Statement::Assign { lhs, rhs: Rvalue::Use(src) } if operand_in(src, members) => {
            if matches!(lhs, Operand::Field(_)) {
                Some(Fact::StoredToField)
            } else {
                Some(Fact::Copied)
            }
        }
        Statement::Assign { .. } => None,
        Statement::If { cond, .. } => cond.operands().iter().any(|o| operand_in(o, members)).then_some(Fact::Compared),
        Statement::Throw { .. } => None,
        Statement::Return { value } => value.as_ref().is_some_and(|v| operand_in(v, members)).then_some(Fact::Returned),
    }
}

enum Root {
    Call(MethodRef),
    Literal,
    Computed,
}

/// A definition of an alias member that does not copy from the class.
fn root_def(stmt: &Statement, members: &BTreeSet<String>) -> Option<Root> {
    let written = stmt.writes()?;
    if !members.contains(written.name()) {
        return None;
    }
    match stmt {
        Statement::Invoke(inv) => Some(Root::Call(inv.target.clone())),
        Statement::Assign { rhs: Rvalue::Use(Operand::Const(_)), .. } => Some(Root::Literal),
        Statement::Assign { rhs: Rvalue::Use(_), .. } => None,
        Statement::Assign { rhs: Rvalue::BinOp { .. }, .. } => Some(Root::Computed),
        _ => None,
    }
}

/// Walks backward from argument `ipc_arg_index` of the IPC call at the end
/// of `chain` to where the value originates.
pub fn backward_track(corpus: &Corpus, chain: &CallChain, ipc_arg_index: usize) -> Result<TaintTrace> {
    if chain.methods.len() < 2 || chain.sites.len() + 1 != chain.methods.len() {
        return Err(Error::InvalidChain(format!("{} methods, {} sites", chain.methods.len(), chain.sites.len())));
    }
    let mut position = ipc_arg_index;
    let mut steps = Vec::new();
    let mut sinks = BTreeSet::new();
    let mut links = Vec::new();

    for link in (0..chain.sites.len()).rev() {
        let mref = &chain.methods[link];
        let def = corpus.method(mref).ok_or_else(|| Error::UnknownMethod(mref.clone()))?;
        let flat = FlatBody::new(&def.body);
        let cutoff = chain.sites[link];
        let inv = flat.invoke_at(cutoff).ok_or_else(|| Error::InvalidChain(format!("no call at {mref}#{cutoff}")))?;
        let arg = inv
            .args
            .get(position)
            .ok_or_else(|| Error::ArgumentOutOfRange { target: inv.target.clone(), index: position })?;

        let Some(loc) = arg.as_loc() else {
            links.push(LinkTrace { method: mref.clone(), cutoff, position, members: BTreeSet::new() });
            return Ok(finish(Origin::Literal { method: mref.clone(), index: Some(cutoff) }, steps, sinks, links));
        };
        let members = Aliases::of_method(def).class_of(loc.name());

        let mut link_steps = Vec::new();
        let mut root = None;
        for s in flat.iter().take_while(|s| s.index < cutoff) {
            if let Some(fact) = statement_fact(s.stmt, &members) {
                link_steps.push(Step { method: mref.clone(), index: s.index, fact });
                match (fact, s.stmt) {
                    (Fact::Compared, _) => {
                        sinks.insert(Sink::Guard(mref.clone(), s.index));
                    }
                    (Fact::PassedAsArg, Statement::Invoke(i)) => {
                        sinks.insert(Sink::Callee(i.target.clone()));
                    }
                    (Fact::StoredToField, Statement::Assign { lhs, .. }) => {
                        if let Some(l) = lhs.as_loc() {
                            sinks.insert(Sink::Field(l.name().to_string()));
                        }
                    }
                    _ => {}
                }
            }
            if let Some(r) = root_def(s.stmt, &members) {
                root = Some((s.index, r));
            }
        }
        link_steps.extend(steps);
        steps = link_steps;
        links.push(LinkTrace { method: mref.clone(), cutoff, position, members: members.clone() });

        if let Some((index, r)) = root {
            let origin = match r {
                Root::Call(target) => Origin::CallResult { method: mref.clone(), index, target },
                Root::Literal => Origin::Literal { method: mref.clone(), index: Some(index) },
                Root::Computed => Origin::Computed { method: mref.clone(), index: Some(index) },
            };
            return Ok(finish(origin, steps, sinks, links));
        }
        let param = def.params.iter().enumerate().find(|(_, p)| members.contains(&p.name));
        match param {
            Some((q, p)) if link == 0 => {
                let origin = Origin::Parameter { method: mref.clone(), name: p.name.clone(), position: q };
                return Ok(finish(origin, steps, sinks, links));
            }
            Some((q, _)) => position = q,
            None => {
                let origin = match members.iter().find(|m| m.contains('.')) {
                    Some(path) => Origin::Field { method: mref.clone(), path: path.clone() },
                    None => Origin::Computed { method: mref.clone(), index: None },
                };
                return Ok(finish(origin, steps, sinks, links));
            }
        }
    }
    unreachable!("the entry link always settles the origin")
}

fn finish(origin: Origin, steps: Vec<Step>, sinks: BTreeSet<Sink>, links: Vec<LinkTrace>) -> TaintTrace {
    TaintTrace { origin, steps, sinks, links }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum EscapeSite {
    Field { index: usize, path: String },
    Collection { index: usize, target: MethodRef },
    Callback { index: usize, target: MethodRef },
}

impl EscapeSite {
    pub fn index(&self) -> usize {
        match self {
            EscapeSite::Field { index, .. }
            | EscapeSite::Collection { index, .. }
            | EscapeSite::Callback { index, .. } => *index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EscapeReport {
    pub method: MethodRef,
    pub parameter: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter_position: Option<usize>,
    pub escapes: bool,
    pub escape_sites: Vec<EscapeSite>,
}

/// What counts as letting a value out of a method.
#[derive(Debug, Clone)]
pub struct EscapeRules<'a> {
    pub collection_mutators: &'a [String],
    pub callbacks: &'a CallbackTable,
    pub registration_methods: &'a [String],
}

impl EscapeRules<'_> {
    fn is_mutator(&self, target: &MethodRef) -> bool {
        self.collection_mutators.iter().any(|m| suffix_match(target.qualified_name(), m))
    }

    fn is_callback_registration(&self, target: &MethodRef) -> bool {
        self.callbacks.is_registration(target)
            || self.registration_methods.iter().any(|r| suffix_match(target.qualified_name(), r))
    }

    pub fn escape_analysis(&self, mref: &MethodRef, method: &MethodDef, parameter: &str) -> Result<EscapeReport> {
        if method.param_index(parameter).is_none() {
            return Err(Error::UnknownParameter { method: mref.clone(), name: parameter.to_string() });
        }
        let members = Aliases::of_method(method).class_of(parameter);
        let mut sites = Vec::new();
        for s in FlatBody::new(&method.body).iter() {
            match s.stmt {
                Statement::Assign { lhs: Operand::Field(path), rhs: Rvalue::Use(src) } if operand_in(src, &members) => {
                    sites.push(EscapeSite::Field { index: s.index, path: path.clone() });
                }
                Statement::Invoke(inv) if inv.args.iter().any(|a| operand_in(a, &members)) => {
                    if self.is_mutator(&inv.target) {
                        sites.push(EscapeSite::Collection { index: s.index, target: inv.target.clone() });
                    } else if self.is_callback_registration(&inv.target) {
                        sites.push(EscapeSite::Callback { index: s.index, target: inv.target.clone() });
                    }
                }
                _ => {}
            }
        }
        Ok(EscapeReport {
            method: mref.clone(),
            parameter: parameter.to_string(),
            parameter_position: method.param_index(parameter),
            escapes: !sites.is_empty(),
            escape_sites: sites,
        })
    }
}

/// Field receiver of a collection mutation, e.g. `this.mConfigs` in
/// `this.mConfigs.add(x)`.
pub fn mutated_collection(stmt: &Statement, rules: &EscapeRules<'_>) -> Option<String> {
    let Statement::Invoke(inv) = stmt else { return None };
    if !rules.is_mutator(&inv.target) {
        return None;
    }
    match inv.receiver.as_ref()?.as_loc()? {
        Loc::Field(f) => Some(f),
        Loc::Var(_) => None,
    }
}

use std::collections::BTreeSet;

use serde::Serialize;

use super::model::{ClassKind, MethodDef, Operand, Statement};
use super::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DiagnosticKind {
    InterfaceWithSuperclass,
    DuplicateSignature,
    SignatureMismatch,
    DuplicateParameter,
    BodyOnBodiless,
    UnassignedRead,
}

/// One invariant violation with its locus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statement: Option<usize>,
    pub message: String,
}

/// Checks class and method invariants. The result is sorted, so it does not
/// depend on class order in the input.
pub fn validate_corpus(corpus: &Corpus) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for class in corpus.classes() {
        if class.kind == ClassKind::Interface && class.superclass.is_some() {
            out.push(Diagnostic {
                kind: DiagnosticKind::InterfaceWithSuperclass,
                class: class.name.clone(),
                method: None,
                statement: None,
                message: "interface declares a superclass".into(),
            });
        }
        let mut seen = BTreeSet::new();
        for method in &class.methods {
            let diag = |kind, statement, message: String| Diagnostic {
                kind,
                class: class.name.clone(),
                method: Some(method.signature.clone()),
                statement,
                message,
            };
            if !seen.insert(method.signature.as_str()) {
                out.push(diag(DiagnosticKind::DuplicateSignature, None, "signature declared twice".into()));
            }
            let expected = method.expected_signature();
            if expected != method.signature {
                out.push(diag(
                    DiagnosticKind::SignatureMismatch,
                    None,
                    format!("signature should be `{expected}`"),
                ));
            }
            let mut names = BTreeSet::new();
            for p in &method.params {
                if !names.insert(p.name.as_str()) {
                    out.push(diag(
                        DiagnosticKind::DuplicateParameter,
                        None,
                        format!("parameter `{}` declared twice", p.name),
                    ));
                }
            }
            if (method.is_abstract() || method.is_native()) && !method.body.is_empty() {
                out.push(diag(
                    DiagnosticKind::BodyOnBodiless,
                    None,
                    "abstract or native method has a body".into(),
                ));
            }
            for (index, var) in unassigned_reads(method) {
                out.push(diag(
                    DiagnosticKind::UnassignedRead,
                    Some(index),
                    format!("`{var}` read before assignment"),
                ));
            }
        }
    }
    out.sort();
    out
}

/// Definite-assignment check over the structured body.
fn unassigned_reads(method: &MethodDef) -> Vec<(usize, String)> {
    let mut assigned: BTreeSet<String> = method.params.iter().map(|p| p.name.clone()).collect();
    if !method.is_static() {
        assigned.insert("this".into());
    }
    let mut walker = Walker { next: 0, found: Vec::new() };
    walker.block(&method.body, &mut assigned);
    walker.found
}

struct Walker {
    next: usize,
    found: Vec<(usize, String)>,
}

impl Walker {
    /// Returns true when the block always exits (throw or return).
    fn block(&mut self, block: &[Statement], assigned: &mut BTreeSet<String>) -> bool {
        let mut exits = false;
        for stmt in block {
            let index = self.next;
            self.next += 1;
            let check = |op: &Operand, found: &mut Vec<(usize, String)>, assigned: &BTreeSet<String>| {
                if let Operand::Var(v) = op {
                    if !assigned.contains(v) {
                        found.push((index, v.clone()));
                    }
                }
            };
            match stmt {
                Statement::Invoke(inv) => {
                    for op in inv.receiver.iter().chain(inv.args.iter()) {
                        check(op, &mut self.found, assigned);
                    }
                    if let Some(r) = &inv.result {
                        assigned.insert(r.clone());
                    }
                }
                Statement::Assign { lhs, rhs } => {
                    for op in rhs.operands() {
                        check(op, &mut self.found, assigned);
                    }
                    if let Operand::Var(v) = lhs {
                        assigned.insert(v.clone());
                    }
                }
                Statement::If { cond, then_block, else_block } => {
                    for op in cond.operands() {
                        check(op, &mut self.found, assigned);
                    }
                    let mut then_set = assigned.clone();
                    let then_exits = self.block(then_block, &mut then_set);
                    let mut else_set = assigned.clone();
                    let else_exits = self.block(else_block, &mut else_set);
                    *assigned = match (then_exits, else_exits) {
                        (true, true) => {
                            exits = true;
                            then_set.union(&else_set).cloned().collect()
                        }
                        (true, false) => else_set,
                        (false, true) => then_set,
                        (false, false) => then_set.intersection(&else_set).cloned().collect(),
                    };
                }
                Statement::Throw { .. } => exits = true,
                Statement::Return { value } => {
                    if let Some(op) = value {
                        check(op, &mut self.found, assigned);
                    }
                    exits = true;
                }
            }
        }
        exits
    }
}

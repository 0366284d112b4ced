//! Depth-first statement numbering.
//!
//! Every statement in a body gets an index in pre-order: an `if` is numbered
//! before its then-block, which is numbered before its else-block. Call-site
//! indices, trace steps and diagnostics all use this numbering.

use std::collections::BTreeMap;
use std::ops::Range;

use super::model::{Invoke, Statement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    Then,
    Else,
}

#[derive(Debug, Clone)]
pub struct FlatStmt<'a> {
    pub index: usize,
    pub stmt: &'a Statement,
}

#[derive(Debug, Clone)]
pub struct IfShape {
    pub then_range: Range<usize>,
    pub else_range: Range<usize>,
}

impl IfShape {
    pub fn branch_of(&self, index: usize) -> Option<Branch> {
        if self.then_range.contains(&index) {
            Some(Branch::Then)
        } else if self.else_range.contains(&index) {
            Some(Branch::Else)
        } else {
            None
        }
    }

    pub fn range(&self, branch: Branch) -> Range<usize> {
        match branch {
            Branch::Then => self.then_range.clone(),
            Branch::Else => self.else_range.clone(),
        }
    }
}

/// A method body flattened into depth-first order.
#[derive(Debug, Clone)]
pub struct FlatBody<'a> {
    stmts: Vec<FlatStmt<'a>>,
    ifs: BTreeMap<usize, IfShape>,
}

impl<'a> FlatBody<'a> {
    pub fn new(body: &'a [Statement]) -> Self {
        let mut flat = FlatBody { stmts: Vec::new(), ifs: BTreeMap::new() };
        flat.push_block(body);
        flat
    }

    fn push_block(&mut self, block: &'a [Statement]) {
        for stmt in block {
            let index = self.stmts.len();
            self.stmts.push(FlatStmt { index, stmt });
            if let Statement::If { then_block, else_block, .. } = stmt {
                let then_start = self.stmts.len();
                self.push_block(then_block);
                let else_start = self.stmts.len();
                self.push_block(else_block);
                let end = self.stmts.len();
                self.ifs.insert(
                    index,
                    IfShape { then_range: then_start..else_start, else_range: else_start..end },
                );
            }
        }
    }

    pub fn len(&self) -> usize {
        self.stmts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&'a Statement> {
        self.stmts.get(index).map(|s| s.stmt)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FlatStmt<'a>> {
        self.stmts.iter()
    }

    pub fn invokes(&self) -> impl Iterator<Item = (usize, &'a Invoke)> + '_ {
        self.stmts.iter().filter_map(|s| s.stmt.as_invoke().map(|inv| (s.index, inv)))
    }

    pub fn invoke_at(&self, index: usize) -> Option<&'a Invoke> {
        self.get(index).and_then(Statement::as_invoke)
    }

    pub fn if_shape(&self, index: usize) -> Option<&IfShape> {
        self.ifs.get(&index)
    }

    pub fn ifs(&self) -> impl Iterator<Item = (usize, &IfShape)> {
        self.ifs.iter().map(|(i, s)| (*i, s))
    }

    /// Statements in the given branch of the `if` at `index` matching `pred`.
    pub fn branch_any(&self, index: usize, branch: Branch, pred: impl Fn(&Statement) -> bool) -> bool {
        self.ifs
            .get(&index)
            .map(|shape| shape.range(branch).any(|i| pred(self.stmts[i].stmt)))
            .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::model::Statement;

    #[test]
    fn numbering_is_preorder() {
        let body: Vec<Statement> = serde_json::from_str(
            r#"[
              {"op":"invoke","dispatch":"static","target":"A.a()"},
              {"op":"if","cond":{"left":"x","relation":"eq","right":null},
               "thenBlock":[{"op":"invoke","dispatch":"static","target":"A.b()"},
                            {"op":"if","cond":{"left":"y","relation":"eq","right":1},
                             "thenBlock":[{"op":"throw","exceptionType":"E"}]}],
               "elseBlock":[{"op":"invoke","dispatch":"static","target":"A.c()"}]},
              {"op":"return"}
            ]"#,
        )
        .unwrap();
        let flat = FlatBody::new(&body);
        assert_eq!(flat.len(), 7);
        let shape = flat.if_shape(1).unwrap();
        assert_eq!(shape.then_range, 2..5);
        assert_eq!(shape.else_range, 5..6);
        assert_eq!(flat.if_shape(3).unwrap().then_range, 4..5);
        let targets: Vec<(usize, &str)> =
            flat.invokes().map(|(i, inv)| (i, inv.target.simple_name())).collect();
        assert_eq!(targets, vec![(0, "a"), (2, "b"), (5, "c")]);
        assert!(flat.branch_any(1, Branch::Then, |s| matches!(s, Statement::Throw { .. })));
        assert!(!flat.branch_any(1, Branch::Else, |s| matches!(s, Statement::Throw { .. })));
    }
}

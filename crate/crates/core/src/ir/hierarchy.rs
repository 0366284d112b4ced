use std::collections::{BTreeMap, BTreeSet};

use super::model::{ClassDef, ClassKind};
use super::IrError;

/// Reflexive-transitive subtype closure over corpus classes and externals.
#[derive(Debug, Clone, Default)]
pub struct TypeHierarchy {
    subtype_index: BTreeMap<String, BTreeSet<String>>,
    implementor_index: BTreeMap<String, BTreeSet<String>>,
    edges: usize,
}

impl TypeHierarchy {
    pub(crate) fn build(classes: &[ClassDef], externals: &BTreeSet<String>) -> Result<Self, IrError> {
        let mut supers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for ext in externals {
            supers.entry(ext.as_str()).or_default();
        }
        let mut edges = 0;
        for class in classes {
            let entry = supers.entry(class.name.as_str()).or_default();
            for s in class.superclass.iter().chain(class.interfaces.iter()) {
                entry.push(s.as_str());
                edges += 1;
            }
        }
        detect_cycle(&supers)?;

        let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (&sub, sups) in &supers {
            for &sup in sups {
                children.entry(sup).or_default().push(sub);
            }
        }
        let mut subtype_index = BTreeMap::new();
        for &name in supers.keys() {
            let mut set = BTreeSet::new();
            let mut stack = vec![name];
            while let Some(n) = stack.pop() {
                if set.insert(n.to_string()) {
                    stack.extend(children.get(n).into_iter().flatten().copied());
                }
            }
            subtype_index.insert(name.to_string(), set);
        }

        let kinds: BTreeMap<&str, ClassKind> = classes.iter().map(|c| (c.name.as_str(), c.kind)).collect();
        let mut implementor_index = BTreeMap::new();
        for class in classes.iter().filter(|c| c.kind == ClassKind::Interface) {
            let implementors: BTreeSet<String> = subtype_index[&class.name]
                .iter()
                .filter(|s| kinds.get(s.as_str()).is_some_and(|k| *k != ClassKind::Interface))
                .cloned()
                .collect();
            implementor_index.insert(class.name.clone(), implementors);
        }
        Ok(TypeHierarchy { subtype_index, implementor_index, edges })
    }

    /// All subtypes of `name`, including itself.
    pub fn subtypes_of(&self, name: &str) -> Result<&BTreeSet<String>, IrError> {
        self.subtype_index
            .get(name)
            .ok_or_else(|| IrError::UnknownClass(name.to_string()))
    }

    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        self.subtype_index.get(sup).is_some_and(|s| s.contains(sub))
    }

    /// Non-interface classes implementing `interface`, directly or not.
    pub fn implementors(&self, interface: &str) -> Option<&BTreeSet<String>> {
        self.implementor_index.get(interface)
    }

    /// Supertypes of `name` (reflexive).
    pub fn supertypes_of(&self, name: &str) -> BTreeSet<&str> {
        self.subtype_index
            .iter()
            .filter(|(_, subs)| subs.contains(name))
            .map(|(sup, _)| sup.as_str())
            .collect()
    }

    /// Number of direct supertype edges.
    pub fn edge_count(&self) -> usize {
        self.edges
    }
}

fn detect_cycle(supers: &BTreeMap<&str, Vec<&str>>) -> Result<(), IrError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
    for &root in supers.keys() {
        if marks.contains_key(root) {
            continue;
        }
        // iterative DFS keeping the active path for the error message
        let mut path: Vec<(&str, usize)> = vec![(root, 0)];
        marks.insert(root, Mark::Active);
        while let Some((node, next)) = path.last_mut() {
            let node = *node;
            let succ = supers.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if *next < succ.len() {
                let s = succ[*next];
                *next += 1;
                match marks.get(s) {
                    Some(Mark::Active) => {
                        let start = path.iter().position(|(n, _)| *n == s).unwrap_or(0);
                        let mut classes: Vec<String> = path[start..].iter().map(|(n, _)| n.to_string()).collect();
                        classes.push(s.to_string());
                        return Err(IrError::Cycle { classes });
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(s, Mark::Active);
                        path.push((s, 0));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
                path.pop();
            }
        }
    }
    Ok(())
}

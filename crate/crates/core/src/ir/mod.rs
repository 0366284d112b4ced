//! Framework corpus intermediate representation.
//!
//! A [`Corpus`] is the parsed, reference-checked form of a corpus document.
//! It is immutable once built and may be shared across threads.

mod hierarchy;
pub mod model;
mod validate;
pub mod walk;

use std::collections::{BTreeSet, HashMap};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use hierarchy::TypeHierarchy;
pub use model::*;
pub use validate::{validate_corpus, Diagnostic, DiagnosticKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unresolved reference `{name}` ({context})")]
    Resolution { name: String, context: String },
    #[error("inheritance cycle through {}", classes.join(" -> "))]
    Cycle { classes: Vec<String> },
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
}

/// Where a call lands after resolution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Callee {
    /// A concrete method with a body (or native) in the corpus.
    Corpus(MethodRef),
    /// An opaque method on a declared external class.
    External(MethodRef),
}

impl Callee {
    pub fn method_ref(&self) -> &MethodRef {
        match self {
            Callee::Corpus(m) | Callee::External(m) => m,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    classes: Vec<ClassDef>,
    externals: BTreeSet<String>,
    callbacks: Vec<CallbackEntry>,
    class_index: HashMap<String, usize>,
    method_index: HashMap<MethodRef, (usize, usize)>,
    hierarchy: TypeHierarchy,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.externals == other.externals
            && self.callbacks == other.callbacks
    }
}

/// Parses a corpus document and checks referential integrity.
pub fn parse_corpus(input: &str) -> Result<Corpus, IrError> {
    let doc: CorpusDocument = serde_json::from_str(input).map_err(|e| IrError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Corpus::from_document(doc)
}

impl Corpus {
    pub fn from_document(doc: CorpusDocument) -> Result<Corpus, IrError> {
        if doc.version != 1 {
            return Err(IrError::Syntax {
                line: 0,
                column: 0,
                message: format!("unsupported corpus version {}", doc.version),
            });
        }
        let externals: BTreeSet<String> = doc.externals.into_iter().collect();
        let mut class_index = HashMap::new();
        for (i, class) in doc.classes.iter().enumerate() {
            if class_index.insert(class.name.clone(), i).is_some() || externals.contains(&class.name) {
                return Err(IrError::DuplicateClass(class.name.clone()));
            }
        }
        let mut method_index = HashMap::new();
        for (ci, class) in doc.classes.iter().enumerate() {
            for (mi, method) in class.methods.iter().enumerate() {
                // duplicate signatures are reported by validation; keep the first
                method_index
                    .entry(MethodRef::new(&class.name, &method.signature))
                    .or_insert((ci, mi));
            }
        }
        let known = |name: &str| class_index.contains_key(name) || externals.contains(name);
        for class in &doc.classes {
            let refs = class
                .superclass
                .iter()
                .map(|s| (s, "superclass"))
                .chain(class.interfaces.iter().map(|s| (s, "interface")))
                .chain(class.enclosing.iter().map(|s| (s, "enclosing class")));
            for (name, role) in refs {
                if !known(name) {
                    return Err(IrError::Resolution {
                        name: name.clone(),
                        context: format!("{role} of {}", class.name),
                    });
                }
            }
        }
        let callbacks = doc.callback_edges.unwrap_or_default();
        for entry in &callbacks {
            if !known(&entry.interface) {
                return Err(IrError::Resolution {
                    name: entry.interface.clone(),
                    context: "callback interface".into(),
                });
            }
            if !known(entry.registration.class_name()) {
                return Err(IrError::Resolution {
                    name: entry.registration.class_name().to_string(),
                    context: "callback registration".into(),
                });
            }
        }
        let hierarchy = TypeHierarchy::build(&doc.classes, &externals)?;
        let corpus = Corpus {
            classes: doc.classes,
            externals,
            callbacks,
            class_index,
            method_index,
            hierarchy,
        };
        corpus.check_targets()?;
        Ok(corpus)
    }

    fn check_targets(&self) -> Result<(), IrError> {
        for class in &self.classes {
            for method in &class.methods {
                for stmt in walk::FlatBody::new(&method.body).iter() {
                    let Some(inv) = stmt.stmt.as_invoke() else { continue };
                    let target_class = inv.target.class_name();
                    if self.externals.contains(target_class) {
                        continue;
                    }
                    let context = format!(
                        "call target in {}.{}",
                        class.name, method.signature
                    );
                    if !self.class_index.contains_key(target_class) {
                        return Err(IrError::Resolution {
                            name: target_class.to_string(),
                            context,
                        });
                    }
                    if self.lookup_declared(target_class, inv.target.signature()).is_none() {
                        return Err(IrError::Resolution { name: inv.target.to_string(), context });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> CorpusDocument {
        CorpusDocument {
            version: 1,
            externals: self.externals.iter().cloned().collect(),
            classes: self.classes.clone(),
            callback_edges: if self.callbacks.is_empty() { None } else { Some(self.callbacks.clone()) },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("corpus serializes")
    }

    /// SHA-256 over the compact canonical serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_document()).expect("corpus serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn externals(&self) -> &BTreeSet<String> {
        &self.externals
    }

    pub fn callbacks(&self) -> &[CallbackEntry] {
        &self.callbacks
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn method_count(&self) -> usize {
        self.classes.iter().map(|c| c.methods.len()).sum()
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.class_index.get(name).map(|&i| &self.classes[i])
    }

    pub fn is_external(&self, name: &str) -> bool {
        self.externals.contains(name)
    }

    pub fn is_known(&self, name: &str) -> bool {
        self.class_index.contains_key(name) || self.externals.contains(name)
    }

    /// Method declared exactly at this reference.
    pub fn method(&self, r: &MethodRef) -> Option<&MethodDef> {
        self.method_index
            .get(r)
            .map(|&(ci, mi)| &self.classes[ci].methods[mi])
    }

    pub fn method_refs(&self) -> impl Iterator<Item = (MethodRef, &ClassDef, &MethodDef)> {
        self.classes.iter().flat_map(|c| {
            c.methods
                .iter()
                .map(move |m| (MethodRef::new(&c.name, &m.signature), c, m))
        })
    }

    /// Outermost enclosing class (the class itself when not nested).
    pub fn top_level(&self, name: &str) -> String {
        let mut current = name;
        let mut seen = BTreeSet::new();
        while let Some(outer) = self.class(current).and_then(|c| c.enclosing.as_deref()) {
            if !seen.insert(current) {
                break;
            }
            current = outer;
        }
        current.to_string()
    }

    /// Where `signature` is declared for `class`: the class, its superclass
    /// chain, then its interfaces. An external ancestor makes the call opaque.
    pub fn lookup_declared(&self, class: &str, signature: &str) -> Option<Callee> {
        let mut queue = vec![class.to_string()];
        let mut seen = BTreeSet::new();
        let mut external_hit = None;
        while !queue.is_empty() {
            let mut next = Vec::new();
            for name in queue {
                if !seen.insert(name.clone()) {
                    continue;
                }
                if self.externals.contains(&name) {
                    external_hit.get_or_insert_with(|| MethodRef::new(&name, signature));
                    continue;
                }
                let Some(def) = self.class(&name) else { continue };
                if def.method(signature).is_some() {
                    return Some(Callee::Corpus(MethodRef::new(&name, signature)));
                }
                next.extend(def.superclass.iter().cloned());
                next.extend(def.interfaces.iter().cloned());
            }
            queue = next;
        }
        external_hit.map(Callee::External)
    }

    /// Concrete implementation seen by an instance of `class`: the first
    /// non-abstract definition up the superclass chain.
    pub fn resolve_concrete(&self, class: &str, signature: &str) -> Option<Callee> {
        let mut current = Some(class.to_string());
        let mut seen = BTreeSet::new();
        while let Some(name) = current {
            if !seen.insert(name.clone()) {
                return None;
            }
            if self.externals.contains(&name) {
                return Some(Callee::External(MethodRef::new(&name, signature)));
            }
            let def = self.class(&name)?;
            if let Some(m) = def.method(signature) {
                if !m.is_abstract() {
                    return Some(Callee::Corpus(MethodRef::new(&name, signature)));
                }
            }
            current = def.superclass.clone();
        }
        None
    }

    /// CHA: every implementation a virtual or interface call on `declared`
    /// can reach.
    pub fn cha_targets(&self, declared: &str, signature: &str) -> BTreeSet<Callee> {
        let mut out = BTreeSet::new();
        if self.externals.contains(declared) {
            out.insert(Callee::External(MethodRef::new(declared, signature)));
        }
        if let Ok(subs) = self.hierarchy.subtypes_of(declared) {
            for sub in subs {
                if self.class(sub).is_some_and(ClassDef::is_concrete) {
                    out.extend(self.resolve_concrete(sub, signature));
                }
            }
        }
        out
    }

    /// Callees of an invoke statement.
    pub fn dispatch(&self, inv: &Invoke) -> BTreeSet<Callee> {
        let class = inv.target.class_name();
        let sig = inv.target.signature();
        match inv.dispatch {
            Dispatch::Static | Dispatch::Special => self.resolve_concrete(class, sig).into_iter().collect(),
            Dispatch::Virtual | Dispatch::Interface => self.cha_targets(class, sig),
        }
    }

    /// Declared return type of a call target, if it resolves into the corpus.
    pub fn return_type(&self, target: &MethodRef) -> Option<&str> {
        match self.lookup_declared(target.class_name(), target.signature())? {
            Callee::Corpus(r) => self.method(&r).map(|m| m.return_type.as_str()),
            Callee::External(_) => None,
        }
    }
}

//! On-the-fly method-level call graphs.
//!
//! Graphs are built breadth-first from one entry method. Virtual and
//! interface calls resolve through class hierarchy analysis; implicit calls
//! (listener registrations and the like) come from a [`CallbackTable`].
//! When an [`IpcBoundary`] is supplied, calls into IPC proxies are recorded
//! as targets and never expanded.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir::walk::FlatBody;
use crate::ir::{CallbackEntry, Callee, Corpus, Invoke, MethodRef};

pub const DEFAULT_MAX_DEPTH: usize = 12;
pub const DEFAULT_CHAIN_LIMIT: usize = 256;

/// Implicit call edges: calling `registration` may later invoke `callback`
/// on any implementation of `interface`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CallbackTable {
    pub entries: Vec<CallbackEntry>,
}

impl CallbackTable {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        CallbackTable { entries: corpus.callbacks().to_vec() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
    }

    /// Checks every callback interface resolves in the corpus or externals.
    pub fn check(&self, corpus: &Corpus) -> Result<()> {
        for e in &self.entries {
            if !corpus.is_known(&e.interface) {
                return Err(Error::Config(format!("callback interface `{}` is not declared", e.interface)));
            }
        }
        Ok(())
    }

    pub fn merged(mut self, other: &CallbackTable) -> Self {
        for e in &other.entries {
            if !self.entries.contains(e) {
                self.entries.push(e.clone());
            }
        }
        self
    }

    pub fn is_registration(&self, target: &MethodRef) -> bool {
        self.entries.iter().any(|e| &e.registration == target)
    }

    fn callees(&self, corpus: &Corpus, target: &MethodRef) -> BTreeSet<MethodRef> {
        let mut out = BTreeSet::new();
        for e in self.entries.iter().filter(|e| &e.registration == target) {
            let Ok(subs) = corpus.hierarchy().subtypes_of(&e.interface) else { continue };
            for sub in subs {
                if !corpus.class(sub).is_some_and(|c| c.is_concrete()) {
                    continue;
                }
                if let Some(Callee::Corpus(m)) = corpus.resolve_concrete(sub, &e.callback) {
                    out.insert(m);
                }
            }
        }
        out
    }
}

/// Identifies calls that cross the client/service IPC boundary.
pub trait IpcBoundary {
    /// Proxy method standing for a call to `target`, when `target` names an
    /// IPC interface method.
    fn proxy_for_ipc(&self, target: &MethodRef) -> Option<&MethodRef>;

    fn is_proxy(&self, method: &MethodRef) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub caller: MethodRef,
    pub site: usize,
    pub callee: MethodRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallGraph {
    pub entry: MethodRef,
    pub nodes: BTreeSet<MethodRef>,
    pub edges: BTreeSet<Edge>,
    pub targets: BTreeSet<MethodRef>,
}

/// Acyclic path from the entry to a proxy target, with the call-site index
/// used at each hop (`sites[i]` lies in `methods[i]`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CallChain {
    pub methods: Vec<MethodRef>,
    pub sites: Vec<usize>,
}

impl CallChain {
    pub fn entry(&self) -> &MethodRef {
        &self.methods[0]
    }

    pub fn target(&self) -> &MethodRef {
        self.methods.last().expect("chains are nonempty")
    }

    /// Method containing the call to the target, and the call-site index.
    pub fn ipc_site(&self) -> (&MethodRef, usize) {
        let n = self.methods.len();
        (&self.methods[n - 2], self.sites[n - 2])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChainEnumeration {
    pub chains: Vec<CallChain>,
    pub truncated: bool,
}

pub struct GraphBuilder<'a> {
    corpus: &'a Corpus,
    callbacks: &'a CallbackTable,
    boundary: Option<&'a dyn IpcBoundary>,
    max_depth: usize,
}

impl<'a> GraphBuilder<'a> {
    pub fn new(corpus: &'a Corpus, callbacks: &'a CallbackTable) -> Self {
        GraphBuilder { corpus, callbacks, boundary: None, max_depth: DEFAULT_MAX_DEPTH }
    }

    pub fn boundary(mut self, boundary: &'a dyn IpcBoundary) -> Self {
        self.boundary = Some(boundary);
        self
    }

    pub fn max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth.max(1);
        self
    }

    /// Resolved callees of one invoke statement, IPC boundary applied.
    pub fn callees_of(&self, inv: &Invoke) -> BTreeSet<MethodRef> {
        if let Some(b) = self.boundary {
            if let Some(proxy) = b.proxy_for_ipc(&inv.target) {
                return BTreeSet::from([proxy.clone()]);
            }
        }
        let mut out: BTreeSet<MethodRef> = self
            .corpus
            .dispatch(inv)
            .into_iter()
            .map(|c| c.method_ref().clone())
            .collect();
        out.extend(self.callbacks.callees(self.corpus, &inv.target));
        out
    }

    fn expandable(&self, m: &MethodRef) -> bool {
        if self.boundary.is_some_and(|b| b.is_proxy(m)) {
            return false;
        }
        self.corpus
            .method(m)
            .is_some_and(|def| !def.is_native() && !def.is_abstract())
    }

    pub fn build(&self, entry: &MethodRef) -> Result<CallGraph> {
        if self.corpus.method(entry).is_none() {
            return Err(Error::UnknownMethod(entry.clone()));
        }
        let mut graph = CallGraph {
            entry: entry.clone(),
            nodes: BTreeSet::from([entry.clone()]),
            edges: BTreeSet::new(),
            targets: BTreeSet::new(),
        };
        let mut queue = VecDeque::from([(entry.clone(), 0usize)]);
        let mut expanded = BTreeSet::new();
        while let Some((method, depth)) = queue.pop_front() {
            if depth >= self.max_depth || !self.expandable(&method) || !expanded.insert(method.clone()) {
                continue;
            }
            let def = self.corpus.method(&method).expect("expandable methods exist");
            for (site, inv) in FlatBody::new(&def.body).invokes() {
                for callee in self.callees_of(inv) {
                    graph.edges.insert(Edge { caller: method.clone(), site, callee: callee.clone() });
                    if self.boundary.is_some_and(|b| b.is_proxy(&callee)) {
                        graph.targets.insert(callee.clone());
                    }
                    if graph.nodes.insert(callee.clone()) {
                        queue.push_back((callee, depth + 1));
                    }
                }
            }
        }
        Ok(graph)
    }
}

/// Call graph from `entry` without an IPC boundary (no targets).
pub fn build_graph(corpus: &Corpus, entry: &MethodRef, table: &CallbackTable, max_depth: usize) -> Result<CallGraph> {
    GraphBuilder::new(corpus, table).max_depth(max_depth).build(entry)
}

impl CallGraph {
    /// Successors keyed by callee with the smallest call-site index.
    fn adjacency(&self) -> BTreeMap<&MethodRef, BTreeMap<&MethodRef, usize>> {
        let mut adj: BTreeMap<&MethodRef, BTreeMap<&MethodRef, usize>> = BTreeMap::new();
        for e in &self.edges {
            let slot = adj.entry(&e.caller).or_default().entry(&e.callee).or_insert(e.site);
            *slot = (*slot).min(e.site);
        }
        adj
    }

    /// Nodes from which some target is reachable.
    fn reaching_targets(&self) -> BTreeSet<&MethodRef> {
        let mut preds: BTreeMap<&MethodRef, Vec<&MethodRef>> = BTreeMap::new();
        for e in &self.edges {
            preds.entry(&e.callee).or_default().push(&e.caller);
        }
        let mut seen: BTreeSet<&MethodRef> = self.targets.iter().collect();
        let mut stack: Vec<&MethodRef> = seen.iter().copied().collect();
        while let Some(n) = stack.pop() {
            for &p in preds.get(n).into_iter().flatten() {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        seen
    }
}

/// Up to `limit` acyclic entry-to-target paths in lexicographic order of
/// their node sequences.
pub fn enumerate_chains(g: &CallGraph, limit: usize) -> ChainEnumeration {
    enumerate_chains_to(g, None, limit)
}

/// As [`enumerate_chains`], restricted to chains ending at `target`.
pub fn enumerate_chains_to(g: &CallGraph, target: Option<&MethodRef>, limit: usize) -> ChainEnumeration {
    let mut out = ChainEnumeration::default();
    if g.targets.is_empty() || target.is_some_and(|t| !g.targets.contains(t)) {
        return out;
    }
    let adj = g.adjacency();
    let live = g.reaching_targets();
    let wanted = |n: &MethodRef| g.targets.contains(n) && target.is_none_or(|t| t == n);
    if !live.contains(&g.entry) {
        return out;
    }

    struct Frame<'g> {
        node: &'g MethodRef,
        succ: Vec<(&'g MethodRef, usize)>,
        next: usize,
    }
    let succ_of = |n: &MethodRef| -> Vec<(&MethodRef, usize)> {
        adj.get(n)
            .map(|m| m.iter().filter(|(c, _)| live.contains(*c)).map(|(c, s)| (*c, *s)).collect())
            .unwrap_or_default()
    };
    let mut on_path: BTreeSet<&MethodRef> = BTreeSet::from([&g.entry]);
    let mut stack = vec![Frame { node: &g.entry, succ: succ_of(&g.entry), next: 0 }];
    let mut sites: Vec<usize> = Vec::new();
    while let Some(frame) = stack.last_mut() {
        if frame.next >= frame.succ.len() {
            on_path.remove(frame.node);
            stack.pop();
            sites.pop();
            continue;
        }
        let (callee, site) = frame.succ[frame.next];
        frame.next += 1;
        if on_path.contains(callee) {
            continue;
        }
        if g.targets.contains(callee) {
            if wanted(callee) {
                if out.chains.len() == limit {
                    out.truncated = true;
                    return out;
                }
                let mut methods: Vec<MethodRef> = stack.iter().map(|f| f.node.clone()).collect();
                methods.push(callee.clone());
                let mut chain_sites = sites.clone();
                chain_sites.push(site);
                out.chains.push(CallChain { methods, sites: chain_sites });
            }
            continue;
        }
        on_path.insert(callee);
        sites.push(site);
        stack.push(Frame { node: callee, succ: succ_of(callee), next: 0 });
    }
    out
}

/// Invoke statements of the method body itself, in depth-first order.
pub fn service_entry_invokes(corpus: &Corpus, service: &MethodRef) -> Result<Vec<(usize, Invoke)>> {
    let def = corpus.method(service).ok_or_else(|| Error::UnknownMethod(service.clone()))?;
    Ok(FlatBody::new(&def.body).invokes().map(|(i, inv)| (i, inv.clone())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_corpus;

    fn mref(s: &str) -> MethodRef {
        MethodRef::parse(s).unwrap()
    }

    struct Proxies(BTreeSet<MethodRef>);

    impl IpcBoundary for Proxies {
        fn proxy_for_ipc(&self, _: &MethodRef) -> Option<&MethodRef> {
            None
        }
        fn is_proxy(&self, m: &MethodRef) -> bool {
            self.0.contains(m)
        }
    }

    fn method(name: &str, calls: &[(&str, &str)]) -> String {
        let body: Vec<String> = calls
            .iter()
            .map(|(d, t)| {
                let recv = if *d == "static" { "" } else { r#","receiver":"this""# };
                format!(r#"{{"op":"invoke","dispatch":"{d}","target":"{t}"{recv}}}"#)
            })
            .collect();
        format!(r#"{{"name":"{name}","signature":"{name}()","returnType":"void","body":[{}]}}"#, body.join(","))
    }

    fn corpus(classes: &[(&str, &str, Option<&str>, Vec<String>)]) -> Corpus {
        let cls: Vec<String> = classes
            .iter()
            .map(|(name, kind, sup, methods)| {
                let sup = sup.map(|s| format!(r#","superclass":"{s}""#)).unwrap_or_default();
                format!(
                    r#"{{"name":"{name}","package":"","kind":"{kind}"{sup},"methods":[{}]}}"#,
                    methods.join(",")
                )
            })
            .collect();
        parse_corpus(&format!(r#"{{"version":1,"externals":["Ext"],"classes":[{}]}}"#, cls.join(","))).unwrap()
    }

    #[test]
    fn linear_chain() {
        let c = corpus(&[
            ("A", "class", None, vec![method("f", &[("static", "A.g()")]), method("g", &[("static", "P.p()")])]),
            ("P", "class", None, vec![method("p", &[])]),
        ]);
        let table = CallbackTable::default();
        let proxies = Proxies(BTreeSet::from([mref("P.p()")]));
        let g = GraphBuilder::new(&c, &table).boundary(&proxies).build(&mref("A.f()")).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.targets, BTreeSet::from([mref("P.p()")]));
        let chains = enumerate_chains(&g, 10);
        assert_eq!(chains.chains.len(), 1);
        assert_eq!(chains.chains[0].methods, vec![mref("A.f()"), mref("A.g()"), mref("P.p()")]);
        assert_eq!(chains.chains[0].sites, vec![0, 0]);
    }

    #[test]
    fn virtual_call_fans_out() {
        let c = corpus(&[
            ("T", "abstract", None, vec![r#"{"name":"m","signature":"m()","returnType":"void","modifiers":["abstract"]}"#.into()]),
            ("T1", "class", Some("T"), vec![method("m", &[])]),
            ("T2", "class", Some("T"), vec![method("m", &[])]),
            ("A", "class", None, vec![method("f", &[("virtual", "T.m()")])]),
        ]);
        let g = build_graph(&c, &mref("A.f()"), &CallbackTable::default(), 12).unwrap();
        let callees: Vec<&str> = g.edges.iter().map(|e| e.callee.as_str()).collect();
        assert_eq!(callees, vec!["T1.m()", "T2.m()"]);
        assert!(g.targets.is_empty());
        assert!(enumerate_chains(&g, 10).chains.is_empty());
    }

    #[test]
    fn diamond_has_two_chains() {
        let c = corpus(&[
            (
                "A",
                "class",
                None,
                vec![
                    method("f", &[("static", "A.b()"), ("static", "A.a()")]),
                    method("a", &[("static", "P.p()")]),
                    method("b", &[("static", "P.p()")]),
                ],
            ),
            ("P", "class", None, vec![method("p", &[])]),
        ]);
        let table = CallbackTable::default();
        let proxies = Proxies(BTreeSet::from([mref("P.p()")]));
        let g = GraphBuilder::new(&c, &table).boundary(&proxies).build(&mref("A.f()")).unwrap();
        let e = enumerate_chains(&g, 10);
        assert_eq!(e.chains.len(), 2);
        // lexicographic: A.a() before A.b()
        assert_eq!(e.chains[0].methods[1], mref("A.a()"));
        assert_eq!(e.chains[0].sites, vec![1, 0]);
        assert!(!e.truncated);
        let one = enumerate_chains(&g, 1);
        assert_eq!(one.chains.len(), 1);
        assert!(one.truncated);
    }

    #[test]
    fn recursion_is_not_reexpanded() {
        let c = corpus(&[(
            "A",
            "class",
            None,
            vec![method("f", &[("static", "A.g()")]), method("g", &[("static", "A.f()"), ("static", "Ext.x()")])],
        )]);
        let g = build_graph(&c, &mref("A.f()"), &CallbackTable::default(), 12).unwrap();
        assert_eq!(g.edges.len(), 3);
        assert!(g.nodes.contains(&mref("Ext.x()")));
    }

    #[test]
    fn callback_edges_attach_at_registration_site() {
        let doc = r#"{"version":1,"externals":["Reg","Listener"],"classes":[
            {"name":"A","package":"","kind":"class","methods":[
              {"name":"f","signature":"f()","returnType":"void","body":[
                {"op":"invoke","dispatch":"static","target":"Reg.register(Listener)","args":[null]}]}]},
            {"name":"L","package":"","kind":"class","interfaces":["Listener"],"methods":[
              {"name":"onEvent","signature":"onEvent()","returnType":"void"}]}],
            "callback_edges":[{"registration":"Reg.register(Listener)","interface":"Listener","callback":"onEvent()"}]}"#;
        let c = parse_corpus(doc).unwrap();
        let table = CallbackTable::from_corpus(&c);
        let g = build_graph(&c, &mref("A.f()"), &table, 12).unwrap();
        assert!(g.edges.contains(&Edge { caller: mref("A.f()"), site: 0, callee: mref("L.onEvent()") }));
        assert!(g.edges.contains(&Edge { caller: mref("A.f()"), site: 0, callee: mref("Reg.register(Listener)") }));
    }

    #[test]
    fn depth_bound() {
        let c = corpus(&[(
            "A",
            "class",
            None,
            vec![method("a", &[("static", "A.b()")]), method("b", &[("static", "A.c()")]), method("c", &[("static", "A.d()")]), method("d", &[])],
        )]);
        let t = CallbackTable::default();
        let g1 = build_graph(&c, &mref("A.a()"), &t, 1).unwrap();
        let g2 = build_graph(&c, &mref("A.a()"), &t, 2).unwrap();
        assert_eq!(g1.edges.len(), 1);
        assert_eq!(g2.edges.len(), 2);
        assert!(g1.edges.is_subset(&g2.edges));
        assert!(matches!(build_graph(&c, &mref("A.zz()"), &t, 2), Err(Error::UnknownMethod(_))));
    }

    #[test]
    fn entry_invokes_in_order() {
        let doc = r#"{"version":1,"externals":["E"],"classes":[
            {"name":"S","package":"","kind":"class","methods":[
              {"name":"f","signature":"f(int)","params":[{"name":"x","type":"int"}],"returnType":"void","body":[
                {"op":"if","cond":{"left":"x","relation":"gt","right":0},
                 "thenBlock":[{"op":"invoke","dispatch":"static","target":"E.a()"},
                   {"op":"if","cond":{"left":"x","relation":"gt","right":5},"thenBlock":[{"op":"invoke","dispatch":"static","target":"E.b()"}]}],
                 "elseBlock":[{"op":"invoke","dispatch":"static","target":"E.c()"}]}]},
              {"name":"g","signature":"g()","returnType":"void"}]}]}"#;
        let c = parse_corpus(doc).unwrap();
        let inv = service_entry_invokes(&c, &mref("S.f(int)")).unwrap();
        let names: Vec<&str> = inv.iter().map(|(_, i)| i.target.simple_name()).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
        assert!(service_entry_invokes(&c, &mref("S.g()")).unwrap().is_empty());
        assert!(service_entry_invokes(&c, &mref("S.h()")).is_err());
    }
}

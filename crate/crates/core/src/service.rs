//! System services, IPC stubs/proxies, service helpers, and the
//! helper-method/IPC-method pairs everything downstream analyzes.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::callgraph::{CallbackTable, GraphBuilder, IpcBoundary};
use crate::config::{suffix_match, SeedConfig};
use crate::error::Result;
use crate::ir::walk::FlatBody;
use crate::ir::{Callee, ClassKind, Corpus, MethodDef, MethodRef, Operand, Statement};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceRegistry {
    pub services: BTreeSet<String>,
    /// IPC method → implementing service method.
    pub stub_methods: BTreeMap<MethodRef, MethodRef>,
    /// IPC method → client-side proxy method.
    pub proxy_methods: BTreeMap<MethodRef, MethodRef>,
    #[serde(skip)]
    ipc_methods: BTreeSet<MethodRef>,
    #[serde(skip)]
    proxy_index: BTreeMap<MethodRef, MethodRef>,
    #[serde(skip)]
    ipc_classes: BTreeSet<String>,
}

impl IpcBoundary for ServiceRegistry {
    fn proxy_for_ipc(&self, target: &MethodRef) -> Option<&MethodRef> {
        self.proxy_methods.get(target)
    }

    fn is_proxy(&self, method: &MethodRef) -> bool {
        self.proxy_index.contains_key(method)
    }
}

impl ServiceRegistry {
    /// IPC method a proxy method stands for.
    pub fn ipc_of_proxy(&self, proxy: &MethodRef) -> Option<&MethodRef> {
        self.proxy_index.get(proxy)
    }

    pub fn ipc_methods(&self) -> &BTreeSet<MethodRef> {
        &self.ipc_methods
    }

    /// Interfaces, stubs and proxies: never helpers.
    pub fn is_ipc_class(&self, class: &str) -> bool {
        self.ipc_classes.contains(class)
    }
}

/// Supertypes of `class` (reflexive) matching each marker.
fn implements_all(corpus: &Corpus, class: &str, markers: &[String]) -> bool {
    let sups = corpus.hierarchy().supertypes_of(class);
    markers.iter().all(|m| sups.iter().any(|s| suffix_match(s, m)))
}

fn is_marker(name: &str, markers: &[String]) -> bool {
    markers.iter().any(|m| suffix_match(name, m))
}

/// Static types of local variables, as far as declarations reveal them.
fn local_types(corpus: &Corpus, class: &str, method: &MethodDef) -> BTreeMap<String, String> {
    let mut types: BTreeMap<String, String> =
        method.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
    if !method.is_static() {
        types.insert("this".into(), class.to_string());
    }
    for s in FlatBody::new(&method.body).iter() {
        match s.stmt {
            Statement::Invoke(inv) => {
                if let (Some(r), Some(t)) = (&inv.result, corpus.return_type(&inv.target)) {
                    types.insert(r.clone(), t.to_string());
                }
            }
            Statement::Assign { lhs: Operand::Var(v), rhs: crate::ir::Rvalue::Use(Operand::Var(src)) } => {
                if let Some(t) = types.get(src).cloned() {
                    types.insert(v.clone(), t);
                }
            }
            _ => {}
        }
    }
    types
}

/// Finds registered services and the stub/proxy implementation of every IPC
/// method.
pub fn identify_services(corpus: &Corpus, seeds: &SeedConfig) -> Result<ServiceRegistry> {
    seeds.check()?;
    let markers = &seeds.stub_markers;
    let mut reg = ServiceRegistry::default();

    for (_, class, method) in corpus.method_refs() {
        let flat = FlatBody::new(&method.body);
        let mut types = None;
        for (_, inv) in flat.invokes() {
            if !seeds.is_registration(&inv.target) {
                continue;
            }
            let types = types.get_or_insert_with(|| local_types(corpus, &class.name, method));
            for arg in &inv.args {
                let Some(ty) = arg.as_var().and_then(|v| types.get(v)) else { continue };
                if corpus.class(ty).is_some_and(|c| c.is_concrete()) {
                    reg.services.insert(ty.clone());
                }
                if let Ok(subs) = corpus.hierarchy().subtypes_of(ty) {
                    for sub in subs {
                        if corpus.class(sub).is_some_and(|c| c.is_concrete()) && implements_all(corpus, sub, markers) {
                            reg.services.insert(sub.clone());
                        }
                    }
                }
            }
        }
    }

    let stubs: BTreeSet<&str> = corpus
        .classes()
        .iter()
        .filter(|c| c.kind != ClassKind::Interface && implements_all(corpus, &c.name, markers))
        .map(|c| c.name.as_str())
        .collect();
    let mut ipc_interfaces: BTreeSet<&str> = BTreeSet::new();
    for stub in &stubs {
        for sup in corpus.hierarchy().supertypes_of(stub) {
            let Some(def) = corpus.class(sup) else { continue };
            if def.kind == ClassKind::Interface
                && !is_marker(sup, markers)
                && corpus.hierarchy().supertypes_of(sup).iter().any(|s| *s != sup && is_marker(s, markers))
            {
                ipc_interfaces.insert(def.name.as_str());
            }
        }
    }

    for iface in &ipc_interfaces {
        let def = corpus.class(iface).expect("interfaces come from the corpus");
        reg.ipc_classes.insert(iface.to_string());
        let subs = corpus.hierarchy().subtypes_of(iface).expect("known class");
        let stub_impls: Vec<&String> = subs.iter().filter(|s| stubs.contains(s.as_str())).collect();
        let proxies: Vec<&String> = subs
            .iter()
            .filter(|s| {
                !stubs.contains(s.as_str())
                    && corpus.class(s).is_some_and(|c| c.is_concrete())
                    && !reg.services.contains(*s)
            })
            .collect();
        for s in &stub_impls {
            if !reg.services.contains(*s) {
                reg.ipc_classes.insert((*s).clone());
            }
        }
        for p in &proxies {
            reg.ipc_classes.insert((*p).clone());
        }
        for m in &def.methods {
            let ipc = MethodRef::new(iface, &m.signature);
            reg.ipc_methods.insert(ipc.clone());
            let service_impl = reg
                .services
                .iter()
                .filter(|s| subs.contains(*s))
                .find_map(|s| match corpus.resolve_concrete(s, &m.signature) {
                    Some(Callee::Corpus(r)) => Some(r),
                    _ => None,
                });
            if let Some(r) = service_impl {
                reg.stub_methods.insert(ipc.clone(), r);
            }
            let proxy_impl = proxies.iter().find_map(|p| match corpus.resolve_concrete(p, &m.signature) {
                Some(Callee::Corpus(r)) => Some(r),
                _ => None,
            });
            if let Some(r) = proxy_impl {
                reg.proxy_index.insert(r.clone(), ipc.clone());
                reg.proxy_methods.insert(ipc, r);
            }
        }
    }
    Ok(reg)
}

/// One helper method and the IPC method it reaches.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodPair {
    pub ipc_signature: MethodRef,
    pub helper: MethodRef,
    pub service: MethodRef,
    pub helper_class: String,
    /// Native stub implementation: paired but needs manual review.
    pub native: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Pairing {
    pub pairs: Vec<MethodPair>,
    /// IPC methods no helper reaches.
    pub direct_only: Vec<MethodRef>,
    /// IPC methods reached by helpers without a registered implementation.
    pub unimplemented: Vec<MethodRef>,
}

/// Settings shared by helper identification and pairing.
pub struct PairingContext<'a> {
    pub corpus: &'a Corpus,
    pub registry: &'a ServiceRegistry,
    pub seeds: &'a SeedConfig,
    pub callbacks: &'a CallbackTable,
    pub max_depth: usize,
}

impl PairingContext<'_> {
    fn builder(&self) -> GraphBuilder<'_> {
        GraphBuilder::new(self.corpus, self.callbacks)
            .boundary(self.registry)
            .max_depth(self.max_depth)
    }

    fn candidate_classes(&self) -> impl Iterator<Item = &crate::ir::ClassDef> {
        self.corpus.classes().iter().filter(|c| {
            self.seeds.in_helper_namespace(&c.package, &c.name)
                && !self.registry.is_ipc_class(&c.name)
                && !self.registry.services.contains(&c.name)
        })
    }

    /// IPC methods reachable from one helper method.
    pub fn reached_ipcs(&self, helper: &MethodRef) -> Result<BTreeSet<MethodRef>> {
        let g = self.builder().build(helper)?;
        Ok(g.targets
            .iter()
            .filter_map(|p| self.registry.ipc_of_proxy(p).cloned())
            .collect())
    }
}

/// Top-level classes in the helper namespace with a method that reaches an
/// IPC proxy. Nested classes fold into their outermost enclosing class.
pub fn identify_helpers(ctx: &PairingContext<'_>) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for class in ctx.candidate_classes() {
        let top = ctx.corpus.top_level(&class.name);
        if out.contains(&top) {
            continue;
        }
        for m in &class.methods {
            let r = MethodRef::new(&class.name, &m.signature);
            if !m.body.is_empty() && !ctx.reached_ipcs(&r)?.is_empty() {
                out.insert(top);
                break;
            }
        }
    }
    Ok(out)
}

/// One pair per (helper method, reachable IPC method).
pub fn pair_methods(ctx: &PairingContext<'_>, helpers: &BTreeSet<String>) -> Result<Pairing> {
    let mut pairs = BTreeSet::new();
    let mut reached = BTreeSet::new();
    let mut unimplemented = BTreeSet::new();
    for class in ctx.candidate_classes() {
        let top = ctx.corpus.top_level(&class.name);
        if !helpers.contains(&top) {
            continue;
        }
        for m in &class.methods {
            if m.body.is_empty() {
                continue;
            }
            let helper = MethodRef::new(&class.name, &m.signature);
            for ipc in ctx.reached_ipcs(&helper)? {
                reached.insert(ipc.clone());
                let Some(service) = ctx.registry.stub_methods.get(&ipc) else {
                    unimplemented.insert(ipc);
                    continue;
                };
                let native = ctx.corpus.method(service).is_some_and(MethodDef::is_native);
                pairs.insert(MethodPair {
                    ipc_signature: ipc,
                    helper: helper.clone(),
                    service: service.clone(),
                    helper_class: top.clone(),
                    native,
                });
            }
        }
    }
    let direct_only = ctx
        .registry
        .stub_methods
        .keys()
        .filter(|ipc| !reached.contains(*ipc))
        .cloned()
        .collect();
    Ok(Pairing { pairs: pairs.into_iter().collect(), direct_only, unimplemented: unimplemented.into_iter().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_corpus;

    pub(crate) const WALLPAPER: &str = r#"{"version":1,
      "externals":["android.os.IBinder","android.os.IInterface","android.os.Binder","android.os.ServiceManager"],
      "classes":[
        {"name":"android.app.IWallpaperManager","package":"android.app","kind":"interface","interfaces":["android.os.IInterface"],
         "methods":[{"name":"getWallpaper","signature":"getWallpaper()","returnType":"Bitmap","modifiers":["abstract"]},
                    {"name":"setWallpaper","signature":"setWallpaper(String)","params":[{"name":"name","type":"String"}],"returnType":"void","modifiers":["abstract"]}]},
        {"name":"android.app.IWallpaperManager$Stub","package":"android.app","kind":"abstract","superclass":"android.os.Binder",
         "interfaces":["android.app.IWallpaperManager","android.os.IBinder"],"enclosing":"android.app.IWallpaperManager"},
        {"name":"android.app.IWallpaperManager$Stub$Proxy","package":"android.app","kind":"class",
         "interfaces":["android.app.IWallpaperManager"],"enclosing":"android.app.IWallpaperManager$Stub",
         "methods":[{"name":"getWallpaper","signature":"getWallpaper()","returnType":"Bitmap","body":[{"op":"return","value":null}]},
                    {"name":"setWallpaper","signature":"setWallpaper(String)","params":[{"name":"name","type":"String"}],"returnType":"void","body":[{"op":"return"}]}]},
        {"name":"com.android.server.WMS","package":"com.android.server","kind":"class","superclass":"android.app.IWallpaperManager$Stub",
         "methods":[{"name":"getWallpaper","signature":"getWallpaper()","returnType":"Bitmap","body":[{"op":"return","value":null}]},
                    {"name":"setWallpaper","signature":"setWallpaper(String)","params":[{"name":"name","type":"String"}],"returnType":"void","modifiers":["native"]},
                    {"name":"onStart","signature":"onStart()","returnType":"void","body":[
                      {"op":"invoke","dispatch":"static","target":"android.os.ServiceManager.addService(String,IBinder)","args":[{"str":"wallpaper"},"this"]}]}]},
        {"name":"android.app.WallpaperManager","package":"android.app","kind":"class",
         "methods":[{"name":"getDrawable","signature":"getDrawable()","returnType":"Bitmap","body":[
                       {"op":"invoke","dispatch":"interface","target":"android.app.IWallpaperManager.getWallpaper()","receiver":"this.mService","result":"b"},
                       {"op":"return","value":"b"}]},
                    {"name":"peek","signature":"peek()","returnType":"Bitmap","body":[
                       {"op":"invoke","dispatch":"virtual","target":"android.app.WallpaperManager.getDrawable()","receiver":"this","result":"b"},
                       {"op":"return","value":"b"}]},
                    {"name":"clear","signature":"clear()","returnType":"void","body":[
                       {"op":"invoke","dispatch":"static","target":"android.app.WallpaperManager$1.run()"}]}]},
        {"name":"android.app.WallpaperManager$1","package":"android.app","kind":"class","enclosing":"android.app.WallpaperManager",
         "methods":[{"name":"run","signature":"run()","returnType":"void","modifiers":["static"],"body":[
             {"op":"invoke","dispatch":"interface","target":"android.app.IWallpaperManager.getWallpaper()","receiver":null}]}]},
        {"name":"android.util.Utils","package":"android.util","kind":"class",
         "methods":[{"name":"noop","signature":"noop()","returnType":"void","modifiers":["static"],"body":[{"op":"return"}]}]}
      ]}"#;

    fn mref(s: &str) -> MethodRef {
        MethodRef::parse(s).unwrap()
    }

    #[test]
    fn registry_from_registration_and_markers() {
        let c = parse_corpus(WALLPAPER).unwrap();
        let reg = identify_services(&c, &SeedConfig::default()).unwrap();
        assert_eq!(reg.services, BTreeSet::from(["com.android.server.WMS".to_string()]));
        assert_eq!(
            reg.stub_methods.get(&mref("android.app.IWallpaperManager.getWallpaper()")),
            Some(&mref("com.android.server.WMS.getWallpaper()"))
        );
        let proxy = reg.proxy_methods.get(&mref("android.app.IWallpaperManager.getWallpaper()")).unwrap();
        assert_eq!(proxy.class_name(), "android.app.IWallpaperManager$Stub$Proxy");
        // stub and proxy share the signature string
        for (ipc, p) in &reg.proxy_methods {
            assert_eq!(ipc.signature(), p.signature());
        }
        assert!(reg.is_ipc_class("android.app.IWallpaperManager$Stub"));
    }

    #[test]
    fn unregistered_class_is_not_a_service() {
        let c = parse_corpus(&WALLPAPER.replace("addService", "addServiceLater").replace(
            "android.os.ServiceManager.addServiceLater",
            "android.os.Other.addServiceLater",
        ).replace("\"android.os.ServiceManager\"]", "\"android.os.ServiceManager\",\"android.os.Other\"]"))
        .unwrap();
        let reg = identify_services(&c, &SeedConfig::default()).unwrap();
        assert!(reg.services.is_empty());
        assert!(reg.stub_methods.is_empty());
    }

    #[test]
    fn empty_markers_is_config_error() {
        let c = parse_corpus(WALLPAPER).unwrap();
        let seeds = SeedConfig { registration_methods: vec![], ..SeedConfig::default() };
        assert!(identify_services(&c, &seeds).is_err());
    }

    #[test]
    fn helpers_and_pairs() {
        let c = parse_corpus(WALLPAPER).unwrap();
        let seeds = SeedConfig::default();
        let reg = identify_services(&c, &seeds).unwrap();
        let table = CallbackTable::default();
        let ctx = PairingContext { corpus: &c, registry: &reg, seeds: &seeds, callbacks: &table, max_depth: 12 };
        let helpers = identify_helpers(&ctx).unwrap();
        assert_eq!(helpers, BTreeSet::from(["android.app.WallpaperManager".to_string()]));
        let pairing = pair_methods(&ctx, &helpers).unwrap();
        let rows: Vec<(&str, &str)> =
            pairing.pairs.iter().map(|p| (p.helper.as_str(), p.helper_class.as_str())).collect();
        assert_eq!(
            rows,
            vec![
                ("android.app.WallpaperManager$1.run()", "android.app.WallpaperManager"),
                ("android.app.WallpaperManager.clear()", "android.app.WallpaperManager"),
                ("android.app.WallpaperManager.getDrawable()", "android.app.WallpaperManager"),
                ("android.app.WallpaperManager.peek()", "android.app.WallpaperManager"),
            ]
        );
        assert_eq!(pairing.direct_only, vec![mref("android.app.IWallpaperManager.setWallpaper(String)")]);
    }
}

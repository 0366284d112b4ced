//! Seeded generator for labelled synthetic corpora, plus the
//! hand-written pattern fixtures.
//!
//! Every instance is one service family: an IPC interface with its stub and
//! proxy, a registered service and a client-side helper. A vulnerable
//! instance puts a mechanism in the helper only; a consistent instance
//! mirrors it in the service.

pub mod dsl;
mod fixtures;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::inconsistency::{PermissionEntry, PermissionLevel, PermissionMap, Restriction, RestrictionList, VulnClass};
use crate::ir::CorpusDocument;
use crate::mining::tokenize;

pub use fixtures::{fixture_patterns, Fixture};

use dsl::*;

pub const EXTERNALS: &[&str] = &[
    "android.os.IBinder",
    "android.os.IInterface",
    "android.os.Binder",
    "android.os.ServiceManager",
    "android.content.Context",
    "android.app.Activity",
    "android.app.ActivityManager",
    "android.app.AppOpsManager",
    "java.util.List",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GenSpec {
    pub seed: u64,
    #[serde(default)]
    pub per_class_counts: BTreeMap<VulnClass, usize>,
    #[serde(default)]
    pub consistent_pairs: usize,
    #[serde(default)]
    pub noise_classes: usize,
    #[serde(default)]
    pub permission_mix: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 1,
            per_class_counts: VulnClass::ALL.iter().map(|c| (*c, 1)).collect(),
            consistent_pairs: 1,
            noise_classes: 10,
            permission_mix: 0.0,
        }
    }
}

impl GenSpec {
    pub fn uniform(seed: u64, per_class: usize, consistent: usize, noise: usize, permission_mix: f64) -> Self {
        GenSpec {
            seed,
            per_class_counts: VulnClass::ALL.iter().map(|c| (*c, per_class)).collect(),
            consistent_pairs: consistent,
            noise_classes: noise,
            permission_mix,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.permission_mix) {
            return Err(Error::InvalidSpec(format!("permissionMix {} outside [0, 1]", self.permission_mix)));
        }
        let total: usize = self.per_class_counts.values().sum::<usize>() + self.consistent_pairs;
        if total + self.noise_classes > 100_000 {
            return Err(Error::InvalidSpec("instance count too large".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GenSpec = serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Label {
    pub ipc_signature: String,
    pub helper: String,
    pub vuln_class: VulnClass,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: BTreeSet<Label>,
    pub suppressed: BTreeSet<Label>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub corpus: CorpusDocument,
    pub truth: GroundTruth,
    pub permissions: PermissionMap,
    pub restrictions: RestrictionList,
}

impl Generated {
    /// File name → contents, as written by `gen`.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        let pretty = |v: &dyn erased::Ser| v.json();
        vec![
            ("corpus.json", pretty(&self.corpus)),
            ("ground_truth.json", pretty(&self.truth)),
            ("permissions.json", pretty(&self.permissions)),
            ("restrictions.json", pretty(&self.restrictions)),
        ]
    }
}

mod erased {
    pub trait Ser {
        fn json(&self) -> String;
    }

    impl<T: serde::Serialize> Ser for T {
        fn json(&self) -> String {
            let mut s = serde_json::to_string_pretty(self).expect("generated data serializes");
            s.push('\n');
            s
        }
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "tor", "vex", "zul", "bar", "dax", "fen", "gor", "hal", "jin", "nor", "pel", "quo",
    "ras", "sil", "tam", "vor", "wel", "yar", "zen", "bo", "cra", "dru", "fli", "glo", "ne", "so",
];

const VERBS: &[&str] = &["register", "set", "start", "open", "update", "query", "attach", "load"];

struct Namer {
    used: BTreeSet<String>,
    banned: BTreeSet<String>,
}

impl Namer {
    fn new() -> Self {
        let banned = [
            "get", "my", "calling", "check", "enforce", "verify", "user", "userid", "uid", "pid", "identity",
            "package", "permission", "size", "add", "is",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        Namer { used: BTreeSet::new(), banned }
    }

    /// Fresh capitalized word of two or three syllables.
    fn word(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let n = rng.gen_range(2..=3);
            let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("nonempty")).collect();
            let cap = capitalize(&w);
            if tokenize(&cap).iter().any(|t| self.banned.contains(t)) {
                continue;
            }
            if self.used.insert(cap.clone()) {
                return cap;
            }
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Names of one service family.
pub(crate) struct Family {
    iface: String,
    stub: String,
    proxy: String,
    service: String,
    helper: String,
    registered_as: String,
}

impl Family {
    pub(crate) fn new(word: &str) -> Self {
        let lower = word.to_lowercase();
        let pkg = format!("android.{lower}");
        let iface = format!("{pkg}.I{word}Manager");
        Family {
            stub: format!("{iface}$Stub"),
            proxy: format!("{iface}$Stub$Proxy"),
            service: format!("com.android.server.{lower}.{word}ManagerService"),
            helper: format!("{pkg}.{word}Manager"),
            registered_as: lower,
            iface,
        }
    }
}

/// An IPC method as declared on the interface.
#[derive(Clone)]
pub(crate) struct Ipc {
    name: String,
    params: Vec<(String, String)>,
    ret: String,
}

impl Ipc {
    pub(crate) fn new(name: &str, params: &[(&str, &str)], ret: &str) -> Self {
        Ipc {
            name: name.into(),
            params: params.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect(),
            ret: ret.into(),
        }
    }

    fn params_json(&self) -> Vec<Value> {
        self.params.iter().map(|(n, t)| param(n, t)).collect()
    }

    pub(crate) fn signature(&self) -> String {
        let types: Vec<&str> = self.params.iter().map(|(_, t)| t.as_str()).collect();
        format!("{}({})", self.name, types.join(","))
    }

    pub(crate) fn target(&self, class: &str) -> String {
        format!("{class}.{}", self.signature())
    }
}

/// Interface, stub, proxy, service and helper classes for `ipcs`.
pub(crate) fn family_classes(
    fam: &Family,
    ipcs: &[Ipc],
    service_bodies: Vec<Vec<Value>>,
    helper_methods: Vec<Value>,
    extra_helper_classes: Vec<Value>,
) -> Vec<Value> {
    let iface = class(ClassSpec {
        name: &fam.iface,
        kind: "interface",
        superclass: None,
        interfaces: vec!["android.os.IInterface"],
        enclosing: None,
        methods: ipcs.iter().map(|i| abstract_method(&i.name, i.params_json(), &i.ret)).collect(),
    });
    let stub = class(ClassSpec {
        name: &fam.stub,
        kind: "abstract",
        superclass: Some("android.os.Binder"),
        interfaces: vec![&fam.iface, "android.os.IBinder"],
        enclosing: Some(&fam.iface),
        methods: vec![],
    });
    let proxy = class(ClassSpec {
        name: &fam.proxy,
        kind: "class",
        superclass: None,
        interfaces: vec![&fam.iface],
        enclosing: Some(&fam.stub),
        methods: ipcs
            .iter()
            .map(|i| method(&i.name, i.params_json(), &i.ret, &[], vec![ret(default_value(&i.ret))]))
            .collect(),
    });
    let mut service_methods: Vec<Value> = ipcs
        .iter()
        .zip(service_bodies)
        .map(|(i, body)| method(&i.name, i.params_json(), &i.ret, &[], body))
        .collect();
    service_methods.push(method(
        "onStart",
        vec![],
        "void",
        &[],
        vec![call_static(
            "android.os.ServiceManager.addService(String,IBinder)",
            vec![string(&fam.registered_as), var("this")],
            None,
        )],
    ));
    let service = class(ClassSpec {
        name: &fam.service,
        kind: "class",
        superclass: Some(&fam.stub),
        interfaces: vec![],
        enclosing: None,
        methods: service_methods,
    });
    let helper = class(ClassSpec {
        name: &fam.helper,
        kind: "class",
        superclass: None,
        interfaces: vec![],
        enclosing: None,
        methods: helper_methods,
    });
    let mut out = vec![iface, stub, proxy, service, helper];
    out.extend(extra_helper_classes);
    out
}

/// One generated family: its classes and the (IPC, helper) label.
struct Instance {
    classes: Vec<Value>,
    label: Option<(String, String)>,
    ipcs: Vec<String>,
}

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    namer: &'a mut Namer,
}

impl Builder<'_> {
    /// Family classes, sometimes with an extra helper method that never
    /// reaches the service.
    fn family(
        &mut self,
        fam: &Family,
        ipcs: &[Ipc],
        service_bodies: Vec<Vec<Value>>,
        helper_methods: Vec<Value>,
        extra_helper_classes: Vec<Value>,
    ) -> Vec<Value> {
        let mut helper_methods = helper_methods;
        if self.rng.gen_bool(0.5) {
            let w = self.namer.word(self.rng);
            helper_methods.push(method(
                &format!("describe{w}"),
                vec![param("flags", "int")],
                "int",
                &[],
                vec![
                    if_(var("flags"), "lt", int(0), vec![ret(Some(int(0)))], vec![]),
                    binop("r", var("flags"), "+", int(1)),
                    ret(Some(var("r"))),
                ],
            ));
        }
        family_classes(fam, ipcs, service_bodies, helper_methods, extra_helper_classes)
    }


    /// An unused IPC method to fill the direct-only list.
    fn maybe_direct_only(&mut self, ipcs: &mut Vec<Ipc>, bodies: &mut Vec<Vec<Value>>) {
        if self.rng.gen_bool(0.3) {
            let w = self.namer.word(self.rng);
            ipcs.push(Ipc::new(&format!("dump{w}"), &[("fd", "int")], "void"));
            bodies.push(vec![assign("this.mLastDump", var("fd"))]);
        }
    }

    /// A conditional after the IPC call, guarding nothing.
    fn trailing_decoy(&mut self, result: &str) -> Vec<Value> {
        if self.rng.gen_bool(0.5) {
            vec![if_(var(result), "eq", null(), vec![ret(Some(null()))], vec![])]
        } else {
            vec![]
        }
    }

    fn illegal_parameter(&mut self, vulnerable: bool) -> Instance {
        let w = self.namer.word(self.rng);
        let fam = Family::new(&w);
        let verb = VERBS.choose(self.rng).expect("nonempty");
        let cfg_ty = format!("{w}Config");
        let ipc = Ipc::new(&format!("{verb}{w}"), &[("config", &cfg_ty)], "boolean");
        let exception = *["IllegalArgumentException", "NullPointerException"].choose(self.rng).expect("nonempty");
        let helper_body = vec![
            if_(var("config"), "eq", null(), vec![throw(exception)], vec![]),
            call_interface(&ipc.target(&fam.iface), "this.mService", vec![var("config")], Some("ok")),
            ret(Some(var("ok"))),
        ];
        let mut service_body = Vec::new();
        if !vulnerable {
            service_body.push(if_(var("config"), "eq", null(), vec![throw("IllegalArgumentException")], vec![]));
        }
        service_body.push(call_virtual("java.util.List.add(Object)", "this.mConfigs", vec![var("config")], None));
        service_body.push(ret(Some(Value::Bool(true))));
        self.single(fam, ipc, service_body, helper_body, &[("config", &cfg_ty)])
    }

    fn fake_identity(&mut self, vulnerable: bool) -> Instance {
        let w = self.namer.word(self.rng);
        let fam = Family::new(&w);
        let verb = VERBS.choose(self.rng).expect("nonempty");
        let ipc = Ipc::new(&format!("{verb}{w}"), &[("opId", "long"), ("flags", "int"), ("opPackageName", "String")], "void");
        let accessor = *["getOpPackageName", "getPackageName", "getBasePackageName"].choose(self.rng).expect("nonempty");
        let copy = self.rng.gen_bool(0.5);
        let mut helper_body = vec![call_virtual(
            &format!("android.content.Context.{accessor}()"),
            "this.mContext",
            vec![],
            Some("pkg"),
        )];
        let arg = if copy {
            helper_body.push(assign("name", var("pkg")));
            "name"
        } else {
            "pkg"
        };
        helper_body.push(call_interface(
            &ipc.target(&fam.iface),
            "this.mService",
            vec![var("opId"), var("flags"), var(arg)],
            None,
        ));
        let service_body = if vulnerable {
            vec![
                if_(var("opPackageName"), "eq", string("keyguard"), vec![assign("this.mKeyguardClient", Value::Bool(true))], vec![]),
                assign("this.mOpId", var("opId")),
            ]
        } else {
            vec![
                call_static("android.os.Binder.getCallingUid()", vec![], Some("uid")),
                call_virtual(
                    "android.app.AppOpsManager.checkPackage(int,String)",
                    "this.mAppOps",
                    vec![var("uid"), var("opPackageName")],
                    None,
                ),
                assign("this.mOpId", var("opId")),
            ]
        };
        self.single(fam, ipc, service_body, helper_body, &[("opId", "long"), ("flags", "int")])
    }

    fn fake_status(&mut self, vulnerable: bool) -> Instance {
        let w = self.namer.word(self.rng);
        let fam = Family::new(&w);
        let verb = VERBS.choose(self.rng).expect("nonempty");
        let ipc = Ipc::new(&format!("{verb}{w}Dispatch"), &[("intent", "PendingIntent"), ("filters", "IntentFilter[]")], "void");
        let helper_body = vec![
            call_virtual("android.app.Activity.isResumed()", "activity", vec![], Some("resumed")),
            if_(var("resumed"), "eq", Value::Bool(false), vec![throw("IllegalStateException")], vec![]),
            call_interface(&ipc.target(&fam.iface), "this.mService", vec![var("intent"), var("filters")], None),
        ];
        let mut service_body = Vec::new();
        if !vulnerable {
            service_body.push(call_static("android.os.Binder.getCallingUid()", vec![], Some("uid")));
            service_body.push(call_virtual(
                "android.app.ActivityManager.isForegroundUid(int)",
                "this.mActivityManager",
                vec![var("uid")],
                Some("fg"),
            ));
            service_body.push(if_(var("fg"), "eq", Value::Bool(false), vec![throw("SecurityException")], vec![]));
        }
        service_body.push(assign("this.mDispatchIntent", var("intent")));
        self.single(
            fam,
            ipc,
            service_body,
            helper_body,
            &[("activity", "Activity"), ("intent", "PendingIntent"), ("filters", "IntentFilter[]")],
        )
    }

    fn env_bypass(&mut self, vulnerable: bool) -> Instance {
        let w = self.namer.word(self.rng);
        let fam = Family::new(&w);
        let gate = Ipc::new(&format!("is{w}Supported"), &[], "boolean");
        let ipc = Ipc::new(&format!("load{w}"), &[("which", "int")], "Bitmap");
        let helper_name = format!("peek{w}");
        let mut helper_body = vec![
            call_interface(&gate.target(&fam.iface), "this.mService", vec![], Some("supported")),
            if_(var("supported"), "eq", Value::Bool(false), vec![ret(Some(null()))], vec![]),
            call_interface(&ipc.target(&fam.iface), "this.mService", vec![var("which")], Some("bmp")),
        ];
        helper_body.extend(self.trailing_decoy("bmp"));
        helper_body.push(ret(Some(var("bmp"))));
        let gate_body = vec![ret(Some(Value::Bool(true)))];
        let mut service_body = Vec::new();
        if !vulnerable {
            service_body.push(call_virtual(&gate.target(&fam.service), "this", vec![], Some("ok")));
            service_body.push(if_(var("ok"), "eq", Value::Bool(false), vec![ret(Some(null()))], vec![]));
        }
        service_body.push(ret(Some(Value::String("this.mWallpaper".into()))));

        let mut ipcs = vec![gate, ipc.clone()];
        let mut bodies = vec![gate_body, service_body];
        self.maybe_direct_only(&mut ipcs, &mut bodies);
        let helper_methods = vec![method(&helper_name, vec![param("which", "int")], "Bitmap", &[], helper_body)];
        let classes = self.family(&fam, &ipcs, bodies, helper_methods, vec![]);
        Instance {
            classes,
            label: Some((ipc.target(&fam.iface), format!("{}.{helper_name}(int)", fam.helper))),
            ipcs: ipcs.iter().map(|i| i.target(&fam.iface)).collect(),
        }
    }

    fn ipc_flood(&mut self, vulnerable: bool) -> Instance {
        if self.rng.gen_bool(0.5) {
            self.ipc_flood_counter(vulnerable)
        } else {
            self.ipc_flood_listeners(vulnerable)
        }
    }

    /// Lock-count limit kept in a nested helper class.
    fn ipc_flood_counter(&mut self, vulnerable: bool) -> Instance {
        let w = self.namer.word(self.rng);
        let fam = Family::new(&w);
        let ipc = Ipc::new(&format!("acquire{w}Lock"), &[("binder", "IBinder"), ("tag", "String")], "void");
        let limit = self.rng.gen_range(2..=50);
        let lock = format!("{}${w}Lock", fam.helper);
        let helper_body = vec![
            assign("n", Value::String("this.mActiveLockCount".into())),
            if_(var("n"), "ge", int(limit), vec![throw("UnsupportedOperationException")], vec![]),
            call_interface(
                &ipc.target(&fam.iface),
                "this.mService",
                vec![Value::String("this.mBinder".into()), Value::String("this.mTag".into())],
                None,
            ),
            binop("m", var("n"), "+", int(1)),
            assign("this.mActiveLockCount", var("m")),
        ];
        let mut service_body = Vec::new();
        if !vulnerable {
            service_body.push(call_virtual("java.util.List.size()", "this.mMulticasters", vec![], Some("count")));
            service_body.push(if_(var("count"), "ge", int(limit), vec![throw("IllegalStateException")], vec![]));
        }
        service_body.push(call_virtual("java.util.List.add(Object)", "this.mMulticasters", vec![var("tag")], None));
        let lock_class = class(ClassSpec {
            name: &lock,
            kind: "class",
            superclass: None,
            interfaces: vec![],
            enclosing: Some(&fam.helper),
            methods: vec![method("acquire", vec![], "void", &[], helper_body)],
        });
        let mut ipcs = vec![ipc.clone()];
        let mut bodies = vec![service_body];
        self.maybe_direct_only(&mut ipcs, &mut bodies);
        let classes = self.family(&fam, &ipcs, bodies, vec![], vec![lock_class]);
        Instance {
            classes,
            label: Some((ipc.target(&fam.iface), format!("{lock}.acquire()"))),
            ipcs: ipcs.iter().map(|i| i.target(&fam.iface)).collect(),
        }
    }

    /// Register with the service only for the first listener.
    fn ipc_flood_listeners(&mut self, vulnerable: bool) -> Instance {
        let w = self.namer.word(self.rng);
        let fam = Family::new(&w);
        let ipc = Ipc::new(&format!("attach{w}Callback"), &[("callback", "IBinder")], "void");
        let helper_body = vec![
            call_virtual("java.util.List.add(Object)", "this.mListeners", vec![var("listener")], None),
            call_virtual("java.util.List.size()", "this.mListeners", vec![], Some("n")),
            if_(
                var("n"),
                "eq",
                int(1),
                vec![call_interface(&ipc.target(&fam.iface), "this.mService", vec![Value::String("this.mCallback".into())], None)],
                vec![],
            ),
        ];
        let mut service_body = Vec::new();
        if !vulnerable {
            service_body.push(call_virtual("java.util.List.isEmpty()", "this.mCallbacks", vec![], Some("empty")));
            service_body.push(if_(var("empty"), "eq", Value::Bool(false), vec![ret(None)], vec![]));
        }
        service_body.push(call_virtual("java.util.List.add(Object)", "this.mCallbacks", vec![var("callback")], None));
        let listener_ty = format!("{w}Listener");
        self.single(fam, ipc, service_body, helper_body, &[("listener", &listener_ty)])
            .renamed_helper(&format!("add{w}Listener"))
    }

    /// Family with one paired IPC method and helper method of the same name.
    fn single(&mut self, fam: Family, ipc: Ipc, service_body: Vec<Value>, helper_body: Vec<Value>, helper_params: &[(&str, &str)]) -> Instance {
        let params: Vec<Value> = helper_params.iter().map(|(n, t)| param(n, t)).collect();
        let helper_ret = if ipc.ret == "boolean" { "boolean" } else { "void" };
        let helper_method = method(&ipc.name, params, helper_ret, &[], helper_body);
        let helper_sig = helper_method["signature"].as_str().unwrap_or_default().to_string();
        let mut ipcs = vec![ipc.clone()];
        let mut bodies = vec![service_body];
        self.maybe_direct_only(&mut ipcs, &mut bodies);
        let classes = self.family(&fam, &ipcs, bodies, vec![helper_method], vec![]);
        Instance {
            classes,
            label: Some((ipc.target(&fam.iface), format!("{}.{helper_sig}", fam.helper))),
            ipcs: ipcs.iter().map(|i| i.target(&fam.iface)).collect(),
        }
    }

    /// Filler: an interface hierarchy dispatched through CHA, with
    /// conditionals that guard no IPC call.
    fn noise(&mut self) -> Vec<Value> {
        let w = self.namer.word(self.rng);
        let pkg = if self.rng.gen_bool(0.5) { format!("android.{}", w.to_lowercase()) } else { format!("com.android.internal.{}", w.to_lowercase()) };
        let iface = format!("{pkg}.{w}Source");
        let run = Ipc::new(&format!("run{w}"), &[("value", "int")], "int");
        let mut classes = vec![class(ClassSpec {
            name: &iface,
            kind: "interface",
            superclass: None,
            interfaces: vec![],
            enclosing: None,
            methods: vec![abstract_method(&run.name, run.params_json(), "int")],
        })];
        let base = format!("{pkg}.Base{w}Source");
        classes.push(class(ClassSpec {
            name: &base,
            kind: "abstract",
            superclass: None,
            interfaces: vec![&iface],
            enclosing: None,
            methods: vec![],
        }));
        let impls = self.rng.gen_range(1..=3);
        for k in 0..impls {
            let name = format!("{pkg}.{w}Source{k}");
            let sup = if k % 2 == 0 { &base } else { &iface };
            let (superclass, interfaces) = if sup == &base { (Some(base.as_str()), vec![]) } else { (None, vec![iface.as_str()]) };
            classes.push(class(ClassSpec {
                name: &name,
                kind: "class",
                superclass,
                interfaces,
                enclosing: None,
                methods: vec![method(
                    &run.name,
                    run.params_json(),
                    "int",
                    &[],
                    vec![binop("r", var("value"), "*", int(k as i64 + 2)), ret(Some(var("r")))],
                )],
            }));
        }
        let limit = self.rng.gen_range(1..=9);
        let driver_body = vec![
            if_(var("key"), "eq", null(), vec![throw("IllegalArgumentException")], vec![]),
            assign("c", Value::String("this.mCount".into())),
            if_(var("c"), "ge", int(limit), vec![ret(Some(int(0)))], vec![]),
            call_virtual("android.app.Activity.isResumed()", "activity", vec![], Some("resumed")),
            if_(var("resumed"), "eq", Value::Bool(false), vec![ret(Some(int(-1)))], vec![]),
            call_virtual("android.content.Context.getPackageName()", "this.mContext", vec![], Some("pkg")),
            call_interface(&run.target(&iface), "this.mSource", vec![var("c")], Some("out")),
            ret(Some(var("out"))),
        ];
        classes.push(class(ClassSpec {
            name: &format!("{pkg}.{w}Driver"),
            kind: "class",
            superclass: None,
            interfaces: vec![],
            enclosing: None,
            methods: vec![method(
                &format!("drive{w}"),
                vec![param("key", "String"), param("activity", "Activity")],
                "int",
                &[],
                driver_body,
            )],
        }));
        classes
    }
}

impl Instance {
    /// Renames the (single) helper method, keeping the label in sync.
    fn renamed_helper(mut self, name: &str) -> Self {
        let Some((ipc, helper)) = self.label.take() else { return self };
        let (class, sig) = helper.split_at(helper.rfind('.').expect("qualified"));
        let sig = &sig[1..];
        let old_name = &sig[..sig.find('(').expect("signature")];
        let new_sig = format!("{name}{}", &sig[old_name.len()..]);
        for c in &mut self.classes {
            if c["name"] != class {
                continue;
            }
            for m in c["methods"].as_array_mut().into_iter().flatten() {
                if m["signature"] == sig {
                    m["name"] = Value::String(name.into());
                    m["signature"] = Value::String(new_sig.clone());
                }
            }
        }
        self.label = Some((ipc, format!("{class}.{new_sig}")));
        self
    }
}

/// Builds a corpus with labelled vulnerable instances, consistent twins,
/// filler classes, a permission map and a restriction list.
pub fn generate(spec: &GenSpec) -> Result<Generated> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut namer = Namer::new();
    let mut plan: Vec<(VulnClass, bool)> = Vec::new();
    for (class, n) in &spec.per_class_counts {
        plan.extend(std::iter::repeat_n((*class, true), *n));
    }
    for _ in 0..spec.consistent_pairs {
        let c = *VulnClass::ALL.choose(&mut rng).expect("nonempty");
        plan.push((c, false));
    }
    plan.shuffle(&mut rng);

    let mut classes: Vec<Value> = Vec::new();
    let mut truth = GroundTruth::default();
    let mut permissions = PermissionMap::default();
    let mut restrictions = RestrictionList::default();
    let mut perm_counter = 0usize;

    for (class, vulnerable) in plan {
        let mut b = Builder { rng: &mut rng, namer: &mut namer };
        let inst = match class {
            VulnClass::IllegalParameter => b.illegal_parameter(vulnerable),
            VulnClass::FakeIdentity => b.fake_identity(vulnerable),
            VulnClass::FakeStatus => b.fake_status(vulnerable),
            VulnClass::EnvBypass => b.env_bypass(vulnerable),
            VulnClass::IpcFlood => b.ipc_flood(vulnerable),
        };
        classes.extend(inst.classes);
        let (ipc, helper) = inst.label.expect("instances are labelled");

        let protected = rng.gen_bool(spec.permission_mix);
        if protected {
            perm_counter += 1;
            let level = if rng.gen_bool(0.5) { PermissionLevel::Signature } else { PermissionLevel::SignatureOrSystem };
            permissions.entries.insert(
                ipc.clone(),
                vec![PermissionEntry { permission: format!("android.permission.MANAGE_{perm_counter}"), level }],
            );
        } else if rng.gen_bool(0.3) {
            perm_counter += 1;
            let level = if rng.gen_bool(0.5) { PermissionLevel::Normal } else { PermissionLevel::Dangerous };
            permissions.entries.insert(
                ipc.clone(),
                vec![PermissionEntry { permission: format!("android.permission.ACCESS_{perm_counter}"), level }],
            );
        }
        for sig in &inst.ipcs {
            let r = match rng.gen_range(0..4) {
                0 => Some(Restriction::Blacklist),
                1 => Some(Restriction::Greylist),
                2 => Some(Restriction::Whitelist),
                _ => None,
            };
            if let Some(r) = r {
                restrictions.entries.insert(sig.clone(), r);
            }
        }
        if vulnerable {
            let label = Label { ipc_signature: ipc, helper, vuln_class: class };
            if protected {
                truth.suppressed.insert(label.clone());
            }
            truth.labels.insert(label);
        }
    }
    for _ in 0..spec.noise_classes {
        let mut b = Builder { rng: &mut rng, namer: &mut namer };
        classes.extend(b.noise());
    }

    let doc = serde_json::json!({
        "version": 1,
        "externals": EXTERNALS,
        "classes": classes,
    });
    let corpus: CorpusDocument = serde_json::from_value(doc).map_err(|e| Error::InvalidSpec(format!("generator produced bad IR: {e}")))?;
    Ok(Generated { corpus, truth, permissions, restrictions })
}

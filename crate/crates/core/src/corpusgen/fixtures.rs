//! Small hand-built corpora, one per vulnerability pattern, each with a
//! consistent twin that must produce no finding.

use serde_json::Value;

use super::dsl::*;
use super::{family_classes, Family, Ipc, EXTERNALS};
use crate::inconsistency::VulnClass;
use crate::ir::CorpusDocument;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub corpus: CorpusDocument,
    /// `(ipc signature, helper, class)` expected as the only finding.
    pub expected: Option<(String, String, VulnClass)>,
}

fn document(classes: Vec<Value>) -> CorpusDocument {
    let doc = serde_json::json!({ "version": 1, "externals": EXTERNALS, "classes": classes });
    serde_json::from_value(doc).expect("fixture IR is well formed")
}

fn add_method(classes: &mut [Value], class_name: &str, m: Value) {
    let c = classes.iter_mut().find(|c| c["name"] == class_name).expect("class present");
    c["methods"].as_array_mut().expect("methods").push(m);
}

fn wallpaper(fixed: bool) -> Fixture {
    let fam = Family::new("Wallpaper");
    let gate = Ipc::new("isWallpaperSupported", &[], "boolean");
    let ipc = Ipc::new("getWallpaper", &[("which", "int")], "Bitmap");
    let helper_body = vec![
        call_interface(&gate.target(&fam.iface), "this.mService", vec![], Some("supported")),
        if_(var("supported"), "eq", false.into(), vec![ret(Some(null()))], vec![]),
        call_interface(&ipc.target(&fam.iface), "this.mService", vec![var("which")], Some("bmp")),
        ret(Some(var("bmp"))),
    ];
    let mut service_body = Vec::new();
    if fixed {
        service_body.push(call_virtual(&gate.target(&fam.service), "this", vec![], Some("ok")));
        service_body.push(if_(var("ok"), "eq", false.into(), vec![ret(Some(null()))], vec![]));
    }
    service_body.push(ret(Some("this.mWallpaper".into())));
    let classes = family_classes(
        &fam,
        &[gate.clone(), ipc.clone()],
        vec![vec![ret(Some(true.into()))], service_body],
        vec![method("getDrawable", vec![param("which", "int")], "Bitmap", &[], helper_body)],
        vec![],
    );
    Fixture {
        name: if fixed { "wallpaper-gate-twin" } else { "wallpaper-gate" },
        corpus: document(classes),
        expected: (!fixed).then(|| (ipc.target(&fam.iface), format!("{}.getDrawable(int)", fam.helper), VulnClass::EnvBypass)),
    }
}

fn fingerprint(fixed: bool) -> Fixture {
    let fam = Family::new("Fingerprint");
    let ipc = Ipc::new(
        "authenticate",
        &[("token", "IBinder"), ("opId", "long"), ("userId", "int"), ("opPackageName", "String")],
        "void",
    );
    let helper_params = [("opId", "long"), ("userId", "int")];
    let helper_body = vec![
        call_virtual("android.content.Context.getOpPackageName()", "this.mContext", vec![], Some("pkg")),
        call_interface(
            &ipc.target(&fam.iface),
            "this.mService",
            vec!["this.mToken".into(), var("opId"), var("userId"), var("pkg")],
            None,
        ),
    ];
    let service_body = if fixed {
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
    } else {
        vec![
            if_(var("opPackageName"), "eq", string("com.android.systemui"), vec![assign("this.mKeyguard", true.into())], vec![]),
            assign("this.mOpId", var("opId")),
        ]
    };
    let helper = method("authenticate", helper_params.iter().map(|(n, t)| param(n, t)).collect(), "void", &[], helper_body);
    let classes = family_classes(&fam, std::slice::from_ref(&ipc), vec![service_body], vec![helper], vec![]);
    Fixture {
        name: if fixed { "fingerprint-identity-twin" } else { "fingerprint-identity" },
        corpus: document(classes),
        expected: (!fixed).then(|| (ipc.target(&fam.iface), format!("{}.authenticate(long,int)", fam.helper), VulnClass::FakeIdentity)),
    }
}

/// Identity derived from the binder and checked against the claimed package.
fn notification_fixed() -> Fixture {
    let fam = Family::new("Notification");
    let ipc = Ipc::new("enqueueNotification", &[("pkg", "String"), ("id", "int")], "void");
    let helper_body = vec![
        call_virtual("android.content.Context.getPackageName()", "this.mContext", vec![], Some("pkg")),
        call_interface(&ipc.target(&fam.iface), "this.mService", vec![var("pkg"), var("id")], None),
    ];
    let service_body = vec![
        call_static("android.os.Binder.getCallingUid()", vec![], Some("uid")),
        call_virtual(
            &format!("{}.isCallerSameApp(String,int)", fam.service),
            "this",
            vec![var("pkg"), var("uid")],
            Some("same"),
        ),
        if_(var("same"), "eq", false.into(), vec![throw("SecurityException")], vec![]),
        assign("this.mLastId", var("id")),
    ];
    let helper = method("notify", vec![param("id", "int")], "void", &[], helper_body);
    let mut classes = family_classes(&fam, &[ipc], vec![service_body], vec![helper], vec![]);
    add_method(
        &mut classes,
        &fam.service,
        method(
            "isCallerSameApp",
            vec![param("pkg", "String"), param("uid", "int")],
            "boolean",
            &[],
            vec![ret(Some(true.into()))],
        ),
    );
    Fixture { name: "notification-identity-checked", corpus: document(classes), expected: None }
}

fn nfc(fixed: bool) -> Fixture {
    let fam = Family::new("Nfc");
    let ipc = Ipc::new("setForegroundDispatch", &[("intent", "PendingIntent"), ("filters", "IntentFilter[]")], "void");
    let helper_body = vec![
        call_virtual("android.app.Activity.isResumed()", "activity", vec![], Some("resumed")),
        if_(var("resumed"), "eq", false.into(), vec![throw("IllegalStateException")], vec![]),
        call_interface(&ipc.target(&fam.iface), "this.mService", vec![var("intent"), var("filters")], None),
    ];
    let mut service_body = Vec::new();
    if fixed {
        service_body.push(call_static("android.os.Binder.getCallingUid()", vec![], Some("uid")));
        service_body.push(call_virtual(
            "android.app.ActivityManager.isForegroundUid(int)",
            "this.mActivityManager",
            vec![var("uid")],
            Some("fg"),
        ));
        service_body.push(if_(var("fg"), "eq", false.into(), vec![throw("SecurityException")], vec![]));
    }
    service_body.push(assign("this.mDispatchIntent", var("intent")));
    let helper = method(
        "enableForegroundDispatch",
        vec![param("activity", "Activity"), param("intent", "PendingIntent"), param("filters", "IntentFilter[]")],
        "void",
        &[],
        helper_body,
    );
    let classes = family_classes(&fam, std::slice::from_ref(&ipc), vec![service_body], vec![helper], vec![]);
    Fixture {
        name: if fixed { "nfc-status-twin" } else { "nfc-status" },
        corpus: document(classes),
        expected: (!fixed).then(|| {
            (
                ipc.target(&fam.iface),
                format!("{}.enableForegroundDispatch(Activity,PendingIntent,IntentFilter[])", fam.helper),
                VulnClass::FakeStatus,
            )
        }),
    }
}

fn health(fixed: bool) -> Fixture {
    let fam = Family::new("Health");
    let ipc = Ipc::new("registerAppConfiguration", &[("config", "HealthAppConfiguration")], "boolean");
    let helper_body = vec![
        if_(var("config"), "eq", null(), vec![throw("IllegalArgumentException")], vec![]),
        call_interface(&ipc.target(&fam.iface), "this.mService", vec![var("config")], Some("ok")),
        ret(Some(var("ok"))),
    ];
    let mut service_body = Vec::new();
    if fixed {
        service_body.push(if_(var("config"), "eq", null(), vec![throw("IllegalArgumentException")], vec![]));
    }
    service_body.push(call_virtual("java.util.List.add(Object)", "this.mConfigs", vec![var("config")], None));
    service_body.push(ret(Some(true.into())));
    let helper = method("registerAppConfiguration", vec![param("config", "HealthAppConfiguration")], "boolean", &[], helper_body);
    let classes = family_classes(&fam, std::slice::from_ref(&ipc), vec![service_body], vec![helper], vec![]);
    Fixture {
        name: if fixed { "health-parameter-twin" } else { "health-parameter" },
        corpus: document(classes),
        expected: (!fixed).then(|| {
            (
                ipc.target(&fam.iface),
                format!("{}.registerAppConfiguration(HealthAppConfiguration)", fam.helper),
                VulnClass::IllegalParameter,
            )
        }),
    }
}

fn multicast(fixed: bool) -> Fixture {
    let fam = Family::new("Wifi");
    let ipc = Ipc::new("acquireMulticastLock", &[("binder", "IBinder"), ("tag", "String")], "void");
    let lock = format!("{}$MulticastLock", fam.helper);
    let acquire = vec![
        assign("n", "this.mActiveLockCount".into()),
        if_(var("n"), "ge", int(50), vec![throw("UnsupportedOperationException")], vec![]),
        call_interface(&ipc.target(&fam.iface), "this.mService", vec!["this.mBinder".into(), "this.mTag".into()], None),
        binop("m", var("n"), "+", int(1)),
        assign("this.mActiveLockCount", var("m")),
    ];
    let mut service_body = Vec::new();
    if fixed {
        service_body.push(call_virtual("java.util.List.size()", "this.mMulticasters", vec![], Some("count")));
        service_body.push(if_(var("count"), "ge", int(50), vec![throw("IllegalStateException")], vec![]));
    }
    service_body.push(call_virtual("java.util.List.add(Object)", "this.mMulticasters", vec![var("tag")], None));
    let lock_class = class(ClassSpec {
        name: &lock,
        kind: "class",
        superclass: None,
        interfaces: vec![],
        enclosing: Some(&fam.helper),
        methods: vec![method("acquire", vec![], "void", &[], acquire)],
    });
    let classes = family_classes(&fam, std::slice::from_ref(&ipc), vec![service_body], vec![], vec![lock_class]);
    Fixture {
        name: if fixed { "multicast-lock-twin" } else { "multicast-lock" },
        corpus: document(classes),
        expected: (!fixed).then(|| (ipc.target(&fam.iface), format!("{lock}.acquire()"), VulnClass::IpcFlood)),
    }
}

/// Every pattern and its consistent counterpart.
pub fn fixture_patterns() -> Vec<Fixture> {
    vec![
        wallpaper(false),
        wallpaper(true),
        fingerprint(false),
        fingerprint(true),
        notification_fixed(),
        nfc(false),
        nfc(true),
        health(false),
        health(true),
        multicast(false),
        multicast(true),
    ]
}

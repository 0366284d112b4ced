//! Seed-list configuration shared by service extraction, mining and the
//! detectors. Name sets are suffix-matched so synthetic corpora are free to
//! use short package names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir::MethodRef;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub registration_methods: Vec<String>,
    pub stub_markers: Vec<String>,
    pub helper_package_prefixes: Vec<String>,
    pub identity_access: Vec<String>,
    pub identity_enforce: Vec<String>,
    pub keywords: Vec<String>,
    pub classify_access_tokens: Vec<String>,
    pub classify_enforce_tokens: Vec<String>,
    pub status_apis: Vec<String>,
    pub binder_identity_sources: Vec<String>,
    pub handled_exceptions: Vec<String>,
    pub collection_mutators: Vec<String>,
    pub listener_types: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            registration_methods: strings(&["ServiceManager.addService", "SystemService.publishBinderService"]),
            stub_markers: strings(&["IBinder", "IInterface"]),
            helper_package_prefixes: strings(&["android."]),
            identity_access: strings(&[
                "getPackageName",
                "getBasePackageName",
                "getOpPackageName",
                "myUid",
                "getUidForPid",
                "getUserId",
                "myPid",
                "getPids",
                "getPidsForCommands",
                "getGidForName",
                "getProcessGroup",
                "myPpid",
                "getParentPid",
                "myTid",
                "myUserHandle",
            ]),
            identity_enforce: strings(&[
                "checkPackage",
                "checkOperation",
                "checkOp",
                "noteOperation",
                "noteOp",
                "checkPermission",
                "checkCallingPermission",
                "checkCallingOrSelfPermission",
                "enforceCallingPermission",
                "enforceCallingOrSelfPermission",
                "enforcePermission",
            ]),
            keywords: strings(&[
                "userid", "uid", "pid", "identity", "package", "enforce", "permission", "check", "user",
            ]),
            classify_access_tokens: strings(&[
                "get", "my", "calling", "userid", "uid", "pid", "identity", "package", "user",
            ]),
            classify_enforce_tokens: strings(&["check", "enforce", "verify"]),
            status_apis: strings(&["isResumed", "isForeground", "isForegroundUid", "isTopActivity"]),
            binder_identity_sources: strings(&["Binder.getCallingUid()", "Binder.getCallingPid()"]),
            handled_exceptions: strings(&[
                "BadParcelableException",
                "IllegalArgumentException",
                "IllegalStateException",
                "NullPointerException",
                "SecurityException",
                "NetworkOnMainThreadException",
            ]),
            collection_mutators: strings(&[".add", ".put", ".offer"]),
            listener_types: strings(&["Listener", "Callback"]),
        }
    }
}

/// `name` ends with `suffix` on a `.`/`$` boundary (or equals it).
pub fn suffix_match(name: &str, suffix: &str) -> bool {
    if suffix.is_empty() {
        return false;
    }
    if suffix.starts_with('.') {
        return name.ends_with(suffix);
    }
    match name.strip_suffix(suffix) {
        Some("") => true,
        Some(rest) => rest.ends_with('.') || rest.ends_with('$'),
        None => false,
    }
}

impl SeedConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        let cfg = Self::from_json(&text).map_err(|source| Error::Json { path: path.into(), source })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.registration_methods.is_empty() {
            return Err(Error::Config("registration_methods is empty".into()));
        }
        if self.stub_markers.is_empty() {
            return Err(Error::Config("stub_markers is empty".into()));
        }
        if self.keywords.iter().any(|k| k.chars().any(char::is_uppercase)) {
            return Err(Error::Config("keywords must be lowercase".into()));
        }
        Ok(())
    }

    pub fn is_registration(&self, target: &MethodRef) -> bool {
        self.registration_methods
            .iter()
            .any(|r| suffix_match(target.qualified_name(), r))
    }

    pub fn is_binder_source(&self, target: &MethodRef) -> bool {
        self.binder_identity_sources
            .iter()
            .any(|s| suffix_match(target.as_str(), s))
    }

    pub fn is_collection_mutator(&self, target: &MethodRef) -> bool {
        self.collection_mutators
            .iter()
            .any(|m| suffix_match(target.qualified_name(), m))
    }

    pub fn is_status_api(&self, target: &MethodRef) -> bool {
        self.status_apis.iter().any(|s| s == target.simple_name())
    }

    pub fn is_listener_type(&self, ty: &str) -> bool {
        self.listener_types.iter().any(|s| ty.ends_with(s.as_str()))
    }

    pub fn is_handled_exception(&self, ty: &str) -> bool {
        let simple = ty.rsplit(['.', '$']).next().unwrap_or(ty);
        self.handled_exceptions.iter().any(|h| h == simple || h == ty)
    }

    pub fn in_helper_namespace(&self, package: &str, class: &str) -> bool {
        self.helper_package_prefixes.iter().any(|p| {
            let bare = p.trim_end_matches('.');
            package == bare || package.starts_with(p.as_str()) || class.starts_with(p.as_str())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_matches_default() {
        let shipped = SeedConfig::from_json(include_str!("../data/default_seeds.json")).unwrap();
        assert_eq!(shipped, SeedConfig::default());
    }

    #[test]
    fn suffix_matching() {
        assert!(suffix_match("android.os.ServiceManager.addService", "ServiceManager.addService"));
        assert!(!suffix_match("android.os.MyServiceManager.addService", "ServiceManager.addService"));
        assert!(suffix_match("java.util.ArrayList.add", ".add"));
        assert!(!suffix_match("java.util.ArrayList.addAll", ".add"));
        assert!(suffix_match("android.os.IBinder", "IBinder"));
        assert!(suffix_match("a.IFoo$Stub", "Stub"));
    }

    #[test]
    fn empty_markers_rejected() {
        let cfg = SeedConfig { stub_markers: vec![], ..SeedConfig::default() };
        assert!(matches!(cfg.check(), Err(Error::Config(_))));
        let partial = SeedConfig::from_json(r#"{"status_apis": ["isAwake"]}"#).unwrap();
        assert_eq!(partial.status_apis, vec!["isAwake"]);
        assert_eq!(partial.stub_markers, SeedConfig::default().stub_markers);
        assert!(SeedConfig::from_json(r#"{"bogus": []}"#).is_err());
    }

    #[test]
    fn handled_exceptions_by_simple_name() {
        let cfg = SeedConfig::default();
        assert!(cfg.is_handled_exception("java.lang.IllegalArgumentException"));
        assert!(cfg.is_handled_exception("SecurityException"));
        assert!(!cfg.is_handled_exception("java.lang.UnsupportedOperationException"));
    }
}

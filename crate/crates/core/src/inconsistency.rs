//! Pairwise comparison of helper and service enforcement, permission
//! filtering, restriction-list tallies and the end-to-end analysis report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::callgraph::{build_graph, enumerate_chains_to, CallChain, CallbackTable, GraphBuilder, DEFAULT_CHAIN_LIMIT, DEFAULT_MAX_DEPTH};
use crate::config::SeedConfig;
use crate::detectors::{DetectorContext, EnforcementKind, EnforcementSet, Locus};
use crate::error::{Error, Result};
use crate::ir::{Corpus, MethodRef};
use crate::mining::{build_transactions, fp_growth, keyword_filter, seed_items, transaction_for, MinedVocabulary, MiningParams, Transaction};
use crate::service::{identify_helpers, identify_services, pair_methods, MethodPair, PairingContext};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VulnClass {
    IllegalParameter,
    FakeIdentity,
    FakeStatus,
    EnvBypass,
    IpcFlood,
}

impl VulnClass {
    pub const ALL: [VulnClass; 5] = [
        VulnClass::IllegalParameter,
        VulnClass::FakeIdentity,
        VulnClass::FakeStatus,
        VulnClass::EnvBypass,
        VulnClass::IpcFlood,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnClass::IllegalParameter => "illegalParameter",
            VulnClass::FakeIdentity => "fakeIdentity",
            VulnClass::FakeStatus => "fakeStatus",
            VulnClass::EnvBypass => "envBypass",
            VulnClass::IpcFlood => "ipcFlood",
        }
    }

    pub fn parse(s: &str) -> Option<VulnClass> {
        VulnClass::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Missing {
    Position(usize),
    Mechanism(EnforcementKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub class: VulnClass,
    pub missing: BTreeSet<Missing>,
    /// A missing parameter escapes on the service or is throw-guarded by
    /// the helper.
    pub hazard: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompareOptions {
    /// Report illegalParameter only with a hazard.
    pub require_hazard: bool,
}

/// Mechanisms the helper enforces that the service does not mirror.
pub fn compare_pair(helper: &EnforcementSet, service: &EnforcementSet, opts: CompareOptions) -> Vec<Comparison> {
    let mut out = Vec::new();

    let missing: BTreeSet<usize> = helper.validated_params.difference(&service.validated_params).copied().collect();
    if !missing.is_empty() {
        let escaping = service.escaping_params();
        let hazard = missing.iter().any(|p| escaping.contains(p) || helper.throw_guarded.contains(p));
        if hazard || !opts.require_hazard {
            out.push(Comparison {
                class: VulnClass::IllegalParameter,
                missing: missing.into_iter().map(Missing::Position).collect(),
                hazard,
            });
        }
    }

    if !service.binder_identity {
        let uncovered: BTreeSet<usize> = helper
            .identities_passed
            .iter()
            .map(|(_, p)| *p)
            .filter(|p| !service.identity_coverage.contains(p))
            .collect();
        if !uncovered.is_empty() {
            let mut missing: BTreeSet<Missing> = uncovered.into_iter().map(Missing::Position).collect();
            missing.insert(Missing::Mechanism(EnforcementKind::IdentityCheck));
            out.push(Comparison { class: VulnClass::FakeIdentity, missing, hazard: false });
        }
    }

    if helper.has(EnforcementKind::CallerStatus)
        && !service.has(EnforcementKind::CallerStatus)
        && !service.has(EnforcementKind::IdentityCheck)
    {
        out.push(mechanism(VulnClass::FakeStatus, EnforcementKind::CallerStatus));
    }

    if helper.has(EnforcementKind::EnvCheck) {
        let own_check = service.has(EnforcementKind::IdentityCheck) || service.has(EnforcementKind::PermissionCheck);
        let unmatched = helper.env_gates.iter().any(|g| !service.gate_calls.contains(g.simple_name()));
        if unmatched && !own_check {
            out.push(mechanism(VulnClass::EnvBypass, EnforcementKind::EnvCheck));
        }
    }

    if helper.has(EnforcementKind::DupConstraint) && !service.has(EnforcementKind::DupConstraint) {
        out.push(mechanism(VulnClass::IpcFlood, EnforcementKind::DupConstraint));
    }
    out
}

fn mechanism(class: VulnClass, kind: EnforcementKind) -> Comparison {
    Comparison { class, missing: BTreeSet::from([Missing::Mechanism(kind)]), hazard: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PermissionLevel {
    Normal,
    Dangerous,
    Signature,
    SignatureOrSystem,
}

impl PermissionLevel {
    pub fn protects(self) -> bool {
        matches!(self, PermissionLevel::Signature | PermissionLevel::SignatureOrSystem)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermissionEntry {
    pub permission: String,
    pub level: PermissionLevel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PermissionMap {
    pub entries: BTreeMap<String, Vec<PermissionEntry>>,
}

impl PermissionMap {
    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }

    /// Strongest level guarding `signature`.
    pub fn level(&self, signature: &str) -> Option<(PermissionLevel, &str)> {
        self.entries
            .get(signature)?
            .iter()
            .max_by(|a, b| a.level.cmp(&b.level).then_with(|| b.permission.cmp(&a.permission)))
            .map(|e| (e.level, e.permission.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Restriction {
    Whitelist,
    Greylist,
    Blacklist,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RestrictionList {
    pub entries: BTreeMap<String, Restriction>,
}

impl RestrictionList {
    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }

    /// Category of a finding's IPC method; unlisted means whitelist.
    pub fn category(&self, finding: &Finding) -> Restriction {
        [finding.ipc_signature.as_str(), finding.service.as_str(), finding.helper.as_str()]
            .iter()
            .find_map(|k| self.entries.get(*k).copied())
            .unwrap_or(Restriction::Whitelist)
    }
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Evidence {
    pub helper: Vec<Locus>,
    pub service: Vec<Locus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Finding {
    pub ipc_signature: MethodRef,
    pub helper: MethodRef,
    pub service: MethodRef,
    pub helper_class: String,
    pub vuln_class: VulnClass,
    pub missing_on_service: Vec<Missing>,
    pub hazard: bool,
    pub native: bool,
    pub evidence: Evidence,
    pub permission_level: Option<PermissionLevel>,
    pub restriction: Option<Restriction>,
    pub suppressed: bool,
    pub suppression_reason: Option<String>,
}

impl Finding {
    pub fn key(&self) -> (&MethodRef, &MethodRef, VulnClass) {
        (&self.ipc_signature, &self.helper, self.vuln_class)
    }
}

fn evidence_for(class: VulnClass, helper: &EnforcementSet, service: &EnforcementSet) -> Evidence {
    let kind = match class {
        VulnClass::IllegalParameter => EnforcementKind::ParamValidation,
        VulnClass::FakeIdentity => EnforcementKind::IdentityPassing,
        VulnClass::FakeStatus => EnforcementKind::CallerStatus,
        VulnClass::EnvBypass => EnforcementKind::EnvCheck,
        VulnClass::IpcFlood => EnforcementKind::DupConstraint,
    };
    let loci = |s: &EnforcementSet, k| s.mechanisms.get(&k).map(|l| l.iter().cloned().collect()).unwrap_or_default();
    let mut service_loci: Vec<Locus> = loci(service, kind);
    if class == VulnClass::IllegalParameter {
        for e in &service.escape_hazards {
            service_loci.extend(e.escape_sites.iter().map(|s| Locus { method: e.method.clone(), index: s.index() }));
        }
    }
    Evidence { helper: loci(helper, kind), service: service_loci }
}

/// Findings for one pair, not yet filtered or annotated.
pub fn findings_for_pair(
    pair: &MethodPair,
    helper: &EnforcementSet,
    service: &EnforcementSet,
    opts: CompareOptions,
) -> Vec<Finding> {
    compare_pair(helper, service, opts)
        .into_iter()
        .map(|c| Finding {
            ipc_signature: pair.ipc_signature.clone(),
            helper: pair.helper.clone(),
            service: pair.service.clone(),
            helper_class: pair.helper_class.clone(),
            vuln_class: c.class,
            missing_on_service: c.missing.into_iter().collect(),
            hazard: c.hazard,
            native: pair.native,
            evidence: evidence_for(c.class, helper, service),
            permission_level: None,
            restriction: None,
            suppressed: false,
            suppression_reason: None,
        })
        .collect()
}

/// Marks findings on signature-level interfaces suppressed and records the
/// level of every mapped finding.
pub fn apply_permission_filter(mut findings: Vec<Finding>, pmap: &PermissionMap) -> Vec<Finding> {
    for f in &mut findings {
        let level = pmap.level(f.ipc_signature.as_str()).or_else(|| pmap.level(f.service.as_str()));
        f.permission_level = level.map(|(l, _)| l);
        f.suppressed = false;
        f.suppression_reason = None;
        if let Some((l, perm)) = level.filter(|(l, _)| l.protects()) {
            f.suppressed = true;
            let name = serde_json::to_value(l).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            f.suppression_reason = Some(format!("protected by {perm} ({name})"));
        }
    }
    findings
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub whitelist: usize,
    pub greylist: usize,
    pub blacklist: usize,
    pub total: usize,
}

impl Counts {
    fn add(&mut self, r: Restriction) {
        match r {
            Restriction::Whitelist => self.whitelist += 1,
            Restriction::Greylist => self.greylist += 1,
            Restriction::Blacklist => self.blacklist += 1,
        }
        self.total += 1;
    }

    pub fn get(&self, r: Restriction) -> usize {
        match r {
            Restriction::Whitelist => self.whitelist,
            Restriction::Greylist => self.greylist,
            Restriction::Blacklist => self.blacklist,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tallies {
    pub by_class: BTreeMap<VulnClass, Counts>,
    pub totals: Counts,
}

/// Unsuppressed findings per vulnerability class and restriction category.
/// Records each finding's category as a side effect.
pub fn tally_restrictions(findings: &mut [Finding], rlist: &RestrictionList) -> Tallies {
    let mut by_class: BTreeMap<VulnClass, Counts> = VulnClass::ALL.iter().map(|c| (*c, Counts::default())).collect();
    let mut totals = Counts::default();
    for f in findings.iter_mut() {
        let r = rlist.category(f);
        f.restriction = Some(r);
        if f.suppressed {
            continue;
        }
        by_class.get_mut(&f.vuln_class).expect("all classes present").add(r);
        totals.add(r);
    }
    Tallies { by_class, totals }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairRow {
    pub ipc_signature: MethodRef,
    pub helper: MethodRef,
    pub service: MethodRef,
    pub helper_class: String,
    pub native: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub version: u32,
    pub corpus_digest: String,
    pub pairs: Vec<PairRow>,
    pub vocabulary: MinedVocabulary,
    pub findings: Vec<Finding>,
    pub tallies: Tallies,
    pub direct_only: Vec<MethodRef>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn unsuppressed(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| !f.suppressed)
    }

    pub fn suppressed_count(&self) -> usize {
        self.findings.iter().filter(|f| f.suppressed).count()
    }

    pub fn summary_line(&self) -> String {
        format!("pairs={} findings={} suppressed={}", self.pairs.len(), self.unsuppressed().count(), self.suppressed_count())
    }
}

/// Inputs of one analysis run besides the corpus.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub seeds: SeedConfig,
    pub permissions: PermissionMap,
    pub restrictions: RestrictionList,
    pub callbacks: CallbackTable,
    pub mining: MiningParams,
    pub max_depth: usize,
    pub chain_limit: usize,
    pub parallel: usize,
    pub compare: CompareOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            seeds: SeedConfig::default(),
            permissions: PermissionMap::default(),
            restrictions: RestrictionList::default(),
            callbacks: CallbackTable::default(),
            mining: MiningParams::default(),
            max_depth: DEFAULT_MAX_DEPTH,
            chain_limit: DEFAULT_CHAIN_LIMIT,
            parallel: 1,
            compare: CompareOptions::default(),
        }
    }
}

/// Pairs plus everything needed to analyze them.
pub struct PreparedCorpus<'a> {
    pub corpus: &'a Corpus,
    pub registry: crate::service::ServiceRegistry,
    pub callbacks: CallbackTable,
    pub pairing: crate::service::Pairing,
    /// Chains per pair, aligned with `pairing.pairs`.
    pub chains: Vec<Vec<CallChain>>,
}

/// Service extraction, pairing and chain enumeration.
pub fn prepare<'a>(corpus: &'a Corpus, cfg: &AnalysisConfig) -> Result<PreparedCorpus<'a>> {
    cfg.seeds.check()?;
    let callbacks = CallbackTable::from_corpus(corpus).merged(&cfg.callbacks);
    callbacks.check(corpus)?;
    let registry = identify_services(corpus, &cfg.seeds)?;
    let pctx = PairingContext {
        corpus,
        registry: &registry,
        seeds: &cfg.seeds,
        callbacks: &callbacks,
        max_depth: cfg.max_depth,
    };
    let helpers = identify_helpers(&pctx)?;
    let pairing = pair_methods(&pctx, &helpers)?;
    for ipc in &pairing.unimplemented {
        info!("skipping {ipc}: no registered service implements it");
    }
    let builder = GraphBuilder::new(corpus, &callbacks).boundary(&registry).max_depth(cfg.max_depth);
    let mut graphs = BTreeMap::new();
    let mut chains = Vec::with_capacity(pairing.pairs.len());
    for pair in &pairing.pairs {
        if !graphs.contains_key(&pair.helper) {
            graphs.insert(pair.helper.clone(), builder.build(&pair.helper)?);
        }
        let proxy = registry.proxy_methods.get(&pair.ipc_signature).expect("paired IPC methods have proxies");
        let e = enumerate_chains_to(&graphs[&pair.helper], Some(proxy), cfg.chain_limit);
        if e.truncated {
            debug!("chain enumeration truncated for {} -> {}", pair.helper, pair.ipc_signature);
        }
        chains.push(e.chains);
    }
    Ok(PreparedCorpus { corpus, registry, callbacks, pairing, chains })
}

/// Helper-chain transactions plus one transaction per service
/// implementation covering everything it reaches.
pub fn mining_transactions(prep: &PreparedCorpus<'_>, cfg: &AnalysisConfig) -> Result<Vec<Transaction>> {
    let tagged: Vec<(MethodRef, CallChain)> = prep
        .pairing
        .pairs
        .iter()
        .zip(&prep.chains)
        .flat_map(|(p, cs)| cs.iter().map(move |c| (p.ipc_signature.clone(), c.clone())))
        .collect();
    let mut transactions = build_transactions(prep.corpus, &tagged);
    for (ipc, service) in &prep.registry.stub_methods {
        let g = build_graph(prep.corpus, service, &prep.callbacks, cfg.max_depth)?;
        transactions.push(transaction_for(prep.corpus, ipc.as_str(), &g.nodes));
    }
    Ok(transactions)
}

pub fn mine_vocabulary(prep: &PreparedCorpus<'_>, cfg: &AnalysisConfig) -> Result<MinedVocabulary> {
    let transactions = mining_transactions(prep, cfg)?;
    let itemsets = fp_growth(&transactions, cfg.mining, &seed_items(&cfg.seeds))?;
    Ok(keyword_filter(&itemsets, &cfg.seeds, cfg.mining.min_support))
}

/// Full pipeline: pairing, chains, mining, detection, comparison,
/// permission filtering and restriction tallies.
pub fn analyze(corpus: &Corpus, cfg: &AnalysisConfig) -> Result<AnalysisReport> {
    cfg.mining.check()?;
    let prep = prepare(corpus, cfg)?;
    let vocab = mine_vocabulary(&prep, cfg)?;
    let dctx = DetectorContext {
        corpus,
        registry: &prep.registry,
        seeds: &cfg.seeds,
        vocab: &vocab,
        callbacks: &prep.callbacks,
        max_depth: cfg.max_depth,
    };
    let work: Vec<(&MethodPair, &Vec<CallChain>)> = prep.pairing.pairs.iter().zip(&prep.chains).collect();
    let run = |(pair, chains): &(&MethodPair, &Vec<CallChain>)| -> Result<Vec<Finding>> {
        let helper = dctx.detect_helper(&pair.ipc_signature, chains)?;
        let service = dctx.detect_service_enforcements(&pair.service)?;
        Ok(findings_for_pair(pair, &helper, &service, cfg.compare))
    };
    let per_pair: Vec<Vec<Finding>> = if cfg.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallel)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| work.par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        work.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    let mut findings = apply_permission_filter(per_pair.into_iter().flatten().collect(), &cfg.permissions);
    findings.sort_by(|a, b| a.key().cmp(&b.key()));
    let tallies = tally_restrictions(&mut findings, &cfg.restrictions);

    Ok(AnalysisReport {
        version: REPORT_VERSION,
        corpus_digest: corpus.digest(),
        pairs: prep
            .pairing
            .pairs
            .iter()
            .map(|p| PairRow {
                ipc_signature: p.ipc_signature.clone(),
                helper: p.helper.clone(),
                service: p.service.clone(),
                helper_class: p.helper_class.clone(),
                native: p.native,
            })
            .collect(),
        vocabulary: vocab,
        findings,
        tallies,
        direct_only: prep.pairing.direct_only,
    })
}

fn severity(f: &serde_json::Value) -> u8 {
    let hazard = f["hazard"].as_bool().unwrap_or(false);
    match f["vulnClass"].as_str().unwrap_or("") {
        "fakeIdentity" => 0,
        "illegalParameter" if hazard => 0,
        "ipcFlood" => 1,
        "fakeStatus" => 2,
        "envBypass" => 3,
        _ => 4,
    }
}

/// Markdown view of a serialized report.
pub fn render_markdown(report_json: &str) -> Result<String> {
    use std::fmt::Write;
    let v: serde_json::Value = serde_json::from_str(report_json)
        .map_err(|source| Error::Json { path: "<report>".into(), source })?;
    let mut md = String::new();
    let s = |x: &serde_json::Value| x.as_str().unwrap_or("").to_string();
    let findings = v["findings"].as_array().cloned().unwrap_or_default();
    let pairs = v["pairs"].as_array().map(Vec::len).unwrap_or(0);
    let suppressed = findings.iter().filter(|f| f["suppressed"].as_bool() == Some(true)).count();

    writeln!(md, "# Helper/service enforcement report\n").ok();
    writeln!(md, "- corpus digest: `{}`", s(&v["corpusDigest"])).ok();
    writeln!(md, "- pairs: {pairs}").ok();
    writeln!(md, "- findings: {} ({} suppressed)\n", findings.len() - suppressed, suppressed).ok();

    writeln!(md, "## Findings\n").ok();
    let mut ranked: Vec<&serde_json::Value> = findings.iter().filter(|f| f["suppressed"].as_bool() != Some(true)).collect();
    ranked.sort_by_key(|f| severity(f));
    if ranked.is_empty() {
        writeln!(md, "None.\n").ok();
    } else {
        writeln!(md, "| class | IPC method | helper | missing on service | restriction |").ok();
        writeln!(md, "|---|---|---|---|---|").ok();
        for f in ranked {
            let missing: Vec<String> = f["missingOnService"]
                .as_array()
                .map(|a| {
                    a.iter()
                        .map(|m| match (m.get("position"), m.get("mechanism")) {
                            (Some(p), _) => format!("param {p}"),
                            (_, Some(k)) => s(k),
                            _ => m.to_string(),
                        })
                        .collect()
                })
                .unwrap_or_default();
            let class = if f["hazard"].as_bool() == Some(true) { format!("{} (hazard)", s(&f["vulnClass"])) } else { s(&f["vulnClass"]) };
            writeln!(
                md,
                "| {} | `{}` | `{}` | {} | {} |",
                class,
                s(&f["ipcSignature"]),
                s(&f["helper"]),
                missing.join(", "),
                s(&f["restriction"])
            )
            .ok();
        }
        writeln!(md).ok();
    }

    if suppressed > 0 {
        writeln!(md, "## Suppressed\n").ok();
        for f in findings.iter().filter(|f| f["suppressed"].as_bool() == Some(true)) {
            writeln!(md, "- {} `{}`: {}", s(&f["vulnClass"]), s(&f["ipcSignature"]), s(&f["suppressionReason"])).ok();
        }
        writeln!(md).ok();
    }

    writeln!(md, "## Restriction tallies\n").ok();
    writeln!(md, "| class | whitelist | greylist | blacklist | total |").ok();
    writeln!(md, "|---|---|---|---|---|").ok();
    let row = |name: &str, c: &serde_json::Value| {
        format!("| {name} | {} | {} | {} | {} |", c["whitelist"], c["greylist"], c["blacklist"], c["total"])
    };
    if let Some(by) = v["tallies"]["byClass"].as_object() {
        for (k, c) in by {
            writeln!(md, "{}", row(k, c)).ok();
        }
    }
    writeln!(md, "{}\n", row("**total**", &v["tallies"]["totals"])).ok();

    let vocab = &v["vocabulary"];
    writeln!(md, "## Mined vocabulary\n").ok();
    for (title, key) in [("identity access", "identityAccessMined"), ("identity enforce", "identityEnforceMined")] {
        let names: Vec<String> = vocab[key].as_array().map(|a| a.iter().map(|n| format!("`{}`", s(n))).collect()).unwrap_or_default();
        writeln!(md, "- {title}: {}", if names.is_empty() { "none".to_string() } else { names.join(", ") }).ok();
    }

    let direct: Vec<String> = v["directOnly"].as_array().map(|a| a.iter().map(s).collect()).unwrap_or_default();
    if !direct.is_empty() {
        writeln!(md, "\n## IPC methods without helpers\n").ok();
        for d in direct {
            writeln!(md, "- `{d}`").ok();
        }
    }
    Ok(md)
}

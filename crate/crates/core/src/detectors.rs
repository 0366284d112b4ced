//! Enforcement extraction for both sides of a helper/service method pair.
//!
//! Helper side: parameter validation, caller-status checks, identity
//! passing, environment checks and duplicate-request constraints, each
//! relative to the IPC call site of a chain. Service side: identity checks,
//! permission checks, validated parameters and escaping parameters of the
//! stub implementation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::callgraph::{CallChain, CallbackTable};
use crate::config::SeedConfig;
use crate::dataflow::{backward_track, Aliases, EscapeReport, EscapeRules, Origin};
use crate::error::{Error, Result};
use crate::ir::walk::{Branch, FlatBody};
use crate::ir::{Callee, Corpus, Invoke, MethodDef, MethodRef, Operand, Rvalue, Statement};
use crate::mining::{tokenize, MinedVocabulary};
use crate::service::ServiceRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EnforcementKind {
    ParamValidation,
    CallerStatus,
    IdentityPassing,
    EnvCheck,
    DupConstraint,
    IdentityCheck,
    PermissionCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum IdentityKind {
    PackageName,
    Uid,
    Pid,
    Gid,
    Tid,
    Ppid,
    UserHandle,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 7] = [
        IdentityKind::PackageName,
        IdentityKind::Uid,
        IdentityKind::Pid,
        IdentityKind::Gid,
        IdentityKind::Tid,
        IdentityKind::Ppid,
        IdentityKind::UserHandle,
    ];

    /// Kind of identity an accessor returns. Unknown (mined) names fall back
    /// to their tokens, then to uid.
    pub fn for_accessor(name: &str) -> IdentityKind {
        match name {
            "getPackageName" | "getOpPackageName" | "getBasePackageName" => IdentityKind::PackageName,
            "myUid" | "getUidForPid" | "getUserId" => IdentityKind::Uid,
            "myPid" | "getPids" | "getPidsForCommands" => IdentityKind::Pid,
            "getGidForName" | "getProcessGroup" => IdentityKind::Gid,
            "myTid" => IdentityKind::Tid,
            "myPpid" | "getParentPid" => IdentityKind::Ppid,
            "myUserHandle" => IdentityKind::UserHandle,
            _ => {
                let tokens = tokenize(name);
                let has = |t: &str| tokens.iter().any(|x| x == t);
                if has("package") {
                    IdentityKind::PackageName
                } else if has("ppid") || has("parentpid") {
                    IdentityKind::Ppid
                } else if has("pid") {
                    IdentityKind::Pid
                } else if has("gid") || has("group") {
                    IdentityKind::Gid
                } else if has("tid") {
                    IdentityKind::Tid
                } else if has("handle") {
                    IdentityKind::UserHandle
                } else {
                    IdentityKind::Uid
                }
            }
        }
    }
}

/// Identity kinds with the IPC argument position they reach.
pub type IdentityPositions = BTreeSet<(IdentityKind, usize)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Side {
    Helper,
    Service,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Locus {
    pub method: MethodRef,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EnforcementSet {
    pub side: Side,
    pub mechanisms: BTreeMap<EnforcementKind, BTreeSet<Locus>>,
    pub validated_params: BTreeSet<usize>,
    pub identities_passed: BTreeSet<(IdentityKind, usize)>,
    pub escape_hazards: Vec<EscapeReport>,
    /// Helper positions whose validation throws.
    pub throw_guarded: BTreeSet<usize>,
    /// Parameter positions an identity check consumes.
    pub identity_coverage: BTreeSet<usize>,
    /// An identity check consumes the Binder-reported caller.
    pub binder_identity: bool,
    /// Boolean IPC methods gating the helper's IPC call.
    pub env_gates: BTreeSet<MethodRef>,
    /// Simple names of boolean calls feeding service-side exit guards.
    pub gate_calls: BTreeSet<String>,
}

impl EnforcementSet {
    pub fn new(side: Side) -> Self {
        EnforcementSet {
            side,
            mechanisms: BTreeMap::new(),
            validated_params: BTreeSet::new(),
            identities_passed: BTreeSet::new(),
            escape_hazards: Vec::new(),
            throw_guarded: BTreeSet::new(),
            identity_coverage: BTreeSet::new(),
            binder_identity: false,
            env_gates: BTreeSet::new(),
            gate_calls: BTreeSet::new(),
        }
    }

    pub fn has(&self, kind: EnforcementKind) -> bool {
        self.mechanisms.contains_key(&kind)
    }

    fn add(&mut self, kind: EnforcementKind, locus: Locus) {
        self.mechanisms.entry(kind).or_default().insert(locus);
    }

    fn merge(&mut self, other: EnforcementSet) {
        for (k, loci) in other.mechanisms {
            self.mechanisms.entry(k).or_default().extend(loci);
        }
        self.validated_params.extend(other.validated_params);
        self.identities_passed.extend(other.identities_passed);
        self.throw_guarded.extend(other.throw_guarded);
        self.identity_coverage.extend(other.identity_coverage);
        self.binder_identity |= other.binder_identity;
        self.env_gates.extend(other.env_gates);
        self.gate_calls.extend(other.gate_calls);
        for e in other.escape_hazards {
            if !self.escape_hazards.contains(&e) {
                self.escape_hazards.push(e);
            }
        }
    }

    pub fn escaping_params(&self) -> BTreeSet<usize> {
        self.escape_hazards
            .iter()
            .filter(|e| e.escapes)
            .filter_map(|e| e.parameter_position)
            .collect()
    }
}

/// Everything detection reads.
pub struct DetectorContext<'a> {
    pub corpus: &'a Corpus,
    pub registry: &'a ServiceRegistry,
    pub seeds: &'a SeedConfig,
    pub vocab: &'a MinedVocabulary,
    pub callbacks: &'a CallbackTable,
    pub max_depth: usize,
}

/// A method body with its flattening and alias classes.
struct View<'a> {
    mref: MethodRef,
    def: &'a MethodDef,
    flat: FlatBody<'a>,
    aliases: Aliases,
}

impl<'a> View<'a> {
    fn new(corpus: &'a Corpus, mref: &MethodRef) -> Result<Self> {
        let def = corpus.method(mref).ok_or_else(|| Error::UnknownMethod(mref.clone()))?;
        Ok(View { mref: mref.clone(), def, flat: FlatBody::new(&def.body), aliases: Aliases::of_method(def) })
    }

    fn locus(&self, index: usize) -> Locus {
        Locus { method: self.mref.clone(), index }
    }

    fn cond_of(&self, g: usize) -> Option<&'a crate::ir::Condition> {
        match self.flat.get(g) {
            Some(Statement::If { cond, .. }) => Some(cond),
            _ => None,
        }
    }

    fn cond_mentions(&self, g: usize, members: &BTreeSet<String>) -> bool {
        self.cond_of(g)
            .is_some_and(|c| c.operands().iter().any(|o| o.as_loc().is_some_and(|l| members.contains(l.name()))))
    }

    fn branch_has(&self, g: usize, branch: Branch, exit: &Exit<'_>) -> bool {
        self.flat.branch_any(g, branch, |s| exit.matches(s))
    }

    /// The `if` at `g` stops execution from reaching `site` on one outcome.
    /// Without a site, any exiting branch counts.
    fn exit_guard(&self, g: usize, site: Option<usize>, exit: &Exit<'_>) -> bool {
        let Some(shape) = self.flat.if_shape(g) else { return false };
        let any = || self.branch_has(g, Branch::Then, exit) || self.branch_has(g, Branch::Else, exit);
        match site {
            None => any(),
            Some(s) if g >= s => false,
            Some(s) => match shape.branch_of(s) {
                None => any(),
                Some(Branch::Then) => self.branch_has(g, Branch::Else, exit),
                Some(Branch::Else) => self.branch_has(g, Branch::Then, exit),
            },
        }
    }

    fn gates(&self, g: usize, site: usize) -> bool {
        self.flat.if_shape(g).is_some_and(|s| s.branch_of(site).is_some())
    }

    fn guard_or_gate(&self, g: usize, site: Option<usize>, exit: &Exit<'_>) -> bool {
        self.exit_guard(g, site, exit) || site.is_some_and(|s| self.gates(g, s))
    }

    fn ifs_before(&self, site: Option<usize>) -> Vec<usize> {
        self.flat.ifs().map(|(g, _)| g).filter(|g| site.is_none_or(|s| *g < s)).collect()
    }

    fn invokes_before(&self, site: Option<usize>) -> Vec<(usize, &'a Invoke)> {
        self.flat.invokes().filter(|(i, _)| site.is_none_or(|s| *i < s)).collect()
    }

    fn alias(&self, name: &str) -> BTreeSet<String> {
        self.aliases.class_of(name)
    }

    /// The location is a field or aliases one.
    fn field_backed(&self, op: &Operand) -> bool {
        match op {
            Operand::Field(_) => true,
            Operand::Var(v) => self.alias(v).iter().any(|m| m.contains('.')),
            Operand::Const(_) => false,
        }
    }

    fn throws_in_exit(&self, g: usize, site: Option<usize>, exit: &Exit<'_>) -> bool {
        let throw_exit = Exit { throws_only: true, ..*exit };
        self.exit_guard(g, site, &throw_exit)
    }
}

/// Which statements end the method for guard purposes.
#[derive(Clone, Copy)]
struct Exit<'a> {
    /// Only Throw counts (guards inside callees cannot return for the caller).
    throws_only: bool,
    /// Restrict Throw to the handled exception list.
    handled: Option<&'a SeedConfig>,
}

impl Exit<'_> {
    fn matches(&self, s: &Statement) -> bool {
        match s {
            Statement::Return { .. } => !self.throws_only,
            Statement::Throw { exception_type } => self.handled.is_none_or(|c| c.is_handled_exception(exception_type)),
            _ => false,
        }
    }
}

fn operand_mentions(op: &Operand, members: &BTreeSet<String>) -> bool {
    op.as_loc().is_some_and(|l| members.contains(l.name()))
}

fn is_boolean_call(corpus: &Corpus, inv: &Invoke) -> bool {
    corpus.return_type(&inv.target) == Some("boolean")
}

fn corpus_callees(corpus: &Corpus, inv: &Invoke) -> Vec<MethodRef> {
    corpus
        .dispatch(inv)
        .into_iter()
        .filter_map(|c| match c {
            Callee::Corpus(r) => Some(r),
            Callee::External(_) => None,
        })
        .filter(|r| corpus.method(r).is_some_and(|d| !d.is_abstract() && !d.is_native()))
        .collect()
}

struct Validation {
    locus: Locus,
    by_throw: bool,
}

impl DetectorContext<'_> {
    fn helper_exit(&self) -> Exit<'_> {
        Exit { throws_only: false, handled: None }
    }

    fn service_exit(&self) -> Exit<'_> {
        Exit { throws_only: false, handled: Some(self.seeds) }
    }

    /// Whether the value with alias class `members` is checked before `site`
    /// in `view`: compared in a guard, fed to a boolean method whose result
    /// guards, or checked with a throw inside a callee it is passed to.
    fn validates(
        &self,
        view: &View<'_>,
        members: &BTreeSet<String>,
        site: Option<usize>,
        exit: &Exit<'_>,
        depth: usize,
        visited: &mut BTreeSet<(MethodRef, usize)>,
    ) -> Result<Option<Validation>> {
        for g in view.ifs_before(site) {
            if view.cond_mentions(g, members) && view.exit_guard(g, site, exit) {
                return Ok(Some(Validation { locus: view.locus(g), by_throw: view.throws_in_exit(g, site, exit) }));
            }
        }
        for (i, inv) in view.invokes_before(site) {
            let Some(q) = inv.args.iter().position(|a| operand_mentions(a, members)) else { continue };
            if let Some(r) = inv.result.as_ref().filter(|_| is_boolean_call(self.corpus, inv)) {
                let rs = view.alias(r);
                for g in view.ifs_before(site).into_iter().filter(|g| *g > i) {
                    if view.cond_mentions(g, &rs) && view.exit_guard(g, site, exit) {
                        return Ok(Some(Validation { locus: view.locus(g), by_throw: view.throws_in_exit(g, site, exit) }));
                    }
                }
            }
            if depth < self.max_depth {
                let inner = Exit { throws_only: true, ..*exit };
                for callee in corpus_callees(self.corpus, inv) {
                    if !visited.insert((callee.clone(), q)) {
                        continue;
                    }
                    let cv = View::new(self.corpus, &callee)?;
                    let Some(p) = cv.def.params.get(q) else { continue };
                    let cm = cv.alias(&p.name);
                    if self.validates(&cv, &cm, None, &inner, depth + 1, visited)?.is_some() {
                        return Ok(Some(Validation { locus: view.locus(i), by_throw: true }));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Positions of the IPC arguments validated on the helper side of one chain.
    pub fn detect_param_validation(&self, chain: &CallChain) -> Result<(BTreeSet<Locus>, BTreeSet<usize>, BTreeSet<usize>)> {
        let arity = ipc_invoke(self.corpus, chain)?.args.len();
        let mut loci = BTreeSet::new();
        let mut positions = BTreeSet::new();
        let mut by_throw = BTreeSet::new();
        for p in 0..arity {
            let trace = backward_track(self.corpus, chain, p)?;
            for link in &trace.links {
                if link.members.is_empty() {
                    continue;
                }
                let view = View::new(self.corpus, &link.method)?;
                let found = self.validates(
                    &view,
                    &link.members,
                    Some(link.cutoff),
                    &self.helper_exit(),
                    0,
                    &mut BTreeSet::new(),
                )?;
                if let Some(v) = found {
                    loci.insert(v.locus);
                    positions.insert(p);
                    if v.by_throw {
                        by_throw.insert(p);
                    }
                    break;
                }
            }
        }
        Ok((loci, positions, by_throw))
    }

    /// Status calls whose result guards the IPC call.
    pub fn detect_caller_status(&self, chain: &CallChain) -> Result<BTreeSet<Locus>> {
        let mut loci = BTreeSet::new();
        for_links(self.corpus, chain, |view, cutoff| {
            for (i, inv) in view.invokes_before(Some(cutoff)) {
                let Some(r) = inv.result.as_ref().filter(|_| self.seeds.is_status_api(&inv.target)) else { continue };
                let rs = view.alias(r);
                for g in view.ifs_before(Some(cutoff)).into_iter().filter(|g| *g > i) {
                    if view.cond_mentions(g, &rs) && view.exit_guard(g, Some(cutoff), &self.helper_exit()) {
                        loci.insert(view.locus(i));
                        loci.insert(view.locus(g));
                    }
                }
            }
            Ok(())
        })?;
        Ok(loci)
    }

    /// Identity values (by accessor name) passed as IPC arguments.
    pub fn detect_identity_passing(&self, chain: &CallChain) -> Result<(BTreeSet<Locus>, IdentityPositions)> {
        let arity = ipc_invoke(self.corpus, chain)?.args.len();
        let mut loci = BTreeSet::new();
        let mut passed = BTreeSet::new();
        for p in 0..arity {
            let trace = backward_track(self.corpus, chain, p)?;
            if let Origin::CallResult { method, index, target } = &trace.origin {
                let name = target.simple_name();
                if self.vocab.is_identity_access(self.seeds, name) {
                    passed.insert((IdentityKind::for_accessor(name), p));
                    loci.insert(Locus { method: method.clone(), index: *index });
                }
            }
        }
        Ok((loci, passed))
    }

    /// The boolean IPC method a call reaches, directly or through one
    /// boolean wrapper.
    fn boolean_ipc_of(&self, inv: &Invoke) -> Option<MethodRef> {
        let is_bool_ipc = |t: &MethodRef| {
            self.registry.proxy_for_ipc_ref(t) && self.corpus.return_type(t) == Some("boolean")
        };
        if is_bool_ipc(&inv.target) {
            return Some(inv.target.clone());
        }
        if !is_boolean_call(self.corpus, inv) {
            return None;
        }
        for callee in corpus_callees(self.corpus, inv) {
            let def = self.corpus.method(&callee)?;
            let found = FlatBody::new(&def.body).invokes().find(|(_, i)| is_bool_ipc(&i.target)).map(|(_, i)| i.target.clone());
            if found.is_some() {
                return found;
            }
        }
        None
    }

    /// Another boolean IPC method of the same interface gating the IPC call.
    pub fn detect_env_check(&self, chain: &CallChain, ipc: &MethodRef) -> Result<(BTreeSet<Locus>, BTreeSet<MethodRef>)> {
        let mut loci = BTreeSet::new();
        let mut gates = BTreeSet::new();
        for_links(self.corpus, chain, |view, cutoff| {
            for (i, inv) in view.invokes_before(Some(cutoff)) {
                let Some(r) = &inv.result else { continue };
                let Some(gate) = self.boolean_ipc_of(inv) else { continue };
                if &gate == ipc || gate.class_name() != ipc.class_name() {
                    continue;
                }
                let rs = view.alias(r);
                for g in view.ifs_before(Some(cutoff)).into_iter().filter(|g| *g > i) {
                    if view.cond_mentions(g, &rs) && view.guard_or_gate(g, Some(cutoff), &self.helper_exit()) {
                        loci.insert(view.locus(i));
                        loci.insert(view.locus(g));
                        gates.insert(gate.clone());
                    }
                }
            }
            Ok(())
        })?;
        Ok((loci, gates))
    }

    fn int_limit(&self, view: &View<'_>, g: usize) -> bool {
        let Some(cond) = view.cond_of(g) else { return false };
        let [l, r] = cond.operands();
        (view.field_backed(l) && r.is_int_const()) || (view.field_backed(r) && l.is_int_const())
    }

    /// Result variables of `size`/`isEmpty` calls on field collections,
    /// optionally restricted to one field.
    fn size_results(&self, view: &View<'_>, field: Option<&str>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (_, inv) in view.flat.invokes() {
            let name = inv.target.simple_name();
            if name != "size" && name != "isEmpty" {
                continue;
            }
            let Some(Operand::Field(f)) = &inv.receiver else { continue };
            if field.is_some_and(|x| x != f) {
                continue;
            }
            if let Some(r) = &inv.result {
                out.extend(view.alias(r));
            }
        }
        out
    }

    /// Counter limits and listener-list bookkeeping guarding the IPC call.
    pub fn detect_dup_constraint(&self, chain: &CallChain) -> Result<BTreeSet<Locus>> {
        let rules = self.escape_rules();
        let mut loci = BTreeSet::new();
        for_links(self.corpus, chain, |view, cutoff| {
            let site = Some(cutoff);
            for g in view.ifs_before(site) {
                if self.int_limit(view, g) && view.guard_or_gate(g, site, &self.helper_exit()) {
                    loci.insert(view.locus(g));
                }
            }
            for p in view.def.params.iter().filter(|p| self.seeds.is_listener_type(&p.ty)) {
                let members = view.alias(&p.name);
                for s in view.flat.iter() {
                    let Statement::Invoke(inv) = s.stmt else { continue };
                    if !inv.args.iter().any(|a| operand_mentions(a, &members)) {
                        continue;
                    }
                    let Some(field) = crate::dataflow::mutated_collection(s.stmt, &rules) else { continue };
                    let sizes = self.size_results(view, Some(&field));
                    for g in view.ifs_before(site) {
                        if view.cond_mentions(g, &sizes) && view.guard_or_gate(g, site, &self.helper_exit()) {
                            loci.insert(view.locus(s.index));
                            loci.insert(view.locus(g));
                        }
                    }
                }
            }
            Ok(())
        })?;
        Ok(loci)
    }

    fn escape_rules(&self) -> EscapeRules<'_> {
        EscapeRules {
            collection_mutators: &self.seeds.collection_mutators,
            callbacks: self.callbacks,
            registration_methods: &self.seeds.registration_methods,
        }
    }

    /// Helper-side enforcement over every chain from the helper method to
    /// the IPC proxy.
    pub fn detect_helper(&self, ipc: &MethodRef, chains: &[CallChain]) -> Result<EnforcementSet> {
        let mut set = EnforcementSet::new(Side::Helper);
        for chain in chains {
            let mut one = EnforcementSet::new(Side::Helper);
            let (loci, positions, by_throw) = self.detect_param_validation(chain)?;
            for l in loci {
                one.add(EnforcementKind::ParamValidation, l);
            }
            one.validated_params = positions;
            one.throw_guarded = by_throw;
            for l in self.detect_caller_status(chain)? {
                one.add(EnforcementKind::CallerStatus, l);
            }
            let (loci, passed) = self.detect_identity_passing(chain)?;
            for l in loci {
                one.add(EnforcementKind::IdentityPassing, l);
            }
            one.identities_passed = passed;
            let (loci, gates) = self.detect_env_check(chain, ipc)?;
            for l in loci {
                one.add(EnforcementKind::EnvCheck, l);
            }
            one.env_gates = gates;
            for l in self.detect_dup_constraint(chain)? {
                one.add(EnforcementKind::DupConstraint, l);
            }
            set.merge(one);
        }
        Ok(set)
    }

    /// Service-side enforcement of the stub implementation `service`.
    pub fn detect_service_enforcements(&self, service: &MethodRef) -> Result<EnforcementSet> {
        let view = View::new(self.corpus, service)?;
        let mut set = EnforcementSet::new(Side::Service);
        let exit = self.service_exit();
        for (p, param) in view.def.params.iter().enumerate() {
            let members = view.alias(&param.name);
            if let Some(v) = self.validates(&view, &members, None, &exit, 0, &mut BTreeSet::new())? {
                set.add(EnforcementKind::ParamValidation, v.locus);
                set.validated_params.insert(p);
            }
        }
        let init: Labels = view
            .def
            .params
            .iter()
            .enumerate()
            .map(|(p, param)| (param.name.clone(), BTreeSet::from([Label::Param(p)])))
            .collect();
        let mut visited = BTreeSet::new();
        self.scan_service(&view, init, 0, &mut set, &mut visited)?;

        for g in view.ifs_before(None) {
            if !view.exit_guard(g, None, &exit) {
                continue;
            }
            let sizes = self.size_results(&view, None);
            if self.int_limit(&view, g) || view.cond_mentions(g, &sizes) {
                set.add(EnforcementKind::DupConstraint, view.locus(g));
            }
            for (i, inv) in view.invokes_before(Some(g)) {
                let Some(r) = &inv.result else { continue };
                if !view.cond_mentions(g, &view.alias(r)) {
                    continue;
                }
                if is_boolean_call(self.corpus, inv) || self.seeds.is_status_api(&inv.target) {
                    set.gate_calls.insert(inv.target.simple_name().to_string());
                }
                if self.seeds.is_status_api(&inv.target) {
                    set.add(EnforcementKind::CallerStatus, view.locus(i));
                }
            }
        }

        let rules = self.escape_rules();
        for (p, param) in view.def.params.iter().enumerate() {
            let mut report = rules.escape_analysis(service, view.def, &param.name)?;
            let mut visited = BTreeSet::new();
            self.deep_escapes(&view, &view.alias(&param.name), 0, &mut report, &mut visited)?;
            report.escapes = !report.escape_sites.is_empty();
            report.parameter_position = Some(p);
            if report.escapes {
                set.escape_hazards.push(report);
            }
        }
        Ok(set)
    }

    fn deep_escapes(
        &self,
        view: &View<'_>,
        members: &BTreeSet<String>,
        depth: usize,
        report: &mut EscapeReport,
        visited: &mut BTreeSet<(MethodRef, usize)>,
    ) -> Result<()> {
        if depth >= self.max_depth {
            return Ok(());
        }
        let rules = self.escape_rules();
        for (_, inv) in view.flat.invokes() {
            for (q, _) in inv.args.iter().enumerate().filter(|(_, a)| operand_mentions(a, members)) {
                for callee in corpus_callees(self.corpus, inv) {
                    if !visited.insert((callee.clone(), q)) {
                        continue;
                    }
                    let cv = View::new(self.corpus, &callee)?;
                    let Some(p) = cv.def.params.get(q) else { continue };
                    let inner = rules.escape_analysis(&callee, cv.def, &p.name)?;
                    report.escape_sites.extend(inner.escape_sites);
                    self.deep_escapes(&cv, &cv.alias(&p.name), depth + 1, report, visited)?;
                }
            }
        }
        Ok(())
    }

    fn scan_service(
        &self,
        view: &View<'_>,
        init: Labels,
        depth: usize,
        set: &mut EnforcementSet,
        visited: &mut BTreeSet<(MethodRef, Vec<BTreeSet<Label>>)>,
    ) -> Result<()> {
        let labels = propagate(view, self.seeds, init);
        let of = |op: &Operand| -> BTreeSet<Label> {
            op.as_loc().and_then(|l| labels.get(l.name()).cloned()).unwrap_or_default()
        };
        let exit = if depth == 0 { self.service_exit() } else { Exit { throws_only: true, handled: Some(self.seeds) } };

        for (i, inv) in view.flat.invokes() {
            let name = inv.target.simple_name();
            if is_permission_check(name) {
                set.add(EnforcementKind::PermissionCheck, view.locus(i));
            }
            let consumed: BTreeSet<Label> = inv.args.iter().flat_map(&of).collect();
            if self.vocab.is_identity_enforce(self.seeds, name) && !consumed.is_empty() {
                set.add(EnforcementKind::IdentityCheck, view.locus(i));
                cover(set, &consumed);
            }
        }
        for g in view.ifs_before(None) {
            if !view.exit_guard(g, None, &exit) {
                continue;
            }
            let Some(cond) = view.cond_of(g) else { continue };
            for op in cond.operands() {
                let ls = of(op);
                if ls.contains(&Label::Binder) {
                    set.add(EnforcementKind::IdentityCheck, view.locus(g));
                    cover(set, &ls);
                }
            }
        }
        if depth >= self.max_depth {
            return Ok(());
        }
        for (_, inv) in view.flat.invokes() {
            let arg_labels: Vec<BTreeSet<Label>> = inv.args.iter().map(&of).collect();
            if arg_labels.iter().all(BTreeSet::is_empty) {
                continue;
            }
            for callee in corpus_callees(self.corpus, inv) {
                if !visited.insert((callee.clone(), arg_labels.clone())) {
                    continue;
                }
                let cv = View::new(self.corpus, &callee)?;
                let init: Labels = cv
                    .def
                    .params
                    .iter()
                    .zip(&arg_labels)
                    .filter(|(_, ls)| !ls.is_empty())
                    .map(|(p, ls)| (p.name.clone(), ls.clone()))
                    .collect();
                self.scan_service(&cv, init, depth + 1, set, visited)?;
            }
        }
        Ok(())
    }
}

fn cover(set: &mut EnforcementSet, labels: &BTreeSet<Label>) {
    for l in labels {
        match l {
            Label::Param(p) => {
                set.identity_coverage.insert(*p);
            }
            Label::Binder => set.binder_identity = true,
        }
    }
}

/// `enforce…Permission` / `check…Permission`.
pub fn is_permission_check(name: &str) -> bool {
    (name.starts_with("enforce") || name.starts_with("check")) && name.ends_with("Permission")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Label {
    Param(usize),
    Binder,
}

type Labels = BTreeMap<String, BTreeSet<Label>>;

/// Flow-insensitive forward labelling: copies and call results carry the
/// labels of their inputs; Binder identity sources introduce `Binder`.
fn propagate(view: &View<'_>, seeds: &SeedConfig, mut labels: Labels) -> Labels {
    loop {
        let mut changed = false;
        for s in view.flat.iter() {
            let (target, incoming): (Option<String>, BTreeSet<Label>) = match s.stmt {
                Statement::Assign { lhs, rhs: Rvalue::Use(src) } => (
                    lhs.as_loc().map(|l| l.name().to_string()),
                    src.as_loc().and_then(|l| labels.get(l.name()).cloned()).unwrap_or_default(),
                ),
                Statement::Invoke(inv) => {
                    let mut ls: BTreeSet<Label> = inv
                        .args
                        .iter()
                        .filter_map(|a| a.as_loc())
                        .flat_map(|l| labels.get(l.name()).cloned().unwrap_or_default())
                        .collect();
                    if seeds.is_binder_source(&inv.target) {
                        ls.insert(Label::Binder);
                    }
                    (inv.result.clone(), ls)
                }
                _ => (None, BTreeSet::new()),
            };
            if let Some(t) = target {
                if !incoming.is_empty() {
                    let entry = labels.entry(t).or_default();
                    let before = entry.len();
                    entry.extend(incoming);
                    changed |= entry.len() != before;
                }
            }
        }
        if !changed {
            return labels;
        }
    }
}

/// Runs `f` on every chain method with the call site where the tracked
/// call leaves it.
fn for_links(corpus: &Corpus, chain: &CallChain, mut f: impl FnMut(&View<'_>, usize) -> Result<()>) -> Result<()> {
    for (m, site) in chain.methods.iter().zip(&chain.sites) {
        let view = View::new(corpus, m)?;
        f(&view, *site)?;
    }
    Ok(())
}

fn ipc_invoke<'a>(corpus: &'a Corpus, chain: &CallChain) -> Result<&'a Invoke> {
    if chain.methods.len() < 2 {
        return Err(Error::InvalidChain("chain has no IPC call".into()));
    }
    let (m, site) = chain.ipc_site();
    let def = corpus.method(m).ok_or_else(|| Error::UnknownMethod(m.clone()))?;
    find_invoke(&def.body, site).ok_or_else(|| Error::InvalidChain(format!("no call at {m}#{site}")))
}

fn find_invoke(body: &[Statement], site: usize) -> Option<&Invoke> {
    FlatBody::new(body).invoke_at(site)
}

impl ServiceRegistry {
    /// `target` names an IPC interface method.
    pub fn proxy_for_ipc_ref(&self, target: &MethodRef) -> bool {
        self.proxy_methods.contains_key(target)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpusgen::fixture_patterns;
    use crate::inconsistency::{mine_vocabulary, prepare, AnalysisConfig, VulnClass};

    fn sets(corpus: &Corpus) -> Vec<(EnforcementSet, EnforcementSet)> {
        let cfg = AnalysisConfig::default();
        let prep = prepare(corpus, &cfg).unwrap();
        let vocab = mine_vocabulary(&prep, &cfg).unwrap();
        let dctx = DetectorContext {
            corpus,
            registry: &prep.registry,
            seeds: &cfg.seeds,
            vocab: &vocab,
            callbacks: &prep.callbacks,
            max_depth: cfg.max_depth,
        };
        prep.pairing
            .pairs
            .iter()
            .zip(&prep.chains)
            .map(|(p, cs)| {
                (dctx.detect_helper(&p.ipc_signature, cs).unwrap(), dctx.detect_service_enforcements(&p.service).unwrap())
            })
            .collect()
    }

    #[test]
    fn fixture_helpers_carry_their_mechanism() {
        for fx in fixture_patterns() {
            let Some((_, _, class)) = fx.expected else { continue };
            let kind = match class {
                VulnClass::IllegalParameter => EnforcementKind::ParamValidation,
                VulnClass::FakeIdentity => EnforcementKind::IdentityPassing,
                VulnClass::FakeStatus => EnforcementKind::CallerStatus,
                VulnClass::EnvBypass => EnforcementKind::EnvCheck,
                VulnClass::IpcFlood => EnforcementKind::DupConstraint,
            };
            let corpus = Corpus::from_document(fx.corpus.clone()).unwrap();
            let all = sets(&corpus);
            assert!(all.iter().any(|(h, _)| h.has(kind)), "{}: helper lacks {kind:?}", fx.name);
            assert!(all.iter().all(|(_, s)| !s.has(kind) || kind == EnforcementKind::ParamValidation), "{}", fx.name);
        }
    }

    #[test]
    fn twin_services_close_the_gap() {
        for fx in fixture_patterns().into_iter().filter(|f| f.expected.is_none()) {
            let corpus = Corpus::from_document(fx.corpus.clone()).unwrap();
            let all = sets(&corpus);
            assert!(!all.is_empty(), "{}", fx.name);
            for (h, s) in all {
                assert!(h.validated_params.is_subset(&s.validated_params), "{}", fx.name);
                if h.has(EnforcementKind::DupConstraint) {
                    assert!(s.has(EnforcementKind::DupConstraint), "{}", fx.name);
                }
            }
        }
    }

    #[test]
    fn permission_check_names() {
        assert!(is_permission_check("enforceCallingPermission"));
        assert!(is_permission_check("checkCallingOrSelfPermission"));
        assert!(!is_permission_check("checkOp"));
        assert!(!is_permission_check("grantPermission"));
    }

    #[test]
    fn accessor_kinds() {
        assert_eq!(IdentityKind::for_accessor("getOpPackageName"), IdentityKind::PackageName);
        assert_eq!(IdentityKind::for_accessor("myPid"), IdentityKind::Pid);
        assert_eq!(IdentityKind::for_accessor("getCallerPackage"), IdentityKind::PackageName);
        assert_eq!(IdentityKind::for_accessor("readParentPid"), IdentityKind::Ppid);
        assert_eq!(IdentityKind::for_accessor("getSomething"), IdentityKind::Uid);
    }
}

//! Brute-force reference implementations and random input builders shared
//! by the property, CLI and acceptance tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use helper_audit::corpusgen::{GenSpec, Generated, Label};
use helper_audit::inconsistency::{AnalysisReport, VulnClass};
use helper_audit::ir::{Corpus, CorpusDocument};
use helper_audit::mining::Transaction;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

pub const ITEM_POOL: &[&str] = &["checkOp", "getUid", "noteOp", "size", "post", "query"];

/// Every itemset of size `1..=max_itemset` over the items present, with its
/// true support, kept under the seed rule: non-seed items must be globally
/// frequent, and the set must hold a seed or reach `min_support` itself.
pub fn exhaustive_itemsets(
    transactions: &[BTreeSet<String>],
    min_support: usize,
    max_itemset: usize,
    seeds: &BTreeSet<String>,
) -> BTreeMap<Vec<String>, usize> {
    let universe: Vec<String> = transactions.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let count = |items: &[String]| transactions.iter().filter(|t| items.iter().all(|i| t.contains(i))).count();
    let mut out = BTreeMap::new();
    for mask in 1u32..(1 << universe.len()) {
        let items: Vec<String> =
            universe.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| s.clone()).collect();
        if items.len() > max_itemset {
            continue;
        }
        let support = count(&items);
        if support == 0 {
            continue;
        }
        let non_seed_frequent = items.iter().filter(|i| !seeds.contains(*i)).all(|i| count(std::slice::from_ref(i)) >= min_support);
        let has_seed = items.iter().any(|i| seeds.contains(i));
        if non_seed_frequent && (has_seed || support >= min_support) {
            out.insert(items, support);
        }
    }
    out
}

/// Classic level-wise Apriori without seeds, as a second reference.
pub fn apriori(transactions: &[BTreeSet<String>], min_support: usize, max_itemset: usize) -> BTreeMap<Vec<String>, usize> {
    let count = |items: &BTreeSet<String>| transactions.iter().filter(|t| items.is_subset(t)).count();
    let mut out = BTreeMap::new();
    let mut level: BTreeSet<BTreeSet<String>> = transactions
        .iter()
        .flatten()
        .map(|i| BTreeSet::from([i.clone()]))
        .filter(|s| count(s) >= min_support)
        .collect();
    let mut k = 1;
    while !level.is_empty() && k <= max_itemset {
        for s in &level {
            out.insert(s.iter().cloned().collect(), count(s));
        }
        let mut next = BTreeSet::new();
        for a in &level {
            for b in &level {
                let u: BTreeSet<String> = a.union(b).cloned().collect();
                if u.len() == k + 1
                    && u.iter().all(|x| {
                        let mut sub = u.clone();
                        sub.remove(x);
                        level.contains(&sub)
                    })
                    && count(&u) >= min_support
                {
                    next.insert(u);
                }
            }
        }
        level = next;
        k += 1;
    }
    out
}

pub fn random_transactions<R: Rng>(rng: &mut R) -> Vec<BTreeSet<String>> {
    let n = rng.gen_range(0..=10);
    let width = rng.gen_range(1..=ITEM_POOL.len());
    (0..n)
        .map(|_| ITEM_POOL[..width].iter().filter(|_| rng.gen_bool(0.5)).map(|s| s.to_string()).collect())
        .collect()
}

pub fn as_transactions(sets: &[BTreeSet<String>]) -> Vec<Transaction> {
    sets.iter()
        .enumerate()
        .map(|(i, s)| Transaction { ipc_signature: format!("p.I.m{i}()"), items: s.clone() })
        .collect()
}

/// Random single-package hierarchy: up to three interface layers, then
/// classes with single inheritance, some abstract, some overriding `m()`.
pub fn random_hierarchy<R: Rng>(rng: &mut R) -> CorpusDocument {
    let mut classes: Vec<Value> = Vec::new();
    let mut layers: Vec<Vec<String>> = Vec::new();
    let mut total = 0;
    for layer in 0..rng.gen_range(1..=3) {
        let mut names = Vec::new();
        for k in 0..rng.gen_range(1..=3) {
            let name = format!("p.I{layer}x{k}");
            let supers: Vec<String> = match layers.last() {
                Some(prev) => {
                    let k = rng.gen_range(1..=prev.len().min(2));
                    prev.choose_multiple(rng, k).cloned().collect()
                }
                None => vec![],
            };
            let methods = if rng.gen_bool(0.5) { vec![abstract_m()] } else { vec![] };
            classes.push(json!({ "name": name, "package": "p", "kind": "interface", "interfaces": supers, "methods": methods }));
            names.push(name);
            total += 1;
        }
        layers.push(names);
    }
    let ifaces: Vec<String> = layers.concat();
    let mut concrete_names: Vec<String> = Vec::new();
    let n = rng.gen_range(1..=(30 - total));
    for i in 0..n {
        let name = format!("p.C{i}");
        let abstract_kind = rng.gen_bool(0.3);
        let superclass = if !concrete_names.is_empty() && rng.gen_bool(0.7) { concrete_names.choose(rng).cloned() } else { None };
        let k = rng.gen_range(0..=2);
        let interfaces: Vec<String> = ifaces.choose_multiple(rng, k).cloned().collect();
        let methods = match rng.gen_range(0..3) {
            0 => vec![concrete_m()],
            1 if abstract_kind => vec![abstract_m()],
            _ => vec![],
        };
        let mut c = json!({
            "name": name,
            "package": "p",
            "kind": if abstract_kind { "abstract" } else { "class" },
            "interfaces": interfaces,
            "methods": methods,
        });
        if let Some(s) = superclass {
            c["superclass"] = json!(s);
        }
        classes.push(c);
        concrete_names.push(name);
    }
    serde_json::from_value(json!({ "version": 1, "externals": [], "classes": classes })).expect("hierarchy IR")
}

fn abstract_m() -> Value {
    json!({ "name": "m", "signature": "m()", "returnType": "void", "modifiers": ["abstract"] })
}

fn concrete_m() -> Value {
    json!({ "name": "m", "signature": "m()", "returnType": "void", "body": [{ "op": "return" }] })
}

/// Callee set of a virtual `declared.m()` call by walking every class's
/// supertypes and then its superclass chain.
pub fn cha_oracle(doc: &CorpusDocument, declared: &str) -> BTreeSet<String> {
    let by_name: BTreeMap<&str, &helper_audit::ir::ClassDef> = doc.classes.iter().map(|c| (c.name.as_str(), c)).collect();
    let reaches = |from: &str| -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == declared {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            if let Some(c) = by_name.get(n) {
                stack.extend(c.superclass.as_deref());
                stack.extend(c.interfaces.iter().map(String::as_str));
            }
        }
        false
    };
    let mut out = BTreeSet::new();
    for c in doc.classes.iter().filter(|c| c.is_concrete() && reaches(&c.name)) {
        let mut cur = Some(c);
        while let Some(k) = cur {
            if k.method("m()").is_some_and(|m| !m.is_abstract()) {
                out.insert(format!("{}.m()", k.name));
                break;
            }
            cur = k.superclass.as_deref().and_then(|s| by_name.get(s).copied());
        }
    }
    out
}

pub fn random_spec<R: Rng>(rng: &mut R) -> GenSpec {
    let per_class = VulnClass::ALL.iter().map(|c| (*c, rng.gen_range(0..=3))).collect();
    GenSpec {
        seed: rng.gen(),
        per_class_counts: per_class,
        consistent_pairs: rng.gen_range(0..=6),
        noise_classes: rng.gen_range(0..=6),
        permission_mix: [0.0, 0.3, 0.7][rng.gen_range(0..3)],
    }
}

pub type Key = (String, String, VulnClass);

pub fn label_keys<'a>(labels: impl IntoIterator<Item = &'a Label>) -> BTreeSet<Key> {
    labels.into_iter().map(|l| (l.ipc_signature.clone(), l.helper.clone(), l.vuln_class)).collect()
}

pub fn finding_keys(report: &AnalysisReport, suppressed: bool) -> BTreeSet<Key> {
    report
        .findings
        .iter()
        .filter(|f| f.suppressed == suppressed)
        .map(|f| (f.ipc_signature.to_string(), f.helper.to_string(), f.vuln_class))
        .collect()
}

pub fn corpus_of(g: &Generated) -> Corpus {
    Corpus::from_document(g.corpus.clone()).expect("generated corpus resolves")
}

/// Findings the truth expects to survive the permission filter.
pub fn expected_unsuppressed(g: &Generated) -> BTreeSet<Key> {
    label_keys(g.truth.labels.difference(&g.truth.suppressed))
}

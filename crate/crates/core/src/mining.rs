//! Seeded FP-Growth over per-chain method-name transactions, and keyword
//! filtering of the mined names into identity-access and identity-enforce
//! vocabularies.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::callgraph::CallChain;
use crate::config::SeedConfig;
use crate::error::{Error, Result};
use crate::ir::walk::FlatBody;
use crate::ir::{Corpus, MethodRef};

pub const DEFAULT_MIN_SUPPORT: usize = 3;
pub const DEFAULT_SEED_BOOST: usize = 1000;
pub const DEFAULT_MAX_ITEMSET: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Transaction {
    pub ipc_signature: String,
    pub items: BTreeSet<String>,
}

/// Simple names of `methods` plus every callee named inside them.
pub fn transaction_for<'a>(
    corpus: &Corpus,
    ipc_signature: &str,
    methods: impl IntoIterator<Item = &'a MethodRef>,
) -> Transaction {
    let mut items = BTreeSet::new();
    for m in methods {
        items.insert(m.simple_name().to_string());
        if let Some(def) = corpus.method(m) {
            for (_, inv) in FlatBody::new(&def.body).invokes() {
                items.insert(inv.target.simple_name().to_string());
            }
        }
    }
    Transaction { ipc_signature: ipc_signature.to_string(), items }
}

/// One transaction per chain, keyed by the IPC method the chain reaches.
pub fn build_transactions(corpus: &Corpus, chains: &[(MethodRef, CallChain)]) -> Vec<Transaction> {
    chains
        .iter()
        .map(|(ipc, chain)| transaction_for(corpus, ipc.as_str(), &chain.methods))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MiningParams {
    pub min_support: usize,
    pub seed_boost: usize,
    pub max_itemset: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            min_support: DEFAULT_MIN_SUPPORT,
            seed_boost: DEFAULT_SEED_BOOST,
            max_itemset: DEFAULT_MAX_ITEMSET,
        }
    }
}

impl MiningParams {
    pub fn check(&self) -> Result<()> {
        if self.min_support < 1 {
            return Err(Error::InvalidConfig("min support must be at least 1".into()));
        }
        if self.seed_boost < self.min_support {
            return Err(Error::InvalidConfig("seed boost must be at least the min support".into()));
        }
        if self.max_itemset < 1 {
            return Err(Error::InvalidConfig("itemset size cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FrequentItemset {
    pub items: Vec<String>,
    pub support: usize,
}

struct Node {
    item: usize,
    count: usize,
    parent: Option<usize>,
    children: BTreeMap<usize, usize>,
}

/// FP-tree over item ids; smaller ids sit closer to the root.
struct FpTree {
    nodes: Vec<Node>,
    header: BTreeMap<usize, Vec<usize>>,
}

impl FpTree {
    fn new() -> Self {
        FpTree {
            nodes: vec![Node { item: usize::MAX, count: 0, parent: None, children: BTreeMap::new() }],
            header: BTreeMap::new(),
        }
    }

    fn insert(&mut self, path: &[usize], count: usize) {
        let mut cur = 0;
        for &item in path {
            cur = match self.nodes[cur].children.get(&item) {
                Some(&child) => child,
                None => {
                    let id = self.nodes.len();
                    self.nodes.push(Node { item, count: 0, parent: Some(cur), children: BTreeMap::new() });
                    self.nodes[cur].children.insert(item, id);
                    self.header.entry(item).or_default().push(id);
                    id
                }
            };
            self.nodes[cur].count += count;
        }
    }

    fn support(&self, item: usize) -> usize {
        self.header[&item].iter().map(|&n| self.nodes[n].count).sum()
    }

    /// Prefix paths ending above each occurrence of `item`.
    fn pattern_base(&self, item: usize) -> Vec<(Vec<usize>, usize)> {
        self.header[&item]
            .iter()
            .map(|&n| {
                let mut path = Vec::new();
                let mut cur = self.nodes[n].parent;
                while let Some(p) = cur {
                    if p == 0 {
                        break;
                    }
                    path.push(self.nodes[p].item);
                    cur = self.nodes[p].parent;
                }
                path.reverse();
                (path, self.nodes[n].count)
            })
            .collect()
    }
}

struct Miner<'a> {
    names: &'a [String],
    is_seed: Vec<bool>,
    params: MiningParams,
    out: Vec<FrequentItemset>,
}

impl Miner<'_> {
    fn keep(&self, itemset_has_seed: bool, support: usize) -> bool {
        support >= 1 && (itemset_has_seed || support >= self.params.min_support)
    }

    fn mine(&mut self, tree: &FpTree, suffix: &mut Vec<usize>, suffix_seeded: bool) {
        let items: Vec<usize> = tree.header.keys().rev().copied().collect();
        for item in items {
            let support = tree.support(item);
            let seeded = suffix_seeded || self.is_seed[item];
            suffix.push(item);
            if self.keep(seeded, support) {
                let mut names: Vec<String> = suffix.iter().map(|&i| self.names[i].clone()).collect();
                names.sort();
                self.out.push(FrequentItemset { items: names, support });
            }
            if suffix.len() < self.params.max_itemset {
                let base = tree.pattern_base(item);
                let base_seeded = base.iter().any(|(p, _)| p.iter().any(|&i| self.is_seed[i]));
                if seeded || base_seeded || support >= self.params.min_support {
                    // Without a seed in reach, anything below min support is dead.
                    let threshold = if seeded || base_seeded { 1 } else { self.params.min_support };
                    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                    for (path, c) in &base {
                        for &i in path {
                            *counts.entry(i).or_default() += c;
                        }
                    }
                    let mut cond = FpTree::new();
                    for (path, c) in &base {
                        let kept: Vec<usize> = path.iter().copied().filter(|i| counts[i] >= threshold).collect();
                        if !kept.is_empty() {
                            cond.insert(&kept, *c);
                        }
                    }
                    if !cond.header.is_empty() {
                        self.mine(&cond, suffix, seeded);
                    }
                }
            }
            suffix.pop();
        }
    }
}

/// Frequent itemsets with seed exemption.
///
/// An itemset is reported when every non-seed item in it is globally
/// frequent and either it contains a seed (any true support ≥ 1) or its true
/// support reaches `min_support`. Seeds order first in the tree as if their
/// count were `max(count, seed_boost)`. Supports are true counts. Output is
/// sorted by support descending, then itemset.
pub fn fp_growth(
    transactions: &[Transaction],
    params: MiningParams,
    seeds: &BTreeSet<String>,
) -> Result<Vec<FrequentItemset>> {
    params.check()?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in transactions {
        for i in &t.items {
            *counts.entry(i.as_str()).or_default() += 1;
        }
    }
    let mut order: Vec<(&str, usize)> = counts
        .iter()
        .filter(|(name, c)| seeds.contains(**name) || **c >= params.min_support)
        .map(|(name, c)| {
            let key = if seeds.contains(*name) { (*c).max(params.seed_boost) } else { *c };
            (*name, key)
        })
        .collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let names: Vec<String> = order.iter().map(|(n, _)| n.to_string()).collect();
    let ids: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, (n, _))| (*n, i)).collect();

    let mut tree = FpTree::new();
    for t in transactions {
        let mut path: Vec<usize> = t.items.iter().filter_map(|i| ids.get(i.as_str()).copied()).collect();
        path.sort_unstable();
        if !path.is_empty() {
            tree.insert(&path, 1);
        }
    }
    let mut miner = Miner {
        is_seed: names.iter().map(|n| seeds.contains(n)).collect(),
        names: &names,
        params,
        out: Vec::new(),
    };
    miner.mine(&tree, &mut Vec::new(), false);
    let mut out = miner.out;
    out.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.items.cmp(&b.items)));
    Ok(out)
}

/// Lowercase camelCase/snake_case tokens of an identifier plus the
/// concatenation of each adjacent pair, so `getCallingUserId` also yields
/// `userid`.
pub fn tokenize(name: &str) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    let chars: Vec<char> = name.chars().collect();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' || c == '$' || c == '.' {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if c.is_uppercase() && !cur.is_empty() {
            let prev_upper = chars[i - 1].is_uppercase();
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if !prev_upper || next_lower {
                words.push(std::mem::take(&mut cur));
            }
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    let mut out = words.clone();
    for w in words.windows(2) {
        out.push(format!("{}{}", w[0], w[1]));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum MinedClass {
    IdentityAccess,
    IdentityEnforce,
}

/// Classifies a name by its leading verb when it has one, otherwise by which
/// token set it touches (access first). Names with neither fall to enforce.
pub fn classify(name: &str, seeds: &SeedConfig) -> MinedClass {
    let tokens = tokenize(name);
    let has = |set: &[String], t: &str| set.iter().any(|s| s == t);
    if let Some(first) = tokens.first() {
        if has(&seeds.classify_enforce_tokens, first) {
            return MinedClass::IdentityEnforce;
        }
        if has(&seeds.classify_access_tokens, first) {
            return MinedClass::IdentityAccess;
        }
    }
    if tokens.iter().any(|t| has(&seeds.classify_access_tokens, t)) {
        MinedClass::IdentityAccess
    } else {
        MinedClass::IdentityEnforce
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MinedVocabulary {
    pub identity_access_mined: BTreeSet<String>,
    pub identity_enforce_mined: BTreeSet<String>,
    pub support_counts: BTreeMap<String, usize>,
}

impl MinedVocabulary {
    pub fn is_identity_access(&self, seeds: &SeedConfig, name: &str) -> bool {
        seeds.identity_access.iter().any(|s| s == name) || self.identity_access_mined.contains(name)
    }

    pub fn is_identity_enforce(&self, seeds: &SeedConfig, name: &str) -> bool {
        seeds.identity_enforce.iter().any(|s| s == name) || self.identity_enforce_mined.contains(name)
    }
}

pub fn seed_items(seeds: &SeedConfig) -> BTreeSet<String> {
    seeds.identity_access.iter().chain(&seeds.identity_enforce).cloned().collect()
}

/// Keeps non-seed names that share an itemset of support ≥ `min_support`
/// with a seed and whose tokens hit a keyword.
pub fn keyword_filter(candidates: &[FrequentItemset], seeds: &SeedConfig, min_support: usize) -> MinedVocabulary {
    let seed_set = seed_items(seeds);
    let singles: BTreeMap<&str, usize> = candidates
        .iter()
        .filter(|c| c.items.len() == 1)
        .map(|c| (c.items[0].as_str(), c.support))
        .collect();
    let mut vocab = MinedVocabulary::default();
    for set in candidates {
        if set.support < min_support || !set.items.iter().any(|i| seed_set.contains(i)) {
            continue;
        }
        for name in set.items.iter().filter(|i| !seed_set.contains(*i)) {
            if !tokenize(name).iter().any(|t| seeds.keywords.contains(t)) {
                continue;
            }
            match classify(name, seeds) {
                MinedClass::IdentityAccess => vocab.identity_access_mined.insert(name.clone()),
                MinedClass::IdentityEnforce => vocab.identity_enforce_mined.insert(name.clone()),
            };
            let support = singles.get(name.as_str()).copied().unwrap_or(set.support);
            vocab.support_counts.insert(name.clone(), support);
        }
    }
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(items: &[&str]) -> Transaction {
        Transaction { ipc_signature: "I.f()".into(), items: items.iter().map(|s| s.to_string()).collect() }
    }

    fn rows(out: &[FrequentItemset]) -> Vec<(String, usize)> {
        out.iter().map(|f| (f.items.join(","), f.support)).collect()
    }

    fn params(min_support: usize) -> MiningParams {
        MiningParams { min_support, ..MiningParams::default() }
    }

    #[test]
    fn small_example() {
        let t = vec![tx(&["a", "b"]), tx(&["a", "b"]), tx(&["a", "b"]), tx(&["a", "c"])];
        let out = fp_growth(&t, params(3), &BTreeSet::new()).unwrap();
        assert_eq!(rows(&out), vec![("a".into(), 4), ("a,b".into(), 3), ("b".into(), 3)]);

        let seeds = BTreeSet::from(["c".to_string()]);
        let out = fp_growth(&t, params(3), &seeds).unwrap();
        assert_eq!(
            rows(&out),
            vec![("a".into(), 4), ("a,b".into(), 3), ("b".into(), 3), ("a,c".into(), 1), ("c".into(), 1)]
        );
    }

    #[test]
    fn empty_and_invalid() {
        assert!(fp_growth(&[], params(3), &BTreeSet::new()).unwrap().is_empty());
        assert!(matches!(fp_growth(&[], params(0), &BTreeSet::new()), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn itemset_cap() {
        let t = vec![tx(&["a", "b", "c"]); 3];
        let p = MiningParams { max_itemset: 2, ..params(1) };
        let out = fp_growth(&t, p, &BTreeSet::new()).unwrap();
        assert!(out.iter().all(|f| f.items.len() <= 2));
        assert_eq!(out.len(), 6);
    }

    #[test]
    fn tokens() {
        assert_eq!(
            tokenize("getCallingUserId"),
            vec!["get", "calling", "user", "id", "getcalling", "callinguser", "userid"]
        );
        assert_eq!(tokenize("check_op"), vec!["check", "op", "checkop"]);
        assert_eq!(tokenize("getUID"), vec!["get", "uid", "getuid"]);
        assert_eq!(tokenize("parseHTTPHeader")[..3], ["parse", "http", "header"]);
    }

    #[test]
    fn filter_and_classify() {
        let seeds = SeedConfig::default();
        let t = vec![
            tx(&["getCallingUid", "getCallingUserId", "drawFrame"]),
            tx(&["getCallingUid", "getCallingUserId", "drawFrame"]),
            tx(&["getCallingUid", "getCallingUserId", "drawFrame"]),
            tx(&["checkPermission", "enforceAccessPermission"]),
            tx(&["checkPermission", "enforceAccessPermission"]),
            tx(&["checkPermission", "enforceAccessPermission"]),
        ];
        let mut s = seed_items(&seeds);
        s.insert("getCallingUid".into());
        let out = fp_growth(&t, MiningParams::default(), &s).unwrap();
        let mut seeds2 = seeds.clone();
        seeds2.identity_access.push("getCallingUid".into());
        let v = keyword_filter(&out, &seeds2, 3);
        assert_eq!(v.identity_access_mined, BTreeSet::from(["getCallingUserId".to_string()]));
        assert_eq!(v.identity_enforce_mined, BTreeSet::from(["enforceAccessPermission".to_string()]));
        assert_eq!(v.support_counts["getCallingUserId"], 3);
        assert_eq!(classify("enforceCallingPermission", &seeds), MinedClass::IdentityEnforce);
    }
}

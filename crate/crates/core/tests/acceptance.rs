//! Acceptance run: one PASS/FAIL line per criterion. Built without the
//! libtest harness so the lines always print.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use helper_audit::corpusgen::{fixture_patterns, generate, GenSpec};
use helper_audit::detectors::{EnforcementSet, Side};
use helper_audit::inconsistency::{
    analyze, apply_permission_filter, compare_pair, AnalysisConfig, AnalysisReport, CompareOptions, PermissionEntry,
    PermissionLevel, PermissionMap, VulnClass,
};
use helper_audit::ir::{validate_corpus, Corpus};
use helper_audit::mining::{fp_growth, MiningParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const RUN_BUDGET: Duration = Duration::from_secs(5);
const ORACLE_CASES: usize = 200;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn analyze_cli(dir: &Path, extra: &[&str], out: &str) -> Result<(i32, Duration), String> {
    let d = |f: &str| dir.join(f).to_str().unwrap().to_string();
    let mut args = vec![
        "analyze".to_string(),
        "--corpus".into(),
        d("corpus.json"),
        "--permissions".into(),
        d("permissions.json"),
        "--restrictions".into(),
        d("restrictions.json"),
        "--out".into(),
        d(out),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_helper-audit"))
        .args(&args)
        .env_remove("HELPER_AUDIT_SEEDS")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let code = o.status.code().ok_or("killed by signal")?;
    if code == 2 || code == 1 {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    Ok((code, elapsed))
}

fn write_generated(dir: &Path, spec: &GenSpec) -> helper_audit::corpusgen::Generated {
    let g = generate(spec).expect("valid spec");
    for (name, contents) in g.files() {
        std::fs::write(dir.join(name), contents).unwrap();
    }
    g
}

fn read_report(path: &Path) -> AnalysisReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn labelled_corpus_exactness() -> Outcome {
    let mut slowest = Duration::ZERO;
    for seed in 0..20u64 {
        let spec = GenSpec::uniform(1000 + seed, 5, 20, 50, 0.2);
        let dir = tempfile::tempdir().unwrap();
        let g = write_generated(dir.path(), &spec);
        let (code, elapsed) = analyze_cli(dir.path(), &[], "report.json")?;
        slowest = slowest.max(elapsed);
        let report = read_report(&dir.path().join("report.json"));
        let all: BTreeSet<Key> = finding_keys(&report, false).union(&finding_keys(&report, true)).cloned().collect();
        let want = label_keys(&g.truth.labels);
        let missed = want.difference(&all).count();
        let extra = all.difference(&want).count();
        check(missed == 0 && extra == 0, || format!("seed {}: {missed} missed, {extra} false positives", spec.seed))?;
        check(finding_keys(&report, true) == label_keys(&g.truth.suppressed), || format!("seed {}: suppression mismatch", spec.seed))?;
        let expect_code = if expected_unsuppressed(&g).is_empty() { 0 } else { 3 };
        check(code == expect_code, || format!("seed {}: exit {code}", spec.seed))?;
        check(elapsed < RUN_BUDGET, || format!("seed {}: {elapsed:?} over budget", spec.seed))?;
    }
    Ok(format!("20 corpora, recall 100%, 0 false positives, slowest run {:.2}s (budget {}s)", slowest.as_secs_f64(), RUN_BUDGET.as_secs()))
}

fn pattern_fixtures() -> Outcome {
    let fixtures = fixture_patterns();
    let mut patterns = 0;
    let mut twins = 0;
    for fx in &fixtures {
        let corpus = Corpus::from_document(fx.corpus.clone()).map_err(|e| format!("{}: {e}", fx.name))?;
        check(validate_corpus(&corpus).is_empty(), || format!("{}: diagnostics", fx.name))?;
        let report = analyze(&corpus, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
        let got: Vec<Key> = finding_keys(&report, false).into_iter().collect();
        let want: Vec<Key> = fx.expected.clone().into_iter().collect();
        check(got == want, || format!("{}: got {got:?}", fx.name))?;
        if fx.expected.is_some() {
            patterns += 1;
        } else {
            twins += 1;
        }
    }
    check(patterns == 5 && twins >= 5, || format!("{patterns} patterns, {twins} twins"))?;
    Ok(format!("{patterns} patterns matched, {twins} consistent twins silent"))
}

fn mined_map(ts: &[BTreeSet<String>], params: MiningParams, seeds: &BTreeSet<String>) -> BTreeMap<Vec<String>, usize> {
    fp_growth(&as_transactions(ts), params, seeds)
        .unwrap()
        .into_iter()
        .map(|f| {
            let mut items = f.items;
            items.sort();
            (items, f.support)
        })
        .collect()
}

fn fp_growth_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seeded_cases = 0;
    for case in 0..ORACLE_CASES {
        let ts = random_transactions(&mut rng);
        let min_support = rng.gen_range(1..=3);
        let params = MiningParams { min_support, ..MiningParams::default() };
        let got = mined_map(&ts, params, &BTreeSet::new());
        check(got == apriori(&ts, min_support, params.max_itemset), || format!("unseeded case {case}"))?;

        let k = rng.gen_range(1..=2);
        let seeds: BTreeSet<String> = ITEM_POOL.choose_multiple(&mut rng, k).map(|s| s.to_string()).collect();
        let got = mined_map(&ts, params, &seeds);
        let want = exhaustive_itemsets(&ts, min_support, params.max_itemset, &seeds);
        check(got == want, || format!("seeded case {case}: {got:?} vs {want:?}"))?;
        seeded_cases += 1;
    }
    Ok(format!("{ORACLE_CASES} unseeded + {seeded_cases} seeded transaction sets equal the brute-force enumeration"))
}

fn cha_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut queries = 0;
    for case in 0..ORACLE_CASES {
        let doc = random_hierarchy(&mut rng);
        let corpus = Corpus::from_document(doc.clone()).map_err(|e| format!("case {case}: {e}"))?;
        for c in &doc.classes {
            let got: BTreeSet<String> = corpus.cha_targets(&c.name, "m()").iter().map(|t| t.method_ref().to_string()).collect();
            check(got == cha_oracle(&doc, &c.name), || format!("case {case}, declared {}", c.name))?;
            queries += 1;
        }
    }
    Ok(format!("{ORACLE_CASES} hierarchies, {queries} dispatch queries equal the subtype walk"))
}

fn superset_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let subset = |rng: &mut ChaCha8Rng| -> BTreeSet<usize> { (0..5).filter(|_| rng.gen_bool(0.4)).collect() };
    for case in 0..1000 {
        let (h, s, guarded) = (subset(&mut rng), subset(&mut rng), subset(&mut rng));
        let mut helper = EnforcementSet::new(Side::Helper);
        helper.validated_params = h.clone();
        helper.throw_guarded = guarded.clone();
        let mut service = EnforcementSet::new(Side::Service);
        service.validated_params = s.clone();
        let hazard = h.difference(&s).any(|p| guarded.contains(p));
        for require_hazard in [false, true] {
            let emitted = compare_pair(&helper, &service, CompareOptions { require_hazard })
                .iter()
                .any(|c| c.class == VulnClass::IllegalParameter);
            let expect = !h.is_subset(&s) && (hazard || !require_hazard);
            check(emitted == expect, || format!("case {case}: H={h:?} S={s:?} hazard-gated={require_hazard}"))?;
        }
    }
    Ok("1000 (H, S) pairs, with and without the hazard requirement".into())
}

fn permission_suppression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for case in 0..10 {
        let g = generate(&GenSpec::uniform(rng.gen(), 2, 4, 5, 0.5)).unwrap();
        let corpus = corpus_of(&g);
        let report = analyze(&corpus, &AnalysisConfig { permissions: g.permissions.clone(), ..AnalysisConfig::default() })
            .map_err(|e| e.to_string())?;
        for f in &report.findings {
            let protected = g.permissions.level(f.ipc_signature.as_str()).is_some_and(|(l, _)| l.protects());
            check(f.suppressed == protected, || format!("case {case}: {} suppressed={}", f.ipc_signature, f.suppressed))?;
        }
        let ipcs: Vec<String> = report.pairs.iter().map(|p| p.ipc_signature.to_string()).collect();
        let mut pmap = PermissionMap::default();
        let mut prev = usize::MAX;
        for i in 0..12 {
            let sig = ipcs.choose(&mut rng).unwrap().clone();
            let level = [PermissionLevel::Normal, PermissionLevel::Dangerous, PermissionLevel::Signature, PermissionLevel::SignatureOrSystem]
                [rng.gen_range(0..4)];
            pmap.entries.entry(sig).or_default().push(PermissionEntry { permission: format!("p.P{i}"), level });
            let now = apply_permission_filter(report.findings.clone(), &pmap).iter().filter(|f| !f.suppressed).count();
            check(now <= prev, || format!("case {case}: unsuppressed rose {prev} -> {now}"))?;
            prev = now;
            checked += 1;
        }
    }
    Ok(format!("suppression exact on 10 corpora, monotone over {checked} map extensions"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    write_generated(dir.path(), &GenSpec::uniform(77, 5, 20, 50, 0.2));
    analyze_cli(dir.path(), &["--parallel", "1"], "a.json")?;
    analyze_cli(dir.path(), &["--parallel", "1"], "b.json")?;
    analyze_cli(dir.path(), &["--parallel", "8"], "c.json")?;
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    let (a, b, c) = (read("a.json"), read("b.json"), read("c.json"));
    check(a == b, || "consecutive runs differ".into())?;
    check(a == c, || "--parallel 8 differs from --parallel 1".into())?;
    Ok(format!("3 runs byte-identical ({} bytes)", a.len()))
}

fn tally_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut findings = 0;
    for case in 0..50 {
        let spec = random_spec(&mut rng);
        let g = generate(&spec).unwrap();
        let cfg = AnalysisConfig { permissions: g.permissions.clone(), restrictions: g.restrictions.clone(), ..AnalysisConfig::default() };
        let report = analyze(&corpus_of(&g), &cfg).map_err(|e| e.to_string())?;
        let unsuppressed = report.findings.iter().filter(|f| !f.suppressed).count();
        let t = &report.tallies;
        let class_sum: usize = t.by_class.values().map(|c| c.total).sum();
        let category_sum = t.totals.whitelist + t.totals.greylist + t.totals.blacklist;
        check(t.totals.total == unsuppressed && class_sum == unsuppressed && category_sum == unsuppressed, || {
            format!("case {case}: totals {} / classes {class_sum} / categories {category_sum} vs {unsuppressed}", t.totals.total)
        })?;
        findings += unsuppressed;
    }
    Ok(format!("50 corpora, {findings} unsuppressed findings all tallied once"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("labelled-corpus exactness", labelled_corpus_exactness),
        ("pattern fixtures", pattern_fixtures),
        ("fp-growth oracle equivalence", fp_growth_oracle),
        ("cha oracle equivalence", cha_oracle_equivalence),
        ("superset rule", superset_rule),
        ("permission suppression", permission_suppression),
        ("determinism", determinism),
        ("restriction tally conservation", tally_conservation),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

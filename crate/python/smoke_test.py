"""Smoke test for the helper_audit_py extension.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import json
import sys

import helper_audit_py as ha


def main() -> int:
    for name, corpus, expected in ha.fixtures():
        assert corpus.validate() == [], name
        got = [f.key() for f in ha.analyze(corpus).findings if not f.suppressed]
        want = [expected] if expected else []
        assert got == want, (name, got, want)
    print(f"fixtures ok ({len(ha.fixtures())})")

    spec = json.dumps({"seed": 7, "perClassCounts": {c: 2 for c in
            ["illegalParameter", "fakeIdentity", "fakeStatus", "envBypass", "ipcFlood"]},
            "consistentPairs": 3, "noiseClasses": 5, "permissionMix": 0.3})
    g = ha.generate(spec)
    corpus = g.corpus
    assert corpus.digest == ha.generate(spec).corpus.digest
    report = ha.analyze(corpus, permissions=g.permissions_json, restrictions=g.restrictions_json, parallel=4)
    found = {f.key() for f in report.findings if not f.suppressed}
    hidden = {f.key() for f in report.findings if f.suppressed}
    labels, suppressed = set(g.labels), set(g.suppressed)
    assert found == labels - suppressed, found ^ (labels - suppressed)
    assert hidden == suppressed
    assert len(corpus.pairs()) == report.pair_count
    assert json.loads(report.to_json())["corpusDigest"] == corpus.digest
    assert report.to_markdown().startswith("#")
    print(report.summary())

    access, enforce = ha.mine(corpus)
    print(f"mined access={len(access)} enforce={len(enforce)}")

    try:
        ha.Corpus.from_json("{not json")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed corpus accepted")
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())

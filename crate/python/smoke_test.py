"""Smoke test for the `snm` Python extension.

Build and run from the repository root:

    cargo build -p snm-py --features extension-module --release
    cp target/release/libsnm.so python/snm.so
    python3 python/smoke_test.py
"""

import json
import os
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, HERE)

import snm  # noqa: E402

EXAMPLES = os.path.join(HERE, "..", "docs", "examples")


def main():
    net = snm.ServiceNetwork.load(os.path.join(EXAMPLES, "loan_network.json"))
    assert net.validate() == [], net.validate()
    assert len(net.service_ids) == 5 and len(net.node_ids) == 2
    assert net.resolve_node("customer_accounting") == ["check_credit", "book_loan"]
    assert snm.find_composition(net, ["check_credit", "negotiate_loan"]) == "credit_administration"

    assert snm.classify("AVAILABILITY") == "TIME_BASED"
    assert snm.classify("RELIABILITY") == "SIZE_BASED"
    try:
        snm.classify("LATENCY")
        raise AssertionError("unknown KPI accepted")
    except KeyError:
        pass

    db = snm.TelemetryDb()
    db.append_probe(0, "s", False)
    db.append_probe(10_000, "s", True)
    for i in range(10):
        db.append_invocation(i * 100, "s", 20, i < 7, 100, 1)
    assert snm.availability(db, "s", 0, 50_000)["downtime_ms"] == 10_000
    assert snm.reliability(db, "s", 0, 1_000) == 0.7
    assert snm.throughput(db, "s", 0, 1_000) == 10.0
    assert len(db.query("s", 0, 1_000, "INVOCATION")) == 10

    log = snm.generate(net, seed=0, duration_ms=60_000, rate=5.0)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "t.log")
        log.save(path)
        assert snm.TelemetryDb.load([path]).to_log() == log.to_log()

    kpis = snm.compute_kpis(net, log, "customer_accounting", 0, 60_000)
    assert kpis["kpi_values"]["AVAILABILITY"]["value"] == 1.0

    with open(os.path.join(EXAMPLES, "query_customer_accounting.json")) as f:
        query = f.read()
    decision = snm.decide(net, log, query)
    assert decision["outcome"] == "USE_COMPOSITION_AS_IS", decision["outcome"]
    assert decision["subject"]["node_id"] == "customer_accounting"

    cpu = snm.generate(net, scenario_json=json.dumps({"kind": "RESOURCE_EXHAUSTION", "resource": "cpu", "start_ms": 0}))
    with open(os.path.join(EXAMPLES, "query_check_credit.json")) as f:
        decision = snm.decide(net, cpu, f.read())
    assert decision["outcome"] == "PHYSICAL_RESOURCE_NOT_AVAILABLE", decision["outcome"]

    profiles = snm.default_profiles()
    assert profiles["HTTP"]["base_response_ms"] > profiles["UDP"]["base_response_ms"]
    print("python smoke test ok")


if __name__ == "__main__":
    main()

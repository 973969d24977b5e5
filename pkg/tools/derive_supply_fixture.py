#!/usr/bin/env python3
"""Derive the supply-chain audit fixture and its expected findings table.

Produces tests/data/supply_fixture.json: 20 component registrations, a
policy with 2 denylisted suppliers and 3 known-bad component digests, and
the expected finding per record. The expectations are computed here with a
plain, self-contained transcription of the policy rules (stdlib only), so
the table is independent of the package implementation under test.

Usage:
  python3 tools/derive_supply_fixture.py            # rewrite the fixture
  python3 tools/derive_supply_fixture.py --check    # verify it reproduces
"""

import hashlib
import json
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "supply_fixture.json"

ALLOWLIST = ["acme", "initech"]
DENYLIST = ["evilcorp", "shadybros"]
UNKNOWN_ACTION = "warn"

# Suppliers are assigned round-robin so the corpus covers clean records,
# denylisted suppliers, unknown suppliers, and their combinations.
SUPPLIER_CYCLE = [
    "acme", "initech", "acme", "initech", "newco", "acme", "initech",
    "evilcorp", "acme", "initech", "globex", "acme", "shadybros",
]

BAD_DIGESTS = {
    hashlib.sha256(b"bad-component-0").hexdigest(),
    hashlib.sha256(b"bad-component-1").hexdigest(),
    hashlib.sha256(b"bad-component-2").hexdigest(),
}
# (record, component) slots that receive a known-bad digest.
BAD_SLOTS = {(4, 1): "bad-component-0", (9, 0): "bad-component-1", (16, 2): "bad-component-2"}


def component_digest(i: int, j: int) -> str:
    slot = BAD_SLOTS.get((i, j))
    if slot is not None:
        return hashlib.sha256(slot.encode()).hexdigest()
    return hashlib.sha256(f"component-{i}-{j}".encode()).hexdigest()


def build_records() -> list[dict]:
    records = []
    for i in range(20):
        n_components = 2 + (i % 3)  # 2..4 components
        components = []
        for j in range(n_components):
            supplier = SUPPLIER_CYCLE[(i * 2 + j) % len(SUPPLIER_CYCLE)]
            components.append(
                [f"part-{i}-{j}", f"{1 + j}.{i % 10}", supplier, component_digest(i, j)]
            )
        records.append(
            {
                "components": components,
                "device_id": f"sup-dev-{i:02d}",
                "manufacturer": "00" * 32,
            }
        )
    return records


def expected_finding(record: dict) -> dict:
    """Plain rule transcription: deny/bad-digest fail; unknown suppliers
    warn (or fail per policy); otherwise pass."""
    violations = []
    for name, _version, supplier, digest in record["components"]:
        if supplier in DENYLIST:
            violations.append({"component": name, "kind": "denylisted-supplier"})
        if digest in BAD_DIGESTS:
            violations.append({"component": name, "kind": "bad-digest"})
        if supplier not in DENYLIST and supplier not in ALLOWLIST:
            violations.append({"component": name, "kind": "unknown-supplier"})
    failing = [v for v in violations if v["kind"] in ("denylisted-supplier", "bad-digest")]
    warning = [v for v in violations if v["kind"] == "unknown-supplier"]
    if failing or (warning and UNKNOWN_ACTION == "fail"):
        result = "fail"
    elif warning:
        result = "warn"
    else:
        result = "pass"
    return {
        "device_id": record["device_id"],
        "result": result,
        "violations": violations,
    }


def build_fixture() -> dict:
    records = build_records()
    return {
        "policy": {
            "bad_component_digests": sorted(BAD_DIGESTS),
            "supplier_allowlist": ALLOWLIST,
            "supplier_denylist": DENYLIST,
            "unknown_supplier_action": UNKNOWN_ACTION,
        },
        "records": records,
        "expected": [expected_finding(r) for r in records],
    }


def main() -> int:
    fixture = build_fixture()
    payload = json.dumps(fixture, indent=1, sort_keys=True) + "\n"
    if "--check" in sys.argv:
        if not OUT.exists() or OUT.read_text() != payload:
            print(f"fixture at {OUT} does not match derivation")
            return 1
        print("fixture reproduces")
        return 0
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(payload)
    counts = {}
    for e in fixture["expected"]:
        counts[e["result"]] = counts.get(e["result"], 0) + 1
    print(f"wrote {OUT} ({counts})")
    return 0


if __name__ == "__main__":
    sys.exit(main())

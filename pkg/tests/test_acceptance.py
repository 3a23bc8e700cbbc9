"""Acceptance suite: one PASS/FAIL line per check, from a full ``nlkg report`` run.

The pipeline runs twice into separate directories; the second run serves the
byte-identity check.
"""
import csv
import filecmp
import os
import subprocess
import sys

import pytest

ACCEPTANCE_LINES = []

CHECK_IDS = [
    "1.eigenvalue", "1.zero_modes",
    "2.dichotomy", "2.refinement",
    "3.free", "3.slope", "3.asymptotics", "3.parseval", "3.roundtrip",
    "4.intertwining",
    "5.stable", "5.resonant",
    "6.drift", "6.slope", "6.reversal", "6.static_Q",
    "7.cells", "7.doubled",
    "8.rate",
    "9.violations", "9.sign",
    "10.stable_family", "10.width", "10.slope", "10.branches",
    "11.convergence", "11.tangency", "11.energy", "11.uniqueness",
]

# gaps documented in the decisions ledger; strict so an unexpected pass is reported
KNOWN_GAPS = {
    "6.static_Q": "unstable mode seeded by discretisation error grows like exp(k t)",
    "10.stable_family": "data on the linear stable direction blow up on both sides",
}


def _report(out):
    env = dict(os.environ, PYTHONHASHSEED="0")
    proc = subprocess.run([sys.executable, "-m", "nlkg.cli", "report", "--out", str(out)],
                          capture_output=True, text=True, env=env)
    return proc


@pytest.fixture(scope="session")
def report_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("report")
    runs = [root / "first", root / "second"]
    procs = [_report(d) for d in runs]
    return runs, procs


@pytest.fixture(scope="session")
def checks(report_runs):
    (first, _), (proc, _) = report_runs
    assert proc.returncode == 0, proc.stderr
    with open(first / "report_checks.tsv") as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    return {r["criterion"]: r for r in csv.DictReader(rows, delimiter="\t")}


def _line(cid, status, measured, target):
    line = f"{status} {cid}: measured {measured}; target {target}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_every_check_reported(checks):
    assert sorted(checks) == sorted(CHECK_IDS)


@pytest.mark.parametrize("cid", [
    pytest.param(c, marks=pytest.mark.xfail(strict=True, reason=KNOWN_GAPS[c]))
    if c in KNOWN_GAPS else c for c in CHECK_IDS])
def test_criterion(checks, cid):
    row = checks[cid]
    _line(cid, row["status"], row["measured"], row["target"])
    assert (row["known_gap"] == "true") == (cid in KNOWN_GAPS)
    assert row["status"] == "PASS"


def test_12_determinism(report_runs):
    (first, second), (p1, p2) = report_runs
    assert p1.returncode == p2.returncode == 0
    files = sorted(os.listdir(first))
    same = files == sorted(os.listdir(second))
    _, mismatch, errors = filecmp.cmpfiles(first, second, files, shallow=False)
    ok = same and not mismatch and not errors
    _line("12.determinism", "PASS" if ok else "FAIL",
          f"{len(files)} files, {len(mismatch) + len(errors)} differ", "byte-identical")
    assert ok

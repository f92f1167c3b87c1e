import copy

import pytest
import yaml

BASE_CONFIG = {
    "schema_version": 1,
    "seed": 7,
    "quantile": 0.99,
    "model": {"type": "gbm", "s0": 100.0, "mu": 0.0, "sigma": 0.2},
    "grid": {"horizon": 1.0, "step": 0.25, "mpor": 10 / 365},
    "netting_set": [
        {"type": "forward", "strike": 100.0, "maturity": 1.0, "notional": 1.0},
        {"type": "call", "strike": 105.0, "maturity": 1.0, "vol": 0.2, "notional": -0.5},
    ],
    "oracle": {"n_outer": 12, "n_inner": 400},
    "approx": {
        "n_paths": 1500,
        "methods": ["poly", "kernel", "nn"],
        "poly": {"degree": 2},
        "kernel": {"order": 1},
        "nn": {"hidden": [8, 8], "epochs": 15, "batch_size": 256},
    },
    "diagnose": {"n_boot": 100},
    "mva": {"r": 0.02, "hazard_bank": 0.01, "hazard_counterparty": 0.02, "funding_spread": 0.01},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@pytest.fixture
def write_config(tmp_path):
    """Write ``BASE_CONFIG`` merged with overrides; returns the file path."""

    def make(name="run.yaml", **over):
        doc = _merge(BASE_CONFIG, over)
        doc.setdefault("output", str(tmp_path / "out"))
        path = tmp_path / name
        path.write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")
        return path

    return make


_ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    num, text = mark.args
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    if rep.when == "call" or status != "PASS":
        prev = _ACCEPTANCE.get(num)
        # a criterion split over several tests passes only if all of them do
        if prev is None or prev[0] == "PASS":
            _ACCEPTANCE[num] = (status, text)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        status, text = _ACCEPTANCE[num]
        terminalreporter.write_line(f"[{status}] criterion {num}: {text}")

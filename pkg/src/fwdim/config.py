"""
Run configuration: a single YAML document with a schema version.

Every module precondition that can be checked without simulating is checked
here, and failures raise :class:`ConfigError` naming the dotted field.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from fwdim.approx import METHODS, KernelSettings, NnSettings, PolySettings
from fwdim.errors import ConfigError, ValidationError
from fwdim.kernel import KernelSpec
from fwdim.linear_maps import MAX_DEGREE
from fwdim.mva import MvaInputs
from fwdim.neural_net import TrainConfig
from fwdim.oracle import MIN_INNER
from fwdim.portfolio import EuropeanCall, ForwardContract, NettingSet, ZeroCouponBondOU
from fwdim.regression import DEFAULT_CV_THRESHOLD, NormalScaler, QuantileScaler, StudentTScaler
from fwdim.sde import DEFAULT_MPOR, GBM, ModelSpec, OrnsteinUhlenbeck, TimeGrid, build_time_grid

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    grid: TimeGrid
    netting_set: NettingSet
    quantile: float = 0.99
    seed: int = 0
    threads: int = 1
    output: Path = Path("out")
    n_outer: int = 500
    n_inner: int = 20_000
    regressor: str = "value"
    scaler: QuantileScaler = field(default_factory=NormalScaler)
    n_paths: int = 10_000
    methods: tuple[str, ...] = ("poly",)
    method_paths: dict[str, int] = field(default_factory=dict)
    poly: PolySettings = field(default_factory=PolySettings)
    kernel: KernelSettings = field(default_factory=KernelSettings)
    nn: NnSettings = field(default_factory=NnSettings)
    n_boot: int = 200
    cv_threshold: float = DEFAULT_CV_THRESHOLD
    mva: MvaInputs = field(default_factory=MvaInputs)

    def paths_for(self, method: str) -> int:
        return self.method_paths.get(method, self.n_paths)

    def with_overrides(self, seed=None, threads=None, output=None) -> RunConfig:
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if threads is not None:
            if threads < 1:
                raise ConfigError("must be >= 1", "threads")
            changes["threads"] = int(threads)
        if output is not None:
            changes["output"] = Path(output)
        return replace(self, **changes)


def _section(doc: dict, key: str, required: bool = False) -> dict:
    val = doc.get(key)
    if val is None:
        if required:
            raise ConfigError("missing section", key)
        return {}
    if not isinstance(val, dict):
        raise ConfigError("must be a mapping", key)
    return val


def _get(sec: dict, key: str, path: str, kind, default=None, required: bool = False):
    name = f"{path}.{key}" if path else key
    if key not in sec or sec[key] is None:
        if required:
            raise ConfigError("missing required value", name)
        return default
    val = sec[key]
    try:
        if kind is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        if kind is int and (isinstance(val, bool) or int(val) != val):
            raise TypeError
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind.__name__}, got {val!r}", name) from None


def _build(path: str, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except ValidationError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), path) from None


def _model(doc: dict) -> ModelSpec:
    sec = _section(doc, "model", required=True)
    kind = str(sec.get("type", "")).lower()
    if kind == "gbm":
        return _build(
            "model",
            GBM,
            _get(sec, "s0", "model", float, required=True),
            _get(sec, "mu", "model", float, 0.0),
            _get(sec, "sigma", "model", float, required=True),
        )
    if kind in ("ou", "ornstein_uhlenbeck"):
        return _build(
            "model",
            OrnsteinUhlenbeck,
            _get(sec, "x0", "model", float, required=True),
            _get(sec, "kappa", "model", float, required=True),
            _get(sec, "theta", "model", float, 0.0),
            _get(sec, "sigma", "model", float, required=True),
        )
    raise ConfigError(f"unknown model type {sec.get('type')!r} (gbm | ou)", "model.type")


def _grid(doc: dict) -> TimeGrid:
    sec = _section(doc, "grid", required=True)
    horizon = _get(sec, "horizon", "grid", float, required=True)
    step = _get(sec, "step", "grid", float, required=True)
    mpor = _get(sec, "mpor", "grid", float, DEFAULT_MPOR)
    if not mpor > 0:
        raise ConfigError(f"must be > 0, got {mpor}", "grid.mpor")
    if not mpor < step:
        raise ConfigError(f"must be smaller than grid.step ({step}), got {mpor}", "grid.mpor")
    return _build("grid", build_time_grid, horizon, step, mpor)


def _netting_set(doc: dict, model: ModelSpec, grid: TimeGrid) -> NettingSet:
    items = doc.get("netting_set")
    if not isinstance(items, list) or not items:
        raise ConfigError("must be a non-empty list of instruments", "netting_set")
    instruments = []
    for i, item in enumerate(items):
        path = f"netting_set[{i}]"
        if not isinstance(item, dict):
            raise ConfigError("must be a mapping", path)
        kind = str(item.get("type", "")).lower()
        maturity = _get(item, "maturity", path, float, required=True)
        notional = _get(item, "notional", path, float, 1.0)
        if kind == "forward":
            strike = _get(item, "strike", path, float, required=True)
            instr = _build(path, ForwardContract, strike, maturity, notional)
        elif kind == "call":
            strike = _get(item, "strike", path, float, required=True)
            vol = _get(item, "vol", path, float, required=True)
            instr = _build(path, EuropeanCall, strike, maturity, vol, notional)
        elif kind in ("zcb", "zero_coupon_bond"):
            instr = _build(path, ZeroCouponBondOU, maturity, notional)
        else:
            raise ConfigError(f"unknown instrument type {item.get('type')!r}", f"{path}.type")
        instruments.append(instr)
    ns = NettingSet(instruments)
    _build("netting_set", ns.check_model, model, grid.horizon)
    return ns


def _scaler(sec: dict, p: float) -> QuantileScaler:
    kind = str(sec.get("type", "normal")).lower()
    if kind == "normal":
        return _build("regression.scaler", NormalScaler, p)
    if kind in ("student_t", "t"):
        dof = _get(sec, "dof", "regression.scaler", float, required=True)
        return _build("regression.scaler", StudentTScaler, p, dof)
    raise ConfigError(
        f"unknown scaler {sec.get('type')!r} (normal | student_t)", "regression.scaler.type"
    )


def _positive_int(sec: dict, key: str, path: str, default: int, minimum: int = 1) -> int:
    val = _get(sec, key, path, int, default)
    if val < minimum:
        raise ConfigError(f"must be >= {minimum}, got {val}", f"{path}.{key}" if path else key)
    return val


def parse_config(doc: Any) -> RunConfig:
    """Validate a parsed YAML document and build a :class:`RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"expected {SCHEMA_VERSION}, got {version!r}", "schema_version")

    model = _model(doc)
    grid = _grid(doc)
    ns = _netting_set(doc, model, grid)
    p = _get(doc, "quantile", "", float, 0.99)
    if not 0 < p < 1:
        raise ConfigError(f"must lie in (0, 1), got {p}", "quantile")
    seed = _get(doc, "seed", "", int, 0)
    threads = _positive_int(doc, "threads", "", 1)
    out = Path(str(doc.get("output", "out")))

    osec = _section(doc, "oracle")
    n_outer = _positive_int(osec, "n_outer", "oracle", 500)
    n_inner = _positive_int(osec, "n_inner", "oracle", 20_000, minimum=MIN_INNER)

    rsec = _section(doc, "regression")
    regressor = str(rsec.get("regressor", "value"))
    if regressor not in ("value", "state"):
        raise ConfigError(f"must be 'value' or 'state', got {regressor!r}", "regression.regressor")
    scaler = _scaler(_section(rsec, "scaler"), p)

    asec = _section(doc, "approx")
    n_paths = _positive_int(asec, "n_paths", "approx", 10_000, minimum=3)
    methods = asec.get("methods", ["poly"])
    if isinstance(methods, str):
        methods = [methods]
    if not isinstance(methods, list) or not methods or any(m not in METHODS for m in methods):
        raise ConfigError(f"must be a non-empty list drawn from {METHODS}", "approx.methods")
    method_paths = {}
    for m in METHODS:
        msec = _section(asec, m)
        if "n_paths" in msec:
            method_paths[m] = _positive_int(msec, "n_paths", f"approx.{m}", n_paths, minimum=3)

    psec = _section(asec, "poly")
    degree = _get(psec, "degree", "approx.poly", int, 2)
    if not 0 <= degree <= MAX_DEGREE:
        raise ConfigError(f"must be in [0, {MAX_DEGREE}], got {degree}", "approx.poly.degree")
    ridge = _get(psec, "ridge", "approx.poly", float, 0.0)
    if ridge < 0:
        raise ConfigError(f"must be >= 0, got {ridge}", "approx.poly.ridge")
    poly = PolySettings(degree, ridge)

    ksec = _section(asec, "kernel")
    kspec = _build(
        "approx.kernel",
        KernelSpec,
        str(ksec.get("kind", "gaussian")),
        _get(ksec, "h", "approx.kernel", float, None),
        str(ksec.get("rule", "silverman")),
        _get(ksec, "squared", "approx.kernel", bool, True),
    )
    order = _get(ksec, "order", "approx.kernel", int, 1)
    if order not in (0, 1):
        raise ConfigError(f"must be 0 or 1, got {order}", "approx.kernel.order")
    kernel = KernelSettings(kspec, order)

    nsec = _section(asec, "nn")
    hidden = nsec.get("hidden", [16, 16])
    if (
        not isinstance(hidden, list)
        or not hidden
        or any(isinstance(h, bool) or not isinstance(h, int) or h < 1 for h in hidden)
    ):
        raise ConfigError("must be a non-empty list of positive integers", "approx.nn.hidden")
    train_cfg = _build(
        "approx.nn",
        TrainConfig,
        epochs=_get(nsec, "epochs", "approx.nn", int, 500),
        batch_size=_get(nsec, "batch_size", "approx.nn", int, 256),
        learning_rate=_get(nsec, "learning_rate", "approx.nn", float, 1e-3),
        optimizer=str(nsec.get("optimizer", "adam")),
        standardize_x=_get(nsec, "standardize_x", "approx.nn", bool, True),
        standardize_y=_get(nsec, "standardize_y", "approx.nn", bool, True),
        patience=_get(nsec, "patience", "approx.nn", int, 50),
        shuffle_seed=_get(nsec, "seed", "approx.nn", int, seed),
    )
    nn = NnSettings(tuple(hidden), train_cfg, _get(nsec, "seed", "approx.nn", int, seed))

    dsec = _section(doc, "diagnose")
    n_boot = _positive_int(dsec, "n_boot", "diagnose", 200, minimum=100)
    cv_threshold = _get(dsec, "cv_threshold", "diagnose", float, DEFAULT_CV_THRESHOLD)
    if not cv_threshold > 0:
        raise ConfigError(f"must be > 0, got {cv_threshold}", "diagnose.cv_threshold")

    msec = _section(doc, "mva")
    mva = _build(
        "mva",
        MvaInputs,
        r=_get(msec, "r", "mva", float, 0.0),
        hazard_bank=_get(msec, "hazard_bank", "mva", float, 0.0),
        hazard_counterparty=_get(msec, "hazard_counterparty", "mva", float, 0.0),
        funding_spread=_get(msec, "funding_spread", "mva", float, 0.0),
        im_spread=_get(msec, "im_spread", "mva", float, 0.0),
        recovery=_get(msec, "recovery", "mva", float, 0.0),
    )

    return RunConfig(
        model=model,
        grid=grid,
        netting_set=ns,
        quantile=p,
        seed=seed,
        threads=threads,
        output=out,
        n_outer=n_outer,
        n_inner=n_inner,
        regressor=regressor,
        scaler=scaler,
        n_paths=n_paths,
        methods=tuple(methods),
        method_paths=method_paths,
        poly=poly,
        kernel=kernel,
        nn=nn,
        n_boot=n_boot,
        cv_threshold=cv_threshold,
        mva=mva,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a YAML config file.

    Relative output directories resolve against the current directory.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"YAML parse error: {exc}") from None
    return parse_config(doc)

"""Scenario files, sweep specs, and plot-ready row emission.

A scenario is a JSON document describing one system plus run metadata.
Loading applies documented defaults and validates everything, so the
returned object (and anything serialized from it) is fully explicit.
Sidecar documents written next to result files embed the expanded
scenario and are themselves loadable, which makes any emitted CSV
reproducible from its sidecar alone.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Tuple

import numpy as np

from .components import (
    ChannelSpec,
    DetectorSpec,
    RoutingPolicy,
    SwitchSpec,
    tree_stage_widths,
    uniform_switch_tree,
)
from .errors import ScenarioError, SpmuxError
from .estimators import Estimate
from .mux_engine import SystemConfig
from .photon_stats import DEFAULT_N_MAX, PairNumberDistribution

SCHEMA_VERSION = 1

_DEFAULTS = {
    "repetition_period_s": 1e-8,
    "pulses": 1_000_000,
    "transmission": 1.0,
    "detector": {"efficiency": 1.0, "dark_prob": 0.0},
}


@dataclass(frozen=True)
class SweepSpec:
    path: str
    start: float
    stop: float
    steps: int
    log_scale: bool = False

    def values(self) -> np.ndarray:
        if self.log_scale:
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class Scenario:
    system: SystemConfig
    seed: int = 0
    sweep: Optional[SweepSpec] = None
    output: Optional[str] = None

    def to_dict(self) -> dict:
        """Fully explicit JSON-ready form (all defaults materialized)."""
        sys = self.system
        d = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "output": self.output,
            "system": {
                "repetition_period_s": sys.repetition_period_s,
                "pulses": sys.pulses,
                "sources": [
                    {"kind": s.kind, "mu": s.mu, "n_max": s.n_max}
                    for s in sys.sources
                ],
                "signal_channels": [
                    {"transmission": c.transmission} for c in sys.signal_channels
                ],
                "idler_channels": [
                    {"transmission": c.transmission} for c in sys.idler_channels
                ],
                "herald_detectors": [
                    {"efficiency": det.efficiency, "dark_prob": det.dark_prob}
                    for det in sys.herald_detectors
                ],
                "output_detector": {
                    "efficiency": sys.output_detector.efficiency,
                    "dark_prob": sys.output_detector.dark_prob,
                },
                "switch_tree": [
                    [{"input_transmissions": list(sw.input_transmissions)}
                     for sw in stage]
                    for stage in sys.switch_tree
                ],
                "routing": {"kind": sys.routing.kind,
                            "order": list(sys.routing.order)},
                "hbt_enabled": sys.hbt_enabled,
                "hbt_detectors": [
                    {"efficiency": det.efficiency, "dark_prob": det.dark_prob}
                    for det in (sys.hbt_detectors or _default_hbt())
                ],
            },
            "sweep": None,
        }
        if self.sweep is not None:
            d["sweep"] = {
                "path": self.sweep.path,
                "from": self.sweep.start,
                "to": self.sweep.stop,
                "steps": self.sweep.steps,
                "log_scale": self.sweep.log_scale,
            }
        return d


def _default_hbt() -> Tuple[DetectorSpec, DetectorSpec]:
    det = DetectorSpec(**_DEFAULTS["detector"])
    return (det, det)


def _require(cond: bool, message: str, fieldpath: str):
    if not cond:
        raise ScenarioError(message, field=fieldpath)


def _as_list(value, n: int, fieldpath: str) -> list:
    """Accept a list of n entries or a single mapping broadcast to n."""
    if isinstance(value, dict):
        return [value] * n
    _require(isinstance(value, list), f"{fieldpath} must be a list or mapping",
             fieldpath)
    _require(len(value) == n,
             f"{fieldpath} has {len(value)} entries, expected {n}", fieldpath)
    return value


def _number(d: dict, key: str, fieldpath: str, default=None):
    if key not in d:
        _require(default is not None, f"missing required field {fieldpath}.{key}",
                 f"{fieldpath}.{key}")
        return default
    v = d[key]
    _require(isinstance(v, (int, float)) and not isinstance(v, bool),
             f"{fieldpath}.{key} must be a number", f"{fieldpath}.{key}")
    return v


def _detector(d: Any, fieldpath: str) -> DetectorSpec:
    _require(isinstance(d, dict), f"{fieldpath} must be a mapping", fieldpath)
    try:
        return DetectorSpec(
            efficiency=float(_number(d, "efficiency", fieldpath,
                                     _DEFAULTS["detector"]["efficiency"])),
            dark_prob=float(_number(d, "dark_prob", fieldpath,
                                    _DEFAULTS["detector"]["dark_prob"])),
        )
    except SpmuxError as exc:
        raise ScenarioError(str(exc), field=fieldpath) from exc


def _channel(d: Any, fieldpath: str) -> ChannelSpec:
    _require(isinstance(d, dict), f"{fieldpath} must be a mapping", fieldpath)
    try:
        return ChannelSpec(float(_number(d, "transmission", fieldpath,
                                         _DEFAULTS["transmission"])))
    except SpmuxError as exc:
        raise ScenarioError(str(exc), field=f"{fieldpath}.transmission") from exc


def _source(d: Any, fieldpath: str) -> PairNumberDistribution:
    _require(isinstance(d, dict), f"{fieldpath} must be a mapping", fieldpath)
    _require("kind" in d, f"{fieldpath}.kind is required (statistics are never "
             "inferred)", f"{fieldpath}.kind")
    try:
        return PairNumberDistribution(
            kind=d["kind"],
            mu=float(_number(d, "mu", fieldpath)),
            n_max=int(_number(d, "n_max", fieldpath, DEFAULT_N_MAX)),
        )
    except SpmuxError as exc:
        raise ScenarioError(str(exc), field=fieldpath) from exc


def _switch_tree(value, n: int, fieldpath: str):
    if value is None:
        return uniform_switch_tree(n, (1.0, 1.0))
    if isinstance(value, dict) and "uniform_input_transmissions" in value:
        t = value["uniform_input_transmissions"]
        try:
            return uniform_switch_tree(n, tuple(t))
        except SpmuxError as exc:
            raise ScenarioError(str(exc), field=fieldpath) from exc
    _require(isinstance(value, list), f"{fieldpath} must be a list of stages "
             "or a uniform_input_transmissions mapping", fieldpath)
    widths = tree_stage_widths(n)
    _require(len(value) == len(widths),
             f"{fieldpath} has {len(value)} stages, expected {len(widths)} "
             f"for {n} sources", fieldpath)
    tree = []
    for g, stage in enumerate(value):
        _require(isinstance(stage, list) and len(stage) == widths[g],
                 f"{fieldpath}[{g}] must list {widths[g]} switches",
                 f"{fieldpath}[{g}]")
        row = []
        for i, sw in enumerate(stage):
            sub = f"{fieldpath}[{g}][{i}]"
            _require(isinstance(sw, dict) and "input_transmissions" in sw,
                     f"{sub} must be a mapping with input_transmissions", sub)
            try:
                row.append(SwitchSpec(tuple(sw["input_transmissions"])))
            except SpmuxError as exc:
                raise ScenarioError(str(exc), field=sub) from exc
        tree.append(tuple(row))
    return tuple(tree)


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a Scenario from its JSON form."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    if "scenario" in doc and "system" not in doc:
        # result sidecar: re-run exactly what it records
        inner = copy.deepcopy(doc["scenario"])
        for key in ("seed",):
            if key in doc and key not in inner:
                inner[key] = doc[key]
        doc = inner
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})",
            field="schema_version")

    sys_doc = doc.get("system")
    _require(isinstance(sys_doc, dict), "missing required object 'system'",
             "system")
    sources_doc = sys_doc.get("sources")
    _require(isinstance(sources_doc, list) and len(sources_doc) >= 1,
             "system.sources must be a non-empty list", "system.sources")
    n = len(sources_doc)
    sources = tuple(_source(s, f"system.sources[{i}]")
                    for i, s in enumerate(sources_doc))

    signal = tuple(
        _channel(c, f"system.signal_channels[{i}]")
        for i, c in enumerate(_as_list(
            sys_doc.get("signal_channels", {"transmission": _DEFAULTS["transmission"]}),
            n, "system.signal_channels")))
    idler = tuple(
        _channel(c, f"system.idler_channels[{i}]")
        for i, c in enumerate(_as_list(
            sys_doc.get("idler_channels", {"transmission": _DEFAULTS["transmission"]}),
            n, "system.idler_channels")))
    heralds = tuple(
        _detector(d, f"system.herald_detectors[{i}]")
        for i, d in enumerate(_as_list(
            sys_doc.get("herald_detectors", _DEFAULTS["detector"]),
            n, "system.herald_detectors")))
    output_det = _detector(sys_doc.get("output_detector", _DEFAULTS["detector"]),
                           "system.output_detector")

    routing_doc = sys_doc.get("routing",
                              {"kind": "priority_order", "order": list(range(n))})
    _require(isinstance(routing_doc, dict), "system.routing must be a mapping",
             "system.routing")
    try:
        routing = RoutingPolicy(order=tuple(routing_doc.get("order", range(n))),
                                kind=routing_doc.get("kind", "priority_order"))
    except SpmuxError as exc:
        raise ScenarioError(str(exc), field="system.routing") from exc

    hbt_enabled = bool(sys_doc.get("hbt_enabled", False))
    hbt_doc = sys_doc.get("hbt_detectors")
    if hbt_doc is None:
        hbt_dets = _default_hbt()
    else:
        _require(isinstance(hbt_doc, list) and len(hbt_doc) == 2,
                 "system.hbt_detectors must list exactly two detectors",
                 "system.hbt_detectors")
        hbt_dets = tuple(_detector(d, f"system.hbt_detectors[{i}]")
                         for i, d in enumerate(hbt_doc))

    try:
        system = SystemConfig(
            sources=sources,
            signal_channels=signal,
            idler_channels=idler,
            herald_detectors=heralds,
            switch_tree=_switch_tree(sys_doc.get("switch_tree"), n,
                                     "system.switch_tree"),
            routing=routing,
            output_detector=output_det,
            repetition_period_s=float(_number(
                sys_doc, "repetition_period_s", "system",
                _DEFAULTS["repetition_period_s"])),
            pulses=int(_number(sys_doc, "pulses", "system", _DEFAULTS["pulses"])),
            hbt_enabled=hbt_enabled,
            hbt_detectors=hbt_dets,
        )
    except SpmuxError as exc:
        raise ScenarioError(str(exc), field="system") from exc

    sweep_doc = doc.get("sweep")
    sweep = None
    if sweep_doc is not None:
        _require(isinstance(sweep_doc, dict), "sweep must be a mapping", "sweep")
        for key in ("path", "from", "to", "steps"):
            _require(key in sweep_doc, f"sweep.{key} is required", f"sweep.{key}")
        sweep = SweepSpec(
            path=str(sweep_doc["path"]),
            start=float(_number(sweep_doc, "from", "sweep")),
            stop=float(_number(sweep_doc, "to", "sweep")),
            steps=int(_number(sweep_doc, "steps", "sweep")),
            log_scale=bool(sweep_doc.get("log_scale", False)),
        )
        _require(sweep.steps >= 1, "sweep.steps must be >= 1", "sweep.steps")
        if sweep.log_scale:
            _require(sweep.start > 0 and sweep.stop > 0,
                     "log-scale sweep bounds must be positive", "sweep")
        scenario_probe = Scenario(system=system, seed=0, sweep=None, output=None)
        probe = scenario_probe.to_dict()
        for target in _resolve_path(probe, sweep.path):
            parent, key = target
            _require(isinstance(parent[key], (int, float))
                     and not isinstance(parent[key], bool),
                     f"sweep.path {sweep.path!r} must name a numeric field",
                     "sweep.path")

    seed = doc.get("seed", 0)
    _require(isinstance(seed, int) and 0 <= seed < 2 ** 64,
             "seed must be an unsigned 64-bit integer", "seed")
    output = doc.get("output")
    if output is not None:
        _require(isinstance(output, str), "output must be a path string", "output")
    return Scenario(system=system, seed=seed, sweep=sweep, output=output)


def load_scenario(path) -> Scenario:
    """Load, default-expand, and validate a scenario (or sidecar) file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON in {path}: {exc.msg}",
                            line=exc.lineno) from exc
    return scenario_from_dict(doc)


_PATH_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)((?:\[(?:\d+|\*)\])*)$")


def _resolve_path(doc: dict, path: str):
    """Yield (parent, key) pairs addressed by a dotted path.

    Tokens are field names with optional [i] or [*] subscripts, e.g.
    ``system.sources[*].mu`` fans out over every source.
    """
    targets = [(None, None, doc)]
    for token in path.split("."):
        m = _PATH_TOKEN.match(token)
        if m is None:
            raise ScenarioError(f"malformed sweep path token {token!r}",
                                field="sweep.path")
        name = m.group(1)
        subs = re.findall(r"\[(\d+|\*)\]", m.group(2))
        new_targets = []
        for _, _, obj in targets:
            if not isinstance(obj, dict) or name not in obj:
                raise ScenarioError(
                    f"sweep path {path!r}: no field named {name!r}",
                    field="sweep.path")
            cur = [(obj, name, obj[name])]
            for sub in subs:
                expanded = []
                for _, _, item in cur:
                    if not isinstance(item, list):
                        raise ScenarioError(
                            f"sweep path {path!r}: {name!r} is not a list",
                            field="sweep.path")
                    if sub == "*":
                        expanded.extend((item, i, item[i])
                                        for i in range(len(item)))
                    else:
                        i = int(sub)
                        if i >= len(item):
                            raise ScenarioError(
                                f"sweep path {path!r}: index {i} out of range",
                                field="sweep.path")
                        expanded.append((item, i, item[i]))
                cur = expanded
            new_targets.extend(cur)
        targets = new_targets
    return [(parent, key) for parent, key, _ in targets]


def apply_sweep_value(scenario: Scenario, value: float) -> Scenario:
    """Scenario with the swept parameter set to ``value`` (revalidated)."""
    if scenario.sweep is None:
        raise ScenarioError("scenario has no sweep specification", field="sweep")
    doc = scenario.to_dict()
    for parent, key in _resolve_path(doc, scenario.sweep.path):
        parent[key] = float(value)
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# emitted rows


@dataclass(frozen=True)
class CurvePoint:
    """One sweep sample: Monte Carlo estimates plus model predictions."""

    swept_value: Optional[float] = None
    heralded_rate: Optional[Estimate] = None
    coincidence_prob: Optional[float] = None
    car: Optional[Estimate] = None
    g2_0: Optional[Estimate] = None
    g2_plus: Optional[Estimate] = None
    g2_minus: Optional[Estimate] = None
    analytic_rate: Optional[float] = None
    analytic_car: Optional[float] = None
    analytic_coincidence_prob: Optional[float] = None


CSV_COLUMNS = (
    "swept_value",
    "heralded_rate_per_s",
    "heralded_rate_err_per_s",
    "coincidence_prob_per_pulse",
    "car",
    "car_err",
    "g2_0",
    "g2_0_err",
    "g2_plus_t",
    "g2_plus_t_err",
    "g2_minus_t",
    "g2_minus_t_err",
    "analytic_rate_per_s",
    "analytic_car",
    "analytic_coincidence_prob_per_pulse",
)


def _cell(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def curve_point_row(point: CurvePoint) -> list:
    def est(e: Optional[Estimate]):
        return ("", "") if e is None else (_cell(e.value), _cell(e.std_err))

    rate = est(point.heralded_rate)
    car = est(point.car)
    g0 = est(point.g2_0)
    gp = est(point.g2_plus)
    gm = est(point.g2_minus)
    return [
        _cell(point.swept_value),
        rate[0], rate[1],
        _cell(point.coincidence_prob),
        car[0], car[1],
        g0[0], g0[1],
        gp[0], gp[1],
        gm[0], gm[1],
        _cell(point.analytic_rate),
        _cell(point.analytic_car),
        _cell(point.analytic_coincidence_prob),
    ]

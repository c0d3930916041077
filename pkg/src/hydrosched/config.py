"""JSON run configuration: strict schema, model construction, canonical form.

Relative CSV paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .cascade import UNBOUNDED, Cascade, HourlyRatings, validate_cascade
from .simulator import STRATEGIES, MarketModels, SimulationConfig
from .stochastic import ActivationModel, InflowModel, PriceModel, read_series_csv

_num = {"type": "number"}
_bound = {"oneOf": [{"type": "number"}, {"const": "unbounded"},
                    {"type": "array", "items": {"type": "number"}, "minItems": 1}]}
_peak = {"type": "object", "additionalProperties": False, "required": ["peak", "offpeak"],
         "properties": {"peak": _num, "offpeak": _num}}
_per_reservoir = {"type": "object", "additionalProperties": _num}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["units", "hours_per_day", "cascade", "prices", "inflows", "activations"],
    "properties": {
        "name": {"type": "string"},
        "units": {
            "type": "object", "additionalProperties": False,
            "required": ["volume", "energy", "price"],
            "properties": {"volume": {"const": "m3"}, "energy": {"const": "MWh"},
                           "price": {"const": "EUR/MWh"}},
        },
        "hours_per_day": {"type": "integer", "minimum": 1},
        "start_date": {"type": "string", "format": "date"},
        "cascade": {
            "type": "object", "additionalProperties": False, "required": ["reservoirs", "arcs"],
            "properties": {
                "reservoirs": {"type": "array", "minItems": 2, "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["id", "initial_level", "lower", "upper"],
                    "properties": {"id": {"type": "string"}, "sink": {"type": "boolean"},
                                   "initial_level": _num, "lower": _bound, "upper": _bound}}},
                "arcs": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["from", "to", "gen_cap", "gen_eff", "pump_cap", "inv_pump_eff"],
                    "properties": {"id": {"type": "string"}, "from": {"type": "string"},
                                   "to": {"type": "string"}, "gen_cap": _num, "gen_eff": _num,
                                   "pump_cap": _num, "inv_pump_eff": _num}}},
            },
        },
        "prices": {
            "type": "object", "additionalProperties": False,
            "required": ["forward_curve_csv", "mean_reversion", "vol_x", "vol_y",
                         "activation_price_up", "activation_price_down"],
            "properties": {"forward_curve_csv": {"type": "string"}, "mean_reversion": _num,
                           "vol_x": _num, "vol_y": _num, "capacity_price_up": _num,
                           "capacity_price_down": _num, "activation_price_up": _peak,
                           "activation_price_down": _peak},
        },
        "inflows": {
            "type": "object", "additionalProperties": False,
            "required": ["daily_means_csv", "year_type_var", "daily_var"],
            "properties": {"daily_means_csv": {"type": "object", "additionalProperties": {"type": "string"}},
                           "year_type_var": _per_reservoir, "daily_var": _per_reservoir},
        },
        "activations": {
            "type": "object", "additionalProperties": False, "required": ["p_none", "p_up", "p_down"],
            "properties": {"p_none": _num, "p_up": _num, "p_down": _num},
        },
        "simulation": {
            "type": "object", "additionalProperties": False,
            "properties": {"days": {"type": "integer", "minimum": 1},
                           "planner_scenarios": {"type": "integer", "minimum": 1},
                           "resolve_every": {"type": "integer", "minimum": 1},
                           "lookahead_days": {"type": "integer", "minimum": 2},
                           "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                           "strategies": {"type": "array", "items": {"enum": list(STRATEGIES)},
                                          "minItems": 1}},
        },
        "placeholders": {"type": "array", "items": {"type": "string"}},
        "output_dir": {"type": "string"},
    },
}


class ConfigError(ValueError):
    """Configuration problems; ``errors`` holds (json_path, message) pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{p}: {m}" for p, m in errors))


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def schema_errors(raw: dict) -> list[tuple[str, str]]:
    errs = []
    validator = jsonschema.Draft202012Validator(SCHEMA, format_checker=jsonschema.FormatChecker())
    for e in sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path))):
        path = list(e.absolute_path)
        if e.validator == "additionalProperties" and isinstance(e.instance, dict):
            allowed = set(e.schema.get("properties", {}))
            for key in sorted(set(e.instance) - allowed):
                errs.append((_json_path(path + [key]), f"unknown key {key!r}"))
        else:
            errs.append((_json_path(path), e.message))
    return errs


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    base_dir: Path
    cascade: Cascade
    ratings: HourlyRatings
    models: MarketModels
    simulation: SimulationConfig

    @property
    def hours_per_day(self) -> int:
        return self.simulation.hours_per_day

    def canonical(self) -> str:
        return canonical_json(self.raw)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def canonical_json(raw: dict) -> str:
    return json.dumps(raw, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _bound_array(value) -> np.ndarray:
    return np.array(UNBOUNDED) if value == "unbounded" else np.asarray(value, dtype=float)


def _read_csv(base: Path, rel: str, path: str, errs: list) -> np.ndarray | None:
    f = base / rel
    try:
        return read_series_csv(f)
    except FileNotFoundError:
        errs.append((path, f"file not found: {f}"))
    except ValueError as exc:
        errs.append((path, str(exc)))
    return None


def build_config(raw: dict, base_dir: Path | str) -> RunConfig:
    """Validate ``raw`` and construct all model objects."""
    errs = schema_errors(raw)
    if errs:
        raise ConfigError(errs)
    base = Path(base_dir)
    H = raw["hours_per_day"]
    cz = raw["cascade"]
    res = cz["reservoirs"]
    ids = [r["id"] for r in res]
    sinks = [r["id"] for r in res if r.get("sink")]
    if len(sinks) != 1:
        errs.append(("$.cascade.reservoirs", f"exactly one sink required, found {len(sinks)}"))
    for i, a in enumerate(cz["arcs"]):
        for end in ("from", "to"):
            if a[end] not in ids:
                errs.append((f"$.cascade.arcs[{i}].{end}", f"unknown reservoir {a[end]!r}"))
    if errs:
        raise ConfigError(errs)

    lows = [_bound_array(r["lower"]) for r in res]
    highs = [_bound_array(r["upper"]) for r in res]
    lengths = {a.size for a in lows + highs if a.ndim == 1}
    if len(lengths) > 1:
        errs.append(("$.cascade.reservoirs", "hourly bound profiles must share one length"))
        raise ConfigError(errs)
    T = lengths.pop() if lengths else None
    stack = (lambda arrs: np.column_stack([np.broadcast_to(a, (T,)) for a in arrs])) if T else np.array
    cascade = Cascade.build(ids, [(a["from"], a["to"]) for a in cz["arcs"]],
                            [r["initial_level"] for r in res], stack(lows), stack(highs), sink=sinks[0],
                            arc_names=[a.get("id", f"a{i + 1}") for i, a in enumerate(cz["arcs"])])
    arcs = cz["arcs"]
    ratings = HourlyRatings(*(np.array([a[k] for a in arcs], dtype=float)
                              for k in ("gen_cap", "pump_cap", "gen_eff", "inv_pump_eff")))
    rep = validate_cascade(cascade, ratings)
    errs += [("$.cascade", v) for v in rep.violations]

    pz = raw["prices"]
    fc = _read_csv(base, pz["forward_curve_csv"], "$.prices.forward_curve_csv", errs)
    iz = raw["inflows"]
    non_sink = list(cascade.reservoirs[:-1])
    means = []
    for key in ("daily_means_csv", "year_type_var", "daily_var"):
        extra = sorted(set(iz[key]) - set(non_sink))
        missing = [r for r in non_sink if r not in iz[key]]
        errs += [(f"$.inflows.{key}.{k}", "not a non-sink reservoir") for k in extra]
        errs += [(f"$.inflows.{key}", f"missing reservoir {k!r}") for k in missing]
    if errs:
        raise ConfigError(errs)
    for r in non_sink:
        m = _read_csv(base, iz["daily_means_csv"][r], f"$.inflows.daily_means_csv.{r}", errs)
        means.append(m)
    if errs:
        raise ConfigError(errs)
    if len({m.size for m in means}) != 1:
        raise ConfigError([("$.inflows.daily_means_csv", "inflow tables differ in length")])

    az = raw["activations"]
    sz = raw.get("simulation", {})
    try:
        prices = PriceModel(fc, pz["mean_reversion"], pz["vol_x"], pz["vol_y"],
                            pz.get("capacity_price_up", 0.0), pz.get("capacity_price_down", 0.0),
                            (pz["activation_price_up"]["peak"], pz["activation_price_up"]["offpeak"]),
                            (pz["activation_price_down"]["peak"], pz["activation_price_down"]["offpeak"]))
    except ValueError as exc:
        raise ConfigError([("$.prices", str(exc))]) from exc
    try:
        inflows = InflowModel(np.column_stack(means), np.array([iz["year_type_var"][r] for r in non_sink]),
                              np.array([iz["daily_var"][r] for r in non_sink]))
    except ValueError as exc:
        raise ConfigError([("$.inflows", str(exc))]) from exc
    try:
        acts = ActivationModel(az["p_none"], az["p_up"], az["p_down"])
    except ValueError as exc:
        raise ConfigError([("$.activations", str(exc))]) from exc
    try:
        sim = SimulationConfig(
            n_days=sz.get("days", inflows.n_days), hours_per_day=H,
            planner_scenarios=sz.get("planner_scenarios", 10), resolve_every=sz.get("resolve_every", 7),
            seeds=tuple(sz.get("seeds", [0])), strategies=tuple(sz.get("strategies", STRATEGIES)),
            lookahead_days=sz.get("lookahead_days"), start_date=raw.get("start_date", "2021-01-04"))
    except ValueError as exc:
        raise ConfigError([("$.simulation", str(exc))]) from exc
    if fc.size % H:
        errs.append(("$.prices.forward_curve_csv", f"length {fc.size} is not a multiple of {H} hours"))
    if errs:
        raise ConfigError(errs)
    return RunConfig(raw, base, cascade, ratings, MarketModels(prices, inflows, acts), sim)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError([("$", f"file not found: {path}")]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([("$", f"invalid JSON: {exc}")]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([("$", "top level must be an object")])
    return build_config(raw, path.parent)


def bundled_config_path(name: str = "gasteiner") -> Path:
    """Path of a config shipped with the package (``gasteiner`` or ``tiny``)."""
    return Path(str(resources.files("hydrosched") / "data" / f"{name}.json"))

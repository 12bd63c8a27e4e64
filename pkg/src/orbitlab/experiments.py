"""Experiment registry: config schemas, runners and report records."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from .errors import ConfigError, NotAUnit, OrbitLabError, PreconditionViolated
from .exact import ALPHA, QuarticInt, fraction_to_str
from .fields import (
    NumberField,
    builtin_catalog,
    compact_orbit_probe,
    load_catalog,
    unit_action_matrix,
    units_independent,
    wall_avoidance_check,
)
from .homogeneous import (
    QuarticMatrix,
    avoidance_experiment,
    compact_twin_check,
    density_probe,
    generators,
    inclusion_check,
    random_product,
    random_unimodular,
    su_membership,
)
from .lattices import UnimodularLattice, systole
from .torus import (
    RelationCertificate,
    TorusParams,
    certify_no_relation,
    verify_nondensity,
)

CERTIFIED, STATISTICAL, FAILED = "certified", "statistical", "failed"


def dec(x: Fraction | None, digits: int = 20) -> str | None:
    return None if x is None else fraction_to_str(Fraction(x), digits)


@dataclass
class ResultRecord:
    experiment: str
    params: dict
    status: str
    payload: dict
    rows: list[dict] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {"experiment": self.experiment, "params": self.params, "status": self.status,
                "payload": self.payload}

    def to_json(self, with_timing: bool = True) -> str:
        doc = self.report()
        if with_timing:
            doc["timing"] = self.timing
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        keys = [k for k in self.rows[0] if k not in ("value_lo", "value_hi", "status")]
        cols = ["experiment"] + keys + ["value_lo", "value_hi", "status"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({"experiment": self.experiment, **r})
        return buf.getvalue()


# ---------------------------------------------------------------------------
# schemas

_ratio = {"type": ["number", "string", "integer"]}
_int_list = {"type": "array", "items": {"type": "integer"}}
_qmatrix = {"type": "array", "items": {"type": "array", "items": {
    "type": "array", "items": {"type": "integer"}, "minItems": 4, "maxItems": 4}}}


def _schema(params: dict, required: list[str], seed: bool = False) -> dict:
    top_required = ["params"] + (["seed"] if seed else [])
    return {
        "type": "object",
        "properties": {
            "experiment": {"type": "string"},
            "params": {"type": "object", "properties": params, "required": required,
                       "additionalProperties": False},
            "seed": {"type": "integer", "minimum": 0},
            "output": {"type": "object", "properties": {"report": {"type": "string"},
                                                         "rows": {"type": "string"}},
                       "additionalProperties": False},
            "precision_cap": {"type": "integer", "minimum": 64},
            "workers": {"type": "integer", "minimum": 1},
        },
        "required": top_required,
        "additionalProperties": False,
    }


_field_params = {"field": {"type": "string"}, "catalog": {"type": "string"}}

SCHEMAS: dict[str, dict] = {
    "torus-nondensity": _schema({
        "primes": _int_list, "N": {"type": "integer", "minimum": 2}, "eps": _ratio,
        "window": {"type": "integer", "minimum": 0},
    }, ["primes", "N", "eps"]),
    "torus-independence": _schema({
        "primes": _int_list, "N": {"type": "integer", "minimum": 2}, "H": {"type": "integer", "minimum": 1},
        "K": {"type": "integer", "minimum": 1},
        "plant": {"type": "object", "properties": {"index": {"type": "integer", "minimum": 1}, "value": _ratio},
                  "required": ["index", "value"], "additionalProperties": False},
        "expect": {"enum": ["independent", "relation"]},
    }, ["primes", "N", "H"]),
    "su-verify": _schema({
        "n": {"type": "integer", "minimum": 1},
        "matrices": {"type": "array", "items": _qmatrix},
        "random_products": {"type": "integer", "minimum": 0},
        "length": {"type": "integer", "minimum": 0},
    }, ["n"]),
    "su-inclusion": _schema({
        "n1": {"type": "integer", "minimum": 1}, "n2": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 1}, "length": {"type": "integer", "minimum": 0},
        "k_range": {"type": "integer", "minimum": 0},
    }, ["n1", "n2"], seed=True),
    "avoidance": _schema({
        "fields": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        "catalog": {"type": "string"},
        "s_min": _ratio, "s_max": _ratio, "s_step": _ratio,
        "d_values": {"type": "array", "items": _ratio, "minItems": 1},
        "control_s": _ratio, "net_grid": {"type": "integer", "minimum": 1},
        "net_t_steps": {"type": "integer", "minimum": 1},
    }, ["fields"]),
    "density-probe": _schema({
        **_field_params,
        "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "step": _ratio, "targets": {"type": "integer", "minimum": 1},
    }, ["field"], seed=True),
    "compact-orbit": _schema({
        **_field_params,
        "units": {"type": "array", "items": _int_list},
        "grid": {"type": "integer", "minimum": 1},
    }, ["field"]),
    "systole": _schema({
        "lattice": {"type": "string"},
        "basis": {"type": "array", "items": {"type": "array", "items": _ratio}},
        "bits": {"type": "integer", "minimum": 32},
    }, []),
}


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def validate_config(name: str, config: dict) -> None:
    if name not in SCHEMAS:
        raise ConfigError(f"unknown experiment {name!r}")
    try:
        jsonschema.validate(config, SCHEMAS[name])
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{loc}: {exc.message}") from exc
    if config.get("experiment", name) != name:
        raise ConfigError(f"config is for {config['experiment']!r}, not {name!r}")


def _frac(x, what: str) -> Fraction:
    try:
        return Fraction(str(x)) if not isinstance(x, str) else Fraction(x)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{what}: cannot read {x!r} as a rational") from exc


def _torus_params(p: dict) -> TorusParams:
    try:
        return TorusParams(tuple(p["primes"]), p["N"])
    except PreconditionViolated as exc:
        raise ConfigError(str(exc)) from exc


def _field(label: str, catalog: str | None):
    cat = load_catalog(catalog) if catalog else builtin_catalog()
    if label not in cat:
        raise ConfigError(f"field {label!r} not in catalog ({', '.join(sorted(cat))})")
    entry = cat[label]
    try:
        return NumberField.from_catalog(entry), [list(u) for u in entry.units]
    except PreconditionViolated as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# runners: (params, seed, workers, emit_rows) -> ResultRecord


def run_torus_nondensity(p, seed, workers, emit_rows) -> ResultRecord:
    params = _torus_params(p)
    eps = _frac(p["eps"], "eps")
    if not 0 < eps < Fraction(1, 2):
        raise ConfigError("eps must lie in (0, 1/2)")
    rep = verify_nondensity(params, eps, window=p.get("window", 10), workers=workers, keep_rows=emit_rows)
    payload = {
        "params": params.as_dict(), "eps": dec(eps), "L": rep.L, "window": rep.window,
        "checked_count": rep.checked_count, "failures": rep.failures,
        "hitting_violations": rep.hitting_violations, "deepened": len(rep.deepened),
        "worst_margin": dec(rep.worst_margin), "status": rep.status,
    }
    rows = [{"exponents": " ".join(map(str, r.exponents)), "coordinate": r.best_j or "",
             "value_lo": "0", "value_hi": dec(r.best_upper) or "",
             "status": CERTIFIED if r.passed else FAILED} for r in rep.rows]
    return ResultRecord("torus-nondensity", p, rep.status, payload, rows)


def run_torus_independence(p, seed, workers, emit_rows) -> ResultRecord:
    params = _torus_params(p)
    overrides = None
    if "plant" in p:
        idx = p["plant"]["index"]
        if idx > 2 * params.q:
            raise ConfigError(f"plant index must be in 1..{2 * params.q}")
        overrides = {idx: _frac(p["plant"]["value"], "plant value")}
    rows: list[dict] = []

    def on_row(cand, lower):
        rows.append({"candidate": " ".join(map(str, cand)), "value_lo": dec(lower, 12), "value_hi": "",
                     "status": CERTIFIED if lower > 0 else FAILED})

    res = certify_no_relation(params, p["H"], K=p.get("K"), overrides=overrides, workers=workers,
                              on_row=on_row if emit_rows else None)
    expect = p.get("expect", "relation" if overrides else "independent")
    if isinstance(res, RelationCertificate):
        payload = {"params": params.as_dict(), "H": res.H, "K": res.K, "checked_count": res.checked_count,
                   "worst_margin": dec(res.min_abs_lower), "result": "certificate"}
        ok = expect == "independent"
    else:
        payload = {"params": params.as_dict(), "H": p["H"], "K": res.K, "result": "relation",
                   "relation": list(res.candidate)}
        ok = expect == "relation"
    payload["expect"] = expect
    payload["status"] = CERTIFIED if ok else FAILED
    return ResultRecord("torus-independence", p, payload["status"], payload, rows)


def run_su_verify(p, seed, workers, emit_rows) -> ResultRecord:
    n = p["n"]
    if p.get("random_products", 0) and seed is None:
        raise ConfigError("random_products needs a seed")
    rng = np.random.default_rng(seed)
    mats = [QuarticMatrix.from_json(m) for m in p.get("matrices", [])]
    if any(M.n != n for M in mats):
        raise ConfigError(f"all matrices must be {n}x{n}")
    gens = generators(n) if p.get("random_products", 0) else None
    for _ in range(p.get("random_products", 0)):
        mats.append(random_product(n, p.get("length", 8), rng, gens))
    results = [su_membership(M) for M in mats]
    alpha_ok = ALPHA * ALPHA.sigma() == QuarticInt(1)
    rows = [{"index": i, "det": str(r.det), "value_lo": int(r.ok), "value_hi": int(r.ok),
             "status": CERTIFIED if r.ok else FAILED} for i, r in enumerate(results)]
    ok = alpha_ok and all(r.ok for r in results)
    payload = {"checked": len(results), "members": sum(r.ok for r in results),
               "alpha_sigma_alpha": list((ALPHA * ALPHA.sigma()).coords),
               "failures": [{"index": i, "witness": r.witness.to_json() if r.witness else None,
                             "det": list(r.det.coords)} for i, r in enumerate(results) if not r.ok]}
    return ResultRecord("su-verify", p, CERTIFIED if ok else FAILED, payload, rows)


def run_su_inclusion(p, seed, workers, emit_rows) -> ResultRecord:
    rng = np.random.default_rng(seed)
    n1, n2 = p["n1"], p["n2"]
    g1, g2 = generators(n1), generators(n2)
    samples = []
    kr = p.get("k_range", 2)
    for _ in range(p.get("samples", 20)):
        M1 = random_product(n1, p.get("length", 6), rng, g1)
        M2 = random_product(n2, p.get("length", 6), rng, g2)
        samples.append((M1, M2, int(rng.integers(-kr, kr + 1))))
    try:
        rep = inclusion_check(samples)
        included = rep.all_passed
    except OrbitLabError as exc:
        return ResultRecord("su-inclusion", p, FAILED, {"error": str(exc)})
    twins = [compact_twin_check(M.to_pair()) for M1, M2, _ in samples for M in (M1, M2)]
    worst = max(t.max_entry_modulus for t in twins)
    ok = included and all(t.ok for t in twins)
    rows = [{"index": i, "k": k, "value_lo": 1, "value_hi": 1, "status": CERTIFIED}
            for i, (_, _, k) in enumerate(samples)]
    payload = {"samples": len(samples), "included": rep.checked, "twin_checks": len(twins),
               "twin_max_entry_modulus_hi": dec(worst)}
    return ResultRecord("su-inclusion", p, CERTIFIED if ok else FAILED, payload, rows)


def _grid(lo: Fraction, hi: Fraction, step: Fraction) -> list[Fraction]:
    if step <= 0 or hi < lo:
        raise ConfigError("need step > 0 and s_min <= s_max")
    count = int((hi - lo) / step)
    return [lo + step * i for i in range(count + 1)]


def run_avoidance(p, seed, workers, emit_rows) -> ResultRecord:
    F1, u1 = _field(p["fields"][0], p.get("catalog"))
    F2, _ = _field(p["fields"][1], p.get("catalog"))
    if F1.n < 3 or F2.n < 3:
        raise ConfigError("avoidance needs two fields of degree >= 3")
    s_vals = _grid(_frac(p.get("s_min", -5), "s_min"), _frac(p.get("s_max", 5), "s_max"),
                   _frac(p.get("s_step", "1/2"), "s_step"))
    d_vals = [_frac(v, "d_values") for v in p.get("d_values", [-1, "-1/2", 0, "1/2", 1])]
    control = p.get("control_s", 3)
    rep = avoidance_experiment(F1, F2, s_vals, d_vals, units1=u1, control_s=_frac(control, "control_s"),
                               net_grid=p.get("net_grid", 4), net_t_steps=p.get("net_t_steps", 5),
                               workers=workers)
    rows = [{"s": str(x.s), "d1": " ".join(map(str, x.d1)), "d2": " ".join(map(str, x.d2)),
             "coordinate": x.coordinate, "value_lo": dec(x.t_prime_lo, 12), "value_hi": dec(x.t_prime_hi, 12),
             "status": CERTIFIED if x.passed else FAILED} for x in rep.samples]
    if rep.control_margin is not None:
        rows.append({"s": str(rep.control_s), "d1": "", "d2": "", "coordinate": 1,
                     "value_lo": repr(rep.control_margin), "value_hi": "", "status": STATISTICAL})
    payload = {
        "fields": list(rep.labels), "samples": len(rep.samples), "passed": rep.pass_count,
        "control": {"s": str(rep.control_s), "precondition_violated": rep.control_precondition_violated,
                    "net_distance_margin": rep.control_margin, "status": STATISTICAL},
    }
    ok = rep.all_passed and rep.control_precondition_violated is not False
    return ResultRecord("avoidance", p, CERTIFIED if ok else FAILED, payload, rows)


def run_density_probe(p, seed, workers, emit_rows) -> ResultRecord:
    F, _ = _field(p["field"], p.get("catalog"))
    rng = np.random.default_rng(seed)
    targets = [random_unimodular(F.n, rng) for _ in range(p.get("targets", 3))]
    sizes = p.get("sizes", [1, 5, 10, 20, 40])
    series = density_probe(F, sizes, targets, step=_frac(p.get("step", "3/20"), "step"), workers=workers)
    rows = [{"field": F.label, "target": s.target_index, "grid": m, "value_lo": "", "value_hi": repr(d),
             "status": STATISTICAL} for s in series for m, d in zip(s.sizes, s.distances)]
    monotone = all(s.weakly_decreasing() for s in series)
    payload = {"field": F.label, "sizes": sizes,
               "series": [{"target": s.target_index, "distances": s.distances} for s in series],
               "weakly_decreasing": monotone}
    return ResultRecord("density-probe", p, STATISTICAL if monotone else FAILED, payload, rows)


def run_compact_orbit(p, seed, workers, emit_rows) -> ResultRecord:
    F, units = _field(p["field"], p.get("catalog"))
    units = p.get("units", units)
    if not units:
        raise ConfigError(f"no units supplied for {F.label}")
    try:
        actions = [unit_action_matrix(F, u) for u in units]
    except NotAUnit as exc:
        raise ConfigError(str(exc)) from exc
    tol = Fraction(1, 10**10)
    rows = [{"field": F.label, "check": f"g M_u = D_u g, u={list(u)}", "value_lo": "0",
             "value_hi": dec(a.residual, 6), "status": CERTIFIED if a.residual < tol and abs(a.det) == 1 else FAILED}
            for u, a in zip(units, actions)]
    wall = None
    if F.is_primitive():
        wall = wall_avoidance_check(F, units)
        rows.append({"field": F.label, "check": "wall avoidance", "value_lo": dec(wall.min_separation, 12),
                     "value_hi": "", "status": CERTIFIED if wall.passed else FAILED})
    indep = units_independent(F, units)
    probe = compact_orbit_probe(F, units, p.get("grid", 10)) if indep else None
    if probe:
        rows.append({"field": F.label, "check": "systole over fundamental domain",
                     "value_lo": repr(probe.min_systole), "value_hi": repr(probe.max_systole),
                     "status": STATISTICAL})
    ok = all(r["status"] != FAILED for r in rows) and indep
    payload = {
        "field": F.label, "poly": list(F.poly), "disc": F.disc,
        "units": [{"unit": list(u), "det": a.det, "norm": a.norm, "residual": dec(a.residual, 6)}
                  for u, a in zip(units, actions)],
        "units_independent": indep,
        "wall_min_separation": dec(wall.min_separation, 12) if wall else None,
        "systole_min": probe.min_systole if probe else None,
        "systole_max": probe.max_systole if probe else None,
    }
    return ResultRecord("compact-orbit", p, CERTIFIED if ok else FAILED, payload, rows)


def run_systole(p, seed, workers, emit_rows) -> ResultRecord:
    try:
        if "lattice" in p:
            L = UnimodularLattice.load(p["lattice"])
        elif "basis" in p:
            L = UnimodularLattice([[_frac(v, "basis") for v in row] for row in p["basis"]])
        else:
            raise ConfigError("give either 'lattice' (file path) or 'basis'")
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    res = systole(L, bits=p.get("bits", 128))
    payload = res.as_json()
    rows = [{"n": L.n, "vector": " ".join(map(str, res.achieving_vector)),
             "value_lo": repr(payload["length_lo"]), "value_hi": repr(payload["length_hi"]),
             "status": CERTIFIED}]
    return ResultRecord("systole", p, CERTIFIED, payload, rows)


RUNNERS: dict[str, Callable[..., ResultRecord]] = {
    "torus-nondensity": run_torus_nondensity,
    "torus-independence": run_torus_independence,
    "su-verify": run_su_verify,
    "su-inclusion": run_su_inclusion,
    "avoidance": run_avoidance,
    "density-probe": run_density_probe,
    "compact-orbit": run_compact_orbit,
    "systole": run_systole,
}


def run(name: str, config: dict, workers: int | None = None, emit_rows: bool = False) -> ResultRecord:
    """Validate ``config`` and run experiment ``name``; ConfigError on bad input."""
    validate_config(name, config)
    if "precision_cap" in config and not os.environ.get("ORBITLAB_PRECISION_CAP"):
        os.environ["ORBITLAB_PRECISION_CAP"] = str(config["precision_cap"])
    workers = workers or config.get("workers", 1)
    start = time.perf_counter()
    rec = RUNNERS[name](config["params"], config.get("seed"), workers, emit_rows)
    rec.timing = {"wall_seconds": round(time.perf_counter() - start, 6)}
    return rec


def exit_code(rec: ResultRecord) -> int:
    return 1 if rec.status == FAILED or any(r.get("status") == FAILED for r in rec.rows) else 0


def catalog_listing(as_json: bool = False) -> str:
    entries = list(builtin_catalog().values())
    defaults = {name: {k: v for k, v in DEFAULT_CONFIGS.get(name, {}).items()} for name in RUNNERS}
    if as_json:
        return json.dumps({"fields": [e.as_json() for e in entries], "defaults": defaults},
                          indent=2, sort_keys=True)
    lines = ["fields:"]
    for e in entries:
        F = NumberField.from_catalog(e)
        lines.append(f"  {e.label:<12} {F._P.as_expr()}  disc={F.disc}  units={[list(u) for u in e.units]}")
    lines.append("experiments:")
    for name in RUNNERS:
        lines.append(f"  {name:<20} {json.dumps(defaults[name], sort_keys=True)}")
    return "\n".join(lines)


DEFAULT_CONFIGS: dict[str, dict[str, Any]] = {
    "torus-nondensity": {"params": {"primes": [2, 3], "N": 4, "eps": "1/1000", "window": 10}},
    "torus-independence": {"params": {"primes": [2, 3], "N": 4, "H": 10}},
    "su-verify": {"params": {"n": 6, "random_products": 100, "length": 8}, "seed": 1},
    "su-inclusion": {"params": {"n1": 3, "n2": 3, "samples": 20, "k_range": 2}, "seed": 1},
    "avoidance": {"params": {"fields": ["cubic-81", "cubic-49"], "s_min": -5, "s_max": 5, "s_step": "1/2"}},
    "density-probe": {"params": {"field": "cubic-81", "sizes": [1, 5, 10, 20, 40], "targets": 3}, "seed": 1},
    "compact-orbit": {"params": {"field": "cubic-81", "grid": 20}},
    "systole": {"params": {"basis": [[1, 0], [0, 1]]}},
}

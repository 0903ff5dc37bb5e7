"""JSON scenario documents, report serialisation and sweep CSV.

Scenario document layout (all sigmas are standard deviations)::

    {
      "label": "rlc",
      "system": {"A": [[...]], "B": [[...]], "sigma_w": 0.2},
      "gain": {"L": [[...]]},                                   # optional
      "certificate": {"P_x": [[...]],                           # optional
                      "P_theta": [[...]] | {"type": "sigma_power", "p11": 1e-6, "scale": 1.57e-4}},
      "init_set":   {"center": [0, 0], "size": 0.4,
                     "kernel": {"type": "unit_ball"} | {"type": "box", "half_widths": [...]},
                     "perturbation": {"type": "half_normal", "sigma": 0.1}},
      "unsafe_set": {...},
      "horizon": 50,
      "state_bounds": {"low": [...], "high": [...]},            # optional
      "synthesis": {"state_weight": ..., "input_weight": ..., "lyapunov_rhs": ...,
                    "max_iterations": ..., "convergence_tol": ...},  # optional
      "sweep": {"sigma_w": [...], "sigma_i": [...], "sigma_u": [...]}  # optional
    }

Perturbation tags: ``half_normal`` (sigma), ``normal`` (mu, sigma),
``degenerate`` (value), ``tabulated`` (grid, density).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, fields
from typing import Any, Optional, Sequence

import numpy as np

from .certificate import CertificateReport
from .distributions import Degenerate, HalfNormal, Normal, ScalarDistribution, Tabulated
from .errors import ScenarioError, ScenarioShapeError, ShapeError, ThetaCBCError
from .geometry import SupportOracle, UncertainSet, UnitBall, box_kernel, check_kernel
from .linsys import FeedbackGain, LinearSystem
from .montecarlo import MonteCarloReport, SweepRow
from .scenario import Scenario, SigmaPowerRule
from .synthesis import SynthesisConfig

SWEEP_COLUMNS = [
    "sigma_w", "sigma_i", "sigma_u", "p_empty", "eta", "beta", "c",
    "bound", "empirical", "ci_low", "ci_high", "status",
]

_TOP_KEYS = {"label", "system", "gain", "certificate", "init_set", "unsafe_set", "horizon",
             "state_bounds", "synthesis", "sweep"}


# -- parsing helpers ---------------------------------------------------------


def _get(obj: Any, key: str, path: str, required: bool = True):
    if not isinstance(obj, dict):
        raise ScenarioError(path, "expected an object")
    if key not in obj:
        if required:
            raise ScenarioError(f"{path}.{key}", "missing required field")
        return None
    return obj[key]


def _num(v: Any, path: str, nonneg: bool = False, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(path, f"expected a number, got {type(v).__name__}")
    v = float(v)
    if not math.isfinite(v):
        raise ScenarioError(path, "must be finite")
    if nonneg and v < 0:
        raise ScenarioError(path, "must be nonnegative")
    if positive and v <= 0:
        raise ScenarioError(path, "must be positive")
    return v


def _int(v: Any, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(path, f"expected an integer, got {type(v).__name__}")
    return v


def _vec(v: Any, path: str) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ScenarioError(path, "expected a non-empty array of numbers")
    return np.array([_num(x, f"{path}[{i}]") for i, x in enumerate(v)])


def _mat(v: Any, path: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ScenarioError(path, "expected a non-empty row-major array of arrays")
    rows = [_vec(r, f"{path}[{i}]") for i, r in enumerate(v)]
    if len({r.size for r in rows}) != 1:
        raise ScenarioError(path, "rows have different lengths")
    return np.vstack(rows)


def _wrap(path: str, fn, *args, **kwargs):
    """Run a constructor and re-raise library errors under ``path``."""
    try:
        return fn(*args, **kwargs)
    except ScenarioError:
        raise
    except ShapeError as exc:
        raise ScenarioShapeError(path, str(exc)) from exc
    except (ThetaCBCError, ValueError, TypeError, np.linalg.LinAlgError) as exc:
        raise ScenarioError(path, str(exc)) from exc


def parse_distribution(d: Any, path: str) -> ScalarDistribution:
    tag = _get(d, "type", path)
    if tag == "half_normal":
        return _wrap(path, HalfNormal, _num(_get(d, "sigma", path), f"{path}.sigma", positive=True))
    if tag == "normal":
        return _wrap(path, Normal, _num(_get(d, "mu", path), f"{path}.mu"),
                     _num(_get(d, "sigma", path), f"{path}.sigma", positive=True))
    if tag == "degenerate":
        return _wrap(path, Degenerate, _num(_get(d, "value", path), f"{path}.value"))
    if tag == "tabulated":
        return _wrap(path, Tabulated, _vec(_get(d, "grid", path), f"{path}.grid"),
                     _vec(_get(d, "density", path), f"{path}.density"))
    raise ScenarioError(f"{path}.type", f"unknown distribution tag {tag!r}")


def parse_kernel(k: Any, dim: int, path: str):
    tag = _get(k, "type", path)
    if tag == "unit_ball":
        return UnitBall(dim)
    if tag == "box":
        h = _vec(_get(k, "half_widths", path), f"{path}.half_widths")
        if h.size != dim:
            raise ScenarioShapeError(f"{path}.half_widths", f"length {h.size} does not match center length {dim}")
        kern = _wrap(path, box_kernel, h)
        _wrap(path, check_kernel, kern)
        return kern
    raise ScenarioError(f"{path}.type", f"unknown kernel tag {tag!r}")


def parse_set(s: Any, path: str) -> UncertainSet:
    center = _vec(_get(s, "center", path), f"{path}.center")
    size = _num(_get(s, "size", path), f"{path}.size", nonneg=True)
    kernel = parse_kernel(_get(s, "kernel", path), center.size, f"{path}.kernel")
    pert = parse_distribution(_get(s, "perturbation", path), f"{path}.perturbation")
    return _wrap(path, UncertainSet, center, size, kernel, pert)


def _grid(v: Any, path: str) -> list[float]:
    return [float(x) for x in _vec(v, path)]


def scenario_from_dict(doc: Any) -> Scenario:
    """Validate a parsed JSON document and build a ``Scenario``."""
    if not isinstance(doc, dict):
        raise ScenarioError("$", "scenario document must be an object")
    missing = [k for k in ("system", "init_set", "unsafe_set", "horizon") if k not in doc]
    if missing:
        raise ScenarioError("$." + ",".join(missing), "missing required field(s): " + ", ".join(missing))
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError("$." + sorted(unknown)[0], "unknown field")

    sys_doc = doc["system"]
    A = _mat(_get(sys_doc, "A", "$.system"), "$.system.A")
    B = _mat(_get(sys_doc, "B", "$.system"), "$.system.B")
    sigma_w = _num(_get(sys_doc, "sigma_w", "$.system"), "$.system.sigma_w", nonneg=True)
    system = _wrap("$.system", LinearSystem, A, B, sigma_w)
    n = system.state_dim

    gain = None
    if doc.get("gain") is not None:
        L = _mat(_get(doc["gain"], "L", "$.gain"), "$.gain.L")
        if L.shape != (system.input_dim, n):
            raise ScenarioShapeError("$.gain.L", f"shape {L.shape} does not match (m, n) = {(system.input_dim, n)}")
        gain = FeedbackGain(L)

    P_x = P_theta = rule = None
    if doc.get("certificate") is not None:
        cdoc = doc["certificate"]
        if not isinstance(cdoc, dict):
            raise ScenarioError("$.certificate", "expected an object")
        if cdoc.get("P_x") is not None:
            P_x = _mat(cdoc["P_x"], "$.certificate.P_x")
            if P_x.shape != (n, n):
                raise ScenarioShapeError("$.certificate.P_x", f"shape {P_x.shape} does not match state dimension {n}")
        pt = cdoc.get("P_theta")
        if isinstance(pt, dict):
            if pt.get("type") != "sigma_power":
                raise ScenarioError("$.certificate.P_theta.type", f"unknown P_theta rule {pt.get('type')!r}")
            rule = SigmaPowerRule(
                p11=_num(pt.get("p11", 1e-6), "$.certificate.P_theta.p11", positive=True),
                scale=_num(pt.get("scale", 1.57e-4), "$.certificate.P_theta.scale", positive=True),
            )
        elif pt is not None:
            P_theta = _mat(pt, "$.certificate.P_theta")
            if P_theta.shape != (2, 2):
                raise ScenarioShapeError("$.certificate.P_theta", f"must be 2x2, got {P_theta.shape}")

    init = parse_set(doc["init_set"], "$.init_set")
    unsafe = parse_set(doc["unsafe_set"], "$.unsafe_set")
    horizon = _int(doc["horizon"], "$.horizon")
    if horizon < 1:
        raise ScenarioError("$.horizon", "must be a positive integer")

    bounds = None
    if doc.get("state_bounds") is not None:
        sb = doc["state_bounds"]
        bounds = (_vec(_get(sb, "low", "$.state_bounds"), "$.state_bounds.low"),
                  _vec(_get(sb, "high", "$.state_bounds"), "$.state_bounds.high"))

    synth = SynthesisConfig()
    if doc.get("synthesis") is not None:
        sd = doc["synthesis"]
        if not isinstance(sd, dict):
            raise ScenarioError("$.synthesis", "expected an object")
        kw = {}
        for key in ("state_weight", "input_weight", "lyapunov_rhs"):
            if sd.get(key) is not None:
                kw[key] = _mat(sd[key], f"$.synthesis.{key}")
        if "max_iterations" in sd:
            kw["max_iterations"] = _int(sd["max_iterations"], "$.synthesis.max_iterations")
        if "convergence_tol" in sd:
            kw["convergence_tol"] = _num(sd["convergence_tol"], "$.synthesis.convergence_tol", positive=True)
        synth = SynthesisConfig(**kw)
        _wrap("$.synthesis", synth.weights, n, system.input_dim)

    grid = None
    if doc.get("sweep") is not None:
        g = doc["sweep"]
        grid = {k: _grid(_get(g, k, "$.sweep"), f"$.sweep.{k}") for k in ("sigma_w", "sigma_i", "sigma_u")}
        for k, vals in grid.items():
            if any(v < 0 for v in vals):
                raise ScenarioError(f"$.sweep.{k}", "sigmas must be nonnegative")

    label = doc.get("label", "")
    if not isinstance(label, str):
        raise ScenarioError("$.label", "expected a string")

    sc = _wrap("$", Scenario, system=system, init_set=init, unsafe_set=unsafe, horizon=horizon, gain=gain,
               P_x=P_x, P_theta=P_theta, p_theta_rule=rule, state_bounds=bounds, label=label,
               synthesis=synth, sweep_grid=grid)
    if P_x is not None:
        from .certificate import CertificateMatrix

        _wrap("$.certificate", CertificateMatrix, P_x, P_theta if P_theta is not None else np.eye(2))
    if rule is not None:
        _wrap("$.certificate.P_theta", rule.evaluate, init.perturbation)
    return sc


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read())


# -- scenario emission -------------------------------------------------------


def _dist_doc(d: ScalarDistribution) -> dict:
    if isinstance(d, HalfNormal):
        return {"type": "half_normal", "sigma": d.sigma}
    if isinstance(d, Normal):
        return {"type": "normal", "mu": d.mu, "sigma": d.sigma}
    if isinstance(d, Degenerate):
        return {"type": "degenerate", "value": d.value}
    return {"type": "tabulated", "grid": d.grid.tolist(), "density": d.density.tolist()}


def _kernel_doc(k) -> dict:
    if isinstance(k, UnitBall):
        return {"type": "unit_ball"}
    if isinstance(k, SupportOracle) and k.name == "box":
        return {"type": "box", "half_widths": np.asarray(k.params["half_widths"]).tolist()}
    raise ScenarioError("kernel", "callback kernels cannot be serialised")


def _set_doc(s: UncertainSet) -> dict:
    return {"center": s.center.tolist(), "size": s.nominal_size, "kernel": _kernel_doc(s.kernel),
            "perturbation": _dist_doc(s.perturbation)}


def scenario_to_dict(sc: Scenario) -> dict:
    doc: dict = {
        "label": sc.label,
        "system": {"A": sc.system.A.tolist(), "B": sc.system.B.tolist(), "sigma_w": sc.system.sigma_w},
    }
    if sc.gain is not None:
        doc["gain"] = {"L": sc.gain.L.tolist()}
    cdoc = {}
    if sc.P_x is not None:
        cdoc["P_x"] = np.asarray(sc.P_x).tolist()
    if sc.p_theta_rule is not None:
        cdoc["P_theta"] = {"type": "sigma_power", "p11": sc.p_theta_rule.p11, "scale": sc.p_theta_rule.scale}
    elif sc.P_theta is not None:
        cdoc["P_theta"] = np.asarray(sc.P_theta).tolist()
    if cdoc:
        doc["certificate"] = cdoc
    doc["init_set"] = _set_doc(sc.init_set)
    doc["unsafe_set"] = _set_doc(sc.unsafe_set)
    doc["horizon"] = int(sc.horizon)
    if sc.state_bounds is not None:
        doc["state_bounds"] = {"low": np.asarray(sc.state_bounds[0]).tolist(),
                               "high": np.asarray(sc.state_bounds[1]).tolist()}
    syn = sc.synthesis
    sdoc = {k: np.asarray(getattr(syn, k)).tolist() for k in ("state_weight", "input_weight", "lyapunov_rhs")
            if getattr(syn, k) is not None}
    default = SynthesisConfig()
    if syn.max_iterations != default.max_iterations:
        sdoc["max_iterations"] = syn.max_iterations
    if syn.convergence_tol != default.convergence_tol:
        sdoc["convergence_tol"] = syn.convergence_tol
    if sdoc:
        doc["synthesis"] = sdoc
    if sc.sweep_grid is not None:
        doc["sweep"] = {k: list(v) for k, v in sc.sweep_grid.items()}
    return doc


def emit_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2)


# -- reports -----------------------------------------------------------------


def _g9(x: float) -> float:
    if isinstance(x, float) and math.isfinite(x):
        return float(f"{x:.9g}")
    return x


def _round_tree(obj):
    if isinstance(obj, float):
        return _g9(obj)
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_tree(v) for v in obj]
    return obj


def report_to_dict(cert: CertificateReport, mc: Optional[MonteCarloReport] = None) -> dict:
    doc = {"certificate": _round_tree(asdict(cert))}
    if mc is not None:
        doc["monte_carlo"] = _round_tree(asdict(mc))
    return doc


def emit_report(cert: CertificateReport, mc: Optional[MonteCarloReport] = None, format: str = "json") -> str:
    """Serialise reports with stable field order and 9 significant digits."""
    if format == "json":
        return json.dumps(report_to_dict(cert, mc), indent=2, allow_nan=True)
    if format == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        cdoc = report_to_dict(cert, mc)["certificate"]
        keys = [f.name for f in fields(CertificateReport)]
        row = {k: (";".join(cdoc[k]) if k == "diagnostics" else
                   ";".join(f"{a}={b}" for a, b in cdoc[k].items()) if k == "extras" else cdoc[k])
               for k in keys}
        if mc is not None:
            mdoc = report_to_dict(cert, mc)["monte_carlo"]
            for f in fields(MonteCarloReport):
                v = mdoc[f.name]
                row["mc_" + f.name] = " ".join(map(str, v)) if isinstance(v, list) else ("" if v is None else v)
        wr.writerow(list(row))
        wr.writerow(list(row.values()))
        return buf.getvalue()
    raise ValueError(f"unknown format {format!r}")


def parse_report(text: str) -> tuple[CertificateReport, Optional[MonteCarloReport]]:
    doc = json.loads(text)
    cert = CertificateReport(**doc["certificate"])
    mc = MonteCarloReport(**doc["monte_carlo"]) if "monte_carlo" in doc else None
    return cert, mc


def emit_sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SWEEP_COLUMNS)
    for r in rows:
        d = asdict(r)
        wr.writerow([d[k] if k == "status" else repr(_g9(float(d[k]))) for k in SWEEP_COLUMNS])
    return buf.getvalue()


def parse_sweep_csv(text: str) -> list[SweepRow]:
    rd = csv.DictReader(io.StringIO(text))
    return [SweepRow(**{k: (v if k == "status" else float(v)) for k, v in row.items()}) for row in rd]

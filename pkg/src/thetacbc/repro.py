"""Embedded RLC circuit example and its published reference values."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional

from .certificate import CertificateReport
from .linsys import rlc_system
from .scenario import certify
from .scenario_io import scenario_from_dict

_A = rlc_system(delta=0.05, R=2.0, L=9.0, C=0.5).A.tolist()

RLC_SCENARIO = {
    "label": "rlc-circuit",
    "system": {"A": _A, "B": [[1.0, 0.0], [0.0, 1.0]], "sigma_w": 0.2},
    "gain": {"L": [[-0.0337, -0.0400], [-0.0401, -0.0476]]},
    "certificate": {
        "P_x": [[0.0133, 0.0], [0.0, 0.0120]],
        "P_theta": {"type": "sigma_power", "p11": 1e-6, "scale": 1.57e-4},
    },
    "init_set": {
        "center": [0.0, 0.0],
        "size": 0.4,
        "kernel": {"type": "unit_ball"},
        "perturbation": {"type": "half_normal", "sigma": 0.1},
    },
    "unsafe_set": {
        "center": [4.0, 4.0],
        "size": 1.0,
        "kernel": {"type": "unit_ball"},
        "perturbation": {"type": "half_normal", "sigma": 1.0},
    },
    "horizon": 50,
    "state_bounds": {"low": [-4.0, -4.0], "high": [10.0, 10.0]},
    "sweep": {
        "sigma_w": [0.01, 0.05, 0.1, 0.15, 0.2],
        "sigma_i": [0.5, 0.75, 1.0, 1.5, 1.75],
        "sigma_u": [0.1, 0.5, 0.75, 1.0, 1.5, 1.75],
    },
}

# published value, absolute tolerance
REFERENCE = {
    "eta": (0.003109, 5e-6),
    "beta": (0.183054, 5e-5),
    "c": (0.001012, 5e-6),
    "bound": (0.7066, 5e-4),
}

# safety probabilities with nominal (unperturbed) sets, per sigma_w
NOMINAL_ANCHORS = {0.01: 0.991, 0.05: 0.979, 0.1: 0.943, 0.15: 0.882, 0.2: 0.7973}


def rlc_document() -> dict:
    return copy.deepcopy(RLC_SCENARIO)


def rlc_scenario():
    return scenario_from_dict(rlc_document())


@dataclass
class ReproRow:
    name: str
    reference: float
    computed: float
    tolerance: float

    @property
    def diff(self) -> float:
        return abs(self.computed - self.reference)

    @property
    def passed(self) -> bool:
        return self.diff <= self.tolerance


def compare(report: CertificateReport) -> list[ReproRow]:
    computed = {"eta": report.eta, "beta": report.beta, "c": report.c, "bound": report.safety_lower_bound}
    return [ReproRow(k, ref, computed[k], tol) for k, (ref, tol) in REFERENCE.items()]


def run(document: Optional[dict] = None) -> tuple[CertificateReport, list[ReproRow]]:
    sc = scenario_from_dict(document if document is not None else rlc_document())
    report = certify(sc)
    return report, compare(report)

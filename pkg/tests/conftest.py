import numpy as np
import pytest

from thetacbc import repro
from thetacbc.distributions import Degenerate, HalfNormal
from thetacbc.geometry import UncertainSet, UnitBall
from thetacbc.linsys import FeedbackGain, LinearSystem
from thetacbc.scenario import Scenario

RLC_L = np.array([[-0.0337, -0.0400], [-0.0401, -0.0476]])
RLC_PX = np.diag([0.0133, 0.0120])


@pytest.fixture
def rlc():
    return repro.rlc_scenario()


@pytest.fixture
def rlc_doc():
    return repro.rlc_document()


def make_scenario(A, B=None, L=None, sigma_w=0.0, ci=(0.0, 0.0), si=0.4, cu=(4.0, 4.0), su=1.0,
                  law_i=None, law_u=None, T=50, P_x=None):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    B = np.eye(n) if B is None else np.asarray(B, dtype=float)
    L = np.zeros((B.shape[1], n)) if L is None else L
    return Scenario(
        system=LinearSystem(A, B, sigma_w),
        init_set=UncertainSet(np.asarray(ci, float), si, UnitBall(n), law_i or Degenerate(0.0)),
        unsafe_set=UncertainSet(np.asarray(cu, float), su, UnitBall(n), law_u or Degenerate(0.0)),
        horizon=T,
        gain=FeedbackGain(L),
        P_x=P_x,
    )

"""Sufficient gain and resolution from the synchronization theorems

Each theorem gives a lower bound on the nudging gain mu in terms of the
Grashof number G and alpha - beta, and an upper bound on the observation
spacing h at the chosen mu. Unquantified analysis constants carry their
provenance so every report says where a number came from.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace

from django.conf import settings
from django.db import models

from core.exceptions import ThresholdError

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.01
H1_TIGHTENING = 2.0 * math.sqrt(2.0)


class TheoremId(models.TextChoices):
    THM_ALL = 'ThmAll', 'All components, L2'
    THM_1ST = 'Thm1st', 'First components, L2'
    THM_V = 'ThmV', 'v only, L2'
    THM_H1_ALL = 'ThmH1All', 'All components, H1'
    THM_H1_1ST = 'ThmH11st', 'First components, H1'
    THM_H1_V = 'ThmH1V', 'v only, H1'
    T2_THM_1 = 'T2Thm1', 'Type-2 interpolant, first components'
    DET_INTERP = 'DetInterp', 'Determining interpolant'


H1_THEOREMS = {TheoremId.THM_H1_ALL, TheoremId.THM_H1_1ST, TheoremId.THM_H1_V}
L2_COUNTERPART = {
    TheoremId.THM_H1_ALL: TheoremId.THM_ALL,
    TheoremId.THM_H1_1ST: TheoremId.THM_1ST,
    TheoremId.THM_H1_V: TheoremId.THM_V,
}


@dataclass(frozen=True)
class Constant:
    value: float
    provenance: str


@dataclass(frozen=True)
class AnalysisConstants:
    """Ladyzhenskaya, Brezis-type and bound constants used by the theorems"""

    c_L: Constant
    c_B: Constant
    c_T: Constant
    c_M: Constant
    c: Constant
    C: Constant
    c_tilde_1st: Constant
    c_tilde_t2: Constant
    c1: Constant = None
    c2: Constant = None
    c3: Constant = None

    def with_interpolant(self, report, provenance='empirical'):
        """Attach interpolant constants from a verification report"""
        if report.type_class == 1:
            return replace(self, c1=Constant(report.c1, provenance))
        return replace(self, c2=Constant(report.c2, provenance), c3=Constant(report.c3, provenance))

    def ledger(self):
        return {
            item.name: asdict(getattr(self, item.name))
            for item in fields(self)
            if getattr(self, item.name) is not None
        }


def default_constants(**overrides):
    """Default constants; keyword overrides (plain floats) are marked 'configured'

    Settings ``MHDNUDGE['ANALYSIS_CONSTANTS']`` apply before keyword overrides.
    """
    configured = dict(getattr(settings, 'MHDNUDGE', {}).get('ANALYSIS_CONSTANTS', {}))
    configured.update({key: value for key, value in overrides.items() if value is not None})

    def pick(name, default, derivation='default'):
        if name in configured:
            return Constant(float(configured[name]), 'configured')
        return Constant(float(default), derivation)

    c_L = pick('c_L', 1.0 / math.sqrt(2.0 * math.pi))
    c_B = pick('c_B', 1.0)
    c_T = pick('c_T', 1.0)
    c_M = pick('c_M', 1.0)
    c = pick('c', max(c_L.value / 4.0, 1.5 * c_B.value), 'derived: max(c_L/4, 3 c_B/2)')
    C = pick('C', 81.0 / 4.0 * c_L.value ** 8, 'derived: (81/4) c_L^8')
    c_tilde_t2 = pick(
        'c_tilde_t2',
        math.log(250.0 * (c_B.value + c_T.value) ** 2 * (20.0 * math.pi ** 2 + c_M.value)) / 8.0,
        'derived: ln(250 (c_B + c_T)^2 (20 pi^2 + c_M)) / 8',
    )
    c_tilde_1st = pick('c_tilde_1st', c_tilde_t2.value, 'derived: same as c_tilde_t2')
    constants = AnalysisConstants(
        c_L=c_L, c_B=c_B, c_T=c_T, c_M=c_M, c=c, C=C,
        c_tilde_1st=c_tilde_1st, c_tilde_t2=c_tilde_t2,
    )
    for name in ('c1', 'c2', 'c3'):
        if name in configured:
            constants = replace(constants, **{name: Constant(float(configured[name]), 'configured')})
    return constants


def _safe_exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _base_theorem(theorem_id):
    return L2_COUNTERPART.get(theorem_id, theorem_id)


def minimum_gain(theorem_id, G, gap, constants):
    """mu_min for theorem_id at Grashof number G and alpha - beta = gap"""
    if G < 0:
        raise ThresholdError(f"G must be >= 0, got {G}")
    if G == 0:
        return 0.0
    base = _base_theorem(theorem_id)
    c_L = constants.c_L.value
    if base in (TheoremId.THM_ALL, TheoremId.DET_INTERP):
        return math.pi ** 2 * (c_L ** 4 + gap ** 4) * G ** 2 / gap
    if base == TheoremId.THM_1ST:
        c = constants.c.value
        inner = constants.c_tilde_1st.value + 2.0 * math.log(G) + constants.C.value * G ** 4
        return max(0.0, 32.0 * math.pi ** 2 * c ** 2 * gap * inner * G ** 2)
    if base == TheoremId.THM_V:
        return math.pi ** 2 * c_L ** 4 * G ** 2 * (4.0 + gap ** 2 * G ** 2) ** 2 / (16.0 * gap)
    if base == TheoremId.T2_THM_1:
        c_B, c_T, c_M, C = constants.c_B.value, constants.c_T.value, constants.c_M.value, constants.C.value
        growth = _safe_exp(2.0 * C * G ** 4)
        inner = constants.c_tilde_t2.value + math.log(1.0 + G) + C * G ** 4
        value = 2000.0 * (c_B + c_T) ** 2 * (20.0 * math.pi ** 2 + c_M) * G ** 2 * (1.0 + G ** 2) ** 3
        return value * growth * inner if math.isfinite(growth) else math.inf
    raise ThresholdError(f"unknown theorem {theorem_id!r}")


def _require(constants, *names):
    missing = [name for name in names if getattr(constants, name) is None]
    if missing:
        raise ThresholdError(f"missing constants: {', '.join(missing)}")


def maximum_spacing(theorem_id, mu, G, gap, constants):
    """h_max at gain mu"""
    base = _base_theorem(theorem_id)
    if base == TheoremId.T2_THM_1:
        _require(constants, 'c2', 'c3')
        worst = max(constants.c2.value ** 2, constants.c3.value)
        if mu == 0 or worst == 0:
            return math.inf
        return math.sqrt(gap / (2.0 * mu * worst))
    _require(constants, 'c1')
    c1 = constants.c1.value
    if base == TheoremId.DET_INTERP:
        if G == 0 or c1 == 0:
            return math.inf
        return gap / (math.pi * c1 * math.sqrt(constants.c_L.value ** 4 + gap ** 4) * G)
    if mu == 0 or c1 == 0:
        return math.inf
    h_max = math.sqrt(gap / mu) / c1
    if theorem_id in H1_THEOREMS:
        h_max /= H1_TIGHTENING
    return h_max


@dataclass(frozen=True)
class TheoremThresholds:
    theorem_id: str
    G: float
    alpha_minus_beta: float
    mu_min: float
    mu: float
    h_max: float
    constants_used: dict
    constants: AnalysisConstants = field(default=None, repr=False, compare=False)

    def admits(self, mu, h):
        """Whether (mu, h) satisfies the theorem's hypotheses"""
        if self.theorem_id == TheoremId.T2_THM_1:
            gain_ok = mu >= self.mu_min
        else:
            gain_ok = mu > self.mu_min or (self.mu_min == 0 and mu >= 0)
        return gain_ok and h < maximum_spacing(self.theorem_id, mu, self.G, self.alpha_minus_beta, self.constants)

    def as_dict(self):
        return {
            'theorem_id': self.theorem_id,
            'G': self.G,
            'alpha_minus_beta': self.alpha_minus_beta,
            'mu_min': self.mu_min,
            'mu': self.mu,
            'h_max': self.h_max,
            'constants_used': self.constants_used,
        }


def _constant_names(theorem_id):
    base = _base_theorem(theorem_id)
    names = ['c_L']
    if base == TheoremId.THM_1ST:
        names += ['c', 'c_B', 'c_tilde_1st', 'C']
    elif base == TheoremId.T2_THM_1:
        names = ['c_B', 'c_T', 'c_M', 'c_tilde_t2', 'C']
    names += ['c2', 'c3'] if base == TheoremId.T2_THM_1 else ['c1']
    return names


def theorem_thresholds(theorem_id, G, params, constants, mu=None, margin=DEFAULT_MARGIN):
    """mu_min and h_max for a theorem; h_max is evaluated at ``mu`` or mu_min (1 + margin)"""
    if theorem_id not in TheoremId.values:
        raise ThresholdError(f"unknown theorem {theorem_id!r}")
    gap = params.alpha_minus_beta
    mu_min = minimum_gain(theorem_id, G, gap, constants)
    chosen = mu if mu is not None else mu_min * (1.0 + margin)
    h_max = maximum_spacing(theorem_id, chosen, G, gap, constants)
    ledger = constants.ledger()
    used = {name: ledger[name] for name in _constant_names(theorem_id)}
    return TheoremThresholds(
        theorem_id=str(theorem_id),
        G=float(G),
        alpha_minus_beta=gap,
        mu_min=mu_min,
        mu=chosen,
        h_max=h_max,
        constants_used=used,
        constants=constants,
    )


MASK_THEOREMS = {
    'all': (TheoremId.THM_ALL, TheoremId.THM_H1_ALL),
    'first_component': (TheoremId.THM_1ST, TheoremId.THM_H1_1ST),
    'second_component': (TheoremId.THM_1ST, TheoremId.THM_H1_1ST),
    'v_only': (TheoremId.THM_V, TheoremId.THM_H1_V),
    'w_only': (TheoremId.THM_V, TheoremId.THM_H1_V),
}


def theorems_for(mask, type_class):
    """Theorems whose hypotheses describe an observation setup"""
    if type_class == 2:
        return (TheoremId.T2_THM_1,) if mask in ('first_component', 'second_component') else ()
    return MASK_THEOREMS.get(mask, ())

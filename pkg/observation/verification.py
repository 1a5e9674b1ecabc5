"""Empirical constants for the interpolant inequalities

Type 1:  |u - I_h u| <= c1 h |grad u|
Type 2:  |u - I_h u| <= c2 h |grad u| + c3 h^2 |lap u|

Constants are estimated over random band-limited scalar fields drawn from a
fixed distribution and inflated before being stored.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from core.exceptions import InterpolantError
from spectral.operators import random_scalar_field, squared_norm_coefficients

from .interpolants import interpolate_coefficients

logger = logging.getLogger(__name__)

DEFAULT_INFLATION = 1.05
DECAY_RANGE = (0.5, 3.0)
SPECTRAL_BOUND = 1.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class InterpolantReport:
    kind: str
    h: float
    type_class: int
    n_samples: int
    seed: int
    c1: float = None
    c2: float = None
    c3: float = None
    raw: tuple = ()

    def as_dict(self):
        report = {
            'kind': self.kind, 'h': self.h, 'type_class': self.type_class,
            'n_samples': self.n_samples, 'seed': self.seed,
        }
        if self.type_class == 1:
            report['c1'] = self.c1
        else:
            report.update(c2=self.c2, c3=self.c3)
        return report

    def apply_to(self, spec):
        if self.type_class == 1:
            return spec.with_constants(c1=self.c1)
        return spec.with_constants(c2=self.c2, c3=self.c3)


def sample_fields(grid, n_samples, seed):
    """Deterministic stream of random band-limited scalars

    Each sample draws its spectral slope from DECAY_RANGE and its band limit
    from [2, n // 3], so that gradient and Laplacian norms vary independently.
    """
    for child in np.random.SeedSequence(seed).spawn(n_samples):
        rng = np.random.default_rng(child)
        decay = rng.uniform(*DECAY_RANGE)
        k_max = int(rng.integers(2, grid.dealias_cutoff + 1))
        yield random_scalar_field(grid, child.spawn(1)[0], energy_spectrum_decay=decay, k_max=k_max)


def residual_norms(spec, scalar):
    """(|u - I_h u|, |grad u|, |lap u|) for one sample"""
    grid = scalar.grid
    coefficients = np.array(scalar.coefficients)
    residual = coefficients - interpolate_coefficients(spec, coefficients, grid)
    return (
        math.sqrt(squared_norm_coefficients(residual, grid)),
        math.sqrt(squared_norm_coefficients(coefficients, grid, order=1)),
        math.sqrt(squared_norm_coefficients(coefficients, grid, order=2)),
    )


def _require_type(spec, type_class):
    if spec.type_class != type_class:
        raise InterpolantError(
            f"{spec.get_kind_display()} is a type-{spec.type_class} interpolant, "
            f"not type {type_class}"
        )


def type1_ratios(spec, grid, n_samples, seed):
    ratios = []
    for scalar in sample_fields(grid, n_samples, seed):
        residual, gradient, _ = residual_norms(spec, scalar)
        if gradient > 0:
            ratios.append(residual / (spec.h * gradient))
    return np.array(ratios)


def verify_type1_bound(spec, grid, n_samples=1000, seed=0, inflation=DEFAULT_INFLATION):
    """Largest observed |u - I_h u| / (h |grad u|), stored inflated"""
    _require_type(spec, 1)
    spec.check_grid(grid)
    ratios = type1_ratios(spec, grid, n_samples, seed)
    empirical = float(np.max(ratios)) if ratios.size else 0.0
    if spec.is_spectral and empirical > SPECTRAL_BOUND + 1e-6:
        logger.warning(f"Spectral projection ratio {empirical:.6g} exceeds 1/(2 pi)")
    logger.info(f"Type-1 constant for {spec.kind} h={spec.h:.4g}: c1={empirical:.6g} over {n_samples} fields")
    return InterpolantReport(
        kind=spec.kind, h=spec.h, type_class=1, n_samples=n_samples, seed=seed,
        c1=empirical * inflation, raw=(empirical,),
    )


def _fit_minimal_pair(a, b, r):
    """Smallest (c2, c3) >= 0 with a c2 + b c3 >= r, tight on the active constraints"""
    result = linprog(
        c=[a.sum(), b.sum()],
        A_ub=-np.column_stack([a, b]),
        b_ub=-r,
        bounds=[(0, None), (0, None)],
        method='highs',
    )
    if not result.success:
        raise InterpolantError(f"type-2 constant fit failed: {result.message}")
    c2, c3 = result.x
    slack = a * c2 + b * c3 - r
    active = np.flatnonzero(np.abs(slack) <= 1e-9 * np.maximum(r, 1e-300))
    if active.size >= 2:
        matrix = np.column_stack([a[active], b[active]])
        solution, *_ = np.linalg.lstsq(matrix, r[active], rcond=None)
        if np.all(solution >= 0) and np.all(a * solution[0] + b * solution[1] >= r * (1 - 1e-12)):
            c2, c3 = solution
    return float(c2), float(c3)


def verify_type2_bound(spec, grid, n_samples=1000, seed=0, inflation=DEFAULT_INFLATION):
    """Minimal (c2, c3) over the sample set, stored inflated"""
    _require_type(spec, 2)
    spec.check_grid(grid)
    rows = []
    for scalar in sample_fields(grid, n_samples, seed):
        residual, gradient, laplacian = residual_norms(spec, scalar)
        if residual > 0:
            rows.append((spec.h * gradient, spec.h ** 2 * laplacian, residual))
    if not rows:
        c2 = c3 = 0.0
    else:
        a, b, r = (np.array(column) for column in zip(*rows))
        c2, c3 = _fit_minimal_pair(a, b, r)
    logger.info(
        f"Type-2 constants for {spec.kind} h={spec.h:.4g}: c2={c2:.6g}, c3={c3:.6g} over {n_samples} fields"
    )
    return InterpolantReport(
        kind=spec.kind, h=spec.h, type_class=2, n_samples=n_samples, seed=seed,
        c2=c2 * inflation, c3=c3 * inflation, raw=(c2, c3),
    )


@dataclass(frozen=True)
class InequalityCheck:
    n_samples: int
    violations: int
    worst_ratio: float

    @property
    def passed(self):
        return self.violations == 0

    def as_dict(self):
        return {
            'n_samples': self.n_samples, 'violations': self.violations,
            'worst_ratio': self.worst_ratio, 'passed': self.passed,
        }


def check_interpolant_inequality(spec, grid, n_samples=1000, seed=1):
    """Count fresh fields violating the stored inequality; worst is LHS / RHS"""
    if spec.type_class == 1 and spec.c1 is None or spec.type_class == 2 and None in (spec.c2, spec.c3):
        raise InterpolantError(f"{spec.get_kind_display()} has no stored constants to check")
    violations = 0
    worst = 0.0
    for scalar in sample_fields(grid, n_samples, seed):
        residual, gradient, laplacian = residual_norms(spec, scalar)
        if spec.type_class == 1:
            bound = spec.c1 * spec.h * gradient
        else:
            bound = spec.c2 * spec.h * gradient + spec.c3 * spec.h ** 2 * laplacian
        if residual > bound:
            violations += 1
        if bound > 0:
            worst = max(worst, residual / bound)
    if violations:
        logger.warning(f"{violations} of {n_samples} fields violate the stored {spec.kind} inequality")
    return InequalityCheck(n_samples, violations, worst)

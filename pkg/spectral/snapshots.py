"""Snapshot files for vector fields

Format: a header line ``mhdnudge-field v1, n=<n>`` followed by one CSV row per
wavevector, ``k1,k2,re_c1,im_c1,re_c2,im_c2``, in FFT order. Values are
written with 17 significant digits so that a save/load cycle is exact.
"""
import logging
import re

import numpy as np

from core.exceptions import GridMismatchError, InvalidParameterError

from .fields import Grid, SpectralVectorField

logger = logging.getLogger(__name__)

HEADER_PREFIX = 'mhdnudge-field v1'
HEADER_PATTERN = re.compile(r'^mhdnudge-field v1, n=(\d+)\s*$')
ROW_FORMAT = ['%d', '%d', '%.17g', '%.17g', '%.17g', '%.17g']


def save_snapshot(path, field):
    grid = field.grid
    k1, k2 = grid.wavenumbers
    c = field.coefficients
    rows = np.column_stack([
        k1.ravel(), k2.ravel(),
        c[0].real.ravel(), c[0].imag.ravel(),
        c[1].real.ravel(), c[1].imag.ravel(),
    ])
    np.savetxt(
        path, rows, fmt=ROW_FORMAT, delimiter=',',
        header=f"{HEADER_PREFIX}, n={grid.n}", comments='',
    )
    logger.debug(f"Wrote snapshot n={grid.n} to {path}")


def load_snapshot(path, grid=None):
    """Read a snapshot; ``grid`` (optional) must match the file's resolution"""
    with open(path) as handle:
        header = handle.readline()
        match = HEADER_PATTERN.match(header)
        if not match:
            raise InvalidParameterError(f"{path} is not a field snapshot (header {header.strip()!r})")
        n = int(match.group(1))
        rows = np.loadtxt(handle, delimiter=',', ndmin=2)

    file_grid = Grid(n)
    if grid is not None:
        grid.check_same(file_grid)
    if rows.shape != (n * n, 6):
        raise GridMismatchError(f"{path} holds {rows.shape[0]} rows, expected {n * n}")

    i = np.rint(rows[:, 0]).astype(int) % n
    j = np.rint(rows[:, 1]).astype(int) % n
    coefficients = np.zeros((2, n, n), dtype=complex)
    # write real and imaginary parts separately so signed zeros survive
    for component, column in ((0, 2), (1, 4)):
        coefficients.real[component, i, j] = rows[:, column]
        coefficients.imag[component, i, j] = rows[:, column + 1]
    field = SpectralVectorField(file_grid, coefficients)
    if field.is_divergence_free():
        field = SpectralVectorField(file_grid, coefficients, divergence_free=True)
    return field

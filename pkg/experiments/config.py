"""Experiment config files: flat KEY=VALUE text validated by ExperimentConfigForm"""
import hashlib
import io
import logging
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from django.conf import settings
from dotenv import dotenv_values

from core.exceptions import ConfigurationError, InvalidParameterError
from diagnostics.thresholds import default_constants
from mhd.budget import SpinUpPolicy
from mhd.dynamics import DEFAULT_CFL_SAFETY
from mhd.forcing import Envelope, ForcingKind, Perturbation, grashof_number, kolmogorov_forcing
from mhd.params import derive_elsasser_params
from nudging.assimilation import NudgingConfig, RunSpec
from observation.interpolants import InterpolantSpec
from spectral.fields import Grid
from spectral.operators import random_divfree_field

from .forms import ExperimentConfigForm
from .models import Scenario

logger = logging.getLogger(__name__)

KEY_PATTERN = re.compile(r'^\s*(?:export\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*=')
DIGEST_LENGTH = 12
PERTURBATION_K_MAX = 3
CONSTANT_KEYS = ('c_L', 'c_B', 'c_T', 'c_M', 'c_tilde_1st', 'c_tilde_t2')


def _key_lines(text):
    lines = {}
    for number, line in enumerate(text.splitlines(), start=1):
        match = KEY_PATTERN.match(line)
        if match:
            lines[match.group(1)] = number
    return lines


def _format(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text, seed=None):
    """Validate config text; ``seed`` overrides the file's seed"""
    values = dotenv_values(stream=io.StringIO(text), interpolate=False)
    lines = _key_lines(text)
    fields = ExperimentConfigForm.base_fields

    diagnostics = [
        (key, lines.get(key), 'unknown key')
        for key in values if key not in fields
    ]
    diagnostics += [
        (key, lines.get(key), 'missing value')
        for key, value in values.items() if key in fields and value is None
    ]
    if diagnostics:
        raise ConfigurationError(diagnostics)

    data = {name: _format(value) for name, value in ExperimentConfigForm.defaults().items()}
    data.update(values)
    if seed is not None:
        data['seed'] = str(seed)

    form = ExperimentConfigForm(data=data)
    if not form.is_valid():
        raise ConfigurationError([
            (key, lines.get(key), ' '.join(messages))
            for key, messages in form.errors.items()
        ])
    return ExperimentConfig(dict(form.cleaned_data))


def load_config(path, seed=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        logger.error(f"Cannot read config {path}: {e}")
        raise ConfigurationError([('path', None, f"cannot read {path}: {e.strerror}")])
    config = parse_config(text, seed=seed)
    logger.info(f"Loaded {config.scenario} config from {path} (digest {config.digest})")
    return config


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated config; ``values`` holds the cleaned form data"""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def scenario(self):
        return self.values['scenario']

    @property
    def seed(self):
        return self.values['seed']

    @cached_property
    def text(self):
        """Canonical text with every key, in schema order"""
        return ''.join(
            f"{name}={_format(self.values.get(name))}\n" for name in ExperimentConfigForm.base_fields
        )

    @cached_property
    def digest(self):
        return hashlib.sha256(self.text.encode('utf-8')).hexdigest()[:DIGEST_LENGTH]

    def with_values(self, **changes):
        values = {**self.values, **changes}
        text = ''.join(f"{name}={_format(value)}\n" for name, value in values.items())
        return parse_config(text)

    @property
    def cfl_safety(self):
        configured = self.values.get('cfl_safety')
        if configured:
            return configured
        return getattr(settings, 'MHDNUDGE', {}).get('CFL_SAFETY', DEFAULT_CFL_SAFETY)

    @property
    def output_dir(self):
        configured = self.values.get('output_dir')
        if configured:
            return Path(configured)
        return Path(getattr(settings, 'MHDNUDGE', {}).get('OUTPUT_DIR', 'runs'))

    @property
    def required_orders(self):
        configured = self.values.get('convergence_orders')
        if configured is not None:
            return configured
        return 4.0 if self.scenario == Scenario.TYPE2 else 6.0

    def grid(self):
        return Grid(self.values['n'])

    def params(self):
        return derive_elsasser_params(self.values['Re'], self.values['Rm'])

    def modulation(self):
        if self.values['forcing_kind'] != ForcingKind.MODULATED:
            return None
        return Envelope(
            amplitude=self.values['modulation_amplitude'],
            frequency=self.values['modulation_frequency'],
            offset=self.values['modulation_offset'],
            decay=self.values['modulation_decay'],
        )

    def forcing(self, grid=None, params=None):
        grid = grid or self.grid()
        params = params or self.params()
        return kolmogorov_forcing(
            grid, params, self.values['f1_amplitude'], self.values['g1_amplitude'],
            wavenumber=self.values['forcing_wavenumber'], modulation=self.modulation(),
        )

    def grashof(self):
        params = self.params()
        return grashof_number(self.forcing(params=params), params)

    def interpolant(self):
        return InterpolantSpec(self.values['interpolant'], self.values['h'])

    def spin_up_policy(self):
        return SpinUpPolicy(
            mode=self.values['spinup'],
            max_time=self.values['spinup_max_time'],
            fixed_time=self.values['spinup_time'],
        )

    def constants(self):
        overrides = {key: self.values.get(key) for key in CONSTANT_KEYS}
        return default_constants(**overrides)

    def perturbations(self, grid):
        """(delta1, delta2, eps1, eps2) for perturbed assimilation, or Nones"""
        amplitude = self.values['perturbation_amplitude']
        if amplitude == 0:
            return (None,) * 4
        envelope = Envelope.decaying(self.values['perturbation_decay'])
        k_max = min(PERTURBATION_K_MAX, grid.dealias_cutoff)
        children = np.random.SeedSequence([self.seed, 1]).spawn(4)
        return tuple(
            Perturbation(random_divfree_field(grid, child, k_max=k_max, l2=amplitude), envelope)
            for child in children
        )

    def nudging_config(self, grid, interpolant):
        delta1, delta2, eps1, eps2 = self.perturbations(grid)
        return NudgingConfig(
            mu=self.values['mu'], interpolant=interpolant, mask=self.values['mask'],
            delta1=delta1, delta2=delta2, eps1=eps1, eps2=eps2,
        )

    def run_spec(self, params, forcing, seed=None):
        return RunSpec(
            params=params,
            forcing=forcing,
            dt=self.values['dt'],
            horizon=self.values['horizon'],
            sample_interval=self.values['sample_interval'],
            seed=self.seed if seed is None else seed,
            spin_up=self.spin_up_policy(),
            reference_init=self.values['reference_init'],
            init_mode=self.values['init'],
            initial_l2=self.values['initial_l2'],
            initial_k_max=self.values.get('initial_k_max'),
            cfl_safety=self.cfl_safety,
        )

    def scaled_to_grashof(self, G):
        """Same config with both forcing amplitudes rescaled to Grashof number G"""
        current = self.grashof()
        if current == 0:
            raise InvalidParameterError("cannot rescale a zero forcing to a target Grashof number")
        factor = G / current
        return self.with_values(
            f1_amplitude=self.values['f1_amplitude'] * factor,
            g1_amplitude=self.values['g1_amplitude'] * factor,
        )

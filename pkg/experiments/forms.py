import math

from django import forms

from diagnostics.bounds import MIN_WINDOW_SAMPLES
from mhd.budget import SpinUpMode
from mhd.forcing import ForcingKind
from nudging.assimilation import InitMode, ReferenceInit
from observation.interpolants import InterpolantKind, ObservationMask

from .models import Scenario

STEP_TOLERANCE = 1e-9


def _is_multiple(value, step):
    ratio = value / step
    return round(ratio) >= 1 and abs(ratio - round(ratio)) <= STEP_TOLERANCE * max(1.0, ratio)


class ExperimentConfigForm(forms.Form):
    """Flat key schema of an experiment config file

    Every key in a config file must name one of these fields. Missing keys
    take the field's ``initial`` value (see ``defaults``).
    """

    # run
    scenario = forms.ChoiceField(choices=Scenario.choices, initial=Scenario.BASELINE)
    seed = forms.IntegerField(min_value=0, initial=0)
    n = forms.IntegerField(min_value=8, initial=64, help_text='Grid points per axis')
    Re = forms.FloatField(min_value=0, initial=5.0)
    Rm = forms.FloatField(min_value=0, initial=5.0)
    dt = forms.FloatField(min_value=0, initial=0.005)
    horizon = forms.FloatField(min_value=0, initial=20.0)
    sample_interval = forms.FloatField(min_value=0, initial=0.05)
    spinup = forms.ChoiceField(choices=SpinUpMode.choices, initial=SpinUpMode.SETTLE)
    spinup_time = forms.FloatField(min_value=0, initial=0.0, help_text='Duration of a fixed spin-up')
    spinup_max_time = forms.FloatField(min_value=0, initial=50.0)
    cfl_safety = forms.FloatField(min_value=0, max_value=1, required=False)
    output_dir = forms.CharField(required=False)

    # forcing
    forcing_kind = forms.ChoiceField(choices=ForcingKind.choices, initial=ForcingKind.STEADY)
    f1_amplitude = forms.FloatField(initial=2.0)
    g1_amplitude = forms.FloatField(initial=1.0)
    forcing_wavenumber = forms.IntegerField(min_value=1, initial=1)
    modulation_amplitude = forms.FloatField(initial=0.0)
    modulation_frequency = forms.FloatField(initial=0.0)
    modulation_decay = forms.FloatField(min_value=0, initial=0.0)
    modulation_offset = forms.FloatField(min_value=0, initial=1.0)

    # observation
    interpolant = forms.ChoiceField(choices=InterpolantKind.choices, initial=InterpolantKind.SPECTRAL_PROJECTION)
    h = forms.FloatField(min_value=0, max_value=1, initial=0.125)
    mask = forms.ChoiceField(choices=ObservationMask.choices, initial=ObservationMask.ALL)
    mu = forms.FloatField(min_value=0, initial=50.0)

    # initialization
    reference_init = forms.ChoiceField(choices=ReferenceInit.choices, initial=ReferenceInit.ELSASSER)
    init = forms.ChoiceField(choices=InitMode.choices, initial=InitMode.ZERO)
    initial_l2 = forms.FloatField(min_value=0, initial=1.0)
    initial_k_max = forms.IntegerField(min_value=1, required=False)

    # perturbed assimilation and the determining experiment
    perturbation_amplitude = forms.FloatField(min_value=0, initial=0.0)
    perturbation_decay = forms.FloatField(min_value=0, initial=1.0)
    forcing_difference = forms.FloatField(min_value=0, initial=1.0)
    forcing_difference_decay = forms.FloatField(min_value=0, initial=1.0)
    determining_seed_offset = forms.IntegerField(min_value=0, initial=1)

    # checks
    verify_samples = forms.IntegerField(min_value=1, initial=1000)
    int_bound_control_factor = forms.FloatField(min_value=1, initial=8.0)
    convergence_orders = forms.FloatField(min_value=0, required=False)
    min_r_squared = forms.FloatField(min_value=0, max_value=1, initial=0.98)

    # analysis constants
    c_L = forms.FloatField(min_value=0, required=False)
    c_B = forms.FloatField(min_value=0, required=False)
    c_T = forms.FloatField(min_value=0, required=False)
    c_M = forms.FloatField(min_value=0, required=False)
    c_tilde_1st = forms.FloatField(required=False)
    c_tilde_t2 = forms.FloatField(required=False)

    POSITIVE = ('Re', 'Rm', 'dt', 'horizon', 'sample_interval', 'h', 'initial_l2')

    @classmethod
    def defaults(cls):
        return {
            name: field.initial
            for name, field in cls.base_fields.items()
            if field.initial is not None
        }

    def clean(self):
        cleaned_data = super().clean()
        for name in self.POSITIVE:
            value = cleaned_data.get(name)
            if value is not None and not (value > 0 and math.isfinite(value)):
                self.add_error(name, 'Must be positive and finite.')

        n = cleaned_data.get('n')
        if n is not None and n % 2:
            self.add_error('n', 'Grid size must be even.')
            n = None
        cutoff = n // 3 if n else None

        h = cleaned_data.get('h')
        kind = cleaned_data.get('interpolant')
        if h and h > 0:
            resolution = 1.0 / h
            if abs(resolution - round(resolution)) > STEP_TOLERANCE * resolution:
                self.add_error('h', '1/h must be an integer.')
            elif cutoff and kind == InterpolantKind.SPECTRAL_PROJECTION and round(resolution) > cutoff:
                self.add_error('h', f"Projection onto |k| <= {round(resolution)} exceeds the dealiased range {cutoff}.")
            elif n and kind and kind != InterpolantKind.SPECTRAL_PROJECTION and n % round(resolution):
                self.add_error('h', f"{round(resolution)} cells per axis do not divide n={n}.")

        for name in ('initial_k_max', 'forcing_wavenumber'):
            value = cleaned_data.get(name)
            if cutoff and value is not None and value > cutoff:
                self.add_error(name, f"Must not exceed the dealiased cutoff {cutoff}.")

        dt = cleaned_data.get('dt')
        if dt and dt > 0:
            for name in ('sample_interval', 'horizon'):
                value = cleaned_data.get(name)
                if value and value > 0 and not _is_multiple(value, dt):
                    self.add_error(name, f"Must be a whole number of steps dt={dt}.")

        Re, Rm = cleaned_data.get('Re'), cleaned_data.get('Rm')
        interval = cleaned_data.get('sample_interval')
        if Re and Rm and interval and Re > 0 and Rm > 0 and interval > 0:
            # analysis window T = 1 / (pi^2 (alpha - beta)) = max(Re, Rm) / pi^2
            window = max(Re, Rm) / math.pi ** 2
            if round(window / interval) + 1 < MIN_WINDOW_SAMPLES:
                self.add_error(
                    'sample_interval',
                    f"Need at least {MIN_WINDOW_SAMPLES} samples per analysis window T={window:.4g}.",
                )

        if cleaned_data.get('forcing_kind') == ForcingKind.MODULATED:
            amplitude, offset = cleaned_data.get('modulation_amplitude'), cleaned_data.get('modulation_offset')
            if not amplitude:
                self.add_error('modulation_amplitude', 'Modulated forcing needs a nonzero amplitude.')
            elif offset is not None and abs(amplitude) > offset:
                self.add_error('modulation_offset', 'The modulation offset must be at least the amplitude.')

        self._clean_scenario(cleaned_data)
        return cleaned_data

    def _clean_scenario(self, cleaned_data):
        scenario = cleaned_data.get('scenario')
        mask = cleaned_data.get('mask')
        kind = cleaned_data.get('interpolant')
        if scenario == Scenario.TYPE2:
            if kind and kind != InterpolantKind.NODAL_BILINEAR:
                self.add_error('interpolant', 'Type2 runs use the nodal interpolant.')
            if mask and mask not in (ObservationMask.FIRST_COMPONENT, ObservationMask.SECOND_COMPONENT):
                self.add_error('mask', 'Type2 runs observe first (or second) components.')
        elif scenario == Scenario.B_ONLY_CONTROL:
            if mask and mask != ObservationMask.B_ONLY:
                self.add_error('mask', 'BOnlyControl observes the magnetic field only.')
            if cleaned_data.get('g1_amplitude'):
                self.add_error('g1_amplitude', 'BOnlyControl needs g1 = 0.')
            if cleaned_data.get('reference_init') and cleaned_data['reference_init'] != ReferenceInit.VELOCITY_ONLY:
                self.add_error('reference_init', 'BOnlyControl needs a reference with b = 0.')
        elif scenario == Scenario.U_ONLY_EXPLORATORY:
            if mask and mask != ObservationMask.U_ONLY:
                self.add_error('mask', 'UOnlyExploratory observes the velocity only.')
        elif scenario == Scenario.DETERMINING:
            if kind and kind == InterpolantKind.NODAL_BILINEAR:
                self.add_error('interpolant', 'The determining experiment needs a type-1 interpolant.')
        elif scenario == Scenario.GENERALIZED_DA:
            if not cleaned_data.get('perturbation_amplitude'):
                self.add_error('perturbation_amplitude', 'GeneralizedDA needs nonzero perturbations.')

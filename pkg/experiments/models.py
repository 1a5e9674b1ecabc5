from django.db import models


class Scenario(models.TextChoices):
    BASELINE = 'Baseline', 'Baseline synchronization'
    H1_TRACK = 'H1Track', 'H1 tracking'
    TYPE2 = 'Type2', 'Type-2 interpolant'
    GENERALIZED_DA = 'GeneralizedDA', 'Perturbed (generalized) assimilation'
    DETERMINING = 'DeterminingInterpolant', 'Determining interpolant'
    B_ONLY_CONTROL = 'BOnlyControl', 'Magnetic-only negative control'
    U_ONLY_EXPLORATORY = 'UOnlyExploratory', 'Velocity-only exploratory run'


class RunAction(models.TextChoices):
    RUN = 'run', 'Scenario run'
    VERIFY_INTERPOLANT = 'verify_interpolant', 'Interpolant verification'
    DETERMINING = 'determining', 'Determining experiment'


class SweepAxis(models.TextChoices):
    MU = 'mu', 'Nudging gain'
    H = 'h', 'Observation spacing'
    G = 'G', 'Grashof number'


class Sweep(models.Model):
    """A batch of runs varying one parameter of a base configuration"""

    axis = models.CharField(max_length=4, choices=SweepAxis.choices)
    values = models.CharField(max_length=500)
    config_text = models.TextField()
    directory = models.CharField(max_length=500)
    failures = models.PositiveIntegerField(default=0)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"Sweep over {self.axis} ({self.values})"


class ExperimentRun(models.Model):
    """Provenance record of one run; the run directory is the source of truth"""

    action = models.CharField(max_length=24, choices=RunAction.choices, default=RunAction.RUN)
    scenario = models.CharField(max_length=32, choices=Scenario.choices)
    seed = models.PositiveIntegerField()
    digest = models.CharField(max_length=16)
    config_text = models.TextField()
    directory = models.CharField(max_length=500, blank=True)
    exit_code = models.SmallIntegerField(null=True, blank=True)
    summary = models.JSONField(default=dict, blank=True)
    error = models.TextField(blank=True)
    runtime_seconds = models.FloatField(null=True, blank=True)
    sweep = models.ForeignKey(Sweep, on_delete=models.SET_NULL, null=True, blank=True, related_name='runs')
    sweep_value = models.FloatField(null=True, blank=True)
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']

    def __str__(self):
        return f"{self.scenario} seed={self.seed} [{self.digest}]"

    @property
    def passed(self):
        return self.exit_code == 0

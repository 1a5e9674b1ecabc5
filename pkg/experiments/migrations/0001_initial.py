# Generated by Django 4.2.16 on 2026-10-18 10:02

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Sweep',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('axis', models.CharField(choices=[('mu', 'Nudging gain'), ('h', 'Observation spacing'), ('G', 'Grashof number')], max_length=4)),
                ('values', models.CharField(max_length=500)),
                ('config_text', models.TextField()),
                ('directory', models.CharField(max_length=500)),
                ('failures', models.PositiveIntegerField(default=0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('action', models.CharField(choices=[('run', 'Scenario run'), ('verify_interpolant', 'Interpolant verification'), ('determining', 'Determining experiment')], default='run', max_length=24)),
                ('scenario', models.CharField(choices=[('Baseline', 'Baseline synchronization'), ('H1Track', 'H1 tracking'), ('Type2', 'Type-2 interpolant'), ('GeneralizedDA', 'Perturbed (generalized) assimilation'), ('DeterminingInterpolant', 'Determining interpolant'), ('BOnlyControl', 'Magnetic-only negative control'), ('UOnlyExploratory', 'Velocity-only exploratory run')], max_length=32)),
                ('seed', models.PositiveIntegerField()),
                ('digest', models.CharField(max_length=16)),
                ('config_text', models.TextField()),
                ('directory', models.CharField(blank=True, max_length=500)),
                ('exit_code', models.SmallIntegerField(blank=True, null=True)),
                ('summary', models.JSONField(blank=True, default=dict)),
                ('error', models.TextField(blank=True)),
                ('runtime_seconds', models.FloatField(blank=True, null=True)),
                ('sweep_value', models.FloatField(blank=True, null=True)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
                ('sweep', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='runs', to='experiments.sweep')),
            ],
            options={
                'ordering': ['-started_at'],
            },
        ),
    ]

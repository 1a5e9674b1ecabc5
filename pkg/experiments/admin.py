from django.contrib import admin

from .models import ExperimentRun, Sweep


class ExperimentRunInline(admin.TabularInline):
    model = ExperimentRun
    extra = 0
    fields = ('sweep_value', 'scenario', 'exit_code', 'directory', 'runtime_seconds')
    readonly_fields = fields
    show_change_link = True


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('action', 'scenario', 'seed', 'digest', 'exit_code', 'runtime_seconds', 'started_at')
    list_filter = ('action', 'scenario', 'exit_code', 'started_at')
    search_fields = ('digest', 'directory', 'config_text')
    readonly_fields = ('started_at', 'finished_at', 'summary', 'config_text', 'digest')
    fieldsets = (
        (None, {
            'fields': ('action', 'scenario', 'seed', 'digest', 'exit_code', 'error')
        }),
        ('Output', {
            'fields': ('directory', 'summary')
        }),
        ('Configuration', {
            'fields': ('config_text',),
            'classes': ('collapse',)
        }),
        ('Sweep', {
            'fields': ('sweep', 'sweep_value'),
            'classes': ('collapse',)
        }),
        ('Timing', {
            'fields': ('runtime_seconds', 'started_at', 'finished_at'),
            'classes': ('collapse',)
        }),
    )


@admin.register(Sweep)
class SweepAdmin(admin.ModelAdmin):
    list_display = ('axis', 'values', 'failures', 'created_at', 'finished_at')
    list_filter = ('axis', 'created_at')
    readonly_fields = ('created_at', 'finished_at')
    inlines = [ExperimentRunInline]

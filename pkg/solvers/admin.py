"""
Admin configuration for solver run records.
"""
from django.contrib import admin
from django.utils.html import format_html

from .models import SolveRun

STATUS_COLORS = {
    'pending': '#6c757d',
    'running': '#007bff',
    'success': '#28a745',
    'failed': '#dc3545',
}


@admin.register(SolveRun)
class SolveRunAdmin(admin.ModelAdmin):
    list_display = ['id', 'command', 'model_source', 'status_badge', 'exit_code', 'wall_time', 'created_at']
    list_filter = ['command', 'status']
    search_fields = ['command', 'model_source']
    readonly_fields = ['created_at', 'updated_at', 'report', 'error', 'wall_time', 'exit_code']
    actions = ['rerun_in_background']

    fieldsets = (
        ('Invocation', {
            'fields': ('command', 'argv', 'model_source', 'seed')
        }),
        ('Outcome', {
            'fields': ('status', 'exit_code', 'wall_time', 'report', 'error')
        }),
        ('Timestamps', {
            'fields': ('created_at', 'updated_at'),
            'classes': ('collapse',)
        }),
    )

    def status_badge(self, obj):
        return format_html(
            '<span style="background-color: {}; color: white; padding: 3px 10px; '
            'border-radius: 3px; font-weight: bold;">{}</span>',
            STATUS_COLORS.get(obj.status, '#6c757d'),
            obj.get_status_display(),
        )
    status_badge.short_description = 'Status'
    status_badge.admin_order_field = 'status'

    def rerun_in_background(self, request, queryset):
        """Reset finished runs and queue them for a worker."""
        from .tasks import run_samg_command

        queued = 0
        for run in queryset.exclude(status='running'):
            run.status = 'pending'
            run.save(update_fields=['status', 'updated_at'])
            run_samg_command.delay(run.pk)
            queued += 1

        self.message_user(request, f'{queued} runs queued.')
    rerun_in_background.short_description = 'Re-run in background'

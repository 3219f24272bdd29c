"""
Persistent record of solver command invocations.
"""
from django.db import models


class SolveRun(models.Model):
    """
    One invocation of the samg command, stored with its machine-readable report.
    """

    STATUS_CHOICES = [
        ('pending', 'Pending'),
        ('running', 'Running'),
        ('success', 'Success'),
        ('failed', 'Failed'),
    ]

    command = models.CharField(max_length=32, help_text='Sub-command name (e.g., "worst-case")')

    argv = models.JSONField(default=list, help_text='Arguments after the command name')

    model_source = models.CharField(
        max_length=255,
        blank=True,
        help_text='Builtin name or model file path'
    )

    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='pending')

    exit_code = models.IntegerField(null=True, blank=True)

    seed = models.IntegerField(null=True, blank=True)

    report = models.TextField(blank=True, help_text='Flat key = value machine report')

    error = models.TextField(blank=True)

    wall_time = models.FloatField(null=True, blank=True, help_text='Seconds')

    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        verbose_name = 'Solve Run'
        verbose_name_plural = 'Solve Runs'
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command} ({self.model_source or 'no model'}) - {self.status}"

    @property
    def is_finished(self):
        return self.status in ('success', 'failed')

    def mark_running(self):
        self.status = 'running'
        self.save(update_fields=['status', 'updated_at'])

    def mark_finished(self, exit_code, report='', error='', wall_time=None):
        self.status = 'success' if exit_code == 0 else 'failed'
        self.exit_code = exit_code
        self.report = report
        self.error = error
        self.wall_time = wall_time
        self.save(update_fields=['status', 'exit_code', 'report', 'error', 'wall_time', 'updated_at'])

    def report_entries(self):
        """Parse the stored report back into a dict of strings."""
        entries = {}
        for line in self.report.splitlines():
            if ' = ' in line:
                key, value = line.split(' = ', 1)
                entries[key] = value
        return entries

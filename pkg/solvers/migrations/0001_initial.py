# Generated by Django 5.0 on 2026-10-17 09:00

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SolveRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(help_text='Sub-command name (e.g., "worst-case")', max_length=32)),
                ('argv', models.JSONField(default=list, help_text='Arguments after the command name')),
                ('model_source', models.CharField(blank=True, help_text='Builtin name or model file path', max_length=255)),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('success', 'Success'), ('failed', 'Failed')], default='pending', max_length=10)),
                ('exit_code', models.IntegerField(blank=True, null=True)),
                ('seed', models.IntegerField(blank=True, null=True)),
                ('report', models.TextField(blank=True, help_text='Flat key = value machine report')),
                ('error', models.TextField(blank=True)),
                ('wall_time', models.FloatField(blank=True, help_text='Seconds', null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'verbose_name': 'Solve Run',
                'verbose_name_plural': 'Solve Runs',
                'ordering': ['-created_at'],
            },
        ),
    ]

# Generated by Django 5.2.8 on 2026-10-17 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='StageRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('stage', models.CharField(choices=[('extract', 'Feature extraction'), ('gt', 'Ground-truth maps'), ('sample', 'Sampling'), ('train', 'Training'), ('eval', 'Evaluation'), ('predict', 'Prediction')], max_length=16)),
                ('started_at', models.DateTimeField()),
                ('finished_at', models.DateTimeField()),
                ('success', models.BooleanField(default=False)),
                ('produced', models.PositiveIntegerField(default=0)),
                ('skipped', models.PositiveIntegerField(default=0)),
                ('failed', models.PositiveIntegerField(default=0)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('message', models.TextField(blank=True, help_text='Summary line or error message of the run.')),
            ],
            options={
                'verbose_name': 'stage run',
                'verbose_name_plural': 'stage runs',
                'ordering': ('-started_at',),
            },
        ),
    ]

from django.db import models
from django.utils.translation import gettext_lazy as _


class StageRun(models.Model):
    STAGE_EXTRACT = "extract"
    STAGE_GT = "gt"
    STAGE_SAMPLE = "sample"
    STAGE_TRAIN = "train"
    STAGE_EVAL = "eval"
    STAGE_PREDICT = "predict"

    STAGE_CHOICES = (
        (STAGE_EXTRACT, "Feature extraction"),
        (STAGE_GT, "Ground-truth maps"),
        (STAGE_SAMPLE, "Sampling"),
        (STAGE_TRAIN, "Training"),
        (STAGE_EVAL, "Evaluation"),
        (STAGE_PREDICT, "Prediction"),
    )

    stage = models.CharField(max_length=16, choices=STAGE_CHOICES)
    started_at = models.DateTimeField()
    finished_at = models.DateTimeField()
    success = models.BooleanField(default=False)
    produced = models.PositiveIntegerField(default=0)
    skipped = models.PositiveIntegerField(default=0)
    failed = models.PositiveIntegerField(default=0)
    output_dir = models.CharField(max_length=500, blank=True)
    message = models.TextField(
        blank=True,
        help_text=_("Summary line or error message of the run."),
    )

    class Meta:
        ordering = ("-started_at",)
        verbose_name = _("stage run")
        verbose_name_plural = _("stage runs")

    def __str__(self) -> str:
        state = "ok" if self.success else "failed"
        return f"{self.stage} {state} @ {self.started_at:%Y-%m-%d %H:%M:%S}"

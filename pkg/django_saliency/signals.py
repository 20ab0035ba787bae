import logging

from django.dispatch import Signal, receiver

from .conf import get_setting

logger = logging.getLogger(__name__)

# Sent by every saliency management command when its stage ends.
# kwargs: stage, started_at, finished_at, success, produced, skipped,
# failed, output_dir, message, log_runs
stage_finished = Signal()


@receiver(stage_finished)
def record_stage_run(sender, stage, started_at, finished_at, success, **kwargs):
    log_runs = kwargs.get("log_runs")
    if log_runs is None:
        log_runs = get_setting("LOG_RUNS")
    if not log_runs:
        return

    from .models import StageRun

    try:
        StageRun.objects.create(
            stage=stage,
            started_at=started_at,
            finished_at=finished_at,
            success=success,
            produced=kwargs.get("produced", 0),
            skipped=kwargs.get("skipped", 0),
            failed=kwargs.get("failed", 0),
            output_dir=str(kwargs.get("output_dir", ""))[:500],
            message=kwargs.get("message", "")[:4000],
        )
    except Exception:
        # Never break the stage on a run-log failure.
        logger.exception("Failed to record %s stage run", stage)

from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from django_saliency.core import SaliencyError
from django_saliency.pipeline import SaliencyPipeline, StageResult
from django_saliency.runconfig import load_run_config
from django_saliency.signals import stage_finished


class SaliencyCommand(BaseCommand):
    """Common flags, config resolution, run logging and error translation for the stage commands."""

    stage = ""

    def add_arguments(self, parser):
        parser.add_argument("--config", help="Key-value config file (key = value per line).")
        parser.add_argument("--seed", type=int, help="Global seed; per-stage seeds derive from it.")
        parser.add_argument("--jobs", type=int, help="Worker processes (default: CPU count).")
        parser.add_argument("--force", action="store_true", help="Recompute up-to-date outputs.")
        parser.add_argument("--out", help="Output directory.")
        parser.add_argument("--manifest", help="Corpus manifest CSV.")

    def config_overrides(self, options) -> dict:
        return {}

    def run_stage(self, pipeline: SaliencyPipeline, options) -> StageResult:
        raise NotImplementedError

    def handle(self, *args, **options):
        started_at = timezone.now()
        overrides = {
            "seed": options.get("seed"),
            "jobs": options.get("jobs"),
            "out": options.get("out"),
            "manifest": options.get("manifest"),
        }
        overrides.update(self.config_overrides(options))
        log_runs = None
        result = StageResult(self.stage)
        try:
            config = load_run_config(options.get("config"), overrides)
            log_runs = config.log_runs
            result = self.run_stage(SaliencyPipeline(config), options)
        except SaliencyError as exc:
            self._finished(started_at, result, False, str(exc), log_runs, output_dir="")
            raise CommandError(str(exc))

        message = result.summary()
        self._finished(started_at, result, result.ok, message, log_runs, output_dir=config.out)
        if not result.ok:
            raise CommandError(message)
        self.stdout.write(self.style.SUCCESS(message))

    def _finished(self, started_at, result, success, message, log_runs, output_dir):
        stage_finished.send(
            sender=self.__class__,
            stage=self.stage,
            started_at=started_at,
            finished_at=timezone.now(),
            success=success,
            produced=result.produced,
            skipped=result.skipped,
            failed=len(result.failed),
            output_dir=output_dir,
            message=message,
            log_runs=log_runs,
        )

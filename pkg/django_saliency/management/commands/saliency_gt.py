from ._base import SaliencyCommand


class Command(SaliencyCommand):
    help = "Build ground-truth saliency maps from the recorded fixations."
    stage = "gt"

    def run_stage(self, pipeline, options):
        return pipeline.ground_truth(force=options["force"])

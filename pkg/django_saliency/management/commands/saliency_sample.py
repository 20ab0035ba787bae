from ._base import SaliencyCommand


class Command(SaliencyCommand):
    help = "Split the corpus and draw the labelled train and test sample matrices."
    stage = "sample"

    def run_stage(self, pipeline, options):
        return pipeline.sample(force=options["force"])

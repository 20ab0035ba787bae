from django_saliency.learners import METHODS
from django_saliency.pipeline import PROTOCOLS

from ._base import SaliencyCommand


class Command(SaliencyCommand):
    help = "Evaluate classifiers and write the metrics table and ROC curves."
    stage = "eval"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--method", choices=METHODS, default="svm")
        parser.add_argument("--all-methods", action="store_true", help="Evaluate all five methods.")
        parser.add_argument(
            "--protocol",
            choices=PROTOCOLS,
            default="cv",
            help="cv: stratified k-fold on the training samples; holdout: trained models on the test samples.",
        )

    def run_stage(self, pipeline, options):
        methods = METHODS if options["all_methods"] else (options["method"],)
        result, reports = pipeline.evaluate(methods, protocol=options["protocol"])
        for name, report in reports:
            self.stdout.write(
                f"{name:<9} CA {report.ca:.4f}  Sens {report.sensitivity:.4f}  "
                f"Spec {report.specificity:.4f}  AUC {report.auc:.4f}  "
                f"Prec {report.precision:.4f}  Recall {report.recall:.4f}"
            )
        return result

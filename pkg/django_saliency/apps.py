from django.apps import AppConfig


class SaliencyAppConfig(AppConfig):
    name = "django_saliency"
    verbose_name = "Saliency"
    default_auto_field = "django.db.models.BigAutoField"

    def ready(self):
        from . import signals  # noqa

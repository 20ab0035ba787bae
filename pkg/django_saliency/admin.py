from django.contrib import admin

from .models import StageRun


@admin.register(StageRun)
class StageRunAdmin(admin.ModelAdmin):
    list_display = ("started_at", "stage", "success", "produced", "skipped", "failed", "output_dir")
    list_filter = ("stage", "success")
    readonly_fields = (
        "stage",
        "started_at",
        "finished_at",
        "success",
        "produced",
        "skipped",
        "failed",
        "output_dir",
        "message",
    )
    search_fields = ("output_dir", "message")

    # Rows come from the stage commands only.
    def has_add_permission(self, request):
        return False

    def has_change_permission(self, request, obj=None):
        return False

    def has_delete_permission(self, request, obj=None):
        return False

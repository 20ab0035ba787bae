# Test wiring: run the Django test suite under plain pytest, using the
# example project's settings and a throwaway test database (the same setup
# `manage.py test` performs).
import os
import sys
from pathlib import Path

import django
import pytest

EXAMPLE_PROJECT = Path(__file__).resolve().parent / "example_project"
if str(EXAMPLE_PROJECT) not in sys.path:
    sys.path.insert(0, str(EXAMPLE_PROJECT))

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "example_project.settings")
django.setup()


@pytest.fixture(scope="session", autouse=True)
def _django_test_environment():
    from django.test.utils import setup_test_environment, teardown_test_environment
    from django.test.runner import DiscoverRunner

    setup_test_environment()
    runner = DiscoverRunner(verbosity=0, interactive=False)
    old_config = runner.setup_databases()
    yield
    runner.teardown_databases(old_config)
    teardown_test_environment()

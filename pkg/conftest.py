import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'Project'))
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'Project.settings')

import django  # noqa: E402

django.setup()

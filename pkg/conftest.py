import os
import sys
from pathlib import Path

# Add src to the path so pytest can find the package without installing it
BASE_DIR = Path(__file__).resolve().parent
src_path = str(BASE_DIR / "src")

if src_path not in sys.path:
    sys.path.insert(0, src_path)

# pytest-django calls django.setup() with these settings
os.environ.setdefault("DJANGO_SETTINGS_MODULE", "gridfusion.settings")

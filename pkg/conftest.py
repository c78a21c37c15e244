# Flat layout: make `config`, `models`, `services` and `utils` importable from tests
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import os
import sys

# allow running pytest from a fresh checkout without installing
_src = os.path.join(os.path.dirname(__file__), os.pardir, "src")
if os.path.isdir(_src) and _src not in sys.path:
    sys.path.insert(0, os.path.abspath(_src))

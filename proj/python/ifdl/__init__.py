"""Python surface of the forgery detection/localization pipeline.

The compiled extension lives inside this package when installed as a
wheel; during in-tree development it sits on PYTHONPATH next to the build
outputs, hence the fallback import.
"""

try:
    from ._ifdl import *  # noqa: F401,F403
    from ._ifdl import __doc__  # noqa: F401
except ImportError:  # in-tree builds: extension not packaged yet
    from _ifdl import *  # noqa: F401,F403

__version__ = "0.1.0"

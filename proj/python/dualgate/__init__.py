"""Python bindings for the dualgate C++ core."""

import json

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_experiment as _run_experiment


def run(name, parameters=None, seed=0, out_dir=""):
    """Run an experiment and return its summary as a dict."""
    config = json.dumps({"parameters": parameters or {}})
    return json.loads(_run_experiment(name, config, seed, out_dir))

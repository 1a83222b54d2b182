"""Secure precoding and reliability optimization for finite-blocklength downlinks.

The main entry points are :func:`fblsecure.joint.joint_solve` for one drop
and :func:`fblsecure.harness.run_sweep` for Monte-Carlo sweeps; the
``fblsecure`` command wraps both.
"""

import logging

from .channel import ScenarioConfig, generate_drop
from .core import FblParams
from .harness import SweepSpec, run_sweep
from .joint import JointSettings, joint_solve

__version__ = "0.1.0"

# the library only emits records; applications decide where they go
logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = ["FblParams", "ScenarioConfig", "generate_drop", "JointSettings", "joint_solve",
           "SweepSpec", "run_sweep", "__version__"]

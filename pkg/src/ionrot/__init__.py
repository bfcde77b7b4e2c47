"""Inverse-engineered fast rotations of a two-ion chain.

Submodules: ``units``, ``chain``, ``ansatz``, ``sta`` (normal-mode design),
``quantum`` (split-operator verifier), ``doublewell`` and ``cli``.
"""
__version__ = "0.1.0"

from .ansatz import RotationAnsatz  # noqa: E402
from .chain import BE9, CA40, IonPair, RigidHarmonicTrap  # noqa: E402
from .units import CC, HBAR  # noqa: E402

__all__ = ["RotationAnsatz", "IonPair", "RigidHarmonicTrap", "CA40", "BE9", "CC", "HBAR", "__version__"]

"""Numerical tolerances used across the package."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Config:
    """Global tolerances.

    Attributes
    ----------
    tol_frame : float
        Allowed defect in ``|u| = |v|`` and ``u . v = 0`` for conformal frames.
    tol_contain : float
        Slack used when a containment test sits exactly on the boundary.
    """

    tol_frame: float = 1e-10
    tol_contain: float = 1e-9


DEFAULT = Config()

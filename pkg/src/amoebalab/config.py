"""Numerical tolerances shared by every module.

Each tolerance lives in exactly one place: the :class:`Tolerances` record.
Functions that need one accept an optional ``tol`` argument and fall back to
:data:`DEFAULT`.  The CLI builds an overridden copy from ``--tolerance``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # numerics
    root_residual: float = 1e-10
    hull_duplicate: float = 1e-9
    level_residual: float = 1e-8
    superadditivity: float = 1e-12
    # laurent / plane amoeba
    on_curve: float = 1e-8
    order_integrality: float = 1e-3
    critical_im_r: float = 1e-9
    ronkin_agreement: float = 1e-10
    # riemann
    period_real: float = 1e-10
    residue_sum: float = 1e-14
    pole_distance: float = 1e-12
    path_clearance: float = 1e-6
    legendre: float = 1e-12
    # gen amoeba
    critical_value: float = 1e-6
    path_perturbation: float = 1e-4
    polygon_agreement: float = 1e-6
    tie_epsilon: float = 1e-9
    area_slack: float = 0.02
    # blochspec
    theta_tail: float = 1e-15
    singular_coefficient: float = 1e-13

    def replace(self, **overrides: float) -> "Tolerances":
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise KeyError(f"unknown tolerance(s): {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT = Tolerances()


def thread_cap() -> int:
    """Parallelism cap from ``AMOEBALAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("AMOEBALAB_THREADS", "1")))
    except ValueError:
        return 1

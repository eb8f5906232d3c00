"""Run parameters."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

ALPHA_DEFAULT = 1.0 - math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class Parameters:
    """Meshing parameters.

    Angles are in radians except the smoothing threshold, which is in degrees.
    ``sizing`` is a constant, ``math.inf``, or a callable mapping an
    ``(n, 3)`` array of positions to ``n`` radii.
    """

    theta_sharp: float = math.radians(60.0)
    lipschitz: float = 0.25
    sizing: object = math.inf
    alpha: float = ALPHA_DEFAULT
    rng_seed: int = 0
    smoothing_dihedral_threshold: float = 175.0
    smoothing_iterations: int = 6
    miss_limit: int = 100
    density_rejection_prob: float = 0.1
    max_sliver_iterations: int = 100
    crease_samples: int = 10**5
    surface_samples: int = 10**6
    coverage_samples: int = 10**6
    safe_mode: bool = True
    max_pool_depth: int = 64
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.theta_sharp < math.pi / 2:
            raise ValueError("theta_sharp must lie in (0, pi/2)")
        if not 0 < self.lipschitz < 1:
            raise ValueError("lipschitz must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not callable(self.sizing) and not self.sizing > 0:
            raise ValueError("sizing must be positive")
        if not 0 <= self.density_rejection_prob <= 1:
            raise ValueError("density_rejection_prob must lie in [0, 1]")
        if self.miss_limit < 1 or self.max_sliver_iterations < 0:
            raise ValueError("iteration limits must be positive")

    @classmethod
    def desk(cls, **kw):
        """Smaller supersample counts for quick runs and tests."""
        kw.setdefault("crease_samples", 10**4)
        kw.setdefault("surface_samples", 10**5)
        kw.setdefault("coverage_samples", 10**5)
        return cls(**kw)

    def with_(self, **kw):
        return replace(self, **kw)

    def sizing_at(self, pts):
        import numpy as np

        pts = np.atleast_2d(pts)
        if callable(self.sizing):
            return np.asarray(self.sizing(pts), dtype=float).reshape(len(pts))
        return np.full(len(pts), float(self.sizing))

    def to_dict(self):
        d = asdict(self)
        d["sizing"] = "callable" if callable(self.sizing) else (
            "infinity" if math.isinf(self.sizing) else self.sizing
        )
        d["theta_sharp_deg"] = math.degrees(self.theta_sharp)
        return d

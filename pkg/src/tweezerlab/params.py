"""Fixed problem constants for the two-tweezer transport problem."""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class PhysicsParams:
    """All fixed constants of the transport problem.

    The atom starts in the ground state of a fixed Gaussian tweezer at
    ``x_start`` and must be delivered to the mirror-image tweezer well at
    ``x_end``.  The controllable tweezer may sit anywhere in the domain
    with an amplitude in ``[amp_min, amp_max]``.
    """

    mass: float = 1.0
    B: float = 130.0
    sigma: float = 1.0 / 8.0
    x_start: float = 0.55
    x_end: float = -0.55
    amp_min: float = 0.0
    amp_max: float = 160.0
    domain_half_width: float = 1.0

    def __post_init__(self):
        if self.amp_min < 0:
            raise ValueError("amp_min must be >= 0")
        if self.amp_max <= self.amp_min:
            raise ValueError("amp_max must exceed amp_min")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        hw = self.domain_half_width
        if not (abs(self.x_start) < hw and abs(self.x_end) < hw):
            raise ValueError("tweezer centers must lie strictly inside the domain")


DEFAULT_PARAMS = PhysicsParams()

# Steps per unit time used throughout: N = round(T / TIME_PER_STEP).
TIME_PER_STEP = 0.0025

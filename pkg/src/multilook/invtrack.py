"""Track the measurement-covariance inverse across PGD iterations.

An exact inverse is computed on the first update or whenever the
estimate moved more than ``delta_threshold`` in the sup norm since the
previous update; otherwise the previous inverse is refined with
Newton-Schulz steps (one by default, which is all PGD needs).
"""

from __future__ import annotations

import numpy as np

from . import cxla
from .errors import UsageError

DEFAULT_DELTA = 0.12


class InverseTracker:
    def __init__(self, a: np.ndarray, sigma_wc: float, sigma_zc: float,
                 delta_threshold: float = DEFAULT_DELTA, ns_steps: int = 1):
        if delta_threshold <= 0:
            raise ValueError("delta_threshold must be positive")
        self.a = a
        self.sigma_wc = sigma_wc
        self.sigma_zc = sigma_zc
        self.delta_threshold = delta_threshold
        self.ns_steps = ns_steps
        self.current: cxla.HermitianInverse | None = None
        self.last_x: np.ndarray | None = None
        self.exact_count = 0
        self.ns_count = 0
        self.force_exact = False   # experiment knob: always take the exact path
        self.frozen = False        # experiment knob: stop updating entirely

    def _blocks(self, x: np.ndarray) -> cxla.BlockSymmetric:
        return cxla.assemble_b(x, self.a, self.sigma_wc, self.sigma_zc)

    def update(self, x_new: np.ndarray) -> cxla.HermitianInverse:
        x_new = np.asarray(x_new, dtype=float)
        if self.frozen and self.current is not None:
            return self.current
        first = self.current is None
        drift = np.inf if first else float(np.max(np.abs(x_new - self.last_x)))
        if first or self.force_exact or drift > self.delta_threshold:
            self.current = cxla.exact_inverse(self._blocks(x_new))
            self.exact_count += 1
        else:
            b = self._blocks(x_new)
            m = self.current
            for _ in range(self.ns_steps):
                m = cxla.newton_schulz_step(b, m)
            self.current = m
            self.ns_count += 1
        self.last_x = x_new.copy()
        return self.current

    def residual(self, x: np.ndarray) -> float:
        """||I - M B(x)||_F / sqrt(2m) for the tracked inverse M."""
        if self.current is None:
            raise UsageError("tracker has no inverse yet; call update first")
        bc = self._blocks(x).as_complex()
        mc = self.current.as_complex()
        r = np.eye(bc.shape[0], dtype=complex) - mc @ bc
        # Frobenius norm of the 2m x 2m block form of the complex residual
        return float(np.sqrt(2.0) * np.linalg.norm(r) / np.sqrt(2 * bc.shape[0]))

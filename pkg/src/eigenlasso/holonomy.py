"""Eigenframe transport around closed operator loops.

The sign of a window eigenbundle over a loop is read off from the
return matrix of a transported orthonormal frame: the frame is dragged
from sample to sample through the window projectors, and whatever
orthogonal mismatch survives at closure is the holonomy.  Frames are
realigned by polar orthonormalization, which is the unique choice
closest to the dragged frame and thus cannot inject a spurious
reflection; QR with unconstrained diagonal signs could.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .models import OperatorFamily
from .spectral import SpectralWindow, eigendecompose, projector_distance

__all__ = [
    "MAX_PROJECTOR_STEP",
    "TransportError",
    "FramePath",
    "ReturnMatrix",
    "StabilityReport",
    "transport",
    "predicted_sign",
    "sign_stability",
    "concatenate_loops",
]

# consecutive window subspaces must stay this close for the dragged
# frame to keep full rank; 1/2 leaves a factor-2 margin below the
# breakdown distance 1
MAX_PROJECTOR_STEP = 0.5


class TransportError(RuntimeError):
    """Transport could not proceed; carries the offending parameter."""

    def __init__(self, message: str, parameter: Optional[float] = None):
        super().__init__(message)
        self.parameter = parameter


def _opnorm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))


@dataclass(frozen=True)
class FramePath:
    """Orthonormal window frames along loop samples 0 = t0 < ... < tN = 1."""

    parameters: np.ndarray
    frames: Tuple[np.ndarray, ...]
    window: SpectralWindow

    @property
    def n_samples(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class ReturnMatrix:
    """Closing matrix A with F_end = F_start A, and its orientation sign."""

    matrix: np.ndarray
    determinant: float
    sign: int


def _window_frame(matrix: np.ndarray, window: SpectralWindow, t: float):
    """Eigenvalues, in-window frame, and projector at one sample."""
    values, vectors = eigendecompose(matrix)
    try:
        window.validate_endpoints(values)
    except ValueError as exc:
        raise TransportError(f"at t={t:.6g}: {exc}", parameter=t) from exc
    mask = window.contains(values)
    k = int(np.count_nonzero(mask))
    if k != window.count:
        raise TransportError(
            f"at t={t:.6g}: window holds {k} eigenvalues, expected {window.count}",
            parameter=t,
        )
    frame = vectors[:, mask]
    return frame @ frame.conj().T, frame


def _polar_align(projector: np.ndarray, frame: np.ndarray) -> np.ndarray:
    dragged = projector @ frame
    u, s, vt = np.linalg.svd(dragged, full_matrices=False)
    if float(s.min()) < 0.1:
        raise TransportError(
            f"dragged frame nearly rank-deficient (smallest singular value {s.min():.3e})"
        )
    return u @ vt


def transport(loop: OperatorFamily, window: SpectralWindow,
              initial_samples: int = 16, max_samples: int = 100_000,
              initial_frame: Optional[np.ndarray] = None):
    """Drag a window eigenframe once around the loop.

    Returns (FramePath, ReturnMatrix).  Sampling is refined adaptively
    by midpoint insertion until every consecutive pair of window
    projectors is closer than MAX_PROJECTOR_STEP in operator norm; the
    computed sign is then stable under any further refinement.

    ``initial_frame``, when given, replaces the eigendecomposition
    frame at the basepoint; it must be orthonormal and span the same
    window subspace.  The sign is independent of this gauge choice.
    """
    if initial_samples < 2:
        raise ValueError("need at least 2 initial samples")
    base = loop(0.0)
    scale = max(_opnorm(base), 1.0)
    if _opnorm(loop(1.0) - base) > 1e-12 * scale:
        raise TransportError("loop is not closed: samples at t=0 and t=1 differ")

    ts = list(np.linspace(0.0, 1.0, initial_samples + 1))
    cache = {}

    def at(t: float):
        if t not in cache:
            cache[t] = _window_frame(loop(t), window, t)
        return cache[t]

    while True:
        bad = [i for i in range(len(ts) - 1)
               if projector_distance(at(ts[i])[0], at(ts[i + 1])[0]) >= MAX_PROJECTOR_STEP]
        if not bad:
            break
        if len(ts) + len(bad) > max_samples:
            raise TransportError(
                f"refinement exceeded {max_samples} samples; "
                "window subspace moves too fast somewhere on the loop"
            )
        for i in reversed(bad):
            bisect.insort(ts, 0.5 * (ts[i] + ts[i + 1]))

    p0, f0 = at(ts[0])
    if initial_frame is not None:
        f0 = np.asarray(initial_frame)
        if f0.shape != (base.shape[0], window.count):
            raise ValueError(f"initial frame must have shape {(base.shape[0], window.count)}")
        if _opnorm(f0.conj().T @ f0 - np.eye(window.count)) > 1e-10:
            raise ValueError("initial frame is not orthonormal")
        if _opnorm(p0 @ f0 - f0) > 1e-8:
            raise ValueError("initial frame does not span the window subspace")
    frames = [f0]
    for t in ts[1:]:
        frames.append(_polar_align(at(t)[0], frames[-1]))

    a = frames[0].conj().T @ frames[-1]
    det = np.linalg.det(a)
    if abs(float(np.imag(det))) > 1e-10:
        raise RuntimeError("return matrix determinant came out non-real")
    det = float(np.real(det))
    if not 0.9 <= abs(det) <= 1.1:
        raise RuntimeError(
            f"return matrix is far from orthogonal (|det| = {abs(det):.6f}); "
            "transport is unreliable"
        )
    path = FramePath(parameters=np.array(ts), frames=tuple(frames), window=window)
    ret = ReturnMatrix(matrix=a, determinant=det, sign=1 if det > 0 else -1)
    return path, ret


def predicted_sign(parity: str, count: int) -> int:
    """Expected return sign: -1 exactly when the loop and count are both odd."""
    if parity not in ("odd", "even"):
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    if count < 1:
        raise ValueError("count must be >= 1")
    return -1 if (parity == "odd" and count % 2 == 1) else 1


@dataclass(frozen=True)
class StabilityReport:
    max_projector_distance: float
    criterion_met: bool
    sign_a: int
    sign_b: Optional[int]
    signs_equal: Optional[bool]
    note: str = ""


def sign_stability(loop_a: OperatorFamily, loop_b: OperatorFamily,
                   window: SpectralWindow, n_samples: int = 256) -> StabilityReport:
    """Compare window subspaces of two loops and their transported signs.

    When the subspaces stay closer than 1 everywhere, the two
    eigenbundles are isomorphic, so equal signs are asserted (a
    mismatch raises).  When the criterion fails the report only states
    what was computed; nothing is claimed in that regime.
    """
    grid = np.linspace(0.0, 1.0, n_samples + 1)
    worst = 0.0
    for t in grid:
        pa, _ = _window_frame(loop_a(t), window, t)
        pb, _ = _window_frame(loop_b(t), window, t)
        worst = max(worst, projector_distance(pa, pb))
    criterion_met = worst < 1.0
    _, ret_a = transport(loop_a, window)
    note = ""
    try:
        _, ret_b = transport(loop_b, window)
        sign_b = ret_b.sign
    except TransportError as exc:
        sign_b = None
        note = f"second transport failed: {exc}"
    signs_equal = None if sign_b is None else (ret_a.sign == sign_b)
    if criterion_met:
        if sign_b is None:
            raise RuntimeError(
                f"distance criterion met ({worst:.4f} < 1) but transport failed: {note}"
            )
        if not signs_equal:
            raise RuntimeError(
                f"distance criterion met ({worst:.4f} < 1) but signs differ: "
                f"{ret_a.sign} vs {sign_b}"
            )
    return StabilityReport(
        max_projector_distance=worst, criterion_met=criterion_met,
        sign_a=ret_a.sign, sign_b=sign_b, signs_equal=signs_equal, note=note,
    )


def concatenate_loops(loop1: OperatorFamily, loop2: OperatorFamily) -> OperatorFamily:
    """Run loop1 on [0, 1/2] and loop2 on [1/2, 1], time-rescaled.

    Both loops must be closed at the same basepoint.  Transported signs
    multiply under this operation, which is checked in the test suite
    rather than assumed here.
    """
    b1, b2 = loop1(0.0), loop2(0.0)
    scale = max(_opnorm(b1), 1.0)
    if b1.shape != b2.shape or _opnorm(b1 - b2) > 1e-12 * scale:
        raise ValueError("loops must share their basepoint operator")
    for name, lp in (("first", loop1), ("second", loop2)):
        if _opnorm(lp(1.0) - lp(0.0)) > 1e-12 * scale:
            raise ValueError(f"{name} loop is not closed")

    def sampler(t: float) -> np.ndarray:
        if t < 0.5:
            return loop1(2.0 * t)
        return loop2(2.0 * t - 1.0)

    parity = None
    if loop1.parity in ("odd", "even") and loop2.parity in ("odd", "even"):
        parity = "odd" if (loop1.parity == "odd") != (loop2.parity == "odd") else "even"
    return OperatorFamily(domain="circle", sampler=sampler, parity=parity,
                          name=f"concat({loop1.name or '?'}, {loop2.name or '?'})")

"""Frequency sweeps, phase/group delay curves and two-tone interference scans.

Sweeps partition their grid into fixed contiguous blocks; points inside a
block are solved sequentially with warm starts and blocks are independent,
so results do not depend on how many workers process them. Per-point solver
failures are flagged, never fatal, and every returned solution carries a
residual certificate from the loop-based reference evaluator (a separate
code path from the Newton iteration).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hopf import (
    ConvergenceError,
    residual_pure_tone_reference,
    residual_two_tone,
    solve_passive,
    solve_pure_tone,
    solve_two_tone,
)
from .modal import ModalSystem

_BLOCK = 16


class UnwrapError(RuntimeError):
    """Phase cannot be unwrapped reliably on the given grid."""


@dataclass
class SweepResult:
    """Per-grid-point solutions plus flags and residual certificates.

    solutions[i] is None when point i failed; flags[i] then carries the
    failure message. certificates[i] is the independently re-evaluated
    residual norm.
    """

    grid: np.ndarray
    solutions: list
    flags: list
    certificates: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or len(grid) == 0:
            raise ValueError("grid must be a nonempty 1-D array")
        if not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        self.grid = grid

    @property
    def n_flagged(self) -> int:
        return sum(1 for f in self.flags if f is not None)


@dataclass
class PhaseCurve:
    """Response magnitude and unwrapped phase at one observation point.

    phase_delay_cycles is the unwrapped phase over 2 pi; group_delay_cycles
    its frequency derivative times Omega / (2 pi). phase_reference records
    whether the phase is that of the response itself ("pressure") or of its
    time derivative ("velocity", a global +0.25 cycle shift; this is what
    vibrometry measures and what makes the low-frequency delay come out
    near minus a quarter cycle). When sign_flipped is true the curve has
    additionally been negated globally so the low-frequency delay is
    negative; both normalizations are surfaced here, never absorbed.
    """

    x: tuple[float, float]
    grid: np.ndarray
    R: np.ndarray
    phi: np.ndarray
    phase_delay_cycles: np.ndarray
    group_delay_cycles: np.ndarray
    sign_flipped: bool
    phase_reference: str = "velocity"


def _run_blocks(grid: np.ndarray, solve_point, n_threads: int | None = None):
    """Solve all grid points in fixed warm-started blocks.

    solve_point(omega, warm) -> solution with attribute X (or stacked
    amplitudes) used to warm-start the next point in the block. The block
    decomposition is fixed, so any worker count gives identical output.
    """
    blocks = [range(lo, min(lo + _BLOCK, len(grid))) for lo in range(0, len(grid), _BLOCK)]

    def run_block(idx_range):
        out = []
        warm = None
        for i in idx_range:
            try:
                sol = solve_point(float(grid[i]), warm)
                warm = sol
                out.append((sol, None))
            except (ConvergenceError, ValueError) as exc:
                warm = None
                out.append((None, f"{type(exc).__name__}: {exc}"))
        return out

    if n_threads is not None and n_threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            chunks = list(pool.map(run_block, blocks))
    else:
        chunks = [run_block(b) for b in blocks]
    solutions, flags = [], []
    for chunk in chunks:
        for sol, flag in chunk:
            solutions.append(sol)
            flags.append(flag)
    return solutions, flags


def pure_tone_sweep(
    system: ModalSystem,
    grid,
    F: float,
    beta: float,
    n_threads: int | None = None,
) -> SweepResult:
    """Solve the pure-tone system across a frequency grid."""
    grid = np.asarray(grid, dtype=float)

    def solve_point(omega: float, warm):
        start = warm.X if warm is not None else None
        return solve_pure_tone(system, omega, F, beta, start=start)

    solutions, flags = _run_blocks(grid, solve_point, n_threads)
    certificates = [
        float(np.linalg.norm(residual_pure_tone_reference(system, s.Omega, F, beta, s.X)))
        if s is not None
        else None
        for s in solutions
    ]
    return SweepResult(
        grid=grid,
        solutions=solutions,
        flags=flags,
        certificates=certificates,
        metadata={"F": F, "beta": beta, "kind": "pure_tone"},
    )


def phase_response(
    system: ModalSystem,
    grid,
    F: float,
    beta: float,
    x_points,
    phase_reference: str = "velocity",
    n_threads: int | None = None,
) -> list[PhaseCurve]:
    """Amplitude and unwrapped phase of the response at observation points.

    At each grid frequency the modal amplitudes are solved, the complex
    response at every x is assembled from the mode fields, and the phase is
    unwrapped along the grid (anchored so the first point lies in
    (-pi, pi]). phase_reference "velocity" reports the phase of the time
    derivative of the response (a global quarter-cycle shift); "pressure"
    reports the response phase itself. If the raw phase steps by nearly pi
    between neighbouring grid points the unwrap is ambiguous (unless the
    amplitude passes through a null, where a pi step is genuine) and
    UnwrapError suggests a finer grid.
    """
    if phase_reference not in ("velocity", "pressure"):
        raise ValueError(f"phase_reference must be 'velocity' or 'pressure', got {phase_reference!r}")
    grid = np.asarray(grid, dtype=float)
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    U = system.mode_fields_at(x_points)  # (N, P)

    sweep = pure_tone_sweep(system, grid, F, beta, n_threads=n_threads)
    bad = [i for i, s in enumerate(sweep.solutions) if s is None]
    if bad:
        raise ConvergenceError(
            f"solver failed at grid points {bad}: {sweep.flags[bad[0]]}"
        )
    amplitudes = np.array([s.X for s in sweep.solutions]) @ U  # (G, P)

    curves: list[PhaseCurve] = []
    raw = np.angle(amplitudes)  # (G, P)
    mags = np.abs(amplitudes)
    steps = np.abs(np.diff(raw, axis=0))
    steps = np.minimum(steps, 2.0 * np.pi - steps)  # wrapped step size
    suspicious = steps > 0.9 * np.pi
    if suspicious.any():
        # a near-pi step across an amplitude null is a genuine phase jump,
        # not an unwrap failure
        scale = np.maximum(mags[:-1], mags[1:])
        typical = np.median(mags, axis=0)[None, :]
        genuine_null = scale < 0.05 * typical
        bad_steps = suspicious & ~genuine_null
        if bad_steps.any():
            g, p = np.unravel_index(
                np.argmax(np.where(bad_steps, steps, 0.0)), steps.shape
            )
            raise UnwrapError(
                f"phase steps by {steps[g, p]:.3f} rad between Omega = "
                f"{grid[g]:.6g} and {grid[g + 1]:.6g} at x = {tuple(x_points[p])}; "
                "refine the grid near this frequency"
            )
    phi_all = np.unwrap(raw, axis=0)
    # anchor the first point to its principal value
    first = phi_all[0]
    anchor = (first + np.pi) % (2.0 * np.pi) - np.pi
    phi_all = phi_all + (anchor - first)[None, :]
    if phase_reference == "velocity":
        phi_all = phi_all + 0.5 * np.pi

    # global orientation: low-frequency delay is reported negative; a flip
    # is recorded, never silently absorbed
    flip = bool(np.median(phi_all[0]) > 0.1 * 2.0 * np.pi)
    if flip:
        phi_all = -phi_all

    for p in range(x_points.shape[0]):
        phi = phi_all[:, p]
        curve = PhaseCurve(
            x=(float(x_points[p, 0]), float(x_points[p, 1])),
            grid=grid,
            R=mags[:, p],
            phi=phi,
            phase_delay_cycles=phi / (2.0 * np.pi),
            group_delay_cycles=np.empty(0),
            sign_flipped=flip,
            phase_reference=phase_reference,
        )
        curve.group_delay_cycles = group_delay(curve)
        curves.append(curve)
    return curves


def group_delay(curve: PhaseCurve) -> np.ndarray:
    """Group delay in cycles: dphi/dOmega times Omega / (2 pi).

    Central differences inside the grid, one-sided at the ends.
    """
    phi = curve.phi
    om = curve.grid
    dphi = np.empty_like(phi)
    dphi[1:-1] = (phi[2:] - phi[:-2]) / (om[2:] - om[:-2])
    dphi[0] = (phi[1] - phi[0]) / (om[1] - om[0])
    dphi[-1] = (phi[-1] - phi[-2]) / (om[-1] - om[-2])
    return dphi * om / (2.0 * np.pi)


def default_observation_points(system: ModalSystem) -> np.ndarray:
    """Observation points on the array line: alternating resonator centers.

    The high-frequency response is dominated by the most oscillatory mode,
    whose sign alternates from one resonator to the next; points of equal
    parity therefore share its sign and their phase plateaus differ by full
    cycles, which is the structure the phase study looks at.
    """
    return system.array.centers[::2].copy()


def refined_frequency_grid(
    system: ModalSystem, lo: float, hi: float, base_points: int = 200
) -> np.ndarray:
    """Strictly increasing grid refined around every resonance.

    Sharp modes swing the response phase by nearly pi over a few linewidths,
    so each resonance gets local spacing of one linewidth (|Im omega_n|)
    over a 30-linewidth window on top of the uniform base grid.
    """
    pieces = [np.linspace(lo, hi, base_points)]
    for om in system.omegas:
        width = abs(om.imag)
        if width == 0:
            continue
        half = 30.0 * width
        a, b = max(lo, om.real - half), min(hi, om.real + half)
        if b > a:
            pieces.append(np.arange(a, b, width))
    grid = np.unique(np.concatenate(pieces))
    return grid[(grid >= lo) & (grid <= hi)]


def two_tone_sweep(
    system: ModalSystem,
    Omega1: float,
    grid2,
    F1: float,
    F2: float,
    beta: float,
    mode_index: int,
    collision_floor: float = 1e-3,
    n_threads: int | None = None,
) -> SweepResult:
    """Two-tone responses of one mode while the second frequency sweeps.

    Records, per grid point, the moduli of the four line amplitudes of the
    requested mode plus the passive single-tone reference at Omega_2. The
    grid must exclude the collision floor around Omega_1.
    """
    grid2 = np.asarray(grid2, dtype=float)
    if not 0 <= mode_index < system.n:
        raise ValueError(f"mode_index {mode_index} outside 0..{system.n - 1}")
    too_close = np.abs(grid2 - Omega1) <= collision_floor * abs(Omega1)
    if too_close.any():
        raise ValueError(
            f"grid points {grid2[too_close]} fall inside the collision floor "
            f"around Omega1 = {Omega1:.6g} (half-width {collision_floor * abs(Omega1):.3g})"
        )

    def solve_point(omega2: float, warm):
        return solve_two_tone(system, Omega1, omega2, F1, F2, beta)

    solutions, flags = _run_blocks(grid2, solve_point, n_threads)
    certificates = []
    records = []
    for s in solutions:
        if s is None:
            certificates.append(None)
            records.append(None)
            continue
        Xs = np.array([s.X10, s.X01, s.X21, s.X12])
        cert = float(
            np.linalg.norm(
                residual_two_tone(
                    system, s.Omega1, s.Omega2, s.F1, s.F2, beta, Xs, pointwise=True
                )
            )
        )
        certificates.append(cert)
        records.append(
            {
                "abs_X10": float(abs(s.X10[mode_index])),
                "abs_X01": float(abs(s.X01[mode_index])),
                "abs_X21": float(abs(s.X21[mode_index])),
                "abs_X12": float(abs(s.X12[mode_index])),
                "abs_X01_passive": float(
                    abs(solve_passive(system, s.Omega2, F2)[mode_index])
                ),
            }
        )
    return SweepResult(
        grid=grid2,
        solutions=solutions,
        flags=flags,
        certificates=certificates,
        metadata={
            "Omega1": Omega1,
            "F1": F1,
            "F2": F2,
            "beta": beta,
            "mode_index": mode_index,
            "kind": "two_tone",
            "records": records,
        },
    )

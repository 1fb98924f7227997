"""
Finite-difference Wirtinger Jacobians of output observables with respect to
the input spectral amplitudes.

Every column i needs four propagations (real and imaginary probes of input
bin i, both signs). Columns are independent and run through
:func:`src.parallel.parallel_map`; an optional coarse pre-scan skips columns
whose neighbourhood shows no sensitivity at all.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from src.exceptions import InvalidArgumentError
from src.field import Field, SpectralField, from_spectrum, photon_numbers, to_spectrum
from src.parallel import parallel_map
from src.sensitivity.observables import Observable, observable_matrix

logger = logging.getLogger(__name__)

# Relative change under probe-step halving above which an entry is flagged
CONVERGENCE_TOLERANCE = 0.01

# Worker-side state installed by _install_state
_STATE = {}


@dataclass(frozen=True, eq=False)
class SensitivityMatrix:
    """
    Complex Wirtinger derivatives dX_k / d alpha_IN,i.

    Rows follow the observables (or output channels), columns the input
    spectral bins in natural DFT order. Pruned columns are zero and marked
    False in ``computed``; ``flags`` marks entries that failed the
    probe-step-halving check.
    """

    values: np.ndarray
    base: Field
    probe_step: float
    computed: np.ndarray
    flags: np.ndarray
    verified_columns: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def row(self, k: int) -> np.ndarray:
        return self.values[k]

    def combine(self, weights: np.ndarray) -> np.ndarray:
        """Jacobian row of the linear combination sum_k w_k X_k."""
        return np.asarray(weights) @ self.values

    @property
    def n_flagged(self) -> int:
        return int(self.flags.sum())


def default_probe_step(base: SpectralField) -> float:
    """h = 1e-3 * max(1, max_i |alpha_i|) in photon-amplitude units."""
    return 1e-3 * max(1.0, float(np.abs(base.amplitudes).max()))


def _install_state(system: Callable, base: SpectralField, weights: np.ndarray, factor: float):
    _STATE["system"] = system
    _STATE["base"] = base
    _STATE["weights"] = weights
    _STATE["factor"] = factor


def _observe(amplitudes: np.ndarray) -> np.ndarray:
    base = _STATE["base"]
    output = _STATE["system"](from_spectrum(SpectralField(base.grid, amplitudes)))
    return _STATE["weights"] @ photon_numbers(to_spectrum(output))


def _probe_column(task) -> np.ndarray:
    i, h = task
    base = _STATE["base"].amplitudes
    values = []
    for delta in (h, -h, 1j * h, -1j * h):
        probed = base.copy()
        probed[i] += delta
        values.append(_observe(probed))
    d_real = (values[0] - values[1]) / (2 * h)
    d_imag = (values[2] - values[3]) / (2 * h)
    return _STATE["factor"] * (d_real - 1j * d_imag)


def _significant(column: np.ndarray, row_max: np.ndarray, threshold: float) -> bool:
    return bool(np.any(np.abs(column) >= threshold * row_max))


def wirtinger_jacobian(
    system: Callable[[Field], Field],
    base: Field,
    observables: Union[Sequence[Observable], np.ndarray],
    probe_step: Optional[float] = None,
    threads: int = 1,
    prescan_stride: int = 1,
    prune_threshold: float = 1e-6,
    verify_stride: int = 8,
    wirtinger_factor: float = 0.5,
) -> SensitivityMatrix:
    """
    Sensitivity of each observable to every input spectral bin, at ``base``.

    For input bin i the real and imaginary parts of the spectral amplitude are
    probed by +/-h; central differences give dX/dx_i and dX/dy_i and the
    Wirtinger derivative is (dX/dx_i - i dX/dy_i) / 2. Vacuum bins (zero mean
    amplitude) are included.

    Args:
        system: Deterministic Field -> Field map
        base: Mean input field
        observables: Observables, or a (n_rows, n_samples) weight matrix over output bins
        probe_step: h; defaults to 1e-3 * max(1, max|alpha|)
        threads: Worker processes for the column sweep
        prescan_stride: Columns sampled in the pre-scan (1 disables pruning)
        prune_threshold: Columns whose pre-scanned neighbours stay below this
            fraction of every row maximum are skipped
        verify_stride: Every verify_stride-th computed column is recomputed with h/2
        wirtinger_factor: 1/2 by convention; other values only for negative controls

    Returns:
        SensitivityMatrix
    """
    spectrum = to_spectrum(base)
    n = base.grid.n_samples
    if isinstance(observables, np.ndarray):
        weights = np.atleast_2d(np.asarray(observables, dtype=float))
    else:
        weights = observable_matrix(observables, n)
    if weights.shape[1] != n:
        raise InvalidArgumentError(f"observable weights must cover {n} output bins")

    h = default_probe_step(spectrum) if probe_step is None else float(probe_step)
    if not h > 0:
        raise InvalidArgumentError(f"probe_step must be positive, got {h}")
    if prescan_stride < 1 or verify_stride < 0:
        raise InvalidArgumentError("prescan_stride must be >= 1 and verify_stride >= 0")

    initargs = (system, spectrum, weights, wirtinger_factor)
    values = np.zeros((weights.shape[0], n), dtype=complex)
    computed = np.zeros(n, dtype=bool)

    if prescan_stride > 1:
        scanned = np.arange(0, n, prescan_stride)
        columns = parallel_map(
            _probe_column, [(i, h) for i in scanned], threads, _install_state, initargs, desc="pre-scan"
        )
        for i, col in zip(scanned, columns):
            values[:, i] = col
        computed[scanned] = True
        row_max = np.abs(values).max(axis=1)
        keep = np.array([_significant(values[:, i], row_max, prune_threshold) for i in scanned])
        remaining = []
        for j in range(n):
            if computed[j]:
                continue
            left = (j // prescan_stride) % scanned.size
            right = (left + 1) % scanned.size
            if keep[left] or keep[right]:
                remaining.append(j)
        logger.info(
            f"Pre-scan kept {int(keep.sum())}/{scanned.size} probe columns; "
            f"{len(remaining)} of {n - scanned.size} remaining columns will be computed"
        )
    else:
        remaining = list(range(n))

    if remaining:
        columns = parallel_map(
            _probe_column, [(i, h) for i in remaining], threads, _install_state, initargs, desc="jacobian"
        )
        for i, col in zip(remaining, columns):
            values[:, i] = col
        computed[remaining] = True

    # probe-step halving on a sample of the computed columns
    flags = np.zeros(values.shape, dtype=bool)
    verified = np.flatnonzero(computed)[::verify_stride] if verify_stride else np.array([], dtype=int)
    if verified.size:
        halved = parallel_map(
            _probe_column, [(i, h / 2) for i in verified], threads, _install_state, initargs, desc="verify"
        )
        row_max = np.abs(values).max(axis=1)
        for i, col in zip(verified, halved):
            change = np.abs(col - values[:, i])
            flags[:, i] = change > CONVERGENCE_TOLERANCE * np.maximum(row_max, np.finfo(float).tiny)
        if flags.any():
            logger.warning(
                f"{int(flags.sum())} Jacobian entries changed by more than "
                f"{CONVERGENCE_TOLERANCE:.0%} under probe-step halving (h = {h:.3g})"
            )

    return SensitivityMatrix(
        values=values,
        base=base,
        probe_step=h,
        computed=computed,
        flags=flags,
        verified_columns=verified,
    )

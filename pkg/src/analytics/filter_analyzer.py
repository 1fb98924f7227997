import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from src.exceptions import InfeasibleTargetError, InvalidArgumentError
from src.field import Field, SpectralField, from_spectrum, to_spectrum
from src.parallel import parallel_map
from src.sensitivity import (
    CovarianceMatrix,
    NoiseModel,
    SensitivityMatrix,
    SpectralBinning,
    covariance_eq1,
    fano_out,
    to_decibels,
    vacuum_floor,
)
from src.sensitivity.noise import PUMP_THRESHOLD

logger = logging.getLogger(__name__)

# Allowed deviation of the achieved transmission fraction from the target
TRANSMISSION_TOLERANCE = 0.02

MAX_LOCAL_SEARCH_MOVES = 2000

# kick-and-descend rounds per random restart
DEFAULT_PERTURBATIONS = 8

_SHARED = {}


@dataclass(frozen=True, eq=False)
class FilterMask:
    """Intensity transmission per output channel, entries in [0, 1]."""

    t: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        if t.ndim != 1:
            raise InvalidArgumentError("filter mask must be 1-D")
        if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 1):
            raise InvalidArgumentError("filter mask entries must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.t == 0) | (self.t == 1)))

    @classmethod
    def all_pass(cls, n: int) -> "FilterMask":
        return cls(np.ones(n))


@dataclass(frozen=True)
class FilterResult:
    """Noise of one filtered output."""

    transmitted_mean: float
    variance: float
    fano: float
    fano_db: float
    transmission_fraction: float
    mask: Optional[FilterMask] = field(default=None, repr=False)
    linear_loss_reference: Optional[float] = None
    converged: bool = True


def filter_noise(C: CovarianceMatrix, mask: FilterMask) -> FilterResult:
    """
    Variance of the filtered photon number: T.(CT) + sum t(1-t)<n>.

    The second term is the vacuum admitted by partial transmission; it vanishes
    for binary masks.
    """
    t = mask.t
    if t.size != C.size:
        raise InvalidArgumentError(f"mask has {t.size} channels, covariance {C.size}")
    mean = float(t @ C.mean)
    variance = float(t @ C.matrix @ t + np.sum(t * (1 - t) * C.mean))
    total = float(C.mean.sum())
    fano = fano_out(variance, mean)
    return FilterResult(
        transmitted_mean=mean,
        variance=variance,
        fano=fano,
        fano_db=to_decibels(fano),
        transmission_fraction=mean / total if total > 0 else 0.0,
        mask=mask,
    )


def _beam_splitter_fano(f0: float, eta: float) -> float:
    return 1 + eta * (f0 - 1)


def linear_loss_fano(f0: float, eta: float) -> float:
    """Fano factor after frequency-independent loss with transmission eta: 1 + eta (F0 - 1)."""
    if not f0 >= 1:
        raise InvalidArgumentError(f"f0 must be >= 1, got {f0}")
    if not 0 <= eta <= 1:
        raise InvalidArgumentError(f"eta must lie in [0, 1], got {eta}")
    return _beam_splitter_fano(f0, eta)


def _random_block_mask(rng: np.random.Generator, n: int, max_block: int) -> np.ndarray:
    """On/off blocks of random widths; a random duty cycle biases the transmission."""
    duty = rng.uniform()
    longest_on = max(1, int(round(duty * max_block)))
    longest_off = int(round((1 - duty) * max_block))
    mask = np.zeros(n)
    state = rng.uniform() < duty
    position = 0
    while position < n:
        if state:
            width = int(rng.integers(1, longest_on + 1))
            mask[position:position + width] = 1.0
        else:
            width = int(rng.integers(0, longest_off + 1))
        position += width
        state = not state
    return mask


def random_filter_sweep(
    C: CovarianceMatrix, n_filters: int, rng_seed: int, max_block: Optional[int] = None
) -> List[FilterResult]:
    """
    Noise of randomly drawn binary block filters.

    Each result carries its mask and the linear-loss Fano expected at the same
    transmission from the unfiltered output. Deterministic per seed.
    """
    if n_filters < 1:
        raise InvalidArgumentError(f"n_filters must be >= 1, got {n_filters}")
    if not np.any(C.mean > 0):
        raise InvalidArgumentError("random filters need at least one channel with a positive mean")
    max_block = max(2, C.size // 8) if max_block is None else int(max_block)
    unfiltered = filter_noise(C, FilterMask.all_pass(C.size))

    rng = np.random.default_rng(rng_seed)
    results = []
    while len(results) < n_filters:
        t = _random_block_mask(rng, C.size, max_block)
        if t @ C.mean <= 0:
            continue
        result = filter_noise(C, FilterMask(t))
        reference = _beam_splitter_fano(unfiltered.fano, result.transmission_fraction)
        results.append(replace(result, linear_loss_reference=reference))
    logger.info(f"Evaluated {n_filters} random filters (seed {rng_seed})")
    return results


class _BinaryProblem:
    """Incremental bookkeeping for min T.(CT) / T.mu over binary T."""

    def __init__(self, C: np.ndarray, mu: np.ndarray, lo: float, hi: float):
        self.C = C
        self.mu = mu
        self.diag = np.diag(C).copy()
        self.lo = lo
        self.hi = hi

    def start(self, t: np.ndarray):
        self.t = np.asarray(t).astype(bool)
        self.CT = self.C[:, self.t].sum(axis=1)
        self.var = float(self.CT[self.t].sum())
        self.mean = float(self.mu[self.t].sum())

    @property
    def fano(self) -> float:
        return self.var / self.mean if self.mean > 0 else np.inf

    @property
    def inside(self) -> bool:
        return self.lo <= self.mean <= self.hi and self.mean > 0

    def feasible(self, mean) -> np.ndarray:
        return (mean >= self.lo) & (mean <= self.hi) & (mean > 0)

    def flip(self, j: int):
        if self.t[j]:
            self.var += -2 * self.CT[j] + self.diag[j]
            self.mean -= self.mu[j]
            self.CT -= self.C[:, j]
        else:
            self.var += 2 * self.CT[j] + self.diag[j]
            self.mean += self.mu[j]
            self.CT += self.C[:, j]
        self.t[j] = not self.t[j]

    def _flip_deltas(self) -> Tuple[np.ndarray, np.ndarray]:
        """Variance change of flipping each channel alone, and the direction of each flip."""
        sign = np.where(self.t, -1.0, 1.0)
        return sign * 2 * self.CT + self.diag, sign

    def greedy(self) -> bool:
        """Add channels by lowest marginal noise per photon until the window is reached."""
        self.start(np.zeros(self.mu.size, dtype=bool))
        while self.mean < self.lo or self.mean <= 0:
            candidates = (~self.t) & (self.mu > 0) & (self.mean + self.mu <= self.hi)
            if not candidates.any():
                return False
            score = np.where(candidates, (2 * self.CT + self.diag) / np.where(self.mu > 0, self.mu, 1), np.inf)
            self.flip(int(np.argmin(score)))
        return True

    def fill(self, order: Sequence[int]) -> bool:
        """Switch channels on in the given order, skipping any that overshoot, then repair."""
        self.start(np.zeros(self.mu.size, dtype=bool))
        for j in order:
            if self.inside:
                break
            if self.mu[j] > 0 and self.mean + self.mu[j] <= self.hi:
                self.flip(int(j))
        return self.repair()

    def repair(self) -> bool:
        """Add or drop single channels, best resulting Fano first, until the mean is inside the window."""
        for _ in range(self.mu.size + 1):
            if self.inside:
                return True
            delta, sign = self._flip_deltas()
            mean1 = self.mean + sign * self.mu
            if self.mean < self.lo or self.mean <= 0:
                candidates = (~self.t) & (self.mu > 0) & (mean1 <= self.hi)
            else:
                candidates = self.t & (self.mu > 0) & (mean1 >= self.lo) & (mean1 > 0)
            if not candidates.any():
                return False
            score = np.where(candidates, (self.var + delta) / np.where(mean1 > 0, mean1, 1), np.inf)
            self.flip(int(np.argmin(score)))
        return self.inside

    def local_search(self) -> bool:
        """
        Best-improvement descent over moves of one or two flips inside the window.

        Two-flip moves cover swaps as well as adding or dropping a pair of
        channels together. Returns True if a local minimum was reached.
        """
        off_diagonal = ~np.eye(self.mu.size, dtype=bool)
        for _ in range(MAX_LOCAL_SEARCH_MOVES):
            current = self.fano
            delta, sign = self._flip_deltas()
            var1 = self.var + delta
            mean1 = self.mean + sign * self.mu
            best, move = current, None

            ok = self.feasible(mean1)
            if ok.any():
                fano1 = np.where(ok, var1 / np.where(ok, mean1, 1), np.inf)
                j = int(np.argmin(fano1))
                if fano1[j] < best:
                    best, move = fano1[j], (j,)

            var2 = var1[:, None] + delta[None, :] + 2 * np.outer(sign, sign) * self.C
            mean2 = mean1[:, None] + (sign * self.mu)[None, :]
            ok2 = self.feasible(mean2) & off_diagonal
            if ok2.any():
                fano2 = np.where(ok2, var2 / np.where(ok2, mean2, 1), np.inf)
                a, b = np.unravel_index(int(np.argmin(fano2)), fano2.shape)
                if fano2[a, b] < best:
                    best, move = fano2[a, b], (int(a), int(b))

            if move is None or best >= current * (1 - 1e-12):
                return True
            for j in move:
                self.flip(j)
        return False

    def perturbed_search(self, rng: np.random.Generator, rounds: int) -> bool:
        """
        Local search followed by ``rounds`` kicks of 2-4 random flips, each
        repaired and descended again; a kick is kept only if it improves.
        """
        converged = self.local_search()
        best_t, best_fano = self.t.copy(), self.fano
        for _ in range(rounds):
            k = min(int(rng.integers(2, 5)), self.mu.size)
            for j in rng.choice(self.mu.size, size=k, replace=False):
                self.flip(int(j))
            if self.repair():
                settled = self.local_search()
                if self.fano < best_fano * (1 - 1e-12):
                    best_t, best_fano, converged = self.t.copy(), self.fano, settled
            self.start(best_t)
        return converged


def relaxed_transmission(C: np.ndarray, mu: np.ndarray, target_mean: float) -> Optional[np.ndarray]:
    """
    Continuous minimizer of t.(Ct) over 0 <= t <= 1 with t.mu = target_mean.

    Rounded, it seeds the binary search. Returns None when the solver fails
    to meet the constraint.
    """
    total = float(mu.sum())
    scale = float(np.abs(np.diag(C)).max())
    if total <= 0 or scale <= 0:
        return None
    A = C / scale
    x0 = np.full(mu.size, min(1.0, target_mean / total))
    solution = minimize(
        lambda t: t @ A @ t,
        x0,
        jac=lambda t: 2 * A @ t,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * mu.size,
        constraints=[{"type": "eq", "fun": lambda t: (mu @ t - target_mean) / total, "jac": lambda t: mu / total}],
        options={"maxiter": 500, "ftol": 1e-12},
    )
    t = np.clip(solution.x, 0.0, 1.0)
    if abs(mu @ t - target_mean) > TRANSMISSION_TOLERANCE * total:
        logger.debug(f"Relaxed filter did not converge: {solution.message}")
        return None
    return t


def _install_problem(C: np.ndarray, mu: np.ndarray, lo: float, hi: float, relaxed: Optional[np.ndarray]):
    _SHARED["problem"] = _BinaryProblem(C, mu, lo, hi)
    _SHARED["relaxed"] = relaxed


def _restart(task) -> Optional[Tuple[np.ndarray, bool]]:
    """Even restarts round the relaxed filter at random, odd ones fill channels in random order."""
    index, seed_sequence, rounds = task
    problem, relaxed = _SHARED["problem"], _SHARED["relaxed"]
    rng = np.random.default_rng(seed_sequence)
    if relaxed is not None and index % 2 == 0:
        problem.start(rng.random(relaxed.size) < relaxed)
        reached = problem.repair()
    else:
        reached = problem.fill(rng.permutation(problem.mu.size))
    if not reached:
        return None
    converged = problem.perturbed_search(rng, rounds)
    return problem.t.copy(), converged


def optimize_filter(
    C: CovarianceMatrix,
    target_transmission: float,
    method: str = "greedy-local",
    restarts: int = 32,
    seed: int = 0,
    threads: int = 1,
    warm_starts: Sequence[np.ndarray] = (),
    perturbations: int = DEFAULT_PERTURBATIONS,
) -> FilterResult:
    """
    Binary mask of lowest Fano factor whose transmission lies within +/-2 % of the target.

    ``greedy-local`` descends with one- and two-flip moves from several starts:
    the greedy fill, the rounded continuous relaxation, every mask in
    ``warm_starts`` (moved into the window first) and ``restarts`` randomized
    starts drawn from independent seed substreams, each refined by
    ``perturbations`` kick-and-descend rounds. ``greedy`` returns the greedy
    fill alone.

    Raises:
        InfeasibleTargetError: no start reached the transmission window
    """
    if not 0 < target_transmission <= 1:
        raise InvalidArgumentError(f"target_transmission must lie in (0, 1], got {target_transmission}")
    if method not in ("greedy-local", "greedy"):
        raise InvalidArgumentError(f"unknown optimizer method {method!r}")
    if restarts < 0 or perturbations < 0:
        raise InvalidArgumentError("restarts and perturbations must be >= 0")

    total = float(C.mean.sum())
    lo = (target_transmission - TRANSMISSION_TOLERANCE) * total
    hi = (target_transmission + TRANSMISSION_TOLERANCE) * total
    C_sym = 0.5 * (C.matrix + C.matrix.T)

    candidates = []
    problem = _BinaryProblem(C_sym, C.mean, lo, hi)
    if problem.greedy():
        converged = True if method == "greedy" else problem.local_search()
        candidates.append((problem.t.copy(), converged))

    relaxed = None
    if method == "greedy-local":
        relaxed = relaxed_transmission(C_sym, C.mean, target_transmission * total)
        if relaxed is not None and problem.fill(np.argsort(-relaxed, kind="stable")):
            candidates.append((problem.t.copy(), problem.local_search()))
        for mask in warm_starts:
            problem.start(np.asarray(mask) > 0.5)
            if problem.repair():
                candidates.append((problem.t.copy(), problem.local_search()))

    if method == "greedy-local" and restarts > 0:
        streams = np.random.SeedSequence(seed).spawn(restarts)
        tasks = [(k, s, perturbations) for k, s in enumerate(streams)]
        outcomes = parallel_map(_restart, tasks, threads, _install_problem, (C_sym, C.mean, lo, hi, relaxed))
        candidates.extend(o for o in outcomes if o is not None)

    candidates = [(t, conv) for t, conv in candidates if float(C.mean[t].sum()) > 0]
    if not candidates:
        raise InfeasibleTargetError(
            f"no binary filter reaches transmission {target_transmission:.3f} +/- {TRANSMISSION_TOLERANCE}"
        )

    results = [
        replace(filter_noise(C, FilterMask(t.astype(float))), converged=conv) for t, conv in candidates
    ]
    best = min(range(len(results)), key=lambda k: (results[k].fano, k))
    result = results[best]
    if not result.converged:
        logger.warning(f"Local search hit the move limit at transmission {target_transmission:.3f}")
    logger.info(
        f"Optimized filter at T = {result.transmission_fraction:.3f}: "
        f"Fano {result.fano:.4g} ({result.fano_db:+.2f} dB) from {len(results)} starts"
    )
    return result


def min_noise_curve(
    C: CovarianceMatrix,
    transmissions: Sequence[float],
    restarts: int = 32,
    seed: int = 0,
    threads: int = 1,
    perturbations: int = DEFAULT_PERTURBATIONS,
) -> List[Tuple[float, Optional[FilterResult]]]:
    """
    Optimized filter per target transmission; None where no binary mask reaches the target.

    Transmissions are visited in increasing order, then again in decreasing
    order without random restarts. Every visit is warm-started from the
    neighbouring optimum and the best mask found for each target is kept.
    """
    etas = [float(eta) for eta in transmissions]
    best: List[Optional[FilterResult]] = [None] * len(etas)
    ascending = sorted(range(len(etas)), key=lambda k: etas[k])
    for first, sweep in ((True, ascending), (False, ascending[::-1])):
        neighbour = None
        for k in sweep:
            warm = [r.mask.t for r in (neighbour, best[k]) if r is not None]
            try:
                result = optimize_filter(
                    C, etas[k], restarts=restarts if first else 0, seed=seed, threads=threads,
                    warm_starts=warm, perturbations=perturbations,
                )
            except InfeasibleTargetError as e:
                if first:
                    logger.warning(f"Skipping transmission {etas[k]:g}: {e}")
                continue
            if best[k] is None or result.fano < best[k].fano:
                best[k] = result
            neighbour = best[k]
    return list(zip(etas, best))


@dataclass(frozen=True, eq=False)
class PairNoiseMap:
    """Pair variance V(l, l') and relative noise R(l, l'); diagonal and undefined entries are NaN."""

    variance: np.ndarray
    relative: np.ndarray
    undefined: Tuple[Tuple[int, int], ...]

    def lowest_pairs(self, count: int = 5) -> List[Tuple[int, int, float]]:
        upper = np.triu(np.ones_like(self.relative, dtype=bool), k=1) & np.isfinite(self.relative)
        i, j = np.nonzero(upper)
        order = np.argsort(self.relative[i, j], kind="stable")[:count]
        return [(int(i[k]), int(j[k]), float(self.relative[i[k], j[k]])) for k in order]


def pair_noise_map(C: CovarianceMatrix) -> PairNoiseMap:
    """V = C_ll + C_l'l' + 2 C_ll'; R = V / min(C_ll, C_l'l')."""
    d = np.diag(C.matrix)
    variance = d[:, None] + d[None, :] + C.matrix + C.matrix.T
    floor = np.minimum(d[:, None], d[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        relative = np.where(floor > 0, variance / floor, np.nan)
    np.fill_diagonal(variance, np.nan)
    np.fill_diagonal(relative, np.nan)

    bad_i, bad_j = np.nonzero(np.triu(floor <= 0, k=1))
    undefined = tuple((int(a), int(b)) for a, b in zip(bad_i, bad_j))
    if undefined:
        logger.warning(f"{len(undefined)} channel pairs have a zero single-channel variance; R undefined")
    return PairNoiseMap(variance, relative, undefined)


@dataclass(frozen=True)
class ImmunityPoint:
    pump_fano: float
    result: FilterResult
    vacuum_floor: float


def noise_immunity_scan(
    jacobian: SensitivityMatrix,
    input_spectrum: SpectralField,
    mean: np.ndarray,
    fano_levels: Sequence[float],
    transmission: float,
    restarts: int = 32,
    seed: int = 0,
    threads: int = 1,
    occupied_threshold: float = PUMP_THRESHOLD,
    perturbations: int = DEFAULT_PERTURBATIONS,
) -> List[ImmunityPoint]:
    """
    Re-optimize the filter for several pump Fano levels with the Jacobian held fixed.

    Only the noise model changes between levels: C is rebuilt from the same
    Jacobian rows and the optimizer runs again at the same transmission. After
    a first pass with random restarts, every level is searched once more from
    the optima of all the other levels, keeping the best mask per level.
    """
    levels = [float(level) for level in fano_levels]
    noises = [NoiseModel.amplified_pump(input_spectrum, level, occupied_threshold) for level in levels]
    covariances = [covariance_eq1(jacobian.values, noise, mean) for noise in noises]

    best: List[Optional[FilterResult]] = [None] * len(levels)
    for first, order in ((True, range(len(levels))), (False, reversed(range(len(levels))))):
        for k in order:
            warm = [r.mask.t for r in best if r is not None]
            result = optimize_filter(
                covariances[k], transmission, restarts=restarts if first else 0, seed=seed,
                threads=threads, warm_starts=warm, perturbations=perturbations,
            )
            if best[k] is None or result.fano < best[k].fano:
                best[k] = result

    points = []
    for level, noise, result in zip(levels, noises, best):
        floor = vacuum_floor(jacobian.combine(result.mask.t), noise)
        logger.info(f"Pump Fano {level:g}: optimized output {result.fano_db:+.2f} dB")
        points.append(ImmunityPoint(level, result, floor))
    return points


def filtered_peak_power(output: Field, channel_mask: FilterMask, binning: SpectralBinning) -> float:
    """Peak power (W) of the output pulse after applying the mask in the spectral domain."""
    transmission = binning.expand(channel_mask.t)
    spectrum = to_spectrum(output)
    filtered = from_spectrum(SpectralField(output.grid, spectrum.amplitudes * np.sqrt(transmission)))
    return float(filtered.power.max())

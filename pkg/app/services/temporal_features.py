"""
Temporal features: pair autocorrelation, pair frequency and location entropies.
"""
from typing import Optional

import numpy as np
from scipy import fft as sp_fft

from ..config import settings
from ..exceptions import NumericError, ParameterError
from .interaction_store import EventStore
from .pair_series import PairSeries

ENTROPY_KINDS = ("schedule", "spatial", "joint")
FFT_RESIDUE_TOLERANCE = 1e-6


def _check_tau(tau_max: int) -> int:
    if tau_max is None or int(tau_max) < 1:
        raise ParameterError(f"tau_max must be >= 1, got {tau_max}")
    return int(tau_max)


def pairwise_gap_count(bins: np.ndarray, tau_max: int) -> int:
    """Number of bin pairs (t', t) with 1 <= t - t' <= tau_max, by full pairwise differences."""
    bins = np.asarray(bins, dtype=np.int64)
    gaps = bins[None, :] - bins[:, None]
    return int(np.count_nonzero((gaps >= 1) & (gaps <= tau_max)))


def fft_gap_count(bins: np.ndarray, tau_max: int) -> int:
    """
    Same count through the linear autocorrelation of the dense 0/1 series.

    The series is expanded over [min_bin, max_bin] and zero padded to a power
    of two >= 2L so the circular product equals the linear one.
    """
    bins = np.asarray(bins, dtype=np.int64)
    if bins.size < 2:
        return 0
    lo = int(bins[0])
    span = int(bins[-1]) - lo + 1
    dense = np.zeros(span, dtype=np.float64)
    dense[bins - lo] = 1.0
    n = 1 << (2 * span - 1).bit_length()
    spectrum = sp_fft.rfft(dense, n)
    corr = sp_fft.irfft(spectrum * np.conj(spectrum), n)
    top = min(tau_max, span - 1)
    lags = corr[1:top + 1]
    rounded = np.rint(lags)
    residue = float(np.max(np.abs(lags - rounded))) if lags.size else 0.0
    if residue > FFT_RESIDUE_TOLERANCE:
        raise NumericError(f"FFT autocorrelation residue {residue:.3g} exceeds {FFT_RESIDUE_TOLERANCE}")
    return int(rounded.astype(np.int64).sum())


def autocorrelation(series, tau_max: Optional[int] = None, crossover: Optional[int] = None) -> int:
    """
    AC_xy = sum over lags 1..tau_max of sum_t n(t) n(t - tau), linear series.

    Args:
        series: PairSeries or sorted distinct bin array
        tau_max: Lag bound in bins; defaults to settings.TAU_MAX
        crossover: Interaction count above which the FFT path is used

    Returns:
        Integer count, identical on both paths
    """
    tau_max = _check_tau(settings.TAU_MAX if tau_max is None else tau_max)
    bins = series.bins if isinstance(series, PairSeries) else np.asarray(series, dtype=np.int64)
    crossover = settings.FFT_CROSSOVER if crossover is None else crossover
    if bins.size < 2:
        return 0
    if bins.size <= crossover:
        return pairwise_gap_count(bins, tau_max)
    return fft_gap_count(bins, tau_max)


def batch_autocorrelation(offsets: np.ndarray, bins: np.ndarray, tau_max: int) -> np.ndarray:
    """
    Autocorrelation of many pairs at once from CSR (offsets, bins).

    Each bin is keyed as pair * stride + bin with stride > max_bin + tau, so a
    searchsorted window never leaves its own pair.
    """
    tau_max = _check_tau(tau_max)
    offsets = np.asarray(offsets, dtype=np.int64)
    n_pairs = offsets.size - 1
    if bins.size == 0:
        return np.zeros(n_pairs, dtype=np.int64)
    bins = np.asarray(bins, dtype=np.int64)
    tau = min(tau_max, int(bins.max() - bins.min()))
    stride = int(bins.max()) + tau + 1
    if n_pairs * stride >= np.iinfo(np.int64).max // 2:
        raise NumericError("pair key space exceeds 64-bit range")
    pair = np.repeat(np.arange(n_pairs, dtype=np.int64), np.diff(offsets))
    keys = pair * stride + bins
    within = np.searchsorted(keys, keys + tau, side="right") - np.arange(keys.size) - 1
    cs = np.concatenate(([0], np.cumsum(within, dtype=np.int64)))
    return cs[offsets[1:]] - cs[offsets[:-1]]


def pair_frequency(store: EventStore, x: int, y: int):
    """(N_xy, N_xy / N_x): shared games, counted with multiplicity."""
    n_x = store.n_games_of(x)
    ex, _ = store.shared_events(x, y)
    n_xy = int(ex.size)
    return n_xy, n_xy / n_x


def _locations(store: EventStore, kind: str) -> tuple:
    """Per-event location code and the size of the location vocabulary."""
    playlist_idx = np.searchsorted(store.playlists, store.playlist)
    if kind == "schedule":
        return store.weekday, 7
    if kind == "spatial":
        return playlist_idx, max(int(store.playlists.size), 1)
    if kind == "joint":
        m = max(int(store.playlists.size), 1)
        return store.weekday * m + playlist_idx, 7 * m
    raise ParameterError(f"unknown entropy kind '{kind}' (known: {', '.join(ENTROPY_KINDS)})")


def player_entropies(store: EventStore, kind: str) -> np.ndarray:
    """Entropy in nats of every player's game distribution over locations, aligned with store.players."""
    loc, size = _locations(store, kind)
    n_players = store.n_players
    if n_players == 0:
        return np.zeros(0, dtype=np.float64)
    keys, counts = np.unique(store.player_code * size + loc, return_counts=True)
    owner = keys // size
    p = counts / store.games_per_player()[owner]
    return np.bincount(owner, weights=-p * np.log(p), minlength=n_players)


def entropy(store: EventStore, x: int, kind: str) -> float:
    loc, _ = _locations(store, kind)
    ev = store.events_of(x)
    _, counts = np.unique(loc[ev], return_counts=True)
    p = counts / ev.size
    h = -float((p * np.log(p)).sum())
    return h if h > 0.0 else 0.0


def pair_entropy(store: EventStore, x: int, y: int, kind: str) -> float:
    return entropy(store, x, kind) + entropy(store, y, kind)

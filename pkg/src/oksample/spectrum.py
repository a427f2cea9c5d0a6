"""Band power from epoched time series.

Per epoch and series: magnitudes of the real DFT, averaged over the bins
whose frequency falls inside a band (edges inclusive), averaged again over
the sources of each region, then log-transformed.  Column n of the result
is epoch n.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyBand, EmptyRegion, ShapeMismatch


@dataclass(frozen=True, eq=False)
class EpochTimeSeries:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2 or s.shape[1] < 2:
            raise ValueError("epoch needs a (series x time) array with at least 2 time points")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def n_series(self) -> int:
        return self.samples.shape[0]

    @property
    def n_time(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class Band:
    name: str
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not 0 <= self.low_hz < self.high_hz:
            raise ValueError(f"invalid band edges {self.low_hz}..{self.high_hz}")

    def check_nyquist(self, sample_rate: float) -> None:
        if self.high_hz > sample_rate / 2:
            raise EmptyBand(f"band {self.name} exceeds the Nyquist frequency {sample_rate / 2:g} Hz")


BANDS = {
    "delta": Band("delta", 1.0, 4.0),
    "theta": Band("theta", 5.0, 7.0),
    "alpha": Band("alpha", 8.0, 12.0),
    "beta": Band("beta", 15.0, 29.0),
    "gamma": Band("gamma", 30.0, 80.0),
}


def get_band(name_or_band) -> Band:
    if isinstance(name_or_band, Band):
        return name_or_band
    try:
        return BANDS[str(name_or_band).lower()]
    except KeyError:
        raise ValueError(f"unknown band {name_or_band!r}; known: {sorted(BANDS)}") from None


@dataclass(frozen=True, eq=False)
class BandPowerMatrix:
    values: np.ndarray
    band: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ShapeMismatch(f"band-power matrix must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("band-power matrix contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_regions(self) -> int:
        return self.values.shape[0]

    @property
    def n_epochs(self) -> int:
        return self.values.shape[1]


def dft_magnitudes(epoch: EpochTimeSeries) -> np.ndarray:
    """``|F_m|`` for m = 0..J//2, one row per series (unnormalised DFT)."""
    return np.abs(np.fft.rfft(epoch.samples, axis=1))


def band_bins(band: Band, sample_rate: float, J: int) -> np.ndarray:
    freqs = np.arange(J // 2 + 1) * sample_rate / J
    mask = (freqs >= band.low_hz) & (freqs <= band.high_hz)
    if not mask.any():
        raise EmptyBand(f"no DFT bin of a {J}-point epoch at {sample_rate:g} Hz falls in {band}")
    return mask


def band_power(magnitudes, band, sample_rate: float, J: int, power: bool = False) -> np.ndarray:
    """Mean magnitude (or mean squared magnitude with ``power=True``) over the band's bins."""
    band = get_band(band)
    band.check_nyquist(sample_rate)
    mags = np.atleast_2d(np.asarray(magnitudes, dtype=float))
    if mags.shape[1] != J // 2 + 1:
        raise ShapeMismatch(f"expected {J // 2 + 1} bins for J={J}, got {mags.shape[1]}")
    sel = mags[:, band_bins(band, sample_rate, J)]
    return (sel**2 if power else sel).mean(axis=1)


def region_average(per_source_powers, region_map, A: int, allow_empty: bool = False) -> np.ndarray:
    """Mean power of the sources assigned to each region 1..A.

    ``region_map[s]`` is the region of source s (a sequence or a mapping).
    A region without sources raises :class:`EmptyRegion`, or yields NaN
    with ``allow_empty=True``.
    """
    p = np.asarray(per_source_powers, dtype=float).ravel()
    if isinstance(region_map, Mapping):
        regions = np.array([region_map[s] for s in range(p.size)])
    else:
        regions = np.asarray(region_map).ravel()
    if regions.size != p.size:
        raise ShapeMismatch(f"{p.size} sources but {regions.size} region assignments")
    if regions.size and (regions.min() < 1 or regions.max() > A):
        raise ValueError(f"region indices must lie in 1..{A}")
    sums = np.bincount(regions - 1, weights=p, minlength=A)
    counts = np.bincount(regions - 1, minlength=A)
    out = np.full(A, np.nan)
    np.divide(sums, counts, out=out, where=counts > 0)
    empty = np.flatnonzero(counts == 0) + 1
    if empty.size and not allow_empty:
        raise EmptyRegion(f"regions without sources: {empty.tolist()}")
    return out


def build_band_power_matrix(epochs: Sequence[EpochTimeSeries], band, region_map, A: int,
                            power: bool = False, floor_rel: float = 1e-12) -> BandPowerMatrix:
    """Stack ``log(region_average(band_power(epoch)))`` column by column.

    Values are floored at ``floor_rel`` times the largest power before the
    log so silent regions stay finite.
    """
    if not epochs:
        raise ValueError("no epochs given")
    band = get_band(band)
    shape, rate = epochs[0].samples.shape, epochs[0].sample_rate
    cols = []
    for e in epochs:
        if e.samples.shape != shape or e.sample_rate != rate:
            raise ShapeMismatch("all epochs must share series count, length and sample rate")
        bp = band_power(dft_magnitudes(e), band, rate, e.n_time, power)
        cols.append(region_average(bp, region_map, A))
    P = np.column_stack(cols)
    top = P.max()
    floor = floor_rel * top if top > 0 else np.finfo(float).tiny
    return BandPowerMatrix(np.log(np.maximum(P, floor)), band.name)


# ------------------------------------------------------------------- file I/O

def write_matrix_csv(matrix: BandPowerMatrix, path, metadata: Mapping | None = None) -> None:
    """CSV: optional ``#`` metadata line, then ``regions,epochs,band``, then one row per region."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        if metadata:
            fh.write("# " + json.dumps(metadata, sort_keys=True) + "\n")
        fh.write(f"{matrix.n_regions},{matrix.n_epochs},{matrix.band}\n")
        for row in matrix.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> BandPowerMatrix:
    path = Path(path)
    meta: dict = {}
    header = None
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                try:
                    meta.update(json.loads(line[1:]))
                except ValueError:
                    pass
                continue
            if header is None:
                parts = line.split(",")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected header 'regions,epochs,band'")
                try:
                    header = (int(parts[0]), int(parts[1]), parts[2])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad header {line!r}") from None
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
    if header is None:
        raise ValueError(f"{path}: missing header line")
    A, n, band = header
    arr = np.array(rows, dtype=float)
    if arr.shape != (A, n):
        raise ShapeMismatch(f"{path}: header says {A}x{n}, found {arr.shape[0]}x{arr.shape[1] if arr.ndim == 2 else 0}")
    return BandPowerMatrix(arr, band, meta)


def read_epoch_csv(path, sample_rate: float | None = None) -> EpochTimeSeries:
    """One series per row.  A ``# sample_rate=<Hz>`` comment may supply the rate."""
    rate = sample_rate
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or not "".join(rec).strip():
                continue
            if rec[0].lstrip().startswith("#"):
                text = ",".join(rec).lstrip("# ").strip()
                if text.startswith("sample_rate=") and rate is None:
                    rate = float(text.split("=", 1)[1])
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
    if rate is None:
        raise ValueError(f"{path}: sample rate not given")
    return EpochTimeSeries(np.array(rows), rate)


def read_region_map(path) -> np.ndarray:
    """Region of each source, from ``source,region`` lines (1-based, header optional)."""
    pairs = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                pairs.append((int(rec[0]), int(rec[1])))
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: expected 'source,region'") from None
    pairs.sort()
    sources = [s for s, _ in pairs]
    if sources != list(range(1, len(sources) + 1)):
        raise ValueError(f"{path}: sources must be numbered 1..S without gaps")
    return np.array([r for _, r in pairs], dtype=int)


def list_epoch_files(directory) -> list[str]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"{d} is not a directory")
    return sorted(str(p) for p in d.iterdir() if p.suffix.lower() == ".csv")

"""Two-group right-censored survival data: parsing, validation, simulation, risk sets."""
from __future__ import annotations

import enum
import io
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np
from scipy import integrate, optimize

REQUIRED_COLUMNS = ("group", "time_os_months", "event")


class DataError(ValueError):
    """Raised for malformed or invalid survival data."""


class Group(str, enum.Enum):
    CRT = "CRT"
    HFRT = "HFRT"

    @property
    def indicator(self) -> int:
        # CRT is the reference arm
        return 1 if self is Group.HFRT else 0

    @classmethod
    def parse(cls, label: str) -> "Group":
        try:
            return cls(label.strip().upper())
        except ValueError:
            raise DataError(f"unknown group label {label!r}") from None


@dataclass(frozen=True)
class SurvivalRecord:
    group: Group
    time: float
    event: int

    def __post_init__(self):
        if not isinstance(self.group, Group):
            object.__setattr__(self, "group", Group.parse(str(self.group)))
        if not (math.isfinite(self.time) and self.time > 0):
            raise DataError(f"time must be a positive finite number, got {self.time!r}")
        if self.event not in (0, 1):
            raise DataError(f"event must be 0 or 1, got {self.event!r}")
        object.__setattr__(self, "event", int(self.event))
        object.__setattr__(self, "time", float(self.time))


@dataclass(frozen=True)
class RiskTable:
    """Per distinct event time: numbers at risk and numbers of deaths, by arm.

    Arrays are ordered by increasing event time.
    """

    times: np.ndarray
    at_risk_crt: np.ndarray
    at_risk_hfrt: np.ndarray
    deaths_crt: np.ndarray
    deaths_hfrt: np.ndarray


@dataclass(frozen=True, eq=True)
class Dataset:
    records: tuple[SurvivalRecord, ...]
    provenance: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i: int) -> SurvivalRecord:
        return self.records[i]

    @property
    def group_counts(self) -> tuple[int, int]:
        """(n_CRT, n_HFRT)."""
        n_hfrt = sum(r.group is Group.HFRT for r in self.records)
        return len(self.records) - n_hfrt, n_hfrt

    @cached_property
    def n_events(self) -> int:
        return sum(r.event for r in self.records)

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records], dtype=float)

    @cached_property
    def events(self) -> np.ndarray:
        return np.array([r.event for r in self.records], dtype=int)

    @cached_property
    def z(self) -> np.ndarray:
        return np.array([r.group.indicator for r in self.records], dtype=int)

    @cached_property
    def risk_table(self) -> RiskTable:
        # With a binary covariate every risk set is summarised by two counts.
        t, d, z = self.times, self.events, self.z
        event_times = np.unique(t[d == 1])
        order = np.sort(t)
        order_hfrt = np.sort(t[z == 1])
        n_total = len(t) - np.searchsorted(order, event_times, side="left")
        n_hfrt = len(order_hfrt) - np.searchsorted(order_hfrt, event_times, side="left")
        idx = np.searchsorted(event_times, t[d == 1])
        deaths_hfrt = np.bincount(idx, weights=z[d == 1], minlength=len(event_times))
        deaths_all = np.bincount(idx, minlength=len(event_times))
        return RiskTable(
            times=event_times,
            at_risk_crt=(n_total - n_hfrt).astype(float),
            at_risk_hfrt=n_hfrt.astype(float),
            deaths_crt=(deaths_all - deaths_hfrt).astype(float),
            deaths_hfrt=deaths_hfrt.astype(float),
        )

    def swap_groups(self) -> "Dataset":
        """Return the dataset with the CRT/HFRT labels exchanged."""
        flip = {Group.CRT: Group.HFRT, Group.HFRT: Group.CRT}
        return Dataset(
            tuple(SurvivalRecord(flip[r.group], r.time, r.event) for r in self.records),
            provenance=f"{self.provenance} (groups swapped)",
        )


def risk_set(dataset: Dataset, event_index: int) -> frozenset[int]:
    """Indices of subjects at risk just before the event at ``event_index``.

    Censored subjects whose time equals the event time are included.
    """
    if not 0 <= event_index < len(dataset):
        raise IndexError(f"record index {event_index} out of range")
    rec = dataset[event_index]
    if rec.event != 1:
        raise DataError(f"record {event_index} is censored; risk sets are defined at events")
    return frozenset(int(j) for j in np.flatnonzero(dataset.times >= rec.time))


def parse_csv(source: str | TextIO, provenance: str = "") -> Dataset:
    """Parse a ``group,time_os_months,event`` table.

    Columns may appear in any order; unknown columns are ignored with a
    warning. Row numbers in error messages count data rows from 1.
    """
    text = source if isinstance(source, str) else source.read()
    lines = [ln for ln in text.replace("\r\n", "\n").split("\n") if ln.strip()]
    if not lines:
        raise DataError("empty file: header row required")
    header = [h.strip() for h in lines[0].split(",")]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise DataError(f"missing required column(s): {', '.join(missing)}")
    extra = [h for h in header if h not in REQUIRED_COLUMNS]
    if extra:
        warnings.warn(f"ignoring extra column(s): {', '.join(extra)}", stacklevel=2)
    col = {name: header.index(name) for name in REQUIRED_COLUMNS}

    records = []
    for row_no, line in enumerate(lines[1:], start=1):
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != len(header):
            raise DataError(f"row {row_no}: expected {len(header)} fields, got {len(fields)}")
        group = fields[col["group"]]
        try:
            g = Group.parse(group)
        except DataError:
            raise DataError(f"unknown group label {group!r}, row {row_no}, column group") from None
        raw_time = fields[col["time_os_months"]]
        try:
            t = float(raw_time)
        except ValueError:
            raise DataError(
                f"time_os_months must be numeric, got {raw_time!r}, row {row_no}"
            ) from None
        if not (math.isfinite(t) and t > 0):
            raise DataError(f"time_os_months must be positive, got {raw_time!r}, row {row_no}")
        raw_event = fields[col["event"]]
        if raw_event not in ("0", "1"):
            raise DataError(f"event must be 0 or 1, row {row_no}")
        records.append(SurvivalRecord(g, t, int(raw_event)))
    if not records:
        raise DataError("empty file: no data rows")
    return Dataset(tuple(records), provenance=provenance)


def read_csv(path) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh, provenance=str(path))


def write_csv(dataset: Dataset | Iterable[SurvivalRecord], out: TextIO | None = None) -> str:
    """Serialise to CSV; floats use ``repr`` so that parsing round-trips exactly."""
    buf = io.StringIO()
    buf.write(",".join(REQUIRED_COLUMNS) + "\n")
    for r in dataset:
        buf.write(f"{r.group.value},{r.time!r},{r.event}\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


@dataclass(frozen=True)
class SimulationConfig:
    n_crt: int = 8
    n_hfrt: int = 20
    true_log_hr: float = 0.0
    baseline_shape: float = 1.5
    baseline_scale: float = 18.0
    censor_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_crt < 1 or self.n_hfrt < 1:
            raise ValueError("n_crt and n_hfrt must be positive integers")
        if not math.isfinite(self.true_log_hr):
            raise ValueError("true_log_hr must be finite")
        if self.baseline_shape <= 0 or self.baseline_scale <= 0:
            raise ValueError("Weibull shape and scale must be positive")
        if not 0 <= self.censor_rate < 1:
            raise ValueError("censor_rate must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _expected_censored_fraction(rate: float, cfg: SimulationConfig) -> float:
    # P(C < T) = 1 - E[exp(-rate T)], averaged over the two arms.
    def laplace(hr: float) -> float:
        k, lam = cfg.baseline_shape, cfg.baseline_scale

        def integrand(u):
            # T = lam * (E / hr)^(1/k) with E ~ Exp(1)
            return math.exp(-u - rate * lam * (u / hr) ** (1.0 / k))

        return integrate.quad(integrand, 0.0, math.inf, limit=200)[0]

    n = cfg.n_crt + cfg.n_hfrt
    mix = (cfg.n_crt * laplace(1.0) + cfg.n_hfrt * laplace(math.exp(cfg.true_log_hr))) / n
    return 1.0 - mix


def censoring_rate_for(cfg: SimulationConfig) -> float:
    """Exponential censoring rate whose expected censored fraction is ``cfg.censor_rate``."""
    if cfg.censor_rate == 0:
        return 0.0
    hi = 1.0 / cfg.baseline_scale
    while _expected_censored_fraction(hi, cfg) < cfg.censor_rate:
        hi *= 2.0
    return optimize.brentq(
        lambda r: _expected_censored_fraction(r, cfg) - cfg.censor_rate, 0.0, hi, xtol=1e-14
    )


def simulate(config: SimulationConfig) -> Dataset:
    """Draw a two-arm dataset from proportional Weibull hazards.

    CRT rows come first, then HFRT rows. Deterministic in ``config.seed``.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_crt + config.n_hfrt
    z = np.r_[np.zeros(config.n_crt), np.ones(config.n_hfrt)]
    hr = np.exp(config.true_log_hr * z)
    e = rng.standard_exponential(n)
    t_event = config.baseline_scale * (e / hr) ** (1.0 / config.baseline_shape)
    rate = censoring_rate_for(config)
    c_draw = rng.standard_exponential(n)
    if rate > 0:
        t_cens = c_draw / rate
        time = np.minimum(t_event, t_cens)
        event = (t_event <= t_cens).astype(int)
    else:
        time, event = t_event, np.ones(n, dtype=int)
    records = tuple(
        SurvivalRecord(Group.HFRT if zi else Group.CRT, float(ti), int(di))
        for zi, ti, di in zip(z, time, event)
    )
    return Dataset(records, provenance=f"simulate({config})")

"""Monte Carlo engine: BER sweeps, calibration tables, policy comparison
and wall-clock complexity benchmarks.

Cells and determinism
---------------------
A sweep is split into independent cells, one per (SNR point, detector
variant) pair, or one per SNR point when variants must share draws (policy
comparison). Each cell owns a dedicated Philox stream keyed by
``(seed, cell stream id)``, so results are bit-identical for any worker
count and any scheduling: workers only decide *who* runs a cell, never
*what* it draws. Timing columns are the one exception; wall-clock numbers
differ run to run and are excluded from all determinism contracts.

Stopping rule
-------------
Each cell accumulates batches until it has seen at least ``min_symbols``
transmitted symbols and ``min_errors`` bit errors per variant, and gives
up at ``100 * min_symbols`` symbols. At the default thresholds a measured
point carries roughly <= 10% relative standard error. Statistical
assertions in the test suite (stream independence, K-invariance) use
fixed seeds, so they are deterministic in practice; re-seeding them is the
only way to make them flake.

Complexity benchmarks
---------------------
``bench_complexity`` times the scalar per-vector detection call (nulling
through export), never the vectorized sweep engine, because the metric of
interest is the per-detection cost of each algorithm variant. The
feedback variant is timed through ``feedback_detect`` and therefore pays
for its restarted passes and per-candidate table lookups. Benchmarking
always runs single-worker to keep the timer quiet.
"""

from __future__ import annotations

import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .batched import count_bit_errors, transmit_batch, vblast_indices_batch
from .channel import (
    RNG_ALGORITHM,
    gen_channel_batch,
    gen_noise_batch,
    link_snr,
    make_stream,
    random_bits,
)
from .detectors import NULLING_CORES, DetectorSpec, vblast_detect
from .modem import Constellation, bits_to_indices, get_constellation
from .policy import (
    CalibrationTable,
    IterationPolicy,
    SnrEstimate,
    decide_iterations,
    estimate_snr,
    feedback_detect,
    formula_iters,
    n_imax,
)

# target number of vector instances per engine batch; the draw layout is a
# whole number of channel uses (K vectors each), so the realized size is
# the smallest multiple of K at or above this
VECTORS_PER_BATCH = 1024

# stream ids: cells take 1..n_cells, pilot estimation gets its own block
_PILOT_STREAM_BASE = 2**32

# give up redrawing rank-deficient channels after this many rounds
_MAX_REDRAW_ROUNDS = 8

MIN_SYMBOLS_FLOOR = 10_000
MIN_ERRORS_FLOOR = 100
SYMBOL_BUDGET_FACTOR = 100

BENCH_WARMUP_CALLS = 100
TIMER_MIN_TICKS = 100  # ns; below this, inner-loop batching kicks in


class ConfigError(ValueError):
    """Raised for invalid sweep configurations."""


class RankRetryError(RuntimeError):
    """Raised when more than 0.1% of channel draws needed rank redraws."""


@dataclass(frozen=True)
class SweepConfig:
    """Everything one Monte Carlo run needs, with validated invariants."""

    n_t: int = 8
    n_r: int = 8
    subcarriers: int = 64
    modulation: str = "qam16"
    core: str = "mmse"
    snr_db_list: tuple = (16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0, 30.0, 32.0, 34.0)
    iters_list: tuple | None = None
    policy: IterationPolicy | None = None
    min_symbols: int = 10_000
    min_errors: int = 100
    seed: int = 1
    workers: int = 1
    snr_est: str = "genie"
    pilot_uses: int = 128
    target_ber: float = 1e-2
    bench_detections: int = 10_000

    def validate(self) -> "SweepConfig":
        if not (self.n_r >= self.n_t >= 1):
            raise ConfigError(f"need n_r >= n_t >= 1, got n_r={self.n_r}, n_t={self.n_t}")
        if self.subcarriers < 1:
            raise ConfigError(f"subcarriers must be >= 1, got {self.subcarriers}")
        try:
            get_constellation(self.modulation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.core not in NULLING_CORES:
            raise ConfigError(f"unknown core {self.core!r}, expected one of {NULLING_CORES}")
        if len(self.snr_db_list) == 0:
            raise ConfigError("snr_db_list must not be empty")
        if self.min_symbols < MIN_SYMBOLS_FLOOR:
            raise ConfigError(f"min_symbols must be >= {MIN_SYMBOLS_FLOOR}, got {self.min_symbols}")
        if self.min_errors < MIN_ERRORS_FLOOR:
            raise ConfigError(f"min_errors must be >= {MIN_ERRORS_FLOOR}, got {self.min_errors}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.snr_est not in ("genie", "pilot"):
            raise ConfigError(f"snr_est must be genie or pilot, got {self.snr_est!r}")
        if self.pilot_uses < 1:
            raise ConfigError(f"pilot_uses must be >= 1, got {self.pilot_uses}")
        if self.iters_list is not None:
            for n in self.iters_list:
                if not (0 <= n <= self.n_t - 1):
                    raise ConfigError(f"iterations {n} outside [0, {self.n_t - 1}] (n_t = {self.n_t})")
        if self.bench_detections < 100:
            raise ConfigError(f"bench_detections must be >= 100, got {self.bench_detections}")
        if not (0.0 < self.target_ber <= 1.0):
            raise ConfigError(f"target_ber must lie in (0, 1], got {self.target_ber}")
        return self


@dataclass
class BerPoint:
    """One measured (SNR, variant) cell of a sweep."""

    snr_db: float
    n_i: int
    policy: str
    bit_errors: int
    total_bits: int
    mean_detect_ns: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.total_bits


@dataclass
class BenchRow:
    variant: str
    snr_db: float
    n_i: int
    detections: int
    mean_ns: float
    bit_errors: int
    total_bits: int


@dataclass
class BenchReport:
    """Mean per-detection times and ratios against ordinary V-BLAST."""

    rows: list[BenchRow]
    summary: list[tuple[str, float, float]]  # (variant, band mean ns, ratio %)
    machine: str
    detections_per_cell: int


# ---------------------------------------------------------------------------
# cell plumbing


@dataclass(frozen=True)
class _Variant:
    tag: str
    core: str
    n_i: int


@dataclass(frozen=True)
class _Cell:
    index: int
    snr_db: float
    stream: int
    variants: tuple


def _batch_vectors(subcarriers: int) -> int:
    uses = max(1, math.ceil(VECTORS_PER_BATCH / subcarriers))
    return uses * subcarriers


def _run_cell(cfg: SweepConfig, cell: _Cell) -> list[dict]:
    c = get_constellation(cfg.modulation)
    link = link_snr(cell.snr_db, cfg.n_t)
    rng = make_stream(cfg.seed, cell.stream)
    batch = _batch_vectors(cfg.subcarriers)
    bps = c.bits_per_symbol
    cap_symbols = SYMBOL_BUDGET_FACTOR * cfg.min_symbols

    acc = {
        v.tag: {"errors": 0, "detect_ns": 0, "detections": 0}
        for v in cell.variants
    }
    symbols = 0
    retries = 0
    draws = 0

    while symbols < cap_symbols:
        h = gen_channel_batch(batch, cfg.n_r, cfg.n_t, rng)
        bits = random_bits(rng, batch * cfg.n_t * bps)
        noise = gen_noise_batch(batch, cfg.n_r, link.noise_var, rng)
        tx_idx = bits_to_indices(bits, c).reshape(batch, cfg.n_t)
        y = transmit_batch(h, c.points[tx_idx], noise)
        draws += batch

        outs = {}
        oks = {}
        for v in cell.variants:
            t0 = time.perf_counter_ns()
            out, _, ok = vblast_indices_batch(h, y, v.core, v.n_i, link, c)
            acc[v.tag]["detect_ns"] += time.perf_counter_ns() - t0
            acc[v.tag]["detections"] += batch
            outs[v.tag] = out
            oks[v.tag] = ok

        # rank-deficient instances (measure-zero for Rayleigh draws) get a
        # fresh channel, kept consistent across all variants of the cell;
        # bits and noise are reused
        rounds = 0
        bad = np.flatnonzero(~np.logical_and.reduce(list(oks.values())))
        while bad.size:
            rounds += 1
            if rounds > _MAX_REDRAW_ROUNDS:
                raise RankRetryError(f"rank redraw did not converge for {bad.size} instances")
            retries += bad.size
            draws += bad.size
            h[bad] = gen_channel_batch(bad.size, cfg.n_r, cfg.n_t, rng)
            y[bad] = transmit_batch(h[bad], c.points[tx_idx[bad]], noise[bad])
            for v in cell.variants:
                out_bad, _, ok_bad = vblast_indices_batch(h[bad], y[bad], v.core, v.n_i, link, c)
                outs[v.tag][bad] = out_bad
                oks[v.tag][bad] = ok_bad
            bad = np.flatnonzero(~np.logical_and.reduce(list(oks.values())))

        for v in cell.variants:
            acc[v.tag]["errors"] += count_bit_errors(tx_idx, outs[v.tag])

        symbols += batch * cfg.n_t
        if symbols >= cfg.min_symbols and all(
            a["errors"] >= cfg.min_errors for a in acc.values()
        ):
            break

    if retries > 0.001 * draws:
        raise RankRetryError(f"{retries} rank redraws out of {draws} draws exceeds 0.1%")

    results = []
    for v in cell.variants:
        a = acc[v.tag]
        results.append(
            {
                "snr_db": cell.snr_db,
                "n_i": v.n_i,
                "policy": v.tag,
                "bit_errors": a["errors"],
                "total_bits": symbols * bps,
                "mean_detect_ns": int(a["detect_ns"] / max(1, a["detections"])),
            }
        )
    return results


def _run_cells(cfg: SweepConfig, cells: list[_Cell]) -> list[BerPoint]:
    if cfg.workers == 1:
        chunks = [_run_cell(cfg, cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_run_cell, [cfg] * len(cells), cells))
    points = []
    for chunk in chunks:
        for row in chunk:
            points.append(BerPoint(**row))
    return points


def _point_estimate(cfg: SweepConfig, snr_db: float, point_index: int) -> SnrEstimate:
    """Operating-SNR estimate for one sweep point, on the nominal axis."""
    if cfg.snr_est == "genie":
        return SnrEstimate(snr_db, "genie")
    c = get_constellation(cfg.modulation)
    link = link_snr(snr_db, cfg.n_t)
    rng = make_stream(cfg.seed, _PILOT_STREAM_BASE + point_index)
    h = gen_channel_batch(cfg.pilot_uses, cfg.n_r, cfg.n_t, rng)
    pilot_idx = bits_to_indices(
        random_bits(rng, cfg.pilot_uses * cfg.n_t * c.bits_per_symbol), c
    ).reshape(cfg.pilot_uses, cfg.n_t)
    x = c.points[pilot_idx]
    noise = gen_noise_batch(cfg.pilot_uses, cfg.n_r, link.noise_var, rng)
    y = transmit_batch(h, x, noise)
    est = estimate_snr(y, h, x)
    # estimate_snr measures per-unit-symbol-energy SNR; shift to nominal axis
    return SnrEstimate(est.snr_db + 10.0 * math.log10(cfg.n_t), "pilot")


# ---------------------------------------------------------------------------
# public operations


def run_ber_sweep(cfg: SweepConfig, table: CalibrationTable | None = None) -> list[BerPoint]:
    """Measure BER for every (SNR, variant) cell of the configuration.

    Variants come from ``cfg.iters_list`` (tag ``fixed``, or ``zf``/``mmse``
    for a pure linear run when the list is ``[0]`` with that core) or from
    ``cfg.policy``, resolved to a concrete iteration count per SNR point
    before any cell is dispatched. Deterministic given (seed, config); the
    worker count never changes counts, only wall-clock.
    """
    cfg.validate()
    if cfg.policy is not None and cfg.policy.kind == "feedback":
        if table is None:
            raise ConfigError("feedback policy requires a calibration table")
        table.validate_for(cfg.modulation, cfg.n_t, cfg.core)

    cells = []
    for pi, snr_db in enumerate(cfg.snr_db_list):
        if cfg.policy is not None:
            est = _point_estimate(cfg, snr_db, pi)
            n = decide_iterations(cfg.policy, est, cfg.n_t, table)
            variants = (_Variant(cfg.policy.kind, cfg.core, n),)
        else:
            iters = cfg.iters_list if cfg.iters_list is not None else (cfg.n_t - 1,)
            variants = tuple(_Variant("fixed", cfg.core, n) for n in iters)
        for v in variants:
            cells.append(_Cell(len(cells), snr_db, len(cells) + 1, (v,)))
    return _run_cells(cfg, cells)


def run_linear_sweep(cfg: SweepConfig, detector: str) -> list[BerPoint]:
    """BER sweep of a pure linear detector (``zf`` or ``mmse``)."""
    cfg.validate()
    if detector not in NULLING_CORES:
        raise ConfigError(f"unknown linear detector {detector!r}")
    cells = [
        _Cell(i, snr_db, i + 1, (_Variant(detector, detector, 0),))
        for i, snr_db in enumerate(cfg.snr_db_list)
    ]
    return _run_cells(cfg, cells)


def calibrate(cfg: SweepConfig, target_ber: float | None = None):
    """Measure the full (SNR, n_i) BER grid and derive required counts.

    Returns ``(table, derived)`` where ``derived`` lists, per SNR, the
    smallest ``n_i`` in ``[1, n_imax]`` whose measured BER meets the
    target (``n_imax`` when none does). The grid itself spans
    ``n_i = 0 .. n_imax``.
    """
    cfg.validate()
    target = cfg.target_ber if target_ber is None else target_ber
    nmax = n_imax(cfg.n_t)
    grid_cfg = replace(cfg, iters_list=tuple(range(0, nmax + 1)), policy=None)
    points = run_ber_sweep(grid_cfg)

    table = CalibrationTable(
        np.array([p.snr_db for p in points]),
        np.array([p.n_i for p in points]),
        np.array([p.ber for p in points]),
        np.array([p.total_bits // get_constellation(cfg.modulation).bits_per_symbol for p in points]),
        {
            "mod": cfg.modulation,
            "nt": cfg.n_t,
            "nr": cfg.n_r,
            "core": cfg.core,
            "seed": cfg.seed,
            "target": target,
        },
    )

    derived = []
    for snr_db in cfg.snr_db_list:
        by_n = {p.n_i: p.ber for p in points if p.snr_db == snr_db}
        chosen = nmax
        for n in range(1, nmax + 1):
            if by_n[n] <= target:
                chosen = n
                break
        derived.append((snr_db, chosen))
    return table, derived


def compare_policies(cfg: SweepConfig, table: CalibrationTable) -> list[BerPoint]:
    """Formula vs feedback vs ordinary V-BLAST on identical draws.

    All three variants of one SNR point share a cell (and therefore the
    same channel, bits and noise), so the emitted curves are paired.
    """
    cfg.validate()
    table.validate_for(cfg.modulation, cfg.n_t, cfg.core)
    target = cfg.target_ber
    cells = []
    for pi, snr_db in enumerate(cfg.snr_db_list):
        est = _point_estimate(cfg, snr_db, pi)
        n_formula = decide_iterations(IterationPolicy("formula", target_ber=target), est, cfg.n_t)
        n_feedback = decide_iterations(
            IterationPolicy("feedback", target_ber=target), est, cfg.n_t, table
        )
        variants = (
            _Variant("formula", cfg.core, n_formula),
            _Variant("feedback", cfg.core, n_feedback),
            _Variant("ordinary", cfg.core, cfg.n_t - 1),
        )
        cells.append(_Cell(pi, snr_db, pi + 1, variants))
    return _run_cells(cfg, cells)


# ---------------------------------------------------------------------------
# complexity benchmark


def _machine_note() -> str:
    cpu = platform.processor() or "unknown-cpu"
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return f"{platform.system()} {platform.machine()} | {cpu} | python {platform.python_version()}"


def _timed_calls(fn, args_iter, min_ticks: int = TIMER_MIN_TICKS):
    """Total ns and call count for ``fn`` over ``args_iter``.

    If a single call resolves to fewer than ``min_ticks`` timer ticks the
    calls are timed in groups sized so each sample spans at least
    ``100 * min_ticks`` ns; counts stay exact either way.
    """
    args = list(args_iter)
    if not args:
        return 0, 0, []
    t0 = time.perf_counter_ns()
    first = fn(*args[0])
    dt = time.perf_counter_ns() - t0
    outputs = [first]
    total = dt
    if dt >= min_ticks:
        for a in args[1:]:
            t0 = time.perf_counter_ns()
            outputs.append(fn(*a))
            total += time.perf_counter_ns() - t0
        return total, len(args), outputs
    # inner-loop batching for pathologically fast calls
    group = max(1, math.ceil((100 * min_ticks) / max(1, dt)))
    i = 1
    while i < len(args):
        chunk = args[i : i + group]
        t0 = time.perf_counter_ns()
        for a in chunk:
            outputs.append(fn(*a))
        total += time.perf_counter_ns() - t0
        i += group
    return total, len(args), outputs


def bench_complexity(cfg: SweepConfig, table: CalibrationTable) -> BenchReport:
    """Per-detection wall-clock cost of each algorithm variant.

    Variants: ``ordinary`` (n_t - 1 iterations), ``fixed_nimax``,
    ``formula`` and ``feedback``. Each (variant, SNR) cell times
    ``cfg.bench_detections`` scalar detections after a discarded warmup,
    on that cell's own deterministic draws; the summary averages the mean
    per-detection time uniformly over the SNR list and normalises by the
    ordinary variant (ordinary = 100% by construction).
    """
    cfg.validate()
    table.validate_for(cfg.modulation, cfg.n_t, cfg.core)
    c = get_constellation(cfg.modulation)
    bps = c.bits_per_symbol
    nmax = n_imax(cfg.n_t)
    target = cfg.target_ber

    variant_names = ["ordinary", "fixed_nimax", "formula", "feedback"]
    rows: list[BenchRow] = []
    stream = 0
    for name in variant_names:
        for pi, snr_db in enumerate(cfg.snr_db_list):
            stream += 1
            est = _point_estimate(cfg, snr_db, pi)
            link = link_snr(snr_db, cfg.n_t)
            rng = make_stream(cfg.seed, _PILOT_STREAM_BASE // 2 + stream)
            count = BENCH_WARMUP_CALLS + cfg.bench_detections
            h = gen_channel_batch(count, cfg.n_r, cfg.n_t, rng)
            tx_idx = bits_to_indices(random_bits(rng, count * cfg.n_t * bps), c).reshape(count, cfg.n_t)
            noise = gen_noise_batch(count, cfg.n_r, link.noise_var, rng)
            y = transmit_batch(h, c.points[tx_idx], noise)

            if name == "ordinary":
                n_i = cfg.n_t - 1
                fn = lambda hb, yb: vblast_detect(hb, yb, DetectorSpec(cfg.core, cfg.n_t - 1), link, c)
            elif name == "fixed_nimax":
                n_i = nmax
                fn = lambda hb, yb: vblast_detect(hb, yb, DetectorSpec(cfg.core, nmax), link, c)
            elif name == "formula":
                n_i = formula_iters(est.snr_db, cfg.n_t)
                spec = DetectorSpec(cfg.core, n_i)
                fn = lambda hb, yb: vblast_detect(hb, yb, spec, link, c)
            else:  # feedback: restarted passes plus per-candidate lookups
                n_i = decide_iterations(IterationPolicy("feedback", target_ber=target), est, cfg.n_t, table)
                fn = lambda hb, yb: feedback_detect(
                    hb, yb, cfg.core, link, c, table, target, est.snr_db
                )[0]

            warm_args = [(h[i], y[i]) for i in range(BENCH_WARMUP_CALLS)]
            for a in warm_args:
                fn(*a)
            timed_args = ((h[i], y[i]) for i in range(BENCH_WARMUP_CALLS, count))
            total_ns, n_calls, outputs = _timed_calls(fn, timed_args)

            errors = 0
            for i, trace in enumerate(outputs):
                rx_idx = np.argmin(np.abs(trace.symbols[:, None] - c.points[None, :]), axis=1)
                errors += count_bit_errors(tx_idx[BENCH_WARMUP_CALLS + i], rx_idx)

            rows.append(
                BenchRow(
                    variant=name,
                    snr_db=snr_db,
                    n_i=n_i,
                    detections=n_calls,
                    mean_ns=total_ns / n_calls,
                    bit_errors=errors,
                    total_bits=n_calls * cfg.n_t * bps,
                )
            )

    band_mean = {
        name: float(np.mean([r.mean_ns for r in rows if r.variant == name]))
        for name in variant_names
    }
    base = band_mean["ordinary"]
    summary = [(name, band_mean[name], 100.0 * band_mean[name] / base) for name in variant_names]
    return BenchReport(rows, summary, _machine_note(), cfg.bench_detections)


# ---------------------------------------------------------------------------
# CSV output


def _meta_lines(cfg: SweepConfig, command: str, extra: dict | None = None) -> list[str]:
    kv = {
        "tool": f"osicsim-{__version__}",
        "cmd": command,
        "mod": cfg.modulation,
        "nt": cfg.n_t,
        "nr": cfg.n_r,
        "core": cfg.core,
        "k": cfg.subcarriers,
        "seed": cfg.seed,
        "min_symbols": cfg.min_symbols,
        "min_errors": cfg.min_errors,
        "workers": cfg.workers,
        "rng": RNG_ALGORITHM,
    }
    if extra:
        kv.update(extra)
    return ["# " + " ".join(f"{k}={v}" for k, v in kv.items())]


def format_ber_csv(points: list[BerPoint], cfg: SweepConfig, command: str, extra: dict | None = None) -> str:
    lines = _meta_lines(cfg, command, extra)
    lines.append("snr_db,n_i,policy,bit_errors,total_bits,ber,mean_detect_ns")
    for p in points:
        lines.append(
            f"{p.snr_db:g},{p.n_i},{p.policy},{p.bit_errors},{p.total_bits},"
            f"{p.ber:.12e},{p.mean_detect_ns}"
        )
    return "\n".join(lines) + "\n"


def format_bench_csv(report: BenchReport, cfg: SweepConfig) -> str:
    lines = _meta_lines(cfg, "bench", {"machine": report.machine.replace(" ", "_")})
    lines.append("variant,snr_db,n_i,detections,bit_errors,total_bits,mean_ns")
    for r in report.rows:
        lines.append(
            f"{r.variant},{r.snr_db:g},{r.n_i},{r.detections},{r.bit_errors},"
            f"{r.total_bits},{r.mean_ns:.1f}"
        )
    return "\n".join(lines) + "\n"


def format_bench_summary_csv(report: BenchReport) -> str:
    lines = [f"# machine={report.machine.replace(' ', '_')} detections_per_cell={report.detections_per_cell}"]
    lines.append("variant,band_mean_ns,ratio_pct")
    for name, mean_ns, ratio in report.summary:
        lines.append(f"{name},{mean_ns:.1f},{ratio:.1f}")
    return "\n".join(lines) + "\n"

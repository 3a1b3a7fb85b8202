"""Experiment orchestration: signal generation, minimal-M sweeps, and the
penalty-versus-measurements scatter records.

Every run is a pure function of its configuration and master seed: the seed
for a single trial is derived from (master seed, structure label, m, trial
index) through a stable hash, so trials can run in any order or in parallel
without changing results.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .gamma import GammaEstimate, penalty_gamma
from .grouping import GroupStructure, draw_uniform, singletons
from .operators import (
    MeasurementEnsemble,
    OrthonormalBasis,
    SupportSet,
    haar2d_analysis,
    make_basis,
)
from .recovery import RecoveryProblem, basis_pursuit, nre

SUPPORT_MODELS = ("unrestricted", "subband")


@dataclass(frozen=True)
class SignalSpec:
    """Recipe for a synthetic sparse signal.

    ``fourier1d`` draws a sparse spectrum (support unrestricted or confined
    to randomly placed contiguous sub-band channels) with coefficients
    uniform on [-1, 1]; ``wavelet_image`` keeps the k largest Haar
    coefficients of a source image (a PGM path, or a seeded synthetic
    piecewise-constant image when ``source`` is None).
    """

    kind: str
    n: int
    k: int
    support_model: str = "unrestricted"
    channel_count: int = 2
    channel_width_frac: float = 0.05
    rows: int | None = None
    cols: int | None = None
    source: str | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("fourier1d", "wavelet_image"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.support_model not in SUPPORT_MODELS:
            raise ValueError(f"unknown support model {self.support_model!r}")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"sparsity k={self.k} out of range [0, {self.n}]")
        if self.support_model == "subband":
            if self.channel_count < 1 or not 0 < self.channel_width_frac <= 1:
                raise ValueError("invalid sub-band channel parameters")
        if self.kind == "wavelet_image":
            if self.rows is None or self.cols is None or self.rows * self.cols != self.n:
                raise ValueError("wavelet_image needs rows*cols == n")


def draw_support(spec: SignalSpec, rng: np.random.Generator) -> SupportSet:
    n, k = spec.n, spec.k
    if spec.support_model == "unrestricted":
        return SupportSet(np.sort(rng.permutation(n)[:k]))
    width = math.ceil(spec.channel_width_frac * n)
    starts = rng.integers(0, n - width + 1, size=spec.channel_count)
    union = np.unique(np.concatenate([np.arange(s, s + width) for s in starts]))
    if union.size < k:
        raise ValueError(f"channel union of {union.size} indices cannot host k={k}")
    return SupportSet(np.sort(rng.permutation(union)[:k]))


def gen_signal(
    spec: SignalSpec,
    rng: np.random.Generator | None = None,
    u: OrthonormalBasis | None = None,
) -> tuple[np.ndarray, np.ndarray, SupportSet]:
    """Generate (x, c0, t): signal, sparse coefficients, support."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if u is not None and u.n != spec.n:
        raise ValueError("basis dimension does not match the signal spec")
    if spec.kind == "wavelet_image":
        if spec.source is not None:
            from .pgm import read_pgm

            img = read_pgm(spec.source)
            if img.shape != (spec.rows, spec.cols):
                raise ValueError(f"source image is {img.shape}, spec wants {(spec.rows, spec.cols)}")
        else:
            img = synthetic_image(spec.rows, spec.cols, rng)
        t, c0 = image_to_sparse(img, spec.k)
        if u is None:
            u = make_basis("haar2d", rows=spec.rows, cols=spec.cols)
        x = u.entries @ c0
        return x, c0, t
    if u is None:
        u = make_basis("dft1d", spec.n)
    t = draw_support(spec, rng)
    c0 = np.zeros(spec.n, dtype=np.complex128)
    c0[t.indices] = rng.uniform(-1.0, 1.0, len(t))
    x = u.entries @ c0
    return x, c0, t


def image_to_sparse(
    img: np.ndarray, k: int, levels: int | None = None
) -> tuple[SupportSet, np.ndarray]:
    """Keep the k largest-magnitude Haar coefficients of a grayscale image.

    Ties break toward the lower flat index.  Returns the support over
    row-major coefficient indices and the thresholded coefficient vector.
    """
    img = np.asarray(img, dtype=np.float64)
    n = img.size
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range [0, {n}]")
    coeffs = haar2d_analysis(img, levels).reshape(-1)
    order = np.argsort(-np.abs(coeffs), kind="stable")
    keep = np.sort(order[:k])
    c0 = np.zeros(n)
    c0[keep] = coeffs[keep]
    return SupportSet(keep), c0


def synthetic_image(
    rows: int, cols: int, rng: np.random.Generator, n_rects: int = 6
) -> np.ndarray:
    """Piecewise-constant test image: random gray rectangles on a gray base."""
    img = np.full((rows, cols), 0.25)
    for _ in range(n_rects):
        r0, r1 = np.sort(rng.integers(0, rows + 1, 2))
        c0, c1 = np.sort(rng.integers(0, cols + 1, 2))
        img[r0:r1, c0:c1] = rng.uniform(0.0, 1.0)
    return img


@dataclass(frozen=True)
class SweepConfig:
    """Protocol for locating the minimal sample count.

    Success at a given m means at least ``success_quota`` of ``trials_per_m``
    independent draws recover with error below ``success_nre``.  The grid
    defaults to multiples of 4g spanning (0, n].
    """

    m_grid: tuple[int, ...]
    trials_per_m: int = 100
    success_nre: float = 1e-3
    success_quota: float = 0.99
    master_seed: int = 0
    step: int | None = None
    fresh_coefficients: bool = True
    early_stop: bool = True

    def __post_init__(self):
        grid = tuple(int(m) for m in self.m_grid)
        object.__setattr__(self, "m_grid", grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("m grid must be nonempty and strictly ascending")
        if not 0 < self.success_quota <= 1:
            raise ValueError("success quota must lie in (0, 1]")
        if self.trials_per_m < 1:
            raise ValueError("trials_per_m must be positive")
        if self.step is not None and any(m % self.step for m in grid):
            raise ValueError(f"every grid value must be a multiple of step={self.step}")


def default_m_grid(n: int, g: int, step: int | None = None) -> tuple[int, ...]:
    step = 4 * g if step is None else step
    return tuple(range(step, n + 1, step))


@dataclass(frozen=True)
class MStats:
    m: int
    successes: int
    executed: int
    success: bool


@dataclass(frozen=True)
class MinMResult:
    m_min: int | None
    per_m: tuple[MStats, ...]


def _label_digest(label: str) -> int:
    return int.from_bytes(hashlib.blake2s(label.encode(), digest_size=8).digest(), "big")


def trial_rng(master_seed: int, label: str, m: int, trial: int) -> np.random.Generator:
    """Deterministic per-trial stream from (master seed, label, m, trial)."""
    seq = np.random.SeedSequence((master_seed, _label_digest(label), m, trial))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class SolverOptions:
    tol_feas: float = 1e-8
    tol_obj: float = 1e-6
    max_iters: int = 20000


def _run_trial(
    e: MeasurementEnsemble,
    gs: GroupStructure,
    t: SupportSet,
    c0: np.ndarray,
    m: int,
    trial: int,
    cfg: SweepConfig,
    solver: SolverOptions,
) -> bool:
    rng = trial_rng(cfg.master_seed, gs.label, m, trial)
    ss = draw_uniform(gs, m, rng)
    if cfg.fresh_coefficients:
        c = np.zeros(e.n, dtype=np.complex128 if np.iscomplexobj(e.a) else np.float64)
        c[t.indices] = rng.uniform(-1.0, 1.0, len(t))
    else:
        c = c0
    a_om = e.a[ss.omega]
    res = basis_pursuit(
        RecoveryProblem(a_om, a_om @ c, solver.tol_feas, solver.tol_obj, solver.max_iters)
    )
    # by unitarity of the sparsity basis this equals the signal-domain error
    return nre(c, res.c_hat) <= cfg.success_nre


def find_min_m(
    e: MeasurementEnsemble,
    gs: GroupStructure,
    t: SupportSet,
    c0: np.ndarray,
    cfg: SweepConfig,
    *,
    solver: SolverOptions | None = None,
    threads: int = 1,
) -> MinMResult:
    """First grid value whose success quota is met; None when all saturate.

    With ``early_stop`` a grid value is abandoned as soon as the quota is
    arithmetically decided, which never changes the success indicator.
    """
    if len(t) == 0:
        raise ValueError("sweeps need a nonempty support")
    if cfg.m_grid[0] < gs.g or cfg.m_grid[-1] > gs.n:
        raise ValueError(f"m grid must stay within [{gs.g}, {gs.n}]")
    solver = solver or SolverOptions()
    needed = math.ceil(cfg.success_quota * cfg.trials_per_m - 1e-9)
    allowed_failures = cfg.trials_per_m - needed
    per_m = []
    m_min = None
    for m in cfg.m_grid:
        successes = failures = executed = 0
        trials = list(range(cfg.trials_per_m))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for batch_start in range(0, len(trials), threads):
                    batch = trials[batch_start : batch_start + threads]
                    outs = list(
                        pool.map(
                            lambda j: _run_trial(e, gs, t, c0, m, j, cfg, solver), batch
                        )
                    )
                    executed += len(outs)
                    successes += sum(outs)
                    failures += len(outs) - sum(outs)
                    if cfg.early_stop and (failures > allowed_failures or successes >= needed):
                        break
        else:
            for j in trials:
                ok = _run_trial(e, gs, t, c0, m, j, cfg, solver)
                executed += 1
                successes += ok
                failures += not ok
                if cfg.early_stop and (failures > allowed_failures or successes >= needed):
                    break
        # once failures exceed the allowance, successes can never reach the
        # quota, so the indicator is exactly the full-protocol one
        success = successes >= needed
        per_m.append(MStats(m, successes, executed, success))
        if success:
            m_min = m
            break
    return MinMResult(m_min, tuple(per_m))


@dataclass(frozen=True)
class SupportCase:
    t: SupportSet
    c0: np.ndarray
    descriptor: str


@dataclass(frozen=True)
class SweepRecord:
    structure_label: str
    support_descriptor: str
    gamma: GammaEstimate
    m_min: int | None
    m0: int | None
    trials: int
    seed: int


def scatter_gamma_vs_m(
    e: MeasurementEnsemble,
    structures: list[GroupStructure],
    supports: list[SupportCase],
    cfg: SweepConfig,
    *,
    mode: str = "auto",
    solver: SolverOptions | None = None,
    threads: int = 1,
    gamma_seed: int = 0,
) -> list[SweepRecord]:
    """One record per (structure, support): penalty factor, minimal M, and the
    size-1-group baseline M0 computed with the identical protocol."""
    base = singletons(e.n)
    records = []
    m0_cache: dict[str, int | None] = {}
    for sup in supports:
        if sup.descriptor not in m0_cache:
            m0_cache[sup.descriptor] = find_min_m(
                e, base, sup.t, sup.c0, cfg, solver=solver, threads=threads
            ).m_min
        m0 = m0_cache[sup.descriptor]
        for gs in structures:
            est = penalty_gamma(e, sup.t, gs, mode, seed=gamma_seed)
            if gs.label == base.label:
                m_min = m0
            else:
                m_min = find_min_m(
                    e, gs, sup.t, sup.c0, cfg, solver=solver, threads=threads
                ).m_min
            records.append(
                SweepRecord(
                    structure_label=gs.label,
                    support_descriptor=sup.descriptor,
                    gamma=est,
                    m_min=m_min,
                    m0=m0,
                    trials=cfg.trials_per_m,
                    seed=cfg.master_seed,
                )
            )
    return records


def success_rate(
    e: MeasurementEnsemble,
    t: SupportSet,
    c0: np.ndarray,
    m: int,
    trials: int,
    *,
    structure: GroupStructure | None = None,
    master_seed: int = 0,
    success_nre: float = 1e-3,
    solver: SolverOptions | None = None,
    fresh_coefficients: bool = True,
) -> tuple[int, int]:
    """Successes out of ``trials`` at fixed m.

    ``structure=None`` samples m rows uniformly at random (no grouping);
    otherwise whole groups are drawn.  Returns (successes, trials).
    """
    solver = solver or SolverOptions()
    label = structure.label if structure is not None else "direct_index"
    successes = 0
    for j in range(trials):
        rng = trial_rng(master_seed, label, m, j)
        if structure is None:
            omega = np.sort(rng.permutation(e.n)[:m])
        else:
            omega = draw_uniform(structure, m, rng).omega
        if fresh_coefficients:
            c = np.zeros(e.n, dtype=np.complex128 if np.iscomplexobj(e.a) else np.float64)
            c[t.indices] = rng.uniform(-1.0, 1.0, len(t))
        else:
            c = c0
        a_om = e.a[omega]
        res = basis_pursuit(
            RecoveryProblem(a_om, a_om @ c, solver.tol_feas, solver.tol_obj, solver.max_iters)
        )
        successes += nre(c, res.c_hat) <= success_nre
    return successes, trials


_CSV_COLUMNS = (
    "structure",
    "support",
    "gamma_lower",
    "gamma_upper",
    "gamma_exact",
    "gamma_method",
    "gamma_argmax_group",
    "gamma_degraded",
    "m_min",
    "m0",
    "trials",
    "seed",
)


def format_float(x: float) -> str:
    return f"{x:.12g}"


def records_to_csv(records: list[SweepRecord], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.structure_label,
                r.support_descriptor,
                format_float(r.gamma.lower),
                format_float(r.gamma.upper),
                "" if r.gamma.exact is None else format_float(r.gamma.exact),
                r.gamma.method,
                r.gamma.argmax_group,
                int(r.gamma.degraded),
                "saturated" if r.m_min is None else r.m_min,
                "saturated" if r.m0 is None else r.m0,
                r.trials,
                r.seed,
            ]
        )


def records_from_csv(fh) -> list[SweepRecord]:
    reader = csv.reader(fh)
    header = next(reader)
    if tuple(header) != _CSV_COLUMNS:
        raise ValueError(f"unexpected sweep CSV header {header}")
    out = []
    for row in reader:
        vals = dict(zip(_CSV_COLUMNS, row))
        est = GammaEstimate(
            lower=float(vals["gamma_lower"]),
            upper=float(vals["gamma_upper"]),
            exact=None if vals["gamma_exact"] == "" else float(vals["gamma_exact"]),
            method=vals["gamma_method"],
            argmax_group=int(vals["gamma_argmax_group"]),
            degraded=bool(int(vals["gamma_degraded"])),
        )
        out.append(
            SweepRecord(
                structure_label=vals["structure"],
                support_descriptor=vals["support"],
                gamma=est,
                m_min=None if vals["m_min"] == "saturated" else int(vals["m_min"]),
                m0=None if vals["m0"] == "saturated" else int(vals["m0"]),
                trials=int(vals["trials"]),
                seed=int(vals["seed"]),
            )
        )
    return out


def records_to_csv_text(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    records_to_csv(records, buf)
    return buf.getvalue()

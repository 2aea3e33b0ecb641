"""Monte Carlo simulation of mixed transitions in exact arithmetic."""

from __future__ import annotations

import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from decisive.errors import BlockedState
from decisive.formula.syntax import Formula
from decisive.shs.model import HybridSystem, State
from decisive.analysis.sts_view import StepModel

_Z95 = NormalDist().inv_cdf(0.975)


def wilson_interval(hits: int, n: int, z: float = _Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = hits / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == n else min(1.0, centre + half)
    return lo, hi


def sample_rng(seed: int, index: int) -> random.Random:
    """Independent generator for sample ``index``, reproducible from ``seed``."""
    state = np.random.SeedSequence(entropy=seed, spawn_key=(index,)).generate_state(4)
    return random.Random(int.from_bytes(state.tobytes(), "little"))


@dataclass(frozen=True)
class RunSample:
    states: tuple[State, ...]
    delays: tuple[Fraction, ...]
    edges: tuple[str, ...]
    seed: int
    index: int
    hit_step: int | None
    random_used: bool


@dataclass(frozen=True)
class SimulationResult:
    samples: int
    hits: int
    seed: int
    horizon: int
    wilson: tuple[float, float]
    deterministic: bool
    hit_steps: tuple[int | None, ...] = field(repr=False, default=())
    runs: tuple[RunSample, ...] = field(repr=False, default=())

    @property
    def estimate(self) -> float:
        return self.hits / self.samples

    @property
    def interval(self) -> tuple[float, float]:
        if self.deterministic:
            return self.estimate, self.estimate
        return self.wilson

    def to_dict(self) -> dict:
        return {"samples": self.samples, "hits": self.hits, "estimate": self.estimate,
                "wilson": list(self.interval), "seed": self.seed, "horizon": self.horizon}


def _in(target: Mapping[str, Formula], s: State, variables) -> bool:
    f = target.get(s.location)
    return f is not None and f.evaluate(dict(zip(variables, s.valuation)))


def run_once(H: HybridSystem, model: StepModel, target: Mapping[str, Formula], horizon: int,
             rng: random.Random, seed: int = 0, index: int = 0, record: bool = False,
             avoid=None) -> RunSample:
    """One run of at most ``horizon`` mixed transitions, stopped at the target
    (or when ``avoid(state)`` is true)."""
    s = init_state(H, model, rng)
    used = H.initial.kind == "uniform" or len(H.initial.points) > 1
    states, delays, edges = [s], [], []
    hit = 0 if _in(target, s, H.variables) else None
    step = 0
    while hit is None and step < horizon:
        if avoid is not None and avoid(s):
            break
        tau, e, s, u = model.step(s, rng)
        used = used or u
        step += 1
        if record:
            states.append(s)
            delays.append(tau)
            edges.append(e.name)
        if _in(target, s, H.variables):
            hit = step
    return RunSample(tuple(states), tuple(delays), tuple(edges), seed, index, hit, used)


def init_state(H: HybridSystem, model: StepModel, rng: random.Random) -> State:
    init = H.initial
    if init.kind == "points":
        p = init.points[rng.randrange(len(init.points))] if len(init.points) > 1 else init.points[0]
        return State(init.location, p)
    return State(init.location, model.sample_region(init.region, H.variables, {}, rng))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("DECISIVE_THREADS", "1")))
    except ValueError:
        return 1


def _run_chunk(args) -> list[RunSample]:
    H, target, horizon, seed, indices, keep_runs = args
    model = StepModel(H)
    return [run_once(H, model, target, horizon, sample_rng(seed, i), seed, i, record=i < keep_runs)
            for i in indices]


def simulate(H: HybridSystem, B, horizon: int = 1000, samples: int = 10_000, seed: int = 0,
             keep_runs: int = 0, avoid=None, model: StepModel | None = None) -> SimulationResult:
    """Estimate ``P(F<=horizon B)`` with a Wilson 95% interval.

    Each sample uses its own generator derived from ``(seed, index)``, so
    results do not depend on evaluation order. With ``DECISIVE_THREADS`` above
    one, samples are spread over that many worker processes and merged in
    index order.
    """
    if horizon < 1 or samples < 1:
        raise ValueError("horizon and samples must be positive")
    target = H.target(B)
    model = model or StepModel(H)
    hits = 0
    deterministic = True
    hit_steps = []
    runs = []
    workers = worker_count()
    if workers > 1 and avoid is None and samples >= 2 * workers:
        chunks = [range(k, samples, workers) for k in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, [(H, target, horizon, seed, c, keep_runs) for c in chunks]))
        all_runs = sorted((r for part in parts for r in part), key=lambda r: r.index)
    else:
        all_runs = (run_once(H, model, target, horizon, sample_rng(seed, i), seed, i,
                             record=i < keep_runs, avoid=avoid) for i in range(samples))
    for i, run in enumerate(all_runs):
        if run.hit_step is not None:
            hits += 1
        deterministic = deterministic and not run.random_used
        hit_steps.append(run.hit_step)
        if i < keep_runs:
            runs.append(run)
    return SimulationResult(samples, hits, seed, horizon, wilson_interval(hits, samples),
                            deterministic, tuple(hit_steps), tuple(runs))


def replay(H: HybridSystem, delays: Sequence, start: State | None = None,
           edges: Sequence[str] | None = None, model: StepModel | None = None) -> list[State]:
    """Follow forced delays (and optionally forced edges) from ``start``.

    Each delay must lie in the delay set of the current state; without a
    forced edge the enabled edge must be unique.
    """
    model = model or StepModel(H)
    if start is None:
        if H.initial.kind != "points" or len(H.initial.points) != 1:
            raise ValueError("replay needs an explicit start state")
        start = State(H.initial.location, H.initial.points[0])
    s = start
    out = [s]
    rng = random.Random(0)
    for k, tau in enumerate(delays):
        tau = Fraction(tau)
        if not model.delay_law(s).support.contains(tau):
            raise BlockedState(f"delay {tau} is not admissible at {s}")
        moved = model.after(s.location, s.valuation, tau)
        enabled = model.enabled_at(s.location, moved)
        if edges is not None:
            chosen = [e for e in enabled if e.name == edges[k]]
            if not chosen:
                raise BlockedState(f"edge {edges[k]} not enabled after delay {tau} from {s}")
        elif len(enabled) != 1:
            raise BlockedState(f"{len(enabled)} edges enabled after delay {tau} from {s}; force one")
        else:
            chosen = enabled
        e = chosen[0]
        s = State(e.target, model.sample_reset(e, moved, rng))
        out.append(s)
    return out


def avoid_predicate(H: HybridSystem, B, max_iter: int = 50):
    """Predicate true on states from which ``B`` is unreachable.

    Built from the stable abstraction (so only meaningful for cycle-reset
    systems); a run entering such a state can stop early as a miss.
    """
    from decisive.abstraction import build_abstraction, to_finite_sts
    from decisive.finite_sts import avoid_set

    A = build_abstraction(H, B, max_iter)
    bad = [A.blocks[i] for i in sorted(avoid_set(to_finite_sts(A), A.targets))]
    if not bad:
        return None
    by_loc: dict[str, list[Formula]] = {}
    for b in bad:
        by_loc.setdefault(b.location, []).append(b.formula)

    def avoid(s: State) -> bool:
        fs = by_loc.get(s.location)
        if not fs:
            return False
        env = dict(zip(H.variables, s.valuation))
        return any(f.evaluate(env) for f in fs)

    return avoid

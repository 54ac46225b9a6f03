"""Monitor placement by genetic-algorithm coherence minimization.

A design is a fixed-size subset of candidate rows, shared by every harmonic
order (a physical monitor reports all orders).  Fitness is the order-weighted
worst Gram deviation of the column-normalized selected submatrices,
sum_h (1/h) * max|Gram_h - I|, with a large penalty for selections whose
per-order rows are linearly dependent (those certify spark <= 2k through
spark <= rank + 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measurement import CandidateMatrix, RowTag, stack_real

_PENALTY = 1.0e6


class DesignInfeasibleError(Exception):
    """No rank-feasible row selection was found."""


@dataclass(frozen=True)
class GaParams:
    population_size: int = 100
    generations: int = 300
    crossover_rate: float = 0.9
    mutation_rate: float = 0.05
    elitism_count: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0 <= self.elitism_count <= self.population_size:
            raise ValueError("elitism_count must be in 0..population_size")


@dataclass(frozen=True)
class OrderStats:
    order: int
    gram_deviation: float          # objective term before the 1/h weight
    coherence: float               # complex-modulus coherence of the selection
    spark_lower_bound: float
    certified: bool                # 1 + 1/mu > 2k proves spark > 2k
    full_row_rank: bool


@dataclass(frozen=True)
class SensingDesign:
    selected_rows: tuple[int, ...]
    orders: tuple[int, ...]
    m: int
    k: int
    objective: float
    per_order_H: dict[int, np.ndarray] = field(compare=False)
    stats: tuple[OrderStats, ...] = ()
    monitors: tuple[RowTag, ...] = ()
    fitness_history: tuple[float, ...] = field(default=(), compare=False)

    @property
    def certified(self) -> bool:
        return all(s.certified for s in self.stats)

    def monitor_counts(self) -> dict[str, int]:
        counts = {"voltage": 0, "current": 0}
        for tag in self.monitors:
            counts[tag.kind] += 1
        return counts


def design_objective(rows, candidates: dict[int, CandidateMatrix], orders=None) -> float:
    """Order-weighted Gram deviation of a row selection.

    For each order the selected rows are stacked to real form, columns
    normalized to unit norm, and the maximum absolute entry of (Gram - I)
    taken; the result is sum over orders of deviation / h.  A selection that
    zeroes out some column scores +inf.
    """
    idx = np.asarray(sorted(set(int(r) for r in rows)), dtype=int)
    if idx.size == 0:
        raise ValueError("row selection is empty")
    if orders is None:
        orders = sorted(candidates)
    total = 0.0
    for h in orders:
        sel = stack_real(candidates[h].rows[idx])
        norms = np.linalg.norm(sel, axis=0)
        if np.min(norms) <= 0.0:
            return np.inf
        seln = sel / norms
        dev = np.max(np.abs(seln.T @ seln - np.eye(seln.shape[1])))
        total += dev / h
    return float(total)


def _selection_stats(a_sel: np.ndarray, k: int, order: int) -> tuple[float, OrderStats]:
    """Gram deviation and feasibility of one complex row selection.

    Works on the complex selection directly: the stacked real Gram of
    column-normalized columns is [[Re G, -Im G], [Im G, Re G]], so its
    deviation from I is max(|Re G - I|, |Im G|).
    """
    n = a_sel.shape[1]
    norms = np.linalg.norm(a_sel, axis=0)
    if np.min(norms) <= 0.0:
        return np.inf, OrderStats(order, np.inf, 1.0, 2.0, False, False)
    an = a_sel / norms
    g = an.conj().T @ an
    dev = float(max(np.max(np.abs(g.real - np.eye(n))), np.max(np.abs(g.imag))))
    gm = np.abs(g)
    np.fill_diagonal(gm, 0.0)
    mu = float(gm.max())
    bound = np.inf if mu == 0 else 1.0 + 1.0 / mu
    try:
        np.linalg.cholesky(a_sel @ a_sel.conj().T)
        full_rank = True
    except np.linalg.LinAlgError:
        full_rank = False
    certified = full_rank and bound > 2 * k
    return dev, OrderStats(order, dev, mu, bound, certified, full_rank)


def _fitness(idx, complex_rows, orders, k):
    """(penalized fitness, objective, stats) of one chromosome."""
    total = 0.0
    penalty = 0.0
    stats = []
    for h in orders:
        dev, st = _selection_stats(complex_rows[h][idx], k, h)
        stats.append(st)
        if not np.isfinite(dev) or not st.full_row_rank:
            penalty = _PENALTY
            dev = 1.0 if not np.isfinite(dev) else dev
        total += dev / h
    return total + penalty, total, tuple(stats)


def design_from_rows(
    rows, candidates: dict[int, CandidateMatrix], k: int, orders=None,
    fitness_history=(),
) -> SensingDesign:
    """Instantiate a design (stacked matrices, stats, monitors) from a row set."""
    if orders is None:
        orders = tuple(sorted(candidates))
    orders = tuple(int(h) for h in orders)
    idx = np.asarray(sorted(set(int(r) for r in rows)), dtype=int)
    any_cand = candidates[orders[0]]
    if idx.size == 0 or idx.min() < 0 or idx.max() >= any_cand.n_rows:
        raise ValueError("selected rows out of candidate bounds")
    per_order = {h: stack_real(candidates[h].rows[idx]) for h in orders}
    objective = design_objective(idx, candidates, orders)
    stats = tuple(
        _selection_stats(candidates[h].rows[idx], k, h)[1] for h in orders
    )
    monitors = tuple(any_cand.row_tags[i] for i in idx)
    return SensingDesign(
        selected_rows=tuple(int(i) for i in idx),
        orders=orders,
        m=int(idx.size),
        k=int(k),
        objective=float(objective),
        per_order_H=per_order,
        stats=stats,
        monitors=monitors,
        fitness_history=tuple(fitness_history),
    )


def ga_select_rows(
    candidates: dict[int, CandidateMatrix],
    m: int,
    k: int,
    orders=None,
    params: GaParams = GaParams(),
) -> SensingDesign:
    """Choose m candidate rows minimizing the weighted coherence objective.

    Chromosomes are size-m index sets; uniform crossover is set union followed
    by random down-sampling to m; mutation swaps a selected row for an
    unselected one.  Elitism makes the best fitness nonincreasing across
    generations, and a fixed seed makes the whole run reproducible.
    """
    if orders is None:
        orders = tuple(sorted(candidates))
    orders = tuple(int(h) for h in orders)
    n_rows = candidates[orders[0]].n_rows
    if not 1 <= m <= n_rows:
        raise ValueError(f"m must be in 1..{n_rows}, got {m}")
    if m < 2 * k:
        raise ValueError(f"m must exceed 2k (m={m}, k={k})")
    complex_rows = {h: candidates[h].rows for h in orders}
    rng = np.random.default_rng(params.rng_seed)
    cache: dict[tuple, tuple] = {}

    def fitness(chrom: tuple) -> tuple:
        hit = cache.get(chrom)
        if hit is None:
            hit = _fitness(np.asarray(chrom, dtype=int), complex_rows, orders, k)
            cache[chrom] = hit
        return hit

    def random_chromosome() -> tuple:
        return tuple(sorted(rng.choice(n_rows, size=m, replace=False).tolist()))

    population = [random_chromosome() for _ in range(params.population_size)]
    best_chrom: tuple | None = None
    best_fit = np.inf
    history = []
    for _ in range(params.generations):
        scored = sorted(
            population, key=lambda ch: (fitness(ch)[0], ch)
        )
        gen_best = scored[0]
        gen_fit = fitness(gen_best)[0]
        if gen_fit < best_fit:
            best_fit, best_chrom = gen_fit, gen_best
        history.append(best_fit)
        nxt = list(scored[: params.elitism_count])
        while len(nxt) < params.population_size:
            parents = []
            for _ in range(2):
                i, j = rng.integers(params.population_size, size=2)
                a, b = scored[i], scored[j]
                parents.append(a if fitness(a)[0] <= fitness(b)[0] else b)
            if rng.random() < params.crossover_rate:
                pool = np.asarray(sorted(set(parents[0]) | set(parents[1])), dtype=int)
                pick = rng.choice(pool.size, size=m, replace=False)
                child = list(pool[np.sort(pick)])
            else:
                child = list(parents[0])
            mutate = np.nonzero(rng.random(m) < params.mutation_rate)[0]
            if mutate.size:
                selected = set(child)
                others = np.asarray(
                    [r for r in range(n_rows) if r not in selected], dtype=int
                )
                for gene in mutate:
                    if others.size == 0:
                        break
                    pos = int(rng.integers(others.size))
                    selected.discard(child[gene])
                    child[gene] = int(others[pos])
                    others[pos] = -1
                    others = others[others >= 0]
                    selected.add(child[gene])
                child = sorted(selected)
            nxt.append(tuple(sorted(child)))
        population = nxt
    scored = sorted(population, key=lambda ch: (fitness(ch)[0], ch))
    if fitness(scored[0])[0] < best_fit:
        best_fit, best_chrom = fitness(scored[0])[0], scored[0]
    history.append(best_fit)
    if best_chrom is None or best_fit >= _PENALTY:
        _, obj, stats = fitness(best_chrom) if best_chrom else (None, np.inf, ())
        raise DesignInfeasibleError(
            f"no rank-feasible selection found (best objective {obj:.4g}; "
            f"rank-deficient orders: "
            f"{[s.order for s in stats if not s.full_row_rank]})"
        )
    return design_from_rows(
        best_chrom, candidates, k, orders, fitness_history=tuple(history)
    )


def extract_monitors(design: SensingDesign, candidates: dict[int, CandidateMatrix] | None = None):
    """Physical placement records for a design's rows, plus counts by kind.

    ``candidates`` re-resolves tags when the design was built elsewhere;
    otherwise the design's own tags are used.
    """
    if candidates is not None:
        any_cand = candidates[sorted(candidates)[0]]
        tags = tuple(any_cand.row_tags[i] for i in design.selected_rows)
    else:
        tags = design.monitors
    placements = []
    for tag in tags:
        if tag.kind == "voltage":
            placements.append({"kind": "voltage", "bus": tag.bus})
        else:
            placements.append(
                {
                    "kind": "current",
                    "from": tag.from_bus,
                    "to": tag.to_bus,
                    "branch_index": tag.branch_index,
                }
            )
    return placements

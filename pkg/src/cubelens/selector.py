"""Statistics-driven choice between Max-MQO and Mid-MQO.

The costs that matter are fact-table touches.  We count, exactly, the rows
matched by the detailed filter regions of the original query, the two
sibling queries and the all-encompassing query (cheap popcounts over the
cached filter bitsets, which the subsequent execution reuses).  Max-MQO is
picked only when the sibling regions jointly cover a large share of the
all-encompassing region (they overlap enough for the single scan to pay off)
and the two sibling regions are not too imbalanced.  Everything else runs
Mid-MQO.  Min-MQO is never auto-selected; it exists as an explicit override
and as the correctness oracle.

When a sibling cannot be derived (no filter atom, or a filter at ALL), the
widening is vacuous and that region falls back to the original condition's
region; the slot is flagged as degraded and the selector then stays on
Mid-MQO.  This keeps the containment chain
facts_org <= facts_sA/facts_sB <= facts_A <= row_count valid for every query.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analyze import AnalyzeQuery, sibling_atom
from .errors import NoFilterAtom, NoParentLevel

DEFAULT_COVERAGE_THRESHOLD = 0.40
DEFAULT_IMBALANCE_THRESHOLD = 0.45


@dataclass
class SelectorConfig:
    coverage_threshold: float = DEFAULT_COVERAGE_THRESHOLD
    imbalance_threshold: float = DEFAULT_IMBALANCE_THRESHOLD
    enabled: bool = True


@dataclass
class CostStats:
    """Fact rows touched by the facilitator filter regions."""

    facts_org: int
    facts_sib_a: int
    facts_sib_b: int
    facts_all: int
    sibling_union: int
    row_count: int
    degraded: tuple[str, ...] = ()  # facilitator roles whose structure is missing

    @property
    def complete(self) -> bool:
        return not self.degraded


@dataclass
class StrategyChoice:
    chosen: str  # 'min' | 'mid' | 'max'
    sibling_coverage: float
    sibling_imbalance: float
    reason: str


def estimate_stats(aq: AnalyzeQuery) -> CostStats:
    """Exact region sizes via cached filter bitsets; no sampling."""
    degraded = []

    def widened(which, role):
        try:
            return sibling_atom(aq, which)
        except (NoFilterAtom, NoParentLevel):
            degraded.append(role)
            return None

    star_a = widened("alpha", "sibA")
    star_b = widened("beta", "sibB")
    g_a, g_b = aq.groupers
    if g_a.depth == 0 or g_b.depth == 0 or star_a is None or star_b is None:
        degraded.append("all")

    cond_org = aq.condition
    cond_a = cond_org.replacing(g_a.dimension_name, star_a) if star_a else cond_org
    cond_b = cond_org.replacing(g_b.dimension_name, star_b) if star_b else cond_org
    cond_all = cond_a.replacing(g_b.dimension_name, star_b) if star_b else cond_a

    cube = aq.cube
    mask_org = cube.condition_mask(cond_org.mask_atoms())
    mask_a = cube.condition_mask(cond_a.mask_atoms())
    mask_b = cube.condition_mask(cond_b.mask_atoms())
    mask_all = cube.condition_mask(cond_all.mask_atoms())

    return CostStats(
        facts_org=int(np.count_nonzero(mask_org)),
        facts_sib_a=int(np.count_nonzero(mask_a)),
        facts_sib_b=int(np.count_nonzero(mask_b)),
        facts_all=int(np.count_nonzero(mask_all)),
        sibling_union=int(np.count_nonzero(mask_a | mask_b)),
        row_count=cube.row_count,
        degraded=tuple(dict.fromkeys(degraded)),
    )


def choose_strategy(stats: CostStats, config: Optional[SelectorConfig] = None) -> StrategyChoice:
    """Max iff sibling coverage > threshold and sibling imbalance < threshold;
    Mid otherwise (and always Mid when the selector is disabled, the merged
    structure is missing, or the stats are degenerate)."""
    config = config or SelectorConfig()
    if not config.enabled:
        return StrategyChoice("mid", 0.0, 0.0, "selector disabled")
    if not stats.complete:
        return StrategyChoice("mid", 0.0, 0.0,
                              f"degraded structure ({', '.join(stats.degraded)})")
    if stats.facts_all == 0:
        return StrategyChoice("mid", 0.0, 0.0, "degenerate stats: empty all-encompassing region")

    coverage = stats.sibling_union / stats.facts_all
    hi = max(stats.facts_sib_a, stats.facts_sib_b)
    lo = min(stats.facts_sib_a, stats.facts_sib_b)
    imbalance = 0.0 if hi == 0 else 1.0 - lo / hi

    if coverage > config.coverage_threshold and imbalance < config.imbalance_threshold:
        return StrategyChoice("max", coverage, imbalance,
                              f"coverage {coverage:.2f} > {config.coverage_threshold:.2f} and "
                              f"imbalance {imbalance:.2f} < {config.imbalance_threshold:.2f}")
    return StrategyChoice("mid", coverage, imbalance,
                          f"coverage {coverage:.2f} / imbalance {imbalance:.2f} "
                          f"outside the Max-MQO region")

"""One-step energy/QoS optimization advisor over a set of cells."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

SLEEP_BELOW = 0.1
OVERLOAD_ABOVE = 0.8


@dataclass(frozen=True)
class CellState:
    load: float
    active: bool = True
    energy: float = 1.0


@dataclass(frozen=True)
class OptimizationAdvice:
    action: str
    utility_delta: float


def qos(load: float) -> float:
    return 1.0 - max(0.0, load - OVERLOAD_ABOVE) / (1.0 - OVERLOAD_ABOVE)


def utility(cells: Sequence[CellState], energy_weight: float) -> float:
    active = [c for c in cells if c.active]
    return sum(qos(c.load) for c in active) - energy_weight * sum(c.energy for c in active)


def _least_loaded(cells: Sequence[CellState], exclude: int) -> int | None:
    best = None
    for j, c in enumerate(cells):
        if j != exclude and c.active and (best is None or c.load < cells[best].load):
            best = j
    return best


def candidate_actions(cells: Sequence[CellState]) -> dict[str, list[CellState]]:
    """Every applicable action id mapped to the resulting cell states.

    ``sleep(i)`` switches off an active cell under 10% load and moves its load
    to the least-loaded other active cell. ``shift(i->j)`` moves the load above
    80% from cell ``i`` to another active cell ``j``.
    """
    cells = list(cells)
    actions = {"no-op": cells}
    for i, c in enumerate(cells):
        if not c.active:
            continue
        if c.load < SLEEP_BELOW:
            j = _least_loaded(cells, i)
            if j is not None:
                after = list(cells)
                after[j] = replace(cells[j], load=cells[j].load + c.load)
                after[i] = replace(c, load=0.0, active=False)
                actions[f"sleep({i})"] = after
        if c.load > OVERLOAD_ABOVE:
            excess = c.load - OVERLOAD_ABOVE
            for j, other in enumerate(cells):
                if j != i and other.active:
                    after = list(cells)
                    after[i] = replace(c, load=OVERLOAD_ABOVE)
                    after[j] = replace(other, load=other.load + excess)
                    actions[f"shift({i}->{j})"] = after
    return actions


def is_applicable(action: str, cells: Sequence[CellState]) -> bool:
    return action in candidate_actions(cells)


def advise_optimization(cells: Sequence[CellState], energy_weight: float) -> OptimizationAdvice:
    """Action with the largest utility gain; ties go to the smallest action id."""
    if not cells:
        raise ValueError("state must contain at least one cell")
    base = utility(cells, energy_weight)
    scored = [(utility(after, energy_weight) - base, action) for action, after in candidate_actions(cells).items()]
    best_delta = max(delta for delta, _ in scored)
    best_action = min(action for delta, action in scored if delta == best_delta)
    return OptimizationAdvice(best_action, best_delta)

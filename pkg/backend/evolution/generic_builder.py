"""
Evolutions with the absorption property: the bookkeeping builder, absorption
audits, and the back-and-forth constructions (uniqueness, cofinality,
homogeneity) checked on finite stages.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, List, Optional, Tuple

from amalgamation import amalgamate_paths
from evolution_core import CheckResult, EqualityMode, Evolution, Path, Verdict, enumerate_paths, path_moves
from evolution_errors import AbsorptionFailed, BudgetExceeded, ConfigError
from serialization import encode_path

logger = logging.getLogger(__name__)


class Policy(Enum):
    FIFO = "fifo"
    ROUND_ROBIN = "rr"


@dataclass(frozen=True)
class Obligation:
    """A transition out of a stage that the evolution still has to absorb"""

    stage: int
    key: str
    label: str = ""


def move_keys(system, obj, budget) -> List[Tuple[str, Path]]:
    """Nontrivial single moves out of obj keyed by codomain class and ordinal"""
    keyed, seen = [], {}
    for move in path_moves(system, obj, budget):
        if move.length == 0:
            continue
        ordinal = seen.get(move.end.canon, 0)
        seen[move.end.canon] = ordinal + 1
        keyed.append((f"{move.end.key_hex}:{ordinal}", move))
    return keyed


def resolve_obligation(system, evo: Evolution, obligation: Obligation, budget) -> Path:
    for key, move in move_keys(system, evo.stages[obligation.stage], budget):
        if key == obligation.key:
            return move
    raise ConfigError(f"Obligation {obligation.key} no longer resolves at stage {obligation.stage}")


class Schedule:
    """Pending obligations; FIFO or round-robin over the stages that still have work"""

    def __init__(self, policy=Policy.FIFO):
        self.policy = Policy(policy)
        self.queue: Deque[Obligation] = deque()
        self.by_stage: Dict[int, Deque[Obligation]] = {}
        self.last_stage = -1
        self.sweep_end: Optional[int] = None
        self.dequeued = 0

    def __len__(self):
        if self.policy is Policy.FIFO:
            return len(self.queue)
        return sum(len(pending) for pending in self.by_stage.values())

    def enqueue(self, obligation: Obligation):
        if self.policy is Policy.FIFO:
            self.queue.append(obligation)
        else:
            self.by_stage.setdefault(obligation.stage, deque()).append(obligation)

    def push_front(self, obligation: Obligation):
        if self.policy is Policy.FIFO:
            self.queue.appendleft(obligation)
        else:
            self.by_stage.setdefault(obligation.stage, deque()).appendleft(obligation)

    def enqueue_stage(self, system, evo, stage, budget):
        for key, move in move_keys(system, evo.stages[stage], budget):
            self.enqueue(Obligation(stage, key, move.label()))

    def pop(self) -> Obligation:
        if not len(self):
            raise IndexError("No pending obligations")
        self.dequeued += 1
        if self.policy is Policy.FIFO:
            return self.queue.popleft()
        stages = sorted(stage for stage, pending in self.by_stage.items() if pending)
        if self.sweep_end is None:
            self.sweep_end = stages[-1]
        # a sweep visits the stages pending when it began, so new stages wait for the next one
        current = [s for s in stages if self.last_stage < s <= self.sweep_end]
        if not current:
            self.sweep_end = stages[-1]
            current = stages
        stage = current[0]
        self.last_stage = stage
        return self.by_stage[stage].popleft()


def discharge(system, evo: Evolution, obligation: Obligation, budget, dequeue_index=0):
    """Amalgamate the obligation against the path from its stage to the end; returns the extended evolution"""
    move = resolve_obligation(system, evo, obligation, budget)
    here = evo.length
    witness = amalgamate_paths(system, evo.composed(obligation.stage, here), move, budget)
    new_steps = [arrow for arrow in witness.f_prime.arrows if arrow != system.identity(arrow.dom)]
    entry = {
        "obligation": {"stage": obligation.stage, "key": obligation.key, "label": obligation.label},
        "dequeue_index": dequeue_index,
        "steps": [here, here + len(new_steps)],
        "absorbed": not new_steps,
    }
    return evo.extended(new_steps, entry)


def build_generic(system, steps, budget, policy=Policy.FIFO) -> Evolution:
    """
    Bookkeeping construction: repeatedly take the next pending obligation (i, t),
    amalgamate t with the path from stage i to the current end and append the
    primed path. New stages contribute their own obligations.
    """
    schedule = Schedule(policy)
    evo = Evolution.start(system.origin())
    schedule.enqueue_stage(system, evo, 0, budget)
    while evo.length < steps and len(schedule):
        obligation = schedule.pop()
        before = evo.length
        evo = discharge(system, evo, obligation, budget, schedule.dequeued)
        for stage in range(before + 1, evo.length + 1):
            schedule.enqueue_stage(system, evo, stage, budget)
    if evo.length < steps:
        logger.info(f"Builder for {system.name} ran out of obligations at length {evo.length}")
    logger.info(f"Built {system.name} evolution of length {evo.length} with {schedule.dequeued} discharges")
    return evo


# ---------------------------------------------------------------------------
# Absorption audits
# ---------------------------------------------------------------------------


def absorb_into(system, evo: Evolution, arrow, start, first, last, budget) -> Optional[Tuple[int, Path]]:
    """First m in [first, last] with a path g from cod(arrow) such that arrow;g == u_start^m"""
    target = evo.composed(start, first).composite(system)
    for m in range(first, last + 1):
        if m > first:
            target = system.compose(target, evo.steps[m - 1])
        if arrow.dom != target.dom:
            return None
        factor = system.factor_through(arrow, target, max(m - start, 1), budget)
        if factor is not None:
            return m, factor
    return None


def _check_window(evo, upto_stage, horizon):
    if not 0 <= upto_stage < horizon <= evo.length:
        raise ConfigError(
            "Absorption audit needs upto_stage < horizon <= evolution length",
            upto_stage=upto_stage,
            horizon=horizon,
            length=evo.length,
        )


def _stationary(evo, start, horizon):
    return all(step.is_iso for step in evo.steps[start:horizon])


def _absorption_audit(system, evo, upto_stage, horizon, budget, outgoing):
    _check_window(evo, upto_stage, horizon)
    checked, truncated = 0, False
    try:
        for n in range(upto_stage + 1):
            paths, cut = outgoing(evo.stages[n])
            truncated = truncated or cut
            for path in paths:
                checked += 1
                arrow = path.composite(system)
                if absorb_into(system, evo, arrow, n, n, horizon, budget) is not None:
                    continue
                witness = {"stage": n, "path": encode_path(system, path)}
                if horizon == evo.length and _stationary(evo, n, horizon):
                    logger.info(f"Stage {n} of a stationary evolution cannot absorb {path.label()}")
                    return CheckResult(Verdict.FALSE, witness=witness, details={"checked": checked})
                return CheckResult(
                    Verdict.UNKNOWN,
                    witness=witness,
                    exhausted={"name": "horizon", "limit": horizon},
                    details={"checked": checked},
                )
    except BudgetExceeded as e:
        return CheckResult.unknown(e, checked=checked)
    details = {"checked": checked, "upto_stage": upto_stage, "horizon": horizon}
    if truncated:
        return CheckResult(Verdict.UNKNOWN, exhausted={"name": "transition_budget", "limit": budget}, details=details)
    return CheckResult(Verdict.TRUE, details=details)


def check_absorption(system, evo: Evolution, upto_stage, horizon, budget) -> CheckResult:
    """Every transition out of stages 0..upto_stage factors back into the evolution by `horizon`"""

    def outgoing(obj):
        moves = [move for move in path_moves(system, obj, budget) if move.length > 0]
        return moves, system.enumerate_transitions(obj, budget).truncated

    return _absorption_audit(system, evo, upto_stage, horizon, budget, outgoing)


def check_path_absorption(system, evo: Evolution, upto_stage, max_len, horizon, budget) -> CheckResult:
    """Same audit for outgoing paths with at most max_len nontrivial arrows"""

    def outgoing(obj):
        paths = [path for path in enumerate_paths(system, obj, max_len, budget) if path.length > 0]
        return paths, system.enumerate_transitions(obj, budget).truncated

    result = _absorption_audit(system, evo, upto_stage, horizon, budget, outgoing)
    result.details["max_len"] = max_len
    return result


# ---------------------------------------------------------------------------
# Back and forth
# ---------------------------------------------------------------------------


@dataclass
class ZigZag:
    """
    forward[i]: U_{u_index[i]} -> V_{v_index[i]}, backward[i]: V_{v_index[i]} -> U_{u_index[i+1]}.
    Every triangle is re-verified against the evolutions' own arrows.
    """

    forward: List[Path] = field(default_factory=list)
    backward: List[Path] = field(default_factory=list)
    u_index: List[int] = field(default_factory=list)
    v_index: List[int] = field(default_factory=list)

    @property
    def rounds(self):
        return len(self.forward) + len(self.backward) - 1

    def as_dict(self, system):
        return {
            "forward": [encode_path(system, p) for p in self.forward],
            "backward": [encode_path(system, p) for p in self.backward],
            "u_index": list(self.u_index),
            "v_index": list(self.v_index),
            "rounds": self.rounds,
        }


def _verify(system, first: Path, second: Path, expected: Path):
    left = system.compose(first.composite(system), second.composite(system))
    return system.arrows_equal(left, expected.composite(system), EqualityMode.STRICT)


def _zigzag(system, u: Evolution, v: Evolution, seed: Path, k0, l0, rounds, budget) -> ZigZag:
    zigzag = ZigZag([seed], [], [k0], [l0])
    for round_index in range(1, rounds + 1):
        if round_index % 2:
            # back: absorb the last forward path into u
            source, index, evo = zigzag.forward[-1], zigzag.u_index[-1], u
        else:
            source, index, evo = zigzag.backward[-1], zigzag.v_index[-1], v
        found = absorb_into(system, evo, source.composite(system), index, index + 1, evo.length, budget)
        if found is None:
            raise AbsorptionFailed(f"Round {round_index}: nothing absorbs {source.label()}", round_index)
        m, path = found
        if not _verify(system, source, path, evo.composed(index, m)):
            raise AbsorptionFailed(f"Round {round_index}: triangle failed re-verification", round_index)
        if round_index % 2:
            zigzag.backward.append(path)
            zigzag.u_index.append(m)
        else:
            zigzag.forward.append(path)
            zigzag.v_index.append(m)
        logger.debug(f"Zigzag round {round_index} closed at stage {m}")
    return zigzag


def back_and_forth(system, u: Evolution, v: Evolution, rounds, budget) -> ZigZag:
    """Alternately absorb the cross path into the other evolution, starting from the shared origin"""
    if u.stages[0] != v.stages[0]:
        raise ConfigError("Both evolutions must start at the same origin")
    return _zigzag(system, u, v, Path.identity(u.stages[0]), 0, 0, rounds, budget)


@dataclass
class Ladder:
    """rungs[n]: X_n -> U_{u_index[n]} commuting with both evolutions"""

    rungs: List[Path]
    u_index: List[int]

    def as_dict(self, system):
        return {"rungs": [encode_path(system, p) for p in self.rungs], "u_index": list(self.u_index)}


def cofinal_embed(system, x: Evolution, u: Evolution, rounds, budget) -> Ladder:
    """Map each stage of x into u: amalgamate the next x-step with the current rung, then absorb"""
    if x.stages[0] != u.stages[0]:
        raise ConfigError("Both evolutions must start at the same origin")
    if rounds > x.length:
        raise ConfigError("Not enough stages in x", rounds=rounds, length=x.length)
    ladder = Ladder([Path.identity(x.stages[0])], [0])
    for n in range(rounds):
        rung, k = ladder.rungs[-1], ladder.u_index[-1]
        step = x.composed(n, n + 1)
        witness = amalgamate_paths(system, step, rung, budget)
        found = absorb_into(system, u, witness.g_prime.composite(system), k, k, u.length, budget)
        if found is None:
            raise AbsorptionFailed(f"Round {n + 1}: u does not absorb {witness.g_prime.label()}", n + 1)
        m, absorbed = found
        next_rung = Path(witness.f_prime.start, witness.f_prime.arrows + absorbed.arrows).normalized(system)
        if not _verify(system, step, next_rung, Path(step.start, rung.arrows + u.composed(k, m).arrows)):
            raise AbsorptionFailed(f"Round {n + 1}: square failed re-verification", n + 1)
        ladder.rungs.append(next_rung)
        ladder.u_index.append(m)
    return ladder


def homogeneity_witness(system, u: Evolution, i: Path, j: Path, rounds, budget, i_stage=None, j_stage=None) -> ZigZag:
    """
    A zigzag of u against itself seeded at X = dom(i) = dom(j): the first
    forward path carries i onto j, and each later round extends the partial
    automorphism.
    """
    if i.start != j.start:
        raise ConfigError("Trajectories must start at the same object")
    a = i_stage if i_stage is not None else next((n for n, stage in enumerate(u.stages) if stage == i.end), None)
    b = j_stage if j_stage is not None else next((n for n, stage in enumerate(u.stages) if stage == j.end), None)
    if a is None or b is None or u.stages[a] != i.end or u.stages[b] != j.end:
        raise ConfigError("Trajectories must end at stages of the evolution")
    witness = amalgamate_paths(system, i, j, budget)
    found = absorb_into(system, u, witness.g_prime.composite(system), b, b, u.length, budget)
    if found is None:
        raise AbsorptionFailed("The seed amalgam is not absorbed", 0)
    l0, absorbed = found
    seed = Path(witness.f_prime.start, witness.f_prime.arrows + absorbed.arrows).normalized(system)
    if not _verify(system, i, seed, Path(j.start, j.arrows + u.composed(b, l0).arrows)):
        raise AbsorptionFailed("Seed triangle failed re-verification", 0)
    return _zigzag(system, u, u, seed, a, l0, rounds, budget)

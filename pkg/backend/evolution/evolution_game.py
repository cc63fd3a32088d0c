"""
The evolution game: Eve and Odd alternately extend an evolution, Eve first.
Strategies are pluggable; the verdict on a finished play is the absorption
audit of the resulting evolution.
"""
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from amalgamation import amalgamate_paths
from evolution_core import Arrow, CheckResult, Evolution
from evolution_errors import AmalgamationFailed, ConfigError, IllegalMove
from generic_builder import Policy, Schedule, check_absorption, resolve_obligation

logger = logging.getLogger(__name__)


class Player(Enum):
    EVE = "eve"
    ODD = "odd"

    @classmethod
    def for_round(cls, round_index):
        return cls.EVE if round_index % 2 == 0 else cls.ODD


@dataclass(frozen=True)
class GameState:
    history: Evolution
    to_move: Player
    round: int

    def __post_init__(self):
        if Player.for_round(self.round) is not self.to_move:
            raise IllegalMove(f"{self.to_move.value} cannot move in round {self.round}", player=self.to_move.value)

    @property
    def frontier(self):
        return self.history.current


class Strategy:
    """Returns a transition out of the frontier object"""

    name = "strategy"

    def next_move(self, state: GameState, system, budget) -> Arrow:
        raise NotImplementedError

    def describe(self) -> Dict[str, Any]:
        return {"strategy": self.name}


class IdentityStrategy(Strategy):
    name = "identity"

    def next_move(self, state, system, budget):
        return system.identity(state.frontier)


class RandomStrategy(Strategy):
    """Uniform choice among the enumerated transitions; seeded"""

    name = "random"

    def __init__(self, seed=0):
        self.seed = seed
        self.rng = random.Random(seed)

    def next_move(self, state, system, budget):
        return self.rng.choice(system.transitions(state.frontier, budget))

    def describe(self):
        return {"strategy": self.name, "seed": self.seed}


class TopStrategy(Strategy):
    """Adversarial for orders: always add a new maximum. Elsewhere the first nontrivial transition"""

    name = "top"

    def next_move(self, state, system, budget):
        options = [arrow for arrow in system.transitions(state.frontier, budget) if not arrow.is_iso]
        if not options:
            return system.identity(state.frontier)
        new_position = getattr(system, "new_position", None)
        if new_position is not None:
            for arrow in options:
                if new_position(arrow) == len(arrow.cod.payload) - 1:
                    return arrow
        return options[0]


class BookkeepingStrategy(Strategy):
    """
    Keeps a schedule of every transition out of every stage seen so far and
    answers by discharging the oldest one through amalgamation.
    """

    name = "bookkeeping"

    def __init__(self, policy=Policy.FIFO):
        self.schedule = Schedule(policy)
        self.registered = 0

    def _register(self, system, evo, budget):
        while self.registered <= evo.length:
            self.schedule.enqueue_stage(system, evo, self.registered, budget)
            self.registered += 1

    def next_move(self, state, system, budget):
        evo = state.history
        self._register(system, evo, budget)
        while len(self.schedule):
            obligation = self.schedule.pop()
            move = resolve_obligation(system, evo, obligation, budget)
            try:
                witness = amalgamate_paths(system, evo.composed(obligation.stage, evo.length), move, budget)
            except AmalgamationFailed as e:
                raise IllegalMove(
                    f"No answer to {obligation.label} from stage {obligation.stage}",
                    player=state.to_move.value,
                    cause=e,
                )
            steps = [arrow for arrow in witness.f_prime.arrows if arrow != system.identity(arrow.dom)]
            if not steps:
                continue
            if len(steps) > 1:
                self.schedule.push_front(obligation)
            return steps[0]
        return system.identity(state.frontier)

    def describe(self):
        return {"strategy": self.name, "policy": self.schedule.policy.value}


def odd_bookkeeping_strategy(system=None, budget=None, policy=Policy.FIFO) -> Strategy:
    return BookkeepingStrategy(policy)


def strategy_from_spec(spec: str) -> Strategy:
    """Parse CLI strategy names: identity, top, bookkeeping, random:SEED"""
    name, _, argument = spec.partition(":")
    if name == "identity":
        return IdentityStrategy()
    if name == "top":
        return TopStrategy()
    try:
        if name == "bookkeeping":
            return BookkeepingStrategy(Policy(argument) if argument else Policy.FIFO)
        if name == "random":
            return RandomStrategy(int(argument) if argument else 0)
    except ValueError:
        raise ConfigError(f"Bad argument for strategy {name}: {argument}", strategy=spec)
    raise ConfigError(f"Unknown strategy: {spec}", strategy=spec)


@dataclass
class GameResult:
    evolution: Evolution
    transcript: List[Dict[str, Any]] = field(default_factory=list)
    forfeit: Optional[Dict[str, Any]] = None


def play(system, eve: Strategy, odd: Strategy, rounds, budget) -> GameResult:
    """Alternate the two strategies for `rounds` moves; an illegal move ends the game"""
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    evo = Evolution.start(system.origin())
    transcript = []
    strategies = {Player.EVE: eve, Player.ODD: odd}
    for round_index in range(rounds):
        player = Player.for_round(round_index)
        state = GameState(evo, player, round_index)
        try:
            move = strategies[player].next_move(state, system, budget)
            if move.dom != state.frontier:
                raise IllegalMove("Move does not start at the frontier", player=player.value)
            if not system.is_transition(move):
                raise IllegalMove(f"{move.describe()} is not a transition", player=player.value)
        except IllegalMove as e:
            forfeit = {"round": round_index, "player": player.value, "message": e.message}
            if e.cause is not None:
                forfeit["cause"] = e.cause.to_dict()
            logger.info(f"{player.value} forfeits in round {round_index}: {e.message}")
            return GameResult(evo, transcript, forfeit)
        entry = {"round": round_index, "player": player.value, "move": move.describe(), "trivial": move.is_iso}
        transcript.append(entry)
        evo = evo.extended([move], entry)
    return GameResult(evo, transcript)


def genericity_verdict(system, evo: Evolution, k, N, budget) -> CheckResult:
    """The absorption audit read as evidence, not proof, that the play reached the generic object"""
    result = check_absorption(system, evo, k, N, budget)
    result.details["reading"] = "consistent with genericity up to the audited stage"
    return result

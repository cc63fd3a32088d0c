import pytest
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'backend', 'evolution'))

from evolution_core import Evolution, Verdict
from evolution_errors import ConfigError, IllegalMove
from evolution_game import (
    BookkeepingStrategy,
    GameState,
    IdentityStrategy,
    Player,
    RandomStrategy,
    Strategy,
    TopStrategy,
    genericity_verdict,
    play,
    strategy_from_spec,
)
from generic_builder import Policy
from system_instances import LinOrderSystem, PosetSystem


class WrongObjectStrategy(Strategy):
    name = "wrong-object"

    def next_move(self, state, system, budget):
        return system.identity(system.make((0, 1)))


class TestPlayers:
    def test_eve_moves_first(self):
        assert Player.for_round(0) is Player.EVE
        assert Player.for_round(1) is Player.ODD
        assert Player.for_round(6) is Player.EVE

    def test_state_rejects_out_of_turn_player(self):
        system = LinOrderSystem()
        with pytest.raises(IllegalMove):
            GameState(Evolution.start(system.origin()), Player.ODD, 0)


class TestStrategyFromSpec:
    @pytest.mark.parametrize("spec,cls", [
        ("identity", IdentityStrategy),
        ("top", TopStrategy),
        ("bookkeeping", BookkeepingStrategy),
        ("random:7", RandomStrategy),
    ])
    def test_known_names(self, spec, cls):
        assert isinstance(strategy_from_spec(spec), cls)

    def test_bookkeeping_policy(self):
        assert strategy_from_spec("bookkeeping:rr").describe() == {"strategy": "bookkeeping", "policy": "rr"}

    def test_random_seed(self):
        assert strategy_from_spec("random:7").describe() == {"strategy": "random", "seed": 7}
        assert strategy_from_spec("random").seed == 0

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            strategy_from_spec("greedy")

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            strategy_from_spec("bookkeeping:lifo")

    def test_bad_seed(self):
        with pytest.raises(ConfigError) as exc:
            strategy_from_spec("random:abc")
        assert exc.value.exit_code == 3
        assert exc.value.details["strategy"] == "random:abc"


class TestPlay:
    def setup_method(self):
        self.system = LinOrderSystem()

    def test_needs_a_round(self):
        with pytest.raises(ValueError):
            play(self.system, IdentityStrategy(), IdentityStrategy(), 0, 8)

    def test_players_alternate(self):
        result = play(self.system, TopStrategy(), BookkeepingStrategy(), 6, 32)
        assert [entry["player"] for entry in result.transcript] == ["eve", "odd"] * 3
        assert result.evolution.length == 6
        assert result.forfeit is None

    def test_top_strategy_appends_maxima(self):
        result = play(self.system, TopStrategy(), TopStrategy(), 4, 16)
        positions = [LinOrderSystem.new_position(step) for step in result.evolution.steps]
        assert positions == [0, 1, 2, 3]

    def test_bookkeeping_answers_the_adversary(self):
        result = play(self.system, TopStrategy(), BookkeepingStrategy(), 12, 32)
        verdict = genericity_verdict(self.system, result.evolution, 1, result.evolution.length, 32)
        assert verdict.verdict is Verdict.TRUE
        assert verdict.details["reading"].startswith("consistent with genericity")

    def test_passive_odd_leaves_gaps(self):
        result = play(self.system, TopStrategy(), IdentityStrategy(), 8, 32)
        verdict = genericity_verdict(self.system, result.evolution, 1, result.evolution.length, 32)
        assert verdict.verdict is Verdict.UNKNOWN
        assert verdict.exhausted["name"] == "horizon"

    def test_stationary_play_is_not_generic(self):
        result = play(self.system, IdentityStrategy(), IdentityStrategy(), 4, 8)
        assert all(entry["trivial"] for entry in result.transcript)
        assert genericity_verdict(self.system, result.evolution, 0, 4, 8).verdict is Verdict.FALSE

    def test_move_off_the_frontier_forfeits(self):
        result = play(self.system, TopStrategy(), WrongObjectStrategy(), 4, 8)
        assert result.forfeit["round"] == 1
        assert result.forfeit["player"] == "odd"
        assert result.evolution.length == 1
        assert len(result.transcript) == 1

    def test_random_play_is_reproducible(self):
        first = play(self.system, RandomStrategy(3), RandomStrategy(4), 8, 16)
        second = play(self.system, RandomStrategy(3), RandomStrategy(4), 8, 16)
        assert first.transcript == second.transcript

    def test_bookkeeping_on_a_finite_poset(self):
        system = PosetSystem()
        result = play(system, IdentityStrategy(), BookkeepingStrategy(Policy.ROUND_ROBIN), 6, 8)
        assert result.evolution.current.payload == 3

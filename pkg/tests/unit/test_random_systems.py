import pytest
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'backend', 'evolution'))

from evolution_errors import ConfigError
from random_systems import FiniteCategorySystem, Generator, generate_system, generate_systems


def _two_point_system(regular):
    # object 0 has two points and the swap; object 1 is a single point
    return FiniteCategorySystem(
        sizes=[2, 2],
        groups=["full", "trivial"],
        generators=[Generator(0, 1, (0, 0)), Generator(0, 1, (0, 1))],
        regular=regular,
    )


class TestFiniteCategorySystem:
    def test_generator_labels(self):
        system = _two_point_system(regular=True)
        labels = [a.label for a in system.transitions(system.origin(), 8)]
        assert labels[0] == "id"
        assert set(labels[1:]) <= {"g0", "g1"}

    def test_regular_variants_close_under_pre_isos(self):
        system = _two_point_system(regular=True)
        origin = system.origin()
        swap = system.automorphisms(origin)[1]
        for arrow in system.transitions(origin, 8)[1:]:
            assert system.is_transition(system.compose(swap, arrow))

    def test_irregular_system_offers_variants(self):
        system = _two_point_system(regular=False)
        assert len(system.iso_variants(system.origin())) == 2
        swap = system.iso_variants(system.origin())[1]
        inject = FiniteCategorySystem(
            sizes=[2, 2], groups=["full", "trivial"], generators=[Generator(0, 1, (0, 1))], regular=False
        )
        arrow = inject.transitions(inject.origin(), 8)[1]
        assert not inject.is_transition(inject.compose(inject.iso_variants(inject.origin())[1], arrow))
        assert swap.is_iso

    def test_validation(self):
        with pytest.raises(ConfigError):
            FiniteCategorySystem([2, 1], ["trivial", "trivial"], [Generator(1, 0, (0,))])
        with pytest.raises(ConfigError):
            FiniteCategorySystem([3], ["full"], [])
        with pytest.raises(ConfigError):
            FiniteCategorySystem([1, 1], ["trivial", "trivial"], [Generator(0, 1, (4,))])
        with pytest.raises(ConfigError):
            FiniteCategorySystem([1], ["trivial", "trivial"], [])

    def test_json_round_trip(self):
        system = _two_point_system(regular=False)
        again = FiniteCategorySystem.from_json(system.to_json())
        assert again.to_json() == system.to_json()
        assert again.regular is False

    def test_malformed_json(self):
        with pytest.raises(ConfigError):
            FiniteCategorySystem.from_json({"objects": [{"size": 1}]})

    def test_maps_encode_as_image_lists(self):
        system = _two_point_system(regular=True)
        arrow = system.transitions(system.origin(), 8)[1]
        encoded = system.encode_map(arrow.map_data)
        assert system.decode_map(encoded) == arrow.map_data


class TestGenerateSystem:
    def test_same_seed_same_system(self):
        assert generate_system(42).to_json() == generate_system(42).to_json()

    def test_generators_point_upwards(self):
        for _, system in generate_systems(0, 50):
            assert all(g.source < g.target for g in system.generators)
            assert len(system.sizes) <= 8

    def test_seeds_are_consecutive(self):
        assert [seed for seed, _ in generate_systems(7, 3)] == [7, 8, 9]

    def test_irregular_flag(self):
        assert generate_system(3, regular=False).regular is False

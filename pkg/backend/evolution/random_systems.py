"""
Seeded random finite categories wrapped as evolution systems.

Each object is a finite carrier {0..size-1} with either the trivial or the full
symmetric automorphism group. Generating transitions are functions between
carriers along edges i -> j with i < j, so every system terminates. Arrows are
functions and composition is function composition. JSON layout is described in
docs/RANDOM_SYSTEMS.md.
"""
import itertools
import logging
import random
from dataclasses import dataclass
from typing import Dict, List, Tuple

from evolution_core import ArrowKind, CarrierMapsMixin, EvolutionSystem
from evolution_errors import ConfigError

logger = logging.getLogger(__name__)

AUTOMORPHISM_GROUPS = ("trivial", "full")


@dataclass(frozen=True)
class Generator:
    source: int
    target: int
    image: Tuple[int, ...]


class FiniteCategorySystem(CarrierMapsMixin, EvolutionSystem):
    """An explicit finite category; objects are indices into `sizes`"""

    name = "random"

    def __init__(self, sizes, groups, generators, regular=True, origin_index=0, node_cap=200000):
        super().__init__(node_cap)
        self.sizes = tuple(int(s) for s in sizes)
        self.groups = tuple(groups)
        self.generators = tuple(sorted(generators, key=lambda g: (g.source, g.target, g.image)))
        self.regular = bool(regular)
        self.origin_index = int(origin_index)
        self._validate()
        self._autos: Dict[int, List[Tuple[int, ...]]] = {i: self._group_images(i) for i in range(len(self.sizes))}

    def _validate(self):
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ConfigError("Every object needs a non-empty carrier")
        if len(self.groups) != len(self.sizes):
            raise ConfigError("One automorphism group per object is required")
        for index, group in enumerate(self.groups):
            if group not in AUTOMORPHISM_GROUPS:
                raise ConfigError(f"Unknown automorphism group: {group}", object=index)
            if group == "full" and self.sizes[index] > 2:
                raise ConfigError("Full automorphism groups are limited to carriers of size 2", object=index)
        for gen in self.generators:
            if not 0 <= gen.source < gen.target < len(self.sizes):
                raise ConfigError("Generators must run from a lower to a higher object index", source=gen.source)
            if len(gen.image) != self.sizes[gen.source] or any(
                not 0 <= y < self.sizes[gen.target] for y in gen.image
            ):
                raise ConfigError("Generator image does not fit the carriers", source=gen.source, target=gen.target)
        if not 0 <= self.origin_index < len(self.sizes):
            raise ConfigError("Origin index out of range")

    def _group_images(self, index):
        carrier = range(self.sizes[index])
        if self.groups[index] == "trivial":
            return [tuple(carrier)]
        return [tuple(p) for p in itertools.permutations(carrier)]

    # -- objects --------------------------------------------------------------

    def origin(self):
        return self.make(self.origin_index)

    def canonical_key(self, payload):
        # no isomorphisms between distinct objects
        return b"R" + int(payload).to_bytes(2, "big")

    def carrier(self, obj):
        return tuple(range(self.sizes[obj.payload]))

    def is_iso_map(self, source, target, mapping):
        if source != target:
            return False
        return tuple(mapping[x] for x in self.carrier(source)) in self._autos[source.payload]

    def iter_iso_maps(self, source, target, pinned=None):
        if source != target:
            return
        for image in self._autos[source.payload]:
            mapping = dict(enumerate(image))
            if all(mapping.get(x) == y for x, y in (pinned or {}).items()):
                yield mapping

    # -- transitions ----------------------------------------------------------

    def _image_arrow(self, dom, cod, image, kind, label):
        return self.arrow_from_map(dom, cod, dict(enumerate(image)), kind, label)

    def _generator_variants(self, gen):
        """The images a;g;b for automorphisms a (when regular) and b"""
        befores = self._autos[gen.source] if self.regular else [tuple(range(self.sizes[gen.source]))]
        for before in befores:
            for after in self._autos[gen.target]:
                yield tuple(after[gen.image[before[x]]] for x in range(self.sizes[gen.source]))

    def _candidate_transitions(self, obj):
        for number, gen in enumerate(self.generators):
            if gen.source != obj.payload:
                continue
            cod = self.make(gen.target)
            for image in sorted(set(self._generator_variants(gen))):
                yield self._image_arrow(obj, cod, image, ArrowKind.TRANSITION, f"g{number}")

    def iso_variants(self, obj):
        if self.regular:
            return [self.identity(obj)]
        return [self._image_arrow(obj, obj, image, ArrowKind.ISO, "a") for image in self._autos[obj.payload]]

    def is_transition(self, f):
        image = tuple(dict(f.map_data).get(x) for x in self.carrier(f.dom))
        if f.dom == f.cod and image in self._autos[f.dom.payload]:
            return True
        return any(
            gen.source == f.dom.payload and gen.target == f.cod.payload and image in set(self._generator_variants(gen))
            for gen in self.generators
        )

    # -- serialization --------------------------------------------------------

    def to_json(self):
        return {
            "objects": [{"size": s, "automorphisms": g} for s, g in zip(self.sizes, self.groups)],
            "generators": [{"source": g.source, "target": g.target, "image": list(g.image)} for g in self.generators],
            "regular": self.regular,
            "origin": self.origin_index,
        }

    @classmethod
    def from_json(cls, data, node_cap=200000):
        try:
            objects = data["objects"]
            generators = [Generator(int(g["source"]), int(g["target"]), tuple(int(y) for y in g["image"])) for g in data["generators"]]
            return cls(
                [o["size"] for o in objects],
                [o.get("automorphisms", "trivial") for o in objects],
                generators,
                data.get("regular", True),
                data.get("origin", 0),
                node_cap,
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Malformed random system JSON: {e}")

    def encode_payload(self, payload):
        return payload

    def decode_payload(self, data):
        return int(data)

    def encode_map(self, map_data):
        return [y for _, y in map_data]

    def decode_map(self, data):
        return tuple(enumerate(int(y) for y in data))

    def describe(self):
        return {"system": self.name, "category": self.to_json()}


def generate_system(seed, regular=True, max_objects=8, max_out=3, node_cap=200000) -> FiniteCategorySystem:
    """Draw one finite category; the same seed always gives the same system"""
    rng = random.Random(seed)
    with_sink = rng.random() < 0.5
    count = rng.randint(2, max_objects - 1 if with_sink else max_objects)
    sizes = [rng.randint(1, 3) for _ in range(count)]
    groups = ["full" if s == 2 and rng.random() < 0.5 else "trivial" for s in sizes]
    generators = []
    out_limit = max_out - 1 if with_sink else max_out
    for source in range(count - 1):
        targets = list(range(source + 1, count))
        for target in rng.sample(targets, min(len(targets), rng.randint(0, out_limit))):
            image = tuple(rng.randrange(sizes[target]) for _ in range(sizes[source]))
            generators.append(Generator(source, target, image))
    if with_sink:
        sink = count
        sizes.append(1)
        groups.append("trivial")
        generators.extend(Generator(source, sink, (0,) * sizes[source]) for source in range(count))
    logger.debug(f"Random system seed={seed}: {len(sizes)} objects, {len(generators)} generators, sink={with_sink}")
    return FiniteCategorySystem(sizes, groups, generators, regular, 0, node_cap)


def generate_systems(seed, count, regular=True, **kwargs):
    """Systems for seeds seed, seed+1, ..., seed+count-1"""
    for offset in range(count):
        yield seed + offset, generate_system(seed + offset, regular, **kwargs)

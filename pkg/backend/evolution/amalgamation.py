"""
Amalgamation: the transition amalgamation property (TAP) checker, the tiling
that turns TAP squares into path amalgams, and a breadth-first fallback that
closes a pair of arrows with paths.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Union

from evolution_core import (
    Arrow,
    CheckResult,
    EqualityMode,
    Obj,
    Path,
    Verdict,
    close_paths,
    close_square,
)
from evolution_errors import AmalgamationFailed, BudgetExceeded, NonComposable
from serialization import encode_arrow, encode_obj, encode_path

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AmalgamWitness:
    """f followed by f_prime equals g followed by g_prime; both end at apex"""

    f_prime: Path
    g_prime: Path
    apex: Obj
    # False when length(g') > length(f) or length(f') > length(g)
    bounded: bool = True

    def verify(self, system, f: Path, g: Path, mode=EqualityMode.STRICT):
        if f.end != self.f_prime.start or g.end != self.g_prime.start:
            return False
        if self.f_prime.end != self.apex or self.g_prime.end != self.apex:
            return False
        left = system.compose(f.composite(system), self.f_prime.composite(system))
        right = system.compose(g.composite(system), self.g_prime.composite(system))
        return system.arrows_equal(left, right, mode)

    def within_bounds(self, f: Path, g: Path):
        """length(f) >= length(g') and length(g) >= length(f')"""
        return f.length >= self.g_prime.length and g.length >= self.f_prime.length

    def as_dict(self, system):
        return {
            "f_prime": encode_path(system, self.f_prime),
            "g_prime": encode_path(system, self.g_prime),
            "apex": encode_obj(system, self.apex),
            "bounded": self.bounded,
        }


def _as_path(arrow_or_path: Union[Arrow, Path]) -> Path:
    if isinstance(arrow_or_path, Path):
        return arrow_or_path
    return Path.of([arrow_or_path])


def square_arrows(system, obj, budget):
    """Transitions from obj plus the non-identity iso variants, in enumeration order"""
    batch = system.enumerate_transitions(obj, budget)
    variants = [v for v in system.iso_variants(obj) if v != system.identity(obj)]
    return list(batch.arrows) + variants, batch.truncated


def check_tap(system, frontier, budget, mode=EqualityMode.STRICT) -> CheckResult:
    """
    For each frontier object and each pair of enumerated transitions out of it,
    look for single transitions closing the square. The first pair that
    provably cannot be closed is the counterexample.
    """
    pairs_checked = 0
    incomplete = []
    try:
        for obj in frontier:
            arrows, truncated = square_arrows(system, obj, budget)
            if truncated:
                incomplete.append({"object": encode_obj(system, obj), "reason": "transition budget"})
            for i, f in enumerate(arrows):
                for g in arrows[i:]:
                    pairs_checked += 1
                    if f == g:
                        continue
                    witness, exhaustive = close_square(system, f, g, budget, mode)
                    if witness is not None:
                        continue
                    if exhaustive:
                        logger.info(f"TAP fails for {system.name} at {obj.payload!r}: ({f.describe()}, {g.describe()})")
                        return CheckResult(
                            Verdict.FALSE,
                            witness={
                                "object": encode_obj(system, obj),
                                "f": encode_arrow(system, f),
                                "g": encode_arrow(system, g),
                            },
                            details={"pairs_checked": pairs_checked, "mode": mode.value},
                        )
                    incomplete.append({"f": f.describe(), "g": g.describe(), "reason": "square search budget"})
    except BudgetExceeded as e:
        logger.info(f"TAP check for {system.name} stopped: {e.message}")
        return CheckResult.unknown(e, pairs_checked=pairs_checked)

    details = {"pairs_checked": pairs_checked, "frontier": len(frontier), "mode": mode.value}
    if incomplete:
        details["incomplete"] = incomplete
        return CheckResult(Verdict.UNKNOWN, exhausted={"name": "transition_budget", "limit": budget}, details=details)
    return CheckResult(Verdict.TRUE, details=details)


def _cell(system, down: Arrow, right: Arrow, budget, mode):
    """
    Fill one square of the tiling. Returns (bottom, side): arrows or None for
    identities, with down;bottom == right;side.
    """
    if down == right:
        return None, None
    if down.is_iso:
        return system.compose(system.invert(down), right), None
    if right.is_iso:
        return None, system.compose(system.invert(right), down)
    witness, exhaustive = close_square(system, down, right, budget, mode)
    if witness is None:
        raise AmalgamationFailed(
            "No transitions close the square",
            square={"f": down.describe(), "g": right.describe()},
            exhaustive=exhaustive,
        )
    bottom, side = witness
    return (None if bottom == system.identity(bottom.dom) else bottom), (
        None if side == system.identity(side.dom) else side
    )


def _tile(system, f: Path, g: Path, budget, mode):
    """Returns (f', g') with f;f' == g;g' by peeling the first arrow of each path"""
    if not f.arrows:
        return g, Path.identity(g.end)
    if not g.arrows:
        return Path.identity(f.end), f
    head_f, head_g = f.arrows[0], g.arrows[0]
    rest_f, rest_g = Path(head_f.cod, f.arrows[1:]), Path(head_g.cod, g.arrows[1:])
    bottom, side = _cell(system, head_f, head_g, budget, mode)
    bottom_path = Path(head_f.cod, (bottom,) if bottom is not None else ())
    side_path = Path(head_g.cod, (side,) if side is not None else ())
    side_prime, rest_g_prime = _tile(system, side_path, rest_g, budget, mode)
    rest_f_prime, tail = _tile(system, rest_f, Path(head_f.cod, bottom_path.arrows + side_prime.arrows), budget, mode)
    return rest_f_prime, Path(rest_g_prime.start, rest_g_prime.arrows + tail.arrows)


def amalgamate_paths(system, f, g, budget, mode=EqualityMode.STRICT) -> AmalgamWitness:
    """Close two paths from a common object by tiling TAP squares"""
    f, g = _as_path(f), _as_path(g)
    if f.start != g.start:
        raise NonComposable("Paths to amalgamate must share a start")
    try:
        f_prime, g_prime = _tile(system, f, g, budget, mode)
    except AmalgamationFailed as e:
        e.square = e.details["square"] = {"f": f.label(), "g": g.label(), "cell": e.square}
        raise
    witness = AmalgamWitness(f_prime.normalized(system), g_prime.normalized(system), f_prime.end)
    if not witness.verify(system, f, g, mode):
        raise AmalgamationFailed(
            "Tiled amalgam failed re-verification", square={"f": f.label(), "g": g.label()}
        )
    if not witness.within_bounds(f, g):
        logger.warning(f"Amalgam of {f.label()} and {g.label()} exceeds the length bounds")
        witness = replace(witness, bounded=False)
    logger.debug(f"Amalgamated {f.label()} and {g.label()} at apex {witness.apex.key_hex[:16]}")
    return witness


def generic_amalgamate(system, f, g, depth, budget=16, mode=EqualityMode.STRICT) -> Optional[AmalgamWitness]:
    """Breadth-first search over pairs of paths up to `depth`; shortest total length first"""
    f, g = _as_path(f), _as_path(g)
    if f.start != g.start:
        raise NonComposable("Arrows to amalgamate must share a domain")
    if f == g:
        return AmalgamWitness(Path.identity(f.end), Path.identity(g.end), f.end)
    closed = close_paths(system, f, g, depth, budget, mode)
    if closed is None:
        return None
    f_prime, g_prime = closed
    witness = AmalgamWitness(f_prime, g_prime, f_prime.end)
    return witness if witness.within_bounds(f, g) else replace(witness, bounded=False)

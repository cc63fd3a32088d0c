"""
Command-line front end: `evolve build | audit | play | check | newman | mincost | dpo`.

Every command prints one report. Exit codes: 0 true or success, 1 false,
2 unknown, 3 usage or input error.
"""
import argparse
import logging
import sys
import time
from typing import Any, Dict, List, Optional

from amalgamation import check_tap
from dpo_engine import (
    apply_rule,
    as_evolution_system,
    check_rule_amalgamation,
    find_matches,
    load_rule,
    load_rules,
    rewrite_to_dot,
    run_rules,
)
from evolution_core import CheckResult, EqualityMode, Verdict
from evolution_errors import EXIT_TRUE, EXIT_USAGE, AbsorptionFailed, ConfigError, EvolutionError
from evolution_game import genericity_verdict, play, strategy_from_spec
from generic_builder import (
    Policy,
    back_and_forth,
    build_generic,
    check_absorption,
    check_path_absorption,
    cofinal_embed,
)
from graph_structures import Graph
from rewrite_checks import (
    eventually_determined,
    explore,
    find_normalized,
    is_confluent,
    is_determined,
    is_directed,
    is_locally_confluent,
    is_locally_directed,
    is_regular,
    is_terminating,
    min_cost_normalization,
    order_witness,
    verify_directed_newman,
    verify_newman,
    verify_newman_random,
    verify_normalized_theorem,
)
from run_config import REPORT_FORMATS, SYSTEM_NAMES, RunConfig, log_level, sanitize_log_input
from serialization import (
    decode_evolution,
    dumps,
    encode_evolution,
    encode_obj,
    error_response,
    evolution_to_dot,
    load_json,
    render_text,
    success_response,
    write_text,
)
from system_instances import MatrixChainSystem, build_system, matrix_chain_order

logger = logging.getLogger(__name__)

CHECK_PROPERTIES = (
    "tap",
    "local-confluence",
    "confluence",
    "regular",
    "determined",
    "eventually-determined",
    "terminating",
    "locally-directed",
    "directed",
    "normalized",
    "normalized-theorem",
    "newman",
    "directed-newman",
    "order",
)


class Outcome:
    """What a handler hands back: a CheckResult or plain details, plus an optional DOT artifact"""

    def __init__(self, result, dot: Optional[str] = None):
        self.result = result
        self.dot = dot


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="RunConfig YAML file; flags override it")
    common.add_argument("--budget", type=int, help="Transition enumeration budget")
    common.add_argument("--node-cap", type=int, dest="node_cap", help="Iso and labeling search cap")
    common.add_argument("--seed", type=int, help="Seed for every random choice")
    common.add_argument("--format", choices=REPORT_FORMATS, dest="report_format", help="Report format")
    common.add_argument("--out", help="Write the produced evolution here")
    common.add_argument("--dot", help="Write a DOT rendering here")
    common.add_argument("--relaxed", action="store_true", help="Compare arrows up to relabelling both ends")
    common.add_argument("--verbose", "-v", action="store_true", help="Log at INFO")
    return common


def _system_options() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument("--system", choices=SYSTEM_NAMES, help="Evolution system")
    options.add_argument("--mode", choices=("directed", "undirected"), help="Graph mode")
    options.add_argument("--origin", help="Origin graph JSON file (graph and dpo systems)")
    options.add_argument("--ambient", help="Ambient graph JSON file (substructures)")
    options.add_argument("--dims", help="Comma-separated matrix dimensions (chain)")
    options.add_argument("--non-adjacent", action="store_true", dest="non_adjacent", help="Allow non-adjacent merges")
    options.add_argument("--primes", help="Comma-separated primes (monoid)")
    options.add_argument("--category", help="Finite category JSON file (random)")
    options.add_argument("--irregular", action="store_true", help="Generate a non-regular random system")
    options.add_argument("--rules", help="Rule JSON file or directory (dpo)")
    return options


def build_parser() -> argparse.ArgumentParser:
    common, systems = _common_options(), _system_options()
    parser = argparse.ArgumentParser(prog="evolve", description="Evolution systems: build, audit, play and check")
    sub = parser.add_subparsers(dest="command")
    sub.required = True

    build = sub.add_parser("build", parents=[common, systems], help="Run the bookkeeping construction")
    build.add_argument("--steps", type=int, default=20)
    build.add_argument("--policy", choices=[p.value for p in Policy], default=Policy.FIFO.value)

    audit = sub.add_parser("audit", parents=[common], help="Audit a stored evolution")
    audit.add_argument("kind", choices=("absorption", "path-absorption", "zigzag", "cofinal"))
    audit.add_argument("--evo", required=True, help="Evolution JSON")
    audit.add_argument("--other", help="Second evolution JSON (zigzag, cofinal)")
    audit.add_argument("--upto", type=int, default=3, help="Last stage whose transitions are audited")
    audit.add_argument("--horizon", type=int, help="Last stage allowed to absorb (default: the end)")
    audit.add_argument("--max-len", type=int, default=2, dest="max_len")
    audit.add_argument("--rounds", type=int, default=4)

    game = sub.add_parser("play", parents=[common, systems], help="Play the evolution game")
    game.add_argument("--eve", default="random")
    game.add_argument("--odd", default="bookkeeping")
    game.add_argument("--rounds", type=int, default=30)
    game.add_argument("--k", type=int, default=2, help="Audit transitions out of stages up to k")

    check = sub.add_parser("check", parents=[common, systems], help="Check a property on an explored fragment")
    check.add_argument("property", choices=CHECK_PROPERTIES)
    check.add_argument("--max-size", type=int, dest="max_size", help="Fragment depth in nontrivial moves")
    check.add_argument("--depth", type=int, help="Closing search depth")
    check.add_argument("--max-path-len", type=int, dest="max_path_len", help="Path length for confluence")
    check.add_argument("--horizon", type=int, default=0, help="Size from which determination is required")

    newman = sub.add_parser("newman", parents=[common], help="Newman sweep over random finite systems")
    newman.add_argument("--count", type=int, default=100)
    newman.add_argument("--max-objects", type=int, default=8, dest="max_objects")

    mincost = sub.add_parser("mincost", parents=[common], help="Least-cost normalization of a matrix chain")
    mincost.add_argument("--dims", required=True)

    dpo = sub.add_parser("dpo", parents=[common], help="Double-pushout rewriting")
    dpo.add_argument("action", choices=("match", "apply", "run", "check"))
    dpo.add_argument("--rule", help="Rule JSON file")
    dpo.add_argument("--rules", help="Rule JSON file or directory")
    dpo.add_argument("--graph", help="Host graph JSON file")
    dpo.add_argument("--origin", help="Origin graph JSON file")
    dpo.add_argument("--match", type=int, default=0, help="Index into the match list")
    dpo.add_argument("--steps", type=int, default=5)
    dpo.add_argument("--max-size", type=int, default=1, dest="max_size")
    return parser


def _int_list(text, name) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--{name} must be comma-separated integers", flag=name)


def _system_params(args) -> Dict[str, Any]:
    params: Dict[str, Any] = {}
    if getattr(args, "mode", None):
        params["mode"] = args.mode
    if getattr(args, "origin", None):
        params["origin"] = load_json(args.origin)
    if getattr(args, "ambient", None):
        params["ambient"] = load_json(args.ambient)
    if getattr(args, "dims", None) and args.command != "mincost":
        params["dims"] = _int_list(args.dims, "dims")
    if getattr(args, "non_adjacent", False):
        params["non_adjacent"] = True
    if getattr(args, "primes", None):
        params["primes"] = _int_list(args.primes, "primes")
    if getattr(args, "category", None):
        params["category"] = load_json(args.category)
    if getattr(args, "irregular", False):
        params["regular"] = False
    if getattr(args, "rules", None) and args.command != "dpo":
        params["rules"] = args.rules
    return params


def resolve_config(args) -> RunConfig:
    """YAML file first, then flags, then validation"""
    config = RunConfig.from_yaml(args.config) if args.config else RunConfig()
    params = dict(config.system_params)
    params.update(_system_params(args))
    config = config.merged(
        system=getattr(args, "system", None),
        system_params=params,
        budget=args.budget,
        depth=getattr(args, "depth", None),
        max_size=getattr(args, "max_size", None),
        node_cap=args.node_cap,
        seed=args.seed,
        out=args.out,
        report_format=args.report_format,
        strict_equality=False if args.relaxed else None,
    )
    if config.system == "random":
        config.system_params.setdefault("seed", config.seed)
    return config.validate()


def _system(config: RunConfig):
    return build_system(config.system, config.system_params, config.node_cap)


def _mode(config: RunConfig):
    return EqualityMode.STRICT if config.strict_equality else EqualityMode.RELAXED


def _save_evolution(system, evo, config: RunConfig):
    if config.out:
        write_text(config.out, dumps(encode_evolution(system, evo)) + "\n")


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


def handle_build(args, config: RunConfig) -> Outcome:
    system = _system(config)
    evo = build_generic(system, args.steps, config.budget, Policy(args.policy))
    _save_evolution(system, evo, config)
    details = {
        "length": evo.length,
        "nontrivial_steps": sum(1 for step in evo.steps if not step.is_iso),
        "discharges": len(evo.audit),
        "final": encode_obj(system, evo.current),
        "out": config.out,
    }
    return Outcome(details, evolution_to_dot(system, evo))


def handle_audit(args, config: RunConfig) -> Outcome:
    system, evo = decode_evolution(load_json(args.evo))
    horizon = args.horizon if args.horizon is not None else evo.length
    if args.kind == "absorption":
        return Outcome(check_absorption(system, evo, args.upto, horizon, config.budget))
    if args.kind == "path-absorption":
        return Outcome(check_path_absorption(system, evo, args.upto, args.max_len, horizon, config.budget))
    if not args.other:
        raise ConfigError(f"audit {args.kind} needs --other")
    _, other = decode_evolution(load_json(args.other), system)
    try:
        if args.kind == "zigzag":
            zigzag = back_and_forth(system, evo, other, args.rounds, config.budget)
            return Outcome(CheckResult(Verdict.TRUE, witness=zigzag.as_dict(system), details={"rounds": zigzag.rounds}))
        ladder = cofinal_embed(system, other, evo, args.rounds, config.budget)
        return Outcome(CheckResult(Verdict.TRUE, witness=ladder.as_dict(system), details={"rounds": args.rounds}))
    except AbsorptionFailed as e:
        return Outcome(CheckResult(Verdict.FALSE, witness=e.to_dict(), details={"round": e.round_index}))


def handle_play(args, config: RunConfig) -> Outcome:
    system = _system(config)
    eve_spec = f"random:{config.seed}" if args.eve == "random" else args.eve
    eve, odd = strategy_from_spec(eve_spec), strategy_from_spec(args.odd)
    result = play(system, eve, odd, args.rounds, config.budget)
    _save_evolution(system, result.evolution, config)
    dot = evolution_to_dot(system, result.evolution, "game")
    players = {"eve": eve.describe(), "odd": odd.describe()}
    if result.forfeit is not None:
        details = {"players": players, "rounds_played": len(result.transcript)}
        return Outcome(CheckResult(Verdict.FALSE, witness=result.forfeit, details=details), dot)
    verdict = genericity_verdict(system, result.evolution, args.k, result.evolution.length, config.budget)
    verdict.details.update({"players": players, "rounds_played": len(result.transcript)})
    return Outcome(verdict, dot)


def _check_property(name, system, frag, config: RunConfig, args) -> CheckResult:
    depth, budget = config.depth, config.budget
    if name == "tap":
        if system.name == "dpo":
            return check_rule_amalgamation(system, frag, budget=budget)
        return check_tap(system, frag.objects, budget, _mode(config))
    if name == "local-confluence":
        return is_locally_confluent(system, frag, depth, budget, _mode(config))
    if name == "confluence":
        max_path_len = args.max_path_len or depth
        return is_confluent(system, frag, max_path_len, depth, budget, _mode(config))
    if name == "regular":
        return is_regular(system, frag, budget)
    if name == "determined":
        return is_determined(system, frag, budget)
    if name == "eventually-determined":
        return eventually_determined(system, frag, args.horizon, budget)
    if name == "terminating":
        return is_terminating(system, frag, depth)
    if name == "locally-directed":
        return is_locally_directed(system, frag, depth, budget)
    if name == "directed":
        return is_directed(system, frag, depth, budget)
    if name == "normalized":
        found = find_normalized(system, frag, budget)
        return CheckResult(
            Verdict.of(bool(found)),
            witness={"normalized": [encode_obj(system, obj) for obj in found]},
            details={"classes": len(found), "closed": frag.closed},
        )
    if name == "normalized-theorem":
        return verify_normalized_theorem(system, frag, depth, budget)
    if name == "newman":
        return verify_newman(system, frag, depth, budget, args.horizon)
    if name == "directed-newman":
        return verify_directed_newman(system, frag, depth, budget)
    witness = order_witness(system, frag, budget)
    return CheckResult(
        Verdict.of(witness.well_founded),
        witness={"relation": [list(pair) for pair in witness.relation], "layers": witness.layers},
    )


def handle_check(args, config: RunConfig) -> Outcome:
    system = _system(config)
    frag = explore(system, config.max_size, config.budget)
    result = _check_property(args.property, system, frag, config, args)
    result.details.setdefault("fragment", frag.summary())
    return Outcome(result)


def handle_newman(args, config: RunConfig) -> Outcome:
    tally = verify_newman_random(config.seed, args.count, args.max_objects, budget=config.budget)
    verdict = Verdict.FALSE if tally["violations"] else Verdict.TRUE
    witness = tally["violations"][0] if tally["violations"] else None
    return Outcome(CheckResult(verdict, witness=witness, details=tally))


def handle_mincost(args, config: RunConfig) -> Outcome:
    dims = _int_list(args.dims, "dims")
    system = MatrixChainSystem(dims, node_cap=config.node_cap)
    frag = explore(system, len(dims), config.budget)
    cost, path = min_cost_normalization(system, frag, config.budget)
    oracle_cost, parenthesization = matrix_chain_order(dims)
    details = {
        "cost": cost,
        "oracle_cost": oracle_cost,
        "parenthesization": parenthesization,
        "merges": [arrow.label for arrow in path.arrows],
    }
    return Outcome(CheckResult(Verdict.of(cost == oracle_cost), details=details))


def _graph_arg(path, flag) -> Graph:
    if not path:
        raise ConfigError(f"dpo needs --{flag}", flag=flag)
    return Graph.from_json(load_json(path))


def handle_dpo(args, config: RunConfig) -> Outcome:
    if args.action in ("match", "apply"):
        if not args.rule:
            raise ConfigError("dpo needs --rule", flag="rule")
        rule = load_rule(args.rule)
        graph = _graph_arg(args.graph, "graph")
        matches = find_matches(rule, graph)
        if args.action == "match":
            listed = [
                {"index": i, "match": [list(p) for p in m.mapping], "label": m.describe()}
                for i, m in enumerate(matches)
            ]
            return Outcome({"rule": rule.name, "matches": listed, "count": len(matches)})
        if not 0 <= args.match < len(matches):
            raise ConfigError(f"Match index {args.match} out of range", matches=len(matches))
        match = matches[args.match]
        result, arrow = apply_rule(rule, graph, match)
        details = {
            "rule": rule.name,
            "match": match.describe(),
            "graph": result.to_json(),
            "trace": [list(p) for p in arrow.map_data],
        }
        return Outcome(details, rewrite_to_dot(rule, graph, match, result))

    rules = load_rules(args.rules or args.rule or "")
    system = as_evolution_system(rules, _graph_arg(args.origin, "origin"), config.node_cap)
    if args.action == "check":
        return Outcome(check_rule_amalgamation(system, None, args.max_size, config.budget))
    evo = run_rules(system, args.steps)
    _save_evolution(system, evo, config)
    details = {
        "length": evo.length,
        "final": system.encode_payload(evo.current.payload),
        "rules": [r.name for r in rules],
    }
    return Outcome(details, evolution_to_dot(system, evo, "rewrite"))


HANDLERS = {
    "build": handle_build,
    "audit": handle_audit,
    "play": handle_play,
    "check": handle_check,
    "newman": handle_newman,
    "mincost": handle_mincost,
    "dpo": handle_dpo,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _configure_logging(verbose):
    level = logging.INFO if verbose else getattr(logging, log_level(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _emit(report, outcome: Optional[Outcome], fmt):
    if fmt == "dot":
        if outcome is None or not outcome.dot:
            sys.stdout.write(render_text(report))
        else:
            sys.stdout.write(outcome.dot)
    elif fmt == "text":
        sys.stdout.write(render_text(report))
    else:
        sys.stdout.write(dumps(report) + "\n")


def _exit_code(report) -> int:
    return {"true": 0, "false": 1, "unknown": 2}.get(report["verdict"], EXIT_USAGE)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_TRUE if e.code == 0 else EXIT_USAGE
    _configure_logging(args.verbose)

    started = time.perf_counter()
    config = None
    fmt = args.report_format or "json"
    try:
        config = resolve_config(args)
        fmt = config.report_format
        logger.info(f"Running {args.command} on {sanitize_log_input(config.system)}")
        outcome = HANDLERS[args.command](args, config)
        dot_path = getattr(args, "dot", None)
        if dot_path and outcome.dot:
            write_text(dot_path, outcome.dot)
        timing_ms = round((time.perf_counter() - started) * 1000)
        report = success_response(args.command, outcome.result, config.as_dict(), timing_ms)
    except (EvolutionError, OSError, KeyError, TypeError, ValueError) as e:
        error = e if isinstance(e, EvolutionError) else ConfigError(f"Invalid input: {type(e).__name__}: {e}")
        logger.info(f"{args.command} stopped: {sanitize_log_input(error.message)}")
        timing_ms = round((time.perf_counter() - started) * 1000)
        report = error_response(args.command, error, config.as_dict() if config else None, timing_ms)
        outcome = None
    _emit(report, outcome, fmt)
    return _exit_code(report)


if __name__ == "__main__":
    sys.exit(main())

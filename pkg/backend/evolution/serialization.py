"""
JSON encodings for objects, arrows, paths and evolutions, plus the report
envelope the CLI prints.
"""
import json
import logging
from enum import Enum

from evolution_core import Arrow, ArrowKind, Evolution, Path
from evolution_errors import ConfigError, EvolutionError

logger = logging.getLogger(__name__)

REPORT_KEYS = ("command", "verdict", "witness", "exhausted", "config", "timing_ms", "details")


class ReportEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, bytes):
            return obj.hex()
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, (set, frozenset)):
            return sorted(obj)
        return super(ReportEncoder, self).default(obj)


def dumps(data, indent=2):
    """Deterministic JSON text: sorted keys, fixed separators"""
    return json.dumps(data, cls=ReportEncoder, indent=indent, sort_keys=True, ensure_ascii=False)


def encode_obj(system, obj):
    return {"payload": system.encode_payload(obj.payload), "canon": obj.key_hex}


def decode_obj(system, data):
    obj = system.make(system.decode_payload(data["payload"]))
    if "canon" in data and data["canon"] != obj.key_hex:
        raise ConfigError("Stored canonical key does not match the payload", stored=str(data["canon"])[:64])
    return obj


def encode_arrow(system, arrow: Arrow):
    data = {
        "dom": encode_obj(system, arrow.dom),
        "cod": encode_obj(system, arrow.cod),
        "map": system.encode_map(arrow.map_data),
        "kind": arrow.kind.value,
        "label": arrow.label,
    }
    if arrow.cost:
        data["cost"] = arrow.cost
    return data


def decode_arrow(system, data) -> Arrow:
    try:
        kind = ArrowKind(data.get("kind", "transition"))
    except ValueError:
        raise ConfigError(f"Unknown arrow kind: {str(data.get('kind'))[:20]}")
    return Arrow(
        decode_obj(system, data["dom"]),
        decode_obj(system, data["cod"]),
        system.decode_map(data["map"]),
        kind,
        data.get("label", ""),
        int(data.get("cost", 0)),
    )


def encode_path(system, path: Path):
    return {
        "start": encode_obj(system, path.start),
        "arrows": [encode_arrow(system, arrow) for arrow in path.arrows],
        "length": path.length,
        "label": path.label(),
    }


def decode_path(system, data) -> Path:
    return Path(decode_obj(system, data["start"]), tuple(decode_arrow(system, a) for a in data["arrows"]))


def encode_evolution(system, evo: Evolution):
    return {
        "system": system.describe(),
        "stages": [encode_obj(system, stage) for stage in evo.stages],
        "steps": [encode_arrow(system, step) for step in evo.steps],
        "audit": list(evo.audit),
    }


def decode_evolution(data, system=None):
    """Rebuild (system, evolution); the system comes from the stored description unless given"""
    if not isinstance(data, dict) or "stages" not in data:
        raise ConfigError("Evolution JSON needs a 'stages' list")
    try:
        if system is None:
            from system_instances import build_system

            description = dict(data.get("system") or {})
            name = description.pop("system", None)
            if name is None:
                raise ConfigError("Evolution JSON does not name its system")
            system = build_system(name, description)
        stages = tuple(decode_obj(system, s) for s in data["stages"])
        steps = tuple(decode_arrow(system, s) for s in data.get("steps", []))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Evolution JSON is malformed: {type(e).__name__}: {e}")
    try:
        evo = Evolution(stages, steps, tuple(data.get("audit", [])))
    except EvolutionError as e:
        raise ConfigError(f"Evolution JSON is inconsistent: {e.message}")
    for index, step in enumerate(evo.steps):
        if not system.is_transition(step):
            raise ConfigError(f"Step {index} is not a transition of {system.name}", step=index)
    return system, evo


def load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"File not found: {path}", path=str(path))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}", path=str(path))
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e.strerror}", path=str(path))


def write_text(path, text):
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise ConfigError(f"Cannot write {path}: {e.strerror}", path=str(path))
    logger.info(f"Wrote {len(text)} characters to {path}")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def success_response(command, result, config=None, timing_ms=0):
    """Report for a finished command; `result` is a CheckResult or a plain dict of details"""
    if hasattr(result, "verdict"):
        verdict, witness, exhausted, details = result.verdict.value, result.witness, result.exhausted, result.details
    else:
        verdict, witness, exhausted, details = "true", None, None, dict(result or {})
    return {
        "command": command,
        "verdict": verdict,
        "witness": witness,
        "exhausted": exhausted,
        "config": config,
        "timing_ms": timing_ms,
        "details": details,
    }


def error_response(command, error: EvolutionError, config=None, timing_ms=0):
    """Report for a command that raised; the verdict follows the error's exit code"""
    verdict = {0: "true", 1: "false", 2: "unknown"}.get(error.exit_code, "error")
    exhausted = None
    if getattr(error, "budget_name", None):
        exhausted = {"name": error.budget_name, "limit": error.limit}
    return {
        "command": command,
        "verdict": verdict,
        "witness": error.details.get("square") if isinstance(error.details, dict) else None,
        "exhausted": exhausted,
        "config": config,
        "timing_ms": timing_ms,
        "details": error.to_dict(),
    }


def render_text(report):
    lines = [f"{report['command']}: {report['verdict']}"]
    if report.get("witness") is not None:
        lines.append(f"witness: {dumps(report['witness'], indent=None)}")
    if report.get("exhausted") is not None:
        lines.append(f"exhausted: {report['exhausted']['name']} at {report['exhausted']['limit']}")
    for key in sorted(report.get("details") or {}):
        value = report["details"][key]
        if isinstance(value, (dict, list)):
            value = dumps(value, indent=None)
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# DOT
# ---------------------------------------------------------------------------


def _dot_label(arrow):
    text = f"{arrow.kind.value}"
    if arrow.label:
        text = f"{arrow.label} ({text})"
    if arrow.cost:
        text += f" cost={arrow.cost}"
    return text.replace('"', "'")


def evolution_to_dot(system, evo: Evolution, name="evolution"):
    """Stages as nodes, steps as labelled edges"""
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for index, stage in enumerate(evo.stages):
        payload = json.dumps(system.encode_payload(stage.payload), cls=ReportEncoder, sort_keys=True)
        payload = payload[:60].replace('"', "'")
        lines.append(f'  s{index} [label="{index}: {payload}"];')
    for index, step in enumerate(evo.steps):
        lines.append(f'  s{index} -> s{index + 1} [label="{_dot_label(step)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

"""
Run configuration: flat ``key = value`` text with section prefixes.

    problem.name = dendrite
    problem.mode = multi
    problem.<parameter> = ...        (parameters declared by the problem)
    mesh.macro = macro/square4.macro
    adapt.<component>.<field> = ...  (fields of AdaptConfig)
    solver.method = bicgstab_ell
    output.dir = results

Keys are validated against the problem's declared parameters and the
settings dataclasses; anything unknown is rejected with a ConfigError
naming the key.
"""
import logging
import os
from dataclasses import dataclass, field, fields, replace

from .adapt import AdaptConfig
from .linalg import SolverConfig
from .problems import MODES, MULTI, get_problem_class

logger = logging.getLogger(__name__)

# --- Configuration ---
ROOT_PATH = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_MACRO = os.path.join("macro", "square4.macro")
TRUE_WORDS = {"true", "yes", "on", "1"}
FALSE_WORDS = {"false", "no", "off", "0"}
# -----------------------------------------------


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}: {message}{where}" if key else f"{message}{where}")


@dataclass
class MeshSettings:
    macro: str = DEFAULT_MACRO
    scale: float = 1.0
    initial_refinement: int = 4
    initial_adapt: int = 0
    identical: bool = False


@dataclass
class OutputSettings:
    dir: str = "results"
    prefix: str = ""
    vtk_interval: int = 0
    csv: bool = True


@dataclass
class RunConfig:
    problem: str
    mode: str = MULTI
    seed: int = 0
    parameters: dict = field(default_factory=dict)
    mesh: MeshSettings = field(default_factory=MeshSettings)
    adapt: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputSettings = field(default_factory=OutputSettings)

    @property
    def problem_class(self):
        return get_problem_class(self.problem)

    def adapt_settings(self):
        """Problem defaults overlaid with the configured adapt keys, per component."""
        merged = {c: dict(v) for c, v in self.problem_class.DEFAULT_ADAPT.items()}
        for component, overrides in self.adapt.items():
            merged.setdefault(component, {}).update(overrides)
        return {c: AdaptConfig(**v) for c, v in merged.items()}

    def macro_path(self):
        path = self.mesh.macro
        if os.path.isabs(path) or os.path.exists(path):
            return path
        return os.path.join(ROOT_PATH, path)


def _convert(raw, default, key):
    """Converts ``raw`` to the type of ``default``."""
    try:
        if isinstance(default, bool):
            word = raw.lower()
            if word in TRUE_WORDS:
                return True
            if word in FALSE_WORDS:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as e:
        raise ConfigError(str(e), key) from None
    return raw


def _dataclass_defaults(cls):
    instance = cls() if cls is not RunConfig else None
    return {f.name: getattr(instance, f.name) for f in fields(cls)}


def _read_lines(text):
    entries = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=number)
        entries.append((key, value, number))
    return entries


def parse_config(text):
    """
    Parses configuration text. Later entries override earlier ones.

    :param text: Configuration text.
    :return: RunConfig.
    :raises ConfigError: For malformed lines, unknown keys or bad values.
    """
    entries = _read_lines(text)
    names = [value for key, value, _ in entries if key == "problem.name"]
    if not names:
        raise ConfigError("missing", "problem.name")
    try:
        problem_class = get_problem_class(names[-1])
    except ValueError as e:
        raise ConfigError(str(e), "problem.name") from None

    config = RunConfig(problem=names[-1])
    mesh = _dataclass_defaults(MeshSettings)
    output = _dataclass_defaults(OutputSettings)
    solver = {**_dataclass_defaults(SolverConfig), **problem_class.DEFAULT_SOLVER}
    adapt_defaults = _dataclass_defaults(AdaptConfig)
    parameters, adapt = {}, {}

    for key, value, number in entries:
        section, _, rest = key.partition(".")
        if section == "problem":
            if rest == "name":
                continue
            if rest == "mode":
                if value not in MODES:
                    raise ConfigError(f"expected one of {MODES}, got {value!r}", key, number)
                config.mode = value
            elif rest == "seed":
                config.seed = _convert(value, 0, key)
            elif rest in problem_class.PARAMETERS:
                parameters[rest] = _convert(value, problem_class.PARAMETERS[rest], key)
            else:
                raise ConfigError(f"unknown parameter for problem {config.problem!r}", key, number)
        elif section in ("mesh", "output", "solver"):
            target = {"mesh": mesh, "output": output, "solver": solver}[section]
            if rest not in target:
                raise ConfigError("unknown key", key, number)
            target[rest] = _convert(value, target[rest], key)
        elif section == "adapt":
            component, _, name = rest.partition(".")
            if component not in problem_class.components:
                raise ConfigError(f"unknown component for problem {config.problem!r}", key, number)
            if name not in adapt_defaults:
                raise ConfigError("unknown adapt setting", key, number)
            adapt.setdefault(component, {})[name] = _convert(value, adapt_defaults[name], key)
        else:
            raise ConfigError("unknown section", key, number)

    config.parameters = parameters
    config.adapt = adapt
    try:
        config.mesh = MeshSettings(**mesh)
        config.output = OutputSettings(**output)
        config.solver = SolverConfig(**solver)
        config.adapt_settings()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return config


def load_config(path):
    """Reads and parses a configuration file."""
    with open(path, "r", encoding="utf-8") as f:
        config = parse_config(f.read())
    logger.info("Loaded config %s (problem %s, %s mode)", path, config.problem, config.mode)
    return config


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config):
    """
    Serializes a RunConfig; ``parse_config(dump_config(c)) == c``.

    :return: Configuration text.
    """
    lines = [f"problem.name = {config.problem}", f"problem.mode = {config.mode}",
             f"problem.seed = {config.seed}"]
    lines += [f"problem.{k} = {_format(v)}" for k, v in sorted(config.parameters.items())]
    for section, settings in (("mesh", config.mesh), ("solver", config.solver), ("output", config.output)):
        lines += [f"{section}.{f.name} = {_format(getattr(settings, f.name))}" for f in fields(settings)]
    for component in sorted(config.adapt):
        lines += [f"adapt.{component}.{k} = {_format(v)}" for k, v in sorted(config.adapt[component].items())]
    return "\n".join(lines) + "\n"


def apply_overrides(config, overrides):
    """
    Re-parses ``config`` with extra ``key = value`` pairs appended.

    :param overrides: Dict of key -> string value (None values are skipped).
    :return: New RunConfig.
    """
    extra = [f"{key} = {value}" for key, value in overrides.items() if value is not None]
    if not extra:
        return config
    return parse_config(dump_config(config) + "\n".join(extra) + "\n")


def with_mode(config, mode):
    return replace(config, mode=mode)

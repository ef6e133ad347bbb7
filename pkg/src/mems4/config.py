"""Run configuration: dataclass, key=value files and validation."""

from dataclasses import dataclass, fields, replace
from pathlib import Path

COMMANDS = ("continue", "lambda-star", "endpoint", "evolve", "validate")

# accepted spellings in files and on the command line
ALIASES = {"lambda": "lam", "out": "output_dir", "lambda-star-factor": "lambda_star_factor"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str = "validate"
    d: int = 1
    B: float = 1.0
    T: float = 0.0
    lam: float | None = None
    gamma: float = 0.0
    n: int = 200
    refine: int | None = None
    newton_tol: float = 1e-8
    eig_tol: float = 1e-9
    fold_tol: float = 1e-3
    eps_td: float = 1e-3
    lambda_stop: float = 1e-3
    eps_min: float = 1e-3
    ds_min: float = 1e-6
    ds_max: float = 0.1
    horizon: float = 1.0
    dt0: float = 1e-3
    dt_max: float = 0.05
    init: str = "zero"
    lambda_star_factor: float | None = None
    branch_file: str | None = None
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.d not in (1, 2):
            raise ConfigError(f"d must be 1 or 2, got {self.d}")
        if not self.B > 0 or not self.T >= 0 or not self.gamma >= 0:
            raise ConfigError("need B > 0, T >= 0, gamma >= 0")
        if self.lam is not None and not self.lam >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.n < 8 or (self.refine is not None and self.refine < 8):
            raise ConfigError("grid sizes must be >= 8")
        for name in ("newton_tol", "eig_tol", "fold_tol", "eps_td", "lambda_stop", "eps_min",
                     "ds_min", "ds_max", "horizon", "dt0", "dt_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.ds_min > self.ds_max:
            raise ConfigError("ds_min exceeds ds_max")
        if self.lambda_star_factor is not None and not self.lambda_star_factor > 0:
            raise ConfigError("lambda_star_factor must be positive")
        if not (self.init == "zero" or self.init.startswith("phi1:") or Path(self.init).suffix == ".csv"):
            raise ConfigError(f"init must be 'zero', 'phi1:<amplitude>' or a .csv file, got {self.init!r}")

    def with_values(self, **kw):
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(name, text):
    kind = FIELD_TYPES[name]
    if text in ("none", "None", ""):
        if "None" in str(kind):
            return None
        raise ConfigError(f"{name} may not be empty")
    try:
        if kind in (int, "int") or str(kind).startswith("int"):
            return int(text)
        if "float" in str(kind):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def canonical(key):
    key = key.strip()
    key = ALIASES.get(key, key).replace("-", "_")
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    return key


def parse_pairs(lines):
    """``key = value`` lines with ``#`` comments into a dict of typed values."""
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = canonical(key)
        out[key] = _convert(key, value)
    return out


def load_config_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_pairs(text.splitlines())


def parse_sweep(text):
    """``key=v1,v2,...`` into ``(key, [typed values])``."""
    if "=" not in text:
        raise ConfigError(f"sweep must be key=v1,v2,..., got {text!r}")
    key, values = text.split("=", 1)
    key = canonical(key)
    return key, [_convert(key, v.strip()) for v in values.split(",") if v.strip()]

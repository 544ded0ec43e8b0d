"""Flat ``key = value`` experiment configuration."""

from dataclasses import dataclass

DEFAULTS = {
    # grids and model
    "n_interior": 99,
    "n_steps": 101,
    "T": 0.1,
    "n_sub": 5,
    "gamma": 3.0,
    "form": "power",
    # observation
    "obs": "continuous",
    "n_points": 3,
    "mask": "all",
    "point_weighting": "spacing",
    # truth and noise
    "truth": "tent",
    "truth_amplitude": 20.0,
    "noise": 0.05,
    "seed": 0,
    # iteration
    "setting": "reduced",
    "scheme": "standard",
    "tau": 2.5,
    "step_rule": "power_estimate",
    "mu": 1.0,
    "safety": 0.9,
    "power_iters": 20,
    "warm_iters": 2,
    "refresh_cycles": 1,
    "max_cycles": 10000,
    "adjoint": "formula",
    "theta0": 0.0,
    # sweeps
    "seeds": "0,1,2",
    "np_list": "3,11,21,51,101",
}

CHOICES = {
    "form": ("power", "signed_power", "none"),
    "obs": ("continuous", "discrete"),
    "point_weighting": ("spacing", "unit"),
    "truth": ("tent", "sine", "bump"),
    "setting": ("reduced", "aao"),
    "scheme": ("standard", "init_in_all", "growing", "full"),
    "step_rule": ("power_estimate", "fixed"),
    "adjoint": ("formula", "transpose"),
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based source line when known."""

    def __init__(self, message, line=None, source=None):
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


def _coerce(key, raw, line=None, source=None):
    kind = type(DEFAULTS[key])
    try:
        if kind is int:
            value = int(raw)
        elif kind is float:
            value = float(raw)
        else:
            value = str(raw).strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}", line, source) from None
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigError(f"{key}: {value!r} is not one of {', '.join(CHOICES[key])}", line, source)
    return value


def int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def validate(cfg):
    checks = [
        (cfg["n_interior"] >= 1, "n_interior must be >= 1"),
        (cfg["n_steps"] >= 1, "n_steps must be >= 1"),
        (cfg["T"] > 0, "T must be positive"),
        (1 <= cfg["n_sub"] <= cfg["n_steps"], "need 1 <= n_sub <= n_steps"),
        (cfg["gamma"] >= 1, "gamma must be >= 1"),
        (1 <= cfg["n_points"] <= cfg["n_steps"], "need 1 <= n_points <= n_steps"),
        (cfg["noise"] >= 0, "noise must be nonnegative"),
        (cfg["tau"] > 2, "tau must exceed 2"),
        (cfg["mu"] > 0, "mu must be positive"),
        (0 < cfg["safety"] <= 1, "safety must lie in (0, 1]"),
        (min(cfg["power_iters"], cfg["warm_iters"], cfg["refresh_cycles"], cfg["max_cycles"]) >= 1,
         "power_iters, warm_iters, refresh_cycles, max_cycles must be >= 1"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    if cfg["mask"] != "all":
        try:
            lo, hi = (float(v) for v in cfg["mask"].split(":"))
        except ValueError:
            raise ConfigError(f"mask: expected 'all' or 'lo:hi', got {cfg['mask']!r}") from None
        if not 0 <= lo < hi <= 1:
            raise ConfigError("mask: need 0 <= lo < hi <= 1")
    try:
        seeds, nps = int_list(cfg["seeds"]), int_list(cfg["np_list"])
    except ValueError:
        raise ConfigError("seeds and np_list must be comma-separated integers") from None
    if not seeds or not nps:
        raise ConfigError("seeds and np_list must be nonempty")
    return cfg


def parse_text(text, source=None):
    """Key-value pairs from config text (``#`` starts a comment)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        values[key] = _coerce(key, value, lineno, source)
    return values


def apply_overrides(values, overrides):
    out = dict(values)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r} in --set")
        out[key] = _coerce(key, value)
    return out


def load(path=None, overrides=None, text=None):
    """Defaults, then the file (or ``text``), then ``--set`` overrides; validated."""
    cfg = dict(DEFAULTS)
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cfg.update(parse_text(fh.read(), source=str(path)))
    elif text is not None:
        cfg.update(parse_text(text))
    cfg = apply_overrides(cfg, overrides)
    return validate(cfg)


def _format(value):
    return repr(value) if isinstance(value, float) else str(value)


def dump(cfg):
    """Normalized snapshot: every key in canonical order."""
    return "".join(f"{k} = {_format(cfg[k])}\n" for k in DEFAULTS)


@dataclass(frozen=True)
class ExitCodes:
    converged: int = 0
    config_error: int = 1
    cycle_cap: int = 3
    solver_failure: int = 4
    non_finite: int = 5


EXIT = ExitCodes()

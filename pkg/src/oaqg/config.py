"""Parameter-file ingestion.

One UTF-8 text format for everything: sectioned ``key = value`` lines.
``[physical]`` and ``[shortwave]`` feed the parameter dataclasses,
``[numerics]`` the integration settings, and the optional experiment
sections carry defaults for the matching CLI subcommands. Unknown
sections, unknown keys, duplicate keys, and unparseable values are all
errors that name the line; a missing key falls back to the packaged
default. ``#`` starts a comment anywhere on a line.
"""

import hashlib
from dataclasses import dataclass, field, fields
from importlib import resources

from .params import PhysicalParams, ShortwaveConfig, ParamError
from .basis import ResolutionSpec
from .stepping import SchemeConfig

__all__ = ["RunConfig", "read_config", "parse_config", "config_hash",
           "default_config_text"]

_NUMERIC_FIELDS = {
    "dt": float,              # s
    "t_end": float,           # s
    "scheme": str,
    "output_every": int,
    "overflow_cap": float,    # solver units
    "resolution": str,        # KxN/MxP
    "seed": int,
    "kappa_convention": str,  # 'half' or 'full'
    "grid_factor": int,
}

_EXPERIMENT_FIELDS = {
    "tlm": {"n_vectors": int, "spinup": float, "horizon": float,
            "renorm_every": int, "dt": float, "seed": int, "metric": str},
    "sync": {"n_obs": int, "gamma_nudge": float,
             "observe_temperature": bool, "horizon": float, "dt": float,
             "output_every": int, "slave_seed": int, "spinup": float},
    "continuity": {"eps": float, "seed": int, "horizon": float,
                   "dt": float, "output_every": int, "spinup": float},
    "sweep": {"param": str, "deltas": str, "horizon": float, "dt": float,
              "output_every": int, "spinup": float},
    "converge": {"ladder": str, "horizon": float, "dt": float,
                 "seed": int},
}

_BOOL_WORDS = {"true": True, "yes": True, "on": True,
               "false": False, "no": False, "off": False}


@dataclass
class RunConfig:
    """Everything a run needs, plus the raw text it came from."""

    params: PhysicalParams
    shortwave: ShortwaveConfig
    numerics: SchemeConfig
    res: ResolutionSpec
    seed: int = 0
    kappa_convention: str = "half"
    grid_factor: int = 6
    extras: dict = field(default_factory=dict)
    text: str = ""
    origin: str = "<defaults>"


def default_config_text() -> str:
    return (resources.files("oaqg") / "defaults.cfg").read_text("utf-8")


def config_hash(text: str) -> str:
    """sha256 over the exact file text; what manifests store."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _coerce(raw, typ, where):
    if typ is str:
        return raw
    if typ is bool:
        word = raw.lower()
        if word not in _BOOL_WORDS:
            raise ParamError(f"{where}: expected a boolean "
                             f"(true/false), got {raw!r}")
        return _BOOL_WORDS[word]
    try:
        if typ is int:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ParamError(f"{where}: expected {typ.__name__}, "
                         f"got {raw!r}") from None


def _schemas():
    out = {
        "physical": {f.name: float for f in fields(PhysicalParams)},
        "shortwave": {f.name: (str if f.name == "mode" else float)
                      for f in fields(ShortwaveConfig)},
        "numerics": dict(_NUMERIC_FIELDS),
    }
    out.update(_EXPERIMENT_FIELDS)
    return out


def parse_config(text: str, origin: str = "<string>") -> RunConfig:
    schemas = _schemas()
    values = {name: {} for name in schemas}
    section = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{origin} line {lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParamError(f"{where}: malformed section header "
                                 f"{line!r}")
            section = line[1:-1].strip()
            if section not in schemas:
                raise ParamError(f"{where}: unknown section [{section}]; "
                                 f"known: {sorted(schemas)}")
            continue
        if "=" not in line:
            raise ParamError(f"{where}: expected 'key = value', "
                             f"got {line!r}")
        if section is None:
            raise ParamError(f"{where}: key outside any section")
        key, raw = (s.strip() for s in line.split("=", 1))
        schema = schemas[section]
        if key not in schema:
            raise ParamError(f"{where}: unknown key {key!r} in "
                             f"[{section}]")
        if key in values[section]:
            raise ParamError(f"{where}: duplicate key {key!r} in "
                             f"[{section}]")
        values[section][key] = _coerce(raw, schema[key],
                                       f"{where}: [{section}] {key}")

    params = PhysicalParams(**values["physical"])
    shortwave = ShortwaveConfig(**values["shortwave"])
    num = dict(values["numerics"])
    res = ResolutionSpec.parse(num.pop("resolution", "8x8/8x8"))
    seed = num.pop("seed", 0)
    kappa_convention = num.pop("kappa_convention", "half")
    grid_factor = num.pop("grid_factor", 6)
    numerics = SchemeConfig(dt=num.pop("dt", 193.8),
                            t_end=num.pop("t_end", 0.0),
                            scheme=num.pop("scheme", "imex_cnab2"),
                            output_every=num.pop("output_every", 1),
                            overflow_cap=num.pop("overflow_cap", 1e6))
    params.validate()
    shortwave.validate()
    numerics.validate()
    extras = {name: values[name] for name in _EXPERIMENT_FIELDS
              if values[name]}
    return RunConfig(params=params, shortwave=shortwave, numerics=numerics,
                     res=res, seed=seed,
                     kappa_convention=kappa_convention,
                     grid_factor=grid_factor, extras=extras, text=text,
                     origin=origin)


def read_config(path=None) -> RunConfig:
    """Load a parameter file; None means the packaged defaults."""
    if path is None:
        return parse_config(default_config_text(), "<defaults>")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParamError(f"config file {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))

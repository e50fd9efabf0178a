"""Checkpoints, diagnostic series, and run manifests.

Everything is plain text. Checkpoints store one coefficient per line
with 17 significant digits, which round-trips IEEE doubles exactly, so
a restart continues bit-for-bit (including the explicit-tendency
history the two-step scheme needs). Series files are append-only
line-delimited JSON or CSV. The manifest records what a run produced
and enough to reproduce it: the config hash, format versions, wall
times, revision, seed, and every artifact path.
"""

import csv
import json
import subprocess
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .params import ParamError
from .model import State, Tendency
from .basis import ResolutionSpec

__all__ = ["CHECKPOINT_VERSION", "SERIES_VERSION", "MANIFEST_VERSION",
           "PersistError", "Checkpoint", "write_checkpoint", "read_checkpoint",
           "state_from_checkpoint", "history_from_checkpoint",
           "write_series", "RunManifest", "write_manifest",
           "read_manifest", "revision_string"]

CHECKPOINT_VERSION = 1
SERIES_VERSION = 1
MANIFEST_VERSION = 1

_BLOCKS = ("psi_t", "psi_c", "psi_o", "theta_o")


class PersistError(ParamError):
    """Malformed or mismatched artifact file."""


@dataclass
class Checkpoint:
    """Parsed checkpoint; block arrays in solver units."""

    version: int
    resolution: str
    param_hash: str
    t: float                 # nondimensional, as stored in State.t
    blocks: dict             # name -> np.ndarray
    history: dict | None     # same keys, or None for a cold restart


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_checkpoint(path, state: State, resolution: str, param_hash: str,
                     history: Tendency | None = None) -> None:
    lines = [f"oaqg-checkpoint {CHECKPOINT_VERSION}",
             f"resolution {resolution}",
             f"param-hash {param_hash}",
             f"time {_fmt(state.t)}"]
    for name, arr in zip(_BLOCKS, state.blocks()):
        lines.append(f"[{name}]")
        lines.extend(_fmt(v) for v in arr)
    if history is not None:
        for name, arr in zip(_BLOCKS, history.blocks()):
            lines.append(f"[history.{name}]")
            lines.extend(_fmt(v) for v in arr)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _take(lines, n, section, path):
    if len(lines) < n:
        raise PersistError(f"checkpoint {path}: section [{section}] "
                           f"truncated ({len(lines)} of {n} values)")
    vals = np.array([float(s) for s in lines[:n]])
    return vals, lines[n:]


def read_checkpoint(path) -> Checkpoint:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PersistError(f"checkpoint {path}: {exc.strerror}") from exc
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("oaqg-checkpoint"):
        raise PersistError(f"checkpoint {path}: missing signature line")
    version = int(lines[0].split()[1])
    if version != CHECKPOINT_VERSION:
        raise PersistError(
            f"checkpoint {path}: format version {version} is not "
            f"supported (reader expects {CHECKPOINT_VERSION})")
    header = {}
    idx = 1
    for key in ("resolution", "param-hash", "time"):
        if idx >= len(lines) or not lines[idx].startswith(key + " "):
            raise PersistError(f"checkpoint {path}: missing header "
                               f"line {key!r}")
        header[key] = lines[idx].split(None, 1)[1]
        idx += 1
    res = ResolutionSpec.parse(header["resolution"])
    sizes = {"psi_t": res.n_atm, "psi_c": res.n_atm,
             "psi_o": res.n_ocn, "theta_o": res.n_ocn}

    rest = lines[idx:]
    blocks = {}
    for name in _BLOCKS:
        tag = f"[{name}]"
        if not rest or rest[0] != tag:
            raise PersistError(f"checkpoint {path}: missing section "
                               f"{tag}")
        blocks[name], rest = _take(rest[1:], sizes[name], name, path)
    history = None
    if rest:
        history = {}
        for name in _BLOCKS:
            tag = f"[history.{name}]"
            if not rest or rest[0] != tag:
                raise PersistError(f"checkpoint {path}: missing section "
                                   f"{tag}")
            history[name], rest = _take(rest[1:], sizes[name],
                                        f"history.{name}", path)
    if rest:
        raise PersistError(f"checkpoint {path}: {len(rest)} unexpected "
                           f"trailing lines after the last section")
    return Checkpoint(version=version, resolution=header["resolution"],
                      param_hash=header["param-hash"],
                      t=float(header["time"]), blocks=blocks,
                      history=history)


def state_from_checkpoint(ck: Checkpoint) -> State:
    return State(*[ck.blocks[name].copy() for name in _BLOCKS], t=ck.t)


def history_from_checkpoint(ck: Checkpoint) -> Tendency | None:
    if ck.history is None:
        return None
    return Tendency(*[ck.history[name].copy() for name in _BLOCKS])


def write_series(path, records, fmt: str = "ndjson") -> None:
    """Append records (list of flat dicts with identical keys)."""
    if fmt not in ("ndjson", "csv"):
        raise ParamError(f"[io] emit: expected 'csv' or 'ndjson', "
                         f"got {fmt!r}")
    if not records:
        return
    path = Path(path)
    if fmt == "ndjson":
        with open(path, "a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
        return
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(records[0]))
        if fresh:
            writer.writeheader()
        writer.writerows(records)


def revision_string() -> str:
    """Short git revision when available, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "-C", str(here), "rev-parse",
                              "--short", "HEAD"],
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    try:
        from importlib.metadata import version
        return "v" + version("oaqg")
    except Exception:
        return "unknown"


@dataclass
class RunManifest:
    """What a run produced and how to reproduce it."""

    config_hash: str
    seed: int
    revision: str
    started: float            # unix seconds
    finished: float
    exit_status: int
    artifacts: list
    format_versions: dict | None = None

    def __post_init__(self):
        if self.format_versions is None:
            self.format_versions = {"manifest": MANIFEST_VERSION,
                                    "checkpoint": CHECKPOINT_VERSION,
                                    "series": SERIES_VERSION}


def write_manifest(path, manifest: RunManifest) -> None:
    Path(path).write_text(json.dumps(asdict(manifest), indent=2) + "\n",
                          encoding="utf-8")


def read_manifest(path) -> RunManifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise PersistError(f"manifest {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise PersistError(f"manifest {path}: not valid JSON ({exc})")
    version = data.get("format_versions", {}).get("manifest")
    if version != MANIFEST_VERSION:
        raise PersistError(f"manifest {path}: format version {version} "
                           f"is not supported (reader expects "
                           f"{MANIFEST_VERSION})")
    return RunManifest(**data)

"""Scenario configuration: INI-style files with one section per experiment.

The format is flat (section -> key = scalar), hand-editable and
diff-friendly. Unknown sections or keys are rejected up front so a typo
cannot silently disable a check. Complex shifts accept Python literals
like ``1j`` or ``0.5+2j``.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError

EXPERIMENT_TAGS = (
    "resolvent-identities",
    "schatten-report",
    "compactness",
    "trace-conditions",
    "wave-operator",
    "wave-equation",
    "essential-spectrum-proxy",
)

_SCENARIO_KEYS = {"name", "seed", "out", "boundary_leakage_threshold",
                  "leakage_weight_exponent"}
_GRID_KEYS = {"d", "n", "l", "k"}
_SYMBOL_KEYS = {"kind", "k", "order"}        # plus c_* coefficient rows
_MEDIUM_KEYS = {"kind", "value", "a", "w", "p", "path"}

_EXPERIMENT_KEYS = {
    "resolvent-identities": {"z", "n_fields", "tol", "solver_tol", "method"},
    "schatten-report": {"operator", "rx", "rxi", "r", "power", "z",
                        "window_lo", "window_hi", "probe_p", "refine",
                        "alpha_min", "alpha_max", "stability_pct"},
    "compactness": {"z", "ratio_index", "decay_max", "contrast_min",
                    "contrast_value"},
    "trace-conditions": {"lambda_lo", "lambda_hi", "stability_pct"},
    "wave-operator": {"center_k", "sigma_k", "center_x", "t0", "t_max",
                      "direction", "tolerance", "isometry_max",
                      "intertwining_max", "completeness_max", "strict_wrap"},
    "wave-equation": {"check_energy_drift", "drift_t_max", "drift_max",
                      "check_standing_wave", "standing_tol",
                      "check_scattering", "center_k", "sigma_k", "t0",
                      "t_max", "comparison_max", "tolerance"},
    "essential-spectrum-proxy": {"lambda_lo", "lambda_hi", "max_discrepancy"},
}


@dataclass(frozen=True)
class ExperimentSpec:
    tag: str
    label: str
    options: dict


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    out_dir: str
    grid: dict
    symbol: dict
    medium0: dict
    medium: dict
    experiments: tuple
    boundary_leakage_threshold: float = 1e-3
    leakage_weight_exponent: float = 1.0
    config_dir: Optional[str] = None


def parse_complex(text: str) -> complex:
    try:
        return complex(str(text).replace(" ", ""))
    except ValueError:
        raise ConfigurationError(f"cannot parse complex value {text!r}")


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"cannot parse boolean value {text!r}")


def grid_hash(d: int, n: int, L: float, k: int) -> str:
    payload = f"{d} {n} {float(L)!r} {k}".encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def _check_keys(section: str, keys, allowed, extra_ok=()):
    for key in keys:
        if key in allowed:
            continue
        if any(key.startswith(prefix) for prefix in extra_ok):
            continue
        raise ConfigurationError(
            f"unknown key {key!r} in section [{section}]")


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; raise ConfigurationError early."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigurationError(f"config parse error: {exc}")

    for section in parser.sections():
        if section in ("scenario", "grid", "symbol", "medium0", "medium"):
            continue
        if section.startswith("experiment:"):
            continue
        raise ConfigurationError(f"unknown section [{section}]")

    sc = dict(parser["scenario"]) if parser.has_section("scenario") else {}
    _check_keys("scenario", sc, _SCENARIO_KEYS)
    if not parser.has_section("grid"):
        raise ConfigurationError("missing required section [grid]")
    gr = dict(parser["grid"])
    _check_keys("grid", gr, _GRID_KEYS)
    try:
        grid = {"d": int(gr["d"]), "n": int(gr["n"]),
                "L": float(gr["l"]), "k": int(gr.get("k", 1))}
    except KeyError as exc:
        raise ConfigurationError(f"[grid] is missing key {exc}")
    except ValueError as exc:
        raise ConfigurationError(f"[grid] has a malformed value: {exc}")

    sym = dict(parser["symbol"]) if parser.has_section("symbol") else {
        "kind": "laplacian"}
    _check_keys("symbol", sym, _SYMBOL_KEYS, extra_ok=("c_",))

    def medium_section(name, default_kind):
        if not parser.has_section(name):
            return {"kind": default_kind}
        data = dict(parser[name])
        _check_keys(name, data, _MEDIUM_KEYS)
        return data

    medium0 = medium_section("medium0", "constant")
    medium = medium_section("medium", "constant")

    experiments = []
    for section in parser.sections():
        if not section.startswith("experiment:"):
            continue
        parts = section.split(":")
        tag = parts[1] if len(parts) > 1 else ""
        label = parts[2] if len(parts) > 2 else tag
        if tag not in EXPERIMENT_TAGS:
            raise ConfigurationError(
                f"unknown experiment tag {tag!r} in section [{section}]; "
                f"known: {', '.join(EXPERIMENT_TAGS)}")
        options = dict(parser[section])
        _check_keys(section, options, _EXPERIMENT_KEYS[tag])
        experiments.append(ExperimentSpec(tag=tag, label=label,
                                          options=options))
    if not experiments:
        raise ConfigurationError("scenario declares no experiments")

    return Scenario(
        name=sc.get("name", path.stem),
        seed=int(sc.get("seed", 0)),
        out_dir=sc.get("out", "out"),
        grid=grid,
        symbol=sym,
        medium0=medium0,
        medium=medium,
        experiments=tuple(experiments),
        boundary_leakage_threshold=float(
            sc.get("boundary_leakage_threshold", 1e-3)),
        leakage_weight_exponent=float(
            sc.get("leakage_weight_exponent", 1.0)),
        config_dir=str(path.parent),
    )


# -- raw array files ----------------------------------------------------------

def write_array(path, values: np.ndarray, grid_params: dict) -> None:
    """Raw little-endian float64 dump with a text sidecar header.

    Complex data is stored as a trailing axis of (real, imag) pairs; the
    header records the logical shape, the grid fingerprint and the
    complex flag.
    """
    path = Path(path)
    data = np.asarray(values)
    is_complex = np.iscomplexobj(data)
    flat = np.stack([data.real, data.imag], axis=-1) if is_complex else data
    flat.astype("<f8").tofile(path)
    header = path.with_suffix(path.suffix + ".hdr")
    lines = [
        "format = wavescat-array-v1",
        f"shape = {' '.join(str(s) for s in data.shape)}",
        f"complex = {int(is_complex)}",
        f"grid_hash = {grid_hash(**grid_params)}",
    ]
    header.write_text("\n".join(lines) + "\n")


def read_array(path, grid_params: Optional[dict] = None) -> np.ndarray:
    path = Path(path)
    header = path.with_suffix(path.suffix + ".hdr")
    if not header.exists():
        raise ConfigurationError(f"array file {path} has no sidecar header")
    meta = {}
    for line in header.read_text().splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    if meta.get("format") != "wavescat-array-v1":
        raise ConfigurationError(f"unrecognized array format in {header}")
    shape = tuple(int(s) for s in meta["shape"].split())
    is_complex = bool(int(meta.get("complex", "0")))
    if grid_params is not None:
        expected = grid_hash(**grid_params)
        if meta.get("grid_hash") != expected:
            raise ConfigurationError(
                f"array {path} was sampled on a different grid "
                f"(hash {meta.get('grid_hash')} != {expected})")
    raw = np.fromfile(path, dtype="<f8")
    if is_complex:
        raw = raw.reshape(shape + (2,))
        return raw[..., 0] + 1j * raw[..., 1]
    return raw.reshape(shape)

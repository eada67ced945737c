"""On-disk formats: scenario configs, generated drops, solutions and reports.

Every file is written to a temporary sibling first and moved into place with
``os.replace`` so a crash never leaves a half-written output.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError
from .metrics import MetricsReport
from .radio import LogicalEnbIndex, RateTable
from .scenario import Scenario
from .solver.model import Allocation, Association, Solution, TraceRow
from .topology import GainTensor, NetworkConfig, Topology, generate_layout, watts_to_dbm

FORMAT_VERSION = 1

CONFIG_FILE = "config.yaml"
MANIFEST_FILE = "manifest.json"
UES_FILE = "ues.csv"
ENBS_FILE = "enbs.csv"
GAINS_FILE = "gains.npz"
ASSOCIATION_FILE = "association.csv"
SHARES_FILE = "shares.npz"
SOLUTION_FILE = "solution.json"
TRACE_FILE = "trace.csv"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"
CDF_FILE = "cdf.csv"
RATES_FILE = "rates.csv"

_INT_FIELDS = {"num_macro_sites", "sectors_per_macro", "picos_per_sector", "num_ues", "num_rbs", "seed"}
_STR_FIELDS = {"fading_model"}
_PAIR_FIELDS = {"macro_pathloss", "pico_pathloss"}
PRESETS = ("desk", "full")


# ---------------------------------------------------------------- writing


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing file {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _cell(value):
    # repr round-trips floats exactly, which keeps reruns byte-identical
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing file {path}")
    return json.loads(path.read_text())


def save_arrays(path, **arrays) -> None:
    buf = io.BytesIO()
    np.savez_compressed(buf, format_version=np.array(FORMAT_VERSION), **arrays)
    atomic_write_bytes(path, buf.getvalue())


def load_arrays(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing file {path}")
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    version = int(arrays.pop("format_version", -1))
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    return arrays


# ---------------------------------------------------------------- config


def _coerce(name: str, value, line: int, source: str):
    where = f"{source}:{line}"
    try:
        if name in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
                raise TypeError
            return int(value)
        if name in _STR_FIELDS:
            if not isinstance(value, str):
                raise TypeError
            return value
        if name in _PAIR_FIELDS:
            pair = tuple(float(v) for v in value)
            if len(pair) != 2:
                raise TypeError
            return pair
        if name == "ue_weights":
            return None if value is None else tuple(float(v) for v in value)
        if isinstance(value, bool):
            raise TypeError
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: invalid value {value!r} for {name}", name) from None


def parse_config(text: str, source: str = "<config>") -> NetworkConfig:
    """Build a :class:`NetworkConfig` from YAML text.

    The document is a mapping of ``NetworkConfig`` field names plus an
    optional ``preset`` (``desk`` or ``full``) that supplies the defaults.
    Errors carry the line of the offending key.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        raise ConfigError(f"{source}:{line}: malformed YAML ({getattr(exc, 'problem', exc)})") from None
    if root is None:
        return NetworkConfig()
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(f"{source}:{root.start_mark.line + 1}: expected a mapping of settings")

    known = set(NetworkConfig.field_names())
    lines: dict[str, int] = {}
    values: dict = {}
    preset = "desk"
    loader = yaml.SafeLoader("")
    for key_node, value_node in root.value:
        line = key_node.start_mark.line + 1
        key = key_node.value
        if key in lines or (key == "preset" and "preset" in lines):
            raise ConfigError(f"{source}:{line}: duplicate key {key!r}", key)
        lines[key] = line
        value = loader.construct_object(value_node, deep=True)
        if key == "preset":
            if value not in PRESETS:
                raise ConfigError(f"{source}:{line}: preset must be one of {PRESETS}", key)
            preset = value
            continue
        if key not in known:
            raise ConfigError(f"{source}:{line}: unknown setting {key!r}", key)
        values[key] = _coerce(key, value, line, source)

    try:
        config = NetworkConfig.full_scale(**values) if preset == "full" else NetworkConfig(**values)
        config.validate()
    except ConfigError as exc:
        line = lines.get(exc.field, 1)
        raise ConfigError(f"{source}:{line}: {exc}", exc.field) from None
    return config


def load_config(path) -> NetworkConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    return parse_config(path.read_text(), str(path))


def config_to_dict(config: NetworkConfig) -> dict:
    out = {}
    for f in fields(config):
        value = getattr(config, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


def dump_config(config: NetworkConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)


# ---------------------------------------------------------------- manifest


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class RunManifest:
    subcommand: str
    config_path: Optional[str]
    seed: int
    version: str
    options: dict = field(default_factory=dict)
    output_dir: str = ""
    format_version: int = FORMAT_VERSION


def write_manifest(out_dir, manifest: RunManifest) -> None:
    write_json(Path(out_dir) / MANIFEST_FILE, asdict(manifest))


def read_manifest(out_dir) -> RunManifest:
    data = read_json(Path(out_dir) / MANIFEST_FILE)
    return RunManifest(**data)


# ---------------------------------------------------------------- scenario files


def write_scenario(out_dir, topology: Topology, gains: GainTensor, config: NetworkConfig) -> None:
    out_dir = Path(out_dir)
    atomic_write_text(out_dir / CONFIG_FILE, dump_config(config))
    write_csv(
        out_dir / UES_FILE,
        ["ue_id", "x", "y", "weight"],
        (
            (u, float(p[0]), float(p[1]), float(w))
            for u, (p, w) in enumerate(zip(topology.ue_position, topology.ue_weight))
        ),
    )
    power_dbm = watts_to_dbm(np.asarray(topology.per_rb_power) * topology.num_rbs)
    write_csv(
        out_dir / ENBS_FILE,
        ["enb_id", "tier", "x", "y", "power_dbm"],
        (
            (b, str(t), float(p[0]), float(p[1]), float(dbm))
            for b, (t, p, dbm) in enumerate(zip(topology.enb_tier, topology.enb_position, power_dbm))
        ),
    )
    save_arrays(out_dir / GAINS_FILE, gains=gains.gains, large_scale=gains.large_scale)


def load_scenario(scenario_dir) -> Scenario:
    """Rebuild a scenario from a ``generate`` directory, using the stored gains."""
    scenario_dir = Path(scenario_dir)
    config = load_config(scenario_dir / CONFIG_FILE)
    topology = generate_layout(config)
    ues = read_csv(scenario_dir / UES_FILE)
    stored = np.array([[float(r["x"]), float(r["y"])] for r in ues]).reshape(-1, 2)
    if stored.shape != topology.ue_position.shape or not np.allclose(
        stored, topology.ue_position, rtol=0, atol=1e-9
    ):
        raise ConfigError(f"{scenario_dir}: positions do not match {CONFIG_FILE}")
    arrays = load_arrays(scenario_dir / GAINS_FILE)
    gains = GainTensor(gains=arrays["gains"], large_scale=arrays["large_scale"])
    return Scenario.from_topology(topology, gains, config)


def write_rate_table(path, rates: RateTable, index: LogicalEnbIndex) -> None:
    names = index.kind_names()
    u, b, r = np.indices(rates.rate_nabs.shape)

    def rows():
        for uu, bb, rr in zip(u.ravel(), b.ravel(), r.ravel()):
            yield uu, bb, names[bb], rr, rates.rate_nabs[uu, bb, rr], rates.rate_abs[uu, bb, rr]

    write_csv(path, ["ue_id", "logical_enb_id", "kind", "rb", "rate_nabs", "rate_abs"], rows())


# ---------------------------------------------------------------- solutions


def write_solution(out_dir, solution: Solution, scenario: Scenario) -> None:
    out_dir = Path(out_dir)
    index = scenario.index
    names = index.kind_names()
    serving = solution.association.serving
    write_csv(
        out_dir / ASSOCIATION_FILE,
        ["ue_id", "logical_enb_id", "kind", "physical_enb_id"],
        ((u, b, names[b], index.physical[b]) for u, b in enumerate(serving)),
    )
    save_arrays(out_dir / SHARES_FILE, x=solution.allocation.x, y=solution.allocation.y)
    write_csv(
        out_dir / TRACE_FILE,
        ["iteration", "utility", "handovers", "beta"],
        ((t.iteration, t.utility, t.handovers, t.beta) for t in solution.trace),
    )
    write_json(
        out_dir / SOLUTION_FILE,
        {
            "label": solution.label,
            "beta": solution.beta,
            "utility": solution.utility,
            "converged": solution.converged,
            "upper_bound": solution.upper_bound,
            "starved": solution.starved,
            "iterations": len(solution.trace) - 1 if solution.trace else 0,
        },
    )


def read_solution(run_dir, scenario: Scenario) -> Solution:
    run_dir = Path(run_dir)
    meta = read_json(run_dir / SOLUTION_FILE)
    rows = read_csv(run_dir / ASSOCIATION_FILE)
    serving = np.array([int(r["logical_enb_id"]) for r in rows], dtype=int)
    if serving.size != scenario.num_ues:
        raise ValueError(f"{run_dir}: association has {serving.size} UEs, expected {scenario.num_ues}")
    shares = load_arrays(run_dir / SHARES_FILE)
    trace = [
        TraceRow(int(r["iteration"]), float(r["utility"]), int(r["handovers"]), float(r["beta"]))
        for r in read_csv(run_dir / TRACE_FILE)
    ]
    utility = meta.get("utility")
    return Solution(
        association=Association.from_serving(serving, scenario.num_enbs),
        beta=float(meta["beta"]),
        allocation=Allocation(x=shares["x"], y=shares["y"]),
        utility=-math.inf if utility is None else float(utility),
        trace=trace,
        converged=bool(meta.get("converged", True)),
        upper_bound=meta.get("upper_bound"),
        starved=list(meta.get("starved", [])),
        label=meta.get("label", ""),
    )


def write_report(out_dir, report: MetricsReport, solution: Solution, scenario: Scenario) -> None:
    out_dir = Path(out_dir)
    index = scenario.index
    tiers = np.where(index.is_macro, "macro", "pico")
    serving = solution.association.serving
    write_csv(
        out_dir / METRICS_FILE,
        ["ue_id", "serving_enb", "tier", "throughput_bps"],
        ((u, b, tiers[b], t) for u, (b, t) in enumerate(zip(serving, report.per_ue_throughput))),
    )
    write_csv(out_dir / CDF_FILE, ["throughput_bps", "fraction"], report.cdf_points)
    loads = solution.association.s.sum(axis=0)
    write_json(
        out_dir / SUMMARY_FILE,
        {
            "label": solution.label,
            "jain": report.jain_index,
            "utility": report.system_utility,
            "upper_bound": solution.upper_bound,
            "beta": report.beta,
            "converged": solution.converged,
            "loads": {
                "per_logical_enb": loads.tolist(),
                "macro_avg_ues": report.per_tier_load[0],
                "pico_avg_ues": report.per_tier_load[1],
            },
            "per_tier_utility": {
                "macro": report.per_tier_utility[0],
                "pico": report.per_tier_utility[1],
            },
            "starved": solution.starved,
        },
    )

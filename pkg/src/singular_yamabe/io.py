"""Run configuration and serialization of results.

Curves go to comma-separated files whose first line is a ``#`` comment naming
units and the configuration hash (gnuplot skips it), structured reports to
JSON with sorted keys, and fields to a plain-text format with one row per
mode (mode-major, grid-minor).
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_dimension, check_int, check_mu_value, check_real, check_seed
from .exceptions import InvalidParameterError, OutputError

DEFAULTS = {
    "n": 3,
    "psi": "constant",
    "mu": 2.1,
    "seed": {},
    "t0": 8.0,
    "grid": {"t_step": 0.005, "max_degree": None, "basis": "auto"},
    "tolerances": {
        "tol_admit": 1e-3,
        "convergence_tol": 1e-10,
        "rate_tol": 0.05,
        "max_iters": 60,
        "escalation_attempts": 4,
    },
    "window": None,
    "periods": 10,
    "output_dir": "out",
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    """Split ``a.b=value``; the value is read as JSON when possible."""
    if "=" not in text:
        raise InvalidParameterError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise InvalidParameterError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


@dataclass
class RunConfig:
    """Validated settings of a command-line run.

    ``psi`` is ``"constant"`` or ``{"delaunay": ratio}`` with ``ratio =
    psi_min / psi_c``. ``seed`` maps flat mode indices to coefficients.
    """

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        self.data = _merge(DEFAULTS, self.data)
        d = self.data
        unknown = set(d) - set(DEFAULTS)
        if unknown:
            raise InvalidParameterError(f"unknown configuration keys {sorted(unknown)}")
        d["n"] = check_dimension(d["n"])
        d["mu"] = check_mu_value(d["mu"])
        d["t0"] = check_real(d["t0"], "t0", nonnegative=True)
        d["seed"] = {str(k): v for k, v in sorted(check_seed(d["seed"]).items())}
        d["periods"] = check_int(d["periods"], "periods", minimum=1)
        g = d["grid"]
        g["t_step"] = check_real(g["t_step"], "grid.t_step", positive=True)
        if g["max_degree"] is not None:
            g["max_degree"] = check_int(g["max_degree"], "grid.max_degree", minimum=1)
        if g["basis"] not in ("auto", "full", "zonal"):
            raise InvalidParameterError(f"grid.basis must be auto, full or zonal, got {g['basis']!r}")
        self.psi_min_ratio  # validates the psi entry
        if d["window"] is not None:
            w = d["window"]
            if not (isinstance(w, (list, tuple)) and len(w) == 2 and float(w[0]) < float(w[1])):
                raise InvalidParameterError("window must be a pair [start, end] with start < end")
            d["window"] = [float(w[0]), float(w[1])]

    @classmethod
    def load(cls, path: str | Path | None = None, overrides=()) -> "RunConfig":
        data: dict = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text())
            except OSError as exc:
                raise OutputError(f"cannot read configuration {path}: {exc.strerror}",
                                  path=str(path)) from exc
            except json.JSONDecodeError as exc:
                raise InvalidParameterError(f"configuration {path} is not valid JSON: {exc}",
                                            path=str(path)) from exc
            if not isinstance(data, dict):
                raise InvalidParameterError("configuration must be a JSON object")
        for text in overrides:
            keys, value = parse_override(text)
            node = data
            for k in keys[:-1]:
                node = node.setdefault(k, {})
                if not isinstance(node, dict):
                    raise InvalidParameterError(f"override {text!r} descends into a scalar")
            node[keys[-1]] = value
        return cls(data)

    # accessors ------------------------------------------------------------
    def __getitem__(self, key):
        return self.data[key]

    @property
    def psi_min_ratio(self) -> float | None:
        psi = self.data["psi"]
        if psi == "constant" or psi is None:
            return None
        if isinstance(psi, dict) and set(psi) == {"delaunay"}:
            return check_real(psi["delaunay"], "psi.delaunay", positive=True)
        raise InvalidParameterError('psi must be "constant" or {"delaunay": ratio}')

    @property
    def seed(self) -> dict[int, float]:
        return check_seed(self.data["seed"])

    @property
    def tol(self) -> dict:
        return self.data["tolerances"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    @property
    def hash(self) -> str:
        """Short SHA-256 of the canonical JSON (output directory excluded)."""
        d = {k: v for k, v in self.data.items() if k != "output_dir"}
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


def plain(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _ensure_dir(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create directory {path.parent}: {exc.strerror}",
                          path=str(path.parent)) from exc


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    _ensure_dir(path)
    try:
        path.write_text(json.dumps(plain(obj), sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}", path=str(path)) from exc
    return path


def write_csv(path: str | Path, columns: list[tuple[str, str]], rows, config_hash: str) -> Path:
    """Write rows under a ``#`` line with units and the config hash, then a header row.

    ``columns`` is a list of ``(name, unit)`` pairs.
    """
    path = Path(path)
    _ensure_dir(path)
    units = ", ".join(f"{name} [{unit}]" for name, unit in columns)
    try:
        with path.open("w", newline="") as fh:
            fh.write(f"# config_hash={config_hash}; units: {units}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([name for name, _ in columns])
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}", path=str(path)) from exc
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path: str | Path) -> tuple[dict, list[dict]]:
    """Read a file written by :func:`write_csv`; returns header metadata and rows."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc
    meta = {}
    if lines and lines[0].startswith("#"):
        head = lines.pop(0)[1:].strip()
        meta["config_hash"] = head.split(";")[0].split("=", 1)[1].strip()
    rows = list(csv.DictReader(lines))
    return meta, rows


def write_field(path: str | Path, field, meta: dict | None = None) -> Path:
    """Text serialization of a :class:`CylinderField`: metadata lines then one row per mode."""
    path = Path(path)
    _ensure_dir(path)
    g = field.grid
    header = {"t0": g.t0, "period": g.period, "steps_per_period": g.steps_per_period,
              "n_periods": g.n_periods, "modes": len(field.basis), "size": g.size}
    header.update(meta or {})
    try:
        with path.open("w") as fh:
            fh.write("# " + json.dumps(plain(header), sort_keys=True) + "\n")
            np.savetxt(fh, field.coeffs, fmt="%.17g")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}", path=str(path)) from exc
    return path


def read_field(path: str | Path, basis):
    """Inverse of :func:`write_field` for a given basis."""
    from .fields import CylinderField, FieldGrid

    path = Path(path)
    try:
        with path.open() as fh:
            header = json.loads(fh.readline()[1:])
            coeffs = np.loadtxt(fh, ndmin=2)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc
    grid = FieldGrid(header["t0"], header["period"], header["steps_per_period"],
                     header["n_periods"])
    return CylinderField(grid, basis, coeffs), header

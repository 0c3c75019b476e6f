"""CSV/JSON persistence and run manifests.

CSV numbers carry 17 significant digits; JSON uses Python's shortest
round-trip float repr. Data files contain no timestamps, so identical runs
give identical files; the manifest carries the timestamp.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import platform
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import ProblemParams
from .exceptions import DomainError
from .halfspace import SectorGrid, SolutionField, custom
from .sphere_ode import Profile


def fmt17(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path, columns: dict) -> Path:
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[n]).ravel() for n in names]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise DomainError("CSV columns must have equal length")
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([fmt17(v) for v in row])
    return path


def read_csv(path) -> dict:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    return {h: data[:, i] for i, h in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "as_dict"):
        return _jsonable(obj.as_dict())
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    return repr(obj)


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False, ensure_ascii=False)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj) + "\n", encoding="utf-8")
    return path


def profile_to_csv(profile: Profile, path) -> Path:
    return write_csv(path, {"phi": profile.phi, "omega": profile.omega, "omega_prime": profile.omega_prime})


def read_profile_csv(path) -> dict:
    data = read_csv(path)
    for name in ("phi", "omega", "omega_prime"):
        if name not in data:
            raise DomainError(f"{path}: missing column {name!r}")
    return data


def field_to_csv(fld: SolutionField, path) -> Path:
    R, PHI = fld.mesh()
    T = np.log(R)
    return write_csv(path, {"t": T, "r": R, "phi": PHI, "u": fld.u})


def read_field_csv(path, params: ProblemParams) -> SolutionField:
    """Rebuild a :class:`SolutionField` from the ``t, r, phi, u`` schema."""
    data = read_csv(path)
    for name in ("t", "r", "phi", "u"):
        if name not in data:
            raise DomainError(f"{path}: missing column {name!r}")
    r = np.unique(data["r"])
    phi = np.unique(data["phi"])
    n_t, n_phi = len(r), len(phi)
    if n_t * n_phi != len(data["u"]):
        raise DomainError(f"{path}: rows do not form a tensor grid")
    order = np.lexsort((data["phi"], data["r"]))
    u = data["u"][order].reshape(n_t, n_phi)
    grid = SectorGrid(float(r[0]), float(r[-1]), n_t, n_phi)
    return SolutionField(u=u, grid=grid, params=params, bc=custom(u[0], u[-1]))


def write_manifest(out_dir, command: str, config: dict, outputs: list, status: str = "ok",
                   extra: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "status": status,
        "config": config,
        "outputs": [str(o) for o in outputs],
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        manifest.update(extra)
    return write_json(out_dir / "manifest.json", manifest)

"""Run directories, versioned CSV tables and JSON manifests.

The manifest is written before any data file (status ``running``) and
rewritten at the end with checksums, so an interrupted run is visible as a
manifest without ``complete`` status.  CSV values are formatted with a
fixed number of significant digits, which makes reruns with the same seed
byte-identical.
"""

import csv
import hashlib
import json
import os
import platform
import time

import numpy as np
import scipy

from .._random import RNG_ALGORITHM
from ..exceptions import DomainError

# table name -> (schema version, columns)
SCHEMAS = {
    "fig1_posterior_means": (1, ["tail", "sigma", "x", "posterior_mean"]),
    "inverse_regression": (1, ["prior", "rho", "n", "band", "t", "truth", "mean", "lower", "upper"]),
    "inverse_regression_errors": (1, ["prior", "rho", "n", "l2_error", "radius"]),
    "dj94_table": (1, ["signal", "prior", "replicate", "l2_error", "snr_achieved", "acceptance"]),
    "dj94_curves": (1, ["signal", "prior", "t", "truth", "noisy", "mean", "lower", "upper"]),
    "density_estimation": (1, ["prior", "rho", "n", "x", "truth", "mean", "lower", "upper"]),
    "density_estimation_errors": (1, ["prior", "rho", "n", "l1_error", "acceptance", "beta"]),
    "classification": (1, ["prior", "rho", "n", "x", "truth", "mean", "lower", "upper"]),
    "classification_errors": (1, ["prior", "rho", "n", "l1_error", "acceptance", "beta"]),
    "rate_sweep": (1, ["model", "n", "replicate", "l2_error"]),
    "rate_slopes": (1, ["model", "slope", "intercept", "r2", "target", "window_low", "window_high", "inside"]),
    "prior_mass": (1, ["n", "eps_n", "d1", "radius", "p_hat", "ci_low", "ci_high", "ratio"]),
    "theory_suite": (1, ["check", "statistic", "value", "status"]),
}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions():
    from .. import __version__
    return {"htbnp": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class RunWriter:
    """Owns one experiment's output directory."""

    def __init__(self, out_dir, config):
        self.dir = os.path.abspath(out_dir)
        os.makedirs(self.dir, exist_ok=True)
        self.config = config
        self.outputs = {}
        self.extras = {}
        self.started = time.time()
        self.manifest_path = os.path.join(self.dir, "manifest.json")
        self._write_manifest("running")

    def _write_manifest(self, status, error=None):
        doc = {
            "experiment": self.config["experiment"],
            "status": status,
            "seed": self.config.get("seed", 0),
            "paper_scale": bool(self.config.get("paper_scale", False)),
            "config": self.config,
            "versions": versions(),
            "rng_algorithm": RNG_ALGORITHM,
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(self.started)),
            "wall_clock_s": round(time.time() - self.started, 3),
            "outputs": self.outputs,
            "extras": self.extras,
        }
        if error is not None:
            doc["error"] = error
        tmp = self.manifest_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.manifest_path)

    def write_table(self, name, rows):
        """Write ``rows`` (sequences in schema column order) to ``<name>.csv``."""
        if name not in SCHEMAS:
            raise DomainError(f"no schema registered for table {name!r}")
        version, columns = SCHEMAS[name]
        path = os.path.join(self.dir, f"{name}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            count = 0
            for row in rows:
                if len(row) != len(columns):
                    raise DomainError(f"{name}: row has {len(row)} fields, schema has {len(columns)}")
                w.writerow([_fmt(v) for v in row])
                count += 1
        self.outputs[f"{name}.csv"] = {"schema": f"{name}/v{version}", "rows": count, "sha256": sha256_file(path)}
        self._write_manifest("running")
        return path

    def write_json(self, name, payload):
        path = os.path.join(self.dir, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.outputs[f"{name}.json"] = {"sha256": sha256_file(path)}
        self._write_manifest("running")
        return path

    def finish(self):
        self._write_manifest("complete")

    def fail(self, message):
        self._write_manifest("failed", error=message)


def read_table(path):
    """Read a CSV written by :class:`RunWriter` into ``(columns, rows)`` of strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            return [], []
        rows = [r for r in reader if r]
    return columns, rows

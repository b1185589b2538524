"""Configuration files and output emitters."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .models import (matrix_polynomial, spin_field_family, three_state_config_family,
                     three_state_family, two_level_family)
from .paths import ParamPath

DEFAULT_MODEL = {"kind": "builtin:three_state", "embedding": "config"}


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _complex_entry(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if (isinstance(v, (list, tuple)) and len(v) == 2
            and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)):
        return complex(v[0], v[1])
    raise ConfigError(f"complex entries are numbers or [re, im] pairs, got {v!r}")


def parse_matrix(obj, dim, what="matrix"):
    """A dim x dim matrix whose entries are numbers or [re, im] pairs."""
    if not isinstance(obj, list) or len(obj) != dim:
        raise ConfigError(f"{what} must be a list of {dim} rows")
    rows = []
    for r in obj:
        if not isinstance(r, list) or len(r) != dim:
            raise ConfigError(f"{what} rows must have {dim} entries")
        rows.append([_complex_entry(v) for v in r])
    return np.array(rows, dtype=complex)


def parse_vector(obj, n, what="vector"):
    if not isinstance(obj, list) or len(obj) != n:
        raise ConfigError(f"{what} must be a list of {n} entries")
    return np.array([_complex_entry(v) for v in obj], dtype=complex)


def load_model(cfg):
    """Build a :class:`HamiltonianFamily` from a model configuration.

    Schema::

        {"kind": "builtin:three_state", "embedding": "canonical"|"config"}
        {"kind": "builtin:two_level", "coords": "qp"|"bloch"}
        {"kind": "builtin:spin_field"}
        {"kind": "matrix_polynomial", "dim": N, "parameters": n,
         "terms": [{"powers": [...], "matrix": [[...]]}, ...],
         "delta": 1.0, "domain": [[lo, hi], ...]}
    """
    if cfg is None:
        cfg = DEFAULT_MODEL
    if not isinstance(cfg, dict):
        raise ConfigError("model configuration must be a JSON object")
    kind = cfg.get("kind")
    if kind == "builtin:three_state":
        emb = cfg.get("embedding")
        if emb is None:
            emb = {4: "canonical", 2: "config", None: "config"}.get(cfg.get("parameters"))
        if emb == "canonical":
            return three_state_family()
        if emb == "config":
            return three_state_config_family()
        raise ConfigError(f"unknown three-state embedding {emb!r}")
    if kind == "builtin:two_level":
        coords = cfg.get("coords", "qp")
        if coords not in ("qp", "bloch"):
            raise ConfigError(f"unknown two-level coordinates {coords!r}")
        return two_level_family(coords)
    if kind == "builtin:spin_field":
        return spin_field_family()
    if kind == "matrix_polynomial":
        try:
            dim, npar = int(cfg["dim"]), int(cfg["parameters"])
            terms_cfg = cfg["terms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"matrix_polynomial needs dim, parameters, terms ({exc})") from exc
        if dim < 1 or npar < 1 or not isinstance(terms_cfg, list) or not terms_cfg:
            raise ConfigError("matrix_polynomial needs positive dim, parameters and terms")
        terms = []
        for i, t in enumerate(terms_cfg):
            if not isinstance(t, dict) or "powers" not in t or "matrix" not in t:
                raise ConfigError(f"term {i} needs 'powers' and 'matrix'")
            pw = t["powers"]
            if (not isinstance(pw, list) or len(pw) != npar
                    or not all(isinstance(k, int) and k >= 0 for k in pw)):
                raise ConfigError(f"term {i}: powers must be {npar} non-negative integers")
            M = parse_matrix(t["matrix"], dim, f"term {i} matrix")
            if np.max(np.abs(M - M.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
                raise ConfigError(f"term {i} matrix is not Hermitian")
            terms.append((pw, M))
        delta = float(cfg.get("delta", 1.0))
        if not delta > 0:
            raise ConfigError("delta must be positive")
        domain = cfg.get("domain")
        if domain is not None:
            dom = np.asarray(domain, dtype=float)
            if dom.shape != (npar, 2) or np.any(dom[:, 0] >= dom[:, 1]):
                raise ConfigError("domain must list [lo, hi] per parameter")
        return matrix_polynomial(terms, dim, npar, delta=delta, domain=domain)
    raise ConfigError(f"unknown model kind {kind!r}")


def load_path(cfg):
    return ParamPath.from_config(cfg)


def load_points(path, nparams):
    """Parameter points from a CSV file (one point per row, optional header)."""
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if i == 0:
                        continue  # header
                    raise ConfigError(f"{path}: non-numeric entry in row {i + 1}") from None
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    pts = np.array(rows, dtype=float)
    if pts.size == 0 or pts.ndim != 2 or pts.shape[1] != nparams:
        raise ConfigError(f"{path}: expected rows of {nparams} coordinates")
    return pts


def parse_times(text):
    """``start:stop:step`` (inclusive stop) or a comma list, in path units."""
    try:
        if ":" in text:
            a, b, h = (float(v) for v in text.split(":"))
            if h <= 0 or b < a:
                raise ValueError
            n = int(np.floor((b - a) / h + 1e-9)) + 1
            out = a + h * np.arange(n)
            if out[-1] < b - 1e-12 * max(1.0, abs(b)):
                out = np.append(out, b)
        else:
            out = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse times {text!r}") from None
    if np.any(np.diff(out) < 0) or out[0] < 0 or out[-1] > 1.0 + 1e-12:
        raise ConfigError("times must increase within [0, 1] (fractions of T)")
    return np.clip(out, 0.0, 1.0)


def parse_float_list(text, what):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}") from None
    if not vals or any(not (v > 0) for v in vals):
        raise ConfigError(f"{what} must be positive numbers")
    return vals


# -- output ----------------------------------------------------------------


def to_jsonable(obj):
    """numpy arrays and scalars -> lists and floats; complex -> [re, im]."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    # float repr is the shortest string that round-trips (<= 17 digits)
    return json.dumps(to_jsonable(obj), indent=1, sort_keys=False, allow_nan=True)


def write_json(path, obj):
    text = dumps(obj) + "\n"
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text, encoding="utf-8")


def fmt(v):
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    """Rows of real numbers (17 significant digits); text cells pass through."""
    if path is None or str(path) == "-":
        fh, close = sys.stdout, False
    else:
        fh, close = open(path, "w", newline="", encoding="utf-8"), True
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    finally:
        if close:
            fh.close()


def flatten(name, arr):
    """Row-major flattening of a (possibly complex) tensor into named columns."""
    arr = np.asarray(arr)
    cols, vals = [], []
    for idx in np.ndindex(*arr.shape):
        tag = name + "".join(f"[{i}]" for i in idx)
        v = arr[idx]
        if np.iscomplexobj(arr):
            cols += [tag + ".re", tag + ".im"]
            vals += [v.real, v.imag]
        else:
            cols.append(tag)
            vals.append(v)
    return cols, vals

"""Plain-text file formats for datasets, labels, models and fit results.

Dataset files are UTF-8 with LF endings. Line 1 is a one-line JSON header::

    {"format": "spatgmm-dataset", "version": "1.0", "dims": [5, 5, 5], "n": 1000,
     "coords": {"mode": "grid"}, "labels": "data.csv.labels", "generator": {...}, "meta": {...}}

followed by ``n`` lines of ``p`` comma-separated values in vectorization order.
Labels live in a sidecar with one integer per line. Floats are written with
``repr``, the shortest text that parses back to the same double.

Models and results are JSON documents. Every file carries a ``version``;
readers reject files whose major version is newer than theirs.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coords import CoordinateSystem, TensorShape, custom_coords, grid_coords
from .covariance import Family, SpatialParams
from .errors import FormatError

FORMAT_VERSION = "1.0"
DATASET_FORMAT = "spatgmm-dataset"
MODEL_FORMAT = "spatgmm-model"
RESULT_FORMAT = "spatgmm-result"


@dataclass
class Dataset:
    shape: TensorShape
    data: np.ndarray
    labels: np.ndarray | None = None
    coords: np.ndarray | None = None  # explicit coordinates; None means the subscript grid
    meta: dict = field(default_factory=dict)
    generator: dict | None = None

    def __post_init__(self):
        if not isinstance(self.shape, TensorShape):
            self.shape = TensorShape(self.shape)
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        if self.data.shape[1] != self.shape.p:
            raise ValueError(f"rows have {self.data.shape[1]} values, shape needs {self.shape.p}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("data contains non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
            if len(self.labels) != len(self.data):
                raise ValueError(f"{len(self.labels)} labels for {len(self.data)} observations")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def coords_mode(self) -> str:
        return "grid" if self.coords is None else "explicit"

    def coordinate_system(self) -> CoordinateSystem:
        if self.coords is None:
            return grid_coords(self.shape)
        return custom_coords(self.shape, self.coords)


def _check_version(doc, expected_format, path):
    if not isinstance(doc, dict) or doc.get("format") != expected_format:
        raise FormatError(f"not a {expected_format} file", path, 1)
    version = str(doc.get("version", ""))
    try:
        major = int(version.split(".")[0])
    except ValueError:
        raise FormatError(f"bad version field {version!r}", path, 1) from None
    if major > int(FORMAT_VERSION.split(".")[0]):
        raise FormatError(f"unsupported version {version} (reader supports {FORMAT_VERSION})", path, 1)


def atomic_write_text(path, text: str):
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _coords_header(ds: Dataset):
    if ds.coords is None:
        return {"mode": "grid"}
    return {"mode": "explicit", "points": np.asarray(ds.coords, dtype=np.float64).tolist()}


def labels_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".labels")


def write_labels(path, labels):
    labels = np.asarray(labels, dtype=np.int64).ravel()
    atomic_write_text(path, "".join(f"{int(v)}\n" for v in labels))


def read_labels(path) -> np.ndarray:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                out.append(int(text))
            except ValueError:
                raise FormatError(f"expected an integer label, got {text!r}", path, lineno) from None
    return np.array(out, dtype=np.int64)


def write_dataset(path, ds: Dataset, labels_path=None):
    """Write ``ds`` (and its labels sidecar, if it has labels)."""
    path = Path(path)
    sidecar = None
    if ds.labels is not None:
        sidecar = Path(labels_path) if labels_path is not None else labels_path_for(path)
    header = {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "dims": list(ds.shape.dims),
        "n": ds.n,
        "coords": _coords_header(ds),
        "labels": None if sidecar is None else os.path.relpath(sidecar, path.parent),
        "generator": ds.generator,
        "meta": ds.meta,
    }
    lines = [json.dumps(header, separators=(", ", ": "))]
    lines.extend(",".join(map(repr, row)) for row in ds.data.tolist())
    if sidecar is not None:
        write_labels(sidecar, ds.labels)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_dataset(path, with_labels: bool = True) -> Dataset:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise FormatError(f"malformed header: {exc.msg}", path, 1) from None
        _check_version(header, DATASET_FORMAT, path)
        try:
            shape = TensorShape(header["dims"])
            n = int(header["n"])
            coords_doc = header.get("coords") or {"mode": "grid"}
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed header: {exc}", path, 1) from None
        p = shape.p
        data = np.empty((n, p))
        row = 0
        for lineno, line in enumerate(fh, start=2):
            text = line.rstrip("\n").rstrip("\r")
            if not text.strip():
                continue
            if row >= n:
                raise FormatError(f"more data rows than the declared n={n}", path, lineno)
            parts = text.split(",")
            if len(parts) != p:
                raise FormatError(f"row {row + 1} has {len(parts)} values, expected {p}", path, lineno)
            try:
                vals = [float(v) for v in parts]
            except ValueError:
                raise FormatError(f"row {row + 1} has a non-numeric value", path, lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise FormatError(f"row {row + 1} has a non-finite value", path, lineno)
            data[row] = vals
            row += 1
    if row != n:
        raise FormatError(f"found {row} data rows, header declares n={n}", path)
    mode = coords_doc.get("mode", "grid")
    if mode == "grid":
        coords = None
    elif mode == "explicit":
        coords = np.asarray(coords_doc.get("points"), dtype=np.float64)
    else:
        raise FormatError(f"unknown coordinate mode {mode!r}", path, 1)
    labels = None
    if with_labels and header.get("labels"):
        lp = path.parent / header["labels"]
        if lp.exists():
            labels = read_labels(lp)
            if len(labels) != n:
                raise FormatError(f"{len(labels)} labels for {n} observations", lp)
    return Dataset(
        shape=shape,
        data=data,
        labels=labels,
        coords=coords,
        meta=header.get("meta") or {},
        generator=header.get("generator"),
    )


def model_to_dict(model) -> dict:
    from .mixture import BaselineModel

    if isinstance(model, BaselineModel):
        return {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "kind": "full",
            "G": model.G,
            "p": model.p,
            "pi": model.pi.tolist(),
            "mu": model.mu.tolist(),
            "cov": np.asarray(model.cov).tolist(),
        }
    cs = model.cs
    coords = {"mode": "grid"} if cs.mode == "grid" else {"mode": "explicit", "points": cs.coords.tolist()}
    return {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "kind": "spatial",
        "G": model.G,
        "dims": list(cs.shape.dims),
        "coords": coords,
        "family": model.family.value,
        "constrained": model.constrained,
        "pi": model.pi.tolist(),
        "mu": model.mu.tolist(),
        "spatial": [sp.to_dict() for sp in model.spatial],
    }


def model_from_dict(doc: dict, path=None):
    """Rebuild a model; raises ``NotPositiveDefiniteError`` if a covariance is not PD."""
    from .mixture import BaselineModel, MixtureModel

    _check_version(doc, MODEL_FORMAT, path)
    try:
        if doc.get("kind") == "full":
            model = BaselineModel(
                pi=np.asarray(doc["pi"], dtype=np.float64),
                mu=np.asarray(doc["mu"], dtype=np.float64),
                cov=np.asarray(doc["cov"], dtype=np.float64),
            )
            model.factors  # noqa: B018  validates positive definiteness
            return model
        shape = TensorShape(doc["dims"])
        coords_doc = doc.get("coords") or {"mode": "grid"}
        if coords_doc.get("mode") == "explicit":
            cs = custom_coords(shape, coords_doc["points"])
        else:
            cs = grid_coords(shape)
        family = Family(doc.get("family", "sigmoid"))
        spatial = [SpatialParams(**{**sp, "family": sp.get("family", family.value)}) for sp in doc["spatial"]]
        pi = np.asarray(doc["pi"], dtype=np.float64)
        mu = np.asarray(doc["mu"], dtype=np.float64)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed model document: {exc}", path) from None
    return MixtureModel(pi, mu, spatial, cs, bool(doc.get("constrained", False)))


def write_model(path, model):
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def read_model(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON: {exc.msg}", path, exc.lineno) from None
    return model_from_dict(doc, path)


def result_to_dict(result, n: int | None = None) -> dict:
    return {
        "format": RESULT_FORMAT,
        "version": FORMAT_VERSION,
        "loglik": result.loglik,
        "bic": result.bic,
        "bic_convention": "2*loglik - k*log(N), higher is better",
        "k": result.n_params,
        "n": n if n is not None else int(result.resp.shape[0]),
        "iterations": result.iterations,
        "converged": result.converged,
        "loglik_trace": list(result.loglik_trace),
        "hard_labels": result.hard_labels.tolist(),
        "diagnostics": result.diagnostics,
        "model": model_to_dict(result.model),
    }


def write_result(path, result):
    atomic_write_text(path, json.dumps(result_to_dict(result), indent=1) + "\n")


def read_result(path) -> dict:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    _check_version(doc, RESULT_FORMAT, path)
    return doc

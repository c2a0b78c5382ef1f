"""Plain-text containers: models, datasets, predictions and CSV reports.

Every file starts with a ``cganuc-<kind> v<N>`` line.  Floats are written so
that they read back bit-identically: ``float.hex`` in model files, ``repr``
elsewhere.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from cganuc.data import DataError, SupervisedDataset
from cganuc.networks import DiscriminatorSpec, GeneratorSpec, ModelBundle

MODEL_TAG = "cganuc-model v1"
DATASET_TAG = "cganuc-dataset v1"
PREDICTIONS_TAG = "cganuc-predictions v1"


class FormatError(ValueError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# -- models -----------------------------------------------------------------

def model_to_text(model: ModelBundle) -> str:
    body = [f"header {_dumps(model.header())}"]
    for name in sorted(model.params):
        arr = model.params[name]
        body.append(f"param {name} {'x'.join(str(d) for d in arr.shape)}")
        body.append(" ".join(float(v).hex() for v in arr.reshape(-1)))
    body.append("end")
    payload = "\n".join(body) + "\n"
    digest = hashlib.sha256(payload.encode()).hexdigest()
    return f"{MODEL_TAG}\nsha256 {digest}\n{payload}"


def model_from_text(text: str) -> ModelBundle:
    lines = text.split("\n")
    if not lines or lines[0] != MODEL_TAG:
        raise FormatError(f"not a model file (expected {MODEL_TAG!r} first line)")
    if len(lines) < 3 or not lines[1].startswith("sha256 "):
        raise FormatError("missing checksum line")
    payload = "\n".join(lines[2:])
    if hashlib.sha256(payload.encode()).hexdigest() != lines[1].split(" ", 1)[1]:
        raise FormatError("checksum mismatch: model file is corrupted")
    try:
        return _parse_model_body(lines[2:])
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model file: {exc}") from None


def _parse_model_body(body: list[str]) -> ModelBundle:
    if not body[0].startswith("header "):
        raise FormatError("missing header line")
    header = json.loads(body[0][len("header "):])
    params = {}
    i = 1
    while body[i] != "end":
        tag, name, dims = body[i].split(" ")
        if tag != "param":
            raise FormatError(f"unexpected line {body[i]!r}")
        shape = tuple(int(d) for d in dims.split("x"))
        values = [float.fromhex(v) for v in body[i + 1].split(" ")]
        params[name] = np.array(values, dtype=np.float64).reshape(shape)
        i += 2
    gen = header["generator"]
    disc = header["discriminator"]
    model = ModelBundle(
        header["task"],
        GeneratorSpec(**{**gen, "hidden": tuple(gen["hidden"])}),
        DiscriminatorSpec(**{
            **disc,
            "hidden": tuple(disc["hidden"]),
            "phi_hidden": None if disc.get("phi_hidden") is None else tuple(disc["phi_hidden"]),
        }),
        params,
        header["condition"],
        [tuple(r) for r in header.get("target_range", [])],
        header.get("config", {}),
    )
    expected = {**model.generator.shapes(), **model.discriminator.shapes()}
    got = {k: v.shape for k, v in params.items()}
    if got != expected:
        raise FormatError("parameter shapes do not match the architecture in the header")
    return model


def save_model(model: ModelBundle, path) -> None:
    Path(path).write_text(model_to_text(model))


def load_model(path) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    return model_from_text(path.read_text())


# -- datasets ----------------------------------------------------------------

def save_dataset(ds: SupervisedDataset, path) -> None:
    meta = {"p": ds.p, "q": ds.q, "n": ds.n, "split": ds.split}
    cols = [f"x{i}" for i in range(ds.p)] + [f"y{j}" for j in range(ds.q)]
    aux_names = sorted(ds.aux)
    if ds.ids is not None:
        cols.append("id")
    cols += [f"aux:{a}" for a in aux_names]
    buf = io.StringIO()
    buf.write(f"# {DATASET_TAG}\n")
    buf.write(f"# meta {_dumps(meta)}\n")
    buf.write(f"# note {ds.note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i in range(ds.n):
        row = [repr(float(v)) for v in ds.inputs[i]] + [repr(float(v)) for v in ds.targets[i]]
        if ds.ids is not None:
            row.append(ds.ids[i])
        row += [repr(float(ds.aux[a][i])) for a in aux_names]
        w.writerow(row)
    Path(path).write_text(buf.getvalue())


def load_dataset(path) -> SupervisedDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    lines = path.read_text().split("\n")
    if lines[0] != f"# {DATASET_TAG}":
        raise FormatError(f"{path}: not a dataset file")
    meta = json.loads(lines[1][len("# meta "):])
    note = lines[2][len("# note "):]
    reader = csv.reader(lines[3:])
    cols = next(reader)
    p, q = meta["p"], meta["q"]
    rows = [r for r in reader if r]
    if len(rows) != meta["n"]:
        raise DataError(f"{path}: header says {meta['n']} rows, found {len(rows)}")
    try:
        x = np.array([[float(v) for v in r[:p]] for r in rows]).reshape(len(rows), p)
        y = np.array([[float(v) for v in r[p:p + q]] for r in rows]).reshape(len(rows), q)
    except ValueError as exc:
        raise DataError(f"{path}: malformed value ({exc})") from None
    ids = None
    rest = cols[p + q:]
    offset = p + q
    if rest and rest[0] == "id":
        ids = [r[offset] for r in rows]
        rest, offset = rest[1:], offset + 1
    aux = {c[len("aux:"):]: np.array([float(r[offset + j]) for r in rows]) for j, c in enumerate(rest)}
    return SupervisedDataset(x, y, meta["split"], note, ids, aux)


# -- reports -----------------------------------------------------------------

def write_csv(path, kind: str, config: dict, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with a format line and a resolved-config line (both ``#``-prefixed) before the header."""
    buf = io.StringIO()
    buf.write(f"# cganuc-{kind} v1\n")
    buf.write(f"# config {_dumps(config)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[str, dict, list[dict]]:
    lines = Path(path).read_text().split("\n")
    if not lines[0].startswith("# cganuc-"):
        raise FormatError(f"{path}: missing format line")
    kind = lines[0][len("# cganuc-"):].split(" ")[0]
    config = json.loads(lines[1][len("# config "):])
    rows = list(csv.DictReader([ln for ln in lines[2:] if ln]))
    return kind, config, rows


def prediction_record(i, pred, emit_distributions: bool = False) -> dict:
    rec = {"id": i, "point": [float(v) for v in pred.point], "eta": [float(v) for v in pred.uncertainty.values]}
    if pred.predicted_class is not None:
        rec["class"] = pred.predicted_class
    if emit_distributions:
        rec["edges"] = [d.edges.tolist() for d in pred.distributions]
        rec["mass"] = [d.mass.tolist() for d in pred.distributions]
    return rec


def write_predictions(path, preds, config: dict, ids=None, emit_distributions: bool = False) -> None:
    out = [_dumps({"format": PREDICTIONS_TAG, "config": config})]
    for i, pred in enumerate(preds):
        out.append(_dumps(prediction_record(ids[i] if ids else i, pred, emit_distributions)))
    Path(path).write_text("\n".join(out) + "\n")


def read_predictions(path) -> tuple[dict, list[dict]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"predictions file not found: {path}")
    lines = [ln for ln in path.read_text().split("\n") if ln]
    head = json.loads(lines[0])
    if head.get("format") != PREDICTIONS_TAG:
        raise FormatError(f"{path}: not a predictions file")
    return head["config"], [json.loads(ln) for ln in lines[1:]]

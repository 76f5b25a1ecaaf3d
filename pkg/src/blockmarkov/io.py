"""File formats: model files, fit reports, sequences, EFRD and summary CSVs.

Model and report files are UTF-8 JSON with sorted keys, so they diff
cleanly; floats are written in Python's shortest round-trip repr.  Every
file carries ``FORMAT_VERSION``.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .markov import PartitionedModel
from .rle import EfrdTable, RunLengthSequence, encode, parse_rle_text

FORMAT_VERSION = 1

EFRD_HEADER = ("m", "pr_efr", "samples")
SUMMARY_HEADER = ("cell", "pe_measured", "pe_model", "efrd_max_dev", "iterations", "loglik")


class FormatError(ValueError):
    pass


def model_to_dict(model: PartitionedModel, initial=None) -> dict:
    out = {
        "version": FORMAT_VERSION,
        "alphabet": list(model.alphabet.symbols),
        "partition": list(model.partition.counts),
        "kind": model.kind,
        "transition": [[float(x) for x in row] for row in model.transition],
    }
    if model.stationary is not None:
        out["stationary"] = [float(x) for x in model.stationary]
    if initial is not None:
        out["initial"] = [float(x) for x in initial]
    return out


def model_from_dict(data: dict) -> tuple:
    """Return ``(model, initial)``; ``initial`` is None unless the file stores one."""
    try:
        version = data.get("version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported model file version {version}")
        model = PartitionedModel.build(
            data["alphabet"], data["partition"], data["transition"],
            stationary=data.get("stationary"), kind=data.get("kind"))
    except KeyError as exc:
        raise FormatError(f"model file is missing field {exc}") from None
    initial = data.get("initial")
    if initial is not None:
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (model.n_states,) or initial.min() < 0 or abs(initial.sum() - 1) > 1e-9:
            raise FormatError("field 'initial' is not a probability vector over the states")
    return model, initial


def dumps(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def model_to_text(model: PartitionedModel, initial=None) -> str:
    return dumps(model_to_dict(model, initial))


def read_model(path) -> tuple:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a model file ({exc})") from None
    return model_from_dict(data)


def load_model(path) -> PartitionedModel:
    return read_model(path)[0]


def fit_report_to_dict(report, rng: str | None = None) -> dict:
    out = {
        "version": FORMAT_VERSION,
        "initial_model": model_to_dict(report.initial_model),
        "final_model": model_to_dict(report.final_model, report.final_initial),
        "trace": [float(x) for x in report.loglik_trace],
        "iterations": report.iterations,
        "converged": report.converged,
        "stop_reason": report.stop_reason,
        "stationary_pi": report.stationary_pi,
        "counters": report.counters.as_dict(),
    }
    if rng is not None:
        out["rng"] = rng
    return out


def parse_sequence(text: str, alphabet=None) -> RunLengthSequence:
    """Parse a sequence file body: plain symbols, or ``sym^count`` tokens."""
    if "^" in text:
        return parse_rle_text(text, alphabet) if alphabet else parse_rle_text(text)
    body = "".join(text.split())
    if not body:
        raise FormatError("sequence file is empty")
    return encode(body, alphabet) if alphabet else encode(body)


def read_sequence(path, alphabet=None) -> RunLengthSequence:
    return parse_sequence(Path(path).read_text(encoding="ascii"), alphabet)


def efrd_to_csv(table: EfrdTable, label: str = "") -> str:
    buf = io.StringIO()
    buf.write(f"# version: {FORMAT_VERSION}\n")
    if label:
        buf.write(f"# source: {label}\n")
    buf.write("# pr_efr(m) = Pr(0^m | 1): share of error positions (final symbol excluded)"
              " followed by at least m error-free symbols\n")
    buf.write(f"# samples(m) = number of such positions; conditioning positions = {table.sample_count}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EFRD_HEADER)
    for m, (v, n) in enumerate(zip(table.values, table.exceed)):
        w.writerow((m, repr(float(v)), int(n)))
    return buf.getvalue()


def read_efrd_csv(path) -> EfrdTable:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if tuple(rows[0]) != EFRD_HEADER:
        raise FormatError(f"unexpected EFRD header {rows[0]}")
    values = np.array([float(r[1]) for r in rows[1:]])
    exceed = np.array([int(r[2]) for r in rows[1:]])
    return EfrdTable(values, exceed, int(exceed[0]))


def summary_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(f"# version: {FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([r[k] if isinstance(r[k], (str, int)) else repr(float(r[k])) for k in SUMMARY_HEADER])
    return buf.getvalue()


def commit_files(files: dict) -> None:
    """Write ``{path: str | bytes}`` so that either every file lands or none does.

    All contents go to temporary files next to their targets first; the
    renames happen only once every temporary file is complete.
    """
    staged = []
    try:
        for path, content in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
            staged.append((tmp, path))
            with os.fdopen(fd, "wb") as fh:
                fh.write(content.encode("utf-8") if isinstance(content, str) else content)
        for tmp, path in staged:
            os.replace(tmp, path)
        staged = []
    finally:
        for tmp, _ in staged:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass

"""CSV/metadata writers and readers for run and ensemble bundles.

Every CSV starts with a ``# config_hash=<hex> master_seed=<int> ...`` line,
followed by a single header row. Floats are written with ``repr`` so that
reading a file back gives the exact same doubles.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .metrics import FinalState, Histogram

TIMESERIES_COLUMNS = (
    "round", "mean_abs_opinion", "mean_opinion",
    "S", "H", "I", "M", "R",
    "active_rumors", "created", "expired", "approvals", "refutations",
)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(tag: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {tag}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, tag: str, header, rows) -> None:
    atomic_write(path, render_csv(tag, header, rows))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def timeseries_rows(result):
    normal = ~result.is_influencer
    for tr in result.traces:
        o = tr.opinions[normal]
        totals = tr.compartment_totals if len(tr.counts) else np.zeros(5, dtype=int)
        d = tr.decisions[:, 2] if len(tr.decisions) else np.zeros(0)
        yield (
            tr.t, float(np.mean(np.abs(o))), float(np.mean(o)), *map(int, totals),
            len(tr.rumor_ids) - len(tr.expired), len(tr.created), len(tr.expired),
            int((d > 0).sum()), int((d < 0).sum()),
        )


def write_final_state(out_dir, run_index: int, tag: str, state: FinalState) -> None:
    out_dir = Path(out_dir)
    roles = np.where(state.is_influencer, "influencer", "normal")
    write_csv(out_dir / f"final_opinions_run{run_index}.csv", tag,
              ("agent", "role", "opinion"),
              ((n, roles[n], state.opinions[n]) for n in range(len(state.opinions))))
    n = len(state.opinions)
    write_csv(out_dir / f"final_weights_run{run_index}.csv", tag,
              ("from", *(f"to_{j}" for j in range(n))),
              ((m, *state.weights[m]) for m in range(n)))


def read_final_state(out_dir, run_index: int) -> FinalState:
    out_dir = Path(out_dir)
    _, rows = read_csv(out_dir / f"final_opinions_run{run_index}.csv")
    opinions = np.array([float(r[2]) for r in rows])
    is_inf = np.array([r[1] == "influencer" for r in rows])
    _, wrows = read_csv(out_dir / f"final_weights_run{run_index}.csv")
    weights = np.array([[float(x) for x in r[1:]] for r in wrows])
    return FinalState(opinions, weights, is_inf)


def write_histogram(path, tag: str, hist: Histogram) -> None:
    rows = zip(hist.edges[:-1], hist.edges[1:], hist.counts, hist.densities)
    write_csv(path, tag, ("lo", "hi", "count", "density"), rows)

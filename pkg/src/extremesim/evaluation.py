"""Ranking metric, relative objective and convergence-trace CSV files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, ValidationError

TRACE_HEADER = ["pass", "step", "wall_time_s", "objective", "rel_obj", "step_size", "n_ls", "n_cg", "map_at_5"]


@dataclass
class TraceRecord:
    """One logged optimiser iteration (or data pass for stochastic methods).

    ``objective_before`` and ``slope`` (s'grad) are kept in memory so the
    sufficient-decrease condition can be re-checked; they are not written
    to the CSV.
    """

    pass_index: int
    step_index: int
    wall_time_s: float
    objective: float
    step_size: float
    n_line_search: int = 0
    n_cg: int = 0
    map_at_5: Optional[float] = None
    objective_before: Optional[float] = None
    slope: Optional[float] = None


def _ranked_hits(scores, relevant, excluded, k):
    """Boolean (rows, k) array: is the item at each of the top-k ranks relevant."""
    s = np.array(scores, dtype=np.float64, copy=True)
    s[excluded] = -np.inf
    # stable sort on -score: ties keep ascending item index
    order = np.argsort(-s, axis=1, kind="stable")[:, :k]
    taken = np.take_along_axis(relevant, order, axis=1)
    valid = ~np.take_along_axis(excluded, order, axis=1)
    return taken & valid


def _ap_terms(hits, k):
    # cumulative hits at cut-offs 1..k, each scaled by 1/K, averaged over K
    cum = np.cumsum(hits, axis=1)
    if cum.shape[1] < k:
        # fewer than k candidates: the top-K set stops growing
        cum = np.pad(cum, ((0, 0), (0, k - cum.shape[1])), mode="edge")
    return (cum / np.arange(1, k + 1)).sum(axis=1) / k


def map_at_k(scores, test, k=5, exclude=None):
    """MAP@k of a dense score matrix against the test pairs.

    Only left entities with at least one test pair are averaged. Items in
    ``exclude`` (typically the training pairs) are dropped from each
    candidate list before truncation.
    """
    scores = np.asarray(scores, dtype=np.float64)
    return map_at_k_blocks(lambda s, e: scores[s:e], scores.shape, test, k, exclude)


def map_at_k_embeddings(P, Q, test, k=5, exclude=None, block=1024):
    """MAP@k for scores ``P @ Q.T`` computed ``block`` rows at a time."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    return map_at_k_blocks(lambda s, e: P[s:e] @ Q.T, (P.shape[0], Q.shape[0]), test, k, exclude, block)


def map_at_k_blocks(score_rows, shape, test, k=5, exclude=None, block=1024):
    if k < 1:
        raise ValidationError("k must be at least 1")
    m, n = shape
    if test.shape != (m, n):
        raise ValidationError(f"test set shape {test.shape} does not match scores {shape}")
    if exclude is not None and exclude.shape != (m, n):
        raise ValidationError("exclude set shape does not match scores")
    users = np.flatnonzero(test.row_counts() > 0)
    if users.size == 0:
        raise ValidationError("MAP is undefined: no left entity has test pairs")
    kk = min(k, n)
    total = 0.0
    test_csr = test.csr
    excl_csr = exclude.csr if exclude is not None else None
    for s in range(0, m, block):
        e = min(s + block, m)
        sel = users[(users >= s) & (users < e)]
        if sel.size == 0:
            continue
        sc = score_rows(s, e)[sel - s]
        relevant = _explicit_pattern(test_csr, sel)
        if excl_csr is not None:
            excluded = _explicit_pattern(excl_csr, sel)
            # a test item also present in the exclusion set stays rankable
            excluded &= ~relevant
        else:
            excluded = np.zeros_like(relevant)
        hits = _ranked_hits(sc, relevant, excluded, kk)
        total += float(_ap_terms(hits, k).sum())
    return total / users.size


def _explicit_pattern(csr, sel):
    """Sparsity pattern (not values) of the selected rows as a dense bool array."""
    out = np.zeros((sel.size, csr.shape[1]), dtype=bool)
    for r, i in enumerate(sel):
        out[r, csr.indices[csr.indptr[i] : csr.indptr[i + 1]]] = True
    return out


def relative_objective(value, best):
    """(L - L*) / L*."""
    if not best > 0:
        raise ValidationError("reference objective must be positive")
    return (value - best) / best


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_trace(records, path, best=None):
    """CSV trace with the fixed header; ``best`` fills the rel_obj column."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for r in records:
                rel = relative_objective(r.objective, best) if best is not None else None
                w.writerow(
                    [
                        _fmt(r.pass_index),
                        _fmt(r.step_index),
                        _fmt(r.wall_time_s),
                        _fmt(r.objective),
                        _fmt(rel),
                        _fmt(r.step_size),
                        _fmt(r.n_line_search),
                        _fmt(r.n_cg),
                        _fmt(r.map_at_5),
                    ]
                )
    except OSError as exc:
        raise DataError(f"cannot write trace {path}: {exc}") from exc


def read_trace(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise DataError(f"{path}: unexpected trace header {header}")
        out = []
        for row in reader:
            out.append(
                TraceRecord(
                    pass_index=int(row[0]),
                    step_index=int(row[1]),
                    wall_time_s=float(row[2]),
                    objective=float(row[3]),
                    step_size=float(row[5]),
                    n_line_search=int(row[6]),
                    n_cg=int(row[7]),
                    map_at_5=float(row[8]) if row[8] else None,
                )
            )
    return out


def objective_at_time(records, t):
    """Objective of the last record logged no later than wall time ``t``."""
    best = math.nan
    for r in records:
        if r.wall_time_s <= t:
            best = r.objective
    return best

"""Discrete DBN abstraction: one conditional probability table per dimension.

Table ``T_j`` is indexed by the bin indices of ``j``'s parents followed by
the child outcome; the last child column is the absorbing outcome.  Rows
for absorbed parents are not stored: they put all mass on the absorbing
outcome and :meth:`Cpd.row` synthesizes them.
"""
from __future__ import annotations

import io
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ResourceCapError, ValidationError
from .model import ProcessModel, SafeSet, adaptive_simpson, build_linear_gaussian, gaussian_mass
from .partition import ABSORBED, GridPartition, grid_partition

NEGATIVE_MASS_TOL = 1e-9
DEFAULT_TABLE_CAP = 10**8

MAGIC = b"DBNA"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Cpd:
    dim: int
    parents: tuple[int, ...]
    table: np.ndarray

    @property
    def transitions(self) -> np.ndarray:
        """Table restricted to non-absorbing child outcomes."""
        return self.table[..., :-1]

    def row(self, parent_bins) -> np.ndarray:
        parent_bins = tuple(int(b) for b in parent_bins)
        if len(parent_bins) != len(self.parents):
            raise ValidationError(f"T{self.dim + 1} needs {len(self.parents)} parent bins")
        if any(b == ABSORBED for b in parent_bins):
            out = np.zeros(self.table.shape[-1])
            out[-1] = 1.0
            return out
        return self.table[parent_bins].copy()


@dataclass(frozen=True, eq=False)
class DiscreteDbn:
    partition: GridPartition
    parents: tuple[tuple[int, ...], ...]
    cpds: tuple[Cpd, ...]
    model: ProcessModel | None = None

    def __post_init__(self):
        counts = self.partition.counts
        if len(self.cpds) != self.n or len(self.parents) != self.n:
            raise ValidationError("need one CPD and parent list per dimension")
        for j, cpd in enumerate(self.cpds):
            expected = tuple(counts[i] for i in self.parents[j]) + (counts[j] + 1,)
            if cpd.parents != self.parents[j] or cpd.table.shape != expected:
                raise ValidationError(f"T{j + 1} has shape {cpd.table.shape}, expected {expected}")

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def counts(self) -> tuple[int, ...]:
        return self.partition.counts

    @property
    def safe_set(self) -> SafeSet:
        return self.partition.safe_set


def _finish_rows(raw: np.ndarray, j: int) -> np.ndarray:
    """Append the absorbing column and repair tiny negative remainders."""
    absorbing = 1.0 - raw.sum(axis=-1)
    if np.any(absorbing < -NEGATIVE_MASS_TOL):
        worst = float(absorbing.min())
        raise ValidationError(f"T{j + 1}: bin masses exceed one by {-worst:.3g}; quadrature is unreliable")
    table = np.concatenate([raw, absorbing[..., None]], axis=-1)
    clamped = absorbing < 0
    if np.any(clamped):
        table[clamped, -1] = 0.0
        table[clamped] /= table[clamped].sum(axis=-1, keepdims=True)
    return table


def build_cpd(model: ProcessModel, partition: GridPartition, j: int, table_cap: int = DEFAULT_TABLE_CAP) -> Cpd:
    """Conditional table of dimension ``j`` at the parents' representative points."""
    parents = model.parents[j]
    counts = partition.counts
    shape = tuple(counts[i] for i in parents)
    size = int(np.prod(shape, dtype=object)) * (counts[j] + 1)
    if size > table_cap:
        raise ResourceCapError(f"T{j + 1} would hold {size} entries, above the cap of {table_cap}")
    edges = partition.dims[j].edges

    if model.is_linear_gaussian:
        mean = np.zeros(shape)
        for axis, i in enumerate(parents):
            bshape = [1] * len(shape)
            bshape[axis] = counts[i]
            mean = mean + model.phi[j, i] * partition.dims[i].centers.reshape(bshape)
        raw = gaussian_mass(edges[:-1], edges[1:], mean[..., None], model.sigma[j])
    else:
        pdf = model.kernels[j].pdf
        raw = np.empty(shape + (counts[j],))
        for idx in np.ndindex(*shape):
            vals = tuple(float(partition.dims[i].centers[b]) for i, b in zip(parents, idx))

            def f(x, vals=vals):
                return max(0.0, float(pdf(x, vals)))

            for k in range(counts[j]):
                raw[idx + (k,)] = adaptive_simpson(f, edges[k], edges[k + 1])
    table = _finish_rows(raw, j)
    table.setflags(write=False)
    return Cpd(dim=j, parents=parents, table=table)


def build_dbn(model: ProcessModel, A: SafeSet, counts, workers: int = 1, table_cap: int = DEFAULT_TABLE_CAP) -> DiscreteDbn:
    """Grid the safe set and tabulate every CPD.

    CPDs of different dimensions are independent; ``workers > 1`` builds
    them on a thread pool with identical results.
    """
    if A.n != model.n:
        raise ValidationError(f"safe set has dimension {A.n}, model has {model.n}")
    partition = grid_partition(A, counts)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cpds = tuple(pool.map(lambda j: build_cpd(model, partition, j, table_cap), range(model.n)))
    else:
        cpds = tuple(build_cpd(model, partition, j, table_cap) for j in range(model.n))
    return DiscreteDbn(partition=partition, parents=model.parents, cpds=cpds, model=model)


def count_marginals(parents, counts, include_absorbing: bool = False) -> int:
    """``sum_j (n_j + a) prod_{i in Pa(j)} (n_i + a)`` with ``a = 1`` when counting absorbing outcomes."""
    a = 1 if include_absorbing else 0
    total = 0
    for j, pa in enumerate(parents):
        term = counts[j] + a
        for i in pa:
            term *= counts[i] + a
        total += term
    return total


def marginal_count(dbn: DiscreteDbn, include_absorbing: bool = False) -> int:
    return count_marginals(dbn.parents, dbn.counts, include_absorbing)


# --- binary dump --------------------------------------------------------------


def _model_payload(model: ProcessModel | None) -> dict | None:
    if model is None or not model.is_linear_gaussian:
        return None
    return {
        "phi": {"triplets": [[i, j, v] for i, j, v in model.phi_triplets]},
        "sigma": [float(s) for s in model.sigma],
    }


def dumps_dbn(dbn: DiscreteDbn, metadata: dict | None = None) -> bytes:
    """Serialize to the little-endian ``DBNA`` layout.

    Header, bin counts, edges, parent lists and tables come first; a
    length-prefixed UTF-8 JSON trailer carries the model (linear-Gaussian
    only) and caller metadata.
    """
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, dbn.n))
    buf.write(struct.pack(f"<{dbn.n}Q", *dbn.counts))
    for dim in dbn.partition.dims:
        buf.write(dim.edges.astype("<f8").tobytes())
    for pa in dbn.parents:
        buf.write(struct.pack(f"<I{len(pa)}I", len(pa), *pa))
    for cpd in dbn.cpds:
        buf.write(np.ascontiguousarray(cpd.table, dtype="<f8").tobytes())
    trailer = json.dumps({"model": _model_payload(dbn.model), "metadata": metadata or {}}, sort_keys=True).encode()
    buf.write(struct.pack("<Q", len(trailer)))
    buf.write(trailer)
    return buf.getvalue()


def loads_dbn(data: bytes) -> tuple[DiscreteDbn, dict]:
    view = memoryview(data)
    pos = 0

    def take(nbytes):
        nonlocal pos
        if pos + nbytes > len(view):
            raise ValidationError("abstraction dump is truncated")
        chunk = view[pos : pos + nbytes]
        pos += nbytes
        return chunk

    if bytes(take(4)) != MAGIC:
        raise ValidationError("not an abstraction dump (bad magic)")
    version, n = struct.unpack("<II", take(8))
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported dump version {version}")
    counts = struct.unpack(f"<{n}Q", take(8 * n))
    edges = [np.frombuffer(take(8 * (c + 1)), dtype="<f8").astype(float) for c in counts]
    parents = []
    for _ in range(n):
        (k,) = struct.unpack("<I", take(4))
        parents.append(tuple(struct.unpack(f"<{k}I", take(4 * k))))
    cpds = []
    for j, pa in enumerate(parents):
        shape = tuple(counts[i] for i in pa) + (counts[j] + 1,)
        size = int(np.prod(shape, dtype=np.int64))
        table = np.frombuffer(take(8 * size), dtype="<f8").astype(float).reshape(shape)
        table.setflags(write=False)
        cpds.append(Cpd(dim=j, parents=pa, table=table))
    (tlen,) = struct.unpack("<Q", take(8))
    try:
        trailer = json.loads(bytes(take(tlen)).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"abstraction dump has a corrupt trailer: {exc}") from None
    if pos != len(view):
        raise ValidationError("trailing bytes after abstraction dump")

    from .partition import DimensionPartition

    dims = tuple(DimensionPartition(e, 0.5 * (e[:-1] + e[1:])) for e in edges)
    payload = trailer.get("model")
    model = build_linear_gaussian(payload["phi"], payload["sigma"]) if payload else None
    dbn = DiscreteDbn(GridPartition(dims), tuple(parents), tuple(cpds), model)
    return dbn, trailer.get("metadata", {})


def dump_dbn(dbn: DiscreteDbn, path, metadata: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_dbn(dbn, metadata))


def load_dbn(path) -> tuple[DiscreteDbn, dict]:
    with open(path, "rb") as fh:
        return loads_dbn(fh.read())

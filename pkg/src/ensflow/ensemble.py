"""Ensemble forecasts: data model, CSV/JSON I/O and a synthetic generator."""

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicatePositionError,
    InsufficientMembersError,
    InvalidGeometryError,
    ParseError,
    RaggedEnsembleError,
)
from .kernels import KernelConfig, as_positions, gram


def vectorize(flows):
    """``(N, 2)`` flow vectors -> ``[u1, v1, ..., uN, vN]``."""
    return np.asarray(flows, dtype=float).reshape(-1)


def devectorize(eta):
    eta = np.asarray(eta, dtype=float)
    if eta.ndim != 1 or eta.size % 2:
        raise ValueError(f"expected an even-length vector, got shape {eta.shape}")
    return eta.reshape(-1, 2)


def _freeze(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class EnsembleForecast:
    """``N_E`` members, each a set of flow vectors on the shared positions.

    Attributes
    ----------
    positions : ndarray, shape (N_V, 2)
    flows : ndarray, shape (N_E, N_V, 2)
    member_ids : tuple of str
    metadata : dict
        Preserved verbatim through load/save; never interpreted.
    """

    positions: np.ndarray
    flows: np.ndarray
    member_ids: tuple = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        P = as_positions(self.positions)
        F = np.asarray(self.flows, dtype=float)
        if F.ndim != 3 or F.shape[2] != 2 or F.shape[0] < 1:
            raise ValueError(f"flows must have shape (N_E, N_V, 2), got {F.shape}")
        if F.shape[1] != P.shape[0]:
            raise RaggedEnsembleError(
                f"members carry {F.shape[1]} flow vectors but there are {P.shape[0]} positions"
            )
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(F))):
            raise ValueError("positions and flows must be finite")
        if np.unique(P, axis=0).shape[0] != P.shape[0]:
            raise DuplicatePositionError("ensemble positions must be pairwise distinct")
        ids = self.member_ids
        if ids is None:
            ids = tuple(str(i) for i in range(F.shape[0]))
        ids = tuple(str(i) for i in ids)
        if len(ids) != F.shape[0] or len(set(ids)) != len(ids):
            raise ValueError("member_ids must be unique and one per member")
        object.__setattr__(self, "positions", _freeze(P))
        object.__setattr__(self, "flows", _freeze(F))
        object.__setattr__(self, "member_ids", ids)

    @property
    def n_members(self):
        return self.flows.shape[0]

    @property
    def n_positions(self):
        return self.positions.shape[0]

    def eta(self, i):
        """Vectorised member ``i`` (index or id)."""
        return vectorize(self.flows[self._index(i)])

    def data_matrix(self):
        """All members vectorised as columns, shape ``(2 N_V, N_E)``."""
        return self.flows.reshape(self.n_members, -1).T.copy()

    def _index(self, i):
        if isinstance(i, str):
            try:
                return self.member_ids.index(i)
            except ValueError:
                raise KeyError(f"unknown member id {i!r}") from None
        return int(i)

    def without(self, member):
        """Copy of the forecast with one member removed (for leave-one-out)."""
        j = self._index(member)
        keep = [i for i in range(self.n_members) if i != j]
        return EnsembleForecast(
            self.positions,
            self.flows[keep],
            tuple(self.member_ids[i] for i in keep),
            dict(self.metadata),
        )

    def subset(self, members):
        idx = [self._index(m) for m in members]
        return EnsembleForecast(
            self.positions, self.flows[idx], tuple(self.member_ids[i] for i in idx), dict(self.metadata)
        )


def aggregate_statistics(E, require_covariance=True):
    """Per-position sample mean and 2x2 sample covariance (``N_E - 1`` denominator).

    Returns ``(mean, cov)`` with shapes ``(N_V, 2)`` and ``(N_V, 2, 2)``; ``cov``
    is ``None`` when ``require_covariance`` is false and there is one member.
    """
    F = E.flows
    mean = F.mean(axis=0)
    if E.n_members < 2:
        if require_covariance:
            raise InsufficientMembersError("sample covariance needs at least two members")
        return mean, None
    D = F - mean
    cov = np.einsum("evi,evj->vij", D, D) / (E.n_members - 1)
    return mean, cov


# --------------------------------------------------------------------- I/O


def _read_text(source):
    if isinstance(source, (bytes, bytearray)):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)):
        if isinstance(source, str) and ("\n" in source or source.lstrip().startswith("{")):
            return source
        with open(source, encoding="utf-8") as fh:
            return fh.read()
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _float(text, line, name):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"non-numeric {name} {text!r}", line) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite {name} {text!r}", line)
    return value


def _assemble(order, rows_by_member, metadata):
    """Align members on the first member's position order."""
    ref_id = order[0]
    ref_positions = [p for p, _ in rows_by_member[ref_id]]
    if len(set(ref_positions)) != len(ref_positions):
        raise DuplicatePositionError(f"member {ref_id!r} lists a position more than once")
    index = {p: i for i, p in enumerate(ref_positions)}
    n_v = len(ref_positions)
    flows = np.empty((len(order), n_v, 2))
    for m, mid in enumerate(order):
        rows = rows_by_member[mid]
        if len(rows) != n_v:
            raise RaggedEnsembleError(
                f"member {mid!r} has {len(rows)} flow vectors, expected {n_v}", member_id=mid
            )
        seen = set()
        for p, uv in rows:
            if p not in index:
                raise RaggedEnsembleError(
                    f"member {mid!r} has position {p} not present in member {ref_id!r}", member_id=mid
                )
            if p in seen:
                raise DuplicatePositionError(f"member {mid!r} lists position {p} more than once")
            seen.add(p)
            flows[m, index[p]] = uv
    return EnsembleForecast(np.array(ref_positions), flows, tuple(order), metadata)


def _load_csv(text):
    metadata = {}
    rows_by_member = {}
    order = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, value = body.split(":", 1)
                metadata[key.strip()] = value.strip()
            continue
        fields = next(csv.reader([line]))
        if header is None:
            header = [f.strip() for f in fields]
            if header != ["member", "x", "y", "u", "v"]:
                raise ParseError(f"expected header member,x,y,u,v, got {','.join(header)}", lineno)
            continue
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", lineno)
        mid = fields[0].strip()
        x, y, u, v = (_float(f.strip(), lineno, n) for f, n in zip(fields[1:], "xyuv"))
        if mid not in rows_by_member:
            rows_by_member[mid] = []
            order.append(mid)
        rows_by_member[mid].append(((x, y), (u, v)))
    if header is None or not order:
        raise ParseError("no ensemble rows found")
    return _assemble(order, rows_by_member, metadata)


def _load_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    if not isinstance(doc, dict) or "positions" not in doc or "members" not in doc:
        raise ParseError("JSON ensemble needs 'positions' and 'members' keys")
    try:
        positions = [tuple(_float(c, None, "coordinate") for c in p) for p in doc["positions"]]
    except TypeError:
        raise ParseError("positions must be a list of [x, y] pairs") from None
    if any(len(p) != 2 for p in positions):
        raise ParseError("positions must be a list of [x, y] pairs")
    members = doc["members"]
    if not isinstance(members, dict) or not members:
        raise ParseError("'members' must be a non-empty object keyed by member id")
    rows_by_member = {}
    for mid, flows in members.items():
        flows = [tuple(_float(c, None, "flow component") for c in f) for f in flows]
        if any(len(f) != 2 for f in flows):
            raise ParseError(f"member {mid!r}: flows must be [u, v] pairs")
        if len(flows) != len(positions):
            raise RaggedEnsembleError(
                f"member {mid!r} has {len(flows)} flow vectors, expected {len(positions)}", member_id=mid
            )
        rows_by_member[str(mid)] = list(zip(positions, flows))
    metadata = doc.get("metadata", {})
    return _assemble([str(m) for m in members], rows_by_member, metadata)


def load_ensemble(source, format=None):
    """Read an ensemble forecast from CSV or JSON.

    ``source`` may be a path, raw text/bytes, or a file-like object.  When
    ``format`` is omitted it is inferred from the file extension or content.
    """
    text = _read_text(source)
    if format is None:
        if isinstance(source, (str, os.PathLike)) and str(source).lower().endswith(".json"):
            format = "json"
        elif isinstance(source, (str, os.PathLike)) and str(source).lower().endswith(".csv"):
            format = "csv"
        else:
            format = "json" if text.lstrip().startswith("{") else "csv"
    if format == "csv":
        return _load_csv(text)
    if format == "json":
        return _load_json(text)
    raise ValueError(f"unknown ensemble format {format!r}")


def save_ensemble(E, format="json"):
    """Serialise ``E``; floats are written with ``repr`` so reloading is exact."""
    if format == "json":
        doc = {
            "metadata": E.metadata,
            "positions": E.positions.tolist(),
            "members": {mid: E.flows[i].tolist() for i, mid in enumerate(E.member_ids)},
        }
        return json.dumps(doc, indent=1)
    if format == "csv":
        out = io.StringIO()
        for key, value in E.metadata.items():
            out.write(f"# {key}: {value}\n")
        out.write("member,x,y,u,v\n")
        for i, mid in enumerate(E.member_ids):
            for (x, y), (u, v) in zip(E.positions, E.flows[i]):
                out.write(mid + "," + ",".join(repr(float(t)) for t in (x, y, u, v)) + "\n")
        return out.getvalue()
    raise ValueError(f"unknown ensemble format {format!r}")


# --------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid, x varying fastest."""

    x0: float
    x1: float
    nx: int
    y0: float
    y1: float
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InvalidGeometryError("grid needs at least one point per axis")
        if (self.nx > 1 and self.x1 == self.x0) or (self.ny > 1 and self.y1 == self.y0):
            raise InvalidGeometryError("degenerate grid extent")

    @classmethod
    def parse(cls, text):
        """Parse ``"x0:x1:nx,y0:y1:ny"``."""
        try:
            xs, ys = text.split(",")
            x0, x1, nx = xs.split(":")
            y0, y1, ny = ys.split(":")
            return cls(float(x0), float(x1), int(nx), float(y0), float(y1), int(ny))
        except ValueError:
            raise ValueError(f"grid spec must look like 'x0:x1:nx,y0:y1:ny', got {text!r}") from None

    def __str__(self):
        return f"{self.x0:g}:{self.x1:g}:{self.nx},{self.y0:g}:{self.y1:g}:{self.ny}"

    def axes(self):
        return np.linspace(self.x0, self.x1, self.nx), np.linspace(self.y0, self.y1, self.ny)

    def points(self):
        xs, ys = self.axes()
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def spacing(self):
        dx = (self.x1 - self.x0) / (self.nx - 1) if self.nx > 1 else np.inf
        dy = (self.y1 - self.y0) / (self.ny - 1) if self.ny > 1 else np.inf
        return min(dx, dy)

    def interior_mask(self):
        m = np.zeros((self.ny, self.nx), dtype=bool)
        m[1:-1, 1:-1] = True
        return m.ravel()


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    """Continuous field ``f(x) = K(x, centers) @ weights``; divergence-free by construction."""

    centers: np.ndarray
    weights: np.ndarray
    cfg: KernelConfig

    def __call__(self, x):
        X = as_positions(x)
        return (gram(X, self.centers, self.cfg) @ self.weights).reshape(-1, 2)

    def to_dict(self):
        return {
            "centers": np.asarray(self.centers).tolist(),
            "weights": np.asarray(self.weights).tolist(),
            "kernel": self.cfg.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["centers"], float), np.asarray(doc["weights"], float), KernelConfig(**doc["kernel"]))


def generate_synthetic_ensemble(
    seed,
    n_members,
    grid,
    n_modes,
    mode_spread,
    noise_scale,
    cfg,
    *,
    mode_centers=None,
    mode_decay=1.0,
    mode_region=None,
    region_modes=0,
    return_member_fields=False,
):
    """Draw an ensemble whose flow patterns live in a known ``n_modes``-dimensional span.

    Each generating mode is a random combination of incompressible kernel
    sections centred on grid points, normalised to unit RMS flow on the grid.
    Mode 0 is the ensemble's fixed mean flow; member ``i`` has coefficient 1 on
    it and ``mode_spread * decay**(m-1) * z_im`` with ``z_im ~ N(0, 1)`` on each
    further mode ``m``, plus an independent divergence-free perturbation whose
    expected RMS is ``noise_scale``.  The truth is one more draw of the mode coefficients
    (without perturbation).

    Parameters
    ----------
    mode_centers : int, optional
        If given, each variable mode is built from this many randomly chosen
        centres, which makes it spatially localised.  The mean flow always
        uses every grid point.
    mode_decay : float
        Geometric decay of the spread across modes.
    mode_region : tuple, optional
        ``(xmin, xmax, ymin, ymax)``; modes ``1 .. region_modes`` draw their
        centres only from grid points inside it, concentrating the ensemble
        spread there.
    region_modes : int
    return_member_fields : bool
        Also return each member as a continuous :class:`SyntheticTruth`.

    Returns
    -------
    (EnsembleForecast, SyntheticTruth) or (EnsembleForecast, SyntheticTruth, list)
    """
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    if n_modes > n_members:
        raise ValueError(f"n_modes ({n_modes}) exceeds n_members ({n_members})")
    rng = np.random.default_rng(seed)
    X = grid.points()
    n_v = X.shape[0]
    G = gram(X, X, cfg)

    pool = np.arange(n_v)
    if mode_region is not None:
        x0, x1, y0, y1 = mode_region
        pool = np.flatnonzero((X[:, 0] >= x0) & (X[:, 0] <= x1) & (X[:, 1] >= y0) & (X[:, 1] <= y1))
        if pool.size == 0:
            raise InvalidGeometryError("mode_region contains no grid points")

    modes = np.zeros((2 * n_v, n_modes))
    for m in range(n_modes):
        alpha = np.zeros((n_v, 2))
        candidates = pool if 1 <= m <= region_modes else np.arange(n_v)
        if mode_centers is None or m == 0:
            alpha[candidates] = rng.standard_normal((candidates.size, 2))
        else:
            idx = rng.choice(candidates, size=min(mode_centers, candidates.size), replace=False)
            alpha[idx] = rng.standard_normal((len(idx), 2))
        a = alpha.ravel()
        scale = np.sqrt(np.mean((G @ a) ** 2))
        modes[:, m] = a / scale

    # mode 0 is the fixed mean flow; the rest carry the spread
    decay = np.concatenate([[0.0], mode_decay ** np.arange(n_modes - 1)])
    base = np.zeros(n_modes)
    base[0] = 1.0
    coeffs = base + mode_spread * decay * rng.standard_normal((n_members, n_modes))
    truth_coeffs = base + mode_spread * decay * rng.standard_normal(n_modes)

    noise_norm = np.sqrt(np.sum(G * G) / (2 * n_v))
    latent = coeffs @ modes.T
    if noise_scale > 0:
        latent = latent + (noise_scale / noise_norm) * rng.standard_normal(latent.shape)

    # one product per member so identical members stay bit-identical
    flows = np.stack([G @ row for row in latent]).reshape(n_members, n_v, 2)
    forecast = EnsembleForecast(X, flows, metadata={"source": "synthetic", "seed": seed})
    truth = SyntheticTruth(X, modes @ truth_coeffs, cfg)
    if return_member_fields:
        fields = [SyntheticTruth(X, latent[i], cfg) for i in range(n_members)]
        return forecast, truth, fields
    return forecast, truth

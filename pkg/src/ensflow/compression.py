"""SVD compression of the latent matrix into a small set of basis flow fields."""

import io
from dataclasses import dataclass

import numpy as np

from .kernels import KernelConfig, as_positions, gram

# singular values at or below this fraction of the largest are always dropped
NULL_SPACE_RTOL = 1e-12
DEFAULT_ENERGY = 0.999


@dataclass(frozen=True)
class TruncationRule:
    """Keep a fixed number of singular values, or the smallest set reaching an energy fraction."""

    rank: int = None
    energy: float = None

    def __post_init__(self):
        if (self.rank is None) == (self.energy is None):
            raise ValueError("set exactly one of rank or energy")
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.energy is not None and not (0 < self.energy <= 1):
            raise ValueError("energy fraction must lie in (0, 1]")

    @classmethod
    def default(cls):
        return cls(energy=DEFAULT_ENERGY)

    @classmethod
    def from_dict(cls, doc):
        if doc is None:
            return cls.default()
        return cls(rank=doc.get("rank"), energy=doc.get("energy"))

    def to_dict(self):
        return {"rank": self.rank} if self.rank is not None else {"energy": self.energy}

    def select(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if sigma.size == 0 or sigma[0] <= 0:
            return 0
        usable = int(np.sum(sigma > NULL_SPACE_RTOL * sigma[0]))
        if self.rank is not None:
            return min(self.rank, usable)
        energy = np.cumsum(sigma**2) / np.sum(sigma**2)
        r = int(np.searchsorted(energy, self.energy - 1e-15) + 1)
        return min(r, usable)


def _freeze(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class BasisModel:
    """Truncated SVD of the latent matrix; defines ``H(x) = K(x, X_ens) U``.

    Attributes
    ----------
    positions : ndarray, shape (N_V, 2)
    U : ndarray, shape (2 N_V, N_W)
        Orthonormal latent components of the basis flow fields.
    singular_values : ndarray, shape (N_W,)
    W : ndarray, shape (N_W, N_E)
        Weight vectors of the ensemble members, ``diag(sigma) V^H``.
    cfg : KernelConfig
    all_singular_values : ndarray
        Full spectrum before truncation, for plotting.
    truncation_error : float
        ``||B - U diag(sigma) V^H||_F`` measured directly after truncation.
    """

    positions: np.ndarray
    U: np.ndarray
    singular_values: np.ndarray
    W: np.ndarray
    cfg: object
    all_singular_values: np.ndarray = None
    truncation_error: float = 0.0

    def __post_init__(self):
        for name in ("positions", "U", "singular_values", "W", "all_singular_values"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _freeze(value))

    @property
    def n_weights(self):
        return self.U.shape[1]

    @property
    def n_members(self):
        return self.W.shape[1]

    def H(self, x):
        return basis_eval(self, x)

    def H_stack(self, X):
        """``H`` at many positions, shape ``(N, 2, N_W)``."""
        X = as_positions(X)
        return (gram(X, self.positions, self.cfg) @ self.U).reshape(X.shape[0], 2, -1)

    def discarded_norm(self):
        s = self.all_singular_values
        return float(np.sqrt(np.sum(s[self.n_weights:] ** 2)))


def compress(L, rule=None):
    """Thin SVD of ``L.B`` truncated by ``rule``.

    Each left singular vector is sign-normalised so its largest-magnitude entry
    is positive, which makes the result reproducible across runs.
    """
    rule = rule or TruncationRule.default()
    B = np.asarray(L.B, dtype=float)
    if not np.all(np.isfinite(B)):
        raise FloatingPointError("latent matrix contains non-finite entries")
    U, s, Vh = np.linalg.svd(B, full_matrices=False)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    Vh = Vh * signs[:, None]

    r = rule.select(s)
    if r == 0:
        raise FloatingPointError("latent matrix is identically zero; nothing to compress")
    U_r = U[:, :r]
    W = s[:r, None] * Vh[:r]
    err = float(np.linalg.norm(B - U_r @ W))
    return BasisModel(L.positions, U_r, s[:r], W, L.cfg, s, err)


def basis_eval(M, x):
    """``H(x)``, shape ``(2, N_W)``; column ``i`` is basis flow ``i`` at ``x``."""
    return gram(as_positions(x)[:1], M.positions, M.cfg) @ M.U


def basis_field_dump(M, i, grid):
    """Evaluate basis flow field ``i`` on a grid.

    Returns ``(points, flows)`` with shapes ``(N, 2)``.
    """
    if not 0 <= i < M.n_weights:
        raise IndexError(f"basis index {i} out of range for N_W={M.n_weights}")
    X = grid.points() if hasattr(grid, "points") else as_positions(grid)
    flows = (gram(X, M.positions, M.cfg) @ M.U[:, i]).reshape(-1, 2)
    return X, flows


def basis_csv(M, i, grid):
    X, F = basis_field_dump(M, i, grid)
    out = io.StringIO()
    out.write("x,y,u,v\n")
    for (x, y), (u, v) in zip(X, F):
        out.write(",".join(repr(float(t)) for t in (x, y, u, v)) + "\n")
    return out.getvalue()


def singular_values_csv(M):
    out = io.StringIO()
    out.write("index,sigma\n")
    for i, s in enumerate(M.all_singular_values):
        out.write(f"{i},{float(s)!r}\n")
    return out.getvalue()


def save_model(M, path):
    np.savez(
        path,
        positions=M.positions,
        U=M.U,
        singular_values=M.singular_values,
        W=M.W,
        all_singular_values=M.all_singular_values,
        truncation_error=M.truncation_error,
        kernel=np.array([M.cfg.length_scale, M.cfg.signal_scale, M.cfg.jitter]),
    )


def load_model(path):
    with np.load(path) as z:
        ls, ss, jit = z["kernel"]
        return BasisModel(
            z["positions"],
            z["U"],
            z["singular_values"],
            z["W"],
            KernelConfig(float(ls), float(ss), float(jit)),
            z["all_singular_values"],
            float(z["truncation_error"]),
        )

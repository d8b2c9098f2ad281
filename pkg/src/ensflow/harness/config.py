"""Run configuration read from JSON: kernel, truncation, measurement noise."""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..compression import TruncationRule
from ..kernels import KernelConfig


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by the ``fit``, ``simulate`` and ``loocv`` commands.

    JSON keys are ``length_scale``, ``signal_scale``, ``jitter``,
    ``truncation`` (``{"rank": n}`` or ``{"energy": t}``), ``sigma_mea``
    (2x2 nested list, or a scalar meaning a multiple of the identity) and
    ``process_noise``.  Missing keys take the defaults below.
    """

    kernel: KernelConfig = KernelConfig()
    truncation: TruncationRule = field(default_factory=TruncationRule.default)
    sigma_mea: tuple = ((1e-3, 0.0), (0.0, 1e-3))
    process_noise: float = 0.0

    def __post_init__(self):
        S = np.asarray(self.sigma_mea, dtype=float)
        if S.ndim == 0:
            S = float(S) * np.eye(2)
        if S.shape != (2, 2) or not np.allclose(S, S.T):
            raise ValueError("sigma_mea must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(S).min() < 0:
            raise ValueError("sigma_mea must be positive semidefinite")
        if self.process_noise < 0:
            raise ValueError("process_noise must be non-negative")
        object.__setattr__(self, "sigma_mea", tuple(tuple(float(v) for v in row) for row in S))

    @property
    def noise(self):
        return np.array(self.sigma_mea)

    @classmethod
    def from_dict(cls, doc):
        known = {"length_scale", "signal_scale", "jitter", "truncation", "sigma_mea", "process_noise"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        kernel = KernelConfig(**{k: float(doc[k]) for k in ("length_scale", "signal_scale", "jitter") if k in doc})
        rule = TruncationRule.from_dict(doc["truncation"]) if "truncation" in doc else TruncationRule.default()
        kw = {}
        if "sigma_mea" in doc:
            kw["sigma_mea"] = doc["sigma_mea"]
        if "process_noise" in doc:
            kw["process_noise"] = float(doc["process_noise"])
        return cls(kernel, rule, **kw)

    def to_dict(self):
        return {
            "length_scale": self.kernel.length_scale,
            "signal_scale": self.kernel.signal_scale,
            "jitter": self.kernel.jitter,
            "truncation": self.truncation.to_dict(),
            "sigma_mea": [list(r) for r in self.sigma_mea],
            "process_noise": self.process_noise,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(f.read())


def config_hash(doc):
    """Short digest of a JSON-serialisable document, stable under key order."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]

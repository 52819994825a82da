"""Sampling from spatial mixtures and the three preset simulation designs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coords import CoordinateSystem, TensorShape, grid_coords
from .covariance import SpatialParams, build_covariance, factorize

RNG_ALGORITHM = "numpy.random.PCG64/SeedSequence.spawn/block=1024"
BLOCK = 1024

DESIGN_I_SPATIAL = (
    SpatialParams(4, 3, 2, beta=4),
    SpatialParams(2, 1, 1, beta=4),
    SpatialParams(4, 3, 2, beta=10),
)
DESIGN_II_SPATIAL = DESIGN_I_SPATIAL + (SpatialParams(1, 1, 1, beta=10),)
DESIGN_II_LEVELS = (0.0, 5.0, 10.0, -5.0)
DESIGN_II_PI = (0.2, 0.3, 0.3, 0.2)
DESIGN_I_PI = (0.2, 0.3, 0.5)


@dataclass
class SimSpec:
    shape: TensorShape
    pi: np.ndarray
    mu: np.ndarray
    spatial: list[SpatialParams]
    n: int = 1000
    seed: int = 0
    coords: CoordinateSystem | None = field(default=None, repr=False)
    name: str = "custom"

    def __post_init__(self):
        if not isinstance(self.shape, TensorShape):
            self.shape = TensorShape(self.shape)
        self.pi = np.asarray(self.pi, dtype=np.float64)
        self.mu = np.atleast_2d(np.asarray(self.mu, dtype=np.float64))
        self.spatial = list(self.spatial)
        if self.coords is None:
            self.coords = grid_coords(self.shape)
        if np.any(self.pi <= 0) or abs(self.pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixing proportions must be positive and sum to 1, got {self.pi.tolist()}")
        if not len(self.pi) == len(self.mu) == len(self.spatial):
            raise ValueError("pi, mu and spatial must have one entry per group")
        if self.mu.shape[1] != self.shape.p:
            raise ValueError(f"means must have length p={self.shape.p}")
        if self.n < 1:
            raise ValueError("N must be positive")
        # raises NotPositiveDefiniteError for ungenerable truth
        self.factors = [factorize(build_covariance(self.coords, sp)) for sp in self.spatial]

    @property
    def G(self):
        return len(self.pi)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dims": list(self.shape.dims),
            "n": int(self.n),
            "seed": int(self.seed),
            "pi": self.pi.tolist(),
            "mu": self.mu.tolist(),
            "spatial": [sp.to_dict() for sp in self.spatial],
            "rng": RNG_ALGORITHM,
        }

    @classmethod
    def from_dict(cls, d: dict, coords=None) -> "SimSpec":
        shape = TensorShape(d["dims"])
        mu = d.get("mu")
        if mu is None:
            mu = np.zeros((len(d["pi"]), shape.p))
        mu = np.asarray(mu, dtype=np.float64)
        if mu.ndim == 1:
            # one scalar level per group
            mu = np.repeat(mu[:, None], shape.p, axis=1)
        return cls(
            shape=shape,
            pi=d["pi"],
            mu=mu,
            spatial=[SpatialParams(**sp) for sp in d["spatial"]],
            n=int(d.get("n", 1000)),
            seed=int(d.get("seed", 0)),
            coords=coords,
            name=d.get("name", "custom"),
        )


def sample(spec: SimSpec):
    """Draw ``spec.n`` observations; returns ``(data, labels)`` with 0-based labels.

    Labels come from the first spawned stream, observation noise from one
    stream per block of 1024 rows, so output is fixed by the seed alone.
    """
    n, p = spec.n, spec.shape.p
    n_blocks = -(-n // BLOCK)
    streams = np.random.SeedSequence(spec.seed).spawn(1 + n_blocks)
    labels = np.random.default_rng(streams[0]).choice(spec.G, size=n, p=spec.pi).astype(np.int64)
    data = np.empty((n, p))
    for b in range(n_blocks):
        lo, hi = b * BLOCK, min(n, (b + 1) * BLOCK)
        w = np.random.default_rng(streams[1 + b]).standard_normal((hi - lo, p))
        lab = labels[lo:hi]
        for g in range(spec.G):
            rows = lab == g
            data[lo:hi][rows] = spec.mu[g] + w[rows] @ spec.factors[g].chol.T
    return data, labels


def preset(design: str, n: int = 1000, seed: int = 0, pi=None) -> SimSpec:
    """Simulation designs I, II and III.

    I   : 5x5x5, G=3, zero means, groups differ only in spatial parameters.
    II  : 5x5x5, G=4, constant mean tensors 0, 5, 10, -5.
    III : 10x10 with the design I parameters.

    Design II is described with three mixing proportions for four groups; the
    default here is (0.2, 0.3, 0.3, 0.2). Pass ``pi`` to override.
    """
    design = {"1": "I", "2": "II", "3": "III"}.get(str(design).upper(), str(design).upper())
    if design == "I":
        shape, spatial, levels, default_pi = TensorShape((5, 5, 5)), DESIGN_I_SPATIAL, (0.0,) * 3, DESIGN_I_PI
    elif design == "II":
        shape, spatial, levels, default_pi = TensorShape((5, 5, 5)), DESIGN_II_SPATIAL, DESIGN_II_LEVELS, DESIGN_II_PI
    elif design == "III":
        shape, spatial, levels, default_pi = TensorShape((10, 10)), DESIGN_I_SPATIAL, (0.0,) * 3, DESIGN_I_PI
    else:
        raise ValueError(f"unknown design {design!r}; expected I, II or III")
    mu = np.array([np.full(shape.p, lev) for lev in levels])
    return SimSpec(
        shape=shape,
        pi=default_pi if pi is None else pi,
        mu=mu,
        spatial=list(spatial),
        n=n,
        seed=seed,
        name=f"design-{design}",
    )

"""Array geometries, the r^-3 coupling kernel, and Brillouin-zone grids.

All positions are stored in units of the lattice spacing ``a``; the spacing
only re-enters when converting dressed molecular parameters to absolute
energies (see :mod:`dipolarray.stark`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Lattice",
    "MomentumGrid",
    "build_lattice",
    "coupling_kernel",
    "momentum_grid",
]

_KINDS = ("chain", "square", "triangular")
_BOUNDARIES = ("open", "periodic")

# primitive vectors of the triangular lattice (nearest-neighbor distance 1)
_TRI_A1 = np.array([1.0, 0.0])
_TRI_A2 = np.array([0.5, np.sqrt(3.0) / 2.0])


@dataclass(frozen=True)
class Lattice:
    """Immutable site geometry.

    ``positions`` has shape (N, D) in units of the spacing.  For periodic
    boundaries ``period_vectors`` holds the torus vectors (rows, units of
    the spacing); it is None for open boundaries.
    """

    kind: str
    dimension: int
    n_sites: int
    spacing: float
    boundary: str
    positions: np.ndarray = field(repr=False)
    period_vectors: np.ndarray | None = field(repr=False, default=None)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"


@dataclass(frozen=True)
class MomentumGrid:
    """Quasi-momenta of a periodic lattice, in units of 1/a.

    ``kvecs`` has shape (N, D); ``weights`` are the uniform 1/N quadrature
    weights over the first Brillouin zone.
    """

    kvecs: np.ndarray
    weights: np.ndarray
    reciprocal_vectors: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.kvecs)

    def pair_fold(self) -> tuple[np.ndarray, np.ndarray]:
        """One representative per ±k pair, k = 0 excluded.

        Returns (indices, multiplicities): multiplicity 2 for a regular
        pair, 1 for self-paired points (k ≡ -k up to a reciprocal vector),
        so that a fold-weighted sum equals the full-grid sum without k=0.
        """
        kv = self.kvecs
        key = grid_labels(kv, self.reciprocal_vectors, len(kv))
        neg = grid_labels(-kv, self.reciprocal_vectors, len(kv))
        zero = tuple([0] * kv.shape[1])
        index_of = {k: i for i, k in enumerate(key)}
        reps, mult = [], []
        seen = set()
        for i in range(len(kv)):
            if key[i] == zero or key[i] in seen:
                continue
            j = index_of[neg[i]]
            seen.add(key[i])
            if j == i:
                reps.append(i)
                mult.append(1)
            else:
                seen.add(key[j])
                reps.append(i)
                mult.append(2)
        return np.array(reps, dtype=int), np.array(mult, dtype=int)


def grid_labels(kvecs: np.ndarray, recip: np.ndarray, scale: int) -> list[tuple[int, ...]]:
    """Integer labels of momenta modulo the reciprocal lattice.

    Grid fractions are multiples of 1/L with L <= scale, so scaling by
    ``scale`` and reducing mod scale yields exact integer labels.
    """
    frac = np.linalg.solve(recip.T, kvecs.T).T
    frac = frac - np.floor(frac + 1e-9)
    scaled = np.round(frac * scale).astype(int) % scale
    return [tuple(row) for row in scaled]


def build_lattice(
    kind: str,
    n_sites: int,
    spacing: float = 1.0,
    boundary: str = "open",
) -> Lattice:
    """Generate a deterministic site arrangement.

    chain: sites 0..N-1 on a line.  square: L x L integer grid (N must be a
    perfect square).  triangular: near-hexagonal patch filled row by row for
    open boundaries, L x L rhombic torus for periodic ones.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown lattice kind {kind!r}; expected one of {_KINDS}")
    if boundary not in _BOUNDARIES:
        raise ValueError(f"unknown boundary {boundary!r}; expected one of {_BOUNDARIES}")
    if n_sites < 2:
        raise ValueError(f"n_sites must be >= 2, got {n_sites}")
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")

    period = None
    if kind == "chain":
        dimension = 1
        positions = np.arange(n_sites, dtype=float)[:, None]
        if boundary == "periodic":
            period = np.array([[float(n_sites)]])
    elif kind == "square":
        dimension = 2
        side = int(round(np.sqrt(n_sites)))
        if side * side != n_sites:
            raise ValueError(f"square lattice needs a perfect-square n_sites, got {n_sites}")
        positions = np.array(
            [(i, j) for i in range(side) for j in range(side)], dtype=float
        )
        if boundary == "periodic":
            period = np.array([[float(side), 0.0], [0.0, float(side)]])
    else:  # triangular
        dimension = 2
        if boundary == "periodic":
            side = int(round(np.sqrt(n_sites)))
            if side * side != n_sites:
                raise ValueError(
                    f"periodic triangular lattice needs a perfect-square n_sites, got {n_sites}"
                )
            positions = np.array(
                [i * _TRI_A1 + j * _TRI_A2 for j in range(side) for i in range(side)]
            )
            period = np.vstack([side * _TRI_A1, side * _TRI_A2])
        else:
            positions = _triangular_patch(n_sites)

    return Lattice(
        kind=kind,
        dimension=dimension,
        n_sites=n_sites,
        spacing=float(spacing),
        boundary=boundary,
        positions=positions,
        period_vectors=period,
    )


def _triangular_patch(n_sites: int) -> np.ndarray:
    """Compact patch of the triangular lattice: sites sorted by distance from
    the origin, ties broken row by row."""
    radius = int(np.ceil(np.sqrt(n_sites))) + 2
    cand = []
    for j in range(-radius, radius + 1):
        for i in range(-radius, radius + 1):
            p = i * _TRI_A1 + j * _TRI_A2
            cand.append((round(float(p @ p), 9), j, i, p))
    cand.sort(key=lambda t: t[:3])
    if len(cand) < n_sites:
        raise ValueError("internal: candidate patch too small")
    return np.array([t[3] for t in cand[:n_sites]])


def displacements(lattice: Lattice) -> np.ndarray:
    """Pairwise displacement vectors r_i - r_j, shape (N, N, D).

    Minimum-image displacements on periodic lattices (shortest among the
    neighboring torus images).
    """
    pos = lattice.positions
    diff = pos[:, None, :] - pos[None, :, :]
    if not lattice.periodic:
        return diff
    period = lattice.period_vectors
    if lattice.dimension == 1:
        box = period[0, 0]
        return diff - box * np.round(diff / box)
    best = diff.copy()
    best_n = np.einsum("ijk,ijk->ij", best, best)
    for m1 in range(-2, 3):
        for m2 in range(-2, 3):
            if m1 == 0 and m2 == 0:
                continue
            cand = diff + m1 * period[0] + m2 * period[1]
            n = np.einsum("ijk,ijk->ij", cand, cand)
            sel = n < best_n
            best[sel] = cand[sel]
            best_n = np.where(sel, n, best_n)
    return best


def coupling_kernel(lattice: Lattice) -> np.ndarray:
    """Dimensionless dipolar kernel d_ij = a^3 / |r_i - r_j|^3, d_ii = 0."""
    diff = displacements(lattice)
    dist = np.linalg.norm(diff, axis=-1)
    if np.any((dist == 0) & ~np.eye(lattice.n_sites, dtype=bool)):
        raise ValueError("coincident sites in lattice")
    with np.errstate(divide="ignore"):
        d = 1.0 / dist**3
    np.fill_diagonal(d, 0.0)
    return d


def momentum_grid(lattice: Lattice) -> MomentumGrid:
    """First-Brillouin-zone quasi-momenta of a periodic lattice (units 1/a)."""
    if not lattice.periodic:
        raise ValueError("momentum grid requires a periodic lattice")
    n = lattice.n_sites
    if lattice.kind == "chain":
        kvecs = (2.0 * np.pi * np.arange(n) / n)[:, None]
        recip = np.array([[2.0 * np.pi]])
    else:
        side = int(round(np.sqrt(n)))
        a1, a2 = lattice.period_vectors / side
        # reciprocal basis: b_i . a_j = 2 pi delta_ij
        cell = np.vstack([a1, a2])
        recip = 2.0 * np.pi * np.linalg.inv(cell).T
        b1, b2 = recip
        kvecs = np.array(
            [(i / side) * b1 + (j / side) * b2 for j in range(side) for i in range(side)]
        )
    weights = np.full(len(kvecs), 1.0 / n)
    return MomentumGrid(kvecs=kvecs, weights=weights, reciprocal_vectors=recip)

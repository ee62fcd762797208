"""Wigner-crystal phonons of dipolar lattices and the phonon-induced
decoherence of collective excitations.

Crystal vibrations come from the quadratic expansion of the ground-state
dipolar repulsion U_dd/rho^3 about the equilibrium sites.  In units where
lengths are in a and energies in U_dd, the per-pair Hessian is

    K_ab(r) = (3/rho^5) (5 n_a n_b - delta_ab),      n = r/|r|,

and the dynamical matrix D(q) = sum_{j != 0} K(r_j) (1 - cos q.r_j) has
eigenvalues f_lambda(q)^2 with mode energies hbar*omega = (U_dd/sqrt(beta))
f_lambda(q): acoustic branches, one longitudinal in 1D and two in 2D.

Decay of the collective one-excitation state couples the spin wave at k to
the phonon at q = -k with weight

    |L|^2 = (xi + 4 B0)^2 g_lambda(q) / (2 N sqrt(beta)),
    g_lambda(q) = (9 / f_lambda(q)) * [sum_{j != 0} sin(q.r_j)
                  (e_lambda . r_j) / |r_j|^5]^2,

and the first-order decay probability integrates [(n(w)+1) cos(Omega+ tau)
+ n(w) cos(Omega- tau)] with Omega+- = omega_phonon +- omega_spin.  All
energies (kappa, xi, b0, u_dd, k_B T) must share one unit; times are hbar
over that unit.  Temperatures are passed in units of U_dd/(sqrt(beta) k_B),
the natural scale of the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import Lattice, MomentumGrid, build_lattice, displacements, momentum_grid
from .spinwave import spin_wave_energies

__all__ = [
    "PhononModel",
    "PhononDecay",
    "dynamical_matrix",
    "build_phonon_model",
    "phonon_spectrum",
    "coupling_weight_g",
    "gamma1_time",
    "gamma1_fgr",
    "gamma2",
]

PERTURBATION_FLAG_LEVEL = 0.5
ZETA3 = 1.2020569031595942854

_SUPPORTED = ("chain", "triangular")


def _relative_sites(lattice: Lattice) -> np.ndarray:
    """Minimum-image displacements of sites 1.. relative to site 0.

    On a torus every site is equivalent, so one reference row describes the
    whole crystal; the table costs O(N^2) to build and is cached per lattice.
    """
    # geometry is deterministic given these fields, so the key is collision-safe
    key = (lattice.kind, lattice.n_sites, lattice.boundary)
    hit = _REL_CACHE.get(key)
    if hit is None:
        hit = displacements(lattice)[1:, 0, :]
        _REL_CACHE[key] = hit
    return hit


_REL_CACHE: dict[tuple, np.ndarray] = {}


def _dyn_from_rel(rel: np.ndarray, rn: np.ndarray, nhat: np.ndarray, qvec: np.ndarray, dim: int) -> np.ndarray:
    w = (1.0 - np.cos(rel @ qvec)) * (3.0 / rn**5)
    d = np.empty((dim, dim))
    for a in range(dim):
        for b in range(dim):
            d[a, b] = (w * (5.0 * nhat[:, a] * nhat[:, b] - (1.0 if a == b else 0.0))).sum()
    return d


def dynamical_matrix(lattice: Lattice, qvec: np.ndarray) -> np.ndarray:
    """Dimensionless D x D dynamical matrix at one quasi-momentum."""
    if lattice.kind not in _SUPPORTED:
        raise ValueError(f"unsupported crystal kind {lattice.kind!r}; expected {_SUPPORTED}")
    if not lattice.periodic:
        raise ValueError("dynamical matrix requires a periodic lattice")
    rel = _relative_sites(lattice)
    rn = np.linalg.norm(rel, axis=1)
    nhat = rel / rn[:, None]
    qvec = np.atleast_1d(np.asarray(qvec, dtype=float))
    return _dyn_from_rel(rel, rn, nhat, qvec, lattice.dimension)


@dataclass
class PhononModel:
    """Phonon branches, polarizations, and coupling weights on the BZ grid.

    ``freqs[iq, lam]`` is the dimensionless f_lambda(q); multiply by
    u_dd/sqrt(beta) for mode energies.  ``spin_energies`` is the spin-wave
    dispersion on the same grid in units of kappa (already multiplied by
    kappa).  kappa and u_dd must be given in the same energy unit.
    """

    lattice: Lattice
    beta: float
    u_dd: float
    kappa: float
    grid: MomentumGrid
    freqs: np.ndarray = field(repr=False)
    pols: np.ndarray = field(repr=False)
    spin_energies: np.ndarray = field(repr=False)

    @property
    def n_branches(self) -> int:
        return self.freqs.shape[1]

    @property
    def phonon_energy_unit(self) -> float:
        return self.u_dd / np.sqrt(self.beta)


def build_phonon_model(lattice: Lattice, beta: float, u_dd: float, kappa: float) -> PhononModel:
    """Diagonalize the dynamical matrix on the full momentum grid."""
    if beta <= 0 or u_dd <= 0 or kappa <= 0:
        raise ValueError("beta, u_dd and kappa must be positive")
    if lattice.kind not in _SUPPORTED:
        raise ValueError(f"unsupported crystal kind {lattice.kind!r}; expected {_SUPPORTED}")
    grid = momentum_grid(lattice)
    dim = lattice.dimension
    m = grid.n_points
    rel = _relative_sites(lattice)
    rn = np.linalg.norm(rel, axis=1)
    nhat = rel / rn[:, None]
    freqs = np.empty((m, dim))
    pols = np.empty((m, dim, dim))
    for i, q in enumerate(grid.kvecs):
        d = _dyn_from_rel(rel, rn, nhat, q, dim)
        lam, vec = np.linalg.eigh(d)
        if lam.min() < -1e-10:
            raise ValueError(f"unstable crystal mode at q = {q}: eigenvalue {lam.min():.3e}")
        freqs[i] = np.sqrt(np.clip(lam, 0.0, None))
        pols[i] = vec.T  # pols[i, lam] is the polarization vector of branch lam
    spin = spin_wave_energies(lattice, grid.kvecs, kappa)
    return PhononModel(
        lattice=lattice,
        beta=beta,
        u_dd=u_dd,
        kappa=kappa,
        grid=grid,
        freqs=freqs,
        pols=pols,
        spin_energies=spin,
    )


def phonon_spectrum(model: PhononModel) -> dict:
    """Sorted branch table plus sound speeds from the smallest 10% of |q|."""
    qn = np.linalg.norm(model.grid.kvecs, axis=1)
    sel = (qn > 0) & (qn <= np.quantile(qn[qn > 0], 0.1) + 1e-12)
    speeds = []
    for lam in range(model.n_branches):
        speeds.append(float(np.mean(model.freqs[sel, lam] / qn[sel])))
    return {
        "qvecs": model.grid.kvecs,
        "freqs": model.freqs,
        "sound_speeds": speeds,
    }


def coupling_weight_g(model: PhononModel, iq: int) -> np.ndarray:
    """Per-branch coupling weight g_lambda at grid point ``iq`` (q != 0)."""
    q = model.grid.kvecs[iq]
    rel = _relative_sites(model.lattice)
    rn = np.linalg.norm(rel, axis=1)
    sin_qr = np.sin(rel @ q)
    out = np.empty(model.n_branches)
    for lam in range(model.n_branches):
        f = model.freqs[iq, lam]
        t = float((sin_qr * (rel @ model.pols[iq, lam]) / rn**5).sum())
        if f < 1e-12:
            if abs(t) > 1e-12:
                raise ValueError(f"vanishing branch frequency at q = {q} with finite coupling")
            out[lam] = 0.0
        else:
            out[lam] = 9.0 * t**2 / f
    return out


@dataclass
class PhononDecay:
    """Decay probability of a collective excitation, raw and normalized by
    (xi + 4 b0)^2 / sqrt(beta)."""

    times: np.ndarray
    decay: np.ndarray
    decay_normalized: np.ndarray
    temperature: float
    fgr_rate: float | None = None
    beyond_perturbative: bool = False
    decay_dominant: np.ndarray | None = None
    correction_ratio: float | None = None


def _mode_tables(model: PhononModel):
    """Arrays over (grid point, branch) excluding q = 0: energies, g, spin.

    The grid places q = 0 first by construction.
    """
    keep = list(range(1, model.grid.n_points))
    g = np.array([coupling_weight_g(model, i) for i in keep])  # (M', nb)
    w_ph = model.freqs[keep] * model.phonon_energy_unit        # (M', nb)
    w_sp = model.spin_energies[keep]                           # (M',)
    return np.array(keep, dtype=int), g, w_ph, w_sp


def _occupation(w: np.ndarray, kbt: float) -> np.ndarray:
    if kbt <= 0.0:
        return np.zeros_like(w)
    x = w / kbt
    with np.errstate(over="ignore"):
        return np.where(x < 700.0, 1.0 / np.expm1(np.clip(x, 1e-300, 700.0)), 0.0)


def _osc_integral(omega: np.ndarray, times: np.ndarray) -> np.ndarray:
    """(1 - cos(omega t)) / omega^2 as (T, modes); t^2/2 at omega -> 0."""
    om = np.atleast_1d(omega)
    t = times[:, None]
    small = np.abs(om)[None, :] * np.abs(t) < 1e-6
    x = om[None, :] * t / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2.0 * np.sin(x) ** 2 / om[None, :] ** 2
    return np.where(small, t**2 / 2.0, val)


def _decay_sum(weights: np.ndarray, w_ph: np.ndarray, w_sp: np.ndarray,
               kbt_abs: float, times: np.ndarray) -> np.ndarray:
    """2 * sum_modes weights * [(n+1) I(w_ph + w_sp) + n I(w_ph - w_sp)]."""
    nocc = _occupation(w_ph, kbt_abs)
    acc = np.zeros(len(times))
    plus = _osc_integral((w_ph + w_sp).ravel(), times)
    minus = _osc_integral((w_ph - w_sp).ravel(), times)
    wt = weights.ravel()
    acc += (wt * (nocc.ravel() + 1.0) * plus).sum(axis=1)
    acc += (wt * nocc.ravel() * minus).sum(axis=1)
    return 2.0 * acc


def gamma1_time(model: PhononModel, xi: float, b0: float, temperature: float, times) -> PhononDecay:
    """Time-resolved decay probability of the one-excitation collective state.

    ``temperature`` is k_B T in units of u_dd/sqrt(beta); xi and b0 share the
    energy unit of kappa and u_dd; times are hbar over that unit.
    """
    times = np.asarray(times, dtype=float)
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    _, g, w_ph, w_sp = _mode_tables(model)
    n = model.lattice.n_sites
    kbt = temperature * model.phonon_energy_unit
    coup = (xi + 4.0 * b0) ** 2 / (2.0 * n * np.sqrt(model.beta))
    weights = coup * g
    dec = _decay_sum(weights, w_ph, np.broadcast_to(w_sp[:, None], w_ph.shape), kbt, times)
    norm = dec * np.sqrt(model.beta) / (xi + 4.0 * b0) ** 2 if (xi + 4.0 * b0) != 0 else dec * 0.0
    return PhononDecay(
        times=times,
        decay=dec,
        decay_normalized=norm,
        temperature=temperature,
        beyond_perturbative=bool(dec.max(initial=0.0) > PERTURBATION_FLAG_LEVEL),
    )


def gamma2(model: PhononModel, xi: float, b0: float, temperature: float, times) -> PhononDecay:
    """Two-excitation decay: dominant channels plus the 4 xi / N correction.

    The dominant part (one of the two spin waves stays at k = 0) is exactly
    twice the one-excitation result.  The full sum runs over ordered momentum
    pairs (k, k') != (0, 0) with the phonon pinned at q = -(k + k'), keeping
    the -(4 xi / N) amplitude and its interference with the dominant one;
    pairs with k + k' = 0 are dropped with the q = 0 mode.
    """
    times = np.asarray(times, dtype=float)
    keep, g, w_ph, w_sp = _mode_tables(model)
    n = model.lattice.n_sites
    kbt = temperature * model.phonon_energy_unit
    amp_dom = xi + 4.0 * b0
    base = 1.0 / (2.0 * n * np.sqrt(model.beta))

    dec1 = _decay_sum(base * amp_dom**2 * g, w_ph,
                      np.broadcast_to(w_sp[:, None], w_ph.shape), kbt, times)
    dominant = 2.0 * dec1

    # full ordered-pair sum
    full = _gamma2_full(model, keep, g, w_ph, w_sp, xi, b0, kbt, times)
    norm = full * np.sqrt(model.beta) / amp_dom**2 if amp_dom != 0 else full * 0.0
    corr = float(np.max(np.abs(full - dominant)) / max(np.max(dominant), 1e-300))
    return PhononDecay(
        times=times,
        decay=full,
        decay_normalized=norm,
        temperature=temperature,
        beyond_perturbative=bool(full.max(initial=0.0) > PERTURBATION_FLAG_LEVEL),
        decay_dominant=dominant,
        correction_ratio=corr,
    )


def _grid_index_map(grid: MomentumGrid):
    from .lattice import grid_labels

    keys = grid_labels(grid.kvecs, grid.reciprocal_vectors, grid.n_points)
    return {k: i for i, k in enumerate(keys)}, keys


def _gamma2_full(model, keep, g, w_ph, w_sp, xi, b0, kbt, times):
    grid = model.grid
    n = model.lattice.n_sites
    index_of, keys = _grid_index_map(grid)
    nq = grid.n_points
    amp_dom = xi + 4.0 * b0
    base = 1.0 / (2.0 * n * np.sqrt(model.beta))

    # map from grid index to row in the q != 0 tables
    row_of = {int(iq): r for r, iq in enumerate(keep)}

    # spin-wave energy for every grid point including k = 0
    w_sp_all = model.spin_energies

    # enumerate ordered pairs; q index of -(k+k') via integer keys
    kv = grid.kvecs
    recip = grid.reciprocal_vectors
    frac = np.linalg.solve(recip.T, kv.T).T  # fractional coords, multiples of 1/L
    fr_int = np.round(frac * nq).astype(int) % nq

    weights, om_p, om_m, occs = [], [], [], []
    for ik in range(nq):
        for ikp in range(nq):
            if ik == 0 and ikp == 0:
                continue
            fq = tuple((-(fr_int[ik] + fr_int[ikp])) % nq)
            iq = index_of.get(fq)
            if iq is None or iq == 0:
                continue  # q = 0 excluded
            r = row_of[iq]
            amp = -4.0 * xi / n
            if ikp == 0:
                amp += amp_dom
            if ik == 0:
                amp += amp_dom
            wsum = w_sp_all[ik] + w_sp_all[ikp]
            for lam in range(model.n_branches):
                weights.append(base * amp**2 * g[r, lam])
                om_p.append(w_ph[r, lam] + wsum)
                om_m.append(w_ph[r, lam] - wsum)
                occs.append(w_ph[r, lam])
    weights = np.array(weights)
    om_p = np.array(om_p)
    om_m = np.array(om_m)
    nocc = _occupation(np.array(occs), kbt)
    acc = (weights * (nocc + 1.0) * _osc_integral(om_p, times)).sum(axis=1)
    acc += (weights * nocc * _osc_integral(om_m, times)).sum(axis=1)
    return 2.0 * acc


def gamma1_fgr(model: PhononModel, xi: float, b0: float, temperature: float,
               grid_factors=(1, 2), base_side: int | None = None) -> dict:
    """Golden-rule rate by Gaussian-broadened resonance quadrature.

    Deltas are broadened with a per-mode width of twice the local spacing of
    the resonance variable; the rate is reported for a sequence of momentum
    grids (``grid_factors`` scale the lattice) as a refinement study.  In 1D
    the closed-form small-q limit

        gamma ~ (xi + 4 b0)^2 sqrt(3 zeta(3)) sqrt(beta) k_B T / (4 u_dd^2)

    is reported for comparison.
    """
    lat = model.lattice
    side = base_side or (lat.n_sites if lat.dimension == 1 else int(round(np.sqrt(lat.n_sites))))
    rates = []
    for fac in grid_factors:
        if lat.dimension == 1:
            big = build_lattice("chain", side * fac, boundary="periodic")
        else:
            big = build_lattice(lat.kind, (side * fac) ** 2, boundary="periodic")
        m = build_phonon_model(big, model.beta, model.u_dd, model.kappa)
        rates.append(_fgr_rate(m, xi, b0, temperature))
    out = {
        "rates": rates,
        "grid_factors": list(grid_factors),
        "rate": rates[-1],
        "resonant": rates[-1] > 0.0,
    }
    if lat.dimension == 1:
        kbt = temperature * model.phonon_energy_unit
        out["asymptote_1d"] = float(
            (xi + 4.0 * b0) ** 2 * np.sqrt(3.0 * ZETA3) * np.sqrt(model.beta) * kbt
            / (4.0 * model.u_dd**2)
        )
    return out


def _fgr_rate(model: PhononModel, xi: float, b0: float, temperature: float) -> float:
    keep, g, w_ph, w_sp = _mode_tables(model)
    kbt = temperature * model.phonon_energy_unit
    n = model.lattice.n_sites
    dim = model.lattice.dimension
    # BZ volume element per mode in (ka) units; the zone volume is the
    # reciprocal-cell determinant (non-square for the triangular lattice)
    dvol = abs(np.linalg.det(model.grid.reciprocal_vectors)) / n
    nocc = _occupation(w_ph, kbt)
    total = 0.0
    for lam in range(model.n_branches):
        for sign, wt in ((-1.0, nocc[:, lam] + 1.0), (+1.0, nocc[:, lam])):
            om = w_ph[:, lam] + sign * w_sp
            sig = 2.0 * _local_spacing(model, om)
            delta = np.exp(-(om**2) / (2.0 * sig**2)) / (sig * np.sqrt(2.0 * np.pi))
            total += float((g[:, lam] * wt * delta).sum() * dvol / (2.0 * np.pi) ** dim)
    return np.pi * (xi + 4.0 * b0) ** 2 / np.sqrt(model.beta) * total


def _local_spacing(model: PhononModel, values: np.ndarray) -> np.ndarray:
    """Per-mode spacing of `values` (defined on the q != 0 grid) along the
    grid axes; floor avoids zero widths at symmetry points."""
    lat = model.lattice
    if lat.dimension == 1:
        full = np.concatenate([[values[0]], values])  # re-insert a stand-in for q=0
        d = np.abs(np.diff(full, append=full[-1]))
        d2 = np.abs(np.diff(full, prepend=full[0]))
        sp = np.maximum(d, d2)[1:]
    else:
        side = int(round(np.sqrt(lat.n_sites)))
        full = np.empty(lat.n_sites)
        full[1:] = values
        full[0] = values[0]
        grid = full.reshape(side, side)
        dx = np.abs(np.diff(grid, axis=0, append=grid[:1, :]))
        dy = np.abs(np.diff(grid, axis=1, append=grid[:, :1]))
        sp = np.maximum(dx, dy).ravel()[1:]
    floor = max(values.max() * 1e-8, 1e-300)
    return np.maximum(sp, floor)

"""Dense exact propagation for small systems.

Ground truth for the tensor-network engine: assembles the Hamiltonian in the
single-excitation sector (one photon or one electronic excitation) tensored
with the full vibrational product basis, diagonalizes it once, and evaluates
the same observables as the MPS path at arbitrary times.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import DisorderRealization, HtcParams
from .mps import normalize_excitation
from .observables import (
    ObservableRecord,
    ObservableTimeSeries,
    TailConfig,
    TailOperator,
    tail_operator,
)


class BasisTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class DenseBasis:
    """Single-excitation sector times a full vibrational Fock product basis.

    Electro-photonic index s: 0 means the photon is excited, s = n means
    molecule n (1-based) is excited. Vibrational configurations are row-major
    over per-molecule occupations 0..n_max_v.
    """

    n_molecules: int
    n_max_v: int

    @property
    def d_vib(self) -> int:
        return self.n_max_v + 1

    @property
    def dim_ep(self) -> int:
        return self.n_molecules + 1

    @property
    def dim_vib(self) -> int:
        return self.d_vib**self.n_molecules

    @property
    def dim(self) -> int:
        return self.dim_ep * self.dim_vib

    def index(self, s: int, occupations: tuple[int, ...]) -> int:
        iv = 0
        for occ in occupations:
            iv = iv * self.d_vib + occ
        return s * self.dim_vib + iv


def _vib_operator(basis: DenseBasis, op: np.ndarray, n: int) -> np.ndarray:
    """Embed a single-mode operator on vibrational slot n (1-based)."""
    out = np.eye(1)
    for k in range(1, basis.n_molecules + 1):
        out = np.kron(out, op if k == n else np.eye(basis.d_vib))
    return out


def build_dense_hamiltonian(
    params: HtcParams,
    realization: DisorderRealization,
    n_max_v: int,
    dim_cap: int = 20_000,
) -> np.ndarray:
    """Assemble the Hamiltonian term by term as a dense Hermitian matrix."""
    basis = DenseBasis(params.n_molecules, n_max_v)
    if basis.dim > dim_cap:
        raise BasisTooLarge(f"dense dimension {basis.dim} exceeds cap {dim_cap}")
    if realization.n_molecules != params.n_molecules:
        raise ValueError("realization does not match params")
    n = params.n_molecules
    d = basis.d_vib
    bop = np.diag(np.sqrt(np.arange(1, d)), 1)
    nvib = bop.T @ bop
    xb = bop + bop.T
    h = np.zeros((basis.dim, basis.dim))
    eye_vib = np.eye(basis.dim_vib)
    for m in range(1, n + 1):
        proj = np.zeros((basis.dim_ep, basis.dim_ep))
        proj[m, m] = 1.0
        hop = np.zeros((basis.dim_ep, basis.dim_ep))
        hop[0, m] = hop[m, 0] = 1.0
        h += (params.delta + realization.epsilons[m - 1]) * np.kron(proj, eye_vib)
        h += params.nu * np.kron(np.eye(basis.dim_ep), _vib_operator(basis, nvib, m))
        h += -params.lam * params.nu * np.kron(proj, _vib_operator(basis, xb, m))
        h += params.g * np.kron(hop, eye_vib)
    return h


def initial_dense_state(basis: DenseBasis, excitation: str | tuple) -> np.ndarray:
    """Dense vector for a single cavity or molecule excitation, vacuum modes."""
    kind, index = normalize_excitation(excitation)
    psi = np.zeros(basis.dim, dtype=np.complex128)
    s = 0 if kind == "cavity" else index
    psi[basis.index(s, (0,) * basis.n_molecules)] = 1.0
    return psi


def measure_dense(
    psi: np.ndarray, basis: DenseBasis, t: float, tails: TailOperator
) -> ObservableRecord:
    """Evaluate the standard observable record on a dense state."""
    n = basis.n_molecules
    d = basis.d_vib
    block = psi.reshape(basis.dim_ep, *([d] * n))
    amp2 = np.abs(block.reshape(basis.dim_ep, -1)) ** 2
    n_ph = float(np.sum(amp2[0]))
    n_exc = amp2[1:].sum(axis=1)
    svals = np.linalg.svd(block.reshape(basis.dim_ep, -1), compute_uv=False)
    p2 = svals**2
    p2 = p2[p2 > 1e-300]
    s_vib = float(-np.sum(p2 * np.log2(p2)))
    bop = np.diag(np.sqrt(np.arange(1, d)), 1)
    xop = (bop + bop.T) / np.sqrt(2.0)
    pop = 1j * (bop.T - bop) / np.sqrt(2.0)
    xs = np.zeros(n)
    ps = np.zeros(n)
    eta_l = eta_r = 0.0
    top_occ = 0.0
    axes = list(range(n + 1))
    for m in range(1, n + 1):
        others = [ax for ax in axes if ax != m]
        rho = np.tensordot(block, block.conj(), axes=(others, others))
        xs[m - 1] = float(np.real(np.trace(rho @ xop)))
        ps[m - 1] = float(np.real(np.trace(rho @ pop)))
        eta_r += float(np.real(np.sum(rho * tails.right.T)))
        eta_l += float(np.real(np.sum(rho * tails.left.T)))
        top_occ = max(top_occ, float(np.real(rho[-1, -1])))
    return ObservableRecord(
        t=float(t),
        s_vib=s_vib,
        n_ph=n_ph,
        n_exc=n_exc,
        x=xs,
        p=ps,
        eta_l=eta_l,
        eta_r=eta_r,
        norm=float(np.linalg.norm(psi)),
        cumulative_truncation=0.0,
        max_bond=0,
        q_variance=0.0,  # the basis itself is the fixed-excitation sector
        top_fock_occupation=top_occ,
    )


def evolve_exact(
    h: np.ndarray,
    psi0: np.ndarray,
    times: np.ndarray,
    basis: DenseBasis,
    tail: TailConfig | None = None,
) -> tuple[np.ndarray, ObservableTimeSeries]:
    """Propagate by full eigendecomposition; returns trajectories and records."""
    if np.max(np.abs(h - h.conj().T)) > 1e-10:
        raise ValueError("Hamiltonian is not Hermitian")
    tails = tail_operator(tail or TailConfig(), basis.d_vib)
    evals, evecs = np.linalg.eigh(h)
    coeff = evecs.conj().T @ psi0
    times = np.asarray(times, dtype=float)
    traj = np.empty((times.size, basis.dim), dtype=np.complex128)
    records = []
    for i, t in enumerate(times):
        psi = evecs @ (np.exp(-1j * evals * t) * coeff)
        traj[i] = psi
        records.append(measure_dense(psi, basis, t, tails))
    series = ObservableTimeSeries.from_records(records, method="ed", metadata={})
    return traj, series


def dark_photon_weight_numeric(
    params: HtcParams, realization: DisorderRealization
) -> float:
    """Photon weight carried by the dark manifold, from exact diagonalization.

    Diagonalizes the electro-photonic sector with frozen vibrations and
    subtracts the photon weight of the two polariton-like eigenstates,
    identified as the two states of largest photon weight. In the weak
    coupling regime (disorder width comparable to the collective coupling)
    that identification becomes ambiguous and a warning is issued.
    """
    n = params.n_molecules
    h = np.zeros((n + 1, n + 1))
    for m in range(1, n + 1):
        h[m, m] = params.delta + realization.epsilons[m - 1]
        h[0, m] = h[m, 0] = params.g
    _, evecs = np.linalg.eigh(h)
    photon_weight = np.abs(evecs[0, :]) ** 2
    order = np.argsort(photon_weight)[::-1]
    top2 = photon_weight[order[:2]]
    if params.disorder_width >= params.g_collective or (
        len(order) > 2 and photon_weight[order[2]] > 0.5 * top2[1]
    ):
        warnings.warn(
            "polariton identification by photon weight is ambiguous "
            f"(weights {photon_weight[order[:3]]})",
            stacklevel=2,
        )
    return float(1.0 - top2.sum())

"""Figure-level observables: expectations, entropies, distributions, tails.

The reaction coordinate of each molecule is the dimensionless oscillator
position ``x = (b + b^dag)/sqrt(2)`` whose ground state is a Gaussian of
variance 1/2. Tail weights integrate the per-molecule position distribution
beyond fixed thresholds chosen so the ground state contributes ``eta0`` per
side, then sum over molecules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, erfinv

from .model import DisorderRealization
from .mps import MatrixProductState, vib_block_entropy


@dataclass(frozen=True)
class TailConfig:
    """Thresholds defining the left/right tails of the position distribution."""

    eta0: float = 1e-2
    x_thr_r: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.eta0 < 0.5:
            raise ValueError("eta0 must lie in (0, 1/2)")
        consistent = float(erfinv(1 - 2 * self.eta0))
        if self.x_thr_r is None:
            object.__setattr__(self, "x_thr_r", consistent)
        elif abs((1 - erf(self.x_thr_r)) / 2 - self.eta0) > 1e-10:
            raise ValueError("x_thr_r inconsistent with eta0")

    @property
    def x_thr_l(self) -> float:
        return -self.x_thr_r


@dataclass(frozen=True)
class TailOperator:
    """Matrix elements of the indicator of each tail in the Fock basis.

    ``right[a, b] = integral_{x > x_thr_r} phi_a(x) phi_b(x) dx`` with phi_a
    the dimensionless harmonic-oscillator eigenfunctions; ``left`` likewise
    for ``x < x_thr_l``. Both are symmetric with eigenvalues in [0, 1].
    """

    right: np.ndarray
    left: np.ndarray
    config: TailConfig


def _hermite_values(c: float, nmax: int) -> np.ndarray:
    """Physicists' Hermite polynomials H_0..H_nmax evaluated at c."""
    h = np.empty(nmax + 1)
    h[0] = 1.0
    if nmax >= 1:
        h[1] = 2.0 * c
    for n in range(1, nmax):
        h[n + 1] = 2.0 * c * h[n] - 2.0 * n * h[n - 1]
    return h


def right_tail_matrix(threshold: float, d: int) -> np.ndarray:
    """Exact tail integrals via the Hermite two-index recursion.

    Builds I[a, b] = integral_threshold^inf H_a(x) H_b(x) exp(-x^2) dx from
    the boundary terms of d/dx [H_a H_b exp(-x^2)], which give
    I[a+1, b] = 2 b I[a, b-1] + H_a(c) H_b(c) exp(-c^2), then normalizes to
    oscillator eigenfunctions.
    """
    c = float(threshold)
    hv = _hermite_values(c, d)
    ec = math.exp(-(c * c))
    imat = np.zeros((d, d))
    imat[0, 0] = math.sqrt(math.pi) * 0.5 * (1.0 - erf(c))
    for k in range(1, d):
        imat[k, 0] = imat[0, k] = hv[k - 1] * ec
    for a in range(d - 1):
        for b in range(1, d):
            imat[a + 1, b] = 2.0 * b * imat[a, b - 1] + hv[a] * hv[b] * ec
    lf = np.array([math.lgamma(k + 1) for k in range(d)])
    ln = 0.5 * (lf[:, None] + lf[None, :]) \
        + 0.5 * math.log(2.0) * np.add.outer(np.arange(d), np.arange(d)) \
        + 0.25 * math.log(math.pi) * 2
    out = imat * np.exp(-ln)
    return 0.5 * (out + out.T)


def tail_operator(config: TailConfig, d: int) -> TailOperator:
    """Tail-indicator matrices for a Fock space truncated at dimension ``d``."""
    if d < 1:
        raise ValueError("Fock dimension must be >= 1")
    right = right_tail_matrix(config.x_thr_r, d)
    # reflection parity: left tail below -c equals the sign-flipped right tail
    parity = (-1.0) ** (np.add.outer(np.arange(d), np.arange(d)))
    left = parity * right_tail_matrix(-config.x_thr_l, d)
    return TailOperator(right=right, left=left, config=config)


def hermite_functions(grid: np.ndarray, d: int) -> np.ndarray:
    """Oscillator eigenfunctions phi_0..phi_{d-1} on ``grid`` (stable recursion)."""
    x = np.asarray(grid, dtype=float)
    phi = np.empty((d, x.size))
    phi[0] = np.pi ** (-0.25) * np.exp(-0.5 * x * x)
    if d > 1:
        phi[1] = np.sqrt(2.0) * x * phi[0]
    for n in range(1, d - 1):
        phi[n + 1] = np.sqrt(2.0 / (n + 1)) * x * phi[n] - np.sqrt(n / (n + 1)) * phi[n - 1]
    return phi


DEFAULT_GRID = np.linspace(-5.0, 8.0, 651)


def distribution_from_rdm(rho: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Position distribution P(x) = sum_ab rho_ab phi_a(x) phi_b(x)."""
    phi = hermite_functions(grid, rho.shape[0])
    return np.real(np.einsum("ai,ab,bi->i", phi, rho, phi, optimize=True))


# ----------------------------------------------------------------------
# per-state measurement
# ----------------------------------------------------------------------
@dataclass
class ObservableRecord:
    """All recorded quantities at one time."""

    t: float
    s_vib: float
    n_ph: float
    n_exc: np.ndarray
    x: np.ndarray
    p: np.ndarray
    eta_l: float
    eta_r: float
    norm: float
    cumulative_truncation: float
    max_bond: int
    q_variance: float = 0.0
    top_fock_occupation: float = 0.0
    sort_truncation: float = 0.0


def measure_state(
    state: MatrixProductState, t: float, tails: TailOperator
) -> ObservableRecord:
    """One full observation of an MPS: single sweep plus the entropy network.

    The left-to-right sweep collects every local quantity and carries the
    one-insertion environment needed for the excitation-number variance, so
    the cost is a single pass regardless of the number of observables.
    """
    n_mol = sum(1 for k, _ in state.site_labels if k == "vib")
    n_exc = np.zeros(n_mol)
    xs = np.zeros(n_mol)
    ps = np.zeros(n_mol)
    eta_l = eta_r = 0.0
    n_ph = 0.0
    top_occ = 0.0
    mean_q = 0.0
    sum_sq = 0.0
    env_q = np.zeros((1, 1), dtype=np.complex128)

    state.move_center(0)
    norm = state.norm()
    for pos in range(state.n_sites):
        a = state.tensors[pos]
        kind, idx = state.site_labels[pos]
        qdiag = None
        if kind == "ph":
            qdiag = np.arange(a.shape[1], dtype=float)
            n_ph = float(np.real(np.vdot(a, a * qdiag[None, :, None])))
        elif kind == "exc":
            qdiag = np.array([0.0, 1.0])
            n_exc[idx - 1] = float(np.real(np.vdot(a, a * qdiag[None, :, None])))
        else:
            rho = np.tensordot(a, a.conj(), axes=([0, 2], [0, 2]))
            d = rho.shape[0]
            bop = np.diag(np.sqrt(np.arange(1, d)), 1)
            xs[idx - 1] = float(np.real(np.trace(rho @ (bop + bop.T)))) / np.sqrt(2.0)
            ps[idx - 1] = float(np.real(np.trace(rho @ (1j * (bop.T - bop))))) / np.sqrt(2.0)
            eta_r += float(np.real(np.sum(rho * tails.right.T)))
            eta_l += float(np.real(np.sum(rho * tails.left.T)))
            top_occ = max(top_occ, float(np.real(rho[-1, -1])))
        if qdiag is not None:
            aq = a * qdiag[None, :, None]
            mean_q += float(np.real(np.vdot(a, aq)))
            sum_sq += float(np.real(np.vdot(a, a * (qdiag**2)[None, :, None])))
            sum_sq += 2.0 * float(
                np.real(np.einsum("lar,lm,mar->", a.conj(), env_q, aq, optimize=True))
            )
        if pos < state.n_sites - 1:
            state.move_center(pos + 1)
            w = state.tensors[pos]  # now left-orthonormal
            env_q = np.einsum("lar,lm,mas->rs", w.conj(), env_q, w, optimize=True)
            if qdiag is not None:
                env_q += np.einsum(
                    "lar,las->rs", w.conj(), w * qdiag[None, :, None], optimize=True
                )
    q_var = sum_sq - mean_q * mean_q
    info: dict = {}
    s_vib = vib_block_entropy(state, info=info)
    return ObservableRecord(
        t=float(t),
        s_vib=s_vib,
        n_ph=n_ph,
        n_exc=n_exc,
        x=xs,
        p=ps,
        eta_l=eta_l,
        eta_r=eta_r,
        norm=float(norm),
        cumulative_truncation=state.cumulative_truncation_weight,
        max_bond=state.max_bond_reached,
        q_variance=q_var,
        top_fock_occupation=top_occ,
        sort_truncation=info.get("sort_truncation", 0.0),
    )


def tail_weights(state: MatrixProductState, config: TailConfig) -> tuple[float, float]:
    """Summed tail weights (left, right) over all molecular modes."""
    d = state.physical_dim(state.position_of(("vib", 1)))
    ops = tail_operator(config, d)
    eta_l = eta_r = 0.0
    n_mol = sum(1 for k, _ in state.site_labels if k == "vib")
    for n in range(1, n_mol + 1):
        rho = state.reduced_density_matrix(("vib", n))
        eta_r += float(np.real(np.sum(rho * ops.right.T)))
        eta_l += float(np.real(np.sum(rho * ops.left.T)))
    return eta_l, eta_r


def position_distribution(
    state: MatrixProductState, molecule_index: int, grid: np.ndarray = DEFAULT_GRID
) -> np.ndarray:
    """Reaction-coordinate distribution of one molecule on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a nonempty sorted 1-d array")
    rho = state.reduced_density_matrix(("vib", molecule_index))
    return distribution_from_rdm(rho, grid)


# ----------------------------------------------------------------------
# time series
# ----------------------------------------------------------------------
SCALAR_FIELDS = ("s_vib", "n_ph", "eta_l", "eta_r", "norm", "trunc", "max_bond")


@dataclass
class ObservableTimeSeries:
    """Columnar time series of records from one evolution."""

    method: str
    times: np.ndarray
    s_vib: np.ndarray
    n_ph: np.ndarray
    eta_l: np.ndarray
    eta_r: np.ndarray
    norm: np.ndarray
    trunc: np.ndarray
    max_bond: np.ndarray
    n_exc: np.ndarray  # (n_times, N)
    x: np.ndarray
    p: np.ndarray
    q_variance: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_molecules(self) -> int:
        return self.n_exc.shape[1]

    @classmethod
    def from_records(
        cls, records: list[ObservableRecord], method: str, metadata: dict | None = None
    ) -> "ObservableTimeSeries":
        if not records:
            return cls(
                method=method,
                times=np.zeros(0),
                s_vib=np.zeros(0),
                n_ph=np.zeros(0),
                eta_l=np.zeros(0),
                eta_r=np.zeros(0),
                norm=np.zeros(0),
                trunc=np.zeros(0),
                max_bond=np.zeros(0, dtype=int),
                n_exc=np.zeros((0, 0)),
                x=np.zeros((0, 0)),
                p=np.zeros((0, 0)),
                q_variance=np.zeros(0),
                metadata=metadata or {},
            )
        return cls(
            method=method,
            times=np.array([r.t for r in records]),
            s_vib=np.array([r.s_vib for r in records]),
            n_ph=np.array([r.n_ph for r in records]),
            eta_l=np.array([r.eta_l for r in records]),
            eta_r=np.array([r.eta_r for r in records]),
            norm=np.array([r.norm for r in records]),
            trunc=np.array([r.cumulative_truncation for r in records]),
            max_bond=np.array([r.max_bond for r in records], dtype=int),
            n_exc=np.vstack([r.n_exc for r in records]),
            x=np.vstack([r.x for r in records]),
            p=np.vstack([r.p for r in records]),
            q_variance=np.array([r.q_variance for r in records]),
            metadata=metadata or {},
        )

    def column(self, name: str) -> np.ndarray:
        if name == "t":
            return self.times
        return getattr(self, name)


def transfer_probability(series: ObservableTimeSeries, which: str, nu: float) -> float:
    """Time-averaged loss of survival over one vibrational period.

    ``which`` selects the initially excited degree of freedom: "molecule"
    follows the first molecule's electronic occupation, "cavity" the photon
    number. The average runs over t in [0, 2*pi/nu].
    """
    period = 2 * np.pi / nu
    t = series.times
    if t.size < 2 or t[-1] < period - 1e-9:
        raise ValueError(f"series covers [0, {t[-1]:.4g}], needs [0, {period:.4g}]")
    if which == "molecule":
        survival = series.n_exc[:, 0]
    elif which == "cavity":
        survival = series.n_ph
    else:
        raise ValueError(f"unknown survival channel {which!r}")
    mask = t <= period + 1e-12
    tt = t[mask]
    loss = 1.0 - survival[mask]
    if tt[-1] < period - 1e-12:
        end = np.interp(period, t, 1.0 - survival)
        tt = np.append(tt, period)
        loss = np.append(loss, end)
    return float(np.trapezoid(loss, tt) / period)


def excitation_vs_energy(
    series: ObservableTimeSeries, realization: DisorderRealization
) -> list[tuple[float, float]]:
    """(energy offset, final electronic occupation) pairs for scatter output."""
    final = series.n_exc[-1]
    if len(realization.epsilons) != final.size:
        raise ValueError("realization size does not match series")
    return [(float(e), float(v)) for e, v in zip(realization.epsilons, final)]


@dataclass
class AveragedSeries:
    """Pointwise ensemble mean and standard error of member series."""

    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    n_realizations: int


def disorder_average(members: list[ObservableTimeSeries]) -> AveragedSeries:
    """Average member series on their (identical) time grids."""
    if not members:
        raise ValueError("no series to average")
    t0 = members[0].times
    for m in members[1:]:
        if m.times.shape != t0.shape or np.max(np.abs(m.times - t0)) > 1e-9:
            raise ValueError("time grids differ between members")
    fields = ["s_vib", "n_ph", "eta_l", "eta_r", "norm", "trunc", "n_exc", "x", "p"]
    mean: dict[str, np.ndarray] = {}
    stderr: dict[str, np.ndarray] = {}
    k = len(members)
    for f in fields:
        stack = np.stack([m.column(f) for m in members])
        mean[f] = stack.mean(axis=0)
        if k > 1:
            stderr[f] = stack.std(axis=0, ddof=1) / np.sqrt(k)
        else:
            stderr[f] = np.zeros_like(mean[f])
    return AveragedSeries(times=t0.copy(), mean=mean, stderr=stderr, n_realizations=k)

"""Matrix product state container and primitive manipulations.

The state lives on a chain of 2N+1 sites ordered (photon, exc_1, vib_1, ...,
exc_N, vib_N). Sites are addressed by *labels* ``("ph", 0)``, ``("exc", n)``,
``("vib", n)`` that survive swap gates, so observables never depend on the
current chain permutation. The state is kept in mixed-canonical form around
``ortho_center``; two-site updates truncate to ``chi_max`` singular values
above ``svd_cutoff``, renormalize, and accumulate the discarded weight.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import HtcParams

SiteLabel = tuple[str, int]

CHECKPOINT_MAGIC = b"HTCMPS01"


class MpsError(RuntimeError):
    """Raised on malformed states, bad labels, or failed decompositions."""


class TruncationAlarm(UserWarning):
    """Signals that a reordering network discarded more weight than expected."""


@dataclass
class BondSpectrum:
    """Schmidt spectrum across one bond, descending."""

    singular_values: np.ndarray

    def entropy_bits(self) -> float:
        p = self.singular_values.astype(float) ** 2
        p = p[p > 1e-300]
        return float(-np.sum(p * np.log2(p)))


def _svd(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not np.all(np.isfinite(mat)):
        raise MpsError("non-finite tensor data passed to SVD")
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        import scipy.linalg

        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


class MatrixProductState:
    """Mixed-canonical MPS with label-indexed sites.

    Parameters
    ----------
    tensors:
        Rank-3 arrays ``(chi_left, d, chi_right)``; edge bonds have size 1.
    labels:
        One ``(kind, index)`` label per site, tracking the physical identity
        of each chain position through swaps.
    chi_max:
        Bond-dimension cap applied at every two-site update.
    svd_cutoff:
        Singular values below this are discarded (their squared weight is
        accumulated in ``cumulative_truncation_weight``).
    """

    def __init__(
        self,
        tensors: list[np.ndarray],
        labels: list[SiteLabel],
        chi_max: int = 128,
        svd_cutoff: float = 1e-12,
    ) -> None:
        if len(tensors) != len(labels):
            raise MpsError("one label per tensor required")
        self.tensors = [np.asarray(t, dtype=np.complex128) for t in tensors]
        self.site_labels = list(labels)
        self.chi_max = int(chi_max)
        self.svd_cutoff = float(svd_cutoff)
        self.ortho_center = 0
        self.cumulative_truncation_weight = 0.0
        self.max_bond_reached = max(t.shape[2] for t in self.tensors[:-1]) if len(tensors) > 1 else 1

    # ------------------------------------------------------------------
    # basic structure
    # ------------------------------------------------------------------
    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def physical_dim(self, pos: int) -> int:
        return self.tensors[pos].shape[1]

    def position_of(self, label: SiteLabel) -> int:
        try:
            return self.site_labels.index(tuple(label))
        except ValueError:
            raise MpsError(f"unknown site label {label!r}") from None

    def bond_dimensions(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MatrixProductState":
        out = MatrixProductState(
            [t.copy() for t in self.tensors],
            list(self.site_labels),
            chi_max=self.chi_max,
            svd_cutoff=self.svd_cutoff,
        )
        out.ortho_center = self.ortho_center
        out.cumulative_truncation_weight = self.cumulative_truncation_weight
        out.max_bond_reached = self.max_bond_reached
        return out

    def norm(self) -> float:
        """Norm of the state, read off the orthogonality-center tensor."""
        a = self.tensors[self.ortho_center]
        return float(np.sqrt(np.real(np.vdot(a, a))))

    # ------------------------------------------------------------------
    # canonical form
    # ------------------------------------------------------------------
    def _shift_right(self) -> None:
        c = self.ortho_center
        a = self.tensors[c]
        l, d, r = a.shape
        q, rmat = np.linalg.qr(a.reshape(l * d, r))
        self.tensors[c] = q.reshape(l, d, -1)
        self.tensors[c + 1] = np.tensordot(rmat, self.tensors[c + 1], axes=(1, 0))
        self.ortho_center = c + 1

    def _shift_left(self) -> None:
        c = self.ortho_center
        a = self.tensors[c]
        l, d, r = a.shape
        q, rmat = np.linalg.qr(a.reshape(l, d * r).conj().T)
        self.tensors[c] = q.conj().T.reshape(-1, d, r)
        self.tensors[c - 1] = np.tensordot(self.tensors[c - 1], rmat.conj().T, axes=(2, 0))
        self.ortho_center = c - 1

    def move_center(self, pos: int) -> None:
        if not 0 <= pos < self.n_sites:
            raise MpsError(f"center position {pos} out of range")
        while self.ortho_center < pos:
            self._shift_right()
        while self.ortho_center > pos:
            self._shift_left()

    def canonical_deviation(self) -> float:
        """Max deviation of the left/right isometry conditions from identity."""
        worst = 0.0
        for i, t in enumerate(self.tensors):
            l, d, r = t.shape
            if i < self.ortho_center:
                m = t.reshape(l * d, r)
                worst = max(worst, float(np.max(np.abs(m.conj().T @ m - np.eye(r)))))
            elif i > self.ortho_center:
                m = t.reshape(l, d * r)
                worst = max(worst, float(np.max(np.abs(m @ m.conj().T - np.eye(l)))))
        return worst

    # ------------------------------------------------------------------
    # two-site updates
    # ------------------------------------------------------------------
    def apply_two_site_gate(
        self,
        bond: int,
        gate: np.ndarray | None,
        swap: bool = False,
        center_after: str = "right",
        renormalize: bool = True,
    ) -> float:
        """Apply a two-site unitary (and/or a site swap) across ``bond``.

        ``gate`` is a ``(d1*d2, d1*d2)`` matrix in the kron convention with
        the left site as the first factor, or None for a pure swap. With
        ``swap=True`` the two physical indices (and labels) are exchanged
        after the gate acts. Returns the discarded squared singular-value
        weight, which is also added to ``cumulative_truncation_weight``.
        """
        i = bond
        if not 0 <= i < self.n_sites - 1:
            raise MpsError(f"bond {i} out of range")
        if self.ortho_center < i or self.ortho_center > i + 1:
            self.move_center(i if abs(self.ortho_center - i) < abs(self.ortho_center - i - 1) else i + 1)
        a, b = self.tensors[i], self.tensors[i + 1]
        chi_l, d1 = a.shape[0], a.shape[1]
        d2, chi_r = b.shape[1], b.shape[2]
        theta = np.tensordot(a, b, axes=(2, 0))  # (chi_l, d1, d2, chi_r)
        if gate is not None:
            if gate.shape != (d1 * d2, d1 * d2):
                raise MpsError(
                    f"gate shape {gate.shape} does not match site dims ({d1},{d2})"
                )
            theta = np.tensordot(
                gate.reshape(d1, d2, d1, d2), theta, axes=([2, 3], [1, 2])
            ).transpose(2, 0, 1, 3)
        if swap:
            theta = theta.transpose(0, 2, 1, 3)
            d1, d2 = d2, d1
            self.site_labels[i], self.site_labels[i + 1] = (
                self.site_labels[i + 1],
                self.site_labels[i],
            )
        u, s, vh = _svd(theta.reshape(chi_l * d1, d2 * chi_r))
        keep = int(np.count_nonzero(s > self.svd_cutoff))
        keep = max(1, min(keep, self.chi_max))
        discarded = float(np.sum(s[keep:] ** 2))
        s = s[:keep]
        if renormalize:
            s = s / np.sqrt(np.sum(s**2))
        if center_after == "right":
            self.tensors[i] = u[:, :keep].reshape(chi_l, d1, keep)
            self.tensors[i + 1] = (s[:, None] * vh[:keep]).reshape(keep, d2, chi_r)
            self.ortho_center = i + 1
        else:
            self.tensors[i] = (u[:, :keep] * s).reshape(chi_l, d1, keep)
            self.tensors[i + 1] = vh[:keep].reshape(keep, d2, chi_r)
            self.ortho_center = i
        self.cumulative_truncation_weight += discarded
        if keep > self.max_bond_reached:
            self.max_bond_reached = keep
        return discarded

    def swap_sites(self, bond: int, center_after: str = "right") -> float:
        """Exchange the physical sites across ``bond`` (labels move along)."""
        return self.apply_two_site_gate(bond, None, swap=True, center_after=center_after)

    # ------------------------------------------------------------------
    # spectra and entropies
    # ------------------------------------------------------------------
    def bond_spectrum(self, bond: int) -> BondSpectrum:
        if not 0 <= bond < self.n_sites - 1:
            raise MpsError(f"bond {bond} out of range")
        self.move_center(bond)
        a = self.tensors[bond]
        l, d, r = a.shape
        s = np.linalg.svd(a.reshape(l * d, r), compute_uv=False)
        return BondSpectrum(singular_values=s)

    def bond_entropy(self, bond: int) -> float:
        """Von Neumann entropy (bits) of the bipartition across ``bond``."""
        return self.bond_spectrum(bond).entropy_bits()

    # ------------------------------------------------------------------
    # local quantities
    # ------------------------------------------------------------------
    def local_expectation(self, label: SiteLabel, op: np.ndarray) -> complex:
        """Expectation value of a single-site operator, label-indexed."""
        pos = self.position_of(label)
        self.move_center(pos)
        a = self.tensors[pos]
        if op.shape != (a.shape[1], a.shape[1]):
            raise MpsError(
                f"operator shape {op.shape} does not match site dim {a.shape[1]}"
            )
        return complex(np.vdot(a, np.tensordot(op, a, axes=(1, 1)).transpose(1, 0, 2)))

    def reduced_density_matrix(self, label: SiteLabel) -> np.ndarray:
        """Single-site reduced density matrix (ket index first)."""
        pos = self.position_of(label)
        self.move_center(pos)
        a = self.tensors[pos]
        return np.tensordot(a, a.conj(), axes=([0, 2], [0, 2]))

    def two_site_expectation(
        self,
        label1: SiteLabel,
        op1: np.ndarray,
        label2: SiteLabel,
        op2: np.ndarray,
    ) -> complex:
        """Expectation value of a product of single-site operators."""
        p = self.position_of(label1)
        q = self.position_of(label2)
        if p == q:
            return self.local_expectation(label1, op2 @ op1)
        if p > q:
            p, q, op1, op2 = q, p, op2, op1
        self.move_center(p)
        a = self.tensors[p]
        at = np.tensordot(op1, a, axes=(1, 1)).transpose(1, 0, 2)
        env = np.tensordot(a.conj(), at, axes=([0, 1], [0, 1]))
        for m in range(p + 1, q):
            t = self.tensors[m]
            tmp = np.tensordot(env, t, axes=(1, 0))
            env = np.tensordot(self.tensors[m].conj(), tmp, axes=([0, 1], [0, 1]))
        b = self.tensors[q]
        bt = np.tensordot(op2, b, axes=(1, 1)).transpose(1, 0, 2)
        tmp = np.tensordot(env, bt, axes=(1, 0))
        return complex(np.tensordot(b.conj(), tmp, axes=([0, 1, 2], [0, 1, 2])))

    def total_excitation_moments(self) -> tuple[float, float]:
        """Mean and variance of the total photon + electronic excitation.

        Single left-to-right sweep carrying an environment with one number
        operator inserted, so the cost is linear in the chain length.
        """
        self.move_center(0)
        mean = 0.0
        sum_sq = 0.0  # sum_i <q_i^2> + 2 sum_{i<j} <q_i q_j>
        env_q = np.zeros((1, 1), dtype=np.complex128)
        for pos in range(self.n_sites):
            if pos > 0:
                self.move_center(pos)
            a = self.tensors[pos]
            kind = self.site_labels[pos][0]
            if kind in ("ph", "exc"):
                q = np.arange(a.shape[1], dtype=float)
                aq = a * q[None, :, None]
                mean += float(np.real(np.vdot(a, aq)))
                sum_sq += float(np.real(np.vdot(a, a * (q**2)[None, :, None])))
                sum_sq += 2.0 * float(
                    np.real(np.einsum("lar,lm,mar->", a.conj(), env_q, aq, optimize=True))
                )
            # push environment through the left-orthonormal version of this site
            l, d, r = a.shape
            qmat, _ = np.linalg.qr(a.reshape(l * d, r))
            w = qmat.reshape(l, d, -1)
            env_q = np.einsum("lar,lm,mas->rs", w.conj(), env_q, w, optimize=True)
            if kind in ("ph", "exc"):
                qdiag = np.arange(d, dtype=float)
                env_q += np.einsum("lar,las->rs", w.conj(), w * qdiag[None, :, None], optimize=True)
        var = sum_sq - mean * mean
        return mean, float(var)

    # ------------------------------------------------------------------
    # dense conversion and overlaps (small systems)
    # ------------------------------------------------------------------
    def to_dense(self) -> np.ndarray:
        """Contract to a full state vector in current chain order."""
        total = 1
        for t in self.tensors:
            total *= t.shape[1]
            if total > 4_000_000:
                raise MpsError("state too large for dense conversion")
        vec = np.ones((1, 1), dtype=np.complex128)
        for t in self.tensors:
            vec = np.tensordot(vec, t, axes=(1, 0))
            vec = vec.reshape(-1, t.shape[2])
        return vec.reshape(-1)

    def overlap(self, other: "MatrixProductState") -> complex:
        """Inner product <self|other>; requires identical chain labels."""
        if self.site_labels != other.site_labels:
            raise MpsError("overlap requires identical site orderings")
        env = np.ones((1, 1), dtype=np.complex128)
        for a, b in zip(self.tensors, other.tensors):
            tmp = np.tensordot(env, b, axes=(1, 0))
            env = np.tensordot(a.conj(), tmp, axes=([0, 1], [0, 1]))
        return complex(env[0, 0])

    # ------------------------------------------------------------------
    # checkpointing
    # ------------------------------------------------------------------
    def save(self, path: str | Path) -> None:
        """Write tensors to a binary container plus a JSON sidecar."""
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<q", self.n_sites))
            for t in self.tensors:
                fh.write(struct.pack("<qqq", *t.shape))
                fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())
        sidecar = {
            "labels": [list(lbl) for lbl in self.site_labels],
            "chi_max": self.chi_max,
            "svd_cutoff": self.svd_cutoff,
            "ortho_center": self.ortho_center,
            "cumulative_truncation_weight": self.cumulative_truncation_weight,
            "max_bond_reached": self.max_bond_reached,
        }
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=1)
        )

    @classmethod
    def load(cls, path: str | Path) -> "MatrixProductState":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        with open(path, "rb") as fh:
            if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
                raise MpsError(f"{path} is not a state checkpoint")
            (n,) = struct.unpack("<q", fh.read(8))
            tensors = []
            for _ in range(n):
                shape = struct.unpack("<qqq", fh.read(24))
                count = shape[0] * shape[1] * shape[2]
                data = np.frombuffer(fh.read(16 * count), dtype="<c16")
                tensors.append(data.reshape(shape).astype(np.complex128))
        out = cls(
            tensors,
            [tuple(lbl) for lbl in sidecar["labels"]],
            chi_max=sidecar["chi_max"],
            svd_cutoff=sidecar["svd_cutoff"],
        )
        out.ortho_center = int(sidecar["ortho_center"])
        out.cumulative_truncation_weight = float(sidecar["cumulative_truncation_weight"])
        out.max_bond_reached = int(sidecar["max_bond_reached"])
        return out


# ----------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------
def chain_labels(n_molecules: int) -> list[SiteLabel]:
    """Natural chain order: photon, then alternating exc_n / vib_n."""
    labels: list[SiteLabel] = [("ph", 0)]
    for n in range(1, n_molecules + 1):
        labels.append(("exc", n))
        labels.append(("vib", n))
    return labels


def init_product_state(
    params: HtcParams,
    excitation: str | tuple = "cavity",
    n_max_v: int = 10,
    n_max_p: int = 1,
    chi_max: int = 128,
    svd_cutoff: float = 1e-12,
) -> MatrixProductState:
    """Product state with one excitation in the cavity or on one molecule.

    ``excitation`` is ``"cavity"`` or ``("molecule", index)`` with index in
    1..N; all vibrational modes start in their ground state.
    """
    kind, index = normalize_excitation(excitation)
    n = params.n_molecules
    if kind == "molecule" and not 1 <= index <= n:
        raise MpsError(f"molecule index {index} outside 1..{n}")

    def basis_tensor(dim: int, level: int) -> np.ndarray:
        t = np.zeros((1, dim, 1), dtype=np.complex128)
        t[0, level, 0] = 1.0
        return t

    tensors = [basis_tensor(n_max_p + 1, 1 if kind == "cavity" else 0)]
    for m in range(1, n + 1):
        excited = kind == "molecule" and m == index
        tensors.append(basis_tensor(2, 1 if excited else 0))
        tensors.append(basis_tensor(n_max_v + 1, 0))
    return MatrixProductState(
        tensors, chain_labels(n), chi_max=chi_max, svd_cutoff=svd_cutoff
    )


def normalize_excitation(excitation: str | tuple) -> tuple[str, int]:
    """Accepts "cavity", "molecule:<i>", or ("molecule", i); returns (kind, index)."""
    if isinstance(excitation, str):
        if excitation == "cavity":
            return "cavity", 0
        if excitation.startswith("molecule"):
            _, _, idx = excitation.partition(":")
            return "molecule", int(idx) if idx else 1
        raise MpsError(f"unknown excitation {excitation!r}")
    kind = excitation[0]
    if kind == "cavity":
        return "cavity", 0
    if kind == "molecule":
        return "molecule", int(excitation[1])
    raise MpsError(f"unknown excitation {excitation!r}")


def from_dense(
    vector: np.ndarray,
    dims: list[int],
    labels: list[SiteLabel],
    chi_max: int = 128,
    svd_cutoff: float = 1e-12,
) -> MatrixProductState:
    """Exact MPS decomposition of a dense state vector (test utility)."""
    if len(dims) != len(labels):
        raise MpsError("one dim per label required")
    if vector.size != int(np.prod(dims)):
        raise MpsError("vector length does not match dims")
    tensors = []
    rest = np.asarray(vector, dtype=np.complex128).reshape(1, -1)
    chi_l = 1
    for d in dims[:-1]:
        m = rest.reshape(chi_l * d, -1)
        u, s, vh = _svd(m)
        keep = max(1, min(int(np.count_nonzero(s > svd_cutoff)), chi_max))
        tensors.append(u[:, :keep].reshape(chi_l, d, keep))
        rest = s[:keep, None] * vh[:keep]
        chi_l = keep
    tensors.append(rest.reshape(chi_l, dims[-1], 1))
    out = MatrixProductState(tensors, labels, chi_max=chi_max, svd_cutoff=svd_cutoff)
    out.ortho_center = out.n_sites - 1
    return out


# ----------------------------------------------------------------------
# block entropy via swap network
# ----------------------------------------------------------------------
def _sort_key(label: SiteLabel) -> tuple[int, int]:
    kind, idx = label
    return {"ph": 0, "exc": 1, "vib": 2}[kind], idx


def vib_block_entropy(
    state: MatrixProductState,
    alarm_threshold: float = 1e-6,
    info: dict | None = None,
) -> float:
    """Entanglement entropy (bits) between vibrations and everything else.

    Works on a disposable copy: adjacent swap gates sort the chain to
    (photon, all electronic sites, all vibrational sites) and the entropy is
    read at the cut in front of the vibrational block. The swap network can
    itself truncate; weight beyond ``alarm_threshold`` raises a
    ``TruncationAlarm`` warning. Pass ``info`` to receive the sort weight.
    """
    work = state.copy()
    work.cumulative_truncation_weight = 0.0
    keys = [_sort_key(lbl) for lbl in work.site_labels]
    n = work.n_sites
    changed = True
    while changed:
        changed = False
        for b in range(n - 1):
            if keys[b] > keys[b + 1]:
                work.swap_sites(b)
                keys[b], keys[b + 1] = keys[b + 1], keys[b]
                changed = True
    n_vib = sum(1 for k in keys if k[0] == 2)
    sort_weight = work.cumulative_truncation_weight
    if info is not None:
        info["sort_truncation"] = sort_weight
    if sort_weight > alarm_threshold:
        warnings.warn(
            f"entropy swap network discarded weight {sort_weight:.3e}",
            TruncationAlarm,
            stacklevel=2,
        )
    if n_vib == 0 or n_vib == n:
        return 0.0
    return work.bond_entropy(n - n_vib - 1)

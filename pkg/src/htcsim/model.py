"""Model parameters, disorder sampling, and Hamiltonian coefficients.

Energies are measured in units of the collective cavity coupling, times in
units of its inverse. Each of the N molecules carries a two-level electronic
transition (detuning ``delta`` plus a random offset) and one harmonic
vibrational mode of spacing ``nu``, displaced in the excited state by the
dimensionless vibronic coupling ``lam``. All molecules share a single cavity
mode with per-molecule coupling ``g = g_collective / sqrt(N)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DISORDER_LAWS = ("gaussian", "box")


@dataclass(frozen=True)
class HtcParams:
    """Physical parameters of the disordered molecules-in-a-cavity model."""

    n_molecules: int
    nu: float = 0.3
    lam: float = 0.4
    delta: float = 0.0
    disorder_width: float = 0.0
    disorder_law: str = "gaussian"
    g_collective: float = 1.0

    def __post_init__(self) -> None:
        if self.n_molecules < 1:
            raise ValueError("n_molecules must be >= 1")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.disorder_width < 0:
            raise ValueError("disorder_width must be nonnegative")
        if self.disorder_law not in DISORDER_LAWS:
            raise ValueError(f"disorder_law must be one of {DISORDER_LAWS}")
        if self.g_collective <= 0:
            raise ValueError("g_collective must be positive")

    @property
    def g(self) -> float:
        """Per-molecule cavity coupling."""
        return self.g_collective / np.sqrt(self.n_molecules)

    def to_dict(self) -> dict:
        return {
            "n_molecules": self.n_molecules,
            "nu": self.nu,
            "lambda": self.lam,
            "delta": self.delta,
            "disorder_width": self.disorder_width,
            "disorder_law": self.disorder_law,
            "g_collective": self.g_collective,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HtcParams":
        return cls(
            n_molecules=int(d["n_molecules"]),
            nu=float(d.get("nu", 0.3)),
            lam=float(d.get("lambda", d.get("lam", 0.4))),
            delta=float(d.get("delta", 0.0)),
            disorder_width=float(d.get("disorder_width", 0.0)),
            disorder_law=str(d.get("disorder_law", "gaussian")),
            g_collective=float(d.get("g_collective", 1.0)),
        )


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of per-molecule electronic energy offsets."""

    epsilons: tuple[float, ...]
    seed: int
    law: str
    width: float

    def __post_init__(self) -> None:
        if not all(np.isfinite(self.epsilons)):
            raise ValueError("disorder offsets must be finite")

    @property
    def n_molecules(self) -> int:
        return len(self.epsilons)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.epsilons, dtype=float)

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "law": self.law,
                "width": self.width,
                "epsilons": list(self.epsilons),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "DisorderRealization":
        d = json.loads(text)
        return cls(
            epsilons=tuple(float(e) for e in d["epsilons"]),
            seed=int(d["seed"]),
            law=str(d["law"]),
            width=float(d["width"]),
        )


@dataclass(frozen=True)
class HamiltonianTermList:
    """Coefficients of the Hamiltonian, fully determined by the inputs.

    ``onsite_exc[n]`` multiplies the electronic occupation of molecule n,
    ``onsite_vib`` the vibrational number operator, ``holstein`` the
    occupation-conditioned displacement, and ``cavity_coupling`` the
    photon-exchange term of each molecule.
    """

    onsite_exc: tuple[float, ...]
    onsite_vib: float
    holstein: float
    cavity_coupling: float

    @property
    def n_molecules(self) -> int:
        return len(self.onsite_exc)


def sample_disorder(params: HtcParams, seed: int) -> DisorderRealization:
    """Draw one disorder realization, reproducibly for a fixed seed.

    The gaussian law has mean zero and variance ``disorder_width**2``; the
    box law is uniform on ``(-disorder_width/2, +disorder_width/2)``. Uses a
    counter-based Philox generator so results are identical across machines.
    """
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    w = params.disorder_width
    n = params.n_molecules
    if w == 0.0:
        eps = np.zeros(n)
    elif params.disorder_law == "gaussian":
        eps = rng.normal(0.0, w, size=n)
    else:
        eps = rng.uniform(-w / 2.0, w / 2.0, size=n)
    return DisorderRealization(
        epsilons=tuple(float(e) for e in eps),
        seed=int(seed),
        law=params.disorder_law,
        width=float(w),
    )


def build_term_list(params: HtcParams, dis: DisorderRealization) -> HamiltonianTermList:
    """Assemble Hamiltonian coefficients from parameters and one realization."""
    if dis.n_molecules != params.n_molecules:
        raise ValueError(
            f"realization has {dis.n_molecules} molecules, "
            f"params expect {params.n_molecules}"
        )
    onsite_exc = tuple(params.delta + e for e in dis.epsilons)
    return HamiltonianTermList(
        onsite_exc=onsite_exc,
        onsite_vib=params.nu,
        holstein=-params.lam * params.nu,
        cavity_coupling=params.g,
    )

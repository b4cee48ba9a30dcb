"""Run orchestration: configs, persistence, ensembles, sweeps, reports.

Every output directory receives a CSV time series per run plus a JSON
metadata file carrying the fully resolved configuration, the disorder seed,
and the realization itself, so any ensemble member can be replayed bit-for-
bit from (config, base_seed, index). Ensembles parallelize over disorder
realizations only; the worker count comes from the HTCSIM_WORKERS
environment variable.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import time as _time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import meanfield, oracle, tebd
from .model import HtcParams, sample_disorder
from .mps import init_product_state, normalize_excitation
from .observables import (
    DEFAULT_GRID,
    AveragedSeries,
    ObservableTimeSeries,
    TailConfig,
    disorder_average,
    distribution_from_rdm,
    position_distribution,
)

SCHEMA_VERSION = 1
WORKERS_ENV = "HTCSIM_WORKERS"

METHODS = ("tebd", "meanfield", "ed")
SWEEP_AXES = ("W", "lambda", "N", "chi", "dt", "n_max_v")
CONVERGENCE_AXES = ("chi", "dt", "n_max_v")


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class NumericsConfig:
    chi: int = 128
    svd_cutoff: float = 1e-12
    dt: float = 0.01
    n_max_v: int = 10
    record_every: int = 10


@dataclass(frozen=True)
class EnsembleConfig:
    n_realizations: int = 64
    base_seed: int = 20260809


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved description of one run or ensemble."""

    params: HtcParams = field(default_factory=lambda: HtcParams(
        n_molecules=100, nu=0.3, lam=0.4, delta=0.0,
        disorder_width=0.5, disorder_law="gaussian",
    ))
    method: str = "tebd"
    excitation: str = "molecule:1"
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    tail: TailConfig = field(default_factory=TailConfig)
    t_final: float | None = None
    out_dir: str = "htcsim_out"

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        normalize_excitation(self.excitation)

    def resolved_t_final(self) -> float:
        return 2 * np.pi / self.params.nu if self.t_final is None else self.t_final

    def schedule(self) -> tebd.Schedule:
        return tebd.Schedule(
            t_final=self.resolved_t_final(),
            dt=self.numerics.dt,
            record_every=self.numerics.record_every,
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "params": self.params.to_dict(),
            "method": self.method,
            "excitation": self.excitation,
            "numerics": {
                "chi": self.numerics.chi,
                "svd_cutoff": self.numerics.svd_cutoff,
                "dt": self.numerics.dt,
                "n_max_v": self.numerics.n_max_v,
                "record_every": self.numerics.record_every,
            },
            "ensemble": {
                "n_realizations": self.ensemble.n_realizations,
                "base_seed": self.ensemble.base_seed,
            },
            "tail": {"eta0": self.tail.eta0, "x_thr_r": self.tail.x_thr_r},
            "t_final": self.t_final,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        num = d.get("numerics", {})
        ens = d.get("ensemble", {})
        tail = d.get("tail", {})
        return cls(
            params=HtcParams.from_dict(d.get("params", {"n_molecules": 100})),
            method=d.get("method", "tebd"),
            excitation=d.get("excitation", "molecule:1"),
            numerics=NumericsConfig(
                chi=int(num.get("chi", 128)),
                svd_cutoff=float(num.get("svd_cutoff", 1e-12)),
                dt=float(num.get("dt", 0.01)),
                n_max_v=int(num.get("n_max_v", 10)),
                record_every=int(num.get("record_every", 10)),
            ),
            ensemble=EnsembleConfig(
                n_realizations=int(ens.get("n_realizations", 64)),
                base_seed=int(ens.get("base_seed", 20260809)),
            ),
            tail=TailConfig(eta0=float(tail.get("eta0", 1e-2))),
            t_final=None if d.get("t_final") is None else float(d["t_final"]),
            out_dir=str(d.get("out_dir", "htcsim_out")),
        )


PRESETS: dict[str, dict] = {
    # headline parameters, one full vibrational period
    "paper-molecule": {"excitation": "molecule:1"},
    "paper-cavity": {"excitation": "cavity"},
    # shrunken ensembles that run on a desk
    "desk-molecule": {
        "excitation": "molecule:1",
        "params": {"n_molecules": 16, "nu": 0.3, "lambda": 0.4, "disorder_width": 0.5},
        "numerics": {"chi": 64, "record_every": 40},
        "ensemble": {"n_realizations": 32},
    },
    "desk-cavity": {
        "excitation": "cavity",
        "params": {"n_molecules": 16, "nu": 0.3, "lambda": 0.4, "disorder_width": 0.5},
        "numerics": {"chi": 64, "record_every": 40},
        "ensemble": {"n_realizations": 32},
    },
}


# ----------------------------------------------------------------------
# CSV persistence
# ----------------------------------------------------------------------
def series_header(n_molecules: int) -> list[str]:
    cols = ["t", "s_vib", "n_ph", "eta_l", "eta_r", "norm", "trunc", "max_bond"]
    cols += [f"n_exc_{i}" for i in range(1, n_molecules + 1)]
    cols += [f"x_{i}" for i in range(1, n_molecules + 1)]
    cols += [f"p_{i}" for i in range(1, n_molecules + 1)]
    return cols


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def write_series_csv(path: Path, series: ObservableTimeSeries) -> None:
    n = series.n_molecules
    lines = [",".join(series_header(n))]
    for i in range(series.times.size):
        row = [
            _fmt(series.times[i]),
            _fmt(series.s_vib[i]),
            _fmt(series.n_ph[i]),
            _fmt(series.eta_l[i]),
            _fmt(series.eta_r[i]),
            _fmt(series.norm[i]),
            _fmt(series.trunc[i]),
            str(int(series.max_bond[i])),
        ]
        row += [_fmt(v) for v in series.n_exc[i]]
        row += [_fmt(v) for v in series.x[i]]
        row += [_fmt(v) for v in series.p[i]]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def read_series_csv(path: Path, method: str = "tebd") -> ObservableTimeSeries:
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    n = sum(1 for h in header if h.startswith("n_exc_"))
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    col = {name: j for j, name in enumerate(header)}
    return ObservableTimeSeries(
        method=method,
        times=data[:, col["t"]],
        s_vib=data[:, col["s_vib"]],
        n_ph=data[:, col["n_ph"]],
        eta_l=data[:, col["eta_l"]],
        eta_r=data[:, col["eta_r"]],
        norm=data[:, col["norm"]],
        trunc=data[:, col["trunc"]],
        max_bond=data[:, col["max_bond"]].astype(int),
        n_exc=data[:, col["n_exc_1"] : col["n_exc_1"] + n],
        x=data[:, col["x_1"] : col["x_1"] + n],
        p=data[:, col["p_1"] : col["p_1"] + n],
        q_variance=np.zeros(data.shape[0]),
        metadata={"path": str(path)},
    )


def write_averaged_csv(path: Path, avg: AveragedSeries, n_molecules: int) -> None:
    scalars = ["s_vib", "n_ph", "eta_l", "eta_r", "norm", "trunc"]
    cols = ["t"]
    for s in scalars:
        cols += [s, s + "_se"]
    for name in ("n_exc", "x", "p"):
        cols += [f"{name}_{i}" for i in range(1, n_molecules + 1)]
        cols += [f"{name}_{i}_se" for i in range(1, n_molecules + 1)]
    lines = [",".join(cols)]
    for i in range(avg.times.size):
        row = [_fmt(avg.times[i])]
        for s in scalars:
            row += [_fmt(avg.mean[s][i]), _fmt(avg.stderr[s][i])]
        for name in ("n_exc", "x", "p"):
            row += [_fmt(v) for v in avg.mean[name][i]]
            row += [_fmt(v) for v in avg.stderr[name][i]]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


# ----------------------------------------------------------------------
# single runs
# ----------------------------------------------------------------------
def run_single(
    config: RunConfig,
    seed: int | None = None,
    stem: str = "run",
    write_distribution: bool = True,
) -> tuple[ObservableTimeSeries, dict]:
    """Execute one realization with the configured method and persist it."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.ensemble.base_seed if seed is None else seed
    realization = sample_disorder(config.params, seed)
    schedule = config.schedule()
    t0 = _time.perf_counter()

    dist: np.ndarray | None = None
    if config.method == "tebd":
        state = init_product_state(
            config.params,
            config.excitation,
            n_max_v=config.numerics.n_max_v,
            chi_max=config.numerics.chi,
            svd_cutoff=config.numerics.svd_cutoff,
        )
        series = tebd.evolve(
            state, config.params, realization, schedule, tail=config.tail
        )
        if write_distribution:
            dist = _state_distribution(state, config)
    elif config.method == "ed":
        basis = oracle.DenseBasis(config.params.n_molecules, config.numerics.n_max_v)
        h = oracle.build_dense_hamiltonian(
            config.params, realization, config.numerics.n_max_v
        )
        psi0 = oracle.initial_dense_state(basis, config.excitation)
        times = np.array([k * schedule.dt for k in schedule.record_steps()])
        traj, series = oracle.evolve_exact(h, psi0, times, basis, tail=config.tail)
        if write_distribution:
            dist = _dense_distribution(traj[-1], basis, config)
    else:
        series = meanfield.mf_evolve(
            config.params, realization, config.excitation, schedule, tail=config.tail
        )
        if write_distribution:
            dist = _gaussian_distribution(series.x[-1], config)
    wall = _time.perf_counter() - t0

    csv_path = out / f"{stem}.csv"
    write_series_csv(csv_path, series)
    if dist is not None:
        _write_dist_csv(out / f"{stem}_dist.csv", dist)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "method": config.method,
        "seed": seed,
        "realization": json.loads(realization.to_json()),
        "n_steps": schedule.n_steps,
        "alarms": series.metadata.get("alarms", []),
        "q_variance_max": float(np.max(series.q_variance)) if series.q_variance.size else 0.0,
        "wall_time_s": wall,
        "columns": series_header(config.params.n_molecules),
    }
    _write_json(out / f"{stem}.meta.json", meta)
    return series, meta


def _tracked_molecules(config: RunConfig) -> list[int]:
    kind, index = normalize_excitation(config.excitation)
    if kind == "molecule":
        return [index]
    return list(range(1, config.params.n_molecules + 1))


def _state_distribution(state, config: RunConfig) -> np.ndarray:
    tracked = _tracked_molecules(config)
    acc = np.zeros(DEFAULT_GRID.size)
    for m in tracked:
        acc += position_distribution(state, m, DEFAULT_GRID)
    return acc / len(tracked)


def _dense_distribution(psi, basis, config: RunConfig) -> np.ndarray:
    block = psi.reshape(basis.dim_ep, *([basis.d_vib] * basis.n_molecules))
    axes = list(range(basis.n_molecules + 1))
    tracked = _tracked_molecules(config)
    acc = np.zeros(DEFAULT_GRID.size)
    for m in tracked:
        others = [ax for ax in axes if ax != m]
        rho = np.tensordot(block, block.conj(), axes=(others, others))
        acc += distribution_from_rdm(rho, DEFAULT_GRID)
    return acc / len(tracked)


def _gaussian_distribution(x_final: np.ndarray, config: RunConfig) -> np.ndarray:
    tracked = _tracked_molecules(config)
    acc = np.zeros(DEFAULT_GRID.size)
    for m in tracked:
        acc += np.exp(-((DEFAULT_GRID - x_final[m - 1]) ** 2)) / np.sqrt(np.pi)
    return acc / len(tracked)


def _write_dist_csv(path: Path, dist: np.ndarray) -> None:
    lines = ["x,p_x"]
    for xv, pv in zip(DEFAULT_GRID, dist):
        lines.append(f"{_fmt(xv)},{_fmt(pv)}")
    path.write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# ensembles
# ----------------------------------------------------------------------
def _member_task(config_dict: dict, index: int) -> dict:
    config = RunConfig.from_dict(config_dict)
    stem = f"member_{index:03d}"
    try:
        _, meta = run_single(
            config, seed=config.ensemble.base_seed + index, stem=stem
        )
        return {"index": index, "ok": True, "stem": stem, "meta": meta}
    except Exception as exc:  # noqa: BLE001 - per-member failures are recorded
        return {"index": index, "ok": False, "stem": stem, "error": f"{type(exc).__name__}: {exc}"}


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_ensemble(config: RunConfig) -> dict:
    """Run all realizations, average the successes, persist everything."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = config.ensemble.n_realizations
    cfg_dict = config.to_dict()
    workers = worker_count()
    if workers == 1 or n == 1:
        results = [_member_task(cfg_dict, i) for i in range(n)]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_member_task, cfg_dict, i) for i in range(n)]
            results = [f.result() for f in futures]
    results.sort(key=lambda r: r["index"])
    ok = [r for r in results if r["ok"]]
    failed = [r for r in results if not r["ok"]]
    if not ok:
        raise HarnessError(
            "all ensemble members failed: " + "; ".join(r["error"] for r in failed[:3])
        )
    members = [read_series_csv(out / f"{r['stem']}.csv", config.method) for r in ok]
    avg = disorder_average(members)
    write_averaged_csv(out / "averaged.csv", avg, config.params.n_molecules)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg_dict,
        "n_requested": n,
        "n_ok": len(ok),
        "failures": [{"index": r["index"], "error": r["error"]} for r in failed],
        "seeds": [config.ensemble.base_seed + r["index"] for r in ok],
        "members": [r["stem"] for r in ok],
        "alarm_counts": {
            r["stem"]: len(r["meta"].get("alarms", [])) for r in ok
        },
        "wall_times_s": {r["stem"]: r["meta"]["wall_time_s"] for r in ok},
    }
    _write_json(out / "ensemble.meta.json", meta)
    return meta


# ----------------------------------------------------------------------
# parameter sweeps
# ----------------------------------------------------------------------
def _apply_axis(config: RunConfig, axis: str, value: float) -> RunConfig:
    p, n = config.params, config.numerics
    if axis == "W":
        return replace(config, params=replace(p, disorder_width=float(value)))
    if axis == "lambda":
        return replace(config, params=replace(p, lam=float(value)))
    if axis == "N":
        return replace(config, params=replace(p, n_molecules=int(value)))
    if axis == "chi":
        return replace(config, numerics=replace(n, chi=int(value)))
    if axis == "dt":
        cadence = max(1, round(n.record_every * n.dt / float(value)))
        return replace(
            config, numerics=replace(n, dt=float(value), record_every=cadence)
        )
    if axis == "n_max_v":
        return replace(config, numerics=replace(n, n_max_v=int(value)))
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def run_sweep(config: RunConfig, axis: str, values: list[float]) -> list[dict]:
    """One ensemble (or single run on convergence axes) per axis value.

    Emits a summary CSV holding the entanglement entropy and right tail
    weight at the end of the window for every point.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    if not values:
        raise ValueError("sweep needs at least one value")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    single = axis in CONVERGENCE_AXES
    rows: list[dict] = []
    for v in values:
        tag = f"{axis}_{v:g}"
        point = _apply_axis(config, axis, v)
        point = replace(point, out_dir=str(out / f"point_{tag}"))
        row: dict = {"axis": axis, "value": float(v)}
        try:
            if single:
                series, _ = run_single(point)
                row.update(
                    s_vib=float(series.s_vib[-1]),
                    eta_r=float(series.eta_r[-1]),
                    s_vib_se=0.0,
                    eta_r_se=0.0,
                    n_ok=1,
                )
            else:
                meta = run_ensemble(point)
                avg = _read_averaged(Path(point.out_dir) / "averaged.csv")
                row.update(
                    s_vib=float(avg["s_vib"][-1]),
                    eta_r=float(avg["eta_r"][-1]),
                    s_vib_se=float(avg["s_vib_se"][-1]),
                    eta_r_se=float(avg["eta_r_se"][-1]),
                    n_ok=meta["n_ok"],
                )
            row["ok"] = True
        except Exception as exc:  # noqa: BLE001 - per-point failures are flagged
            row.update(ok=False, error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    lines = ["axis,value,ok,s_vib,s_vib_se,eta_r,eta_r_se,n_ok,error"]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r["axis"],
                    _fmt(r["value"]),
                    str(int(r["ok"])),
                    _fmt(r.get("s_vib", float("nan"))),
                    _fmt(r.get("s_vib_se", float("nan"))),
                    _fmt(r.get("eta_r", float("nan"))),
                    _fmt(r.get("eta_r_se", float("nan"))),
                    str(r.get("n_ok", 0)),
                    r.get("error", "").replace(",", ";"),
                ]
            )
        )
    (out / "sweep_summary.csv").write_text("\n".join(lines) + "\n")
    return rows


def _read_averaged(path: Path) -> dict[str, np.ndarray]:
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return {name: data[:, j] for j, name in enumerate(header)}


# ----------------------------------------------------------------------
# figure-oriented report bundles
# ----------------------------------------------------------------------
def build_report(inputs: list[str | Path], out_dir: str | Path) -> list[Path]:
    """Reformat ensemble and sweep outputs into tidy per-figure CSV bundles."""
    if not inputs:
        raise HarnessError("report needs at least one ensemble or sweep input")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ensembles: list[tuple[str, Path, dict]] = []
    sweeps: list[tuple[str, Path]] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir() and (p / "ensemble.meta.json").exists():
            meta = json.loads((p / "ensemble.meta.json").read_text())
            ensembles.append((p.name, p, meta))
        elif p.is_dir() and (p / "sweep_summary.csv").exists():
            sweeps.append((p.name, p / "sweep_summary.csv"))
        elif p.name == "sweep_summary.csv":
            sweeps.append((p.parent.name, p))
        else:
            raise HarnessError(f"{p} is neither an ensemble directory nor a sweep summary")
    written: list[Path] = []
    if ensembles:
        written += _report_ensembles(ensembles, out)
    if sweeps:
        written.append(_report_sweeps(sweeps, out))
    return written


def _report_ensembles(ensembles, out: Path) -> list[Path]:
    entropy = ["source,t,s_vib,s_vib_se"]
    phase = ["source,t,x_excited,p_excited,x_all,p_all"]
    tails = ["source,t,eta_l,eta_l_se,eta_r,eta_r_se"]
    scatter = ["source,seed,molecule,epsilon,n_exc_final"]
    dist = ["source,x,p_x"]
    for name, path, meta in ensembles:
        avg = _read_averaged(path / "averaged.csv")
        cfg = meta["config"]
        n = int(cfg["params"]["n_molecules"])
        kind, index = normalize_excitation(cfg["excitation"])
        tgrid = avg["t"]
        xi = avg[f"x_{index}"] if kind == "molecule" else np.zeros_like(tgrid)
        pi = avg[f"p_{index}"] if kind == "molecule" else np.zeros_like(tgrid)
        x_all = np.mean([avg[f"x_{i}"] for i in range(1, n + 1)], axis=0)
        p_all = np.mean([avg[f"p_{i}"] for i in range(1, n + 1)], axis=0)
        for j in range(tgrid.size):
            entropy.append(
                f"{name},{_fmt(tgrid[j])},{_fmt(avg['s_vib'][j])},{_fmt(avg['s_vib_se'][j])}"
            )
            phase.append(
                f"{name},{_fmt(tgrid[j])},{_fmt(xi[j])},{_fmt(pi[j])},"
                f"{_fmt(x_all[j])},{_fmt(p_all[j])}"
            )
            tails.append(
                f"{name},{_fmt(tgrid[j])},{_fmt(avg['eta_l'][j])},{_fmt(avg['eta_l_se'][j])},"
                f"{_fmt(avg['eta_r'][j])},{_fmt(avg['eta_r_se'][j])}"
            )
        for stem in meta["members"]:
            mmeta = json.loads((path / f"{stem}.meta.json").read_text())
            eps = mmeta["realization"]["epsilons"]
            series = read_series_csv(path / f"{stem}.csv")
            for m in range(1, n + 1):
                scatter.append(
                    f"{name},{mmeta['seed']},{m},{_fmt(eps[m - 1])},"
                    f"{_fmt(series.n_exc[-1][m - 1])}"
                )
        dist_files = sorted(path.glob("member_*_dist.csv"))
        if dist_files:
            stack = []
            for f in dist_files:
                rows = np.array(
                    [[float(v) for v in ln.split(",")] for ln in f.read_text().strip().splitlines()[1:]]
                )
                stack.append(rows[:, 1])
            mean_dist = np.mean(stack, axis=0)
            for xv, pv in zip(rows[:, 0], mean_dist):
                dist.append(f"{name},{_fmt(xv)},{_fmt(pv)}")
    paths = []
    for fname, lines in (
        ("fig2_entropy.csv", entropy),
        ("fig2_phasespace.csv", phase),
        ("fig2_distribution.csv", dist),
        ("fig3_scatter.csv", scatter),
        ("fig4_tails.csv", tails),
    ):
        p = out / fname
        p.write_text("\n".join(lines) + "\n")
        paths.append(p)
    return paths


def _report_sweeps(sweeps, out: Path) -> Path:
    lines = ["source,axis,value,s_vib,s_vib_se,eta_r,eta_r_se"]
    for name, path in sweeps:
        raw = path.read_text().strip().splitlines()
        header = raw[0].split(",")
        idx = {h: i for i, h in enumerate(header)}
        for ln in raw[1:]:
            parts = ln.split(",")
            if parts[idx["ok"]] != "1":
                continue
            lines.append(
                f"{name},{parts[idx['axis']]},{parts[idx['value']]},"
                f"{parts[idx['s_vib']]},{parts[idx['s_vib_se']]},"
                f"{parts[idx['eta_r']]},{parts[idx['eta_r_se']]}"
            )
    p = out / "fig5_scaling.csv"
    p.write_text("\n".join(lines) + "\n")
    return p

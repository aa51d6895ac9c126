"""Experiment orchestration: configuration, caching, manifests, commands.

Configs are TOML; every command writes CSV traces and JSON reports into an
output directory plus a manifest.  Reruns with identical config produce
byte-identical CSV/JSON artifacts: all floats are printed with 17 significant
digits (CSV) or shortest round-trip repr (JSON), manifests are written
atomically, and wall-clock timing goes to a separate plain-text file so it
never perturbs the deterministic artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ThresholdLabError
from .grid import RadialField, make_grid, default_rmax
from .groundstate import (
    GroundState,
    _try_load_cache,
    compute_cgn,
    solve_ground_state,
    verify_pohozaev,
)
from .model import derive_params
from .linop import assemble, bform, phi, solve_eigenpair
from .profiles import build_profiles, residual_trace, special_seed, approximate_solution
from .evolve import EvolutionConfig, evolve
from .diagnostics import classify

__all__ = ["ExperimentConfig", "load_config", "run_command"]


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    p: float
    M: int
    Rmax: float | None
    profile_A: float
    profile_k: int
    seed_tol: float
    evolve_cfg: dict
    seed: str  # ground | qplus | qminus
    rate_fraction: float
    sweep_amplitudes: tuple
    sweep_workers: int
    raw: dict = field(repr=False)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "rb") as f:
        raw = tomllib.load(f)
    return _config_from_raw(raw)


def _config_from_raw(raw: dict) -> ExperimentConfig:
    params = raw.get("params", {})
    grid = raw.get("grid", {})
    prof = raw.get("profiles", {})
    ev = raw.get("evolve", {})
    cls = raw.get("classify", {})
    sweep = raw.get("sweep", {})
    return ExperimentConfig(
        N=int(params.get("dimension", 3)),
        p=float(params.get("exponent", 3.0)),
        M=int(grid.get("M", 4096)),
        Rmax=float(grid["Rmax"]) if "Rmax" in grid else None,
        profile_A=float(prof.get("A", 1.0)),
        profile_k=int(prof.get("k", 3)),
        seed_tol=float(prof.get("seed_tol", 1e-3)),
        evolve_cfg=dict(ev),
        seed=str(ev.get("seed", "ground")),
        rate_fraction=float(cls.get("rate_fraction", 0.5)),
        sweep_amplitudes=tuple(sweep.get("amplitudes", (-1.0, -0.5, 0.5, 1.0))),
        sweep_workers=int(sweep.get("workers", 0)),
        raw=raw,
    )


# -- deterministic emission helpers --------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]):
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_fmt(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_json_atomic(path: Path, obj):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")
    tmp.replace(path)


def _manifest(out: Path, cfg: ExperimentConfig, command: str, body: dict, t_start: float):
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "artifact_version": __version__,
        **body,
    }
    write_json_atomic(out / "manifest.json", manifest)
    # wall-clock lives outside the deterministic artifacts
    (out / "timing.txt").write_text(f"wall_clock_seconds {time.time() - t_start:.3f}\n")
    return manifest


# -- shared object construction ------------------------------------------


def _build_gs(cfg: ExperimentConfig, use_cache: bool) -> tuple[GroundState, bool]:
    params = derive_params(cfg.N, cfg.p)
    rmax = cfg.Rmax if cfg.Rmax is not None else default_rmax(params.omega)
    grid = make_grid(params.N, cfg.M, rmax)
    cache_hit = use_cache and _try_load_cache(params, grid) is not None
    gs = solve_ground_state(params, grid, use_cache=use_cache)
    return gs, cache_hit


def _evolution_config(cfg: ExperimentConfig) -> EvolutionConfig:
    ev = dict(cfg.evolve_cfg)
    ev.pop("seed", None)
    allowed = {f for f in EvolutionConfig.__dataclass_fields__}
    return EvolutionConfig(**{k: v for k, v in ev.items() if k in allowed})


def _build_seed(cfg: ExperimentConfig, gs: GroundState):
    if cfg.seed == "ground":
        return gs.as_field(), None
    op = assemble(gs)
    pair = solve_eigenpair(op)
    sign = +1 if cfg.seed == "qplus" else -1
    if cfg.seed not in ("qplus", "qminus"):
        raise ThresholdLabError(f"unknown seed kind {cfg.seed!r}")
    exp = build_profiles(float(sign), cfg.profile_k, pair, op)
    seed, t0 = special_seed(sign, exp, exp, seed_tol=cfg.seed_tol)
    return seed, {"t0": t0, "pair_e0": pair.e0}


# -- commands -------------------------------------------------------------


def cmd_ground(cfg: ExperimentConfig, out: Path, use_cache: bool) -> dict:
    t0 = time.time()
    gs, cache_hit = _build_gs(cfg, use_cache)
    poh = verify_pohozaev(gs)
    report = {
        "Q0": gs.Q0,
        "mass": gs.mass,
        "grad_sq": gs.grad_sq,
        "lp1": gs.lp1,
        "energy": gs.energy,
        "cgn": compute_cgn(gs),
        "ode_residual": gs.residual,
        "pohozaev": poh,
    }
    write_json_atomic(out / "ground_report.json", report)
    write_csv(out / "q_profile.csv", ["r", "Q", "Qprime"], [gs.grid.r, gs.Q, gs.Qprime])
    return _manifest(out, cfg, "ground", {
        "cache": "hit" if cache_hit else "miss",
        "residual_summary": {"ode": gs.residual, **poh},
    }, t0)


def cmd_spectrum(cfg: ExperimentConfig, out: Path, use_cache: bool) -> dict:
    t0 = time.time()
    gs, cache_hit = _build_gs(cfg, use_cache)
    op = assemble(gs)
    pair = solve_eigenpair(op)
    grid = gs.grid
    w, Q, p = grid.w, gs.Q, gs.params.p
    lmQ = op.Lminus @ Q
    lpQ = op.Lplus @ Q + (p - 1) * Q**p
    Qt = (2 / (p - 1)) * Q + grid.r * gs.Qprime
    lpQt = op.Lplus @ Qt + 2 * gs.params.omega * Q
    scale = np.sqrt(gs.mass + gs.grad_sq)
    report = {
        "e0": pair.e0,
        "kappa": pair.kappa,
        "res_plus": pair.res_plus,
        "res_minus": pair.res_minus,
        "spectral_gap": pair.spectral_gap,
        "kernel_residuals": {
            "Lminus_Q": float(np.sqrt(np.sum(w * lmQ**2)) / scale),
            "Lplus_Q": float(np.sqrt(np.sum(w * lpQ**2)) / np.sqrt(np.sum(w * Q ** (2 * p)) * (p - 1) ** 2)),
            "Lplus_Qtilde": float(np.sqrt(np.sum(w * lpQt**2)) / (2 * gs.params.omega * np.sqrt(gs.mass))),
        },
        "phi_Q": phi(Q.astype(complex), op),
        "phi_iQ": phi(1j * Q, op),
        "phi_Yplus": phi(pair.Yplus, op),
    }
    write_json_atomic(out / "spectrum_report.json", report)
    write_csv(out / "eigenpair.csv", ["r", "Y1", "Y2"], [grid.r, pair.Y1, pair.Y2])
    return _manifest(out, cfg, "spectrum", {
        "cache": "hit" if cache_hit else "miss",
        "residual_summary": report["kernel_residuals"],
        "e0": pair.e0,
    }, t0)


def cmd_profiles(cfg: ExperimentConfig, out: Path, use_cache: bool) -> dict:
    t0 = time.time()
    gs, cache_hit = _build_gs(cfg, use_cache)
    op = assemble(gs)
    pair = solve_eigenpair(op)
    exp = build_profiles(cfg.profile_A, cfg.profile_k, pair, op)
    t_start = np.log(1 / 0.25) / pair.e0
    times = np.linspace(t_start, t_start + 5 / pair.e0, 16)
    trace = residual_trace(exp, times)
    write_csv(out / "residual_trace.csv", ["t", "eps_h1"], [trace.times, trace.eps_norm])
    return _manifest(out, cfg, "profiles", {
        "cache": "hit" if cache_hit else "miss",
        "A": cfg.profile_A,
        "k": cfg.profile_k,
        "fitted_rate": trace.fitted_rate,
        "target_rate": (cfg.profile_k + 1) * pair.e0,
    }, t0)


def _run_trajectory(cfg: ExperimentConfig, use_cache: bool):
    gs, cache_hit = _build_gs(cfg, use_cache)
    seed, seed_info = _build_seed(cfg, gs)
    ecfg = _evolution_config(cfg)
    record = evolve(seed, ecfg, gs.params, gs)
    return gs, record, seed_info, cache_hit


def _write_trajectory(out: Path, record):
    write_csv(
        out / "trajectory.csv",
        ["t", "mass", "energy", "gradnorm", "delta", "dt"],
        [record.times, record.M_trace, record.E_trace,
         record.gradnorm_trace, record.delta_trace, record.dt_trace],
    )


def cmd_evolve(cfg: ExperimentConfig, out: Path, use_cache: bool) -> dict:
    t0 = time.time()
    gs, record, seed_info, cache_hit = _run_trajectory(cfg, use_cache)
    _write_trajectory(out, record)
    return _manifest(out, cfg, "evolve", {
        "cache": "hit" if cache_hit else "miss",
        "seed": cfg.seed,
        "seed_info": seed_info,
        "stop_reason": record.stop_reason,
        "absorbed_mass": record.absorbed_mass,
        "proxy_label": record.proxy_label,
    }, t0)


def cmd_classify(cfg: ExperimentConfig, out: Path, use_cache: bool) -> dict:
    t0 = time.time()
    ev = dict(cfg.evolve_cfg)
    ev.setdefault("snapshot_stride", max(1, int(ev.get("record_stride", 100))))
    cfg2 = ExperimentConfig(**{**asdict(cfg), "evolve_cfg": ev, "raw": cfg.raw})
    gs, record, seed_info, cache_hit = _run_trajectory(cfg2, use_cache)
    op = assemble(gs)
    pair = solve_eigenpair(op)
    verdict = classify(record, gs, pair, rate_fraction=cfg.rate_fraction)
    _write_trajectory(out, record)
    write_json_atomic(out / "verdict.json", {
        "verdict": verdict.verdict,
        "evidence": verdict.evidence,
    })
    return _manifest(out, cfg, "classify", {
        "cache": "hit" if cache_hit else "miss",
        "seed": cfg.seed,
        "verdict": verdict.verdict,
        "stop_reason": record.stop_reason,
    }, t0)


def _sweep_cell(args):
    cfg_raw, amplitude, use_cache = args
    try:
        cfg = _config_from_raw(cfg_raw)
        gs, _ = _build_gs(cfg, use_cache)
        op = assemble(gs)
        pair = solve_eigenpair(op)
        exp = build_profiles(amplitude, cfg.profile_k, pair, op)
        t_late = np.log(1 / 0.02) / pair.e0  # q = 0.02: asymptotic but resolvable
        U = approximate_solution(exp, t_late)
        gap = U.grad_sq() - gs.grad_sq
        if not np.isfinite(gap):
            raise ThresholdLabError(f"non-finite gradient gap for A={amplitude}")
        return {
            "A": amplitude,
            "ok": True,
            "grad_gap": gap,
            "gap_sign_matches_A": bool(np.sign(gap) == np.sign(amplitude)),
        }
    except Exception as exc:  # isolation: one cell never aborts the sweep
        return {"A": amplitude, "ok": False, "error": f"{type(exc).__name__}: {exc}"}


def cmd_sweep(cfg: ExperimentConfig, out: Path, use_cache: bool) -> dict:
    t0 = time.time()
    amps = list(cfg.sweep_amplitudes)
    if not amps:
        raise ThresholdLabError("sweep has no cells")
    jobs = [(cfg.raw, a, use_cache) for a in amps]
    if cfg.sweep_workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep_workers) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    results.sort(key=lambda c: c["A"])
    ok = [c for c in results if c["ok"]]
    if not ok:
        raise ThresholdLabError("all sweep cells failed")
    write_json_atomic(out / "sweep_results.json", {"cells": results})
    write_csv(
        out / "sweep_summary.csv",
        ["A", "grad_gap"],
        [np.array([c["A"] for c in ok]), np.array([c["grad_gap"] for c in ok])],
    )
    return _manifest(out, cfg, "sweep", {
        "n_cells": len(results),
        "n_ok": len(ok),
        "verdicts": {str(c["A"]): c.get("gap_sign_matches_A") for c in ok},
    }, t0)


COMMANDS = {
    "ground": cmd_ground,
    "spectrum": cmd_spectrum,
    "profiles": cmd_profiles,
    "evolve": cmd_evolve,
    "classify": cmd_classify,
    "sweep": cmd_sweep,
}


def run_command(command: str, config_path: str, out_dir: str, use_cache: bool) -> dict:
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[command](cfg, out, use_cache)

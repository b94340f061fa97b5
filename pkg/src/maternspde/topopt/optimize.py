"""Sample-average thermal-compliance minimization loop."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..grf import GrfSampler
from ..mesh import Mesh
from ..vtkio import write_vtk
from .config import OptConfig
from .density import PdeFilter, projection, projection_derivative
from .mma import MMAState, mma_update
from .symmetry import (CENTERLINE, HEAT_SINK_DIRICHLET, SymmetrizedSampler, multiplicity,
                       reflect)
from .thermal import LoadCase, ThermalModel, compliance_and_gradient

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("iter", "objective", "volume", "max_density_change")


def initial_density(mesh: Mesh, cfg: OptConfig) -> np.ndarray:
    """``gamma`` everywhere, or ``(sin(5 phi) + 1)/2`` with ``phi`` the azimuth."""
    if cfg.init == "uniform":
        return np.full(mesh.num_nodes, cfg.gamma)
    x = mesh.nodes
    if x.shape[1] < 2:
        raise ConfigurationError("the sin5phi initial design needs at least two coordinates")
    phi = np.arctan2(x[:, 1], x[:, 0])
    return 0.5 * (np.sin(5.0 * phi) + 1.0)


@dataclass
class Problem:
    """Everything that stays fixed during one optimization run."""

    mesh: Mesh
    cfg: OptConfig
    model: ThermalModel
    filter: PdeFilter
    cases: list
    scale: float
    weights: np.ndarray
    measure: float

    @property
    def half(self) -> bool:
        return bool(np.any(self.weights != 1.0))


def build_problem(mesh: Mesh, cfg: OptConfig, dirichlet_attr: int = HEAT_SINK_DIRICHLET,
                  centerline_attr: int = CENTERLINE, loads=None,
                  filter_fixed: dict | None = None) -> Problem:
    """Assemble the state model, the filter and the frozen sample set.

    With ``cfg.symmetrize`` the mesh is the left half of a domain mirrored
    at its ``centerline_attr`` boundary. ``loads`` overrides the sampled
    loads: an ``(n, N)`` array, or for the symmetrized problem a pair
    ``(F_s, F_a)``.
    """
    fixed = mesh.boundary_nodes([dirichlet_attr])
    if fixed.size == 0:
        raise ConfigurationError(f"no boundary faces carry the support attribute "
                                 f"{dirichlet_attr}")
    model = ThermalModel(mesh, cfg.solver)
    filt = PdeFilter(mesh, cfg.filter_r, filter_fixed, cfg.solver, M=model.M)
    n = mesh.num_nodes
    if cfg.symmetrize:
        center = mesh.boundary_nodes([centerline_attr])
        if center.size == 0:
            raise ConfigurationError(f"symmetrize needs centerline attribute {centerline_attr}")
        if loads is not None:
            F_s, F_a = (np.asarray(a, dtype=float).reshape(n, -1) for a in loads)
        elif cfg.load == "constant":
            F_s, F_a = np.full((n, 1), math.sqrt(2.0)), np.zeros((n, 0))
        else:
            F_s, F_a = SymmetrizedSampler(mesh, cfg.grf, centerline_attr).pairs(cfg.n_samples)
        cases = [LoadCase(fixed, F_s)]
        if F_a.shape[1]:
            cases.append(LoadCase(np.union1d(fixed, center), F_a))
        weights = multiplicity(mesh, centerline_attr)
        n_pairs = F_s.shape[1]
        return Problem(mesh, cfg, model, filt, cases, 1.0 / n_pairs, weights,
                       mesh.total_measure())
    if loads is not None:
        F = np.asarray(loads, dtype=float).reshape(n, -1)
    elif cfg.load == "constant":
        F = np.ones((n, 1))
    else:
        sampler = GrfSampler(mesh, cfg.grf)
        F = np.column_stack([s.values for s in sampler.batch(cfg.n_samples)])
    return Problem(mesh, cfg, model, filt, [LoadCase(fixed, F)], 1.0 / F.shape[1],
                   np.ones(n), mesh.total_measure())


@dataclass
class Evaluation:
    rho_filtered: np.ndarray
    rho_physical: np.ndarray
    objective: float
    volume: float
    gradient: np.ndarray
    volume_gradient: np.ndarray


def evaluate(problem: Problem, rho) -> Evaluation:
    """Objective, volume fraction and their per-variable gradients at ``rho``.

    On a half domain the gradients are those of the full mirrored problem
    with respect to one of the twin variables (half-domain derivative
    divided by the node multiplicity).
    """
    cfg = problem.cfg
    rho_t = problem.filter(rho)
    if cfg.beta is not None:
        rho_p = projection(rho_t, cfg.beta, cfg.eta_proj)
        dproj = projection_derivative(rho_t, cfg.beta, cfg.eta_proj)
    else:
        rho_p, dproj = rho_t, None
    j, g = compliance_and_gradient(problem.model, rho_p, problem.cases, problem.scale,
                                   cfg.p, cfg.kappa_min, cfg.kappa_max)
    mass = problem.model.M @ np.ones(problem.mesh.num_nodes)
    volume = float(mass @ rho_p) / problem.measure
    vg = mass / problem.measure
    if dproj is not None:
        g, vg = g * dproj, vg * dproj
    g = problem.filter.backward(g) / problem.weights
    vg = problem.filter.backward(vg) / problem.weights
    return Evaluation(rho_t, rho_p, j, volume, g, vg)


@dataclass
class OptState:
    rho: np.ndarray
    rho_filtered: np.ndarray
    rho_physical: np.ndarray
    objective: float
    volume: float
    mma: MMAState
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0


def _converged(history, tol, window) -> bool:
    if len(history) <= window:
        return False
    obj = [h["objective"] for h in history[-window - 1:]]
    return all(abs(b - a) <= tol * abs(b) for a, b in zip(obj, obj[1:]))


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for h in history:
            writer.writerow([h["iter"], repr(h["objective"]), repr(h["volume"]),
                             repr(h["max_density_change"])])


def optimize(problem: Problem, rho0=None, max_iters: int | None = None, out_dir=None,
             output_map=None, output_mesh: Mesh | None = None, callback=None) -> OptState:
    """Run MMA until ``max_iters`` or a stalled objective.

    Stops early once the relative objective change stays below
    ``cfg.stop_tol`` for ``cfg.stop_window`` consecutive iterations. With
    ``out_dir`` the run writes ``history.csv``, optional
    ``design_####.vtk`` snapshots and the final ``design.vtk``; on a half
    domain pass ``output_map``/``output_mesh`` to write reflected fields.
    A keyboard interrupt writes ``checkpoint.vtk`` before propagating.
    """
    cfg = problem.cfg
    max_iters = cfg.max_iters if max_iters is None else max_iters
    rho = initial_density(problem.mesh, cfg) if rho0 is None else np.array(rho0, dtype=float)
    if rho.shape != (problem.mesh.num_nodes,):
        raise ConfigurationError("initial design needs one value per node")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    mma = MMAState(rho, 0.0, 1.0, problem.weights)
    start = time.perf_counter()
    ev = evaluate(problem, rho)
    obj_scale = 1.0 / max(float(np.max(np.abs(ev.gradient))), 1e-300)
    vol_scale = 1.0 / max(float(np.max(np.abs(ev.volume_gradient))), 1e-300)
    state = OptState(rho, ev.rho_filtered, ev.rho_physical, ev.objective, ev.volume, mma)
    state.history.append({"iter": 0, "objective": ev.objective, "volume": ev.volume,
                          "max_density_change": 0.0})

    def dump(name):
        if out is None:
            return
        fields = {"rho": state.rho, "rho_filtered": state.rho_filtered,
                  "rho_physical": state.rho_physical}
        mesh = problem.mesh
        if output_map is not None:
            fields = {k: reflect(v, output_map) for k, v in fields.items()}
            mesh = output_mesh
        write_vtk(out / name, mesh, fields)

    try:
        for it in range(1, max_iters + 1):
            mma_update(mma, obj_scale * ev.gradient, vol_scale * (ev.volume - cfg.gamma),
                       vol_scale * ev.volume_gradient, cfg.move_limit)
            change = float(np.max(np.abs(mma.x - state.rho)))
            ev = evaluate(problem, mma.x)
            state.rho = mma.x.copy()
            state.rho_filtered, state.rho_physical = ev.rho_filtered, ev.rho_physical
            state.objective, state.volume, state.iterations = ev.objective, ev.volume, it
            state.history.append({"iter": it, "objective": ev.objective, "volume": ev.volume,
                                  "max_density_change": change})
            log.info("iter %4d  j=%.6e  vol=%.6f  change=%.3e", it, ev.objective, ev.volume,
                     change)
            if callback is not None:
                callback(state)
            if cfg.snapshot_every and it % cfg.snapshot_every == 0:
                dump(f"design_{it:04d}.vtk")
            if _converged(state.history, cfg.stop_tol, cfg.stop_window):
                state.converged = True
                break
    except KeyboardInterrupt:
        dump("checkpoint.vtk")
        if out is not None:
            write_history(out / "history.csv", state.history)
        raise
    state.wall_time = time.perf_counter() - start
    if out is not None:
        write_history(out / "history.csv", state.history)
        dump("design.vtk")
    return state

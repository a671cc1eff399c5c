"""Experiment driver: config -> graph/model/initial data -> run -> files.

run_experiment executes one configured flow and writes a self-contained
output directory: the canonical config, the sampled trajectory, final
(and optionally intermediate) densities, a plain-text summary, and for
gradient flows a rate report comparing the variational rate estimate
with the decay actually observed. Everything written is deterministic
for a fixed config, so reruns are byte-identical and diffable.
"""

import math
import os

import numpy as np

from .config import ConfigError, serialize_config
from .drift import duffing_drift, van_der_pol_drift
from .dynamics import (
    MassConservationError,
    StiffnessError,
    drift_problem,
    gradient_problem,
    integrate,
)
from .energy import (
    ConvergenceError,
    FreeEnergySpec,
    build_interaction_matrix,
    build_potential_vector,
    free_energy,
    gibbs_fixed_point,
    gibbs_residual,
)
from .graph import (
    build_cycle_1d,
    build_lattice_2d,
    build_path_lattice_1d,
    largest_component_mask,
    subgraph,
)
from .metric import SingularSystemError
from .rate import EstimationError, FitError, fit_asymptotic_rate, lambda_estimate

OUTPUT_ROOT_ENV = "GRAPHFP_OUTPUT_ROOT"

# Vertices whose density is below max(rho) * CORE_RELATIVE_FLOOR carry no
# measurable share of the dissipation and only slow the rate estimate
# down (or degrade its conditioning), so rate reports restrict to the
# connected high-density core around the mode.
CORE_RELATIVE_FLOOR = 1e-13

NUMERICAL_ERRORS = (
    StiffnessError,
    MassConservationError,
    ConvergenceError,
    SingularSystemError,
    EstimationError,
    FitError,
)


def build_graph(graph_cfg):
    """Construct the Graph described by a GraphConfig."""
    if graph_cfg.kind == "path_1d":
        return build_path_lattice_1d(graph_cfg.a, graph_cfg.b, graph_cfg.n)
    if graph_cfg.kind == "cycle_1d":
        return build_cycle_1d(graph_cfg.a, graph_cfg.b, graph_cfg.n)
    if graph_cfg.kind == "lattice_2d":
        return build_lattice_2d(
            graph_cfg.xlo, graph_cfg.xhi, graph_cfg.ylo, graph_cfg.yhi,
            graph_cfg.dx, boundary=graph_cfg.boundary,
        )
    raise ConfigError([f"unknown graph kind {graph_cfg.kind!r}"])


def build_model(cfg, g):
    """Model object plus FlowProblem for a parsed config on graph g."""
    model = cfg.model
    if model.kind == "gradient":
        spec = FreeEnergySpec(
            v=build_potential_vector(g, model.potential),
            w=build_interaction_matrix(g, model.interaction),
            beta=model.beta,
        )
        return spec, gradient_problem(g, spec)
    if model.drift == "van_der_pol":
        drift = van_der_pol_drift(model.beta)
    elif model.drift == "duffing":
        drift = duffing_drift(model.xi, model.omega, model.r, model.beta)
    else:
        raise ConfigError([f"unknown drift {model.drift!r}"])
    if g.directions is None:
        raise ConfigError(["general models need a direction-tagged graph"])
    return drift, drift_problem(g, drift)


def build_initial_density(cfg, g):
    """Initial probability density on g per the init section."""
    init = cfg.init
    if init.kind == "uniform":
        return np.full(g.n, 1.0 / g.n)
    if init.kind == "gaussian":
        center = np.asarray(init.center, dtype=float)
        if center.size == 0:
            center = g.coords.mean(axis=0)
        if center.size != g.dim:
            raise ConfigError(
                [f"init.center has {center.size} coordinates, graph has dim {g.dim}"]
            )
        d2 = np.sum((g.coords - center) ** 2, axis=1)
        z = np.exp(-d2 / (2.0 * init.variance))
        total = math.fsum(z)
        if not total > 0:
            raise ConfigError(
                ["gaussian init underflowed to zero everywhere; widen init.variance"]
            )
        return z / total
    if init.kind == "csv":
        rho = read_density_csv(init.path, g.n)
        return rho / math.fsum(rho)
    raise ConfigError([f"unknown init kind {init.kind!r}"])


def read_density_csv(path, n=None):
    """Read the rho column of a density CSV (vertex,x,y,rho)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or "rho" not in data.dtype.names:
        raise ConfigError([f"{path}: expected a header with a 'rho' column"])
    rho = np.atleast_1d(np.asarray(data["rho"], dtype=float))
    if n is not None and rho.size != n:
        raise ConfigError([f"{path}: {rho.size} densities for a graph of size {n}"])
    return rho


def count_strict_local_maxima(g, rho):
    """Number of vertices strictly above every neighbor."""
    rho = np.asarray(rho, dtype=float)
    best = np.full(g.n, -np.inf)
    np.maximum.at(best, g.src, rho[g.dst])
    return int(np.count_nonzero(rho > best))


def _resolve_outdir(cfg, output_root):
    root = output_root or os.environ.get(OUTPUT_ROOT_ENV) or os.getcwd()
    outdir = os.path.join(root, cfg.output.dir)
    os.makedirs(outdir, exist_ok=True)
    return outdir


def write_trajectory_csv(path, traj):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("t,free_energy,dissipation,min_rho,mass_error\n")
        for s in traj.samples:
            f.write(
                f"{s.t:.15g},{s.free_energy:.15g},{s.dissipation:.15g},"
                f"{s.min_rho:.15g},{s.mass_error:.15g}\n"
            )


def write_density_csv(path, g, rho):
    x = g.coords[:, 0]
    y = g.coords[:, 1] if g.dim > 1 else np.zeros(g.n)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("vertex,x,y,rho\n")
        for i in range(g.n):
            f.write(f"{i},{x[i]:.15g},{y[i]:.15g},{rho[i]:.15g}\n")


def core_subgraph(g, rho, relative_floor=CORE_RELATIVE_FLOOR):
    """Connected high-density core around the mode of rho.

    Returns (core graph, global vertex indices, renormalized core density).
    """
    rho = np.asarray(rho, dtype=float)
    verts = np.flatnonzero(rho >= rho.max() * relative_floor)
    sub = subgraph(g, verts)
    seed_local = int(np.searchsorted(verts, int(np.argmax(rho))))
    keep = largest_component_mask(sub, seed_vertex=seed_local)
    core_verts = verts[keep]
    core = subgraph(g, core_verts) if core_verts.size < g.n else g
    rho_core = rho[core_verts]
    return core, core_verts, rho_core / math.fsum(rho_core)


def _restrict_spec(spec, verts):
    w = None if spec.w is None else spec.w[np.ix_(verts, verts)]
    return FreeEnergySpec(v=spec.v[verts], w=w, beta=spec.beta)


def rate_report(g, spec, traj, restarts=64, seed=0):
    """Rate analysis of a finished gradient run, as a dict of numbers.

    The variational rate is estimated on the connected high-density core
    of the final state. The observed free-energy decay is fitted against
    the exact Gibbs energy when the model has no interaction; with an
    interaction the run's own final energy stands in as the reference,
    which biases the last samples and is noted in the output.
    """
    rho = traj.final_rho
    core, core_verts, rho_core = core_subgraph(g, rho)
    report = lambda_estimate(
        core, _restrict_spec(spec, core_verts), rho_core,
        restarts=restarts, seed=seed,
    )
    out = {
        "core_size": int(core.n),
        "lambda_estimate": report.lambda_numeric,
        "predicted_decay": report.predicted_decay,
        "gibbs_residual": float(gibbs_residual(spec, rho)),
        "fitted_decay": math.nan,
        "fit_r_squared": math.nan,
        "f_reference": math.nan,
        "fit_note": "",
    }
    if spec.w is None:
        rho_inf = gibbs_fixed_point(spec)
        out["f_reference"] = free_energy(spec, rho_inf)
        out["fit_note"] = "reference energy: exact Gibbs state"
    else:
        out["f_reference"] = free_energy(spec, rho, check=False)
        out["fit_note"] = (
            "reference energy: final state of the run "
            "(interaction model; late samples biased)"
        )
    try:
        fitted, r2 = fit_asymptotic_rate(traj, out["f_reference"])
        out["fitted_decay"] = fitted
        out["fit_r_squared"] = r2
    except FitError as exc:
        out["fit_note"] += f"; decay fit unavailable ({exc})"
    return out


def _write_rate_report(path, rate):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"core_size = {rate['core_size']}\n")
        f.write(f"lambda_estimate = {rate['lambda_estimate']:.15g}\n")
        f.write(f"predicted_decay = {rate['predicted_decay']:.15g}\n")
        f.write(f"fitted_decay = {rate['fitted_decay']:.15g}\n")
        f.write(f"fit_r_squared = {rate['fit_r_squared']:.15g}\n")
        f.write(f"f_reference = {rate['f_reference']:.15g}\n")
        f.write(f"gibbs_residual = {rate['gibbs_residual']:.15g}\n")
        f.write(f"note: {rate['fit_note']}\n")


def _write_summary(path, cfg, g, traj, maxima):
    lines = [
        f"name = {cfg.name}",
        f"graph = {cfg.graph.kind} n={g.n} m={g.m} dx={g.dx:.15g}",
        f"model = {cfg.model.kind}",
        f"steps = {traj.steps}",
        f"final_t = {traj.final_t:.15g}",
        f"stop_reason = {traj.stop_reason}",
        f"final_free_energy = {traj.samples[-1].free_energy:.15g}",
        f"final_dissipation = {traj.samples[-1].dissipation:.15g}",
        f"final_rhs_sup = {traj.final_rhs_sup:.15g}",
        f"min_rho = {traj.min_rho_overall:.15g}",
        f"max_mass_error = {traj.max_mass_error:.15g}",
        f"lyapunov_violations = {traj.lyapunov_violations}",
        f"max_energy_increase = {traj.max_energy_increase:.15g}",
        f"strict_local_maxima = {maxima}",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _write_failure(outdir, cfg, exc, traj=None):
    lines = [
        f"name = {cfg.name}",
        f"error = {type(exc).__name__}",
        f"message = {exc}",
    ]
    if traj is not None:
        lines += [
            f"steps = {traj.steps}",
            f"final_t = {traj.final_t:.15g}",
            f"min_rho = {traj.min_rho_overall:.15g}",
            f"max_mass_error = {traj.max_mass_error:.15g}",
        ]
    path = os.path.join(outdir, "failure_report.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return path


def run_experiment(cfg, output_root=None, rate_restarts=64):
    """Run one configured experiment and write its output directory.

    Returns a manifest dict with the headline numbers and the paths of
    every file written. Numerical failures still leave a
    failure_report.txt behind before the exception propagates.
    """
    g = build_graph(cfg.graph)
    model, problem = build_model(cfg, g)
    rho0 = build_initial_density(cfg, g)
    outdir = _resolve_outdir(cfg, output_root)

    files = {"config": os.path.join(outdir, "config.cfg")}
    with open(files["config"], "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_config(cfg))

    dt = None if math.isnan(cfg.time.dt) else cfg.time.dt
    try:
        traj = integrate(
            problem,
            rho0,
            t_end=cfg.time.t_end,
            dt=dt,
            safety=cfg.time.safety,
            stop=cfg.time.stop,
            stop_eps=cfg.time.stop_eps,
            checkpoint_every=cfg.output.checkpoint_every,
            density_every=cfg.output.density_every,
        )
    except NUMERICAL_ERRORS as exc:
        files["failure_report"] = _write_failure(outdir, cfg, exc)
        raise

    files["trajectory"] = os.path.join(outdir, "trajectory.csv")
    write_trajectory_csv(files["trajectory"], traj)
    files["density_final"] = os.path.join(outdir, "density_final.csv")
    write_density_csv(files["density_final"], g, traj.final_rho)
    for step, _, rho in traj.density_checkpoints:
        path = os.path.join(outdir, f"density_{step:08d}.csv")
        write_density_csv(path, g, rho)
        files.setdefault("density_checkpoints", []).append(path)

    maxima = count_strict_local_maxima(g, traj.final_rho)
    files["summary"] = os.path.join(outdir, "run_summary.txt")
    _write_summary(files["summary"], cfg, g, traj, maxima)

    rate = None
    if cfg.model.kind == "gradient":
        try:
            rate = rate_report(g, model, traj, restarts=rate_restarts, seed=cfg.seed)
        except NUMERICAL_ERRORS as exc:
            rate = None
            files["failure_report"] = _write_failure(outdir, cfg, exc, traj)
        else:
            files["rate_report"] = os.path.join(outdir, "rate_report.txt")
            _write_rate_report(files["rate_report"], rate)

    return {
        "name": cfg.name,
        "outdir": outdir,
        "graph": {"kind": cfg.graph.kind, "n": g.n, "m": g.m, "dx": g.dx},
        "model_kind": cfg.model.kind,
        "steps": traj.steps,
        "final_t": traj.final_t,
        "stop_reason": traj.stop_reason,
        "final_free_energy": traj.samples[-1].free_energy,
        "final_dissipation": traj.samples[-1].dissipation,
        "final_rhs_sup": traj.final_rhs_sup,
        "min_rho": traj.min_rho_overall,
        "max_mass_error": traj.max_mass_error,
        "lyapunov_violations": traj.lyapunov_violations,
        "max_energy_increase": traj.max_energy_increase,
        "strict_local_maxima": maxima,
        "rate": rate,
        "files": files,
        "trajectory": traj,
    }

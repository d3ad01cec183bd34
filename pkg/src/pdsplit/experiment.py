"""Experiment configuration, problem assembly, reference solve and sweeps."""
import dataclasses
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import load_libsvm, synth_lasso, synth_logistic
from .distnet import build_graph, solve_distributed
from .errors import ValidationError
from .km import CsvSink, make_schedule
from .linops import IdentityMap
from .minibatch import MINIBATCH_HEADER, split_problem, solve_minibatch
from .primal_dual import (
    PD_HEADER, CompositeProblem, StepSizes, build_admm_preconditioner,
    build_diag_preconditioner, solve_pd, validate_admm_steps, validate_step_sizes,
)
from .prox import L1Norm, LeastSquares, LogisticLoss, ZeroFunction

__all__ = [
    "ALGORITHMS", "ExperimentConfig", "build_dataset", "centralized_problem",
    "reference_solve", "run_experiment", "validate_config", "sweep",
]

ALGORITHMS = ("fb", "condat", "ipds", "iadmm", "padmm", "minibatch", "psmpds",
              "dist-padmm", "pdapds")


@dataclass
class ExperimentConfig:
    algo: str = "ipds"
    problem: str = "logistic"
    data: Optional[str] = None
    synth: Optional[tuple] = (200, 50, 10, 1.0)
    lam: float = 0.01
    batches: int = 4
    graph: str = "ring"
    alpha: float = 0.3
    theta: float = 0.01
    delta_hat: Optional[float] = None
    rho_frac: float = 0.9
    gamma: float = 1.9
    r: float = 1.0
    s: float = 1.0
    seed: int = 0
    max_iters: int = 200000
    tol: float = 1e-9
    out: Optional[str] = None
    trace_every: int = 10
    printed_dual_scaling: bool = False

    def validate(self):
        if self.algo not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algo!r}; choose from {ALGORITHMS}")
        if self.problem not in ("logistic", "lasso"):
            raise ValidationError(f"unknown problem {self.problem!r}")
        if (self.data is None) == (self.synth is None):
            raise ValidationError("give exactly one of a data file or synthetic sizes")
        if self.synth is not None and len(self.synth) != 4:
            raise ValidationError("synthetic spec is m,q,k,noise")
        if self.lam < 0:
            raise ValidationError("lambda must be nonnegative")
        if self.batches < 1:
            raise ValidationError("need at least one batch")
        if self.algo in ("dist-padmm", "pdapds") and self.batches < 2:
            raise ValidationError("distributed solvers need at least two agents")
        if self.max_iters < 1 or not self.tol > 0 or self.trace_every < 1:
            raise ValidationError("max_iters, tol and trace_every must be positive")
        return self

    def to_json(self):
        d = dataclasses.asdict(self)
        if d["synth"] is not None:
            d["synth"] = list(d["synth"])
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        if d.get("synth") is not None:
            m, q, k, noise = d["synth"]
            d["synth"] = (int(m), int(q), int(k), float(noise))
        return cls(**d)


def build_dataset(cfg):
    if cfg.data is not None:
        return load_libsvm(cfg.data)
    m, q, k, noise = cfg.synth
    gen = synth_logistic if cfg.problem == "logistic" else synth_lasso
    return gen(cfg.seed, int(m), int(q), int(k), float(noise))


def _loss(cfg, ds):
    if cfg.problem == "logistic":
        return LogisticLoss(ds.A, ds.labels)
    return LeastSquares(ds.A, ds.labels)


def centralized_problem(loss, lam):
    """``loss(x) + lam ||x||_1`` written as ``f + g + h o D`` with ``D = I``."""
    return CompositeProblem(loss, ZeroFunction(), L1Norm(lam), IdentityMap(loss.dim))


def reference_solve(loss, reg, tol=1e-12, max_iters=2_000_000, x0=None):
    """Plain proximal-gradient loop with step ``1/L``; returns ``(x, objective)``.

    ``reg`` is a prox function or a float ``lam`` meaning ``lam ||.||_1``.
    Runs until ``||x_{k+1} - x_k|| <= tol``; raises on the iteration cap.
    Only the prox library is shared with the solvers under test.
    """
    g = L1Norm(reg) if np.isscalar(reg) else reg
    L = loss.lipschitz
    if not L > 0:
        raise ValidationError("reference solve needs a positive Lipschitz bound")
    t = 1.0 / L
    x = np.zeros(loss.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    for _ in range(max_iters):
        x_new = g.prox(x - t * loss.grad(x), t)
        step = np.linalg.norm(x_new - x)
        x = x_new
        if step <= tol:
            return x, loss.value(x) + g.value(x)
    raise RuntimeError(f"reference solve did not reach tol={tol} in {max_iters} iterations")


def _centralized_steps(cfg, prob):
    """Steps and certificate for the centralized algorithms."""
    L = float(prob.E.max())
    if cfg.algo == "condat":
        steps = StepSizes.scalars(1.0 / (L / cfg.gamma + cfg.r), cfg.r, prob.n, prob.m)
        return steps, validate_step_sizes(prob, steps)
    if cfg.algo == "ipds":
        steps = build_diag_preconditioner(prob.D, prob.E, cfg.gamma, cfg.r, cfg.s).steps()
        return steps, validate_step_sizes(prob, steps)
    if cfg.algo == "iadmm":
        steps = (1.0 / (L / cfg.gamma + cfg.r), 1.0 / cfg.r)
        return steps, validate_admm_steps(prob, *steps)
    pc = build_admm_preconditioner(prob, cfg.gamma, cfg.r)
    return (pc.tau, pc.psi), validate_admm_steps(prob, pc.tau, pc.psi)


def validate_config(cfg):
    """Run every validator for ``cfg`` without iterating; returns a report dict."""
    cfg.validate()
    ds = build_dataset(cfg)
    report = {"algo": cfg.algo, "m": ds.m, "q": ds.q}
    loss_kind = "logistic" if cfg.problem == "logistic" else "lasso"
    if cfg.algo == "fb":
        loss = _loss(cfg, ds)
        report["lipschitz"] = loss.lipschitz
        return report
    if cfg.algo in ("condat", "ipds", "iadmm", "padmm"):
        prob = centralized_problem(_loss(cfg, ds), cfg.lam)
        _, cert = _centralized_steps(cfg, prob)
    else:
        bp = split_problem(ds.A, ds.labels, cfg.lam, cfg.batches, loss_kind)
        from .minibatch import MinibatchOperator, batch_preconditioner
        pc = batch_preconditioner(bp.ehat, cfg.gamma, cfg.r)
        if cfg.algo in ("dist-padmm", "pdapds"):
            from .distnet import DistOperator
            graph = build_graph(cfg.graph, cfg.batches)
            cert = DistOperator(bp, graph, pc.tau, pc.psi).cert
            report["edges"] = graph.n_edges
        else:
            cert = MinibatchOperator(bp, pc.tau, pc.psi).cert
    alpha = 0.0 if cfg.algo == "condat" else cfg.alpha
    rho = 1.0 if cfg.algo == "condat" else None
    sched = make_schedule(alpha, cfg.theta, cfg.delta_hat, rho, cfg.rho_frac,
                          relax_cap=cert.relax_cap)
    report.update(margin=cert.margin, kappa=cert.kappa, relax_cap=cert.relax_cap,
                  alpha=sched.alpha, rho=sched.rho, rho_max=sched.rho_max,
                  delta_hat=sched.delta_hat)
    return report


def _header_for(algo):
    if algo in ("minibatch", "psmpds"):
        return MINIBATCH_HEADER
    if algo in ("dist-padmm", "pdapds"):
        from .distnet import DIST_HEADER
        return DIST_HEADER
    return PD_HEADER


def run_experiment(cfg, reference=None):
    """Build, solve and summarise one configuration.

    ``reference`` may carry a precomputed ``(x*, objective*)``. The summary
    holds the final objective, the gap to the reference, the iteration count
    and wall-clock seconds.
    """
    cfg.validate()
    ds = build_dataset(cfg)
    loss = _loss(cfg, ds)
    loss_kind = "logistic" if cfg.problem == "logistic" else "lasso"
    if reference is None:
        reference = reference_solve(loss, cfg.lam)
    ref_obj = reference[1]

    sink = CsvSink(cfg.out, _header_for(cfg.algo)) if cfg.out else None
    t0 = time.perf_counter()
    cons = 0.0
    try:
        if cfg.algo == "fb":
            prob = CompositeProblem(loss, L1Norm(cfg.lam), ZeroFunction(),
                                    IdentityMap(loss.dim))
            x, status, iters = _fb_run(prob, loss, cfg, sink)
            obj = loss.value(x) + cfg.lam * float(np.abs(x).sum())
        elif cfg.algo in ("condat", "ipds", "iadmm", "padmm"):
            prob = centralized_problem(loss, cfg.lam)
            steps, _ = _centralized_steps(cfg, prob)
            method = {"padmm": "iadmm"}.get(cfg.algo, cfg.algo)
            res = solve_pd(prob, method, steps, alpha=cfg.alpha, theta=cfg.theta,
                           delta_hat=cfg.delta_hat, rho_frac=cfg.rho_frac,
                           max_iters=cfg.max_iters, tol=cfg.tol,
                           trace_every=cfg.trace_every, sink=sink)
            x, status, iters, obj = res.x, res.status, res.iterations, res.objective
        elif cfg.algo in ("minibatch", "psmpds"):
            bp = split_problem(ds.A, ds.labels, cfg.lam, cfg.batches, loss_kind)
            res = solve_minibatch(bp, stochastic=cfg.algo == "psmpds", seed=cfg.seed,
                                  alpha=cfg.alpha, theta=cfg.theta, delta_hat=cfg.delta_hat,
                                  rho_frac=cfg.rho_frac, gamma=cfg.gamma, r=cfg.r,
                                  max_iters=cfg.max_iters, tol=cfg.tol,
                                  trace_every=cfg.trace_every, sink=sink)
            x, status, iters, obj, cons = (res.xbar, res.status, res.iterations,
                                           res.objective, res.consensus_error)
        else:
            bp = split_problem(ds.A, ds.labels, cfg.lam, cfg.batches, loss_kind)
            graph = build_graph(cfg.graph, cfg.batches)
            res = solve_distributed(bp, graph, asynchronous=cfg.algo == "pdapds",
                                    seed=cfg.seed, alpha=cfg.alpha, theta=cfg.theta,
                                    delta_hat=cfg.delta_hat, rho_frac=cfg.rho_frac,
                                    gamma=cfg.gamma, r=cfg.r, max_iters=cfg.max_iters,
                                    tol=cfg.tol, trace_every=cfg.trace_every, sink=sink,
                                    printed_dual_scaling=cfg.printed_dual_scaling)
            x, status, iters, obj, cons = (res.xbar, res.status, res.iterations,
                                           res.objective, res.consensus_error)
    finally:
        if sink is not None:
            sink.close()
    wall = time.perf_counter() - t0
    return {
        "algo": cfg.algo, "seed": cfg.seed, "status": status, "iterations": iters,
        "objective": obj, "reference_objective": ref_obj, "gap": obj - ref_obj,
        "consensus_error": cons, "wall_seconds": wall, "x": x,
    }


def _fb_run(prob, loss, cfg, sink):
    from .primal_dual import forward_backward_step
    tau = 1.0 / loss.lipschitz
    x = np.zeros(loss.dim)
    for k in range(1, cfg.max_iters + 1):
        x_new = forward_backward_step(prob, tau, x)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if sink is not None and k % cfg.trace_every == 0:
            sink.write((k, prob.objective(x), step, 0.0))
        if step <= cfg.tol:
            return x, "converged", k
    return x, "max_iters", cfg.max_iters


def _run_one(args):
    cfg_json, ref = args
    summary = run_experiment(ExperimentConfig.from_json(cfg_json), ref)
    summary.pop("x")
    return summary


def sweep(base, grid=None, seeds=(0,), workers=1):
    """Run ``base`` over the Cartesian product of ``grid`` values and ``seeds``.

    ``grid`` maps config field names to lists of values. Trace files, when
    ``base.out`` is set, get a ``-<index>`` suffix per run. Returns the list of
    summaries in grid order.
    """
    grid = dict(grid or {})
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys))) or [()]
    cfgs = []
    for i, (combo, seed) in enumerate(itertools.product(combos, seeds)):
        cfg = dataclasses.replace(base, seed=seed, **dict(zip(keys, combo)))
        if base.out:
            p = Path(base.out)
            cfg.out = str(p.with_name(f"{p.stem}-{i}{p.suffix or '.csv'}"))
        cfgs.append(cfg.validate())
    refs = {}
    jobs = []
    for cfg in cfgs:
        key = (cfg.data, cfg.synth, cfg.problem, cfg.lam, cfg.seed)
        if key not in refs:
            ds = build_dataset(cfg)
            refs[key] = reference_solve(_loss(cfg, ds), cfg.lam)
        jobs.append((cfg.to_json(), refs[key]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]

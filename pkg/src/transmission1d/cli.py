"""Command-line experiment runner.

Every subcommand reads one TOML config, writes CSV files whose first lines are
``# config_hash=...`` and ``# seed=...`` comments, and a ``manifest.json``.
Exit status: 0 on success, 1 when the config or a model hypothesis fails
validation, 2 when a numerical error occurs.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (DOMAIN_CONFIGS, CorpusCase, corpus_constant, inverse_norm_envelope, apriori_corpus, apriori_report,
                     lifted_apriori_report, random_coefficient, random_solution)
from .coefficients import CoefficientField, coercivity_constant
from .config import ExperimentConfig, config_hash, load_config
from .errors import ConfigError, TransmissionError
from .fem import TransmissionData, build_mesh, conormal_jump, solution_rows, solve_transmission
from .functions import as_broken
from .norms import discrete_inverse_norm, poincare_constant
from .parametric import GaussianVector, LogNormalModel, validate_hypotheses
from .signchanging import (PiecewiseScalarField, critical_contrast_sweep, param_regularity_probe,
                           resolvent_norm, resolvent_solve)
from .uq import convergence_study, mc_fem_error_moment, mc_moment

SUBCOMMANDS = ("solve", "poincare", "inverse-norm", "convergence", "mc-moments", "mc-fem-error", "bounds",
               "sign-changing")


class HypothesisFailure(Exception):
    pass


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


class Run:
    """Output directory, provenance header and list of written files."""

    def __init__(self, cfg: ExperimentConfig, raw: dict, out: Path, seed: int, threads: int):
        self.cfg = cfg
        self.hash = config_hash(raw)
        self.seed = seed
        self.out = out
        self.threads = threads
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name: str, rows: list[dict], columns: list[str] | None = None):
        columns = columns or (list(rows[0]) if rows else [])
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_hash={self.hash}\n# seed={self.seed}\n")
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({c: _fmt(r.get(c, "")) for c in columns})
        self.files.append(name)


def _domain(cfg):
    return cfg.domain.build()


def _coefficients(cfg, dom) -> CoefficientField:
    if cfg.coefficients is None:
        raise ConfigError("this subcommand needs a [coefficients] section")
    return CoefficientField.from_entries(dom, **cfg.coefficients.model_dump())


def _data(cfg, dom) -> TransmissionData:
    d = cfg.data
    return TransmissionData.build(dom, d.f, d.g_tilde, d.g, d.h_tilde or None, d.h or None)


def _model(cfg, dom, seed) -> LogNormalModel:
    if cfg.model is None:
        raise ConfigError("this subcommand needs a [model] section")
    m = cfg.model
    bases = [CoefficientField.from_entries(dom, **b.model_dump()) for b in m.bases]
    return LogNormalModel(bases, GaussianVector(m.sigma, seed), m.gamma_floor, m.variant)


def _checked_model(cfg, dom, seed) -> LogNormalModel:
    model = _model(cfg, dom, seed)
    rep = validate_hypotheses(model)
    if not rep.ok:
        raise HypothesisFailure("model hypothesis violated:\n" + "\n".join(
            f"  {name}: {detail}" for name, _, detail in rep.failures))
    return model


def _meshes(cfg, dom, degree=None):
    return [build_mesh(dom, n, degree or cfg.mesh.degree) for n in cfg.mesh.n]


# ----------------------------------------------------------------------------
# subcommands


def cmd_solve(run: Run):
    cfg = run.cfg
    dom = _domain(cfg)
    A = _coefficients(cfg, dom)
    mesh = _meshes(cfg, dom)[0]
    u = solve_transmission(A, _data(cfg, dom), mesh)
    rows = solution_rows(A, u)
    exact = as_broken(dom, cfg.data.exact) if cfg.data.exact is not None else None
    if exact is not None:
        for r in rows:
            r["u_exact"] = float(exact.eval(r["piece"] - 1, r["x"]))
    run.write_csv("solution.csv", rows)
    rep = conormal_jump(A, u, mesh, f=_data(cfg, dom).f, method="residual")
    rows = [{"location": f"neumann_{e}", "x": dom.endpoint(e), "value": float(v)} for e, v in rep.neumann.items()]
    rows += [{"location": f"interface_{i + 1}", "x": x, "value": float(v)}
             for i, (x, v) in enumerate(zip(dom.gamma, rep.interface))]
    run.write_csv("conormal.csv", rows, ["location", "x", "value"])


def cmd_poincare(run: Run):
    cfg = run.cfg
    dom = _domain(cfg)
    rows = [{"n_per_subdomain": m.n_per[0], "n_elements": m.n_elements, "dim": m.dim,
             "eta": poincare_constant(m)} for m in _meshes(cfg, dom)]
    run.write_csv("poincare.csv", rows)


def cmd_inverse_norm(run: Run):
    cfg = run.cfg
    dom = _domain(cfg)
    A = _coefficients(cfg, dom)
    k = cfg.experiment.k
    coer = coercivity_constant(A)
    rows = []
    for m in _meshes(cfg, dom, 2 if k == 1 else None):
        rows.append({"quantity": "inverse_norm", "k": k, "n_elements": m.n_elements, "dim": m.dim,
                     "value": discrete_inverse_norm(A, m, k), "gamma_full": coer.full, "gamma_se": coer.se,
                     "eta": poincare_constant(m) if dom.dirichlet_ends else float("nan")})
    run.write_csv("inverse_norm.csv", rows)


def cmd_convergence(run: Run):
    cfg = run.cfg
    dom = _domain(cfg)
    A = _coefficients(cfg, dom)
    exact = as_broken(dom, cfg.data.exact) if cfg.data.exact is not None else None
    rep = convergence_study(A, _data(cfg, dom), _meshes(cfg, dom), exact, cfg.mesh.ref_factor)
    run.write_csv("convergence.csv", [{"dim": d, "h1_error": e} for d, e in zip(rep.dims, rep.errors)])
    run.write_csv("convergence_fit.csv", [{"C_rate": rep.C_rate, "mu": rep.mu, "residual": rep.residual}])


def cmd_mc_moments(run: Run):
    cfg = run.cfg
    dom = _domain(cfg)
    model = _checked_model(cfg, dom, run.seed)
    e = cfg.experiment
    mesh = _meshes(cfg, dom)[0]
    tuples = e.moments or [(e.p, e.r, e.s)]
    summary = []
    for p, r, s in tuples:
        rep = mc_moment(model, p, r, s, e.k, e.n, mesh, level=e.level, threads=run.threads)
        name = f"mc_moments_p{_fmt(p)}_r{_fmt(r)}_s{_fmt(s)}.csv"
        run.write_csv(name, [{"n": b[0], "mean": b[1], "stderr": b[2]} for b in rep.batches],
                      ["n", "mean", "stderr"])
        summary.append({"p": p, "r": r, "s": s, "k": e.k, "n": rep.n_samples, "mean": rep.mean,
                        "stderr": rep.stderr, "excluded": rep.n_excluded, "heavy_tail": int(rep.heavy_tail)})
        if not rep.ok:
            raise TransmissionError(f"{rep.n_excluded} singular samples exceed the 0.1% exclusion limit")
    run.write_csv("mc_moments_summary.csv", summary)


def cmd_mc_fem_error(run: Run):
    cfg = run.cfg
    dom = _domain(cfg)
    model = _checked_model(cfg, dom, run.seed)
    e = cfg.experiment
    F = _data(cfg, dom)
    meshes = _meshes(cfg, dom)
    projections = ["h1", "energy"] if e.projection == "both" else [e.projection]
    fits = []
    for proj in projections:
        t = mc_fem_error_moment(model, F, e.p, meshes, e.n, proj, cfg.mesh.ref_factor, run.threads)
        run.write_csv(f"mc_fem_error_{proj}.csv",
                      [{"dim": d, "moment": m, "stderr": s} for d, m, s in zip(t.dims, t.moments, t.stderrs)])
        fits.append({"projection": proj, "p": e.p, "slope": t.slope, "chain_checked": t.chain_checked,
                     "chain_violations": t.chain_violations, "chain_max_ratio": t.chain_max_ratio,
                     "excluded": t.n_excluded})
    run.write_csv("mc_fem_error_fit.csv", fits)


def cmd_bounds(run: Run):
    cfg = run.cfg
    e = cfg.experiment
    rng = np.random.default_rng(run.seed)
    if e.bound == "envelope":
        dom = _domain(cfg)
        rows = []
        for k in e.ks:
            for i in range(e.n_cases):
                A = random_coefficient(dom, rng)
                m = build_mesh(dom, cfg.mesh.n[0], 2 if k == 0 else cfg.mesh.degree)
                r = inverse_norm_envelope(A, k, m)
                rows.append({"case": i, "k": k, "K": r.K, "gamma": r.gamma, "norm_A": r.norm_A, "lhs": r.lhs,
                             "rhs": r.rhs, "ratio": r.ratio})
        run.write_csv("bounds_envelope.csv", rows)
        return
    for k in e.ks:
        if e.bound == "apriori":
            cases = apriori_corpus(e.n_cases, run.seed, n_per=cfg.mesh.n[0])
            report = apriori_report
        else:
            cases = []
            for i in range(e.n_cases):
                dom = DOMAIN_CONFIGS[i % len(DOMAIN_CONFIGS)]
                cases.append(CorpusCase(random_coefficient(dom, rng), random_solution(dom, rng, in_vk=False),
                                        cfg.mesh.n[0]))
            report = lifted_apriori_report
        rows = []
        for refine in (1, 2):
            summ = corpus_constant(cases, k, 2, refine, report)
            for i, (c, r) in enumerate(zip(cases, summ.reports)):
                rows.append({"case": i, "k": k, "refine": refine, "dim": r.inputs["dim"],
                             "gamma": coercivity_constant(c.A).full, "norm_A": r.inputs["norm_A"],
                             "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio})
        run.write_csv(f"bounds_{e.bound}_k{k}.csv", rows)


def cmd_sign_changing(run: Run):
    cfg = run.cfg
    e = cfg.experiment
    dom = _domain(cfg)
    mesh_n = cfg.mesh.n[0]
    rows = []
    for vals in e.contrasts:
        a = PiecewiseScalarField(dom, tuple(vals))
        m = build_mesh(dom, mesh_n, cfg.mesh.degree)
        for t in e.t:
            sol = resolvent_solve(a, t, cfg.data.f, m)
            rows.append({"values": " ".join(_fmt(v) for v in vals), "t": t,
                         "resolvent_norm": resolvent_norm(a, t, m), "bound": 1 / abs(t),
                         "flux_jump": float(np.max(np.abs(sol.flux_jump), initial=0.0))})
    run.write_csv("resolvent.csv", rows)
    sweep = critical_contrast_sweep(e.eps, mesh_n, cfg.mesh.degree)
    run.write_csv("contrast_sweep.csv", [{"eps": x, "cond": c, "cond_times_eps": c * x}
                                         for x, c in zip(sweep.eps, sweep.cond)])
    fields = [PiecewiseScalarField(dom, tuple(v)) for v in e.contrasts]
    k = max(e.k, 1)
    probe = param_regularity_probe(fields, k)
    run.write_csv("regularity.csv", [{"values": " ".join(_fmt(v) for v in r.values), "k": k, "u_norm": r.u_norm,
                                      "nnW": r.nnw, "norm_A": r.norm_a, "data": r.data, "rho_00": r.rho(0, 0)}
                                     for r in probe.rows])


COMMANDS = {
    "solve": cmd_solve,
    "poincare": cmd_poincare,
    "inverse-norm": cmd_inverse_norm,
    "convergence": cmd_convergence,
    "mc-moments": cmd_mc_moments,
    "mc-fem-error": cmd_mc_fem_error,
    "bounds": cmd_bounds,
    "sign-changing": cmd_sign_changing,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transmission1d", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="TOML experiment config")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
    ap.add_argument("--out", default=None, help="output directory (overrides [output].dir)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo loops")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg, raw = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        run = Run(cfg, raw, Path(args.out or cfg.output.dir), seed, args.threads)
        COMMANDS[args.subcommand](run)
    except (ConfigError, HypothesisFailure, OSError, ValueError) as exc:
        if isinstance(exc, TransmissionError) and not isinstance(exc, ConfigError):
            print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 2
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    except TransmissionError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "subcommand": args.subcommand,
        "config": str(args.config),
        "config_hash": run.hash,
        "seed": seed,
        "threads": args.threads,
        "files": run.files,
        "versions": {"transmission1d": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": __import__("scipy").__version__},
        "wall_time_s": time.perf_counter() - t0,
    }
    (run.out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line driver: ``singular-yamabe {radial,roots,index,approx,solve,verify}``.

Exit codes: 0 success, 2 validation, 3 admissibility conflict, 4 solver
failure, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .approx import ApproxSolution, build, default_window, required_degree
from .exceptions import DegreeOverflowError, IndexConflictError, OutputError, YamabeError
from .fields import FieldGrid
from .index_set import check_mu, resonances
from .io import RunConfig, plain, read_field, write_csv, write_field, write_json
from .nonlinear import ContractionConfig, Solution, iterate, verify
from .pipeline import index_for, make_profile, roots_table, roots_up_to
from .radial import trajectory
from .sphere import build_basis

COMMANDS = ("radial", "roots", "index", "approx", "solve", "verify")


class Run:
    """State shared by the stages of one invocation."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.timings: dict[str, float] = {}
        self._psi = None
        self._index = None
        self._approx = None

    def timed(self, name, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    @property
    def hash(self) -> str:
        return self.cfg.hash

    @property
    def psi(self):
        if self._psi is None:
            self._psi = self.timed("radial", make_profile, self.cfg["n"],
                                   self.cfg.psi_min_ratio)
        return self._psi

    @property
    def mu(self) -> float:
        return self.cfg["mu"]

    @property
    def index(self):
        if self._index is None:
            self._index = self.timed("index", index_for, self.psi, self.mu + 1.0)
        return self._index

    def check_admissible(self):
        res = check_mu(self.index, self.mu, self.cfg.tol["tol_admit"])
        if not res:
            raise IndexConflictError(f"mu={self.mu} is not admissible: {res.reason}",
                                     mu=self.mu, nearest=res.nearest, distance=res.distance)
        return res

    @property
    def approx(self) -> ApproxSolution:
        if self._approx is None:
            self.check_admissible()
            cfg = self.cfg
            kind = cfg["grid"]["basis"]
            need = required_degree(self.psi, self.mu, _seed_obj(cfg.seed), kind=kind)
            D = cfg["grid"]["max_degree"]
            if D is None:
                D = need
            elif D < need:
                raise DegreeOverflowError(f"grid.max_degree={D} is below the required degree "
                                          f"{need}", max_degree=D, required=need)
            basis = build_basis(cfg["n"], D, kind)
            self._approx = self.timed("approx", build, self.psi, cfg.seed, self.mu, self.index,
                                      basis=basis, t0=cfg["t0"],
                                      tol_admit=cfg.tol["tol_admit"])
        return self._approx

    def window(self, t0: float) -> tuple[float, float]:
        w = self.cfg["window"]
        return tuple(w) if w is not None else default_window(t0)

    def csv(self, name, columns, rows):
        return write_csv(self.out / name, columns, rows, self.hash)

    def json(self, name, obj):
        return write_json(self.out / name, obj)


def _seed_obj(seed):
    from .approx import KernelSeed

    return KernelSeed(seed)


def cmd_radial(run: Run) -> dict:
    psi = run.psi
    periods = run.cfg["periods"]
    t, y, dy, drift = run.timed("trajectory", trajectory, psi, periods)
    if psi.is_constant:
        drift = np.zeros_like(drift)
    run.csv("radial.csv", [("t", "cylinder time"), ("psi", "1"), ("dpsi", "1/time"),
                           ("hamiltonian_drift", "relative")], zip(t, y, dy, drift))
    summary = {"n": psi.n, "constant": psi.is_constant, "period": psi.nominal_period,
               "hamiltonian": psi.hamiltonian, "psi_min": psi.psi_min, "psi_max": psi.psi_max,
               "max_drift": float(np.max(np.abs(drift))), "periods": periods,
               "config_hash": run.hash}
    run.json("radial.json", summary)
    return summary


def cmd_roots(run: Run) -> dict:
    D = run.cfg["grid"]["max_degree"] or 3
    rows = run.timed("roots", roots_table, run.psi, D)
    run.csv("roots.csv", [("degree", "1"), ("lambda", "1"), ("rho", "1/time"),
                          ("det_monodromy_error", "1")],
            [(r["degree"], r["lambda"], r["rho"], r["det_error"]) for r in rows])
    summary = {"roots": rows, "config_hash": run.hash}
    run.json("roots.json", summary)
    return summary


def cmd_index(run: Run) -> dict:
    idx = run.index
    mu = run.mu
    res = check_mu(idx, mu, run.cfg.tol["tol_admit"])
    roots = [r for r in roots_up_to(run.psi, mu + 1.0).values() if r <= mu + 1.0]
    res_roots = {round(r.root, 9) for r in resonances(roots, mu + 1.0)}
    rows = [(float(e), idx.witness_string(k), bool(e < mu), round(float(e), 9) in res_roots)
            for k, e in enumerate(idx.elements)]
    run.csv("index.csv", [("value", "1/time"), ("witness", "combination"),
                          ("below_mu", "bool"), ("resonant", "bool")], rows)
    summary = {"mu": mu, "admissible": res.admissible, "nearest": res.nearest,
               "distance": res.distance, "reason": res.reason,
               "roots": list(idx.roots), "elements_below_mu": list(idx.below(mu)),
               "config_hash": run.hash}
    run.json("index.json", summary)
    if not res.admissible:
        raise IndexConflictError(f"mu={mu} is not admissible: {res.reason}", mu=mu,
                                 nearest=res.nearest, distance=res.distance)
    return summary


def serialize_approx(ap: ApproxSolution) -> dict:
    return {"report": ap.report(), "basis": {"kind": type(ap.basis).__name__,
                                            "max_degree": ap.basis.max_degree,
                                            "modes": len(ap.basis)},
            "period_grid_size": ap.pgrid.size,
            "blocks": [{"rate": r, "coeffs": blk.coeffs} for r, blk in ap.phi.items()]}


def cmd_approx(run: Run) -> dict:
    ap = run.approx
    t0 = run.cfg["t0"]
    window = run.window(t0)
    P = ap.psi.nominal_period
    span = max(window[1] - t0 + 2.0 * P + 1.0, 20.0)
    grid = FieldGrid.build(t0, P, span, run.cfg["grid"]["t_step"])
    pre = run.timed("residual", ap.seed_only().residual_sup, grid)
    post = run.timed("residual", ap.residual_sup, grid)
    from .fields import decay_rate

    rate_pre = decay_rate(grid.t, pre, window, P)
    rate_post = decay_rate(grid.t, post, window, P)
    rate_grad = run.timed("residual", ap.gradient_decay_rate, grid, window)
    inwin = (grid.t >= window[0]) & (grid.t <= window[1])
    run.csv("residual.csv", [("t", "cylinder time"), ("sup_residual", "1"),
                             ("sup_residual_uncorrected", "1"), ("in_fit_window", "bool")],
            zip(grid.t, post, pre, inwin))
    rate_tol = run.cfg.tol["rate_tol"]
    summary = {"mu": run.mu, "window": list(window), "rate": rate_post,
               "rate_uncorrected": rate_pre, "gradient_rate": rate_grad,
               "order_ok": bool(rate_post >= run.mu - rate_tol), "config_hash": run.hash,
               "approx": ap.report()}
    run.json("approx.json", serialize_approx(ap))
    run.json("approx_summary.json", summary)
    return summary


def _contraction_config(run: Run) -> ContractionConfig:
    tol = run.cfg.tol
    return ContractionConfig(run.mu, run.cfg["t0"], max_iters=tol["max_iters"],
                             convergence_tol=tol["convergence_tol"],
                             escalation_attempts=tol["escalation_attempts"],
                             t_step=run.cfg["grid"]["t_step"])


def cmd_solve(run: Run) -> dict:
    ap = run.approx
    sol, rep = run.timed("solve", iterate, ap, _contraction_config(run))
    meta = {"config_hash": run.hash, "mu": run.mu}
    write_field(run.out / "solution.field.txt", sol.field(), meta)
    write_field(run.out / "correction.field.txt", sol.w, meta)
    summary = {"config": run.cfg.to_dict(), "config_hash": run.hash,
               "roots": roots_table(run.psi, ap.basis.max_degree),
               "index_below_mu": list(run.index.below(run.mu)),
               "corrections": [r.summary() for r in ap.corrections],
               "solve": rep.to_dict()}
    run.json("report.json", summary)
    return summary


def cmd_verify(run: Run) -> dict:
    ap = run.approx
    path = run.out / "correction.field.txt"
    sol = None
    if path.exists():
        w, header = read_field(path, ap.basis)
        if header.get("config_hash") == run.hash:
            sol = w
    if sol is None:
        solved, _ = run.timed("solve", iterate, ap, _contraction_config(run))
        w = solved.w
    window = run.window(w.grid.t0)
    from .fields import decay_rate

    sup = w.sup_theta()
    rate = decay_rate(w.grid.t, sup, window, ap.psi.nominal_period)
    C = float(np.max(np.exp(run.mu * w.grid.t) * sup))
    run.csv("verify.csv", [("t", "cylinder time"), ("sup_difference", "1"),
                           ("reference", "C' exp(-mu t)")],
            zip(w.grid.t, sup, C * np.exp(-run.mu * w.grid.t)))
    rate_tol = run.cfg.tol["rate_tol"]
    summary = {"mu": run.mu, "verified_mu": rate, "C_prime": C, "window": list(window),
               "verified": bool(rate >= run.mu - rate_tol), "config_hash": run.hash}
    run.json("verify.json", summary)
    return summary


HANDLERS = {"radial": cmd_radial, "roots": cmd_roots, "index": cmd_index,
            "approx": cmd_approx, "solve": cmd_solve, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singular-yamabe",
                                     description="Singular Yamabe solutions on a half-cylinder.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"radial": "periodic radial profile and energy drift",
             "roots": "indicial roots per harmonic degree",
             "index": "index set and admissibility of mu",
             "approx": "approximate solution and residual decay",
             "solve": "contraction iteration to an exact solution",
             "verify": "decay of the correction v - v_hat"}
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration entry, dotted keys allowed")
    return parser


def _report_error(exc: YamabeError, out: Path | None) -> int:
    payload = exc.to_dict()
    print(json.dumps(plain(payload), sort_keys=True), file=sys.stderr)
    if out is not None:
        try:
            write_json(out / "error.json", payload)
        except OutputError:
            pass
    return exc.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        cfg = RunConfig.load(args.config, args.override)
        out = Path(args.out or cfg["output_dir"])
        if args.out:
            cfg.data["output_dir"] = str(out)
        run = Run(cfg, out)
        summary = HANDLERS[args.command](run)
        write_json(out / "timings.json", run.timings)
    except YamabeError as exc:
        return _report_error(exc, out)
    print(json.dumps(plain(_brief(args.command, summary)), sort_keys=True))
    return 0


def _brief(command: str, summary: dict) -> dict:
    keys = {"radial": ("period", "hamiltonian", "psi_min", "psi_max", "max_drift"),
            "roots": ("roots",), "index": ("admissible", "nearest", "elements_below_mu"),
            "approx": ("rate", "rate_uncorrected", "gradient_rate", "order_ok"),
            "solve": (), "verify": ("verified_mu", "C_prime", "verified")}[command]
    out = {k: summary[k] for k in keys}
    if command == "solve":
        s = summary["solve"]
        out = {k: s[k] for k in ("converged", "contraction_factor", "initial_residual",
                                 "final_residual", "verified_mu", "t0")}
    out["command"] = command
    return out


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

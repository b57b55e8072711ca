"""Command-line front end: single identities, suites, weight dumps, the
Bergman smoothing check and a fast self-test."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import field_algebra as fa
from .config import ConfigError, RunConfig, default_out_dir, parse_config
from .geometry import make_domain, sample_collar
from .quadrature import (NonConvergenceWarning, QuadratureConfig, integrate_disc,
                         oracle_monomial_moment)
from .verification import (IdentityConfig, IdentityReport, SuiteReport, get_domain,
                           run_cells, verify_identity, weight_program)

__all__ = ["parse_config", "RunConfig", "emit_reports", "run_suite", "self_test", "main"]

SCHEMA_VERSION = "1"

CSV_COLUMNS = ("domain", "k", "g", "eta", "variant", "lhs_source", "lhs", "rhs",
               "rhs_error_estimate", "abs_err", "rel_err", "pass")

# fields that vary between identical runs and are kept out of suite.json
_VOLATILE = ("runtime",)


def _report_dict(r: IdentityReport) -> dict:
    d = r.to_dict()
    for key in _VOLATILE:
        d.pop(key, None)
    return d


def suite_document(reports: Iterable[IdentityReport]) -> dict:
    return {"schema_version": SCHEMA_VERSION, "reports": [_report_dict(r) for r in reports]}


def _safe(name: str) -> str:
    return name.replace(":", "-").replace(",", "_")


def emit_reports(results: SuiteReport | Sequence[IdentityReport], out_dir,
                 weights: Sequence[tuple] = (), weight_points: int = 64,
                 seed: int = 0) -> list[Path]:
    """Write ``suite.json``, ``suite.csv``, ``timings.json`` and optional weight dumps.

    ``weights`` holds ``(domain, k, g_id, variant)`` tuples.
    """
    reports = list(results.reports if isinstance(results, SuiteReport) else results)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "suite.json"
    p.write_text(json.dumps(suite_document(reports), indent=2) + "\n")
    written.append(p)
    p = out / "suite.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in reports:
            w.writerow([r.domain, r.k, r.g, r.eta, r.variant, r.lhs_source, repr(r.lhs),
                        repr(r.rhs), repr(r.rhs_error_estimate), repr(r.abs_err),
                        repr(r.rel_err), int(r.passed)])
    written.append(p)
    p = out / "timings.json"
    p.write_text(json.dumps([{"cell": [r.domain, r.k, r.g, r.eta, r.variant],
                              "runtime": r.runtime} for r in reports], indent=2) + "\n")
    written.append(p)
    for dom, k, g, variant in weights:
        written.append(dump_weight(get_domain(dom), k, g, variant, out / "weights",
                                   weight_points, seed))
    return written


def dump_weight(domain, k: int, g_id: str, variant: str, out_dir, points: int = 64,
                seed: int = 0, sexpr: bool = False) -> Path:
    """Sample ``omega`` and ``delta^k omega`` at deterministic collar points into a CSV."""
    w = weight_program(domain, k, g_id, variant)
    X = sample_collar(domain, points, seed)
    delta = domain.delta_values(X)
    om = w.evaluate(X)
    F = fa.evaluate_array(w.weighted(), X)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"omega_{domain.name}_k{k}_{_safe(g_id)}_{w.variant.value}"
    path = out / f"{stem}.csv"
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([*(f"x{i + 1}" for i in range(domain.dim)), "delta", "omega_re",
                     "omega_im", "weighted_re", "weighted_im"])
        for row, d, o, f in zip(X, delta, om, F):
            wr.writerow([*map(repr, map(float, row)), repr(float(d)), repr(o.real),
                         repr(o.imag), repr(f.real), repr(f.imag)])
    if sexpr:
        (out / f"{stem}.sexpr").write_text(fa.to_sexpr(w.omega) + "\n")
    return path


def run_suite(cfg: RunConfig, workers: int | None = None) -> SuiteReport:
    return run_cells(cfg.cells(), cfg.identity_config(),
                     cfg.workers if workers is None else workers, cfg.collar)


# ----------------------------------------------------------------------------
# self-test


def self_test(perturbation: float = 0.0, samples: int = 1000, seed: int = 0,
              out_dir=None) -> tuple[bool, list[str]]:
    """Fast invariant checks; ``perturbation`` scales the distance function (a fault hook)."""
    lines: list[str] = []
    ok = True

    def check(name, value, tol):
        nonlocal ok
        good = bool(np.isfinite(value) and value <= tol)
        ok &= good
        lines.append(f"{'PASS' if good else 'FAIL'} {name}: {value:.3e} (tol {tol:.0e})")

    dom = make_domain("disc", perturbation=perturbation)
    X = sample_collar(dom, samples, seed)
    gx, gy = (fa.evaluate_array(e, X).real for e in dom.grad_delta)
    check("|grad delta| - 1", float(np.max(np.abs(np.hypot(gx, gy) - 1.0))), 1e-10)
    N = fa.evaluate_array(fa.apply_N(dom.delta, dom), X)
    T = fa.evaluate_array(fa.apply_T(dom.delta, dom), X)
    check("N(delta) - 1", float(np.max(np.abs(N - 1.0))), 1e-10)
    check("T(delta)", float(np.max(np.abs(T))), 1e-12)

    x, y = fa.coord(1), fa.coord(2)
    e = fa.mul(fa.exp(fa.mul(x, y)), fa.sqrt(fa.add(fa.power(x, 2), fa.const(1.5))))
    pts = np.array([[0.3, -0.2], [-0.5, 0.4], [0.1, 0.7]])
    h = 1e-4
    worst = 0.0
    for j, step in ((1, [h, 0.0]), (2, [0.0, h])):
        ex = fa.evaluate_array(fa.partial(e, j), pts)
        fd = (fa.evaluate_array(e, pts + step) - fa.evaluate_array(e, pts - step)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(ex - fd))))
    check("symbolic vs finite-difference partials", worst, 1e-6)

    class _Mono:
        wants_offsets = False

        def __call__(self, X):
            z = X[:, 0] + 1j * X[:, 1]
            return z ** 2 * np.conj(z) ** 2

    r = integrate_disc(_Mono(), QuadratureConfig(), dom)
    check("monomial moment", abs(r.value - oracle_monomial_moment(2, 2)), 1e-12)

    class _Sing:
        wants_offsets = True

        def __call__(self, X, D):
            return (-D) ** -1.5

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        r = integrate_disc(_Sing(), QuadratureConfig(rel_tol=1e-9).with_hints([1.0]), dom)
    check("boundary-singular integral", abs(r.value - math.pi), 1e-7)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "self_test.json").write_text(json.dumps({"ok": ok, "checks": lines}, indent=2) + "\n")
    return ok, lines


# ----------------------------------------------------------------------------
# argument handling


def _write_json(path, doc) -> None:
    p = Path(path)
    if p.parent != Path(""):
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(doc, indent=2) + "\n")


def _cmd_verify(args) -> int:
    dom = get_domain(args.domain)
    cfg = IdentityConfig(args.tol_rel, args.tol_abs)
    if args.max_subdiv is not None:
        from dataclasses import replace

        from .holo_catalog import get_eta
        _, _, quad = cfg.resolve(get_eta(args.eta, dom), dom)
        cfg = replace(cfg, quadrature=replace(quad, max_subdivisions=args.max_subdiv))
    r = verify_identity(args.k, args.g, args.eta, args.variant, cfg, dom)
    print(f"{'PASS' if r.passed else 'FAIL'} {r.domain} k={r.k} g={r.g} eta={r.eta} "
          f"variant={r.variant} lhs={r.lhs!r} rhs={r.rhs!r} rel_err={r.rel_err:.3e}")
    if args.report:
        _write_json(args.report, suite_document([r]))
    return 0 if r.passed else 1


def _cmd_suite(args) -> int:
    if args.config:
        cfg = parse_config(Path(args.config).read_text())
    else:
        cfg = parse_config("")
    out = args.out or cfg.out
    t0 = time.perf_counter()
    res = run_suite(cfg, args.workers)
    weights = ([(cfg.domain, k, g, v) for k in cfg.k for g in cfg.g for v in cfg.variants]
               if cfg.dump_weights else [])
    emit_reports(res, out, weights, cfg.weight_points, cfg.seed)
    failed = [r for r in res.reports if not r.passed]
    for r in failed:
        print(f"FAIL {r.domain} k={r.k} g={r.g} eta={r.eta} variant={r.variant} "
              f"rel_err={r.rel_err:.3e}")
    print(f"{len(res.reports) - len(failed)}/{len(res.reports)} cells passed "
          f"in {time.perf_counter() - t0:.1f}s; reports in {out}")
    return 0 if res.ok else 1


def _cmd_weight_dump(args) -> int:
    dom = get_domain(args.domain)
    out = Path(args.out or default_out_dir()) / "weights"
    path = dump_weight(dom, args.k, args.g, args.variant, out, args.points, args.seed, args.sexpr)
    print(path)
    return 0


def _cmd_bergman(args) -> int:
    from .bergman import smoothing_check

    rep = smoothing_check(args.g, args.k, args.k2, args.jmax)
    for row in rep.rows:
        print(f"j={row.j:3d} |B(mu g)|={row.projected_norm:.6e} "
              f"|delta^k mu|={row.weighted_norm:.6e} ratio={row.ratio:.6e}")
    print(f"{'PASS' if rep.bounded else 'FAIL'} max ratio j<=10: {rep.head_max:.6e}, "
          f"j>=10: {rep.tail_max:.6e}")
    if args.report:
        _write_json(args.report, {"schema_version": SCHEMA_VERSION, **rep.to_dict()})
    return 0 if rep.bounded else 1


def _cmd_self_test(args) -> int:
    t0 = time.perf_counter()
    ok, lines = self_test(args.perturb, out_dir=args.out)
    print("\n".join(lines))
    print(f"self-test {'passed' if ok else 'FAILED'} in {time.perf_counter() - t0:.1f}s")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holol1", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check one identity cell")
    v.add_argument("--domain", default="disc", choices=("disc", "ball"))
    v.add_argument("--k", type=int, default=1)
    v.add_argument("--g", default="one")
    v.add_argument("--eta", default="const")
    v.add_argument("--variant", default="corrected")
    v.add_argument("--tol-rel", type=float)
    v.add_argument("--tol-abs", type=float)
    v.add_argument("--max-subdiv", type=int)
    v.add_argument("--report")
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("suite", help="run a configured matrix of cells")
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=_cmd_suite)

    w = sub.add_parser("weight-dump", help="sample a weight on the collar")
    w.add_argument("--domain", default="disc", choices=("disc", "ball"))
    w.add_argument("--k", type=int, default=1)
    w.add_argument("--g", default="one")
    w.add_argument("--variant", default="corrected")
    w.add_argument("--points", type=int, default=64)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out")
    w.add_argument("--sexpr", action="store_true", help="also write the expression DAG")
    w.set_defaults(func=_cmd_weight_dump)

    b = sub.add_parser("bergman-check", help="smoothing ratios for conj(z)^j g")
    b.add_argument("--g", default="pow:2")
    b.add_argument("--k", type=int, default=1)
    b.add_argument("--k2", type=int, default=1)
    b.add_argument("--jmax", type=int, default=40)
    b.add_argument("--report")
    b.set_defaults(func=_cmd_bergman)

    t = sub.add_parser("self-test", help="fast invariant checks")
    t.add_argument("--out")
    t.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    t.set_defaults(func=_cmd_self_test)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

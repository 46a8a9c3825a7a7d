"""steklov-lab command line.

Exit codes: 0 success, 1 a check did not hold, 2 bad configuration,
3 numerical failure (the stage is printed).
"""
import argparse
import json
import math
import os
import sys

import numpy as np

from .asymptotics import eigenvalue_asymptote
from .compare import exponential_rate_fit, spectra_close
from .config import SUBCOMMANDS, dump_json, load_config, write_csv, write_json
from .dnmap import _thread_count, steklov_spectrum
from .errors import ConfigError, DivergingNormError, FitInvalidError, SteklovLabError
from .geometry import ConformalFactor, potential_from_factor
from .stability import (StabilityConfig, StageFailure, pinned_bump_family, run_calderon_stability,
                        run_steklov_stability, symmetric_bump_family)


def _factor(spec, cfg):
    return ConformalFactor.from_spec(spec, cfg.degree)


def _out(cfg, name):
    return os.path.join(cfg.out, name)


def cmd_spectrum(cfg, as_json=False):
    f = _factor(cfg.factor, cfg)
    S = steklov_spectrum(f, cfg.n, cfg.omega, cfg.m_max, _thread_count(cfg.threads))
    rows = []
    for (m, kap, mult, lm, lp), b in zip(S.rows, S.blocks):
        if m >= 1 and cfg.omega == 0:
            am = eigenvalue_asymptote(f, cfg.n, m, "-")
            ap = eigenvalue_asymptote(f, cfg.n, m, "+")
            rm, rp = b.lambda_branch1 - am, b.lambda_branch0 - ap
        else:
            rm = rp = float("nan")
        rows.append((m, kap, mult, lm, lp, rm, rp))
    cols = ("m", "kappa", "multiplicity", "lambda_minus", "lambda_plus", "asymptote_resid_minus",
            "asymptote_resid_plus")
    write_csv(_out(cfg, "spectrum.csv"), cfg, cols, rows)
    summary = {"n": cfg.n, "omega": cfg.omega, "m_max": cfg.m_max,
               "first_pairs": [[r[3], r[4]] for r in rows[:5]],
               "asymptote_residuals_top": [rows[-1][5], rows[-1][6]]}
    _report(summary, as_json, "spectrum")
    return 0


def cmd_compare(cfg, as_json=False):
    f, ft = _factor(cfg.factor, cfg), _factor(cfg.factor_tilde, cfg)
    nt = _thread_count(cfg.threads)
    S = steklov_spectrum(f, cfg.n, cfg.omega, cfg.m_max, nt)
    St = steklov_spectrum(ft, cfg.n, cfg.omega, cfg.m_max, nt)
    eps = float(cfg.tolerances.get("eps", 1e-9))
    rep = spectra_close(S, St, eps, symmetric=bool(cfg.tolerances.get("symmetric", True)))
    payload = {"eps": eps, "report": rep.to_dict()}
    if cfg.tolerances.get("rate_fit"):
        try:
            mr = cfg.tolerances.get("rate_m_range")
            fit = exponential_rate_fit(S, St, cfg.tolerances.get("branch", "-"), tuple(mr) if mr else None)
            payload["rate_fit"] = {"rate": fit.rate, "r_squared": fit.r_squared}
        except FitInvalidError as exc:
            payload["rate_fit"] = {"invalid": str(exc)}
    write_json(_out(cfg, "compare.json"), cfg, payload)
    write_csv(_out(cfg, "compare.csv"), cfg, ("m", "branch", "value", "matched_value", "gap", "cardinality_ok"),
              [(r.m, r.branch, r.value, r.matched_value, r.gap, int(r.cardinality_ok))
               for r in rep.per_eigenvalue])
    w = rep.worst()
    _report({"holds": rep.holds, "eps": eps, "worst_gap": w.gap if w else 0.0,
             "rate_fit": payload.get("rate_fit")}, as_json, "compare")
    return 0 if rep.holds else 1


def _family(cfg):
    st = cfg.stability
    deltas = [float(d) for d in st.get("deltas", [1e-2, 1e-3, 1e-4])]
    kind = st.get("family", "symmetric" if st.get("mode", "steklov") == "steklov" else "pinned")
    base = st.get("base")
    if kind == "random-symmetric":
        rng = np.random.default_rng(cfg.seed)
        cos = [0.0 if k % 2 else float(rng.uniform(-0.1, 0.1)) for k in range(1, 7)]
        base = {"kind": "fourier", "base": 1.0, "cos": cos}
        kind = "symmetric"
    if base is None:
        base = {"kind": "fourier", "base": 1.0, "cos": [0.0, 0.15]} if kind == "symmetric" else \
            {"kind": "affine", "a": 0.3, "b": 1.0}
    if kind == "symmetric":
        return symmetric_bump_family(base, deltas, **st.get("bump", {}), degree=cfg.degree)
    if kind == "pinned":
        return pinned_bump_family(base, deltas, **st.get("bump", {}), degree=cfg.degree)
    if kind == "explicit":
        if cfg.factor_tilde is None:
            raise ConfigError("explicit family needs factor_tilde")
        return [(0.0, _factor(cfg.factor, cfg), _factor(cfg.factor_tilde, cfg))]
    raise ConfigError(f"unknown stability family {kind!r}")


def cmd_stability(cfg, as_json=False):
    st = cfg.stability
    mode = st.get("mode", "steklov")
    scfg = StabilityConfig.from_dict(dict(st.get("config", {}), m_max=cfg.m_max, threads=cfg.threads))
    try:
        family = _family(cfg)
    except TypeError as exc:
        raise ConfigError(f"bad bump parameters: {exc}") from None
    runner = run_steklov_stability if mode == "steklov" else run_calderon_stability
    records, agg, ok = [], [], True
    for delta, f, ft in family:
        try:
            rec = runner(f, ft, cfg.n, cfg.omega, scfg, label=f"delta={delta!r}")
        except DivergingNormError as exc:
            ok = False
            res = getattr(exc, "result", None)
            records.append({"delta": delta, "diverging": True, "diagnostic": str(exc),
                            "slope": res.slope if res else None,
                            "expected_slope": res.expected_slope if res else None})
            agg.append((delta, float("nan"), float("nan"), float("nan"), float("nan"), 0))
            continue
        ok &= rec.passed
        d = rec.to_dict()
        d["delta"] = delta
        records.append(d)
        agg.append((delta, rec.eps, rec.q_gap_L2, rec.bound_product, rec.f_gap_sup, int(rec.passed)))
    os.makedirs(cfg.out, exist_ok=True)
    with open(_out(cfg, "records.jsonl"), "w") as fh:
        for r in records:
            fh.write(json.dumps(json.loads(dump_json(dict(r, config_hash=cfg.hash()))), sort_keys=True) + "\n")
    write_csv(_out(cfg, "stability.csv"), cfg, ("delta", "eps", "q_gap_L2", "bound_product", "f_gap_sup", "passed"),
              agg, {"mode": mode})
    prods = [a[3] for a in agg if math.isfinite(a[3])]
    _report({"mode": mode, "all_checks_passed": bool(ok), "runs": len(agg),
             "bound_product_spread": (max(prods) / min(prods)) if prods and min(prods) > 0 else None,
             "diverging": [r["delta"] for r in records if r.get("diverging")]}, as_json, "stability")
    return 0 if ok else 1


def cmd_kernel(cfg, as_json=False):
    from .transform import marchenko_bound_check, representation_check, solve_kernel
    f = _factor(cfg.factor, cfg)
    q = potential_from_factor(f, cfg.n, cfg.omega)
    grid_n = int(cfg.kernel.get("grid_n", 256))
    kg = solve_kernel(q, grid_n)
    ok, worst = marchenko_bound_check(kg)
    exact = 0.5 * q.series.antideriv()(kg.x)
    rows = [(float(x), float(d), float(e)) for x, d, e in zip(kg.x, kg.diagonal(), exact)]
    reps = {}
    for z in cfg.kernel.get("kappas", [1.0, 25.0, 400.0]):
        pts = kg.x[grid_n // 4::grid_n // 4]
        reps[repr(float(z))] = max(max(representation_check(kg, float(z), float(x))) for x in pts)
    write_csv(_out(cfg, "kernel_diagonal.csv"), cfg, ("x", "K_diag", "half_integral_q"), rows,
              {"grid_n": grid_n, "marchenko_ok": bool(ok)})
    if cfg.kernel.get("dump_binary"):
        with open(_out(cfg, "kernel.bin"), "wb") as fh:
            fh.write(kg.to_bytes())
    _report({"grid_n": grid_n, "marchenko_ok": bool(ok), "marchenko_worst_ratio": worst,
             "diagonal_error": kg.diagonal_error(), "representation_residual": reps}, as_json, "kernel")
    return 0


def cmd_muntz_table(cfg, as_json=False):
    from .muntz import muntz_sequence, muntz_table
    mz = cfg.muntz
    n = int(mz.get("n", cfg.n))
    m0 = int(mz.get("m0", 1 if n > 2 else 0))
    sysm = muntz_sequence(n, m0, m0 + cfg.m_max, shifted=bool(mz.get("shifted", True)))
    rows = muntz_table(sysm, mz.get("p_max"))
    write_csv(_out(cfg, "muntz_table.csv"), cfg, ("k", "lambda", "gap", "eps2", "row_log_sum_abs_C"), rows,
              {"n": n, "m0": m0, "alpha": sysm.alpha})
    _report({"n": n, "m0": m0, "alpha": sysm.alpha, "rows": len(rows),
             "eps2_last": rows[-1][3], "min_gap": float(np.min(sysm.gaps())) if sysm.size > 1 else None},
            as_json, "muntz-table")
    return 0


COMMANDS = {"spectrum": cmd_spectrum, "compare": cmd_compare, "stability": cmd_stability,
            "kernel": cmd_kernel, "muntz-table": cmd_muntz_table}


def _report(summary, as_json, name):
    if as_json:
        print(dump_json(summary))
        return
    print(f"[{name}]")
    for k, v in summary.items():
        print(f"  {k}: {v}")


def build_parser():
    p = argparse.ArgumentParser(prog="steklov-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON or YAML run configuration")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--m-max", type=int, default=None)
        s.add_argument("--threads", type=int, default=None)
        s.add_argument("--json", action="store_true", help="print the summary as JSON")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.subcommand,
                          {"out": args.out, "m_max": args.m_max, "threads": args.threads})
        return COMMANDS[args.subcommand](cfg, args.json)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageFailure as exc:
        print(f"numerical error in stage '{exc.stage}': {exc}", file=sys.stderr)
        return 3
    except SteklovLabError as exc:
        print(f"numerical error in stage '{exc.stage}': {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

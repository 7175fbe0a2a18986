"""Command line interface: ``structrealize <command> --out DIR ...``.

Every command writes CSV/JSON results and, where useful, PNG figures into
``--out`` and prints a tab-separated summary to stdout.  Exit status is 0 on
success, 1 when a computation fails and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .errors import PipelineStageError, StructRealizeError
from .lstfe import TransferEstimate, select_frequencies
from .paramfit import TestData, minimize_cost, refit_with_all_data, sample_cost
from .pipeline import PipelineConfig, RunConfig, _estimate, load_config, paper_config, run_pipeline
from .realize import structured_realization
from .sim import make_sparse_input, simulate_delay, validation_input
from .systems import FAMILY_NAMES, get_family, make_delay_benchmark, transfer_response
from .validation import error_metrics

log = logging.getLogger("structrealize")


def _emit(*fields):
    print("\t".join(str(f) for f in fields))


def _model_args(p):
    g = p.add_argument_group("benchmark model")
    g.add_argument("--model-N", type=int, default=12, help="state dimension (default 12)")
    g.add_argument("--model-tau", type=float, default=1.0, help="delay (default 1)")
    g.add_argument("--model-zeta", type=float, default=0.01)
    g.add_argument("--model-nu", type=float, default=5.0)
    g.add_argument("--model-gain", type=float, default=10.0, help="output gain, C = gain * B^T (default 10)")


def _model(a):
    return make_delay_benchmark(a.model_N, a.model_tau, a.model_zeta, a.model_nu, a.model_gain)


def _freq_args(p, f_min=1e-4, f_max=1.0, r=10):
    p.add_argument("--f-min", type=float, default=f_min)
    p.add_argument("--f-max", type=float, default=f_max)
    p.add_argument("--r", type=int, default=r, help="requested number of frequencies")


def _parse_p(text):
    return [float(v) for v in text.split(",") if v.strip()] if text else []


# -- commands ---------------------------------------------------------------


def cmd_simulate(a, out: Path):
    model = _model(a)
    if a.input == "sparse":
        sel = select_frequencies(a.f_min, a.f_max, a.r, a.t_f, a.dt)
        u = make_sparse_input(sel.N, sel.ks, a.t_f)
        sio.write_json(out / "frequencies.json", {"k": [int(k) for k in sel.ks], "omega": sel.omegas.tolist()})
    else:
        which = int(a.input[1])
        u = lambda t: validation_input(which, t)
    ts = simulate_delay(model, u, a.t_f, a.dt)
    path = sio.write_timeseries(out / "timeseries.csv", ts)
    _emit("timeseries", path, ts.N + 1)


def cmd_estimate(a, out: Path):
    ts = sio.read_timeseries(a.timeseries)
    est = _estimate(ts, RunConfig(ts.t_f, ts.dt, a.f_min, a.f_max, a.r, a.used_fraction, a.threshold))
    path = sio.write_estimate(out / "estimate.csv", est)
    _emit("estimate", path, len(est))
    for w, h in zip(est.omegas, est.values):
        _emit("omega", repr(float(w)), repr(float(h.real)), repr(float(h.imag)))
    if not a.no_plots:
        from .plotting import plot_transfer

        plot_transfer(out / "estimate.png", est.omegas, {}, {"estimates": (est.omegas, est.values)})


def _read_estimates(paths) -> TransferEstimate:
    ests = [sio.read_estimate(p) for p in paths]
    lam = np.concatenate([e.lambdas for e in ests])
    val = np.concatenate([e.values for e in ests])
    order = np.argsort(lam.imag, kind="stable")
    return TransferEstimate(lam[order], val[order])


def cmd_realize(a, out: Path):
    data = _read_estimates(a.estimate)
    family = get_family(a.family, _bounds(a))
    rz = structured_realization(data, family, _parse_p(a.p))
    path = sio.write_realization(out / "realization.json", rz)
    _emit("realization", path, rz.order)
    if not a.no_plots:
        from .plotting import plot_transfer

        w = np.geomspace(data.omegas.min() / 2, data.omegas.max() * 2, 400)
        plot_transfer(out / "realization.png", w, {"realization": transfer_response(rz, 1j * w)},
                      {"data": (data.omegas, data.values)})


def _bounds(a):
    b = getattr(a, "bounds", None)
    return [tuple(b)] if b else None


def cmd_fit(a, out: Path):
    family = get_family(a.family, [tuple(a.bounds)])
    interp = _read_estimates(a.interp)
    test = TestData.from_estimate(_read_estimates(a.test))
    lo, hi = a.bounds
    start = a.start if a.start is not None else 0.5 * (lo + hi)
    sweep = sample_cost([[g] for g in np.linspace(lo, hi, a.sweep_points)], interp, test, family)
    sio.write_cost_sweep(out / "cost_sweep.csv", sweep)
    fit = minimize_cost((lo, hi), start, interp, test, family, n_grid=a.grid)
    sio.write_fit(out / "fit.json", fit)
    p_use = round(fit.p_star, a.round) if a.round is not None else fit.p_star
    rz = refit_with_all_data([p_use], interp, test, family)
    sio.write_realization(out / "realization_refit.json", rz)
    _emit("p_star", repr(fit.p_star))
    _emit("cost", repr(fit.cost))
    _emit("evaluations", fit.evaluations)
    _emit("p_used", repr(p_use))
    _emit("refit_order", rz.order)
    if not a.no_plots:
        from .plotting import plot_cost

        plot_cost(out / "cost_sweep.png", [s.p[0] for s in sweep], [s.cost for s in sweep], fit.p_star)


def cmd_validate(a, out: Path):
    model = _model(a)
    rzs = {Path(p).stem: sio.read_realization(p) for p in a.realization}
    lines = ["realization,input,u_l2,linf_ratio,l2_ratio,status"]
    inputs = [int(v) for v in a.inputs.split(",") if v.strip()]
    for which in inputs:
        u = lambda t, w=which: validation_input(w, t)
        full = simulate_delay(model, u, a.t_f, a.dt)
        outputs = {"model": full.y}
        for name, rz in rzs.items():
            try:
                red = simulate_delay(rz, u, a.t_f, a.dt)
            except StructRealizeError as exc:
                lines.append(f"{name},u{which},nan,inf,inf,{type(exc).__name__}")
                _emit(name, f"u{which}", "failed", exc)
                continue
            u_l2, linf, l2 = error_metrics(full.y, red.y, full.u, full.dt)
            outputs[name] = red.y
            lines.append(f"{name},u{which},{u_l2:.17g},{linf:.17g},{l2:.17g},ok")
            _emit(name, f"u{which}", f"{u_l2:.6g}", f"{linf:.6g}", f"{l2:.6g}")
        sio.write_csv(out / f"timeseries_u{which}.csv", ["t", "u", *(f"y_{k}" for k in outputs)],
                      [full.t, full.u, *outputs.values()])
        if not a.no_plots:
            from .plotting import plot_timeseries

            plot_timeseries(out / f"timeseries_u{which}.png", full.t, outputs, title=f"validation input u{which}")
    (out / "validation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _config_flags(p):
    g = p.add_argument_group("configuration overrides (see PipelineConfig)")
    for f in dataclasses.fields(PipelineConfig):
        if f.name == "out":
            continue
        g.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar=type(f.default).__name__.upper())


def _overrides(a) -> dict:
    return {k[4:]: v for k, v in vars(a).items() if k.startswith("cfg_") and v is not None}


def _run_config(cfg: PipelineConfig):
    try:
        summary = run_pipeline(cfg)
    except PipelineStageError as exc:
        _emit("failed", exc.stage, exc.__cause__ or exc)
        raise
    for name in ("interp_estimate", "test_estimate"):
        if name in summary:
            e = summary[name]
            _emit(name, "frequencies", f"{e['requested']}/{e['actual']}")
            if "max_error" in e:
                _emit(name, "max_error", f"{e['max_error']:.3e}")
    if "fit" in summary:
        _emit("fit", "p_star", repr(summary["fit"]["p_star"]))
        _emit("fit", "cost", f"{summary['fit']['cost']:.3e}")
    for row in summary.get("validation", []):
        _emit("validation", row["realization"], f"u{row['input']}", f"{row['u_l2']:.3g}",
              f"{row['linf_ratio']:.3e}", f"{row['l2_ratio']:.3e}", row["status"])


def cmd_pipeline(a, out: Path):
    over = _overrides(a)
    over["out"] = str(out)
    if a.round is not None:
        over["round_digits"] = a.round
    _run_config(load_config(a.config, over))


def cmd_reproduce(a, out: Path):
    cfg = dataclasses.asdict(paper_config(str(out)))
    cfg.update({k: v for k, v in _overrides(a).items()})
    if a.round is not None:
        cfg["round_digits"] = a.round
    _run_config(load_config(None, cfg))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structrealize", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "simulate the delay benchmark")
    _model_args(p)
    p.add_argument("--input", choices=("sparse", "u1", "u2", "u3"), default="sparse")
    p.add_argument("--t-f", type=float, default=1e4)
    p.add_argument("--dt", type=float, default=5e-3)
    _freq_args(p)

    p = add("estimate", cmd_estimate, "estimate transfer values from a t,u,y series")
    p.add_argument("--timeseries", required=True, type=Path)
    _freq_args(p)
    p.add_argument("--used-fraction", type=float, default=0.75, help="share of the series used in the fit")
    p.add_argument("--threshold", type=float, default=1e-10, help="relative SVD cutoff")

    p = add("realize", cmd_realize, "structured realization from transfer estimates")
    p.add_argument("--estimate", required=True, nargs="+", type=Path)
    p.add_argument("--family", choices=FAMILY_NAMES, default="delay")
    p.add_argument("--p", default="", help="comma-separated parameter values")

    p = add("fit", cmd_fit, "fit a scalar family parameter to test data")
    p.add_argument("--interp", required=True, nargs="+", type=Path)
    p.add_argument("--test", required=True, nargs="+", type=Path)
    p.add_argument("--family", choices=FAMILY_NAMES, default="delay")
    p.add_argument("--bounds", required=True, nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--start", type=float)
    p.add_argument("--grid", type=int, default=21, help="bracketing grid size")
    p.add_argument("--sweep-points", type=int, default=41)
    p.add_argument("--round", type=int, help="round the minimizer to this many decimals before the refit")

    p = add("validate", cmd_validate, "compare realizations with the benchmark in the time domain")
    _model_args(p)
    p.add_argument("--realization", required=True, nargs="+", type=Path)
    p.add_argument("--inputs", default="1,2,3")
    p.add_argument("--t-f", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)

    p = add("pipeline", cmd_pipeline, "run all stages from a key = value config file")
    p.add_argument("--config", type=Path)
    p.add_argument("--round", type=int)
    _config_flags(p)

    p = add("reproduce-paper", cmd_reproduce, "run the published delay case study")
    p.add_argument("--round", type=int)
    _config_flags(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    out: Path = a.out
    if a.no_plots and a.command in ("pipeline", "reproduce-paper"):
        a.cfg_plots = "false"
    try:
        out.mkdir(parents=True, exist_ok=True)
        a.func(a, out)
    except (StructRealizeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

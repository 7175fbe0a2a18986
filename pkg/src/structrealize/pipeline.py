"""End-to-end runs: simulate, estimate, realize, fit, validate, report.

A run is described by a flat :class:`PipelineConfig` that can be read from a
``key = value`` text file.  Every stage writes its results into the output
directory before the next stage starts, so a failed run still leaves the
completed stages on disk.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as sio
from .errors import DomainError, InstabilityError, PipelineStageError, StructRealizeError
from .lstfe import TransferEstimate, lstfe_pipeline, select_frequencies
from .paramfit import TestData, minimize_cost, refit_with_all_data, sample_cost
from .realize import structured_realization
from .sim import TimeSeries, grid_size, make_sparse_input, simulate_delay, validation_input
from .systems import get_family, make_delay_benchmark, transfer_response
from .validation import error_metrics

__all__ = ["PipelineConfig", "run_pipeline", "load_config", "paper_config", "RunConfig"]

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    """All settings of one pipeline run.

    Names with an ``interp_`` or ``test_`` prefix configure the two
    identification experiments.  ``model = external`` skips the simulations
    and reads ``interp_csv`` / ``test_csv`` (``t,u,y`` files) instead.
    """

    out: str = ""
    model: str = "benchmark"
    model_N: int = 12
    model_tau: float = 1.0
    model_zeta: float = 0.01
    model_nu: float = 5.0
    model_gain: float = 10.0
    interp_csv: str = ""
    test_csv: str = ""

    interp_t_f: float = 1e4
    interp_dt: float = 5e-3
    interp_f_min: float = 1e-4
    interp_f_max: float = 1.0
    interp_r: int = 10
    interp_used_fraction: float = 0.75
    interp_threshold: float = 1e-10

    test_enabled: bool = True
    test_t_f: float = 40.0
    test_dt: float = 1e-5
    test_f_min: float = 10.0**0.3
    test_f_max: float = 10.0
    test_r: int = 6
    test_used_fraction: float = 0.75
    test_threshold: float = 1e-10

    family: str = "delay"
    p_fixed: float = 1.0
    p_lo: float = 0.9
    p_hi: float = 1.1
    p_start: float = 0.98
    fit_grid: int = 21
    sweep_points: int = 41
    round_digits: int = -1

    validate: bool = True
    validation_inputs: str = "1,2,3"
    validation_t_f: float = 10.0
    validation_dt: float = 1e-3

    save_timeseries: bool = True
    plots: bool = True

    def check(self) -> "PipelineConfig":
        if self.model not in ("benchmark", "external"):
            raise DomainError(f"model must be 'benchmark' or 'external', got {self.model!r}")
        if self.model == "external" and not self.interp_csv:
            raise DomainError("model = external needs interp_csv")
        if self.model == "external" and self.test_enabled and not self.test_csv:
            raise DomainError("model = external with a test run needs test_csv")
        runs = [self.interp] + ([self.test] if self.test_enabled else [])
        for run in runs:
            if self.model == "benchmark":
                grid_size(run.t_f, run.dt)
            if not (run.f_min > 0 and run.f_max > 0):
                raise DomainError("frequency bounds must be positive")
            if run.r < 1:
                raise DomainError("the requested number of frequencies must be at least 1")
        if self.validate and self.model == "benchmark":
            grid_size(self.validation_t_f, self.validation_dt)
            self.inputs()
        get_family(self.family)
        return self

    def inputs(self) -> list:
        try:
            out = [int(v) for v in self.validation_inputs.split(",") if v.strip()]
        except ValueError:
            raise DomainError(f"validation_inputs must list integers, got {self.validation_inputs!r}") from None
        for v in out:
            if v not in (1, 2, 3):
                raise DomainError(f"validation input {v} is not one of 1, 2, 3")
        return out

    @property
    def interp(self) -> "RunConfig":
        return self._run("interp")

    @property
    def test(self) -> "RunConfig":
        return self._run("test")

    def _run(self, prefix) -> "RunConfig":
        g = lambda name: getattr(self, f"{prefix}_{name}")
        return RunConfig(g("t_f"), g("dt"), g("f_min"), g("f_max"), g("r"), g("used_fraction"), g("threshold"), g("csv"))

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_format_value(v)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunConfig:
    t_f: float
    dt: float
    f_min: float
    f_max: float
    r: int
    used_fraction: float
    threshold: float
    csv: str = ""


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise DomainError(f"not a boolean: {text!r}")


def _field_types():
    defaults = PipelineConfig()
    return {f.name: type(getattr(defaults, f.name)) for f in dataclasses.fields(PipelineConfig)}


def parse_value(key: str, text: str):
    """Convert the text of ``key`` to the type of its default value."""
    types = _field_types()
    if key not in types:
        raise DomainError(f"unknown configuration key {key!r}")
    kind = types[key]
    try:
        if kind is bool:
            return _parse_bool(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise DomainError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None
    return text.strip()


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Read a ``key = value`` file (``#`` starts a comment) and apply overrides."""
    values = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = parse_value(key, val)
    for key, val in (overrides or {}).items():
        values[key] = parse_value(key, val) if isinstance(val, str) else val
    unknown = set(values) - set(_field_types())
    if unknown:
        raise DomainError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    return PipelineConfig(**values)


def paper_config(out: str = "") -> PipelineConfig:
    """Settings of the published delay case study (the defaults)."""
    return PipelineConfig(out=out)


# -- stages -----------------------------------------------------------------


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, kind, exc, tb):
        if exc is not None and isinstance(exc, (StructRealizeError, ValueError, OSError, ArithmeticError)) and not isinstance(exc, PipelineStageError):
            raise PipelineStageError(f"stage {self.name!r} failed: {exc}", stage=self.name) from exc
        return False


def _estimate(ts: TimeSeries, run: RunConfig) -> TransferEstimate:
    sel = select_frequencies(run.f_min, run.f_max, run.r, ts.t_f, ts.dt)
    est = lstfe_pipeline(ts, sel, used_fraction=run.used_fraction, rel_threshold=run.threshold)
    meta = dict(est.metadata, requested=int(sel.requested.size), actual=int(sel.r))
    return TransferEstimate(est.lambdas, est.values, meta)


def _estimate_errors(model, est: TransferEstimate) -> list:
    true = transfer_response(model, est.lambdas)
    return [
        {"omega": float(w), "true_re": float(h.real), "true_im": float(h.imag),
         "est_re": float(e.real), "est_im": float(e.imag), "error": float(abs(h - e))}
        for w, h, e in zip(est.omegas, true, est.values)
    ]


def _simulate_validation(system, which, t_f, dt):
    """Output of ``system`` for validation input ``which``; ``None`` if it blows up."""
    try:
        return simulate_delay(system, lambda t: validation_input(which, t), t_f, dt), "ok"
    except InstabilityError as exc:
        return None, f"unstable: {exc}"


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every configured stage and write the results to ``config.out``.

    Returns the summary dictionary that is also written to ``summary.json``.

    Raises
    ------
    PipelineStageError
        Naming the failed stage; files of earlier stages are kept.
    """
    cfg = config.check()
    if not cfg.out:
        raise DomainError("an output directory is required")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8", newline="\n")
    family = get_family(cfg.family)
    summary: dict = {"family": cfg.family}
    model = None

    with _Stage("simulate"):
        if cfg.model == "benchmark":
            model = make_delay_benchmark(cfg.model_N, cfg.model_tau, cfg.model_zeta, cfg.model_nu, cfg.model_gain)
            series = {}
            for name in ("interp", "test") if cfg.test_enabled else ("interp",):
                run = cfg._run(name)
                sel = select_frequencies(run.f_min, run.f_max, run.r, run.t_f, run.dt)
                u = make_sparse_input(sel.N, sel.ks, run.t_f)
                series[name] = simulate_delay(model, u, run.t_f, run.dt)
                if cfg.save_timeseries:
                    sio.write_timeseries(out / f"{name}_timeseries.csv", series[name])
        else:
            series = {"interp": sio.read_timeseries(cfg.interp_csv)}
            if cfg.test_enabled:
                series["test"] = sio.read_timeseries(cfg.test_csv)

    with _Stage("estimate"):
        estimates = {}
        for name, ts in series.items():
            estimates[name] = _estimate(ts, cfg._run(name))
            sio.write_estimate(out / f"{name}_estimate.csv", estimates[name])
            entry = {"requested": estimates[name].metadata["requested"], "actual": len(estimates[name]),
                     "k": estimates[name].metadata["k"]}
            if model is not None:
                rows = _estimate_errors(model, estimates[name])
                entry["errors"] = rows
                entry["max_error"] = max(r["error"] for r in rows)
            summary[f"{name}_estimate"] = entry

    interp = estimates["interp"]
    with _Stage("realize"):
        p0 = [cfg.p_fixed] * family.n_params
        rz_interp = structured_realization(interp, family, p0)
        sio.write_realization(out / "realization_interp.json", rz_interp)
        summary["realization_interp"] = {"p": list(map(float, rz_interp.p)), "n": rz_interp.order,
                                         "ranks": rz_interp.provenance.get("ranks")}

    rz_refit = None
    sweep = None
    if cfg.test_enabled and family.n_params == 1:
        test = TestData.from_estimate(estimates["test"])
        with _Stage("fit"):
            grid = np.linspace(cfg.p_lo, cfg.p_hi, cfg.sweep_points)
            sweep = sample_cost([[g] for g in grid], interp, test, family)
            sio.write_cost_sweep(out / "cost_sweep.csv", sweep)
            fit = minimize_cost((cfg.p_lo, cfg.p_hi), cfg.p_start, interp, test, family, n_grid=cfg.fit_grid)
            sio.write_fit(out / "fit.json", fit)
            p_use = round(fit.p_star, cfg.round_digits) if cfg.round_digits >= 0 else fit.p_star
            summary["fit"] = {"p_star": fit.p_star, "cost": fit.cost, "evaluations": fit.evaluations,
                              "bracket": list(fit.bracket), "p_used": p_use}
        with _Stage("refit"):
            rz_refit = refit_with_all_data([p_use], interp, test, family)
            sio.write_realization(out / "realization_refit.json", rz_refit)
            summary["realization_refit"] = {"p": [p_use], "n": rz_refit.order,
                                            "ranks": rz_refit.provenance.get("ranks")}

    with _Stage("report"):
        _transfer_report(out, cfg, model, estimates, rz_interp, rz_refit, sweep, summary)

    if cfg.validate and model is not None:
        with _Stage("validate"):
            summary["validation"] = _validate(out, cfg, model, {"interp": rz_interp, "refit": rz_refit})

    sio.write_json(out / "summary.json", sio._jsonable(summary))
    return summary


def _transfer_report(out, cfg, model, estimates, rz_interp, rz_refit, sweep, summary):
    w_all = np.concatenate([e.omegas for e in estimates.values()])
    omegas = np.geomspace(w_all.min() / 2, w_all.max() * 2, 400)
    curves = {}
    if model is not None:
        curves["model"] = transfer_response(model, 1j * omegas)
    curves["realization (interpolation data)"] = transfer_response(rz_interp, 1j * omegas)
    if rz_refit is not None:
        curves["realization (all data)"] = transfer_response(rz_refit, 1j * omegas)
    cols = [omegas]
    header = ["omega"]
    for key, name in zip(curves, ("model", "interp", "refit") if model is not None else ("interp", "refit")):
        header += [f"{name}_re", f"{name}_im"]
        cols += [curves[key].real, curves[key].imag]
    sio.write_csv(out / "transfer_curve.csv", header, cols)
    if sweep is not None:
        summary["sweep_argmin"] = float(sweep[int(np.argmin([s.cost for s in sweep]))].p[0])
    if not cfg.plots:
        return
    from .plotting import plot_cost, plot_transfer

    points = {f"{k} estimates": (e.omegas, e.values) for k, e in estimates.items()}
    plot_transfer(out / "transfer.png", omegas, curves, points)
    if sweep is not None:
        plot_cost(out / "cost_sweep.png", [s.p[0] for s in sweep], [s.cost for s in sweep], summary["fit"]["p_star"])


def _validate(out, cfg, model, realizations) -> list:
    rows = []
    lines = ["realization,input,u_l2,linf_ratio,l2_ratio,status"]
    for which in cfg.inputs():
        full, _ = _simulate_validation(model, which, cfg.validation_t_f, cfg.validation_dt)
        if full is None:
            raise InstabilityError(f"the model itself is unstable for input u{which}")
        outputs = {"model": full.y}
        u_l2 = error_metrics(full.y, full.y, full.u, full.dt)[0]
        for name, rz in realizations.items():
            if rz is None:
                continue
            red, status = _simulate_validation(rz, which, cfg.validation_t_f, cfg.validation_dt)
            if red is None:
                linf = l2 = math.inf
            else:
                u_l2, linf, l2 = error_metrics(full.y, red.y, full.u, full.dt)
                outputs[name] = red.y
            rows.append({"realization": name, "input": which, "u_l2": u_l2, "linf_ratio": linf, "l2_ratio": l2, "status": status})
            lines.append(f"{name},u{which},{u_l2:.17g},{linf:.17g},{l2:.17g},{status.replace(',', ';')}")
        header = ["t", "u", *(f"y_{k}" for k in outputs)]
        sio.write_csv(out / f"timeseries_u{which}.csv", header, [full.t, full.u, *outputs.values()])
        if cfg.plots:
            from .plotting import plot_timeseries

            plot_timeseries(out / f"timeseries_u{which}.png", full.t, outputs, title=f"validation input u{which}")
    (out / "validation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return rows

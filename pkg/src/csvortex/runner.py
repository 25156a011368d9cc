"""Run orchestration, invariant checks and persistence of results."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfiguration
from .grid import ScalarGrid
from .metric import MetricError, RadialTable
from .observables import magnetic_field
from .radial import Deviation, RadialError, RadialProblem, compare_with_2d, fit_radial_decay, solve_radial
from .solver import SolveReport, solve

FLUX_RTOL = 0.01
ENERGY_RTOL = 0.02
MAX_PRINCIPLE_TOL = 1e-8
DECAY_RATE_TOL = 0.05
ORACLE_TOL = 5e-3
MU_ROBUSTNESS_TOL = 5e-3
MU_LADDER = (1.0, 4.0, 9.0)
TRIVIAL_TOL = 1e-8
ORACLE_RMAX = 40.0


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # "pass", "fail" or "skip"
    value: float | None = None
    target: str = ""
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        value = None if self.value is None else float(f"{self.value:.12g}")
        return {"name": self.name, "status": self.status, "value": value, "target": self.target, "note": self.note}


def _check(name: str, value: float, passed: bool, target: str, note: str = "") -> Check:
    return Check(name, "pass" if passed else "fail", value, target, note)


@dataclass
class OracleComparison:
    deviation: Deviation
    oracle_flux: float
    oracle_decay_rate: float
    r_max: float
    nodes: int

    def to_dict(self) -> dict:
        return {
            "sup": float(f"{self.deviation.sup:.12g}"),
            "l2": float(f"{self.deviation.l2:.12g}"),
            "oracle_flux": float(f"{self.oracle_flux:.12g}"),
            "oracle_decay_rate": float(f"{self.oracle_decay_rate:.12g}"),
            "r_max": self.r_max,
            "nodes": self.nodes,
        }


@dataclass
class RunReport:
    config: RunConfiguration
    solve: SolveReport
    oracle: OracleComparison | None
    oracle_note: str
    checks: list[Check]
    wall_time: float
    version: str = __version__
    extra_timing: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.solve.converged and all(c.ok for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self, include_timing: bool = True) -> dict:
        solve_dict = self.solve.to_dict(include_timing=False)
        observables = solve_dict.pop("observables")
        d = {
            "tool": "csvortex",
            "version": self.version,
            "config": self.config.to_dict(),
            "solve": solve_dict,
            "observables": observables,
            "oracle": self.oracle.to_dict() if self.oracle else None,
            "oracle_note": self.oracle_note,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
        }
        if include_timing:
            d["timing"] = {
                "total": self.wall_time,
                "solve": self.solve.wall_time,
                "runs": {k: r.wall_time for k, r in self.solve.runs.items()},
                **self.extra_timing,
            }
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# checks


def oracle_applicability(config: RunConfiguration) -> str:
    """Empty string when the problem has a radial reduction, else the reason."""
    vc = config.build_vortices()
    if len(vc.points) != 1:
        return "needs exactly one vortex point"
    p = vc.points[0]
    if (p.x, p.y) != (0.0, 0.0):
        return "vortex is not at the origin"
    metric = config.build_metric()
    if not metric.is_radial:
        return "metric is not radial about the origin"
    if isinstance(metric, RadialTable) and metric.radii[-1] < ORACLE_RMAX:
        return f"radial table does not reach r = {ORACLE_RMAX}"
    return ""


def run_oracle(config: RunConfiguration, report: SolveReport) -> OracleComparison:
    vc = config.build_vortices()
    problem = RadialProblem(
        n=vc.total_vorticity, mu=vc.mu, metric=config.build_metric(), r_max=ORACLE_RMAX
    )
    profile = solve_radial(problem)
    return OracleComparison(
        compare_with_2d(profile, report),
        profile.flux,
        fit_radial_decay(profile).rate,
        problem.r_max,
        problem.nodes,
    )


def basic_checks(config: RunConfiguration, report: SolveReport, oracle: OracleComparison | None, oracle_note: str) -> list[Check]:
    obs = report.observables
    n = config.build_vortices().total_vorticity
    checks = [
        Check(
            "converged",
            "pass" if report.converged else "fail",
            report.residual,
            f"residual <= {config.solver.residual_tol:g}",
        ),
        _check("max_principle", obs.w_max, obs.w_max <= MAX_PRINCIPLE_TOL, f"max w <= {MAX_PRINCIPLE_TOL:g}"),
    ]
    if n == 0:
        u_sup = float(np.abs(report.solution.u).max())
        values = [obs.flux, obs.energy, obs.spin_direct, obs.spin_by_parts]
        worst = max([u_sup] + [abs(v) for v in values])
        checks.append(_check("trivial_solution", worst, worst <= TRIVIAL_TOL, f"|u|, observables <= {TRIVIAL_TOL:g}"))
        return checks

    flux_err = abs(obs.flux - 2.0 * math.pi * n) / (2.0 * math.pi * n)
    checks.append(_check("flux_quantization", flux_err, flux_err <= FLUX_RTOL, f"rel. error vs 2 pi n <= {FLUX_RTOL:g}"))
    energy_err = abs(obs.energy - math.pi * n) / (math.pi * n)
    checks.append(_check("bps_saturation", energy_err, energy_err <= ENERGY_RTOL, f"rel. error vs pi n <= {ENERGY_RTOL:g}"))
    if report.agreement is None:
        checks.append(Check("newton_minimize_agreement", "skip", note="single method run"))
    else:
        tol = config.solver.agreement_tol
        checks.append(_check("newton_minimize_agreement", report.agreement, report.agreement <= tol, f"sup |du| <= {tol:g}"))
    checks.append(decay_check(config, report))
    if oracle is not None:
        checks.append(_check("oracle_comparison", oracle.deviation.sup, oracle.deviation.sup <= ORACLE_TOL, f"sup |dw| <= {ORACLE_TOL:g}"))
    else:
        status = "fail" if config.outputs.oracle else "skip"
        checks.append(Check("oracle_comparison", status, note=oracle_note))
    return checks


def decay_check(config: RunConfiguration, report: SolveReport) -> Check:
    obs = report.observables
    if obs.decay_error is not None:
        return Check("decay_fit", "fail", note=obs.decay_error)
    limit = config.build_metric().limit_at_infinity
    if limit is None:
        return Check("decay_fit", "skip", obs.decay_b, note="metric has no finite limit at infinity")
    expected = math.sqrt(limit)
    err = abs(obs.decay_b - expected) / expected
    return _check(
        "decay_fit",
        obs.decay_b,
        err <= DECAY_RATE_TOL,
        f"b_fit within {DECAY_RATE_TOL:g} of {expected:.6g}",
        f"a_fit = {obs.decay_a:.6g} on [{obs.decay_window[0]:g}, {obs.decay_window[1]:g}]",
    )


def mu_robustness_check(config: RunConfiguration, base: SolveReport) -> Check:
    vc = config.build_vortices()
    if vc.total_vorticity == 0:
        return Check("mu_robustness", "skip", note="no vortices")
    fields = {config.mu: base.w.values}
    for mu in MU_LADDER:
        if mu not in fields:
            rep = solve(
                vc.with_mu(mu),
                config.build_metric(),
                config.build_grid(),
                config.build_settings(),
                with_observables=False,
            )
            fields[mu] = rep.w.values
    ref = fields[config.mu]
    worst = max(float(np.abs(w - ref).max()) for w in fields.values())
    return _check("mu_robustness", worst, worst <= MU_ROBUSTNESS_TOL, f"sup |dw| over mu in {list(MU_LADDER)} <= {MU_ROBUSTNESS_TOL:g}")


# ---------------------------------------------------------------------------
# orchestration


def run(config: RunConfiguration, with_oracle: bool | None = None) -> RunReport:
    start = time.perf_counter()
    report = solve(
        config.build_vortices(),
        config.build_metric(),
        config.build_grid(),
        config.build_settings(),
        decay_window=config.outputs.decay_window,
    )
    want = config.outputs.oracle if with_oracle is None else with_oracle
    note = oracle_applicability(config)
    oracle = None
    extra = {}
    if want is not False and not note:
        t0 = time.perf_counter()
        try:
            oracle = run_oracle(config, report)
        except (RadialError, MetricError) as exc:
            note = f"oracle unavailable: {exc}"
        extra["oracle"] = time.perf_counter() - t0
    elif want is False:
        note = "disabled in configuration"
    checks = basic_checks(config, report, oracle, note)
    return RunReport(config, report, oracle, note, checks, time.perf_counter() - start, extra_timing=extra)


def verify(config: RunConfiguration) -> RunReport:
    """``run`` plus the checks that need extra solves."""
    rep = run(config, with_oracle=None if config.outputs.oracle is not None else True)
    t0 = time.perf_counter()
    rep.checks.append(mu_robustness_check(config, rep.solve))
    rep.extra_timing["mu_robustness"] = time.perf_counter() - t0
    return rep


def format_checks(checks: list[Check]) -> str:
    rows = [("check", "status", "value", "target / note")]
    for c in checks:
        value = "" if c.value is None else f"{c.value:.4g}"
        rows.append((c.name, c.status.upper(), value, "; ".join(s for s in (c.target, c.note) if s)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(
        f"{r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]:>{widths[2]}}  {r[3]}".rstrip() for r in rows
    )


# ---------------------------------------------------------------------------
# persistence


def output_paths(config: RunConfiguration, report_path: str | Path | None = None) -> dict[str, Path]:
    report = Path(report_path or config.outputs.report)
    stem = report.with_suffix("")
    paths = {"report": report}
    if config.outputs.dump_fields:
        for name in ("u", "w", "bfield"):
            paths[f"{name}_csv"] = Path(f"{stem}_{name}.csv")
    if config.outputs.heatmap:
        for name in ("w", "bfield"):
            paths[f"{name}_svg"] = Path(f"{stem}_{name}.svg")
    return paths


def check_writable(paths: dict[str, Path]) -> None:
    for p in paths.values():
        if not p.parent.is_dir():
            raise FileNotFoundError(f"output directory {p.parent} does not exist")


def emit(report: RunReport, paths: dict[str, Path]) -> None:
    """Write the JSON report and any requested field dumps and heatmaps.

    Parent directories must already exist; failures surface as ``OSError``.
    """
    check_writable(paths)
    paths["report"].write_text(report.to_json() + "\n", encoding="utf-8")
    sol = report.solve.solution
    fields = {"u": report.solve.u, "w": sol.w, "bfield": magnetic_field(sol.w)}
    for name, grid_values in fields.items():
        key = f"{name}_csv"
        if key in paths:
            grid_values.to_csv(paths[key])
    for name in ("w", "bfield"):
        key = f"{name}_svg"
        if key in paths:
            write_heatmap(fields[name], paths[key], name)


_LABELS = {"w": "w = log |phi|^2", "bfield": "magnetic field"}


def write_heatmap(f: ScalarGrid, path: str | Path, name: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    L = f.grid.half_width
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(f.values, origin="lower", extent=(-L, L, -L, L), cmap="viridis")
    fig.colorbar(im, ax=ax, label=_LABELS.get(name, name))
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)

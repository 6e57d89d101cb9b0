"""Command-line entry point: single solves, parameter sweeps and the self-test.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import SchemeKind, sic_layers, solve_scheme
from .scenario import ConfigError, SystemConfig, build_scenario, load_config
from .solver import INFEASIBLE, AOOptions, Solution

log = logging.getLogger(__name__)

CSV_HEADER = ["scheme", "seed", "param", "value", "T_u", "T_p", "T_d", "T_total",
              "iterations", "status", "wall_ms"]
SWEEP_PARAMS = ("K", "L_max_bit", "F_k_cyc_s", "power_pair_dBm")
# the coupled power abscissa v means P_k = v dBm and P_b = v + 15 dBm
POWER_PAIR_OFFSET_DB = 15.0
DEFAULT_SEEDS = 20

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


@dataclass
class ResultRow:
    scheme: str
    seed: int | str
    param: str
    value: float
    T_u: float
    T_p: float
    T_d: float
    T_total: float
    iterations: int | float
    status: str
    wall_ms: float

    def fields(self) -> list:
        return [_fmt(getattr(self, name)) for name in CSV_HEADER]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class SweepSpec:
    schemes: list
    param: str
    values: list
    seeds: list
    base: SystemConfig = field(default_factory=SystemConfig)

    def validate(self):
        if self.param not in SWEEP_PARAMS:
            raise UsageError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
        if not self.values:
            raise UsageError("--values is empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise UsageError("--values must be strictly increasing")
        if len(self.seeds) < 1:
            raise UsageError("at least one seed is required")
        if not self.schemes:
            raise UsageError("--schemes is empty")
        for v in self.values:
            config_for(self.base, self.param, v)


def config_for(base: SystemConfig, param: str, value) -> SystemConfig:
    """``base`` with the swept parameter set to ``value``."""
    try:
        if param == "power_pair_dBm":
            return base.replace(P_k_dBm=float(value), P_b_dBm=float(value) + POWER_PAIR_OFFSET_DB)
        if param == "K":
            if float(value) != int(value):
                raise UsageError(f"K must be an integer, got {value}")
            return base.replace(K=int(value))
        return base.replace(**{param: float(value)})
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def row_from_solution(sol: Solution, seed, param, value) -> ResultRow:
    r = sol.rates
    return ResultRow(sol.scheme, seed, param, value, r.T_u, r.T_p, r.T_d, r.T_u + r.T_p + r.T_d,
                     sol.iterations, sol.status, round(sol.wall_s * 1e3, 3))


def failed_row(scheme, seed, param, value, wall_s) -> ResultRow:
    nan = math.nan
    return ResultRow(scheme, seed, param, value, nan, nan, nan, nan, 0, INFEASIBLE,
                     round(wall_s * 1e3, 3))


def solution_dict(sol: Solution, scenario) -> dict:
    s = sol.state
    r = sol.rates
    cplx = lambda a: {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}  # noqa: E731
    return {
        "scheme": sol.scheme,
        "seed": scenario.seed,
        "status": sol.status,
        "iterations": sol.iterations,
        "trace": list(map(float, sol.trace)),
        "notes": sol.notes,
        "sic_layers": sic_layers(SchemeKind(sol.scheme), scenario.K),
        "times": {"T_u": r.T_u, "T_p": r.T_p, "T_d": r.T_d, "T_total": r.total},
        "rates": {"uplink": r.Ru.tolist(), "common_cap": r.Rd_c,
                  "common_alloc": r.Rd_c_alloc.tolist(), "private": r.Rd_p.tolist()},
        "beta": s.beta.tolist(),
        "offload_fraction": s.alpha.tolist(),
        "f": s.f.tolist(),
        "f_tilde": s.f_tilde.tolist(),
        "W": cplx(s.W),
        "p_c": cplx(s.p_c),
        "p": cplx(s.p),
        "config": scenario.cfg.to_dict(),
    }


def write_csv(path: Path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow(row.fields())


# ---------------------------------------------------------------------------
# solve


def run_solve(cfg: SystemConfig, scheme: str, seed: int, out_dir=None):
    kind = SchemeKind.parse(scheme)
    sc = build_scenario(cfg, seed)
    sol = solve_scheme(kind, sc, AOOptions())
    row = row_from_solution(sol, seed, "none", 0.0)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{kind.value}_seed{seed}"
        (out / f"{stem}.json").write_text(json.dumps(solution_dict(sol, sc), indent=1), encoding="utf-8")
        write_csv(out / f"{stem}.csv", [row])
    return row, sol


# ---------------------------------------------------------------------------
# sweep


def run_cell(task):
    """One (scheme, value, seed) cell; failures become an ``infeasible`` row."""
    base, scheme, param, value, seed = task
    t0 = time.perf_counter()
    try:
        sc = build_scenario(config_for(base, param, value), seed)
        sol = solve_scheme(scheme, sc, AOOptions())
        return row_from_solution(sol, seed, param, value)
    except Exception as exc:  # a failed cell must not stop the sweep
        log.warning("cell %s %s=%s seed %s failed: %s", scheme, param, value, seed, exc)
        return failed_row(scheme, seed, param, value, time.perf_counter() - t0)


def mean_rows(rows, schemes, param, values):
    """Per-(scheme, value) means over converged cells, plus the excluded count."""
    out = []
    for scheme in schemes:
        for v in values:
            cells = [r for r in rows if r.scheme == scheme and r.value == v]
            ok = [r for r in cells if r.status == "converged"]
            excluded = len(cells) - len(ok)
            if ok:
                m = {k: float(np.mean([getattr(r, k) for r in ok]))
                     for k in ("T_u", "T_p", "T_d", "iterations", "wall_ms")}
                T_total = m["T_u"] + m["T_p"] + m["T_d"]
            else:
                m = dict.fromkeys(("T_u", "T_p", "T_d", "iterations", "wall_ms"), math.nan)
                T_total = math.nan
            out.append(ResultRow(scheme, "mean", param, v, m["T_u"], m["T_p"], m["T_d"], T_total,
                                 m["iterations"], f"mean(excluded={excluded})", m["wall_ms"]))
    return out


def plot_script(csv_name: str, means, schemes, param) -> str:
    """Gnuplot script drawing mean total time against the swept value."""
    lines = [
        f"# mean T_total vs {param}; detail rows are in {csv_name}",
        "set terminal pngcairo size 800,560",
        f"set output '{Path(csv_name).stem}.png'",
        f"set xlabel '{param}'",
        "set ylabel 'mean total time (s)'",
        "set key top left",
        "set grid",
    ]
    for scheme in schemes:
        lines.append(f"${scheme} << EOD")
        lines += [f"{r.value!r} {r.T_total!r}" for r in means if r.scheme == scheme]
        lines.append("EOD")
    plots = [f"${s} using 1:2 with linespoints title '{s}'" for s in schemes]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def run_sweep(spec: SweepSpec, out_dir, workers: int | None = None):
    spec.validate()
    schemes = [SchemeKind.parse(s).value for s in spec.schemes]
    tasks = [(spec.base, s, spec.param, v, seed)
             for s in schemes for v in spec.values for seed in spec.seeds]
    workers = max(1, workers or os.cpu_count() or 1)
    if workers == 1:
        rows = [run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, tasks))
    means = mean_rows(rows, schemes, spec.param, spec.values)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"sweep_{spec.param}.csv"
    write_csv(csv_path, rows + means)
    (out / f"sweep_{spec.param}.gp").write_text(
        plot_script(csv_path.name, means, schemes, spec.param), encoding="utf-8")
    return rows, means, csv_path


# ---------------------------------------------------------------------------
# CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rsfog", description="Rate-splitting fog offloading solver and experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--config", help="key=value config file (defaults if omitted)")
    s.add_argument("--scheme", default="RS_FOG", help="RS_FOG, SDMA, NOMA or RS_CLOUD")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="directory for the solution dump and CSV row")

    w = sub.add_parser("sweep", help="sweep one parameter over schemes and seeds")
    w.add_argument("--config")
    w.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    w.add_argument("--values", required=True, type=_values, help="comma-separated, increasing")
    w.add_argument("--schemes", default="RS_FOG,SDMA,NOMA,RS_CLOUD")
    w.add_argument("--seeds", type=int, default=DEFAULT_SEEDS, help="number of seeds (0..N-1)")
    w.add_argument("--workers", type=int, default=None, help="worker processes (default: CPUs)")
    w.add_argument("--out", required=True)

    t = sub.add_parser("selftest", help="run the invariant checks")
    t.add_argument("--seeds", type=int, default=1)
    return p


def _config(path):
    return load_config(path) if path else SystemConfig()


def _prepare(args):
    """Validate everything user-supplied; returns a zero-argument job."""
    if args.command == "selftest":
        from .selftest import run_selftest
        return lambda: _report(run_selftest(seeds=tuple(range(args.seeds))))
    cfg = _config(args.config)
    if args.command == "solve":
        SchemeKind.parse(args.scheme)
        return lambda: _print_solve(run_solve(cfg, args.scheme, args.seed, args.out)[0])
    schemes = [SchemeKind.parse(s).value for s in args.schemes.split(",") if s.strip()]
    spec = SweepSpec(schemes, args.param, args.values, list(range(args.seeds)), cfg)
    spec.validate()
    return lambda: _print_sweep(*run_sweep(spec, args.out, args.workers))


def _print_solve(row):
    print(",".join(CSV_HEADER))
    print(",".join(row.fields()))
    return EXIT_OK


def _print_sweep(rows, means, path):
    for r in means:
        print(f"{r.scheme:9s} {r.param}={r.value:<12g} T_total={r.T_total:.6g} {r.status}")
    print(f"wrote {path}")
    return EXIT_OK


def _report(checks):
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAILURE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        job = _prepare(args)
    except (UsageError, ConfigError, ValueError, OSError) as exc:
        print(f"rsfog: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return job()
    except Exception as exc:
        print(f"rsfog: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

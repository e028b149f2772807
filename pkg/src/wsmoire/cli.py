"""``wsmoire`` command-line front end."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import d_integral, ep_curve
from .config import COMMANDS, RunConfig, load_config
from .dynamics import evolve, growth_rate, ladder_structure_details, moire_analysis
from .errors import ConfigError, WsMoireError
from .floquet import BulkParams, classify, evaluate_grid, find_ep_along_omega, monodromy
from .io import class_levels, probability_levels, write_csv, write_pgm, write_report
from .lattice import Linear, Logarithmic

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _axis(cfg: RunConfig, prefix: str) -> np.ndarray:
    lo = cfg.number(f"grid.{prefix}_min")
    hi = cfg.number(f"grid.{prefix}_max")
    count = cfg.integer(f"grid.{prefix}_count")
    if count < 1:
        raise ConfigError(f"grid.{prefix}_count must be >= 1")
    if lo < 0 or hi < lo:
        raise ConfigError(f"grid.{prefix} needs 0 <= min <= max")
    return np.linspace(lo, hi, count) if count > 1 else np.array([lo])


def cmd_phase_diagram(cfg: RunConfig, out: Path) -> dict:
    j_axis = _axis(cfg, "j")
    b_axis = _axis(cfg, "beta")
    tol = cfg.number("classify.tol", 1e-6)
    ratio_min = cfg.number("overlay.ratio_min", 0.02)
    ratio_max = cfg.number("overlay.ratio_max", 2.0)
    ratio_count = cfg.integer("overlay.ratio_count", 100)
    n_max = cfg.integer("overlay.n_max", 20)
    if not 0 < ratio_min <= ratio_max or ratio_count < 1 or n_max < 0:
        raise ConfigError("overlay needs 0 < ratio_min <= ratio_max, ratio_count >= 1, n_max >= 0")

    cells = evaluate_grid(j_axis, b_axis, tol, cfg.threads)
    rows, labels = [], []
    for j, b, m, cls in cells:
        if cls is None:
            rows.append((j, b, "error", None, None, None, None))
            labels.append("error")
        else:
            rows.append((j, b, cls.label, m.eps1.real, m.eps1.imag, m.trace.real, m.det_residual))
            labels.append(cls.label)
    header = ("j_over_omega", "beta_over_omega", "class", "eps_real", "eps_imag", "trace", "det_residual")
    write_csv(out / "phase_diagram.csv", header, rows)
    # image row 0 is the largest beta/omega so the map reads like a plot
    grid = np.array(labels, dtype=object).reshape(len(b_axis), len(j_axis))[::-1]
    write_pgm(out / "phase_diagram.pgm", class_levels(grid))

    # d is homogeneous of degree one, so omega_n = J d(1, beta/J) / (4 n pi + 2 pi)
    overlay = []
    ratios = np.linspace(ratio_min, ratio_max, ratio_count) if ratio_count > 1 else [ratio_min]
    for r in ratios:
        for point in ep_curve(1.0, float(r), n_max):
            jw = 1.0 / point.omega
            bw = float(r) * jw
            if j_axis[0] <= jw <= j_axis[-1] and b_axis[0] <= bw <= b_axis[-1]:
                overlay.append((point.n, float(r), jw, bw))
    write_csv(out / "ep_overlay.csv", ("n", "beta_over_j", "j_over_omega", "beta_over_omega"), overlay)
    return {"cells": len(rows), "errors": labels.count("error"), "overlay_points": len(overlay)}


def _match(analytic: list, bisected: list) -> list:
    """One-to-one nearest pairing; returns ``(n, omega_a, omega_b)`` rows with ``None`` gaps."""
    pairs = sorted(
        (abs(a.omega - b), i, k) for i, a in enumerate(analytic) for k, b in enumerate(bisected)
    )
    used_a, used_b, rows = set(), set(), []
    for _, i, k in pairs:
        if i in used_a or k in used_b:
            continue
        used_a.add(i)
        used_b.add(k)
        rows.append((analytic[i].n, analytic[i].omega, bisected[k]))
    rows += [(a.n, a.omega, None) for i, a in enumerate(analytic) if i not in used_a]
    rows += [(None, None, b) for k, b in enumerate(bisected) if k not in used_b]
    return sorted(rows, key=lambda r: -(r[1] if r[1] is not None else r[2]))


def cmd_ep_curve(cfg: RunConfig, out: Path) -> dict:
    J = cfg.number("lattice.J")
    beta = cfg.number("lattice.beta")
    lo = cfg.number("omega.min")
    hi = cfg.number("omega.max")
    tol = cfg.number("ep.tol", 1e-9)
    if not J > 0 or beta < 0:
        raise ConfigError("ep-curve needs lattice.J > 0 and lattice.beta >= 0")
    if not 0 < lo < hi:
        raise ConfigError("ep-curve needs 0 < omega.min < omega.max")
    d = d_integral(J, beta)
    n_max = max(0, math.ceil((d / lo - 2 * math.pi) / (4 * math.pi)))
    analytic = [p for p in ep_curve(J, beta, n_max) if lo <= p.omega <= hi]
    bisected = find_ep_along_omega(J, beta, lo, hi, tol)
    rows = []
    for n, wa, wb in _match(analytic, bisected):
        rel = abs(wb - wa) / wa if wa is not None and wb is not None else None
        rows.append((n, wa, wb, rel))
    write_csv(out / "ep_curve.csv", ("n", "omega_analytic", "omega_bisected", "rel_error"), rows)
    matched = [r[3] for r in rows if r[3] is not None]
    return {
        "d": d, "analytic_points": len(analytic), "bisected_points": len(bisected),
        "matched": len(matched), "max_rel_error": max(matched) if matched else None,
    }


def _spacetime(rec) -> np.ndarray:
    return probability_levels(rec.normalized_profile)


def _summary_rows(rec):
    for t, p in zip(rec.times, rec.total_probability):
        yield (t, p, math.log(p) if p > 0 else None)


def cmd_evolve(cfg: RunConfig, out: Path) -> dict:
    spec = cfg.lattice()
    psi0 = cfg.initial_state(spec.n_sites)
    rec = evolve(spec, psi0, cfg.evolution())
    norm = rec.normalized_profile

    def frames():
        for i, t in enumerate(rec.times):
            for k, l in enumerate(rec.sites):
                yield (t, int(l), rec.site_probability[i, k], norm[i, k])

    write_csv(out / "frames.csv", ("t", "l", "P_l", "P_l_over_P"), frames())
    write_csv(out / "summary.csv", ("t", "P", "ln_P"), _summary_rows(rec))
    write_pgm(out / "spacetime.pgm", _spacetime(rec))
    report = [
        ("method", rec.method),
        ("condition", rec.condition),
        ("n_frames", rec.times.shape[0]),
        ("n_sites", spec.n_sites),
        ("growth_rate", growth_rate(rec)),
        ("edge_fraction", rec.edge_fraction),
        ("edge_flag", rec.edge_flag),
    ]
    write_report(out / "report.txt", report)
    return dict(report)


def cmd_moire(cfg: RunConfig, out: Path) -> dict:
    spec = cfg.lattice()
    if not isinstance(spec.potential, Logarithmic):
        raise ConfigError("moire needs potential.kind = logarithmic")
    q = cfg.number("moire.threshold_quantile", 0.5)
    edge = cfg.number("moire.edge_exclusion", 0.0)
    if not 0 < q < 1:
        raise ConfigError("moire.threshold_quantile must lie in (0, 1)")
    if not 0 <= edge < 0.5:
        raise ConfigError("moire.edge_exclusion must lie in [0, 0.5)")
    rec = evolve(spec, cfg.initial_state(spec.n_sites), cfg.evolution())
    report = moire_analysis(spec, rec, q, cfg.number("classify.tol", 1e-6), edge, cfg.threads)

    write_pgm(out / "spacetime.pgm", _spacetime(rec))
    write_csv(out / "summary.csv", ("t", "P", "ln_P"), _summary_rows(rec))
    write_csv(
        out / "site_classes.csv", ("l", "local_omega", "class", "late_profile", "bright"),
        zip(rec.sites, report.local_omega, (c.label for c in report.per_site_class),
            report.late_time_profile, report.bright_mask),
    )
    items = [
        ("n_sites", spec.n_sites),
        ("method", rec.method),
        ("threshold_quantile", q),
        ("edge_exclusion", edge),
        ("n_alternations", report.n_alternations),
        ("class_alternations", report.class_alternations),
        ("overlap_score", report.overlap_score),
        ("broken_probability_share", report.broken_probability_share),
        ("edge_fraction", report.edge_fraction),
        ("growth_rate", growth_rate(rec)),
    ]
    write_report(out / "report.txt", items)
    return dict(items)


def cmd_spectrum(cfg: RunConfig, out: Path) -> dict:
    spec = cfg.lattice()
    if not isinstance(spec.potential, Linear):
        raise ConfigError("spectrum needs potential.kind = linear")
    n_levels = cfg.integer("spectrum.n_levels", 20)
    if spec.n_sites < 60 or not 1 <= n_levels <= spec.n_sites // 2:
        raise ConfigError("spectrum needs n_sites >= 60 and 1 <= n_levels <= n_sites/2")
    check = ladder_structure_details(spec, n_levels)
    write_csv(out / "eigenvalues.csv", ("re", "im"), ((e.real, e.imag) for e in check.eigenvalues))
    write_csv(
        out / "ladder.csv", ("re", "im", "folded_re", "folded_im", "deviation"),
        ((e.real, e.imag, f.real, f.imag, d)
         for e, f, d in zip(check.selected, check.folded, check.deviations)),
    )
    omega = spec.potential.omega
    cls = classify(monodromy(BulkParams(spec.J, spec.beta, omega)))
    items = [
        ("class", cls.label),
        ("eps1_real", check.eps1.real),
        ("eps1_imag", check.eps1.imag),
        ("eps2_real", check.eps2.real),
        ("eps2_imag", check.eps2.imag),
        ("n_levels", n_levels),
        ("max_deviation", check.max_deviation),
        ("max_deviation_over_omega", check.max_deviation / omega),
    ]
    write_report(out / "base_points.txt", items)
    return dict(items)


HANDLERS = {
    "phase-diagram": cmd_phase_diagram,
    "ep-curve": cmd_ep_curve,
    "evolve": cmd_evolve,
    "moire": cmd_moire,
    "spectrum": cmd_spectrum,
}


def _error_record(out: Path, command: str, exc: BaseException, code: int) -> None:
    items = [("status", "error"), ("command", command), ("error_type", type(exc).__name__),
             ("exit_code", code), ("message", str(exc).replace("\n", " "))]
    for attr in ("time_reached", "condition", "residual", "j_over_omega", "beta_over_omega"):
        if hasattr(exc, attr):
            items.append((attr, getattr(exc, attr)))
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_report(out / "error.txt", items)
    except OSError:
        pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsmoire",
        description="Wannier-Stark ladders, exceptional points and Moire dynamics "
                    "of a non-Hermitian SSH chain.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="key = value run configuration")
    parser.add_argument("--out-dir", default=None, help="output directory (default ./wsmoire_<command>)")
    parser.add_argument("--threads", type=int, default=None, help="worker processes; overrides run.threads")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out_dir or f"wsmoire_{args.command.replace('-', '_')}")
    try:
        cfg = load_config(args.config, args.command)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.values["run.threads"] = str(args.threads)
        cfg.threads  # validate before any work
        out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[args.command](cfg, out)
    except (WsMoireError, OSError) as exc:
        code = exc.exit_code if isinstance(exc, WsMoireError) else EXIT_IO
        print(f"wsmoire {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        _error_record(out, args.command, exc, code)
        return code
    for key, value in summary.items():
        print(f"{key}={value}")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

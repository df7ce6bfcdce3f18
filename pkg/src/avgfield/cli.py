"""The ``af`` command line: one experiment per invocation.

Every subcommand accepts ``--config <file>`` and/or flags (flags win).  CSV
goes to ``--out`` (or stdout); a JSON run manifest is written next to it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np
import scipy
import yaml

from . import __version__
from .config import ExperimentConfig, config_echo, config_from_mapping
from .diagnostics import lda_compare, support_radius
from .errors import AvgFieldError, ConfigurationError
from .functional import PotentialSpec
from .grid import BC, Grid2D, density, make_grid
from .minimize import SweepRow, estimate_e11, ground_state, row_from, sweep
from .snapshot import load_field, save_field
from .thomas_fermi import tf_minimizer, tf_scale_density
from .trial import factorization_check, per_ball, trial_grid, vortex_lattice_trial
from .verify import run_battery

log = logging.getLogger("avgfield")


class OutputError(AvgFieldError, OSError):
    pass


# --- geometry ------------------------------------------------------------


def trapped_half_width(V: PotentialSpec, beta: float, e11: float, factor: float) -> float:
    """``factor`` times the largest TF support radius at ``beta``."""
    tf = tf_scale_density(tf_minimizer(V, e11), beta)
    return factor * tf.support_radius


def experiment_grid(cfg: ExperimentConfig, beta: float | None = None) -> Grid2D:
    """Unit square (or ``extent``) for V = 0; a centred box around the TF support otherwise."""
    n = (cfg.grid, cfg.grid)
    if cfg.potential.kind == "zero":
        side = cfg.extent or 1.0
        return make_grid((side, side), n, cfg.bc)
    if cfg.extent is not None:
        side = cfg.extent
    else:
        beta = max(cfg.betas) if beta is None else beta
        side = 2.0 * trapped_half_width(cfg.potential, beta, cfg.e11, cfg.box_factor)
    return make_grid((side, side), n, cfg.bc, centered=True)


# --- output --------------------------------------------------------------


def _check_writable(path):
    if path is None:
        return
    d = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(d) or not os.access(d, os.W_OK):
        raise OutputError(f"cannot write output {path}: directory {d} is missing or not writable")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write output {path}: {exc.strerror}") from None


def manifest_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".manifest.json"


def write_manifest(cfg: ExperimentConfig, outputs, seeds, wall, argv, extra=None):
    if cfg.out is None:
        return None
    doc = {
        "config": config_echo(cfg),
        "argv": list(argv),
        "versions": {"avgfield": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "seeds": list(seeds),
        "started": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": round(wall, 3),
        "outputs": [p for p in outputs if p],
    }
    if extra:
        doc.update(extra)
    path = manifest_path(cfg.out)
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", path)
    return path


def _say(msg, cfg):
    # keep stdout clean when it carries the CSV
    print(msg, file=sys.stderr if cfg.out is None else sys.stdout)


# --- experiments ---------------------------------------------------------


def _run_minimize(cfg):
    beta = cfg.beta
    grid = experiment_grid(cfg, beta)
    u, rep = ground_state(grid, beta, cfg.potential, cfg.settings)
    row = row_from(beta, grid, u, rep)
    if cfg.save_field:
        save_field(u, cfg.save_field)
    _say(f"E={row.energy!r} E/beta={row.energy_per_beta!r} converged={rep.converged}", cfg)
    return csv_text(SweepRow.CSV_COLUMNS, [row.csv_values()]), [rep.seed], 0, {}


def _run_sweep(cfg):
    grid = experiment_grid(cfg)
    rows = sweep(cfg.betas, cfg.potential, cfg.bc, grid, cfg.settings, cfg.warm_start, cfg.workers)
    text = csv_text(SweepRow.CSV_COLUMNS, [r.csv_values() for r in rows])
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"beta={r.beta:g} failed: {r.error}", file=sys.stderr)
    extra = {}
    ok = [r for r in rows if not r.error]
    if len(ok) >= 3:
        est = estimate_e11(ok, grid.area)
        extra["e11_estimate"] = est.estimate
        _say(f"e11 estimate {est.estimate!r} (rms residual {est.rms_residual:.3g})", cfg)
    return text, [cfg.settings.seed], (1 if failed else 0), extra


def _run_tf(cfg):
    tf1 = tf_minimizer(cfg.potential, cfg.e11)
    rows = []
    for b in cfg.betas:
        p = tf_scale_density(tf1, b)
        rows.append([p.s, cfg.e11, float(b), p.lambda_tf, p.energy, p.support_radius])
    header = ("s", "e11", "beta", "lambda_tf", "energy", "support_radius")
    return csv_text(header, rows), [], 0, {}


def _run_trial(cfg):
    beta = cfg.beta
    grid = trial_grid(beta, cfg.grid)
    trial = vortex_lattice_trial(grid, beta)
    fac = factorization_check(trial)
    header = ("record", "index", "cx", "cy", "mass", "energy", "lhs", "rhs", "rel_error")
    rows = [["total", "", "", "", 1.0, fac.lhs, fac.lhs, fac.rhs, fac.rel_error]]
    for b in per_ball(trial):
        rows.append(["ball", b.index, b.cx, b.cy, b.mass, b.energy, "", "", ""])
    _say(f"lhs={fac.lhs!r} rhs={fac.rhs!r} rel_error={fac.rel_error:.3e}", cfg)
    return csv_text(header, rows), [], 0, {}


def _run_verify(cfg):
    checks = run_battery()
    for c in checks:
        _say(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (threshold {c.threshold:g})", cfg)
    rows = [[c.name, c.passed, c.value, c.threshold] for c in checks]
    status = 0 if all(c.passed for c in checks) else 1
    return csv_text(("check", "passed", "value", "threshold"), rows), [], status, {}


def _run_lda(cfg):
    beta = cfg.beta
    if cfg.potential.kind == "zero":
        raise ConfigurationError("lda needs a trapping potential", key="potential")
    if cfg.field:
        u = load_field(cfg.field)
        seeds = []
    else:
        grid = experiment_grid(cfg, beta)
        u, rep = ground_state(grid, beta, cfg.potential, cfg.settings)
        seeds = [rep.seed]
        if cfg.save_field:
            save_field(u, cfg.save_field)
    tf = tf_minimizer(cfg.potential, cfg.e11)
    rep = lda_compare(u, beta, cfg.potential, tf)
    rows = [[float(beta), b.cx, b.cy, b.radius, b.distance] for b in rep.balls]
    _say(f"max distance {rep.max_distance:.4e}; support ratio {rep.support_ratio:.4f}", cfg)
    extra = {"max_distance": rep.max_distance, "support_ratio": rep.support_ratio,
             "support_radius": support_radius(density(u))}
    return csv_text(("beta", "cx", "cy", "radius", "distance"), rows), seeds, 0, extra


RUNNERS = {"minimize": _run_minimize, "sweep": _run_sweep, "tf": _run_tf,
           "trial": _run_trial, "verify": _run_verify, "lda": _run_lda}


def run(cfg: ExperimentConfig, argv=()) -> int:
    """Execute one experiment; returns the process exit status."""
    _check_writable(cfg.out)
    _check_writable(cfg.save_field)
    t0 = time.perf_counter()
    text, seeds, status, extra = RUNNERS[cfg.experiment](cfg)
    _emit(text, cfg.out)
    write_manifest(cfg, [cfg.out, cfg.save_field], seeds, time.perf_counter() - t0, argv, extra)
    return status


# --- argument parsing ----------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON experiment document")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    phys = argparse.ArgumentParser(add_help=False)
    phys.add_argument("--beta", type=float)
    phys.add_argument("--bc", help="dirichlet, neumann or free")
    phys.add_argument("--potential", help="none, harmonic:a,b or power:s")
    phys.add_argument("--grid", type=int, help="nodes per side")
    phys.add_argument("--extent", type=float, help="box side length")
    phys.add_argument("--e11", type=float)

    desc = argparse.ArgumentParser(add_help=False)
    desc.add_argument("--tol-energy", type=float)
    desc.add_argument("--tol-residual", type=float)
    desc.add_argument("--max-iters", type=int)
    desc.add_argument("--restarts", type=int)
    desc.add_argument("--init", choices=("constant", "random-phase", "vortex-seeded"))
    desc.add_argument("--save-field", help="AFLD snapshot path for the minimiser")

    p = argparse.ArgumentParser(prog="af", description="Average-field functional experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="experiment", required=True)
    sub.add_parser("minimize", parents=[common, phys, desc], help="minimise at one beta")
    sw = sub.add_parser("sweep", parents=[common, phys, desc], help="minimise along a beta list")
    sw.add_argument("--betas", help="comma separated, ascending")
    sw.add_argument("--workers", type=int)
    sw.add_argument("--warm-start", action="store_true", default=None)
    tf = sub.add_parser("tf", parents=[common], help="Thomas-Fermi closed forms")
    tf.add_argument("--potential")
    tf.add_argument("--beta", type=float)
    tf.add_argument("--betas")
    tf.add_argument("--e11", type=float)
    tr = sub.add_parser("trial", parents=[common], help="vortex-lattice trial factorisation")
    tr.add_argument("--beta", type=float)
    tr.add_argument("--grid", type=int, help="cells across each ball")
    sub.add_parser("verify", parents=[common], help="invariant battery")
    ld = sub.add_parser("lda", parents=[common, phys, desc], help="trapped LDA comparison")
    ld.add_argument("--field", help="AFLD snapshot of a minimiser (else one is computed)")
    return p


_FLAG_KEYS = ("beta", "betas", "bc", "potential", "grid", "extent", "e11", "seed", "tol_energy",
              "tol_residual", "max_iters", "restarts", "init", "save_field", "out", "workers",
              "warm_start", "field")


def config_from_args(ns) -> ExperimentConfig:
    doc = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {ns.config}: {exc.strerror}",
                                     key="config") from None
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"malformed configuration: {exc}", key="<document>") from None
        if not isinstance(doc, dict):
            raise ConfigurationError("configuration must be a key-value mapping", key="<document>")
        kind = doc.get("experiment", doc.get("kind"))
        if kind is not None and kind != ns.experiment:
            raise ConfigurationError(f"config is for {kind!r}, not {ns.experiment!r}",
                                     key="experiment")
        doc.pop("kind", None)
    doc["experiment"] = ns.experiment
    for key in _FLAG_KEYS:
        val = getattr(ns, key, None)
        if val is not None:
            doc[key] = val
    if "beta" in doc and "betas" in doc and getattr(ns, "beta", None) is not None:
        doc.pop("betas")
    elif "beta" in doc and "betas" in doc and getattr(ns, "betas", None) is not None:
        doc.pop("beta")
    return config_from_mapping(doc)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        return run(cfg, argv)
    except ConfigurationError as exc:
        print(f"af: configuration error ({exc.key}): {exc}", file=sys.stderr)
        return 2
    except OutputError as exc:
        print(f"af: {exc}", file=sys.stderr)
        return 3
    except AvgFieldError as exc:
        print(f"af: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

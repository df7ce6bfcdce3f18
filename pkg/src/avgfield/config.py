"""Experiment configuration: parsing, validation and defaults.

Documents are YAML mappings (JSON is accepted, being a YAML subset).  Every
error is a :class:`ConfigurationError` whose ``key`` names the offending entry.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from dataclasses import field as dc_field

import yaml

from .errors import ConfigurationError
from .functional import PotentialSpec
from .grid import BC, MIN_NODES
from .minimize import STRATEGIES, MinimizeSettings
from .thomas_fermi import DEFAULT_E11

KINDS = ("minimize", "sweep", "tf", "trial", "verify", "lda")

# key -> default; None means "decided per experiment kind"
_DEFAULTS = {
    "experiment": None,
    "beta": None,
    "betas": None,
    "bc": None,
    "potential": "none",
    "grid": None,
    "extent": None,
    "seed": 0,
    "tol_energy": 1e-9,
    "tol_residual": 1e-3,
    "max_iters": 2000,
    "restarts": 3,
    "init": None,
    "warm_start": False,
    "workers": None,
    "out": None,
    "save_field": None,
    "field": None,
    "nu": 0.25,
    "mu_thr": 0.25,
    "e11": DEFAULT_E11,
    "box_factor": 1.5,
}

_ALIASES = {"kind": "experiment", "max_iterations": "max_iters", "save-field": "save_field",
            "tol-energy": "tol_energy", "tol-residual": "tol_residual", "max-iters": "max_iters"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    betas: tuple
    bc: BC
    potential: PotentialSpec
    grid: int
    extent: float | None
    settings: MinimizeSettings
    warm_start: bool = False
    workers: int | None = None
    out: str | None = None
    save_field: str | None = None
    field: str | None = None
    nu: float = 0.25
    mu_thr: float = 0.25
    e11: float = DEFAULT_E11
    box_factor: float = 1.5
    seed: int = 0
    echo: dict = dc_field(default_factory=dict, compare=False)

    @property
    def beta(self) -> float:
        return self.betas[0]


def _num(raw, key, kind=float):
    if isinstance(raw, bool):
        raise ConfigurationError(f"{key} must be a number, got {raw!r}", key=key)
    try:
        val = kind(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key} must be a number, got {raw!r}", key=key) from None
    if kind is int and float(raw) != val:
        raise ConfigurationError(f"{key} must be an integer, got {raw!r}", key=key)
    if kind is float and not math.isfinite(val):
        raise ConfigurationError(f"{key} must be finite, got {raw!r}", key=key)
    return val


def _positive(raw, key, kind=float):
    val = _num(raw, key, kind)
    if not val > 0:
        raise ConfigurationError(f"{key} must be positive, got {raw!r}", key=key)
    return val


def _path(raw, key):
    if raw is None:
        return None
    if not isinstance(raw, str) or not raw:
        raise ConfigurationError(f"{key} must be a path string", key=key)
    return raw


def _beta_list(doc, kind):
    betas = doc.get("betas")
    beta = doc.get("beta")
    if betas is not None and beta is not None:
        raise ConfigurationError("give either beta or betas, not both", key="betas")
    if betas is None:
        if beta is None:
            if kind == "sweep":
                raise ConfigurationError("a sweep needs a nonempty betas list", key="betas")
            beta = {"tf": 1.0, "trial": 4.0, "verify": 4.0}.get(kind, 10.0)
        key = "beta"
        betas = [beta]
    else:
        key = "betas"
        if isinstance(betas, str):
            betas = [b for b in betas.replace(",", " ").split() if b]
        if not isinstance(betas, (list, tuple)) or not betas:
            raise ConfigurationError("betas must be a nonempty list", key=key)
    vals = tuple(_num(b, key) for b in betas)
    if any(b <= 0 for b in vals) and kind in ("sweep", "tf", "trial", "lda"):
        raise ConfigurationError(f"{key} must be positive, got {list(vals)}", key=key)
    if any(b < 0 for b in vals):
        raise ConfigurationError(f"{key} must be non-negative, got {list(vals)}", key=key)
    if list(vals) != sorted(vals):
        raise ConfigurationError(f"{key} must be ascending, got {list(vals)}", key=key)
    return vals


def config_from_mapping(doc) -> ExperimentConfig:
    """Validate a plain mapping and fill in defaults."""
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a key-value mapping", key="<document>")
    doc = {_ALIASES.get(str(k), str(k)): v for k, v in doc.items()}
    for key in doc:
        if key not in _DEFAULTS:
            raise ConfigurationError(f"unknown configuration key {key!r}", key=key)
    doc = {k: v for k, v in doc.items() if v is not None}
    kind = doc.get("experiment")
    if kind not in KINDS:
        raise ConfigurationError(f"experiment must be one of {', '.join(KINDS)}, got {kind!r}",
                                 key="experiment")
    merged = {**_DEFAULTS, **doc}

    try:
        potential = PotentialSpec.parse(str(merged["potential"]))
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), key="potential") from None
    if kind == "tf" and potential.kind == "zero" and "potential" not in doc:
        potential = PotentialSpec("harmonic")

    bc_raw = merged["bc"]
    if bc_raw is None:
        bc = BC.DIRICHLET if kind in ("minimize", "sweep", "lda") else BC.FREE
    else:
        if str(bc_raw).strip().lower() not in ("dirichlet", "neumann", "free"):
            raise ConfigurationError(
                f"unsupported boundary condition {bc_raw!r} (dirichlet, neumann or free)", key="bc")
        bc = BC.parse(str(bc_raw))

    grid_default = {"trial": 64, "verify": 64}.get(kind, 128)
    grid = _num(merged["grid"] if merged["grid"] is not None else grid_default, "grid", int)
    if grid < MIN_NODES:
        raise ConfigurationError(f"grid must have at least {MIN_NODES} nodes per side", key="grid")
    extent = None if merged["extent"] is None else _positive(merged["extent"], "extent")

    nu = _num(merged["nu"], "nu")
    if not 0.0 < nu < 0.5:
        raise ConfigurationError(f"nu = {nu:g} violates 0 < ν < 1/2", key="nu")
    mu_thr = _num(merged["mu_thr"], "mu_thr")
    if not 0.0 < mu_thr < 1.0 - 2.0 * nu:
        raise ConfigurationError(f"mu_thr = {mu_thr:g} violates 0 < μ < 1 - 2ν = {1 - 2 * nu:g}",
                                 key="mu_thr")

    init = merged["init"]
    if init is not None and init not in STRATEGIES:
        raise ConfigurationError(f"init must be one of {', '.join(STRATEGIES)}", key="init")
    seed = _num(merged["seed"], "seed", int)
    try:
        settings = MinimizeSettings(
            max_iterations=_num(merged["max_iters"], "max_iters", int),
            tol_energy=_positive(merged["tol_energy"], "tol_energy"),
            tol_residual=_positive(merged["tol_residual"], "tol_residual"),
            restarts=_positive(merged["restarts"], "restarts", int),
            init=init,
            seed=seed,
        )
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), key=exc.key) from None

    workers = merged["workers"]
    if workers is not None:
        workers = _positive(workers, "workers", int)
    if not isinstance(merged["warm_start"], bool):
        raise ConfigurationError("warm_start must be true or false", key="warm_start")

    return ExperimentConfig(
        experiment=kind,
        betas=_beta_list(doc, kind),
        bc=bc,
        potential=potential,
        grid=grid,
        extent=extent,
        settings=settings,
        warm_start=merged["warm_start"],
        workers=workers,
        out=_path(merged["out"], "out"),
        save_field=_path(merged["save_field"], "save_field"),
        field=_path(merged["field"], "field"),
        nu=nu,
        mu_thr=mu_thr,
        e11=_positive(merged["e11"], "e11"),
        box_factor=_positive(merged["box_factor"], "box_factor"),
        seed=seed,
        echo=dict(doc),
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse a YAML/JSON document into a validated :class:`ExperimentConfig`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed configuration: {exc}", key="<document>") from None
    if doc is None:
        doc = {}
    return config_from_mapping(doc)


def config_echo(cfg: ExperimentConfig) -> dict:
    """Fully resolved configuration as plain JSON-ready values."""
    s = asdict(cfg.settings)
    return {
        "experiment": cfg.experiment,
        "betas": list(cfg.betas),
        "bc": cfg.bc.name.lower(),
        "potential": str(cfg.potential),
        "grid": cfg.grid,
        "extent": cfg.extent,
        "settings": s,
        "warm_start": cfg.warm_start,
        "workers": cfg.workers,
        "out": cfg.out,
        "save_field": cfg.save_field,
        "field": cfg.field,
        "nu": cfg.nu,
        "mu_thr": cfg.mu_thr,
        "e11": cfg.e11,
        "box_factor": cfg.box_factor,
        "seed": cfg.seed,
    }

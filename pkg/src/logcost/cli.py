"""Command line experiment runner.

Reads a sectioned key=value experiment file, drives the simulation
harness and the closed-form theory engine, and writes learning curves
(CSV), steady-state tables (JSON), rendered figures (PNG), and a run
manifest into an output directory.  Three subcommands:

    run     learning curves for every configured algorithm, with
            theory overlays where a closed-form row exists
    sweep   steady-state MSD over a mu/alpha/nu_i grid for one
            algorithm, simulated and predicted side by side
    theory  closed-form predictions only, no simulation

Everything emitted is a pure function of the config file plus the
resolved seed, so identical inputs give byte-identical CSV and JSON
regardless of worker count.  The wall_time field of the manifest is
the one deliberate exception.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file output only; must precede pyplot import
import matplotlib.pyplot as plt
import numpy as np

from . import __version__, filters, simkit, theory

# Fixed fallback so un-seeded runs are still reproducible.
DEFAULT_SEED = 20140331

OPT_ALPHA = "opt"

CURVES_CSV = "curves.csv"
SWEEP_CSV = "sweep.csv"
SUMMARY_JSON = "summary.json"
THEORY_JSON = "theory.json"
MANIFEST_JSON = "manifest.json"
CURVES_PNG = "curves.png"
SWEEP_PNG = "sweep.png"

CURVES_HEADER = ("iteration", "algorithm", "msd_db", "emse_db", "source")
SWEEP_HEADER = ("mu", "alpha", "nu_i", "steady_msd_db_sim", "steady_msd_db_theory")

_SOURCE_SIM = "sim"
_SOURCE_THEORY = "theory"

_PLAIN_SECTIONS = ("experiment", "regressor", "noise", "tracking", "sweep")
_ALGORITHM_SECTION = "algorithm"

_REQUIRED = object()


class ConfigError(Exception):
    """An experiment file (or an override flag) cannot produce a valid run."""


# ---------------------------------------------------------------------------
# config file parsing


@dataclasses.dataclass(frozen=True)
class AlgorithmSetting:
    """One [algorithm ...] section, with alpha already resolved to a number."""

    name: str
    kind: str
    mu: float
    alpha: float
    huber_gamma: float = 1.0


@dataclasses.dataclass(frozen=True)
class SweepGrid:
    """The [sweep] section: each axis is a tuple or None for "use the base value".

    alpha entries are floats or the literal string "opt", resolved per
    grid point because the optimum depends on the impulse rate.
    """

    mu: tuple | None
    alpha: tuple | None
    nu_i: tuple | None


@dataclasses.dataclass(frozen=True)
class ExperimentFile:
    """A fully parsed experiment file, before per-algorithm config assembly."""

    label: str
    filter_order: int
    iterations: int
    trials: int
    seed: int
    true_system: object
    initial_weights: object
    tail_window: int | None
    regressor: simkit.RegressorModel
    noise: simkit.NoiseModel
    tracking_q_var: float
    algorithms: tuple
    sweep: SweepGrid | None


class _Section:
    """Typed reads from one INI section with unknown-key detection."""

    def __init__(self, name, proxy):
        self.name = name
        self._proxy = proxy
        self._read = set()

    def _take(self, key):
        self._read.add(key)
        if key not in self._proxy:
            return None
        value = self._proxy[key].strip()
        if not value:
            raise ConfigError(f"[{self.name}] {key}: empty value")
        return value

    def string(self, key, default=_REQUIRED):
        value = self._take(key)
        if value is None:
            if default is _REQUIRED:
                raise ConfigError(f"[{self.name}] {key}: required key is missing")
            return default
        return value

    def floating(self, key, default=_REQUIRED):
        value = self.string(key, default)
        if value is default and not isinstance(default, str):
            return value
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"[{self.name}] {key}: not a number: {value!r}") from None

    def integer(self, key, default=_REQUIRED):
        value = self.string(key, default)
        if value is default and not isinstance(default, str):
            return value
        try:
            return int(value)
        except ValueError:
            pass
        try:
            as_float = float(value)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: not an integer: {value!r}") from None
        if as_float != int(as_float):
            raise ConfigError(f"[{self.name}] {key}: not an integer: {value!r}")
        return int(as_float)  # accepts 1e5 style counts

    def float_list(self, key, default=_REQUIRED):
        value = self.string(key, default)
        if value is default and not isinstance(default, str):
            return value
        return tuple(self._item_float(key, item) for item in self._split(key, value))

    def alpha_list(self, key, default=_REQUIRED):
        value = self.string(key, default)
        if value is default and not isinstance(default, str):
            return value
        out = []
        for item in self._split(key, value):
            out.append(OPT_ALPHA if item == OPT_ALPHA else self._item_float(key, item))
        return tuple(out)

    def _split(self, key, value):
        items = [item.strip() for item in value.split(",")]
        if any(not item for item in items):
            raise ConfigError(f"[{self.name}] {key}: empty list entry")
        return items

    def _item_float(self, key, item):
        try:
            return float(item)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: not a number: {item!r}") from None

    def finish(self):
        for key in self._proxy:
            if key not in self._read:
                raise ConfigError(f"[{self.name}] unknown key {key!r}")


def _section(parser, name):
    if name not in parser:
        return _Section(name, {})
    return _Section(name, parser[name])


def _parse_kind(section, raw):
    kind = raw.strip().upper().replace("-", "_")
    if kind not in filters.ALL_KINDS:
        known = ", ".join(k.lower() for k in filters.ALL_KINDS)
        raise ConfigError(f"[{section}] kind: unknown algorithm {raw!r} (one of: {known})")
    return kind


def _parse_vector(section, key, raw, keyword):
    if raw == keyword:
        return None
    items = [item.strip() for item in raw.split(",")]
    try:
        return tuple(float(item) for item in items)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: expected {keyword!r} or a comma-separated vector, got {raw!r}"
        ) from None


def _resolve_alpha(raw, noise, context):
    """Turn an alpha entry into a number; "opt" uses the impulsive optimum."""
    if raw != OPT_ALPHA:
        return float(raw)
    if noise.kind != simkit.IMPULSIVE or noise.nu_i <= 0.0:
        raise ConfigError(f"{context}: alpha 'opt' needs impulsive noise with nu_i > 0")
    try:
        return theory.alpha_opt(noise.nu_i, noise.sigma_no_sq)
    except ValueError as err:
        raise ConfigError(f"{context}: {err}") from err


def parse_experiment_text(text, source="<config>"):
    """Parse and validate an experiment file; ConfigError on any defect."""
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), inline_comment_prefixes=("#", ";")
    )
    try:
        parser.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(str(err)) from err

    algorithm_sections = []
    for name in parser.sections():
        if name in _PLAIN_SECTIONS:
            continue
        if name == _ALGORITHM_SECTION or name.startswith(_ALGORITHM_SECTION + " "):
            algorithm_sections.append(name)
            continue
        raise ConfigError(f"[{name}]: unknown section")
    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    if "regressor" not in parser:
        raise ConfigError("missing [regressor] section")
    if "noise" not in parser:
        raise ConfigError("missing [noise] section")
    if not algorithm_sections:
        raise ConfigError("no [algorithm ...] section")

    exp = _section(parser, "experiment")
    label = exp.string("name", Path(source).stem)
    filter_order = exp.integer("filter_order")
    iterations = exp.integer("iterations")
    trials = exp.integer("trials", 1)
    seed = exp.integer("seed", DEFAULT_SEED)
    true_system_raw = exp.string("true_system", simkit.RANDOM_UNIT)
    initial_raw = exp.string("initial_weights", "zeros")
    tail_window = exp.integer("tail_window", None)
    exp.finish()

    true_vec = _parse_vector("experiment", "true_system", true_system_raw, simkit.RANDOM_UNIT)
    true_system = simkit.RANDOM_UNIT if true_vec is None else true_vec
    initial_weights = _parse_vector("experiment", "initial_weights", initial_raw, "zeros")
    if tail_window is not None and tail_window < 1:
        raise ConfigError(f"[experiment] tail_window: must be >= 1, got {tail_window}")

    reg = _section(parser, "regressor")
    reg_kind = reg.string("kind").lower()
    if reg_kind not in simkit.REGRESSOR_KINDS:
        raise ConfigError(f"[regressor] kind: expected white or ar1, got {reg_kind!r}")
    sigma_x_sq = reg.floating("sigma_x_sq", 1.0)
    rho = reg.floating("rho", 0.0)
    reg.finish()
    if reg_kind == simkit.WHITE and rho != 0.0:
        raise ConfigError("[regressor] rho: only meaningful for kind ar1")
    try:
        regressor = simkit.RegressorModel(reg_kind, sigma_x_sq=sigma_x_sq, rho=rho)
    except ValueError as err:
        raise ConfigError(f"[regressor] {err}") from err

    noi = _section(parser, "noise")
    noise_kind = noi.string("kind").lower()
    if noise_kind not in simkit.NOISE_KINDS:
        raise ConfigError(f"[noise] kind: expected gaussian or impulsive, got {noise_kind!r}")
    sigma_no_sq = noi.floating("sigma_no_sq")
    sigma_ni_sq = noi.floating("sigma_ni_sq", 0.0)
    nu_i = noi.floating("nu_i", 0.0)
    noi.finish()
    if noise_kind == simkit.GAUSSIAN and (sigma_ni_sq != 0.0 or nu_i != 0.0):
        raise ConfigError("[noise] sigma_ni_sq/nu_i: only meaningful for kind impulsive")
    try:
        noise = simkit.NoiseModel(
            noise_kind, sigma_no_sq, sigma_ni_sq=sigma_ni_sq, nu_i=nu_i
        )
    except ValueError as err:
        raise ConfigError(f"[noise] {err}") from err

    trk = _section(parser, "tracking")
    tracking_q_var = trk.floating("q_var", 0.0)
    trk.finish()
    if not (math.isfinite(tracking_q_var) and tracking_q_var >= 0.0):
        raise ConfigError(f"[tracking] q_var: must be finite and >= 0, got {tracking_q_var}")

    algorithms = []
    names = set()
    for section_name in algorithm_sections:
        sec = _section(parser, section_name)
        kind = _parse_kind(section_name, sec.string("kind"))
        suffix = section_name[len(_ALGORITHM_SECTION):].strip()
        name = suffix if suffix else kind.lower()
        if name in names:
            raise ConfigError(f"[{section_name}]: duplicate algorithm name {name!r}")
        names.add(name)
        mu = sec.floating("mu")
        alpha_raw = sec.string("alpha", "1.0")
        huber_gamma = sec.floating("huber_gamma", 1.0)
        sec.finish()
        if alpha_raw != OPT_ALPHA:
            try:
                alpha_raw = float(alpha_raw)
            except ValueError:
                raise ConfigError(
                    f"[{section_name}] alpha: expected a number or 'opt', got {alpha_raw!r}"
                ) from None
        alpha = _resolve_alpha(alpha_raw, noise, f"[{section_name}] alpha")
        algorithms.append(AlgorithmSetting(name, kind, mu, alpha, huber_gamma))

    sweep = None
    if "sweep" in parser:
        swp = _section(parser, "sweep")
        grid = SweepGrid(
            mu=swp.float_list("mu", None),
            alpha=swp.alpha_list("alpha", None),
            nu_i=swp.float_list("nu_i", None),
        )
        swp.finish()
        if grid.mu is None and grid.alpha is None and grid.nu_i is None:
            raise ConfigError("[sweep]: at least one of mu, alpha, nu_i is required")
        for key, axis in (("mu", grid.mu), ("alpha", grid.alpha), ("nu_i", grid.nu_i)):
            if axis is not None and len(axis) == 0:
                raise ConfigError(f"[sweep] {key}: empty grid")
        sweep = grid

    return ExperimentFile(
        label=label,
        filter_order=filter_order,
        iterations=iterations,
        trials=trials,
        seed=seed,
        true_system=true_system,
        initial_weights=initial_weights,
        tail_window=tail_window,
        regressor=regressor,
        noise=noise,
        tracking_q_var=tracking_q_var,
        algorithms=tuple(algorithms),
        sweep=sweep,
    )


def _load_experiment(config_file, *, seed, trials, iterations, tail_window):
    """Read + parse the file and fold in the command line overrides."""
    path = Path(config_file)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file {config_file!r}: {err}") from err
    exp = parse_experiment_text(text, source=str(path))
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if trials is not None:
        updates["trials"] = trials
    if iterations is not None:
        updates["iterations"] = iterations
    if tail_window is not None:
        if tail_window < 1:
            raise ConfigError(f"--tail-window: must be >= 1, got {tail_window}")
        updates["tail_window"] = tail_window
    if updates:
        exp = dataclasses.replace(exp, **updates)
    return exp, text


def _sim_config(exp, alg, *, noise=None, mu=None, alpha=None):
    spec = filters.AlgorithmSpec(
        alg.kind,
        alpha=alg.alpha if alpha is None else alpha,
        huber_gamma=alg.huber_gamma,
    )
    try:
        return simkit.ExperimentConfig(
            algorithm=spec,
            mu=alg.mu if mu is None else mu,
            filter_order=exp.filter_order,
            regressor=exp.regressor,
            noise=exp.noise if noise is None else noise,
            true_system=exp.true_system,
            tracking_q_var=exp.tracking_q_var,
            n_iterations=exp.iterations,
            n_trials=exp.trials,
            seed=exp.seed,
            initial_weights=exp.initial_weights,
        )
    except ValueError as err:
        raise ConfigError(f"[algorithm {alg.name}] {err}") from err


def _environment(exp, noise=None):
    noise = exp.noise if noise is None else noise
    q_trace = exp.filter_order * exp.tracking_q_var
    if exp.regressor.kind == simkit.WHITE:
        return theory.EnvironmentStats.white(
            exp.filter_order, exp.regressor.sigma_x_sq, noise.variance, q_trace
        )
    return theory.EnvironmentStats.ar1(
        exp.filter_order,
        exp.regressor.rho,
        exp.regressor.sigma_x_sq,
        noise.variance,
        q_trace,
    )


def _tail_window(exp):
    if exp.tail_window is not None:
        return min(exp.tail_window, exp.iterations)
    return max(1, exp.iterations // 10)


# ---------------------------------------------------------------------------
# deterministic emitters


def _fmt(x):
    """Fixed 9 significant digits, C locale, '.' decimal point."""
    return format(float(x), ".9g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _json_ready(value):
    if isinstance(value, dict):
        return {key: _json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_json_ready(item) for item in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _write_json(path, payload):
    text = json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text)


def _db(linear):
    if linear is None or not math.isfinite(linear) or linear <= 0.0:
        return None
    return 10.0 * math.log10(linear)


def _config_echo(exp, tail):
    true_system = (
        exp.true_system if isinstance(exp.true_system, str) else list(exp.true_system)
    )
    initial = None if exp.initial_weights is None else list(exp.initial_weights)
    echo = {
        "experiment": {
            "name": exp.label,
            "filter_order": exp.filter_order,
            "iterations": exp.iterations,
            "trials": exp.trials,
            "seed": exp.seed,
            "true_system": true_system,
            "initial_weights": initial,
            "tail_window": tail,
        },
        "regressor": {
            "kind": exp.regressor.kind,
            "sigma_x_sq": exp.regressor.sigma_x_sq,
            "rho": exp.regressor.rho,
        },
        "noise": {
            "kind": exp.noise.kind,
            "sigma_no_sq": exp.noise.sigma_no_sq,
            "sigma_ni_sq": exp.noise.sigma_ni_sq,
            "nu_i": exp.noise.nu_i,
        },
        "tracking": {"q_var": exp.tracking_q_var},
        "algorithms": {
            alg.name: {
                "kind": alg.kind,
                "mu": alg.mu,
                "alpha": alg.alpha,
                "huber_gamma": alg.huber_gamma,
            }
            for alg in exp.algorithms
        },
    }
    if exp.sweep is not None:
        echo["sweep"] = {
            "mu": None if exp.sweep.mu is None else list(exp.sweep.mu),
            "alpha": None if exp.sweep.alpha is None else list(exp.sweep.alpha),
            "nu_i": None if exp.sweep.nu_i is None else list(exp.sweep.nu_i),
        }
    else:
        echo["sweep"] = None
    return echo


def _finish_manifest(out_dir, *, command, exp, tail, outputs, config_text, started, diverged):
    manifest = {
        "command": command,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "config": _config_echo(exp, tail),
        "outputs": [*outputs, MANIFEST_JSON],
        "diverged_trials": diverged,
        "library_version": __version__,
        "seed": exp.seed,
        "wall_time": time.perf_counter() - started,
    }
    _write_json(Path(out_dir) / MANIFEST_JSON, manifest)
    return manifest


# ---------------------------------------------------------------------------
# theory bridges


def _initial_deviation_covariance(exp):
    p = exp.filter_order
    w0 = np.zeros(p) if exp.initial_weights is None else np.asarray(exp.initial_weights)
    if isinstance(exp.true_system, str):
        # unit random direction: E[w_o w_o^T] = I/p and the cross terms vanish
        return np.eye(p) / p + np.outer(w0, w0)
    d = np.asarray(exp.true_system) - w0
    return np.outer(d, d)


def _theory_overlay(exp, alg, env):
    """Transient prediction matching the sim, or None when no form applies."""
    if exp.noise.kind != simkit.GAUSSIAN or exp.tracking_q_var > 0.0:
        return None
    if alg.kind not in theory.TABLE_KINDS:
        return None
    spec = filters.AlgorithmSpec(alg.kind, alpha=alg.alpha, huber_gamma=alg.huber_gamma)
    return theory.transient_statespace(
        spec, alg.mu, env, _initial_deviation_covariance(exp), exp.iterations
    )


def _steady_prediction(exp, alg, env):
    """Steady-state block for summary.json, or None when no form applies."""
    noise = exp.noise
    if noise.kind == simkit.IMPULSIVE:
        if alg.kind != filters.LLAD:
            return None
        try:
            zeta = theory.impulsive_emse_llad(
                alg.mu, alg.alpha, env, noise.nu_i, noise.sigma_no_sq, noise.sigma_ni_sq
            )
        except theory.TheoryValidityError as err:
            return {"model": "impulsive", "note": str(err)}
        eta = exp.filter_order * zeta / env.trace_r
        return {
            "model": "impulsive",
            "steady_emse": zeta,
            "steady_msd": eta,
            "steady_emse_db": _db(zeta),
            "steady_msd_db": _db(eta),
        }
    if exp.tracking_q_var > 0.0:
        if alg.kind not in (filters.LMLS, filters.LLAD):
            return None
        try:
            zeta = theory.tracking_emse(alg.kind, alg.mu, alg.alpha, env)
        except theory.TheoryValidityError as err:
            return {"model": "tracking", "note": str(err)}
        return {"model": "tracking", "steady_emse": zeta, "steady_emse_db": _db(zeta)}
    if alg.kind not in theory.TABLE_KINDS:
        return None
    spec = filters.AlgorithmSpec(alg.kind, alpha=alg.alpha, huber_gamma=alg.huber_gamma)
    try:
        zeta, eta = theory.steady_state_fixed_point(spec, alg.mu, env)
    except theory.TheoryValidityError as err:
        return {"model": "fixed-point", "note": str(err)}
    return {
        "model": "fixed-point",
        "steady_emse": zeta,
        "steady_msd": eta,
        "steady_emse_db": _db(zeta),
        "steady_msd_db": _db(eta),
    }


def _steady_emse_db_sim(curves, tail):
    if curves.diverged or curves.trials_used == 0:
        return None
    linear = np.power(10.0, curves.emse_db[-tail:] / 10.0)
    return _db(float(linear.mean()))


def _sweep_theory_msd_db(exp, alg, env, noise, mu, alpha):
    """Predicted steady MSD in dB for one grid point; NaN when no form applies."""
    try:
        if noise.kind == simkit.IMPULSIVE:
            if alg.kind != filters.LLAD:
                return float("nan")
            zeta = theory.impulsive_emse_llad(
                mu, alpha, env, noise.nu_i, noise.sigma_no_sq, noise.sigma_ni_sq
            )
            eta = exp.filter_order * zeta / env.trace_r
        elif exp.tracking_q_var > 0.0:
            return float("nan")
        elif alg.kind == filters.LMLS:
            _, eta = theory.steady_state_lmls(mu, alpha, env)
        elif alg.kind == filters.LLAD:
            _, eta = theory.steady_state_llad(mu, alpha, env)
        elif alg.kind in theory.TABLE_KINDS:
            spec = filters.AlgorithmSpec(alg.kind, alpha=alpha, huber_gamma=alg.huber_gamma)
            _, eta = theory.steady_state_fixed_point(spec, mu, env)
        else:
            return float("nan")
    except theory.TheoryValidityError:
        return float("nan")
    if eta <= 0.0:
        return float("nan")
    return 10.0 * math.log10(eta)


# ---------------------------------------------------------------------------
# figures


def _curve_color(index):
    cycle = plt.rcParams["axes.prop_cycle"].by_key().get("color", ["C0"])
    return cycle[index % len(cycle)]


def _save_figure(fig, path):
    fig.savefig(path, dpi=120, metadata={"Software": f"logcost {__version__}"})
    plt.close(fig)


def _render_curves_figure(path, entries):
    fig, (ax_msd, ax_emse) = plt.subplots(2, 1, figsize=(7.5, 7.0), sharex=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        for index, (alg, curves, overlay) in enumerate(entries):
            color = _curve_color(index)
            ax_msd.plot(curves.msd_db, color=color, lw=1.2, label=f"{alg.name} (sim)")
            ax_emse.plot(curves.emse_db, color=color, lw=1.2, label=f"{alg.name} (sim)")
            if overlay is not None:
                msd_db = 10.0 * np.log10(overlay.msd)
                emse_db = 10.0 * np.log10(overlay.emse)
                ax_msd.plot(msd_db, color=color, lw=1.0, ls="--", label=f"{alg.name} (theory)")
                ax_emse.plot(emse_db, color=color, lw=1.0, ls="--", label=f"{alg.name} (theory)")
    ax_msd.set_ylabel("MSD (dB)")
    ax_emse.set_ylabel("EMSE (dB)")
    ax_emse.set_xlabel("iteration")
    for ax in (ax_msd, ax_emse):
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    _save_figure(fig, path)


def _render_sweep_figure(path, rows):
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    groups = {}
    for row in rows:
        groups.setdefault((row["alpha"], row["nu_i"]), []).append(row)
    for index, (key, group) in enumerate(sorted(groups.items())):
        alpha, nu = key
        color = _curve_color(index)
        mus = [row["mu"] for row in group]
        sim = [row["sim_db"] for row in group]
        th = [row["theory_db"] for row in group]
        label = f"alpha={_fmt(alpha)}, nu_i={_fmt(nu)}"
        ax.semilogx(mus, sim, "o-", color=color, lw=1.2, label=f"{label} (sim)")
        if any(math.isfinite(v) for v in th):
            ax.semilogx(mus, th, "s--", color=color, lw=1.0, label=f"{label} (theory)")
    ax.set_xlabel("step size")
    ax.set_ylabel("steady-state MSD (dB)")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_figure(fig, path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(config_file, output_dir, *, seed=None, trials=None, iterations=None,
            workers=1, tail_window=None):
    """Simulate every configured algorithm and overlay closed-form curves.

    Emits curves.csv, summary.json, curves.png, and manifest.json into
    output_dir; returns the manifest dictionary.
    """
    started = time.perf_counter()
    exp, text = _load_experiment(
        config_file, seed=seed, trials=trials, iterations=iterations, tail_window=tail_window
    )
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tail = _tail_window(exp)
    env = _environment(exp)

    entries = []
    for alg in exp.algorithms:
        cfg = _sim_config(exp, alg)
        curves = simkit.run_ensemble(cfg, workers=workers, tail_window=tail)
        entries.append((alg, curves, _theory_overlay(exp, alg, env)))

    rows = []
    for alg, curves, overlay in entries:
        for t in range(len(curves.msd_db)):
            rows.append(
                (t, alg.name, _fmt(curves.msd_db[t]), _fmt(curves.emse_db[t]), _SOURCE_SIM)
            )
        if overlay is not None:
            with np.errstate(divide="ignore"):
                msd_db = 10.0 * np.log10(overlay.msd)
                emse_db = 10.0 * np.log10(overlay.emse)
            for t in range(len(msd_db)):
                rows.append((t, alg.name, _fmt(msd_db[t]), _fmt(emse_db[t]), _SOURCE_THEORY))
    _write_csv(out / CURVES_CSV, CURVES_HEADER, rows)

    diverged_total = 0
    algorithms = {}
    for alg, curves, overlay in entries:
        n_diverged = exp.trials - curves.trials_used
        diverged_total += n_diverged
        steady_sim = curves.steady_msd_db
        algorithms[alg.name] = {
            "kind": alg.kind,
            "mu": alg.mu,
            "alpha": alg.alpha,
            "trials": exp.trials,
            "trials_used": curves.trials_used,
            "diverged_trials": n_diverged,
            "steady_msd_db_sim": None if math.isnan(steady_sim) else steady_sim,
            "steady_emse_db_sim": _steady_emse_db_sim(curves, tail),
            "theory": _steady_prediction(exp, alg, env),
        }
    summary = {"config": _config_echo(exp, tail), "algorithms": algorithms}
    _write_json(out / SUMMARY_JSON, summary)

    _render_curves_figure(out / CURVES_PNG, entries)

    return _finish_manifest(
        out,
        command="run",
        exp=exp,
        tail=tail,
        outputs=[CURVES_CSV, SUMMARY_JSON, CURVES_PNG],
        config_text=text,
        started=started,
        diverged=diverged_total,
    )


def cmd_sweep(config_file, output_dir, *, seed=None, trials=None, iterations=None,
              workers=1, tail_window=None):
    """Steady-state MSD over the [sweep] grid, simulated and predicted.

    Emits sweep.csv, sweep.png, and manifest.json; returns the manifest.
    The grid is the product of the mu, alpha, and nu_i axes; axes not
    present fall back to the base config values.
    """
    started = time.perf_counter()
    exp, text = _load_experiment(
        config_file, seed=seed, trials=trials, iterations=iterations, tail_window=tail_window
    )
    if exp.sweep is None:
        raise ConfigError("the sweep command needs a [sweep] section")
    if len(exp.algorithms) != 1:
        raise ConfigError("the sweep command needs exactly one [algorithm ...] section")
    alg = exp.algorithms[0]
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tail = _tail_window(exp)

    mus = exp.sweep.mu if exp.sweep.mu is not None else (alg.mu,)
    alphas = exp.sweep.alpha if exp.sweep.alpha is not None else (alg.alpha,)
    nus = exp.sweep.nu_i if exp.sweep.nu_i is not None else (exp.noise.nu_i,)

    diverged_total = 0
    plot_rows = []
    csv_rows = []
    for alpha_entry in alphas:
        for nu in nus:
            try:
                noise = dataclasses.replace(exp.noise, nu_i=nu)
            except ValueError as err:
                raise ConfigError(f"[sweep] nu_i: {err}") from err
            alpha = _resolve_alpha(alpha_entry, noise, "[sweep] alpha")
            env = _environment(exp, noise)
            for mu in mus:
                cfg = _sim_config(exp, alg, noise=noise, mu=mu, alpha=alpha)
                curves = simkit.run_ensemble(cfg, workers=workers, tail_window=tail)
                diverged_total += exp.trials - curves.trials_used
                theory_db = _sweep_theory_msd_db(exp, alg, env, noise, mu, alpha)
                csv_rows.append(
                    (_fmt(mu), _fmt(alpha), _fmt(nu),
                     _fmt(curves.steady_msd_db), _fmt(theory_db))
                )
                plot_rows.append(
                    {"mu": mu, "alpha": alpha, "nu_i": nu,
                     "sim_db": curves.steady_msd_db, "theory_db": theory_db}
                )
    _write_csv(out / SWEEP_CSV, SWEEP_HEADER, csv_rows)
    _render_sweep_figure(out / SWEEP_PNG, plot_rows)

    return _finish_manifest(
        out,
        command="sweep",
        exp=exp,
        tail=tail,
        outputs=[SWEEP_CSV, SWEEP_PNG],
        config_text=text,
        started=started,
        diverged=diverged_total,
    )


def cmd_theory(config_file, output_dir, *, seed=None, trials=None, iterations=None,
               workers=1, tail_window=None):
    """Closed-form predictions for every configured algorithm, no simulation.

    Emits theory.json and manifest.json; returns the manifest.  Every
    algorithm must have a closed-form moment row (LMS, LMF, SA, LMLS,
    LLAD); anything else is a config error.
    """
    started = time.perf_counter()
    exp, text = _load_experiment(
        config_file, seed=seed, trials=trials, iterations=iterations, tail_window=tail_window
    )
    for alg in exp.algorithms:
        if alg.kind not in theory.TABLE_KINDS:
            table = ", ".join(k.lower() for k in theory.TABLE_KINDS)
            raise ConfigError(
                f"[algorithm {alg.name}] kind: no closed-form theory for {alg.kind.lower()}; "
                f"rows exist for {table}"
            )
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tail = _tail_window(exp)
    env = _environment(exp)
    noise = exp.noise

    algorithms = {}
    for alg in exp.algorithms:
        block = {"kind": alg.kind, "mu": alg.mu, "alpha": alg.alpha}
        if noise.kind == simkit.GAUSSIAN:
            pair = theory.h_pair(alg.kind, noise.variance, alg.alpha)
            block["h_at_noise_floor"] = {
                "sigma_e_sq": noise.variance,
                "h_g": pair.h_g,
                "h_u": pair.h_u,
                "lam": pair.lam,
                "kappa": pair.kappa,
            }
            spec = filters.AlgorithmSpec(alg.kind, alpha=alg.alpha, huber_gamma=alg.huber_gamma)
            try:
                zeta, eta = theory.steady_state_fixed_point(spec, alg.mu, env)
                block["steady_state"] = {
                    "emse": zeta,
                    "msd": eta,
                    "emse_db": _db(zeta),
                    "msd_db": _db(eta),
                }
            except theory.TheoryValidityError as err:
                block["steady_state"] = {"note": str(err)}
            closed = None
            if alg.kind == filters.LMLS:
                closed = theory.steady_state_lmls
            elif alg.kind == filters.LLAD:
                closed = theory.steady_state_llad
            if closed is not None:
                try:
                    zeta, eta = closed(alg.mu, alg.alpha, env)
                    block["closed_form_steady"] = {
                        "emse": zeta,
                        "msd": eta,
                        "emse_db": _db(zeta),
                        "msd_db": _db(eta),
                    }
                except theory.TheoryValidityError as err:
                    block["closed_form_steady"] = {"note": str(err)}
            if alg.kind == filters.LMLS:
                # closed stability ratio; >= 1 means the usable step range
                # is at least as wide as plain LMS in the same environment
                block["stability_beta_at_noise_floor"] = (
                    pair.h_g * noise.variance / pair.h_u
                )
            if exp.tracking_q_var > 0.0 and alg.kind in (filters.LMLS, filters.LLAD):
                try:
                    zeta = theory.tracking_emse(alg.kind, alg.mu, alg.alpha, env)
                    block["tracking"] = {
                        "emse": zeta,
                        "emse_db": _db(zeta),
                        "optimal_mu": theory.tracking_optimal_mu(alg.kind, alg.alpha, env),
                    }
                except theory.TheoryValidityError as err:
                    block["tracking"] = {"note": str(err)}
        else:
            if alg.kind == filters.LLAD:
                impulsive = {}
                try:
                    zeta = theory.impulsive_emse_llad(
                        alg.mu, alg.alpha, env,
                        noise.nu_i, noise.sigma_no_sq, noise.sigma_ni_sq,
                    )
                    eta = exp.filter_order * zeta / env.trace_r
                    impulsive.update(
                        {"emse": zeta, "msd": eta,
                         "emse_db": _db(zeta), "msd_db": _db(eta)}
                    )
                except theory.TheoryValidityError as err:
                    impulsive["note"] = str(err)
                if noise.nu_i > 0.0 and noise.sigma_no_sq > 0.0:
                    impulsive["alpha_opt"] = theory.alpha_opt(
                        noise.nu_i, noise.sigma_no_sq
                    )
                block["impulsive_steady"] = impulsive
            else:
                block["note"] = "no impulsive closed form for this kind"
        algorithms[alg.name] = block

    payload = {
        "config": _config_echo(exp, tail),
        "environment": {
            "filter_order": exp.filter_order,
            "trace_r": env.trace_r,
            "noise_variance": noise.variance,
            "tracking_q_trace": exp.filter_order * exp.tracking_q_var,
        },
        "algorithms": algorithms,
    }
    _write_json(out / THEORY_JSON, payload)

    return _finish_manifest(
        out,
        command="theory",
        exp=exp,
        tail=tail,
        outputs=[THEORY_JSON],
        config_text=text,
        started=started,
        diverged=0,
    )


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="logcost",
        description="Run logarithmic-cost adaptive filter experiments from a config file.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="{run,sweep,theory}")

    def add(name, help_text):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="experiment file (sectioned key=value format)")
        cmd.add_argument("output_dir", help="directory for emitted files (created if absent)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the experiment seed")
        cmd.add_argument("--trials", type=int, default=None,
                         help="override the trial count")
        cmd.add_argument("--iterations", type=int, default=None,
                         help="override the iteration count")
        cmd.add_argument("--workers", type=int, default=1,
                         help="worker threads for the trial fan-out "
                              "(results are identical at any count)")
        cmd.add_argument("--tail-window", type=int, default=None, dest="tail_window",
                         help="override the steady-state averaging window")
        cmd.add_argument("--fail-on-divergence", action="store_true",
                         help="exit with status 3 if any trial diverges")
        return cmd

    add("run", "simulate learning curves with closed-form overlays")
    add("sweep", "steady-state MSD over a parameter grid for one algorithm")
    add("theory", "closed-form predictions only, no simulation")
    return parser


_COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "theory": cmd_theory}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError(f"--workers: must be >= 1, got {args.workers}")
        manifest = _COMMANDS[args.command](
            args.config,
            args.output_dir,
            seed=args.seed,
            trials=args.trials,
            iterations=args.iterations,
            workers=args.workers,
            tail_window=args.tail_window,
        )
    except ConfigError as err:
        print(f"logcost: config error: {err}", file=sys.stderr)
        return 2
    if args.fail_on_divergence and manifest["diverged_trials"] > 0:
        print(
            f"logcost: {manifest['diverged_trials']} trial(s) diverged", file=sys.stderr
        )
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

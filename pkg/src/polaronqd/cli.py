"""Command line interface: ``polaronqd run|preset|validate|oracle``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 validity condition violated (g above delta_ph).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import platform
import sys
import warnings

import numpy as np
import scipy
import yaml

from . import __version__
from .bath import DECAY_THRESHOLD
from .config import ScenarioConfig, dump_config, load_config, preset
from .errors import ConfigError, DomainError, PolaronError, UnsupportedParams, ValidityViolation
from .half_fourier import _TAIL_WARN
from .resonance import OVERDAMPED_RATIO, ROOT_TOL, UNDERDAMPED_RATIO, pole_approximation
from .spectra import (
    EMISSION_GAMMA,
    VALIDITY_RATIO,
    SystemParams,
    absorption,
    absorption_terms,
    bath_transform,
    emission,
    polaron_spectrum,
)
from .spectral_density import Kind, PhononModel, bath_scalars

__all__ = ["main", "run_scenario", "validate", "oracle_checks", "build_grid", "ValidityViolation"]

log = logging.getLogger("polaronqd")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDITY = 0, 2, 3, 4
ORACLE_RTOL = 0.01


# ---------------------------------------------------------------------------
# helpers


def _temperature_dirs(config: ScenarioConfig, root):
    temps = config.params.T
    if len(temps) == 1:
        return [(temps[0], root)]
    return [(T, os.path.join(root, f"T_{T:g}")) for T in temps]


def build_grid(config: ScenarioConfig, model: PhononModel, params: SystemParams) -> np.ndarray:
    spec = config.grid
    half = 1.5 * max(model.delta, 3.0 * model.omega_b)
    lo = -half if spec.min is None else spec.min
    hi = half if spec.max is None else spec.max
    grid = np.linspace(lo, hi, spec.points)
    if spec.inset is not None and params.g > 0:
        if spec.inset.min is None:
            b = bath_scalars(model, params.T).mean_b
            width = 3.0 * params.g * (b if b > 0 else 1.0)
            a, z = -width, width
        else:
            a, z = spec.inset.min, spec.inset.max
        grid = np.union1d(grid, np.linspace(a, z, spec.inset.points))
    return grid


def _scalars(model, params):
    sc = bath_scalars(model, params.T).as_dict()
    b = sc["mean_b"]
    out = dict(sc)
    out["g"] = params.g
    out["g_tilde"] = params.g * b
    if not model.is_null:
        out["delta_ph"] = model.delta_ph
        out["g_over_delta_ph"] = params.g / model.delta_ph
    return out


def _check_hard_validity(model, params):
    if model.is_null:
        return
    if params.g > model.delta_ph:
        raise ValidityViolation(
            f"g = {params.g} exceeds delta_ph = {model.delta_ph:.4g}; results would be meaningless"
        )


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _finite(value):
    """JSON has no infinities; map them to strings."""
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


# ---------------------------------------------------------------------------
# verbs


def run_scenario(config: ScenarioConfig, output_dir=None) -> dict:
    """Compute the requested spectra and reports; returns the manifest."""
    root = output_dir or config.paths.output_dir
    os.makedirs(root, exist_ok=True)
    model = config.model.build()
    files = []
    notes = []
    derived = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for T, out in _temperature_dirs(config, root):
            os.makedirs(out, exist_ok=True)
            params = config.params.build(T)
            _check_hard_validity(model, params)
            derived[f"{T:g}"] = _scalars(model, params)
            grid = build_grid(config, model, params)
            outputs = config.outputs
            gamma = params.gamma
            ht = None
            if outputs.absorption or outputs.resonance_report:
                log.info("T = %g: bath transforms", T)
                ht = bath_transform(model, T, gamma)
            if outputs.absorption:
                spec = absorption(model, params, grid, transforms=ht)
                files.append(_emit(spec, out, "absorption.csv"))
            if outputs.emission:
                eparams = params.with_(gamma_c=0.0, gamma_qd=0.0)
                if gamma != 0:
                    notes.append(f"T = {T:g}: emission evaluated at gamma = 0 (gamma_eff = {EMISSION_GAMMA})")
                spec = emission(model, eparams, grid)
                files.append(_emit(spec, out, "emission.csv"))
            if outputs.polaron:
                pg = gamma if gamma > 0 else config.oracle.polaron_gamma
                spec = polaron_spectrum(model, T, grid, gamma=pg)
                files.append(_emit(spec, out, "polaron.csv"))
            if outputs.resonance_report:
                path = os.path.join(out, "resonance.json")
                data = {"scalars": derived[f"{T:g}"], "params": params.as_dict()}
                if params.g > 0:
                    data["report"] = pole_approximation(model, params, ht).as_dict()
                else:
                    data["report"] = None
                    notes.append(f"T = {T:g}: no polariton poles for g = 0")
                _write_json(path, _finite(data))
                files.append(path)
            if outputs.oracle_check:
                files.extend(_oracle_files(config, model, params, out))
    messages = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    for msg in messages:
        print(msg, file=sys.stderr)
    manifest = {
        "code_version": __version__,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pyyaml": yaml.__version__,
        },
        "config": config.as_dict(),
        "derived": _finite(derived),
        "tolerances": {
            "correlation_decay_threshold": DECAY_THRESHOLD,
            "tail_warning": _TAIL_WARN,
            "pole_root_tolerance": ROOT_TOL,
            "underdamped_ratio": UNDERDAMPED_RATIO,
            "overdamped_ratio": OVERDAMPED_RATIO,
            "validity_ratio": VALIDITY_RATIO,
            "emission_gamma_eff": EMISSION_GAMMA,
            "oracle_rtol": ORACLE_RTOL,
        },
        "notes": notes,
        "warnings": messages,
        "files": {os.path.relpath(p, root): _sha256(p) for p in files},
    }
    _write_json(os.path.join(root, "manifest.json"), manifest)
    return manifest


def _emit(spec, out, name):
    path = os.path.join(out, name)
    spec.to_csv(path)
    log.info("wrote %s", path)
    return path


def validate(config: ScenarioConfig, stream=None) -> list:
    """Print derived scalars and validity diagnostics; returns the diagnostic lines."""
    stream = stream or sys.stdout
    model = config.model.build()
    lines = [f"model: {json.dumps(model.describe(), sort_keys=True)}"]
    for T in config.params.T:
        params = config.params.build(T)
        sc = _scalars(model, params)
        S = sc["huang_rhys"]
        lines.append(f"T = {T:g}")
        lines.append(f"  Delta = {sc['delta']:.6g}")
        lines.append(f"  S = {S if isinstance(S, str) else format(S, '.6g')}")
        lines.append(f"  <B> = {sc['mean_b']:.6g}")
        lines.append(f"  <B>^2 = {sc['mean_b_squared']:.6g}")
        lines.append(f"  g~ = {sc['g_tilde']:.6g}")
        if "delta_ph" in sc:
            ratio = sc["g_over_delta_ph"]
            lines.append(f"  delta_ph = {sc['delta_ph']:.6g}, g/delta_ph = {ratio:.4g}")
            if ratio > 1.0:
                lines.append("  ERROR: g exceeds delta_ph (hard validity violation)")
            elif ratio > VALIDITY_RATIO:
                lines.append(f"  WARNING: g > {VALIDITY_RATIO} delta_ph, weak-coupling validity not guaranteed")
            else:
                lines.append("  validity: ok")
        try:
            params.gamma
        except UnsupportedParams as exc:
            lines.append(f"  ERROR: {exc}")
        if params.detuning != 0:
            lines.append("  ERROR: only zero detuning is implemented")
    for line in lines:
        print(line, file=stream)
    return lines


def _oracle_grid(config, model, params):
    b = bath_scalars(model, params.T).mean_b
    gt = params.g * (b if b > 0 else 1.0)
    half = config.oracle.half_width or 1.5 * max(gt, 1e-3)
    return np.linspace(-half, half, config.oracle.points)


def oracle_checks(config: ScenarioConfig, model, params) -> tuple[dict, list]:
    """Cross-checks of the frequency-domain spectra; returns (report, oracle spectra)."""
    from .oracle import DiscreteBath, exact_lines, time_domain_spectrum

    report = {"temperature": params.T}
    spectra = []
    if model.kind is not Kind.DELTA:
        gamma = params.gamma if params.gamma > 0 else config.oracle.gamma
        p = params.with_(gamma_c=gamma, gamma_qd=gamma)
        freqs = _oracle_grid(config, model, p)
        ht = bath_transform(model, p.T, gamma)
        ref = absorption_terms(ht, freqs, p.g, gamma).sum(axis=0)
        # the master equation truncates its memory where |G| < 1e-8 |G(0)|
        td = time_domain_spectrum(model, p, freqs, variant=config.oracle.variant,
                                  t_final=config.oracle.t_final)
        rel = np.abs(td.raw_values - ref) / np.abs(ref)
        report["time_domain"] = {
            "gamma": gamma,
            "variant": config.oracle.variant,
            "omega": freqs.tolist(),
            "master_equation": td.raw_values.tolist(),
            "frequency_domain": ref.tolist(),
            "max_relative_deviation": float(rel.max()),
            "tolerance": ORACLE_RTOL,
            "passed": bool(rel.max() <= ORACLE_RTOL),
        }
        spectra.append(td)
    else:
        S = model.delta / model.omega_b
        bath = DiscreteBath.single_mode(model.omega_b, S)
        f, w = exact_lines(bath, params)
        near = (np.abs(f) < 2 * params.g) & (w > 1e-3)
        positions = np.sort(f[near]).tolist()
        res = pole_approximation(model, params) if params.g > 0 else None
        poles = [] if res is None else [x for x in (res.omega_tilde_minus, res.omega_tilde_plus) if x is not None]
        dev = None
        if len(positions) == len(poles) == 2:
            dev = float(max(abs(a - b) for a, b in zip(positions, poles)))
        report["exact_diagonalization"] = {
            "zpl_lines": positions,
            "poles": poles,
            "max_position_deviation": dev,
            "tolerance": 1e-4,
            "passed": dev is not None and dev <= 1e-4,
        }
    return report, spectra


def _oracle_files(config, model, params, out):
    report, spectra = oracle_checks(config, model, params)
    files = []
    for spec in spectra:
        files.append(_emit(spec, out, f"{spec.kind}.csv"))
    path = os.path.join(out, "oracle.json")
    _write_json(path, _finite(report))
    files.append(path)
    return files


def _oracle_verb(config, output_dir):
    root = output_dir or config.paths.output_dir
    os.makedirs(root, exist_ok=True)
    model = config.model.build()
    ok = True
    for T, out in _temperature_dirs(config, root):
        os.makedirs(out, exist_ok=True)
        params = config.params.build(T)
        _check_hard_validity(model, params)
        _oracle_files(config, model, params, out)
        with open(os.path.join(out, "oracle.json")) as fh:
            report = json.load(fh)
        for name in ("time_domain", "exact_diagonalization"):
            if name in report:
                item = report[name]
                dev = item.get("max_relative_deviation", item.get("max_position_deviation"))
                status = "PASS" if item["passed"] else "FAIL"
                print(f"T = {T:g} {name}: {status} (deviation {dev}, tolerance {item['tolerance']})")
                ok &= item["passed"]
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# entry point


def _parser():
    parser = argparse.ArgumentParser(prog="polaronqd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"polaronqd {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("config")
    p.add_argument("-o", "--output-dir")
    p = sub.add_parser("preset", help="run or dump a built-in scenario")
    p.add_argument("name")
    p.add_argument("--dump-config", action="store_true", help="print the preset as YAML and exit")
    p.add_argument("-o", "--output-dir")
    p = sub.add_parser("validate", help="print derived scalars and validity diagnostics")
    p.add_argument("config")
    p = sub.add_parser("oracle", help="cross-check spectra against the oracles")
    p.add_argument("config")
    p.add_argument("-o", "--output-dir")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.verb == "preset":
            config = preset(args.name)
            if args.dump_config:
                sys.stdout.write(dump_config(config))
                return EXIT_OK
            run_scenario(config, args.output_dir)
            return EXIT_OK
        config = load_config(args.config)
        if args.verb == "validate":
            validate(config)
            return EXIT_OK
        if args.verb == "oracle":
            return _oracle_verb(config, args.output_dir)
        run_scenario(config, args.output_dir)
        return EXIT_OK
    except (ConfigError, UnsupportedParams, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidityViolation as exc:
        print(f"validity violation: {exc}", file=sys.stderr)
        return EXIT_VALIDITY
    except (PolaronError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

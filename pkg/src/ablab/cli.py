"""Command-line front end.

    ablab holonomy --path loop.path --nu 0.5 --q 2 [--gauge "3x+y"]
    ablab slit     --nu 0 --nu 0.25 [--config slit.cfg]
    ablab ring     --q 2 --nu-max 1 --nu-step 0.01
    ablab topology --mask ring.pgm --flux-i 31 --flux-j 31

Every run writes CSV outputs plus ``manifest.json`` into ``--out``.  Exit status:
0 success, 1 numeric failure, 2 validation failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import platform
import sys
import time
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AblabError, InvalidInputError, NoFringesError, NumericError
from .experiments import TwoSlitConfig, extract_fringe_shift, run_two_slit, write_reports_csv
from .gauge import (
    GaugeFunction,
    IdealFluxTube,
    PolylinePath,
    gauge_transform,
    loop_phase,
    path_phase,
    winding_number,
)
from .io import read_config, read_path_file, read_pgm, write_csv, write_pgm, write_state_csv
from .ring import DomainMask, quantize_flux, ring_spectrum, staircase, topology_check

EXIT_OK, EXIT_NUMERIC, EXIT_INVALID = 0, 1, 2


def _float_list(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _fraction(text):
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise InvalidInputError(f"not a number: {text!r}") from None


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise InvalidInputError(f"not a boolean: {text!r}")


# key -> (converter, default); every key is also a --flag
COMMON = {"out": (str, "."), "seed": (int, 0)}

HOLONOMY = {
    "path": (str, None),
    "nu": (float, 0.5),
    "q": (int, 1),
    "gauge": (str, None),
    "center_x": (float, 0.0),
    "center_y": (float, 0.0),
    "core_radius": (float, 0.1),
    "random_loops": (int, 0),
}

_SLIT_FIELDS = {f.name: f for f in dataclasses.fields(TwoSlitConfig)}
SLIT = {
    "nu": (_float_list, [0.0]),
    "baseline_nu": (float, 0.0),
    "write_pgm": (_bool, True),
    "snapshot_every": (int, 0),
}
for _name, _f in _SLIT_FIELDS.items():
    if _name in ("nu", "flux_cell", "open_slits"):
        continue
    _conv = {"int": int, "float": float, "str": str}.get(str(_f.type).split(" ")[0], float)
    SLIT[_name] = (_conv, _f.default)
SLIT["packet_y"] = (float, None)
SLIT["dt"] = (float, None)
SLIT["open_slits"] = (lambda s: tuple(str(s).replace(",", " ").split()), TwoSlitConfig.open_slits)
SLIT["flux_cell"] = (lambda s: tuple(int(v) for v in str(s).replace(",", " ").split()), None)

RING = {
    "q": (int, 2),
    "nu_min": (_fraction, Fraction(0)),
    "nu_max": (_fraction, Fraction(1)),
    "nu_step": (_fraction, Fraction(1, 100)),
    "nu": (_fraction, Fraction(0)),
    "n_min": (int, -4),
    "n_max": (int, 4),
}

TOPOLOGY = {
    "mask": (str, None),
    "flux_i": (int, None),
    "flux_j": (int, None),
    "threshold": (int, 128),
    "write_pgm": (_bool, True),
}

SCHEMAS = {"holonomy": HOLONOMY, "slit": SLIT, "ring": RING, "topology": TOPOLOGY}


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ablab", description="Aharonov-Bohm phase laboratory")
    parser.add_argument("--version", action="version", version=f"ablab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file; flags override it")
        for key in {**COMMON, **schema}:
            if name == "slit" and key == "nu":
                p.add_argument("--nu", action="append", help="flux value (repeatable)")
            else:
                p.add_argument(_flag(key), dest=key, default=None)
    return parser


def resolve(args, schema) -> dict:
    """Defaults, then the config file, then command-line flags."""
    schema = {**COMMON, **schema}
    raw = read_config(args.config, schema) if args.config else {}
    for key in schema:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = " ".join(value) if isinstance(value, list) else value
    out = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            try:
                out[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise InvalidInputError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            out[key] = default
    return out


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def write_manifest(outdir: Path, command, cfg, outputs, wall, status, message="") -> None:
    import scipy

    manifest = {
        "command": command,
        "config": {k: _jsonable(v) for k, v in sorted(cfg.items())},
        "versions": {
            "ablab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": sorted(outputs),
        "exit_status": status,
        "message": message,
        "wall_time_s": round(wall, 3),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


# --- subcommands ------------------------------------------------------------------------

def cmd_holonomy(cfg, outdir, emit):
    if not cfg["path"]:
        raise InvalidInputError("holonomy needs --path")
    path = read_path_file(cfg["path"])
    q = cfg["q"]
    tube = IdealFluxTube((cfg["center_x"], cfg["center_y"]), cfg["core_radius"], cfg["nu"])
    lam = GaugeFunction.from_expression(cfg["gauge"]) if cfg["gauge"] else None
    if path.closed:
        w = winding_number(path, tube.center)
        phase = loop_phase(path, tube, q)
        flux = float(loop_phase(path, tube, 1)) / (2 * math.pi)
        other = loop_phase(path, gauge_transform(tube, lam), q) if lam else None
    else:
        w, flux = "", ""
        phase = path_phase(path, tube, q)
        other = path_phase(path, gauge_transform(tube, lam), q) if lam else None
    header = ["closed", "winding", "phase", "phase_reduced", "enclosed_flux"]
    row = [int(path.closed), w, float(phase), phase.reduced, flux]
    if lam:
        header += ["phase_gauge", "gauge_difference"]
        row += [float(other), float(other) - float(phase)]
    write_csv(outdir / "holonomy.csv", header, [row])
    emit(f"winding={w} phase={float(phase):.12g} reduced={phase.reduced:.12g} enclosed_flux={flux}")
    if lam:
        emit(f"gauge {lam.label!r}: phase={float(other):.12g} difference={float(other) - float(phase):.12g}")
    outputs = ["holonomy.csv"]
    if cfg["random_loops"] > 0:
        rng = np.random.default_rng(cfg["seed"])
        rows = []
        while len(rows) < cfg["random_loops"]:
            v = np.asarray(tube.center) + rng.uniform(-3, 3, size=(12, 2))
            loop = PolylinePath(v, closed=True)
            try:
                ph = loop_phase(loop, tube, q)
            except AblabError:
                continue
            k = winding_number(loop, tube.center)
            expected = 2 * math.pi * q * k * tube.nu
            rows.append([len(rows), k, float(ph), expected, abs(float(ph) - expected)])
        write_csv(outdir / "random_loops.csv", ["index", "winding", "loop_phase", "expected", "abs_error"], rows)
        outputs.append("random_loops.csv")
    return outputs


def _nu_tag(nu):
    return f"{nu:+.6f}".replace("+", "p").replace("-", "m").replace(".", "_")


def cmd_slit(cfg, outdir, emit):
    fields = {k: cfg[k] for k in _SLIT_FIELDS if k in cfg and k != "nu" and cfg[k] is not None}
    base_cfg = TwoSlitConfig(**fields)
    base_cfg.with_nu(cfg["baseline_nu"]).validate()
    nus = cfg["nu"]
    if not nus:
        raise InvalidInputError("slit needs at least one --nu")
    patterns = {}
    outputs = []
    for nu in [cfg["baseline_nu"], *nus]:
        if nu in patterns:
            continue
        tag = _nu_tag(nu)
        run_cfg = base_cfg.with_nu(nu)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if cfg["snapshot_every"] > 0:
                patterns[nu], snaps = run_two_slit(run_cfg, record_every=cfg["snapshot_every"])
                grid, _ = run_cfg.build()
                for k, state in enumerate(snaps):
                    stem = f"snapshot_{tag}_{k:04d}"
                    write_pgm(outdir / f"{stem}.pgm", state.density())
                    write_state_csv(outdir / f"{stem}.csv", grid, state)
                    outputs += [f"{stem}.pgm", f"{stem}.csv"]
            else:
                patterns[nu] = run_two_slit(run_cfg)
        for w in caught:
            emit(f"warning (nu={nu}): {w.message}")
        write_csv(outdir / f"pattern_{tag}.csv", ["y", "intensity"],
                  zip(patterns[nu].y, patterns[nu].intensity))
        outputs.append(f"pattern_{tag}.csv")
        if cfg["write_pgm"]:
            write_pgm(outdir / f"pattern_{tag}.pgm", np.tile(patterns[nu].intensity, (64, 1)))
            outputs.append(f"pattern_{tag}.pgm")
    base = patterns[cfg["baseline_nu"]]
    reports = [extract_fringe_shift(patterns[nu], base) for nu in nus]
    write_reports_csv(outdir / "fringes.csv", reports)
    outputs.append("fringes.csv")
    for r in reports:
        emit(f"nu={r.nu:g} q={r.q} delta_phi={float(r.delta_phi):.6f} predicted={float(r.predicted):.6f} "
             f"visibility={r.visibility:.3f}")
    return outputs


def cmd_ring(cfg, outdir, emit):
    q = cfg["q"]
    lo, hi, step = cfg["nu_min"], cfg["nu_max"], cfg["nu_step"]
    if step <= 0 or hi < lo:
        raise InvalidInputError("need nu_step > 0 and nu_max >= nu_min")
    count = int((hi - lo) / step) + 1
    sweep = [lo + k * step for k in range(count)]
    steps = staircase(sweep, q)
    write_csv(outdir / "staircase.csv", ["nu_external", "n", "nu_trapped"],
              [(float(s.nu_external), s.n, float(s.nu_trapped)) for s in steps])
    n_range = range(cfg["n_min"], cfg["n_max"] + 1)
    spec = ring_spectrum(n_range, q, cfg["nu"])
    write_csv(outdir / "spectrum.csv", ["n", "energy"], [(n, float(e)) for n, e in sorted(spec.levels)])
    ground = []
    for nu in sweep:
        n, e = ring_spectrum(n_range, q, nu).ground
        ground.append((float(nu), n, float(e)))
    write_csv(outdir / "ground.csv", ["nu", "n", "energy"], ground)
    plateaus = sorted({float(s.nu_trapped) for s in steps})
    emit(f"q={q} plateaus={plateaus}")
    emit(f"ground level at nu={float(cfg['nu'])}: n={spec.ground[0]} (trapped n={quantize_flux(cfg['nu'], q)[0]})")
    return ["staircase.csv", "spectrum.csv", "ground.csv"]


def cmd_topology(cfg, outdir, emit):
    if not cfg["mask"] or cfg["flux_i"] is None or cfg["flux_j"] is None:
        raise InvalidInputError("topology needs --mask, --flux-i and --flux-j")
    allowed = read_pgm(cfg["mask"]) >= cfg["threshold"]
    cell = (cfg["flux_i"], cfg["flux_j"])
    verdict = topology_check(DomainMask(allowed, cell))
    line = verdict.record(cell)
    (outdir / "verdict.txt").write_text(line + "\n")
    emit(line)
    outputs = ["verdict.txt"]
    if cfg["write_pgm"]:
        img = np.where(allowed, 255, 0)
        img[verdict.witness] = 128
        write_pgm(outdir / "witness.pgm", img, maxval=255)
        outputs.append("witness.pgm")
    return outputs


COMMANDS = {"holonomy": cmd_holonomy, "slit": cmd_slit, "ring": cmd_ring, "topology": cmd_topology}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    cfg, outputs = {}, []
    outdir = Path(args.out) if args.out else None
    status, message = EXIT_OK, ""
    try:
        cfg = resolve(args, SCHEMAS[args.command])
        outdir = Path(cfg["out"])
        outdir.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](cfg, outdir, print)
    except (NumericError, NoFringesError) as exc:
        status, message = EXIT_NUMERIC, str(exc)
    except (AblabError, OSError, ValueError) as exc:
        status, message = EXIT_INVALID, str(exc)
    if message:
        print(f"ablab {args.command}: error: {message}", file=sys.stderr)
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        write_manifest(outdir, args.command, cfg, outputs, time.perf_counter() - start, status, message)
    return status


if __name__ == "__main__":
    sys.exit(main())

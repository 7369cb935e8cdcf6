"""Command-line runner: ``hardscatter <command> [options]``.

Options may also come from a JSON file given with ``--config``; explicit
flags win over the file, and the file wins over built-in defaults.  Every run
writes ``manifest.json`` with the fully resolved configuration.

Exit status is 0 on success, 2 when some cases of a study failed (they are
listed in the report), and 1 on configuration or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from . import experiments as ex
from .geometry import (
    GeometryError,
    Scatterer,
    assumption_b_check,
    exterior_connected,
    feature_separation,
    loads_geometry,
    save_geometry,
    thicken,
)
from .mesh import DomainSpec, MeshError, triangulate
from .scattering import PlaneWave, decay_check, far_field
from .solver import HelmholtzSystem, SolverError, field_csv, make_dtn, total_field

COMMANDS = ("solve", "farfield", "mosco", "thicken", "screen-study", "decay", "sweep", "check")

DEFAULTS: dict[str, Any] = {
    "geometry": None,
    "out": "out",
    "k": 1.0,
    "d_angle": 0.0,
    "r1": None,
    "h_mesh": 0.05,
    "min_angle": 20.0,
    "n_modes": None,
    "jobs": 1,
    "h_list": "0.2,0.1,0.05,0.025,0.0125",
    "k_range": "1:3:5",
    "d_count": 4,
    "background_res": 0.01,
    "h": 0.1,
    "r_min": None,
    "r_max": None,
    "n_radii": 25,
    "n_angles": 360,
    "n_steps": 5,
    "vertex": 0,
    "perturbation_scale": 1.0,
    "rhs": "linear",
    "perturbed": 0,
    "seed": 0,
    "grid_res": None,
    "plots": True,
}

# geometry-free commands
_NO_GEOMETRY = {"sweep", "decay"}


class ConfigError(Exception):
    """Bad command-line or configuration-file input (exit status 1)."""

    def __init__(self, message: str, out: str | None = None):
        super().__init__(message)
        self.out = out


@dataclass(frozen=True)
class RunConfig:
    command: str
    options: dict

    def __getattr__(self, name):
        if name == "options":
            raise AttributeError(name)
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None

    def as_dict(self) -> dict:
        return {"command": self.command, **self.options}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hardscatter", description="Sound-hard scattering workbench.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    a = common.add_argument
    a("--config", help="JSON file of option values (flags override it)")
    a("--geometry", action="append", help="geometry JSON file (repeat for a family)")
    a("--out", help="output directory")
    a("--k", type=float, help="wavenumber")
    a("--d-angle", type=float, help="incidence direction in degrees")
    a("--r1", type=float, help="truncation radius (default R + 1)")
    a("--h-mesh", type=float, help="target mesh edge length")
    a("--min-angle", type=float, help="minimum triangle angle in degrees")
    a("--n-modes", type=int, help="DtN mode cutoff")
    a("--jobs", type=int, help="worker processes for studies")
    a("--h-list", help="comma-separated thicknesses, strictly decreasing")
    a("--k-range", help="wavenumber grid LO:HI:N")
    a("--d-count", type=int, help="number of incidence directions")
    a("--background-res", type=float, help="background grid spacing for field distances")
    a("--h", type=float, help="thickening parameter")
    a("--r-min", type=float, help="inner radius of the decay annulus (default R + 2)")
    a("--r-max", type=float, help="outer radius of the decay annulus (default 4 r_min)")
    a("--n-radii", type=int, help="probe radii in the decay annulus")
    a("--n-angles", type=int, help="probe angles per radius")
    a("--n-steps", type=int, help="Mosco sequence length minus one")
    a("--vertex", type=int, help="perturbed vertex for the Mosco sequence")
    a("--perturbation-scale", type=float, help="size of the n = 0 vertex perturbation")
    a("--rhs", choices=("linear", "constant"), help="Mosco source term")
    a("--perturbed", type=int, help="add this many seeded perturbed hexagons to the family")
    a("--seed", type=int, help="seed for generated families")
    a("--grid-res", type=float, help="flood-fill grid spacing for connectivity checks")
    a("--no-plots", dest="plots", action="store_false", help="skip PNG figures")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], argument_default=argparse.SUPPRESS)
    return p


def _json_error(path: str, exc: json.JSONDecodeError) -> ConfigError:
    return ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")


def resolve_config(argv: list[str] | None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    try:
        return _resolve(command, ns)
    except ConfigError as exc:
        if exc.out is None:
            exc.out = ns.get("out")
        raise


def _resolve(command: str, ns: dict) -> RunConfig:
    opts = dict(DEFAULTS)
    cfg = ns.pop("config", None)
    if cfg is not None:
        try:
            data = json.loads(Path(cfg).read_text())
        except json.JSONDecodeError as exc:
            raise _json_error(cfg, exc) from None
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{cfg}: config must be a JSON object")
        unknown = sorted(set(k.replace("-", "_") for k in data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"{cfg}: unknown option(s) {', '.join(unknown)}")
        opts.update({k.replace("-", "_"): v for k, v in data.items()})
    opts.update(ns)
    if isinstance(opts["geometry"], str):
        opts["geometry"] = [opts["geometry"]]
    if command not in _NO_GEOMETRY and not opts["geometry"]:
        raise ConfigError(f"'{command}' requires --geometry")
    if command in _NO_GEOMETRY and not opts["geometry"] and not opts["perturbed"]:
        raise ConfigError(f"'{command}' needs --geometry files and/or --perturbed N")
    for key in ("k", "h_mesh", "background_res", "h"):
        if not float(opts[key]) > 0:
            raise ConfigError(f"{key} must be positive")
    if opts["jobs"] < 1:
        raise ConfigError("jobs must be at least 1")
    return RunConfig(command, opts)


def parse_k_range(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"k-range must look like LO:HI:N, got {text!r}") from None
    if not (0 < lo < hi) or n < 1:
        raise ConfigError("k-range requires 0 < LO < HI and N >= 1")
    return lo, hi, n


def parse_h_list(text) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")] if isinstance(text, str) else [float(v) for v in text]
    except ValueError:
        raise ConfigError(f"h-list must be comma-separated numbers, got {text!r}") from None
    if not vals or any(not v > 0 for v in vals) or any(not b < a for a, b in zip(vals, vals[1:])):
        raise ConfigError("h-list must be positive and strictly decreasing")
    return vals


def read_geometry(path: str) -> Scatterer:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read geometry: {exc}") from None
    try:
        return loads_geometry(text)
    except json.JSONDecodeError as exc:
        raise _json_error(path, exc) from None
    except (GeometryError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: invalid geometry: {exc}") from None


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


class Outputs:
    def __init__(self, root: Path, plots: bool):
        self.root = root
        self.plots = plots
        self.files: list[str] = []
        self.resolved: dict[str, Any] = {}

    def text(self, name: str, content: str) -> None:
        (self.root / name).write_text(content)
        self.files.append(name)

    def report(self, name: str, data: dict) -> None:
        self.text(name, ex.dumps_report(data))

    def figure(self, name: str, fn, *args, **kw) -> None:
        if not self.plots:
            return
        fn(*args, self.root / name, **kw)
        self.files.append(name)


def _spec(cfg: RunConfig, k: Scatterer, r1: float | None = None) -> DomainSpec:
    r = 0.0 if k.is_empty else k.bounding_radius
    return DomainSpec(k, float(r1 if r1 is not None else cfg.r1 or r + 1.0), float(cfg.h_mesh), float(cfg.min_angle))


def _direction(cfg: RunConfig) -> tuple[float, float]:
    a = math.radians(float(cfg.d_angle))
    return (math.cos(a), math.sin(a))


def _single(cfg: RunConfig) -> Scatterer:
    if len(cfg.geometry) != 1:
        raise ConfigError(f"'{cfg.command}' takes exactly one --geometry")
    return read_geometry(cfg.geometry[0])


def _solve(cfg: RunConfig, k: Scatterer, out: Outputs):
    if k.screens:
        raise ConfigError("geometry contains screens; run 'thicken' first or use 'screen-study'")
    spec = _spec(cfg, k)
    mesh = triangulate(spec)
    dtn = make_dtn(float(cfg.k), spec.truncation_radius, cfg.n_modes)
    us = HelmholtzSystem(mesh, dtn).scatter(_direction(cfg))
    out.resolved.update(r1=spec.truncation_radius, n_modes=dtn.mode_cutoff)
    return spec, mesh, dtn, us


def _mesh_dict(mesh) -> dict:
    s = mesh.stats()
    return {key: (float(v) if isinstance(v, (float, np.floating)) else int(v)) for key, v in s.items()}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_check(cfg: RunConfig, out: Outputs) -> int:
    k = _single(cfg)
    res = cfg.grid_res
    if res is None:
        sep = feature_separation(k, include_edges=False) if not k.is_empty else math.inf
        res = min(0.02 * k.bounding_radius, sep / 4.0)
    out.resolved["grid_res"] = float(res)
    connected = exterior_connected(k, k.bounding_radius, float(res))
    b = assumption_b_check(k)
    data = {
        "exterior_connected": connected,
        "grid_resolution": float(res),
        "assumption_b": b.as_dict(),
        "loops": len(k.loops),
        "screens": len(k.screens),
        "bounding_radius": k.bounding_radius,
    }
    out.report("check.json", data)
    print(f"exterior connected: {connected} (grid {res:.4g})")
    print(f"boundary components: {b.components}, perimeter: {b.perimeter:.6g}")
    return 0 if connected else 2


def cmd_thicken(cfg: RunConfig, out: Outputs) -> int:
    from .plotting import plot_geometry

    k = _single(cfg)
    kh = thicken(k, float(cfg.h))
    save_geometry(kh, out.root / "thickened.json")
    out.files.append("thickened.json")
    out.figure("thickened.png", plot_geometry, k, thickened=kh, title=f"h = {cfg.h}")
    print(f"thickened: {len(kh.loops)} loop(s), {len(kh.vertices)} vertices")
    return 0


def cmd_solve(cfg: RunConfig, out: Outputs) -> int:
    from .plotting import plot_field

    k = _single(cfg)
    spec, mesh, dtn, us = _solve(cfg, k, out)
    d = _direction(cfg)
    ut = total_field(us, float(cfg.k), d)
    inc = math.sqrt(math.pi) * spec.truncation_radius
    s_norm = us.l2_norm()
    data = {
        "problem": "sound-hard plane-wave scattering, DtN closure on |x| = R1",
        "k": float(cfg.k),
        "d": list(d),
        "d_angle_rad": math.radians(float(cfg.d_angle)),
        "truncation_radius": spec.truncation_radius,
        "mode_cutoff": dtn.mode_cutoff,
        "mesh": _mesh_dict(mesh),
        "residual": us.residual,
        "scattered_l2": s_norm,
        "total_l2": ut.l2_norm(),
        "incident_l2_exact": inc,
        "scattered_to_incident": s_norm / inc,
    }
    out.report("solve.json", data)
    out.text("scattered.csv", field_csv(us))
    out.text("mesh.txt", mesh.to_text())
    out.figure("scattered.png", plot_field, us, title="|u_s|")
    out.figure("total.png", plot_field, ut, part="real", title="Re u")
    print(f"scattered/incident L2 ratio: {s_norm / inc:.3e}")
    return 0


def cmd_farfield(cfg: RunConfig, out: Outputs) -> int:
    from .plotting import plot_farfield

    k = _single(cfg)
    _, _, dtn, us = _solve(cfg, k, out)
    f = far_field(us, dtn)
    sigma = f.cross_section()
    ext = f.extinction(_direction(cfg))
    data = {
        "k": float(cfg.k),
        "d_angle_rad": math.radians(float(cfg.d_angle)),
        "mode_cutoff": f.mode_cutoff,
        "l2_norm": f.l2_norm(),
        "cross_section": sigma,
        "extinction": ext,
        "optical_theorem_rel_error": abs(sigma - ext) / sigma if sigma > 0 else 0.0,
        "normalisation": "u_s ~ exp(ikr)/sqrt(r) F(theta), g_n = sqrt(2/(pi k)) exp(-i pi/4) (-i)^n c_n / H_n(k R1)",
        "modes_re": f.modes.real.tolist(),
        "modes_im": f.modes.imag.tolist(),
    }
    out.report("farfield.json", data)
    out.text("farfield.csv", f.csv())
    out.figure("farfield.png", plot_farfield, f)
    print(f"||F||_L2 = {f.l2_norm():.6g}, optical theorem error {data['optical_theorem_rel_error']:.2e}")
    return 0


def cmd_mosco(cfg: RunConfig, out: Outputs) -> int:
    from .plotting import plot_mosco

    k = _single(cfg)
    if len(k.loops) != 1 or k.screens:
        raise ConfigError("mosco expects a single polygon as the limit set")
    base = k.loops[0].vertices
    if not 0 <= cfg.vertex < len(base):
        raise ConfigError(f"vertex index {cfg.vertex} out of range")
    seq = ex.ScattererSequence.vertex_perturbation(base, int(cfg.vertex), int(cfg.n_steps), float(cfg.perturbation_scale))
    reach = max(m.bounding_radius for m in seq.members)
    r1 = cfg.r1 or max(reach, k.bounding_radius) + 1.0
    spec = DomainSpec(seq.limit, float(r1), float(cfg.h_mesh), float(cfg.min_angle))
    out.resolved["r1"] = float(r1)
    f = ex.COORDINATE_SOURCE if cfg.rhs == "linear" else ex.CONSTANT_SOURCE
    rep = ex.mosco_diagnostic(seq, f, spec, float(cfg.background_res), jobs=int(cfg.jobs))
    out.report("mosco.json", {**rep.as_dict(), "truncation_radius": float(r1)})
    out.text("mosco.csv", rep.csv())
    out.figure("mosco.png", plot_mosco, rep)
    for s, rv, rg in zip(rep.per_step, rep.relative("value_distance"), rep.relative("gradient_distance")):
        print(f"n={s.index} hausdorff={s.hausdorff} value={rv} gradient={rg}")
    return 2 if rep.failures else 0


def cmd_screen_study(cfg: RunConfig, out: Outputs) -> int:
    from .plotting import plot_screen

    k = _single(cfg)
    hs = parse_h_list(cfg.h_list)
    r1 = cfg.r1 or k.bounding_radius + 1.0
    spec = DomainSpec(Scatterer((), (), k.bounding_radius), float(r1), float(cfg.h_mesh), float(cfg.min_angle))
    wave = PlaneWave(float(cfg.k), _direction(cfg))
    out.resolved["r1"] = float(r1)
    rep = ex.screen_approximation_study(k, hs, wave, spec, cfg.n_modes, jobs=int(cfg.jobs))
    out.report("screen.json", rep.as_dict())
    out.text("screen.csv", rep.csv())
    out.figure("screen.png", plot_screen, rep)
    print(f"Cauchy differences: {list(rep.cauchy_deltas)}; strictly decreasing: {rep.strictly_decreasing}")
    return 2 if rep.failures else 0


def _family(cfg: RunConfig) -> tuple[list[Scatterer], str]:
    fam = [read_geometry(p) for p in (cfg.geometry or [])]
    desc = [f"geometry files {list(cfg.geometry)}"] if cfg.geometry else []
    if cfg.perturbed:
        fam += ex.perturbed_polygons(int(cfg.perturbed), seed=int(cfg.seed))
        desc.append(f"{cfg.perturbed} perturbed hexagons (seed {cfg.seed})")
    if any(k.screens for k in fam):
        raise ConfigError("family members must be obstacles; thicken screens first")
    return fam, "; ".join(desc)


def cmd_sweep(cfg: RunConfig, out: Outputs) -> int:
    from .plotting import plot_sweep

    fam, desc = _family(cfg)
    lo, hi, n = parse_k_range(cfg.k_range)
    radius = max(k.bounding_radius for k in fam) + 1.0
    spec = _spec(cfg, fam[0], cfg.r1 or radius)
    out.resolved["r1"] = spec.truncation_radius
    rep = ex.uniform_bound_sweep(fam, lo, hi, n, int(cfg.d_count), spec, desc, cfg.n_modes, jobs=int(cfg.jobs))
    out.report("sweep.json", rep.as_dict())
    out.text("sweep.csv", rep.csv())
    out.figure("sweep.png", plot_sweep, rep)
    print(f"E_hat = {rep.E_hat} over {len(rep.per_case)} cases, {len(rep.failures)} failures")
    return 2 if rep.failures else 0


def cmd_decay(cfg: RunConfig, out: Outputs) -> int:
    from .plotting import plot_decay

    fam, desc = _family(cfg)
    big_r = max(k.bounding_radius for k in fam)
    r_min = float(cfg.r_min or big_r + 2.0)
    r_max = float(cfg.r_max or 4.0 * r_min)
    lo, hi, n = parse_k_range(cfg.k_range)
    spec = _spec(cfg, fam[0], cfg.r1 or big_r + 1.0)
    out.resolved.update(r1=spec.truncation_radius, r_min=r_min, r_max=r_max)
    rep = ex.decay_uniformity_study(
        fam, (lo, hi, n, int(cfg.d_count)), spec, (r_min, r_max), int(cfg.n_radii), int(cfg.n_angles), desc, cfg.n_modes, jobs=int(cfg.jobs)
    )
    out.report("decay.json", rep.as_dict())
    out.text("decay.csv", rep.csv())
    worst = rep.argmax()
    if worst is not None and out.plots:
        # re-solve the worst case for its radial profile
        k = fam[worst["scatterer_id"]]
        dtn = make_dtn(worst["k"], spec.truncation_radius, cfg.n_modes)
        a = worst["d_angle"]
        us = HelmholtzSystem(triangulate(spec.with_scatterer(k)), dtn).scatter((math.cos(a), math.sin(a)))
        d = decay_check(far_field(us, dtn), dtn, r_min, r_max, int(cfg.n_radii), int(cfg.n_angles))
        out.figure("decay.png", plot_decay, d.probe_radii, d.profile)
    print(f"E1_hat = {rep.E1_hat}, worst flatness = {rep.worst_flatness}")
    return 2 if rep.failures else 0


HANDLERS = {
    "check": cmd_check,
    "thicken": cmd_thicken,
    "solve": cmd_solve,
    "farfield": cmd_farfield,
    "mosco": cmd_mosco,
    "screen-study": cmd_screen_study,
    "sweep": cmd_sweep,
    "decay": cmd_decay,
}


def _write_manifest(root: Path, cfg: RunConfig | None, status: int, message: str, files: list[str], resolved: dict | None = None) -> None:
    data = {
        "resolved": resolved or {},
        "version": __version__,
        "status": status,
        "message": message,
        "config": None if cfg is None else cfg.as_dict(),
        "outputs": sorted(files),
    }
    (root / "manifest.json").write_text(ex.dumps_report(data))


def run(config: RunConfig) -> int:
    root = Path(config.out)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 1
    out = Outputs(root, bool(config.plots))
    t0 = time.perf_counter()
    message = "ok"
    try:
        status = HANDLERS[config.command](config, out)
        if status == 2:
            message = "partial: some cases failed"
    except ConfigError as exc:
        status, message = 1, str(exc)
    except MeshError as exc:
        status, message = 1, f"mesh generation failed: {exc}"
    except (GeometryError, SolverError, ValueError) as exc:
        status, message = 1, f"{type(exc).__name__}: {exc}"
    if status == 1:
        print(f"error: {message}", file=sys.stderr)
    # wall-clock time lives outside the reports so those stay byte-stable
    (root / "timings.json").write_text(json.dumps({"seconds": time.perf_counter() - t0}) + "\n")
    _write_manifest(root, config, status, message, out.files + ["timings.json"], out.resolved)
    return status


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.out is not None:
            try:
                Path(exc.out).mkdir(parents=True, exist_ok=True)
                _write_manifest(Path(exc.out), None, 1, str(exc), [])
            except OSError:
                pass
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

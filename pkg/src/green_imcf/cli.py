"""Command-line front end: ``green-imcf <subcommand> [options]``.

Exit status: 0 on success, 1 when a check fails, 2 on malformed input.
Every subcommand accepts ``--config FILE`` (a flat JSON object whose keys
are the long option names with dashes or underscores; file paths in it are
relative to the config file) and explicit flags override it. The effective configuration is written next to the outputs
and hashed into the header line of every CSV.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .io import InputError, load_json, load_model, write_csv, write_field_csv, write_json, write_kernel_csv, write_margin_csv


class CheckFailed(RuntimeError):
    pass


def _floats(text: str) -> List[float]:
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _number(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None


@dataclass
class RunConfig:
    subcommand: str
    options: Dict[str, object]
    out: Path
    seed: int
    model: Optional[Path] = None
    mesh: Optional[Path] = None

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.options.items() if v is not None}
        d.update(subcommand=self.subcommand, seed=self.seed,
                 model=str(self.model) if self.model else None,
                 mesh=str(self.mesh) if self.mesh else None)
        return d


# option name -> (type, default)
OPTIONS = {
    "green": {"p": (_number, 2.0), "R0": (_number, math.inf), "r_min": (_number, 1e-4),
              "r_max": (_number, None)},
    "capacity": {"p": (_number, 2.0), "s": (_number, 1.0), "R": (_number, 2.0),
                 "h": (_number, None), "tol": (_number, 2e-2)},
    "capacitor": {"p": (_number, None), "p_schedule": (_floats, None), "annulus": (_floats, None),
                  "floor": (_number, 1e-30), "eps_schedule": (_floats, None), "newton_tol": (_number, None)},
    "imcf-limit": {"r_grid": (_floats, [0.1, 10.0, 25.0]), "R0": (_number, math.inf),
                   "ps": (_floats, [1.2, 1.1, 1.05, 1.02])},
    "constants": {"nu": (_number, 3.0), "S": (_number, 1.0), "p_grid": (_floats, None)},
    "nogo": {"A": (_number, 1.0), "B": (_number, 1.0), "t0": (_number, 1.0), "p_grid": (_floats, None),
             "trials": (_number, 1000), "K": (_number, 64)},
    "verify-all": {},
}
FILES = {"green": ("model",), "capacity": ("model", "mesh"), "capacitor": ("mesh",),
         "imcf-limit": ("model",), "constants": (), "nogo": (), "verify-all": ()}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="green-imcf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"green-imcf {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="flat JSON config")
        sp.add_argument("--out", type=Path, default=None, help="output directory (default: out/<subcommand>)")
        sp.add_argument("--seed", type=int, default=None)
        for f in FILES[name]:
            sp.add_argument(f"--{f}", type=Path, default=None)
        for key, (typ, _) in opts.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
    return ap


def resolve(args: argparse.Namespace) -> RunConfig:
    name = args.subcommand
    cfg: dict = {}
    if args.config is not None:
        raw = load_json(args.config)
        text = args.config.read_text().splitlines()
        known = set(OPTIONS[name]) | set(FILES[name]) | {"out", "seed"}
        for k, v in raw.items():
            key = k.replace("-", "_")
            if key not in known:
                line = next((i for i, ln in enumerate(text, 1) if f'"{k}"' in ln), 1)
                raise InputError(args.config, line, f"unknown option {k!r} for {name}")
            typ = OPTIONS[name].get(key, (None, None))[0]
            if typ is not None and v is not None:
                try:
                    v = typ(",".join(map(str, v)) if isinstance(v, list) else v)
                except argparse.ArgumentTypeError as exc:
                    line = next((i for i, ln in enumerate(text, 1) if f'"{k}"' in ln), 1)
                    raise InputError(args.config, line, str(exc)) from None
            cfg[key] = v
    opts = {}
    for key, (_, default) in OPTIONS[name].items():
        val = getattr(args, key)
        opts[key] = val if val is not None else cfg.get(key, default)
    files = {}
    for f in FILES[name]:
        val = getattr(args, f)
        if val is None and cfg.get(f):
            # paths inside a config file are relative to that file
            val = args.config.parent / Path(cfg[f])
        if val is not None and not Path(val).is_file():
            raise InputError(val, None, "file not found")
        files[f] = Path(val) if val else None
    out = args.out or (Path(cfg["out"]) if cfg.get("out") else Path("out") / name)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    return RunConfig(name, opts, Path(out), seed, files.get("model"), files.get("mesh"))


def threads_from_env() -> int:
    raw = os.environ.get("GREEN_IMCF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# -- subcommands -------------------------------------------------------------------


def _need(rc: RunConfig, what: str):
    if getattr(rc, what) is None:
        raise InputError(f"--{what}", None, f"{rc.subcommand} needs --{what}")


def cmd_green(rc: RunConfig) -> None:
    from .kernel import green_radial

    _need(rc, "model")
    M = load_model(rc.model)
    o = rc.options
    k = green_radial(M, o["p"], o["R0"], r_min=o["r_min"], r_hi=o["r_max"])
    if k.parabolic:
        print(f"{M.label} is {o['p']}-parabolic: no Green kernel on the whole model")
        write_json(rc.out / "summary.json", {"model": M.to_dict(), "p": o["p"], "parabolic": True})
        return
    write_kernel_csv(rc.out / "kernel.csv", k, rc.as_dict(), rc.seed)
    summary = {"model": M.to_dict(), "p": o["p"], "R0": o["R0"], "samples": int(k.r.size), "parabolic": False}
    if k.r[0] <= 1.0 <= k.r[-1] and 1.0 < k.R0:
        summary["G(1)"] = float(k.value(1.0))
        print(f"G(1) = {summary['G(1)']!r}")
    write_json(rc.out / "summary.json", summary)
    print(f"wrote {rc.out / 'kernel.csv'} ({k.r.size} rows)")


def cmd_capacity(rc: RunConfig) -> None:
    from .capacity import cap_radial, cap_variational
    from .fem import annulus_mesh, read_mesh

    _need(rc, "model")
    M = load_model(rc.model)
    o = rc.options
    exact = cap_radial(M, o["p"], o["s"], o["R"])
    var = math.nan
    if rc.mesh is not None or o["h"] is not None:
        if not (M.kind == "euclidean" and M.n == 2):
            raise InputError(rc.model, 1, "variational capacity needs a planar (euclidean n=2) model")
        mesh = read_mesh(rc.mesh) if rc.mesh is not None else annulus_mesh(o["s"], o["R"], o["h"])
        var = cap_variational(mesh, o["p"])
    rel = abs(var - exact) / exact if math.isfinite(var) and exact > 0 else math.nan
    write_csv(rc.out / "capacity.csv", ["model", "p", "s", "R", "cap_exact", "cap_variational", "rel_err"],
              [(M.label, o["p"], o["s"], o["R"], exact, var, rel)], rc.as_dict(), rc.seed)
    print(f"cap_exact = {exact!r}" + (f", cap_variational = {var!r}, rel_err = {rel:.3e}" if math.isfinite(var) else ""))
    if math.isfinite(rel) and rel > o["tol"]:
        raise CheckFailed(f"variational capacity off by {rel:.3e} > tol {o['tol']}")


def cmd_capacitor(rc: RunConfig) -> None:
    from .fem import (ContinuationSchedule, SolverConfig, SolverError, annulus_mesh, continue_to_one,
                      moser_transform, read_mesh, solve_capacitor)

    o = rc.options
    if rc.mesh is not None:
        mesh = read_mesh(rc.mesh)
    elif o["annulus"] is not None:
        if len(o["annulus"]) != 3:
            raise InputError("--annulus", None, "expected r0,R,h")
        mesh = annulus_mesh(*o["annulus"])
    else:
        raise InputError("--mesh", None, "capacitor needs --mesh or --annulus r0,R,h")
    kw = {}
    if o["eps_schedule"]:
        kw["eps_schedule"] = o["eps_schedule"]
    if o["newton_tol"]:
        kw["newton_tol"] = o["newton_tol"]
    cfg = SolverConfig(**kw)
    summary = {"nv": mesh.nv, "nt": mesh.nt, "h": mesh.h, "stages": []}
    if o["p_schedule"]:
        res = continue_to_one(mesh, ContinuationSchedule(o["p_schedule"]), cfg, floor=o["floor"])
        for p, v, u in zip(res.p_values, res.potentials, res.transforms):
            write_field_csv(rc.out / f"field_p{p:g}.csv", mesh, v, u, rc.as_dict(), rc.seed)
            summary["stages"].append({"p": p, "residual": v.metadata["residual"],
                                      "newton_iterations": v.metadata["newton_iterations"]})
        if res.error is not None:
            write_json(rc.out / "summary.json", summary)
            raise CheckFailed(f"continuation stopped: {res.error}")
        write_field_csv(rc.out / "field_extrapolated.csv", mesh, None, res.extrapolated, rc.as_dict(), rc.seed)
        interior = mesh.interior_nodes()
        summary["extrapolated_interior_sup"] = float(res.extrapolated.values[interior].max())
    else:
        p = o["p"] if o["p"] is not None else 2.0
        try:
            v = solve_capacitor(mesh, p, cfg)
        except SolverError as exc:
            raise CheckFailed(str(exc)) from None
        u = moser_transform(v, p, o["floor"])
        write_field_csv(rc.out / f"field_p{p:g}.csv", mesh, v, u, rc.as_dict(), rc.seed)
        summary["stages"].append({"p": p, "residual": v.metadata["residual"],
                                  "newton_iterations": v.metadata["newton_iterations"]})
    write_json(rc.out / "summary.json", summary)
    print(f"wrote {len(summary['stages'])} field(s) to {rc.out}")


def cmd_imcf_limit(rc: RunConfig) -> None:
    from .imcf import gradient_bound_check, imcf_core_model
    from .kernel import core_limit, is_parabolic, richardson_core

    _need(rc, "model")
    M = load_model(rc.model)
    o = rc.options
    lo, hi, num = o["r_grid"]
    R0 = o["R0"]
    if math.isfinite(M.r_max) and math.isinf(R0):
        raise InputError(rc.model, 1, "model has finite radius: pass --R0")
    r = np.geomspace(lo, hi, int(num))
    ps = o["ps"]
    rich_ok = math.isfinite(R0) or not any(is_parabolic(M, p) for p in ps)
    rows, worst_id, worst_rich = [], 0.0, 0.0
    for x in r:
        model = imcf_core_model(M, float(x))
        lim = core_limit(M, float(x), R0)
        ident = lim - model - math.log(M.omega)
        rich = richardson_core(M, float(x), ps, R0) if rich_ok else math.nan
        worst_id = max(worst_id, abs(ident))
        if rich_ok:
            worst_rich = max(worst_rich, abs(rich - lim))
        rows.append((x, model, lim, rich, ident))
    write_csv(rc.out / "imcf_limit.csv", ["r", "core_model", "core_limit", "richardson", "identity_defect"],
              rows, rc.as_dict(), rc.seed)
    write_margin_csv(rc.out / "gradient_margin.csv", gradient_bound_check(M, r), rc.as_dict(), rc.seed)
    print(f"identity defect {worst_id:.3e}; Richardson deviation {worst_rich:.3e}")
    if worst_id >= 1e-10:
        raise CheckFailed(f"core identity defect {worst_id:.3e} >= 1e-10")
    if worst_rich >= 1e-2:
        raise CheckFailed(f"Richardson deviation {worst_rich:.3e} >= 1e-2")


def cmd_constants(rc: RunConfig) -> None:
    from .constants import constants_report
    from .io import atomic_write_text

    o = rc.options
    rep = constants_report(o["nu"], o["S"], o["p_grid"])
    write_csv(rc.out / "constants.csv", ["p", "constant_id", "value", "classification"], rep.rows(),
              rc.as_dict(), rc.seed)
    text = rep.summary()
    atomic_write_text(rc.out / "constants_summary.txt", text + "\n")
    print(text)


def cmd_nogo(rc: RunConfig) -> None:
    from .constants import nogo_certificate, random_schedule_search

    o = rc.options
    try:
        rep = nogo_certificate(o["A"], o["B"], o["t0"], o["p_grid"])
    except ValueError as exc:
        raise InputError("--p-grid", None, str(exc)) from None
    searches = [random_schedule_search(o["t0"], float(p), int(o["trials"]), int(o["K"]), rc.seed + i)
                for i, p in enumerate(rep.p_grid)]
    rows = [(p, m, s.margin) for p, m, s in zip(rep.p_grid, rep.log_margins, searches)]
    write_csv(rc.out / "nogo.csv", ["p", "log_margin", "random_search_margin"], rows, rc.as_dict(), rc.seed)
    write_json(rc.out / "nogo.json", {"A": rep.A, "B": rep.B, "t0": rep.t0, "p0": rep.p0,
                                      "p0_conditions": rep.p0_conditions})
    print(f"p0 = {rep.p0!r}")
    for p, m, s in rows:
        print(f"  p = {p:.10f}  log-margin = {m:.6g}  random-search margin = {s:.6g}")
    if not rep.all_positive:
        raise CheckFailed("non-positive log-margin")
    if min(s.margin for s in searches) <= 0:
        raise CheckFailed("a random schedule reached the optimum")


def cmd_verify_all(rc: RunConfig) -> None:
    from .verify import run_all

    results = run_all(threads_from_env(), rc.seed)
    write_csv(rc.out / "verify_summary.csv", ["check", "passed", "margin"],
              [(r.name, r.passed, r.margin) for r in results], rc.as_dict(), rc.seed)
    write_json(rc.out / "verify_timing.json",
               {r.name: {"runtime": r.runtime, "budget": r.budget} for r in results})
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CheckFailed("failed: " + ", ".join(failed))


COMMANDS = {
    "green": cmd_green,
    "capacity": cmd_capacity,
    "capacitor": cmd_capacitor,
    "imcf-limit": cmd_imcf_limit,
    "constants": cmd_constants,
    "nogo": cmd_nogo,
    "verify-all": cmd_verify_all,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .fem.mesh import MeshError, MeshFormatError

    args = build_parser().parse_args(argv)
    try:
        rc = resolve(args)
        rc.out.mkdir(parents=True, exist_ok=True)
        write_json(rc.out / "config.json", rc.as_dict())
        COMMANDS[rc.subcommand](rc)
    except (InputError, MeshFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except MeshError as exc:
        print(f"error: invalid mesh: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # domain violations in numeric parameters (p <= 1, s >= R, ...)
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

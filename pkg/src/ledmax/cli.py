"""Command-line interface: ``ledmax <command> ...``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 on a
numerical failure (the exception class name is printed on stderr).
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import continuation, critical, owpt, symmetry
from .errors import ConfigurationError, EquivarianceError, NumericalFailure
from .functional import Configuration, State, eval_f, evaluate
from .studyfile import StudyConfigFile, gen_circle, gen_lattice, gen_random


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def num(v: float) -> str:
    """Shortest decimal string that reads back to the same double."""
    return repr(float(v))


def _pair(text: str):
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected x,y but got {text!r}") from exc
    return a, b


def _floats(count: int):
    def parse(text: str):
        try:
            vals = [float(t) for t in text.split(",")]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers") from exc
        if len(vals) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers")
        return vals

    return parse


# helpers ---------------------------------------------------------------------


def _load(args) -> StudyConfigFile:
    if not args.config:
        raise UsageError("--config is required")
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            return StudyConfigFile.loads(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {args.config}: {exc.strerror}") from exc


def _configuration(args) -> Configuration:
    return _load(args).configuration(allow_any_m=args.override_m_range)


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _center(cfg: Configuration):
    r = critical.bounding_rectangle(cfg)
    return 0.5 * (r.x_min + r.x_max), 0.5 * (r.y_min + r.y_max)


def _owpt_params(study: StudyConfigFile) -> owpt.OwptParams:
    if study.semi_angle_deg is not None:
        semi = study.semi_angle_deg
    else:
        ml = study.exponent - 3.0
        if ml <= 0:
            raise ConfigurationError("power model needs m > 3")
        semi = math.degrees(math.acos(2.0 ** (-1.0 / ml)))
    block = study.owpt
    if block is None:
        return owpt.OwptParams(semi_angle=semi)
    return owpt.OwptParams(area=block.area_m2, semi_angle=semi, fov=block.fov_deg, led_power=block.led_power_w)


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header: Sequence[str], rows: Sequence[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(num(v) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _cp_row(p: critical.CriticalPoint):
    return [p.state.x, p.state.y, p.f, p.eig[0], p.eig[1], p.kind.value]


# commands --------------------------------------------------------------------


def cmd_gen(args):
    if args.kind == "circle":
        study = gen_circle(args.n if args.n is not None else 20, args.r, args.semi_angle)
    elif args.kind == "lattice":
        study = gen_lattice(
            args.per_row, args.dx, args.cross_gap, args.array_gap, args.pair_gap, args.layout, args.semi_angle
        )
    else:
        _require(args, "n")
        study = gen_random(args.n, args.extent, args.seed, args.semi_angle)
    _emit(args, study.dumps())


def cmd_eval(args):
    _require(args, "h", "at")
    cfg = _configuration(args)
    st = State(args.at[0], args.at[1], args.h)
    d = evaluate(cfg, st)
    eig, _ = critical.symmetric_eigen2(d.f_xx, d.f_xy, d.f_yy)
    out = {
        "x": st.x,
        "y": st.y,
        "h": st.h,
        "f": d.f,
        "gradient": [float(v) for v in d.grad],
        "hessian": [[d.f_xx, d.f_xy], [d.f_xy, d.f_yy]],
        "eigenvalues": list(eig),
        "dF_dh": [float(v) for v in d.dF_dh],
        "dF_dm": [float(v) for v in d.dF_dm],
    }
    if args.format == "json":
        _emit(args, _json(out))
    else:
        rows = [
            ["f", d.f, ""],
            ["gradient", float(d.grad[0]), float(d.grad[1])],
            ["hessian_row1", d.f_xx, d.f_xy],
            ["hessian_row2", d.f_xy, d.f_yy],
            ["eigenvalues", eig[0], eig[1]],
            ["dF_dh", float(d.dF_dh[0]), float(d.dF_dh[1])],
            ["dF_dm", float(d.dF_dm[0]), float(d.dF_dm[1])],
        ]
        _emit(args, _csv(["quantity", "a", "b"], rows, [f"x={num(st.x)} y={num(st.y)} h={num(st.h)}"]))


def cmd_solve(args):
    _require(args, "h")
    cfg = _configuration(args)
    x0 = args.at if args.at is not None else _center(cfg)
    p = critical.newton_solve(cfg, args.h, x0)
    if args.format == "json":
        _emit(args, _json(_cp_dict(p)))
    else:
        _emit(args, _csv(["x", "y", "f", "lam1", "lam2", "kind"], [_cp_row(p)]))


def _cp_dict(p: critical.CriticalPoint) -> dict:
    return {
        "x": p.state.x,
        "y": p.state.y,
        "h": p.state.h,
        "f": p.f,
        "eig": list(p.eig),
        "kind": p.kind.value,
        "residual": p.residual,
    }


def cmd_scan(args):
    _require(args, "h")
    cfg = _configuration(args)
    pts = critical.find_critical_points(cfg, args.h, grid_size=args.seed_grid)
    if args.format == "json":
        _emit(args, _json([_cp_dict(p) for p in pts]))
    else:
        _emit(args, _csv(["x", "y", "f", "lam1", "lam2", "kind"], [_cp_row(p) for p in pts]))


def _branch(args, cfg):
    _require(args, "h_from", "h_to")
    x0 = args.at if args.at is not None else _center(cfg)
    start = critical.newton_solve(cfg, args.h_from, x0)
    return continuation.continue_branch(cfg, start, args.h_to)


def _event_row(cfg, e: continuation.BifurcationEvent):
    return [e.s, e.state.h, e.state.x, e.state.y, eval_f(cfg, e.state), e.eig[0], e.eig[1], e.kind.value]


def cmd_continue(args):
    cfg = _configuration(args)
    br = _branch(args, cfg)
    rows = [(p.s, 0, [p.s, p.state.h, p.state.x, p.state.y, p.f, p.eig[0], p.eig[1], p.kind.value]) for p in br.points]
    rows += [(e.s, 1, _event_row(cfg, e)) for e in br.events]
    rows.sort(key=lambda r: (r[0], r[1]))
    if args.format == "json":
        keys = ["s", "h", "x", "y", "f", "lam1", "lam2", "kind"]
        _emit(args, _json({"termination": br.termination, "rows": [dict(zip(keys, r[2])) for r in rows]}))
    else:
        _emit(args, _csv(["s", "h", "x", "y", "f", "lam1", "lam2", "kind"], [r[2] for r in rows]))


def cmd_bifurcations(args):
    cfg = _configuration(args)
    br = _branch(args, cfg)
    header = ["s", "h", "x", "y", "kind", "null_x", "null_y", "h_accuracy"]
    rows = []
    for e in br.events:
        for v in e.null_dirs:
            rows.append([e.s, e.state.h, e.state.x, e.state.y, e.kind.value, float(v[0]), float(v[1]), e.h_accuracy])
    if args.format == "json":
        _emit(args, _json([dict(zip(header, r)) for r in rows]))
    else:
        _emit(args, _csv(header, rows))


def cmd_powermap(args):
    _require(args, "h")
    study = _load(args)
    cfg = study.configuration(allow_any_m=True)
    params = _owpt_params(study)
    if args.extent is not None:
        ext = args.extent
    else:
        r = critical.bounding_rectangle(cfg)
        pad = 0.1 * max(r.width, r.height, 0.1)
        ext = [r.x_min - pad, r.x_max + pad, r.y_min - pad, r.y_max + pad]
    pm = owpt.power_map(params, cfg, args.h, ext, (args.resolution, args.resolution))
    comments = [
        f"extents={num(ext[0])},{num(ext[1])},{num(ext[2])},{num(ext[3])}",
        f"resolution={args.resolution},{args.resolution}",
        f"h={num(args.h)}",
    ]
    rows = [[x, y, pm.values[j, i]] for j, y in enumerate(pm.ys) for i, x in enumerate(pm.xs)]
    _emit(args, _csv(["x", "y", "watts"], rows, comments))


def cmd_hsweep(args):
    _require(args, "h_from", "h_to")
    study = _load(args)
    cfg = study.configuration(allow_any_m=True)
    params = _owpt_params(study)
    recv = args.at if args.at is not None else _center(cfg)
    sw = owpt.h_sweep(params, cfg, recv, (args.h_from, args.h_to), args.steps, args.geometric)
    arg = sw.interior_argmax
    comments = [f"interior_argmax={num(arg) if arg is not None else 'none'}"]
    _emit(args, _csv(["h", "watts"], list(zip(sw.h, sw.watts)), comments))


def cmd_bound(args):
    cfg = _configuration(args)
    out = {"uniqueness_bound": critical.uniqueness_bound(cfg), "rho_max": critical.max_corner_distance(cfg)}
    try:
        r = symmetry.circle_radius(cfg, _center(cfg))
        out["circle_critical_height"] = symmetry.circle_critical_height(r, cfg.m)
    except ValueError:
        pass
    if args.format == "json":
        _emit(args, _json(out))
    else:
        _emit(args, "".join(f"{k}={num(v)}\n" for k, v in out.items()))


def cmd_check_symmetry(args):
    study = _load(args)
    cfg = study.configuration(allow_any_m=args.override_m_range)
    center = _center(cfg)
    h = args.h if args.h is not None else 0.5 * max(cfg.diameter(), 1.0)
    hint = study.symmetry or {}
    if "dn" in hint:
        n = int(hint["dn"])
    elif hint.get("z2z2"):
        n = 2
    else:
        n = symmetry.detect_dihedral_order(cfg, center)
    rows = []
    ok = True
    if n:
        samples = symmetry.sample_states(cfg, args.samples)
        cert = symmetry.certify(cfg, symmetry.dn_elements(n), h, samples, center)
        ok = cert.ok
        rows.append([f"D{n}", cert.residual, cert.scale, cert.relative, "pass" if cert.ok else "fail"])
    if args.format == "json":
        keys = ["group", "residual", "scale", "relative", "status"]
        _emit(args, _json([dict(zip(keys, r)) for r in rows]))
    else:
        _emit(args, _csv(["group", "residual", "scale", "relative", "status"], rows))
    if not ok:
        raise EquivarianceError(f"D{n} residual above tolerance")


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config")
    common.add_argument("--h", type=float)
    common.add_argument("--h-from", type=float)
    common.add_argument("--h-to", type=float)
    common.add_argument("--at", type=_pair)
    common.add_argument("--seed-grid", type=int, default=32)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--override-m-range", action="store_true")

    p = _Parser(prog="ledmax", description="Maximizers of the LED energy-supply functional.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="write a configuration file")
    g.add_argument("kind", choices=("circle", "lattice", "random"))
    g.add_argument("--n", type=int)
    g.add_argument("--r", type=float, default=1.2)
    g.add_argument("--per-row", type=int, default=112)
    g.add_argument("--dx", type=float, default=0.01)
    g.add_argument("--cross-gap", type=float, default=0.02)
    g.add_argument("--array-gap", type=float, default=0.1)
    g.add_argument("--pair-gap", type=float, default=0.01)
    g.add_argument("--layout", choices=("paired", "rows"), default="paired")
    g.add_argument("--extent", type=float, default=2.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--semi-angle", type=float, default=70.0)
    g.set_defaults(func=cmd_gen)

    for name, func, text in [
        ("eval", cmd_eval, "f and derivatives at a state"),
        ("solve", cmd_solve, "Newton from a seed"),
        ("scan", cmd_scan, "multistart critical-point census"),
        ("continue", cmd_continue, "branch CSV"),
        ("bifurcations", cmd_bifurcations, "events along a branch"),
        ("bound", cmd_bound, "uniqueness height"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.set_defaults(func=func)

    sp = sub.add_parser("powermap", parents=[common], help="received power on a grid")
    sp.add_argument("--extent", type=_floats(4), help="x_min,x_max,y_min,y_max")
    sp.add_argument("--resolution", type=int, default=101)
    sp.set_defaults(func=cmd_powermap)

    sp = sub.add_parser("hsweep", parents=[common], help="received power versus h")
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--geometric", action="store_true")
    sp.set_defaults(func=cmd_hsweep)

    sp = sub.add_parser("check-symmetry", parents=[common], help="equivariance residual report")
    sp.add_argument("--samples", type=int, default=100)
    sp.set_defaults(func=cmd_check_symmetry)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"ledmax: error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"ledmax: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

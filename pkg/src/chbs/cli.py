"""Experiment drivers: single runs, parameter sweeps, paired runs, selftest.

Config files are flat ``key = value`` lines with ``#`` comments.  All
outputs are UTF-8 text; floating point values are printed with 17
significant digits so repeated runs with the same config and seed are
bit-identical.
"""

import argparse
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import diagnostics, diskfem, graphs, reference, stepper
from .errors import (ChbsError, GridMismatch, MeanMismatch, ParseError,
                     UnknownKey)

_MASK64 = (1 << 64) - 1
_SEED_FALLBACK = 0x9E3779B97F4A7C15


def xorshift64_uniform(seed, count):
    """Reproducible uniforms in [0, 1) from the 64-bit xorshift update.

    State update: x ^= x << 13; x ^= x >> 7; x ^= x << 17 (mod 2^64),
    seeded with the given value (0 is replaced by a fixed odd constant).
    The k-th output is the updated state divided by 2^64.
    """
    x = int(seed) & _MASK64
    if x == 0:
        x = _SEED_FALLBACK
    out = np.empty(count)
    for k in range(count):
        x ^= (x << 13) & _MASK64
        x ^= x >> 7
        x ^= (x << 17) & _MASK64
        out[k] = x / 2.0 ** 64
    return out


@dataclass
class RunConfig:
    """Fully resolved run configuration with defaults applied."""

    mesh_rings: int = 40
    mesh_sectors: int = 160
    mesh_file: str = ""
    potential: str = "regular"
    c1: float = 2.0
    c2: float = 1.0
    rho: float = 1.0
    c0: float = 0.0
    tau: float = 0.1
    sigma: float = 0.1
    eps: float = 0.1
    h: float = 1e-3
    t_final: float = 0.25
    ic: str = "random(0.1, 1)"
    source_f: str = "zero"
    source_g: str = "zero"
    out_dir: str = "out"
    stride: int = 1
    strict_guard: bool = False
    strong_checks: bool = False
    ratio_cap: float = 1e3
    newton_tol: float = 1e-10
    newton_max: int = 50


_BOOL_WORDS = {"true": True, "yes": True, "1": True,
               "false": False, "no": False, "0": False}

_RANGES = {
    "tau": (0.0, 1.0),
    "sigma": (0.0, 1.0),
    "eps": (1e-300, 1.0),
    "h": (1e-300, math.inf),
    "t_final": (1e-300, math.inf),
    "c1": (1.0 + 1e-12, math.inf),
    "c2": (1e-300, math.inf),
    "rho": (1e-300, math.inf),
    "c0": (0.0, math.inf),
    "ratio_cap": (0.0, math.inf),
    "newton_tol": (1e-300, math.inf),
}


def parse_config(path):
    """Parse a flat key = value config file into a RunConfig.

    Unknown keys, duplicate keys, type mismatches and out-of-range values
    are errors carrying the offending line number.
    """
    defaults = RunConfig()
    fields = {name: type(getattr(defaults, name))
              for name in defaults.__dict__}
    seen = {}
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", line=lineno)
            key, _, text = line.partition("=")
            key = key.strip().replace("-", "_")
            text = text.strip()
            if key not in fields:
                raise UnknownKey("unknown key %r" % key, line=lineno)
            if key in seen:
                raise ParseError("duplicate key %r (first at line %d)"
                                 % (key, seen[key]), line=lineno)
            seen[key] = lineno
            typ = fields[key]
            try:
                if typ is bool:
                    if text.lower() not in _BOOL_WORDS:
                        raise ValueError(text)
                    val = _BOOL_WORDS[text.lower()]
                elif typ is int:
                    val = int(text)
                elif typ is float:
                    val = float(text)
                else:
                    val = text
            except ValueError:
                raise ParseError("bad value %r for key %r" % (text, key),
                                 line=lineno) from None
            if key in _RANGES:
                lo, hi = _RANGES[key]
                if not lo <= val <= hi:
                    raise ParseError(
                        "value %s for %r outside [%g, %g]"
                        % (text, key, lo, hi), line=lineno)
            values[key] = val
    cfg = replace(defaults, **values)
    if cfg.potential not in ("regular", "log", "obstacle"):
        raise ParseError("unknown potential preset %r" % cfg.potential)
    if cfg.stride < 1:
        raise ParseError("stride must be at least 1")
    return cfg


def _parse_preset(text):
    """Split 'name(a, b)' into (name, [a, b]); bare names get no args."""
    text = text.strip()
    if "(" not in text:
        return text, []
    if not text.endswith(")"):
        raise ParseError("malformed preset %r" % text)
    name, _, inner = text[:-1].partition("(")
    args = [a.strip() for a in inner.split(",")] if inner.strip() else []
    try:
        return name.strip(), [float(a) for a in args]
    except ValueError:
        raise ParseError("non-numeric preset argument in %r" % text) from None


def build_mesh(cfg):
    if cfg.mesh_file:
        mesh = diskfem.load_mesh(cfg.mesh_file)
        diskfem.validate_mesh(mesh)
        return mesh
    return diskfem.gen_disk_mesh(cfg.mesh_rings, cfg.mesh_sectors)


def build_pair(cfg):
    return graphs.preset_pair(cfg.potential, c1=cfg.c1, c2=cfg.c2,
                              rho=cfg.rho, c0=cfg.c0)


def build_initial(cfg, mesh):
    """Evaluate the initial-condition preset on the mesh vertices."""
    name, args = _parse_preset(cfg.ic)
    xy = mesh.vertices
    if name == "constant":
        (a,) = args or (0.0,)
        return np.full(mesh.n_bulk, float(a))
    if name == "radial-bump":
        a, r0 = (args + [0.5])[:2] if args else (1.0, 0.5)
        rsq = (xy ** 2).sum(axis=1)
        out = np.zeros(mesh.n_bulk)
        inside = rsq < r0 ** 2
        out[inside] = a * np.exp(1.0 - r0 ** 2 / (r0 ** 2 - rsq[inside]))
        return out
    if name == "random":
        a = args[0] if args else 0.1
        seed = int(args[1]) if len(args) > 1 else 1
        u = xorshift64_uniform(seed, mesh.n_bulk)
        return a * (2.0 * u - 1.0)
    raise ParseError("unknown initial-condition preset %r" % name)


def build_source(text, size):
    """Source presets: zero, constant(a), ramp(a) with f(t) = a t."""
    name, args = _parse_preset(text)
    if name == "zero":
        return None
    if name == "constant":
        (a,) = args or (0.0,)
        return np.full(size, float(a))
    if name == "ramp":
        (a,) = args or (1.0,)
        return lambda t: np.full(size, float(a) * t)
    raise ParseError("unknown source preset %r" % text)


def build_params(cfg):
    return stepper.SchemeParams(h=cfg.h, t_final=cfg.t_final, tau=cfg.tau,
                                sigma=cfg.sigma, eps=cfg.eps,
                                newton_tol=cfg.newton_tol,
                                newton_max=cfg.newton_max)


def build_problem(cfg, ops):
    pair = build_pair(cfg)
    phi0 = build_initial(cfg, ops.mesh)
    f = build_source(cfg.source_f, ops.mesh.n_bulk)
    g = build_source(cfg.source_g, ops.mesh.n_bdry)
    return stepper.problem_data(ops, phi0, pair, f=f, g=g)


def _write_summary(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def execute_run(cfg, out_dir=None, echo=print):
    """Validate, run and write outputs; returns (exit_code, trajectory)."""
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    try:
        mesh = build_mesh(cfg)
    except ParseError as exc:
        echo("mesh error: %s" % exc)
        return 2, None
    ops = diskfem.assemble(mesh)
    params = build_params(cfg)
    data = build_problem(cfg, ops)
    report = stepper.validate(data, params, ops, strong=cfg.strong_checks)
    summary = ["config potential=%s mesh=%dx%d h=%.17g t_final=%.17g"
               % (cfg.potential, cfg.mesh_rings, cfg.mesh_sectors,
                  cfg.h, cfg.t_final)]
    if report.strong_norms:
        summary.append("strong-check norms: "
                       + " ".join("%.17g" % v for v in report.strong_norms)
                       + " plateau=%s" % report.strong_plateau)
    if not report.ok:
        for v in report.violations:
            echo("validation: %s" % v)
        summary.extend("validation: %s" % v for v in report.violations)
        _write_summary(os.path.join(out, "summary.txt"), summary)
        return 2, None
    guard = stepper.step_guard(params, data.pair)
    if not guard.ok:
        msg = ("step guard violated: h=%.3g, h_max=%.3g%s"
               % (params.h, guard.h_max,
                  " (%s)" % guard.reason if guard.reason else ""))
        if cfg.strict_guard:
            echo(msg + " [strict mode: refusing to run]")
            summary.append(msg + " [strict]")
            _write_summary(os.path.join(out, "summary.txt"), summary)
            return 2, None
        echo("warning: " + msg)
        summary.append("warning: " + msg)

    records = []
    hook = diagnostics.record_hook(records, data.pair, params, ops,
                                   stride=cfg.stride)
    traj = stepper.run(data, params, ops, hooks=(hook,))
    diagnostics.write_csv(records, os.path.join(out, "run.csv"))
    stepper.save_trajectory(traj, os.path.join(out, "checkpoints.txt"),
                            stride=cfg.stride)
    if not traj.ok:
        msg = ("solver failure at step %d: %s"
               % (traj.failed_step, traj.failure))
        echo(msg)
        summary.append(msg)
        _write_summary(os.path.join(out, "summary.txt"), summary)
        return 3, traj
    summary.append("steps=%d newton_iters_total=%d"
                   % (len(traj.states) - 1,
                      sum(r.newton_iters for r in traj.reports[1:])))
    summary.append("outside_theory=%s" % traj.outside_theory)
    _write_summary(os.path.join(out, "summary.txt"), summary)
    return 0, traj


def cmd_run(cfg, echo=print):
    code, _ = execute_run(cfg, echo=echo)
    return code


def _sweep_member_configs(cfg, axis, ladder):
    members = []
    for val in ladder:
        if axis == "h":
            member = replace(cfg, h=val)
        elif axis == "eps":
            member = replace(cfg, eps=val)
        elif axis == "visc":
            member = replace(cfg, tau=val, sigma=val)
        else:
            raise ValueError("unknown sweep axis %r" % axis)
        members.append(member)
    return members


def _run_member(args):
    cfg, out = args
    code, traj = execute_run(cfg, out_dir=out, echo=lambda *_: None)
    return code, traj


def cmd_sweep(cfg, axis, ladder, workers=1, echo=print):
    """Run a decreasing ladder along one axis and emit a convergence table."""
    ladder = list(ladder)
    if len(ladder) < 3 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        echo("ladder must be strictly decreasing with at least 3 values")
        return 2
    if axis == "h":
        for a, b in zip(ladder, ladder[1:]):
            if abs(a / b - round(a / b)) > 1e-9:
                echo("h ladder members must nest (integer ratios)")
                return 2
    members = _sweep_member_configs(cfg, axis, ladder)
    out_root = cfg.out_dir
    os.makedirs(out_root, exist_ok=True)
    jobs = [(m, os.path.join(out_root, "member_%02d" % i))
            for i, m in enumerate(members)]
    results = []
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_member, jobs))
    else:
        results = [_run_member(job) for job in jobs]

    rows = []
    trajs = []
    any_failed = False
    for (member, out), (code, traj) in zip(jobs, results):
        trajs.append(traj if code in (0, 3) else None)
        if code != 0:
            any_failed = True
        row = {"value": getattr(member, "h" if axis == "h" else
                                ("eps" if axis == "eps" else "tau")),
               "status": code}
        if traj is not None and traj.ok:
            ops = diskfem.assemble(build_mesh(member))
            m0 = diskfem.mean_bulk(ops, traj.states[0].phi)
            row["mass_gap"] = abs(
                diskfem.mean_bulk(ops, traj.states[-1].phi) - m0)
            if axis == "eps":
                row["violation"] = diagnostics.obstacle_violation(traj).max
                pair = build_pair(member)
                row["apriori_max"] = diagnostics.apriori_monitor(
                    traj, pair, build_params(member), ops).max_value()
        rows.append(row)

    ops = diskfem.assemble(build_mesh(cfg))
    dists = []
    for i in range(len(trajs) - 1):
        a, b = trajs[i], trajs[i + 1]
        if a is None or b is None or not (a.ok and b.ok):
            dists.append(None)
            continue
        try:
            rep = diagnostics.cauchy_distance(a, b, ops)
        except GridMismatch as exc:
            echo("distance %d/%d skipped: %s" % (i, i + 1, exc))
            dists.append(None)
            continue
        dists.append(rep)

    finite = [d.c_h for d in dists if d is not None]
    if finite and max(finite) < 1e-14:
        rate_text = "exact"
    elif len([d for d in dists if d is not None]) >= 2:
        logs = [(math.log(ladder[i]), math.log(d.c_h))
                for i, d in enumerate(dists) if d is not None and d.c_h > 0]
        if len(logs) >= 2:
            xs = np.array([p[0] for p in logs])
            ys = np.array([p[1] for p in logs])
            rate = float(np.polyfit(xs, ys, 1)[0])
            rate_text = "%.17g" % rate
        else:
            rate_text = "exact"
    else:
        rate_text = "n/a"

    table_path = os.path.join(out_root, "table.csv")
    cols = ["value", "status", "mass_gap", "violation", "apriori_max",
            "c_h", "l2v"]
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i, row in enumerate(rows):
            d = dists[i] if i < len(dists) else None
            vals = [
                "%.17g" % row["value"],
                "%d" % row["status"],
                "%.17g" % row["mass_gap"] if "mass_gap" in row else "",
                "%.17g" % row["violation"] if "violation" in row else "",
                "%.17g" % row["apriori_max"] if "apriori_max" in row else "",
                "%.17g" % d.c_h if d is not None else "",
                "%.17g" % d.l2v if d is not None else "",
            ]
            fh.write(",".join(vals) + "\n")
        fh.write("# fitted_rate=%s\n" % rate_text)
    echo("sweep axis=%s rate=%s table=%s" % (axis, rate_text, table_path))
    for i, d in enumerate(dists):
        if d is not None:
            echo("  pair %d-%d: c_h=%.6g l2v=%.6g" % (i, i + 1, d.c_h, d.l2v))
    return 1 if any_failed else 0


def cmd_contdep(cfg_a, cfg_b, echo=print):
    """Run a perturbation pair and test the stability ratio."""
    for name in ("mesh_rings", "mesh_sectors", "mesh_file", "potential",
                 "c1", "c2", "rho", "c0", "tau", "sigma", "eps", "h",
                 "t_final", "stride"):
        if getattr(cfg_a, name) != getattr(cfg_b, name):
            echo("configs must differ only in initial data and sources "
                 "(field %r differs)" % name)
            return 2
    mesh = build_mesh(cfg_a)
    ops = diskfem.assemble(mesh)
    params = build_params(cfg_a)
    data_a = build_problem(cfg_a, ops)
    data_b = build_problem(cfg_b, ops)
    for data in (data_a, data_b):
        rep = stepper.validate(data, params, ops)
        if not rep.ok:
            for v in rep.violations:
                echo("validation: %s" % v)
            return 2
    traj_a = stepper.run(data_a, params, ops)
    traj_b = stepper.run(data_b, params, ops)
    if not (traj_a.ok and traj_b.ok):
        echo("solver failure during paired runs")
        return 3
    try:
        rep = diagnostics.cont_dep(traj_a, traj_b, data_a, data_b, ops)
    except MeanMismatch as exc:
        echo("mean mismatch: %s" % exc)
        return 2
    ratio = "n/a" if rep.ratio is None else "%.17g" % rep.ratio
    echo("lhs=%.17g rhs=%.17g ratio=%s" % (rep.lhs, rep.rhs, ratio))
    if rep.lhs <= cfg_a.ratio_cap * rep.rhs or rep.lhs == 0.0:
        return 0
    echo("stability ratio exceeded cap %.3g" % cfg_a.ratio_cap)
    return 1


def _selftest_graphs():
    eps_grid = (0.5, 0.1, 0.02)
    for name in ("regular", "log", "obstacle"):
        pair = graphs.preset_pair(name)
        g = pair.bulk
        span = 1.2 if name == "log" else 2.5
        pts = np.linspace(-span, span, 33)
        for eps in eps_grid:
            for r in pts:
                j = graphs.resolvent(g, eps, float(r))
                jb = reference.resolvent_bisect(g, eps, float(r))
                if abs(j - jb) > 1e-10:
                    return False, "resolvent mismatch %s eps=%g r=%g" \
                        % (name, eps, r)
            if abs(graphs.yosida_bulk(g, eps, 0.0)) != 0.0:
                return False, "yosida nonzero at origin"
            rep = graphs.check_compatibility(pair, eps, 401)
            if not rep.ok:
                return False, str(rep)
    return True, "resolvents, origin values, compatibility"


def _selftest_diskfem(mesh_file=None):
    try:
        if mesh_file:
            mesh = diskfem.load_mesh(mesh_file)
            diskfem.validate_mesh(mesh)
        else:
            mesh = diskfem.gen_disk_mesh(8, 24)
            diskfem.validate_mesh(mesh)
    except ChbsError as exc:
        return False, "mesh: %s" % exc
    ops = diskfem.assemble(mesh)
    one = np.ones(mesh.n_bulk)
    if float(np.abs(ops.K_bulk @ one).max()) > 1e-12:
        return False, "bulk stiffness kernel broken"
    if float(np.abs(ops.K_bdry @ np.ones(mesh.n_bdry)).max()) > 1e-12:
        return False, "boundary stiffness kernel broken"
    rng = np.random.default_rng(3)
    v = rng.standard_normal(mesh.n_bulk)
    v -= diskfem.mean_bulk(ops, v)
    w = rng.standard_normal(mesh.n_bulk)
    w -= diskfem.mean_bulk(ops, w)
    lhs = float(w @ (ops.M_bulk @ diskfem.green_bulk(ops, v)))
    rhs = float(v @ (ops.M_bulk @ diskfem.green_bulk(ops, w)))
    if abs(lhs - rhs) > 1e-10 * max(abs(lhs), 1e-6):
        return False, "green adjoint identity broken"
    return True, "kernel, adjoint, topology"


def _tiny_problem(name="regular", eps=0.5, h=1e-3):
    mesh = diskfem.gen_disk_mesh(2, 8)
    ops = diskfem.assemble(mesh)
    pair = graphs.preset_pair(name)
    params = stepper.SchemeParams(h=h, t_final=4 * h, tau=0.1, sigma=0.1,
                                  eps=eps)
    rng = np.random.default_rng(5)
    phi0 = 0.1 * rng.uniform(-1.0, 1.0, mesh.n_bulk)
    data = stepper.problem_data(ops, phi0, pair)
    return mesh, ops, pair, params, data


def _selftest_stepper_oracle():
    _, ops, _, params, data = _tiny_problem()
    state = stepper.initial_state(data, ops)
    fn = np.zeros(ops.mesh.n_bulk)
    gn = np.zeros(ops.mesh.n_bdry)
    new, _ = stepper.solve_step(state, data, params, ops, fn=fn, gn=gn)
    phi_o, mu_o, w_o = reference.fixed_point_step(state, data, params, ops,
                                                  fn, gn)
    worst = max(float(np.abs(new.phi - phi_o).max()),
                float(np.abs(new.mu - mu_o).max()),
                float(np.abs(new.w - w_o).max()))
    if worst > 1e-8:
        return False, "oracle gap %.3e" % worst
    return True, "dense fixed-point agreement %.3e" % worst


def _selftest_tool3():
    _, ops, _, params, data = _tiny_problem()
    traj = stepper.run(data, params, ops)
    if not traj.ok:
        return False, "run failed"
    lhs, rhs = diagnostics.interpolant_gap_identity(traj, ops)
    rel = abs(lhs - rhs) / max(rhs, 1e-300)
    if rel > 1e-12:
        return False, "identity deviation %.3e" % rel
    return True, "max deviation %.3e" % rel


def _selftest_conservation():
    _, ops, pair, params, data = _tiny_problem()
    traj = stepper.run(data, params, ops)
    if not traj.ok:
        return False, "run failed"
    m0 = diskfem.mean_bulk(ops, traj.states[0].phi)
    mg0 = diskfem.mean_bdry(ops, traj.states[0].psi)
    drift = max(abs(diskfem.mean_bulk(ops, s.phi + params.h * s.mu) - m0)
                for s in traj.states)
    driftg = max(abs(diskfem.mean_bdry(ops, s.psi + params.h * s.w) - mg0)
                 for s in traj.states)
    if drift > 1e-9 or driftg > 1e-9:
        return False, "mass drift %.3e / %.3e" % (drift, driftg)
    lyap = [diagnostics.lyapunov(s, pair, params.eps, params.h, ops)
            for s in traj.states]
    if any(b > a + 1e-10 for a, b in zip(lyap, lyap[1:])):
        return False, "dissipation violated"
    return True, "mass drift %.3e / %.3e, dissipation ok" % (drift, driftg)


def cmd_selftest(mesh_file=None, echo=print):
    groups = [
        ("graphs", _selftest_graphs),
        ("diskfem", lambda: _selftest_diskfem(mesh_file)),
        ("stepper-oracle", _selftest_stepper_oracle),
        ("interpolant-identity", _selftest_tool3),
        ("mass-dissipation", _selftest_conservation),
    ]
    failed = False
    for name, fn in groups:
        try:
            ok, detail = fn()
        except ChbsError as exc:
            ok, detail = False, str(exc)
        echo("%-22s %s  (%s)" % (name, "pass" if ok else "FAIL", detail))
        failed = failed or not ok
    return 1 if failed else 0


def cmd_mesh_info(cfg, echo=print):
    mesh = build_mesh(cfg)
    diskfem.validate_mesh(mesh)
    areas = mesh.triangle_areas()
    lengths = mesh.boundary_lengths()
    echo("vertices %d (boundary %d), triangles %d" %
         (mesh.n_bulk, mesh.n_bdry, mesh.triangles.shape[0]))
    echo("area %.17g (gap to disk %.3e)" %
         (mesh.area(), abs(mesh.area() - math.pi)))
    echo("boundary length %.17g (gap to circle %.3e)" %
         (mesh.boundary_length(), abs(mesh.boundary_length() - 2 * math.pi)))
    echo("triangle area min %.3e max %.3e" %
         (float(areas.min()), float(areas.max())))
    echo("segment length min %.3e max %.3e" %
         (float(lengths.min()), float(lengths.max())))
    return 0


def _load_config(path):
    if path is None:
        return RunConfig()
    return parse_config(path)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="chbs",
        description="Bulk-surface Cahn-Hilliard solver and experiment "
                    "drivers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single validated run")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--strict-guard", action="store_true")

    p_sweep = sub.add_parser("sweep", help="ladder sweep along one axis")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--axis", choices=("h", "eps", "visc"),
                         required=True)
    p_sweep.add_argument("--ladder", required=True,
                         help="comma-separated decreasing values")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", default=None)

    p_cd = sub.add_parser("contdep", help="paired-run stability test")
    p_cd.add_argument("--config", action="append", required=True,
                      help="give twice: baseline and perturbed")

    p_st = sub.add_parser("selftest", help="run the invariant suite")
    p_st.add_argument("--mesh-file", default=None, help=argparse.SUPPRESS)

    p_mi = sub.add_parser("mesh-info", help="mesh statistics")
    p_mi.add_argument("--config", default=None)
    p_mi.add_argument("--mesh-file", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load_config(args.config)
            if args.out:
                cfg = replace(cfg, out_dir=args.out)
            if args.strict_guard:
                cfg = replace(cfg, strict_guard=True)
            return cmd_run(cfg)
        if args.command == "sweep":
            cfg = _load_config(args.config)
            if args.out:
                cfg = replace(cfg, out_dir=args.out)
            ladder = [float(x) for x in args.ladder.split(",") if x.strip()]
            return cmd_sweep(cfg, args.axis, ladder, workers=args.workers)
        if args.command == "contdep":
            if len(args.config) != 2:
                parser.error("contdep needs exactly two --config arguments")
            return cmd_contdep(parse_config(args.config[0]),
                               parse_config(args.config[1]))
        if args.command == "selftest":
            return cmd_selftest(mesh_file=args.mesh_file)
        if args.command == "mesh-info":
            cfg = _load_config(args.config)
            if args.mesh_file:
                cfg = replace(cfg, mesh_file=args.mesh_file)
            return cmd_mesh_info(cfg)
    except ParseError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except ChbsError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    parser.error("unknown command")


if __name__ == "__main__":
    sys.exit(main())

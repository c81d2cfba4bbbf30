"""Command-line entry point.

Exit codes: 0 success, 1 configuration or input error, 2 kinematic failure
(unreachable point, joint limit, no FK solution, command out of range),
3 empty workspace, 4 mesh parse failure, 5 unreachable experiment trajectory.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from . import device, harness
from ._format import fixed
from .config import ConfigError, RunConfig, load_config, resolved_servo
from .kinematics import KinematicsError, forward_kinematics, inverse_kinematics
from .mesh import MeshError, load_mesh
from .pipeline import render_path
from .rendering import write_contact_csv
from .stats import ZeroWithinVariance, one_way_anova
from .workspace import EmptyWorkspace, operating_height, workspace_sample

EXIT_CONFIG, EXIT_KINEMATICS, EXIT_EMPTY, EXIT_MESH, EXIT_EXPERIMENT = 1, 2, 3, 4, 5


def _fmt(v: float) -> str:
    return fixed(v)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_ik(cfg: RunConfig, args) -> int:
    try:
        th = inverse_kinematics(cfg.servo.restrict(cfg.geometry), (args.x, args.y, args.z))
    except KinematicsError as exc:
        _err(str(exc))
        return EXIT_KINEMATICS
    print(" ".join(_fmt(t) for t in th))
    return 0


def cmd_fk(cfg: RunConfig, args) -> int:
    try:
        p = forward_kinematics(cfg.geometry, (args.t0, args.t1, args.t2))
    except KinematicsError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_KINEMATICS
    print(" ".join(_fmt(v) for v in p))
    return 0


def cmd_encode(cfg: RunConfig, args) -> int:
    try:
        line = device.encode_command((args.t0, args.t1, args.t2),
                                     cfg.servo.theta_min, cfg.servo.theta_max)
    except device.OutOfRange as exc:
        _err(f"out of range: {exc}")
        return EXIT_KINEMATICS
    sys.stdout.flush()
    sys.stdout.buffer.write(line)
    sys.stdout.buffer.flush()
    return 0


def cmd_workspace(cfg: RunConfig, args) -> int:
    try:
        ws = workspace_sample(cfg.servo.restrict(cfg.geometry), cfg.grid)
    except EmptyWorkspace as exc:
        _err(f"empty workspace: {exc}")
        return EXIT_EMPTY
    ws.to_csv(cfg.out_dir / "workspace.csv")
    print(f"z0={_fmt(ws.z0)} disc_radius={_fmt(ws.disc_radius)}")
    return 0


def _read_path(path):
    times, pts = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "x", "y", "z"]:
            raise ConfigError(f"{path}: expected header 't,x,y,z'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, x, y, z = (float(v) for v in row)
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: expected four numbers") from None
            times.append(t)
            pts.append((x, y, z))
    return np.array(times), np.array(pts).reshape(-1, 3)


def cmd_render(cfg: RunConfig, args) -> int:
    try:
        mesh = load_mesh(args.mesh)
    except MeshError as exc:
        _err(f"mesh parse failure: {exc}")
        return EXIT_MESH
    except OSError as exc:
        _err(f"cannot read mesh: {exc}")
        return EXIT_MESH
    times, pts = _read_path(args.path)
    geometry = cfg.servo.restrict(cfg.geometry)
    servo = resolved_servo(cfg)
    angles, rest = device.central_pose(geometry, cfg.grid)
    samples = render_path(mesh, times, pts, cfg.stiffness, geometry, servo, angles, rest,
                          cfg.apex_height, cfg.cone_angle)
    write_contact_csv(cfg.out_dir / "render.csv", times,
                      [s.error if s.force is None else s.force for s in samples])
    with open(cfg.out_dir / "commands.txt", "wb") as fh:
        for s in samples:
            if s.command is not None:
                fh.write(s.command)
    contacts = sum(1 for s in samples if s.force is not None and s.force.contact)
    errors = sum(1 for s in samples if s.error is not None)
    peak = max((float(np.linalg.norm(s.force.vector)) for s in samples if s.force is not None),
               default=0.0)
    print(f"samples={len(samples)} contacts={contacts} errors={errors} max_force={_fmt(peak)}")
    return 0


def cmd_experiment(cfg: RunConfig, args) -> int:
    exp = cfg.experiment
    geometry = cfg.servo.restrict(cfg.geometry)
    servo = resolved_servo(cfg)
    height = exp.height if exp.height is not None else operating_height(geometry, cfg.grid)
    anchor = np.array([0.0, 0.0, height])
    duration = exp.revolutions * 2.0 * math.pi / exp.angular_rate
    traces = []
    for idx, radius in enumerate(exp.radii):
        traj = harness.circular_trajectory(radius, height, exp.angular_rate, duration,
                                           exp.sample_rate)
        rng = np.random.default_rng([cfg.seed, idx])
        try:
            trace = harness.run_force_experiment(geometry, servo, cfg.stiffness, traj, anchor,
                                                 exp.noise_level, rng)
        except harness.TrajectoryUnreachable as exc:
            _err(f"radius {radius}: {exc}")
            return EXIT_EXPERIMENT
        trace.to_csv(cfg.out_dir / f"trace_r{radius * 1000.0:07.3f}mm.csv")
        traces.append(trace)

    stats_lines = ["radius," + harness.TraceStats.CSV_HEADER]
    report = [f"height={_fmt(height)}", f"stiffness={_fmt(cfg.stiffness)}",
              f"torque_limit={_fmt(servo.torque_limit)}", f"seed={cfg.seed}"]
    groups = []
    for trace in traces:
        r = trace.metadata["radius"]
        try:
            st = harness.trace_stats(trace)
        except harness.DegenerateTrace:
            report.append(f"[radius={_fmt(r)}]\ndegenerate=1")
            print(f"radius={_fmt(r)} degenerate")
            continue
        groups.append(harness.cycle_deltas(trace))
        stats_lines.append(f"{_fmt(r)},{st.csv_row()}")
        report.append(f"[radius={_fmt(r)}]\n" + st.report().rstrip("\n"))
        print(f"radius={_fmt(r)} delta={_fmt(st.delta)} amplitude_x={_fmt(st.amplitude[0])} "
              f"amplitude_y={_fmt(st.amplitude[1])}")

    anova_lines = ["source,ss,df,ms,f,p"]
    usable = [g for g in groups if len(g) >= 2]
    if len(usable) >= 2:
        try:
            res = one_way_anova(usable, harness.DELTA_RESOLUTION)
            anova_lines += [
                f"between,{_fmt(res.ss_between)},{res.df_between},{_fmt(res.ms_between)},"
                f"{_fmt(res.f)},{_fmt(res.p)}",
                f"within,{_fmt(res.ss_within)},{res.df_within},{_fmt(res.ms_within)},,",
            ]
            summary = f"anova f={_fmt(res.f)} p={_fmt(res.p)}"
        except ZeroWithinVariance:
            anova_lines.append("between,,,,inf,")
            summary = "anova ZeroWithinVariance"
    else:
        summary = "anova skipped (fewer than two groups with two complete revolutions)"
    report.append("[anova]\n" + summary.replace("anova ", ""))
    print(summary)

    (cfg.out_dir / "stats.csv").write_text("\n".join(stats_lines) + "\n")
    (cfg.out_dir / "anova.csv").write_text("\n".join(anova_lines) + "\n")
    (cfg.out_dir / "report.txt").write_text("\n".join(report) + "\n")
    return 0


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deltafinger", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=_seed, default=None, help="noise seed (u64)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ik", help="joint angles for a position")
    for name in ("x", "y", "z"):
        p.add_argument(name, type=float)
    p.set_defaults(func=cmd_ik)

    p = sub.add_parser("fk", help="position for joint angles")
    for name in ("t0", "t1", "t2"):
        p.add_argument(name, type=float)
    p.set_defaults(func=cmd_fk)

    p = sub.add_parser("encode", help="wire-protocol command line for joint angles")
    for name in ("t0", "t1", "t2"):
        p.add_argument(name, type=float)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("workspace", help="sample the workspace grid")
    p.set_defaults(func=cmd_workspace)

    p = sub.add_parser("render", help="render contact forces along a finger path")
    p.add_argument("mesh")
    p.add_argument("path", help="CSV with header t,x,y,z")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("experiment", help="simulated circular-trajectory force experiment")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        cfg = load_config(args.config, args.out, args.seed)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, args)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: verify, flatness, reconstruct, horizon, convergence.

Exit codes: 0 pass, 1 usage or configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, frames, horizons, reconstruction
from .config import ConfigError, build, config_hash, load, make_grid, prepare
from .convergence import coarse_counts, judge, study
from .reconstruction import ReconstructionError
from .serialize import csv_text, dumps
from .structure import verify_structure

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="warpframe", description="Hypersurfaces of warped products: checks and reconstruction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="NAME")
    src.add_argument("--config", metavar="FILE")
    common.add_argument("--override", metavar="K=V", action="append", default=[])
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--strict", action="store_true")
    common.add_argument("--json", action="store_true", help="print the JSON report instead of a summary")
    sub.add_parser("verify", parents=[common], help="structure conditions")
    sub.add_parser("flatness", parents=[common], help="connection forms and flatness")
    rec = sub.add_parser("reconstruct", parents=[common], help="integrate the frame and rebuild the immersion")
    rec.add_argument("--b0", default="auto", metavar="auto|paper|FILE")
    sub.add_parser("horizon", parents=[common], help="mean-curvature norm of pi-level leaves")
    conv = sub.add_parser("convergence", parents=[common], help="observed orders under refinement")
    conv.add_argument("--resolutions", default="50,100,200", metavar="N1,N2,...")
    return p


def _counts(cfg):
    return tuple(cfg["grid"]["counts"])


def _two_level(cfg, fields_of):
    fine = make_grid(cfg)
    coarse = fine.resized(coarse_counts(fine.counts))
    tol = cfg["tolerances"]
    rows = study([coarse, fine], fields_of)
    return {r.name: judge(r, tol["tau_exact"], tol["tau_struct"], tol["order_min"]) for r in rows}


def structure_block(cfg) -> tuple:
    """Per-condition summaries at the configured grid plus refinement verdicts."""
    cache = {}

    def fields_of(grid):
        rep = verify_structure(build(cfg, grid.counts).data)
        cache[grid.counts] = rep
        return {k: r.field for k, r in rep.residuals.items()}

    verdicts = _two_level(cfg, fields_of)
    fine = cache[_counts(cfg)]
    block = {k: {**fine.residuals[k].summary(), **verdicts[k].summary()} for k in fine.residuals}
    return block, all(v.passed for v in verdicts.values())


def _gate(cfg, report) -> bool:
    block, ok = structure_block(cfg)
    report["structure_gate"] = {"passed": ok, "failed": sorted(k for k, v in block.items() if not v["passed"])}
    if not ok:
        print(f"warning: structure checks failed: {', '.join(report['structure_gate']['failed'])}", file=sys.stderr)
    return ok or not cfg["flags"]["strict"]


def _require_frames(cfg, data):
    if data.signs.eps_normal != data.signs.eps:
        raise ConfigError("/signs/epsilon_normal", "frame assembly needs epsilon_normal == epsilon")


def cmd_verify(cfg):
    block, ok = structure_block(cfg)
    lines = [f"{k:16s} max={v['max']:.3e} order={_fmt_order(v['observed_order'])} "
             f"{'ok' if v['passed'] else 'FAIL'}" for k, v in block.items()]
    return {"conditions": block, "passed": ok}, {}, lines


def _fmt_order(x):
    return "n/a" if x is None else f"{x:.2f}"


def cmd_flatness(cfg):
    report = {}
    run = build(cfg)
    _require_frames(cfg, run.data)
    if not _gate(cfg, report):
        report["passed"] = False
        return report, {}, ["structure gate failed (strict)"]
    tol = cfg["tolerances"]
    cache = {}

    def fields_of(grid):
        data = build(cfg, grid.counts).data
        bundle = frames.build_connection_forms(data)
        flat = frames.flatness_residual(bundle.Upsilon, grid, bundle)
        cache[grid.counts] = (bundle, flat)
        return {"flatness": flat.field, "first_structure": flat.first_field}

    verdicts = _two_level(cfg, fields_of)
    bundle, flat = cache[_counts(cfg)]
    G = bundle.G
    algebra = {
        "skew_Omega": frames.g_skew_error(bundle.Omega, G),
        "skew_X": frames.g_skew_error(bundle.X, G),
        "skew_Upsilon": frames.g_skew_error(bundle.Upsilon, G),
        "T_omega_identity": frames.t_omega_identity(bundle),
    }
    ok = all(v.passed for v in verdicts.values())
    ok &= max(algebra["skew_Omega"], algebra["skew_X"], algebra["skew_Upsilon"]) <= 1e-12
    ok &= algebra["T_omega_identity"] <= tol["tau_exact"]
    golden = {}
    if run.scenario is not None and run.scenario.forms and cfg["A_scale"] == 1.0:
        inner = bundle.grid.interior()
        mine = {"Omega": bundle.Omega, "X": bundle.X, "Upsilon": bundle.Upsilon}
        golden = {k: float(np.max(np.abs(mine[k] - v)[inner])) for k, v in sorted(run.scenario.forms.items())}
        ok &= all(v <= 1e-8 for v in golden.values())
    report.update({
        "flatness": {"max": flat.max, "mean": flat.mean, "argmax": list(flat.argmax),
                     "per_entry_max": flat.per_entry_max(), "first_structure_max": flat.first_structure},
        "refinement": {k: v.summary() for k, v in verdicts.items()},
        "algebraic": algebra,
        "closed_form_difference": golden,
        "passed": bool(ok),
    })
    lines = [f"flatness max residual {flat.max:.3e} at node {flat.argmax} "
             f"(order {_fmt_order(verdicts['flatness'].order)})",
             f"first structure equation max residual {flat.first_structure:.3e}",
             "per-entry max |dU + U^U|:"]
    lines += ["  " + " ".join(f"{x:9.2e}" for x in row) for row in flat.per_entry_max()]
    lines += [f"{k}: {v:.3e}" for k, v in algebra.items()]
    lines += [f"closed-form {k} difference: {v:.3e}" for k, v in golden.items()]
    return report, {}, lines


def _load_b0(choice, run, T_row, Gd):
    if choice == "auto":
        return reconstruction.initial_frame(T_row, Gd), "auto"
    if choice == "paper":
        if run.scenario is None or run.scenario.B is None:
            raise ConfigError("/scenario", "--b0 paper needs a named scenario with a closed-form frame")
        return None, "paper"
    try:
        vals = np.asarray(json.loads(Path(choice).read_text()), dtype=float).ravel()
    except (OSError, ValueError) as exc:
        raise ConfigError("", f"cannot read initial frame from {choice}: {exc}") from exc
    m = len(Gd)
    if vals.size != m * m:
        raise ConfigError("", f"initial frame needs {m * m} entries, got {vals.size}")
    return vals.reshape(m, m), "file"


def cmd_reconstruct(cfg, b0_spec):
    report = {}
    run = build(cfg)
    data = run.data
    _require_frames(cfg, data)
    if not _gate(cfg, report):
        report["passed"] = False
        return report, {}, ["structure gate failed (strict)"]
    tol, flags = cfg["tolerances"], cfg["flags"]
    grid = data.grid
    bundle = frames.build_connection_forms(data)
    origin = tuple(cfg.get("origin") or [c // 2 for c in grid.counts])
    Gd = data.signs.G_diag
    B0, source = _load_b0(b0_spec, run, bundle.T_ext[origin], Gd)
    if source == "paper":
        B0 = run.scenario.B[origin]
    try:
        frame_check = reconstruction.check_frame(B0, bundle.T_ext[origin], Gd)
    except ValueError as exc:
        raise ConfigError("", f"initial frame rejected: {exc}") from exc
    field = reconstruction.integrate_field(bundle, B0, origin, flags["projection_interval"])
    sample = reconstruction.build_chi(field.B, data)
    imm = reconstruction.verify_immersion(sample, data, flags["immersion_fd_order"])
    leaves = reconstruction.leaf_structure(data, tol["tau_leaf"])

    checks = {r.name: r.max for r in imm.residuals()}
    ok = field.drift.max_group <= tol["tau_drift"]
    ok &= float(field.group_error.max()) <= tol["tau_grp"]
    ok &= checks["quadric"] <= tol["tau_quad"] and checks["pi_identity"] <= tol["tau_exact"]
    ok &= all(checks[k] <= tol["tau_imm"] for k in ("isometry", "dt_decomposition", "shape_operator", "normal"))
    closed = {}
    if source == "paper":
        closed = {"B": float(np.max(np.abs(field.B - run.scenario.B))),
                  "chi": float(np.max(np.abs(sample.chi - run.scenario.chi)))}
    t = sample.chi[..., -1]
    report.update({
        "origin": list(origin),
        "b0": {"source": source, **frame_check},
        "drift": {"pre_projection_max": field.drift.max_group, "row_pin_max": field.drift.max_pin,
                  "final_group_error_max": float(field.group_error.max()),
                  "final_row_error_max": float(field.pin_error.max())},
        "immersion": {r.name: r.summary() for r in imm.residuals()},
        "closed_form_difference": closed,
        "leaf_structure": leaves.kind,
        "t_coordinate": {"mean": float(t.mean()), "std": float(t.std())},
        "passed": bool(ok),
    })
    lines = [f"b0 {source} det={frame_check['det']:+.6f}",
             f"drift before projection {field.drift.max_group:.3e}"]
    lines += [f"{r.name:16s} max={r.max:.3e}" for r in imm.residuals()]
    lines += [f"closed-form {k} difference {v:.3e}" for k, v in closed.items()]
    lines.append(f"leaf structure: {leaves.kind}")
    return report, {"chi.csv": _chi_csv(sample, field, grid)}, lines


def _chi_csv(sample, field, grid):
    m = sample.chi.shape[-1]
    idx_names = ["i", "j", "k"][: grid.dim]
    header = idx_names + list(grid.names) + [f"chi_{a}" for a in range(m)] + [f"normal_{a}" for a in range(m)] + ["group_error"]
    coords = grid.coords()
    rows = []
    for node in np.ndindex(*grid.shape):
        rows.append(list(node) + [c[node] for c in coords] + list(sample.chi[node]) + list(sample.normal[node])
                    + [field.group_error[node]])
    return csv_text(header, rows)


def cmd_horizon(cfg):
    data = build(cfg).data
    if data.signs.n != 3 or data.signs.eps != -1:
        raise ConfigError("/signs", "horizon analysis needs n = 3 and epsilon = -1 (use graph-sphere3)")
    tol = cfg["tolerances"]
    scan = horizons.trapped_scan(data, tol["tau_trap"], tol["tau_deg"])
    header = ["label", "t", "nodes", "masked", "max_abs_Hsq", "Hsq_min", "Hsq_max", "verdict"]
    rows = [[lf.label, lf.t, lf.nodes, lf.masked, lf.max_abs_Hsq, lf.Hsq_min, lf.Hsq_max, lf.verdict]
            for lf in scan.leaves]
    crossings = horizons.null_crossings(scan)
    report = {
        "leaves": len(scan.leaves),
        "flagged": [lf.t for lf in scan.flagged()],
        "null_nodes": int(scan.null.sum()),
        "masked_nodes": int(scan.mask.sum()),
        "non_spacelike_nodes": int((~scan.spacelike).sum()),
        "sign_change_crossings": crossings,
        "tau_trap": scan.tau_trap,
        "passed": True,
    }
    lines = [f"{len(scan.leaves)} leaves, {len(scan.flagged())} with null mean curvature at tau={scan.tau_trap:g}",
             f"masked nodes {report['masked_nodes']}, non-spacelike {report['non_spacelike_nodes']}",
             "sign changes of <H,H> at pi = " + ", ".join(f"{t:.6f}" for t in crossings)]
    return report, {"leaves.csv": csv_text(header, rows)}, lines


def cmd_convergence(cfg, resolutions):
    try:
        res = [int(x) for x in resolutions.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --resolutions {resolutions!r}") from exc
    if len(res) < 2 or any(r < 5 for r in res):
        raise UsageError("--resolutions needs at least two values >= 5")
    base = make_grid(cfg)
    grids = [base.resized(r) for r in res]
    with_frames = None

    def fields_of(grid):
        nonlocal with_frames
        data = build(cfg, grid.counts).data
        out = {k: r.field for k, r in verify_structure(data).residuals.items()}
        with_frames = data.signs.eps_normal == data.signs.eps
        if with_frames:
            bundle = frames.build_connection_forms(data)
            out["flatness"] = frames.flatness_residual(bundle.Upsilon, grid).field
        return out

    rows = study(grids, fields_of)
    order_min = cfg["tolerances"]["order_min"]
    ok = all(r.exact or (r.fitted is not None and r.fitted >= order_min) for r in rows)
    table = {r.name: {**r.summary(), "in_band_1.8_2.2": r.in_band()} for r in rows}
    lines = [f"{'check':16s} " + " ".join(f"N={n:<9d}" for n in res) + " orders"]
    for r in rows:
        orders = "exact" if r.exact else " ".join(f"{o:.2f}" for o in r.pairwise) + f" fit={r.fitted:.2f}"
        lines.append(f"{r.name:16s} " + " ".join(f"{x:.3e}  " for x in r.residuals) + orders)
    return {"resolutions": res, "table": table, "passed": bool(ok)}, {}, lines


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        raw = load(args.config) if args.config else {"scenario": {"name": args.scenario}}
        overrides = list(args.override) + (["flags.strict=true"] if args.strict else [])
        cfg = prepare(raw, overrides)
        if args.command == "verify":
            report, files, lines = cmd_verify(cfg)
        elif args.command == "flatness":
            report, files, lines = cmd_flatness(cfg)
        elif args.command == "reconstruct":
            report, files, lines = cmd_reconstruct(cfg, args.b0)
        elif args.command == "horizon":
            report, files, lines = cmd_horizon(cfg)
        else:
            report, files, lines = cmd_convergence(cfg, args.resolutions)
    except (ConfigError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReconstructionError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_FAIL

    report = {"command": args.command, "version": __version__, "config_hash": config_hash(cfg),
              "config": cfg, **report}
    text = dumps(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.json").write_text(text)
        for name, body in files.items():
            (out / name).write_text(body)
    if args.json:
        sys.stdout.write(text)
    else:
        for line in lines:
            print(line)
        print("PASS" if report["passed"] else "FAIL")
    return EXIT_OK if report["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

"""Command line: build potentials, find critical points, GC values, flows, disk tables.

    python main.py potential crit data/octahedron.toml --seed 0 --out-dir reports
"""

import argparse
import csv
import json
import logging
import os
import sys
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv()

import disklift  # noqa: E402
import ghflow  # noqa: E402
import polytope  # noqa: E402
import potential  # noqa: E402
import problem_file as pf  # noqa: E402
import quadric  # noqa: E402

# -------------------- CONFIG --------------------------------
REPORT_DIR = os.getenv("REPORT_DIR", "reports")
LOG_LEVEL  = os.getenv("LOG_LEVEL", "INFO")

EXIT_OK, EXIT_INVALID, EXIT_UNCONVERGED = 0, 2, 3

log = logging.getLogger("main")


class Outputs:
    """Report plus CSV side files in one directory."""

    def __init__(self, out_dir: Path, stem: str):
        self.out_dir = out_dir
        self.stem = stem
        self.files: List[str] = []

    def csv(self, suffix: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        name = f"{self.stem}-{suffix}.csv"
        with open(self.out_dir / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        self.files.append(name)

    def report(self, body: Dict[str, Any]) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{self.stem}.json"
        body = dict(body, files=list(self.files))
        path.write_text(json.dumps(body, sort_keys=True, indent=2))
        log.info("✅ report written to %s", path)
        return path


def _c(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


# ------------------------------------------------------------
# 1) potential build | crit | family
# ------------------------------------------------------------
def _potential_problem(problem, args) -> pf.PotentialProblem:
    if not isinstance(problem, pf.PotentialProblem):
        raise ValueError(f"kind: expected 'potential', got {problem.kind!r}")
    update: Dict[str, Any] = {}
    if args.lam is not None:
        update["lam"] = args.lam
    overrides = {"seed": args.seed, "starts": args.starts, "tolerance": args.tolerance,
                 "t_samples": args.t_samples}
    update["solver"] = pf.resolve_solver(problem.solver, overrides)
    return problem.model_copy(update=update)


def cmd_potential_build(problem, args, out: Outputs) -> int:
    problem = _potential_problem(problem, args)
    F = pf.facet_system(problem)
    truncation = None if problem.truncation is None else pf.parse_rational(problem.truncation, F.scale, "truncation")
    P = potential.build_potential(F, truncation)
    L = potential.laurent_form(P)
    text = potential.format_laurent(L, F.scale)
    log.info("🟢 PO = %s", text)
    out.csv("terms", ["facet", "exponent", "coefficient"],
            [[t.facet + 1, " ".join(map(str, t.exponent)), potential.format_element(t.coefficient, F.scale)]
             for t in P.terms])
    out.report({
        "command": "potential build",
        "input": pf.dump_problem(problem),
        "laurent": text,
        "truncation": None if not P.terms else str(P.terms[0].coefficient.truncation),
        "terms": [{"facet": t.facet + 1, "exponent": list(t.exponent), "coefficient": t.coefficient.to_records()}
                  for t in P.terms],
    })
    return EXIT_OK


def cmd_potential_crit(problem, args, out: Outputs) -> int:
    problem = _potential_problem(problem, args)
    F = pf.facet_system(problem)
    P = potential.build_potential(F)
    cfg = pf.solver_config(problem.solver)
    report = potential.find_critical_points(P, t_samples=cfg.t_samples, cfg=cfg)

    rows = []
    for sample in report.samples:
        for i, point in enumerate(sample.points):
            rows.append([sample.t, i] + [v for y in point.y for v in _c(y)]
                        + [point.residual, abs(point.hessian_det)])
    header = ["t", "index"] + [f"y{j + 1}_{part}" for j in range(F.dim) for part in ("re", "im")] \
        + ["residual", "abs_det_hessian"]
    out.csv("points", header, rows)

    for sample in report.samples:
        nondeg = sum(p.nondegenerate for p in sample.points)
        families = [l.direction for l in sample.loci if l.confirmed]
        log.info("🟢 t=%g: %d nondegenerate points, %d families %s", sample.t, nondeg, len(families), families)
    for cert in report.certificates:
        log.info("✅ certificate: valuation %s (%s)", cert.snapped or cert.valuation, cert.label)

    out.report({"command": "potential crit", "input": pf.dump_problem(problem), "result": report.to_dict()})
    if not report.converged:
        log.error("❌ no converged critical point at some t sample")
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_potential_family(problem, args, out: Outputs) -> int:
    problem = _potential_problem(problem, args)
    if not problem.families:
        raise ValueError("families: the problem lists no families")
    F = pf.facet_system(problem)
    P = potential.build_potential(F)
    results = []
    for fam in problem.families:
        res = potential.verify_family(P, fam.components, samples=problem.solver.family_samples,
                                      free=fam.free, t=fam.t, seed=problem.solver.seed, name=fam.name)
        log.info("%s family %s: max residual %.3e", "✅" if res.passed else "❌", fam.name, res.max_residual)
        results.append(res.__dict__ | {"free": list(res.free)})
    out.report({"command": "potential family", "input": pf.dump_problem(problem), "families": results})
    return EXIT_OK


# ------------------------------------------------------------
# 2) polytope vertices | gc | contains
# ------------------------------------------------------------
def _vertex_strings(points) -> List[List[str]]:
    return [[str(x) for x in v] for v in points]


def cmd_polytope_vertices(problem, args, out: Outputs) -> int:
    problem = _potential_problem(problem, args)
    F = pf.facet_system(problem)
    verts = polytope.vertices(F)
    log.info("🟢 %d vertices", len(verts))
    out.report({"command": "polytope vertices", "input": pf.dump_problem(problem),
                "facets": polytope.facet_records(F), "vertices": _vertex_strings(verts),
                "centroid": [str(x) for x in polytope.centroid(verts)]})
    return EXIT_OK


def cmd_polytope_contains(problem, args, out: Outputs) -> int:
    problem = _potential_problem(problem, args)
    if not problem.points:
        raise ValueError("points: the problem lists no points to test")
    F = pf.facet_system(problem)
    checks = []
    for i, point in enumerate(problem.points):
        u = [pf.parse_rational(x, F.scale, f"points[{i}].u") for x in point.u]
        if len(u) != F.dim:
            raise ValueError(f"points[{i}].u: expected {F.dim} coordinates, got {len(u)}")
        checks.append({"u": [str(x) for x in u], "contains": polytope.contains(F, u),
                       "interior": polytope.contains(F, u, strict=True),
                       "energies": [str(polytope.ell(F, j, u)) for j in range(len(F.facets))]})
    out.report({"command": "polytope contains", "input": pf.dump_problem(problem), "points": checks})
    return EXIT_OK


def cmd_polytope_gc(problem, args, out: Outputs) -> int:
    if not isinstance(problem, pf.GCProblem):
        raise ValueError(f"kind: expected 'gc', got {problem.kind!r}")
    if args.lam is not None:
        problem = problem.model_copy(update={"lam": args.lam})
    lam = pf.scale_of(problem)
    top = [pf.parse_rational(x, lam, f"top_row[{i}]") for i, x in enumerate(problem.top_row)]
    pattern, F = polytope.gc_polytope(problem.n, top)
    verts = polytope.vertices(F)
    # the comparison with the quadric moment polytope needs n >= 4
    rank_one = problem.n >= 4 and top[0] > 0 and all(x == 0 for x in top[1:])
    body = {
        "command": "polytope gc",
        "input": pf.dump_problem(problem),
        "parity": pattern.parity,
        "coordinates": list(F.labels),
        "forced": {polytope.entry_label(k): str(v) for k, v in sorted(pattern.forced.items())},
        "facets": polytope.facet_records(F),
        "vertices": _vertex_strings(verts),
        "equals_moment_polytope": polytope.gc_equals_moment_polytope(problem.n, top[0]) if rank_one else None,
    }
    out.report(body)
    return EXIT_OK


# ------------------------------------------------------------
# 3) quadric gc-values | segre
# ------------------------------------------------------------
def _quadric_problem(problem, args) -> pf.QuadricProblem:
    if not isinstance(problem, pf.QuadricProblem):
        raise ValueError(f"kind: expected 'quadric', got {problem.kind!r}")
    update: Dict[str, Any] = {"seed": args.seed if args.seed is not None
                              else (problem.seed if problem.seed is not None else potential.SEED)}
    if args.lam is not None:
        update["lam"] = args.lam
    return problem.model_copy(update=update)


def cmd_quadric_gc_values(problem, args, out: Outputs) -> int:
    problem = _quadric_problem(problem, args)
    lam = pf.scale_of(problem)
    n = problem.n
    points = [quadric.ProjPoint.of([pf.parse_complex(c, f"points[{i}]") for c in row], float(lam))
              for i, row in enumerate(problem.points)]
    rng = np.random.default_rng([problem.seed, n])
    points += [quadric.sample_quadric_point(rng, n, problem.rank, float(lam)) for _ in range(problem.samples)]
    if not points:
        raise ValueError("points: give explicit points or samples > 0")
    if any(p.n != n for p in points):
        raise ValueError(f"points: every point needs {n} coordinates")

    _, F = polytope.gc_polytope(n, [lam] + [0] * (n // 2 - 1))
    rows, records = [], []
    for i, p in enumerate(points):
        nu = quadric.moment_nu(p, n)
        gc = quadric.gc_values(p, n, n)
        inside = polytope.contains(F, gc.values, tol=1e-9)
        rows.append([i] + list(nu) + list(gc.values) + [inside])
        records.append({"x": [_c(c) for c in p.x], "nu": list(nu), "lambda1": list(gc.values), "in_polytope": inside})
    header = ["point"] + [f"nu_{k}" for k in range(2, n)] + [f"lambda1_{k}" for k in range(2, n)] + ["in_polytope"]
    out.csv("values", header, rows)
    log.info("✅ %d points, %d inside the GC polytope", len(rows), sum(r[-1] for r in rows))
    out.report({"command": "quadric gc-values", "input": pf.dump_problem(problem), "points": records})
    return EXIT_OK


def cmd_quadric_segre(problem, args, out: Outputs) -> int:
    problem = _quadric_problem(problem, args)
    lam = float(pf.scale_of(problem))
    images = []
    for i, pair in enumerate(problem.segre):
        z = [pf.parse_complex(c, f"segre[{i}].z") for c in pair.z]
        w = [pf.parse_complex(c, f"segre[{i}].w") for c in pair.w]
        p = quadric.segre(z, w, lam)
        images.append({"z": [_c(c) for c in z], "w": [_c(c) for c in w], "x": [_c(c) for c in p.x],
                       "quadric_defect": quadric.quadric_defect(p),
                       "involution_fixed": quadric.projectively_equal(p, quadric.involution(p))})
    if not images:
        raise ValueError("segre: the problem lists no (z, w) pairs")
    out.report({"command": "quadric segre", "input": pf.dump_problem(problem), "images": images})
    return EXIT_OK


# ------------------------------------------------------------
# 4) flow run
# ------------------------------------------------------------
def cmd_flow_run(problem, args, out: Outputs) -> int:
    if not isinstance(problem, pf.FlowProblem):
        raise ValueError(f"kind: expected 'flow', got {problem.kind!r}")
    update: Dict[str, Any] = {"flow": pf.resolve_flow(problem.flow),
                              "seed": args.seed if args.seed is not None
                              else (problem.seed if problem.seed is not None else potential.SEED)}
    if args.lam is not None:
        update["lam"] = args.lam
    problem = problem.model_copy(update=update)
    lam = float(pf.scale_of(problem))
    cfg = pf.flow_config(problem.flow, lam)

    starts = [ghflow.ChartPoint.of([pf.parse_complex(c, f"starts[{i}]") for c in row])
              for i, row in enumerate(problem.starts)]
    rng = np.random.default_rng([problem.seed, 4])
    starts += [ghflow.to_chart(p) for p in quadric.antidiagonal_points(rng, problem.sample_lagrangian, lam)]
    while len(starts) < len(problem.starts) + problem.sample_lagrangian + problem.sample_fiber:
        p = quadric.sample_quadric_point(rng, 4, 4, lam)
        try:
            c = ghflow.to_chart(p)
        except ValueError:
            continue
        if np.linalg.norm(c.array()) < 10.0:
            starts.append(c)
    if not starts:
        raise ValueError("starts: give explicit start points or sample counts")

    results = ghflow.transport_points(starts, problem.duration, cfg, reverse=problem.reverse)
    rows, summaries, failed = [], [], False
    for i, res in enumerate(results):
        if res.trajectory is None:
            failed = True
            summaries.append({"start": [_c(c) for c in res.start.x], "error": res.error})
            continue
        traj = res.trajectory
        for s in traj.samples:
            rows.append([i, s.s] + [v for c in s.x for v in _c(c)] + [s.f.real, s.f.imag, s.field_norm])
        start_p = ghflow.from_chart(res.start, lam)
        end_p = ghflow.from_chart(traj.end, lam)
        summaries.append({
            "start": [_c(c) for c in res.start.x],
            "end": [_c(c) for c in traj.end.x],
            "reason": traj.reason,
            "message": traj.message,
            "gap": traj.gap,
            "final_re_f": traj.samples[-1].f.real,
            "im_drift": traj.im_drift,
            "gc_start": list(quadric.gc_values(start_p, 4, 4).values),
            "nu_end": list(quadric.moment_nu(end_p, 4)),
        })
        failed = failed or traj.reason == "drift"
    header = ["trajectory", "s", "x1_re", "x1_im", "x2_re", "x2_im", "x3_re", "x3_im", "re_f", "im_f", "abs_V"]
    out.csv("trajectory", header, rows)
    out.report({"command": "flow run", "input": pf.dump_problem(problem), "trajectories": summaries})
    if failed:
        log.error("❌ some trajectories failed")
        return EXIT_UNCONVERGED
    return EXIT_OK


# ------------------------------------------------------------
# 5) disks classify
# ------------------------------------------------------------
def _row(row: disklift.ConfigurationRow) -> Dict[str, Any]:
    return {"anchor": row.anchor, "spheres": dict(row.spheres), "label": row.label, "status": row.status,
            "detail": row.detail, "certificate": row.certificate, "maslov": row.maslov}


def cmd_disks_classify(problem, args, out: Outputs) -> int:
    if not isinstance(problem, pf.DisksProblem):
        raise ValueError(f"kind: expected 'disks', got {problem.kind!r}")
    S = disklift.SurfaceBoundary.of([(c.id, c.self_intersection) for c in problem.curves])
    body: Dict[str, Any] = {"command": "disks classify", "input": pf.dump_problem(problem)}
    try:
        table = disklift.classify_cycle(S, max_multiplicity=problem.max_multiplicity)
        body["classification"] = [_row(r) for r in table.rows()]
        body["singular_liftable"] = len(table.singular)
    except disklift.CycleError as exc:
        log.warning("⚠️ cycle not classified: %s", exc)
        body["classification"] = None
        body["classification_note"] = str(exc)

    verdicts = []
    for i, cls in enumerate(problem.classes):
        a = disklift.DiskClass.make(problem.anchor, cls.base, cls.spheres)
        v = disklift.liftable(a, S, problem.max_multiplicity)
        verdicts.append({"class": {"base": cls.base, "spheres": cls.spheres}, "maslov": disklift.maslov(a, S),
                         "status": v.status, "detail": v.detail, "certificate": v.certificate, "moduli": v.moduli})
        log.info("🟢 class %d: %s %s", i, v.status, v.detail or v.certificate or "")
    body["verdicts"] = verdicts
    out.report(body)
    return EXIT_OK


COMMANDS = {
    ("potential", "build"): cmd_potential_build,
    ("potential", "crit"): cmd_potential_crit,
    ("potential", "family"): cmd_potential_family,
    ("polytope", "vertices"): cmd_polytope_vertices,
    ("polytope", "gc"): cmd_polytope_gc,
    ("polytope", "contains"): cmd_polytope_contains,
    ("quadric", "gc-values"): cmd_quadric_gc_values,
    ("quadric", "segre"): cmd_quadric_segre,
    ("flow", "run"): cmd_flow_run,
    ("disks", "classify"): cmd_disks_classify,
}


def _t_samples(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--t-samples: {text!r} is not a comma-separated list of numbers")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="problem file (.toml) or an earlier report (.json)")
    common.add_argument("--seed", type=int)
    common.add_argument("--t-samples", type=_t_samples, dest="t_samples")
    common.add_argument("--starts", type=int)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--out-dir", default=REPORT_DIR, dest="out_dir")
    common.add_argument("--lambda", dest="lam")

    parser = argparse.ArgumentParser(prog="toric-potential", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)
    for group in sorted({g for g, _ in COMMANDS}):
        sub = groups.add_parser(group).add_subparsers(dest="action", required=True)
        for g, action in COMMANDS:
            if g == group:
                sub.add_parser(action, parents=[common])
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK

    out = Outputs(Path(args.out_dir), f"{args.group}-{args.action}")
    try:
        problem = pf.load_problem(args.file)
        log.info("🚀 %s %s on %s", args.group, args.action, args.file)
        return COMMANDS[(args.group, args.action)](problem, args, out)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        log.error("❌ invalid problem file, field %s: %s", where, first["msg"])
        return EXIT_INVALID
    except tomllib.TOMLDecodeError as exc:
        log.error("❌ cannot parse %s: %s", args.file, exc)
        return EXIT_INVALID
    except (ValueError, FileNotFoundError) as exc:
        log.error("❌ %s", exc)
        return EXIT_INVALID
    except ghflow.FlowError as exc:
        log.error("❌ flow failed: %s", exc)
        return EXIT_UNCONVERGED


if __name__ == "__main__":
    sys.exit(run())

"""Problem files: TOML (or a previous JSON report) validated with pydantic."""

import json
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

import sympy as sp
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

import ghflow
import potential
from novikov import as_fraction
from polytope import FacetSystem, make_facet_system

Rational = Union[int, str]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# ------------------------------------------------------------
# Shared pieces
# ------------------------------------------------------------
class SolverModel(Strict):
    seed: Optional[int] = None
    t_samples: Optional[List[float]] = None
    starts: Optional[int] = Field(None, ge=1)
    tolerance: Optional[float] = Field(None, gt=0)
    max_iter: Optional[int] = Field(None, ge=1)
    valuation_tol: Optional[float] = Field(None, gt=0)
    family_samples: Optional[int] = Field(None, ge=1)


class FacetModel(Strict):
    normal: List[int] = Field(min_length=1)
    offset: Rational


class FamilyModel(Strict):
    name: str
    free: List[str] = ["y1"]
    components: Dict[str, str]
    t: float = Field(0.1, gt=0, lt=1)


class PointModel(Strict):
    u: List[Rational]


class SegreModel(Strict):
    z: List[str] = Field(min_length=2, max_length=2)
    w: List[str] = Field(min_length=2, max_length=2)


class CurveModel(Strict):
    id: str
    self_intersection: int


class ClassModel(Strict):
    base: int = 1
    spheres: Dict[str, int] = {}


class FlowSettings(Strict):
    rtol: Optional[float] = Field(None, gt=0)
    guard: Optional[float] = Field(None, gt=0)
    horizon: Optional[float] = Field(None, gt=0)
    drift_tol: Optional[float] = Field(None, gt=0)
    max_step: Optional[float] = Field(None, gt=0)


# ------------------------------------------------------------
# Problem kinds
# ------------------------------------------------------------
class PotentialProblem(Strict):
    kind: Literal["potential"]
    lam: Optional[Rational] = Field(None, alias="lambda")
    small_resolution: bool = False
    truncation: Optional[Rational] = None
    facets: List[FacetModel] = Field(min_length=1)
    families: List[FamilyModel] = []
    points: List[PointModel] = []
    solver: SolverModel = SolverModel()


class GCProblem(Strict):
    kind: Literal["gc"]
    n: int = Field(ge=3)
    lam: Optional[Rational] = Field(None, alias="lambda")
    top_row: List[Rational] = Field(min_length=1)


class QuadricProblem(Strict):
    kind: Literal["quadric"]
    n: int = Field(ge=3)
    lam: Rational = Field("1", alias="lambda")
    rank: Optional[int] = None
    samples: int = Field(0, ge=0)
    seed: Optional[int] = None
    points: List[List[str]] = []
    segre: List[SegreModel] = []


class FlowProblem(Strict):
    kind: Literal["flow"]
    lam: Rational = Field("1", alias="lambda")
    duration: float = Field(ge=0)
    reverse: bool = False
    starts: List[List[str]] = []
    sample_lagrangian: int = Field(0, ge=0)
    sample_fiber: int = Field(0, ge=0)
    seed: Optional[int] = None
    flow: FlowSettings = FlowSettings()


class DisksProblem(Strict):
    kind: Literal["disks"]
    curves: List[CurveModel] = Field(min_length=3)
    anchor: Dict[str, int] = {}
    classes: List[ClassModel] = []
    max_multiplicity: int = Field(3, ge=2)


Problem = Annotated[Union[PotentialProblem, GCProblem, QuadricProblem, FlowProblem, DisksProblem],
                    Field(discriminator="kind")]
PROBLEM = TypeAdapter(Problem)


def load_problem(path: Union[str, Path]):
    """Read a TOML problem, or the ``input`` table of an earlier JSON report."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        data = data.get("input", data)
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    return PROBLEM.validate_python(data)


def dump_problem(problem) -> Dict[str, Any]:
    return problem.model_dump(mode="json", by_alias=True)


# ------------------------------------------------------------
# Value parsing
# ------------------------------------------------------------
def parse_rational(value: Rational, lam: Optional[Fraction] = None, where: str = "value") -> Fraction:
    """Exact rational from ``3``, ``"p/q"`` or an expression in ``lam``."""
    local = {"lam": sp.Rational(lam.numerator, lam.denominator)} if lam is not None else {}
    try:
        expr = sp.sympify(str(value), locals=local)
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ValueError(f"{where}: cannot parse {value!r}") from exc
    if expr.free_symbols:
        raise ValueError(f"{where}: {value!r} uses {sorted(map(str, expr.free_symbols))} "
                         "(set 'lambda' to use lam)")
    if not expr.is_Rational:
        raise ValueError(f"{where}: {value!r} is not an exact rational")
    return as_fraction(expr)


def parse_complex(value: str, where: str = "value") -> complex:
    try:
        return complex(str(value).replace(" ", ""))
    except ValueError as exc:
        raise ValueError(f"{where}: {value!r} is not a complex number") from exc


def scale_of(problem) -> Optional[Fraction]:
    if problem.lam is None:
        return None
    lam = parse_rational(problem.lam, where="lambda")
    if lam <= 0:
        raise ValueError(f"lambda: must be positive, got {lam}")
    return lam


def facet_system(problem: PotentialProblem) -> FacetSystem:
    lam = scale_of(problem)
    dims = {len(f.normal) for f in problem.facets}
    if len(dims) != 1:
        raise ValueError(f"facets: normals have mixed lengths {sorted(dims)}")
    offsets = [parse_rational(f.offset, lam, f"facets[{i}].offset") for i, f in enumerate(problem.facets)]
    return make_facet_system([f.normal for f in problem.facets], offsets, scale=lam,
                             small_resolution=problem.small_resolution)


# ------------------------------------------------------------
# Configuration precedence: flag > file > environment > default
# ------------------------------------------------------------
def resolve_solver(file_solver: SolverModel, overrides: Dict[str, Any]) -> SolverModel:
    defaults = potential.SolverConfig()
    env = {
        "seed": defaults.seed,
        "t_samples": list(defaults.t_samples),
        "starts": defaults.starts,
        "tolerance": defaults.tolerance,
        "max_iter": defaults.max_iter,
        "valuation_tol": defaults.valuation_tol,
        "family_samples": potential.FAMILY_SAMPLES,
    }
    resolved = {}
    for key, fallback in env.items():
        flag = overrides.get(key)
        from_file = getattr(file_solver, key)
        resolved[key] = flag if flag is not None else (from_file if from_file is not None else fallback)
    return SolverModel(**resolved)


def solver_config(solver: SolverModel) -> potential.SolverConfig:
    return potential.SolverConfig(
        seed=solver.seed,
        t_samples=tuple(solver.t_samples),
        starts=solver.starts,
        tolerance=solver.tolerance,
        max_iter=solver.max_iter,
        valuation_tol=solver.valuation_tol,
    )


def resolve_flow(settings: FlowSettings) -> FlowSettings:
    defaults = ghflow.FlowConfig()
    return FlowSettings(
        rtol=settings.rtol if settings.rtol is not None else defaults.rtol,
        guard=settings.guard if settings.guard is not None else defaults.guard,
        horizon=settings.horizon if settings.horizon is not None else defaults.horizon,
        drift_tol=settings.drift_tol if settings.drift_tol is not None else defaults.drift_tol,
        max_step=settings.max_step if settings.max_step is not None else defaults.max_step,
    )


def flow_config(settings: FlowSettings, lam: float) -> ghflow.FlowConfig:
    return ghflow.FlowConfig(lam=lam, rtol=settings.rtol, atol=settings.rtol, guard=settings.guard,
                             horizon=settings.horizon, drift_tol=settings.drift_tol,
                             max_step=settings.max_step)

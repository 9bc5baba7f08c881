"""Validation cases, convergence studies, configuration, and file export.

The built-in cases solve problems with known closed-form answers so runs can
report true errors:

* ``gaussian1d`` / ``gaussian2d``: Poisson problem whose solution is
  ``phi = a exp(-|x|^2 / sigma^2) + b`` with matching analytic source and
  field, on a box with Dirichlet and symmetry faces.
* ``sp3demo``: three-group photoionization solve driven by a Gaussian
  emission profile.

Configuration is TOML, flat keys plus per-case tables; unknown keys are
rejected.  CSV output uses 17 significant digits.  Timing columns live in a
separate file so the primary outputs are byte-reproducible.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from . import assembly, mra, sp3
from .cells import Grid
from .errors import ConfigError
from .forest import Forest
from .linalg import SolverConfig, solve
from .sparse import SparseMatrix

log = logging.getLogger(__name__)

CASES = ("gaussian1d", "gaussian2d", "sp3demo")
_BC_NAMES = ("dirichlet", "neumann", "symmetry")


# -- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class GaussianParams:
    amplitude: float = 10.0
    offset: float = 20.0
    sigma: float = 0.05
    center: tuple[float, ...] = (0.0, 0.0)


@dataclass(frozen=True)
class Sp3DemoParams:
    p_o2: float = 150.0
    p_total: float = 760.0
    p_quench: float = 30.0
    efficiency: float = 0.1
    light_speed: float = 2.99792458e10
    source_amplitude: float = 1.0
    source_sigma: float = 0.02
    source_center: tuple[float, ...] = (0.0, 0.0)
    max_coupling_iter: int = 3
    coupling_tol: float = 1e-6
    neumann_check: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description; see DEFAULT_CONFIG_TOML for the schema."""

    case: str = "gaussian2d"
    lo: tuple[float, ...] = (0.0, 0.0)
    hi: tuple[float, ...] = (0.5, 0.5)
    roots: tuple[int, ...] = (1, 1)
    max_level: int = 6
    eta: float = 1e-4
    solver_method: str = "bicgstab"
    rel_tol: float | None = None    # None -> max(1e-3 * eta, 1e-12)
    abs_tol: float = 0.0
    max_iter: int = 50000
    gaussian: GaussianParams = GaussianParams()
    bc: tuple[tuple[str, str], ...] = (("symmetry", "dirichlet"),
                                       ("symmetry", "dirichlet"))
    study_levels: tuple[int, ...] = (4, 5, 6, 7, 8)
    study_etas: tuple[float, ...] = (1e-10,)
    sp3: Sp3DemoParams = Sp3DemoParams()
    out_dir: str = "out"
    threads: int = 1

    @property
    def dims(self) -> int:
        return len(self.roots)

    def solver_config(self) -> SolverConfig:
        rel = self.rel_tol
        if rel is None:
            rel = max(1e-3 * self.eta, 1e-12)
        return SolverConfig(method=self.solver_method, rel_tol=rel,
                            abs_tol=self.abs_tol, max_iter=self.max_iter)

    def grid(self, max_level: int | None = None) -> Grid:
        return Grid(dims=self.dims, n_roots=self.roots, lo=self.lo, hi=self.hi,
                    max_level=self.max_level if max_level is None else max_level)


DEFAULT_CONFIG_TOML = """\
# run description; every key shown here with its default
case = "gaussian2d"        # gaussian1d | gaussian2d | sp3demo
threads = 1                # 1 guarantees byte-reproducible outputs

[grid]
# lo / hi / roots default per case when omitted:
#   gaussian1d  lo [-0.5]       hi [0.5]       roots [1]
#   gaussian2d  lo [0.0, 0.0]   hi [0.5, 0.5]  roots [1, 1]
#   sp3demo     lo [-0.1, -0.1] hi [0.1, 0.1]  roots [1, 1]   (cm)
max_level = 6              # finest refinement level J

[mra]
eta = 1e-4                 # threshold; level thresholds are 2^(d(j-J)/2) * eta

[solver]
method = "bicgstab"        # bicgstab | cg | direct
rel_tol = 0.0              # 0 -> default max(1e-3 * eta, 1e-12)
abs_tol = 0.0
max_iter = 50000

[gaussian]                 # gaussian1d / gaussian2d case parameters
amplitude = 10.0
offset = 20.0
sigma = 0.05
center = [0.0, 0.0]

[bc]                       # per axis [low, high]: dirichlet | neumann | symmetry
x = ["symmetry", "dirichlet"]
y = ["symmetry", "dirichlet"]

[study]
levels = [4, 5, 6, 7, 8]   # max_level sweep, coarse to fine
etas = [1e-10]             # threshold sweep

[sp3]                      # sp3demo case parameters (cm, Torr)
p_o2 = 150.0
p_total = 760.0
p_quench = 30.0
efficiency = 0.1
light_speed = 2.99792458e10
source_amplitude = 1.0
source_sigma = 0.02
source_center = [0.0, 0.0]
max_coupling_iter = 3
coupling_tol = 1e-6
neumann_check = true

[output]
dir = "out"
"""

_SCHEMA: dict[str, set[str] | None] = {
    "": {"case", "threads"},
    "grid": {"lo", "hi", "roots", "max_level"},
    "mra": {"eta"},
    "solver": {"method", "rel_tol", "abs_tol", "max_iter"},
    "gaussian": {"amplitude", "offset", "sigma", "center"},
    "bc": {"x", "y", "z"},
    "study": {"levels", "etas"},
    "sp3": {"p_o2", "p_total", "p_quench", "efficiency", "light_speed",
            "source_amplitude", "source_sigma", "source_center",
            "max_coupling_iter", "coupling_tol", "neumann_check"},
    "output": {"dir"},
}


def _check_keys(data: Mapping, section: str) -> None:
    allowed = _SCHEMA.get(section)
    if allowed is None:
        raise ConfigError(f"unknown config section [{section}]")
    for key in data:
        if section == "" and isinstance(data[key], Mapping):
            _check_keys(data[key], key)
        elif key not in allowed:
            where = f"[{section}] " if section else ""
            raise ConfigError(f"unknown config key {where}{key!r}")


def _floats(val, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc


def _ints(val, name: str) -> tuple[int, ...]:
    out = []
    for v in val if isinstance(val, (list, tuple)) else [None]:
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"{name} must be a list of integers")
        out.append(v)
    return tuple(out)


def config_from_mapping(data: Mapping) -> RunConfig:
    """Validate a parsed config mapping and fill defaults."""
    _check_keys(data, "")
    base = RunConfig()
    case = data.get("case", base.case)
    if case not in CASES:
        raise ConfigError(f"case must be one of {CASES}, got {case!r}")

    grid = data.get("grid", {})
    roots = _ints(grid["roots"], "roots") if "roots" in grid else None
    if roots is None:
        roots = (1,) if case == "gaussian1d" else base.roots
    dims = len(roots)
    if case == "gaussian1d" and dims != 1:
        raise ConfigError("gaussian1d needs exactly one root count")
    if case in ("gaussian2d", "sp3demo") and dims != 2:
        raise ConfigError(f"{case} needs root counts for two axes")
    case_lo = {"gaussian1d": (-0.5,), "gaussian2d": base.lo,
               "sp3demo": (-0.1, -0.1)}
    case_hi = {"gaussian1d": (0.5,), "gaussian2d": base.hi,
               "sp3demo": (0.1, 0.1)}
    lo = _floats(grid["lo"], "lo") if "lo" in grid else case_lo[case]
    hi = _floats(grid["hi"], "hi") if "hi" in grid else case_hi[case]
    if len(lo) != dims or len(hi) != dims:
        raise ConfigError("lo and hi must match the number of root counts")
    max_level = grid.get("max_level", base.max_level)
    if not isinstance(max_level, int) or max_level < 0:
        raise ConfigError("max_level must be a nonnegative integer")

    eta = float(data.get("mra", {}).get("eta", base.eta))
    if eta < 0:
        raise ConfigError("eta must be nonnegative")

    sv = data.get("solver", {})
    method = sv.get("method", base.solver_method)
    if method not in ("bicgstab", "cg", "direct"):
        raise ConfigError(f"unknown solver method {method!r}")
    rel_tol = float(sv.get("rel_tol", 0.0)) or None
    abs_tol = float(sv.get("abs_tol", base.abs_tol))
    max_iter = sv.get("max_iter", base.max_iter)
    if not isinstance(max_iter, int) or max_iter <= 0:
        raise ConfigError("max_iter must be a positive integer")

    ga = data.get("gaussian", {})
    center = _floats(ga.get("center", (0.0,) * dims), "center")
    if len(center) != dims:
        raise ConfigError("gaussian center must match the dimension")
    gaussian = GaussianParams(
        amplitude=float(ga.get("amplitude", base.gaussian.amplitude)),
        offset=float(ga.get("offset", base.gaussian.offset)),
        sigma=float(ga.get("sigma", base.gaussian.sigma)),
        center=center)
    if gaussian.sigma <= 0:
        raise ConfigError("gaussian sigma must be positive")

    bc_tab = data.get("bc", {})
    axis_names = ("x", "y", "z")[:dims]
    default_1d = (("dirichlet", "dirichlet"),)
    bc_default = default_1d if dims == 1 else base.bc[:dims]
    faces = []
    for axis, name in enumerate(axis_names):
        pair = bc_tab.get(name)
        if pair is None:
            faces.append(bc_default[axis] if axis < len(bc_default)
                         else ("dirichlet", "dirichlet"))
            continue
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or any(p not in _BC_NAMES for p in pair)):
            raise ConfigError(
                f"bc.{name} must be a [low, high] pair from {_BC_NAMES}")
        faces.append((pair[0], pair[1]))
    for name in bc_tab:
        if name not in axis_names:
            raise ConfigError(f"bc.{name} does not match the dimension")

    st = data.get("study", {})
    study_levels = _ints(st.get("levels", list(base.study_levels)), "study levels")
    if any(j < 0 for j in study_levels) or not study_levels:
        raise ConfigError("study levels must be nonnegative and nonempty")
    study_etas = _floats(st.get("etas", list(base.study_etas)), "study etas")

    sp = data.get("sp3", {})
    sp3_center = _floats(sp.get("source_center", (0.0,) * dims), "source_center")
    sp3p = Sp3DemoParams(
        p_o2=float(sp.get("p_o2", base.sp3.p_o2)),
        p_total=float(sp.get("p_total", base.sp3.p_total)),
        p_quench=float(sp.get("p_quench", base.sp3.p_quench)),
        efficiency=float(sp.get("efficiency", base.sp3.efficiency)),
        light_speed=float(sp.get("light_speed", base.sp3.light_speed)),
        source_amplitude=float(sp.get("source_amplitude",
                                      base.sp3.source_amplitude)),
        source_sigma=float(sp.get("source_sigma", base.sp3.source_sigma)),
        source_center=sp3_center,
        max_coupling_iter=int(sp.get("max_coupling_iter",
                                     base.sp3.max_coupling_iter)),
        coupling_tol=float(sp.get("coupling_tol", base.sp3.coupling_tol)),
        neumann_check=bool(sp.get("neumann_check", base.sp3.neumann_check)))

    out_dir = data.get("output", {}).get("dir", base.out_dir)
    threads = data.get("threads", base.threads)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        raise ConfigError("threads must be a positive integer")

    return RunConfig(case=case, lo=lo, hi=hi, roots=roots, max_level=max_level,
                     eta=eta, solver_method=method, rel_tol=rel_tol,
                     abs_tol=abs_tol, max_iter=max_iter, gaussian=gaussian,
                     bc=tuple(faces), study_levels=study_levels,
                     study_etas=study_etas, sp3=sp3p, out_dir=out_dir,
                     threads=threads)


def load_config(path: str | None, default_case: str | None = None) -> RunConfig:
    """Parse a TOML config file; ``None`` gives the documented defaults.

    ``default_case`` fills the case only when the file does not choose one.
    """
    if path is None:
        data: dict = {}
    else:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid config {path}: {exc}") from exc
    if default_case is not None and "case" not in data:
        data = {**data, "case": default_case}
    return config_from_mapping(data)


# -- analytic Gaussian problem --------------------------------------------

def _gauss(points: np.ndarray, p: GaussianParams) -> np.ndarray:
    c = np.asarray(p.center)
    r2 = ((np.atleast_2d(points) - c) ** 2).sum(axis=1)
    return p.amplitude * np.exp(-r2 / (p.sigma * p.sigma))


def exact_solution(points: np.ndarray, p: GaussianParams) -> np.ndarray:
    return _gauss(points, p) + p.offset


def exact_source(points: np.ndarray, p: GaussianParams, dims: int) -> np.ndarray:
    """Laplacian of the exact solution."""
    c = np.asarray(p.center)
    r2 = ((np.atleast_2d(points) - c) ** 2).sum(axis=1)
    s2 = p.sigma * p.sigma
    return (2.0 / s2) * (2.0 * r2 / s2 - dims) * _gauss(points, p)


def exact_field(points: np.ndarray, p: GaussianParams) -> np.ndarray:
    """Field -grad(phi); component i is 2 x_i g(x) / sigma^2."""
    c = np.asarray(p.center)
    pts = np.atleast_2d(points)
    g = _gauss(pts, p)
    return 2.0 * (pts - c) / (p.sigma * p.sigma) * g[:, None]


def _leaf_points(forest: Forest) -> np.ndarray:
    return np.array([forest.grid.center(c) for c in
                     forest.enumerate_leaves().cells])


def case_bc(cfg: RunConfig) -> assembly.BCSpec:
    p = cfg.gaussian

    def dirichlet_value(point) -> float:
        return float(exact_solution(np.asarray(point)[None, :], p)[0])

    faces = []
    for axis in range(cfg.dims):
        pair = []
        for name in cfg.bc[axis]:
            if name == "dirichlet":
                pair.append(assembly.Dirichlet(dirichlet_value))
            elif name == "neumann":
                pair.append(assembly.Neumann())
            else:
                pair.append(assembly.Symmetry())
        faces.append((pair[0], pair[1]))
    return assembly.BCSpec(tuple(faces))


@dataclass
class CaseResult:
    """One solved Gaussian problem; all fields needed for a study row."""

    case: str
    max_level: int
    eta: float
    dx: float
    n_leaves: int
    n_uniform: int
    compression_pct: float
    err_phi: float
    err_field: tuple[float, ...]
    solver_method: str
    iterations: int
    residual: float
    matrix_n: int
    matrix_nnz: int
    nnz_per_row: float
    symmetry_fraction: float
    adapt_time: float
    assembly_time: float
    solve_time: float
    forest: Forest | None = None
    phi: np.ndarray | None = None
    matrix: SparseMatrix | None = None


def run_gaussian_case(cfg: RunConfig, max_level: int | None = None,
                      eta: float | None = None,
                      keep_fields: bool = False) -> CaseResult:
    """Adapt to the analytic solution and source, assemble, solve, compare."""
    if cfg.case not in ("gaussian1d", "gaussian2d"):
        raise ConfigError(f"run_gaussian_case cannot run case {cfg.case!r}")
    level = cfg.max_level if max_level is None else max_level
    eta_mr = cfg.eta if eta is None else eta
    grid = cfg.grid(level)
    p = cfg.gaussian

    t0 = time.perf_counter()
    base = Forest.uniform(grid, level)
    base.finalize()
    pts = _leaf_points(base)
    fields = [exact_solution(pts, p), exact_source(pts, p, cfg.dims)]
    spec = mra.ThresholdSpec(eta=eta_mr)
    forest = mra.adapt(base, fields, spec)
    t_adapt = time.perf_counter() - t0

    lm = forest.enumerate_leaves()
    pts = _leaf_points(forest)
    bc = case_bc(cfg)
    op = assembly.OperatorSpec.laplace()
    t0 = time.perf_counter()
    matrix, rhs_bc = assembly.assemble_adapted(forest, assembly.FluxScheme(),
                                               op, bc)
    t_asm = time.perf_counter() - t0
    rho = exact_source(pts, p, cfg.dims)
    rhs = assembly.assemble_rhs(forest, rho, op, bc, rhs_bc)

    rel = cfg.rel_tol if cfg.rel_tol is not None else max(1e-3 * eta_mr, 1e-12)
    solver = SolverConfig(method=cfg.solver_method, rel_tol=rel,
                          abs_tol=cfg.abs_tol, max_iter=cfg.max_iter)
    t0 = time.perf_counter()
    phi, report = solve(matrix, rhs, solver)
    t_solve = time.perf_counter() - t0

    err = phi - exact_solution(pts, p)
    err_phi = mra.norm_l2(forest, err)
    e_num = -gradient_field(forest, phi, bc)
    e_exact = exact_field(pts, p)
    err_field = tuple(mra.norm_l2(forest, e_num[:, i] - e_exact[:, i])
                      for i in range(cfg.dims))
    stats = matrix.stats()
    n_uniform = grid.root_count * (1 << (cfg.dims * level))
    widths = grid.widths(level)
    result = CaseResult(
        case=cfg.case, max_level=level, eta=eta_mr, dx=float(max(widths)),
        n_leaves=len(lm), n_uniform=n_uniform,
        compression_pct=100.0 * len(lm) / n_uniform,
        err_phi=float(err_phi), err_field=err_field,
        solver_method=report.method, iterations=report.iterations,
        residual=float(report.residual), matrix_n=stats.n,
        matrix_nnz=stats.nnz, nnz_per_row=stats.ratio,
        symmetry_fraction=stats.symmetry_fraction,
        adapt_time=t_adapt, assembly_time=t_asm, solve_time=t_solve)
    if keep_fields:
        result.forest = forest
        result.phi = phi
        result.matrix = matrix
    return result


def gradient_field(forest: Forest, values: np.ndarray,
                   bc: assembly.BCSpec) -> np.ndarray:
    return assembly.gradient(forest, values, bc)


# -- convergence study -----------------------------------------------------

@dataclass
class StudyReport:
    rows: list[CaseResult] = field(default_factory=list)
    orders_phi: list[float | None] = field(default_factory=list)
    orders_field: list[tuple[float, ...] | None] = field(default_factory=list)
    assembly_slope: float | None = None

    def observed_order_phi(self, eta: float | None = None) -> float:
        """Least-squares slope of log err vs log dx (one eta group)."""
        rows = [r for r in self.rows if eta is None or r.eta == eta]
        return _loglog_slope([r.dx for r in rows], [r.err_phi for r in rows])

    def observed_order_field(self, axis: int, eta: float | None = None) -> float:
        rows = [r for r in self.rows if eta is None or r.eta == eta]
        return _loglog_slope([r.dx for r in rows],
                             [r.err_field[axis] for r in rows])


def _loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    if len(x) < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(x, y, 1)[0])


def run_convergence_study(cfg: RunConfig) -> StudyReport:
    """Sweep (eta, max_level); rows are coarse-to-fine within each eta."""
    report = StudyReport()
    for eta in cfg.study_etas:
        prev: CaseResult | None = None
        for level in sorted(cfg.study_levels):
            row = run_gaussian_case(cfg, max_level=level, eta=eta)
            log.info("study case=%s J=%d eta=%.3g: N_L=%d err_phi=%.3e",
                     cfg.case, level, eta, row.n_leaves, row.err_phi)
            report.rows.append(row)
            if prev is None:
                report.orders_phi.append(None)
                report.orders_field.append(None)
            else:
                ratio = math.log(prev.dx / row.dx)
                report.orders_phi.append(
                    math.log(prev.err_phi / row.err_phi) / ratio)
                report.orders_field.append(tuple(
                    math.log(prev.err_field[i] / row.err_field[i]) / ratio
                    for i in range(cfg.dims)))
            prev = row
    times = [(r.n_leaves, r.assembly_time) for r in report.rows]
    if len({n for n, _ in times}) >= 3:
        report.assembly_slope = _loglog_slope([n for n, _ in times],
                                              [t for _, t in times])
    return report


# -- sp3 demo --------------------------------------------------------------

@dataclass
class Sp3DemoReport:
    forest: Forest
    source: np.ndarray
    result: sp3.PhotoSourceResult
    neumann_errors: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> list[int]:
        return [g.coupling_iterations for g in self.result.groups]

    @property
    def final_updates(self) -> list[float]:
        return [g.coupling_updates[-1] if g.coupling_updates else 0.0
                for g in self.result.groups]


def run_sp3_demo(cfg: RunConfig) -> Sp3DemoReport:
    """Adapt to the emission profile, run all groups, optional sanity check.

    The sanity check solves each group's moments with a constant source and
    all-Neumann faces, where the exact solution is constant, and records the
    worst relative deviation.
    """
    if cfg.case != "sp3demo":
        raise ConfigError(f"run_sp3_demo cannot run case {cfg.case!r}")
    d = cfg.sp3
    physics = sp3.PhysicalParams(
        p_o2=d.p_o2, p_total=d.p_total, p_quench=d.p_quench,
        efficiency=d.efficiency, light_speed=d.light_speed,
        source=sp3.gaussian_emitter(d.source_center, d.source_sigma,
                                    d.source_amplitude))
    grid = cfg.grid()
    base = Forest.uniform(grid, cfg.max_level)
    base.finalize()
    src = physics.source_on_leaves(base)
    forest = mra.adapt(base, [src], mra.ThresholdSpec(eta=cfg.eta))
    src = physics.source_on_leaves(forest)
    solver = cfg.solver_config()
    groups = sp3.PhotoGroupParams()
    result = sp3.photo_source(forest, src, physics, groups, solver,
                              max_coupling_iter=d.max_coupling_iter,
                              coupling_tol=d.coupling_tol)
    report = Sp3DemoReport(forest=forest, source=src, result=result)

    if d.neumann_check:
        constants = sp3.Sp3Constants()
        ones = np.ones(forest.leaf_count)
        bc = assembly.BCSpec.uniform(assembly.Neumann(), cfg.dims)
        for lam_l in groups.lam:
            lam_p = lam_l * physics.p_o2
            for n in range(2):
                kap = constants.kappa[n]
                mu2 = (lam_p / kap) ** 2
                op = assembly.OperatorSpec.screened(mu2)
                matrix, rhs_bc = assembly.assemble_adapted(
                    forest, assembly.FluxScheme(), op, bc)
                s0 = -(lam_p / (kap * kap)) * physics.quench_factor
                rhs = assembly.assemble_rhs(forest, s0 * ones, op, bc, rhs_bc)
                x, _ = solve(matrix, rhs, solver)
                exact = physics.quench_factor / lam_p
                report.neumann_errors.append(
                    float(np.max(np.abs(x - exact)) / abs(exact)))
    return report


# -- exports ---------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def _open_out(path: str) -> IO[str]:
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_field_csv(path: str, forest: Forest,
                     columns: Mapping[str, Sequence[float]]) -> None:
    """Leaf table: level, per-axis index and center, then the field columns."""
    grid = forest.grid
    lm = forest.enumerate_leaves()
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    for n, arr in zip(names, arrays):
        if arr.shape != (len(lm),):
            raise ValueError(f"column {n!r} must have one entry per leaf")
    header = (["level"] + [f"k{i}" for i in range(grid.dims)]
              + [f"x{i}" for i in range(grid.dims)] + names)
    with _open_out(path) as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row, cell in enumerate(lm.cells):
            center = grid.center(cell)
            wr.writerow([cell.level] + [cell.k[i] for i in range(grid.dims)]
                        + [_fmt(c) for c in center]
                        + [_fmt(a[row]) for a in arrays])


_STUDY_COLUMNS = ["case", "max_level", "eta", "dx", "n_leaves", "n_uniform",
                  "compression_pct", "err_phi", "err_e0", "err_e1",
                  "order_phi", "order_e0", "order_e1", "solver", "iterations",
                  "residual", "matrix_n", "matrix_nnz", "nnz_per_row",
                  "symmetry_fraction"]

_TIMING_COLUMNS = ["case", "max_level", "eta", "n_leaves", "adapt_s",
                   "assembly_s", "solve_s"]


def export_study_csv(path: str, report: StudyReport,
                     timings_path: str | None = None) -> None:
    """Study table (deterministic) plus optional separate timing table."""
    with _open_out(path) as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(_STUDY_COLUMNS)
        for row, o_phi, o_e in zip(report.rows, report.orders_phi,
                                   report.orders_field):
            dims = len(row.err_field)
            rec = [row.case, row.max_level, _fmt(row.eta), _fmt(row.dx),
                   row.n_leaves, row.n_uniform, _fmt(row.compression_pct),
                   _fmt(row.err_phi), _fmt(row.err_field[0]),
                   _fmt(row.err_field[1]) if dims > 1 else "",
                   _fmt(o_phi),
                   _fmt(o_e[0]) if o_e else "",
                   _fmt(o_e[1]) if o_e and dims > 1 else "",
                   row.solver_method, row.iterations, _fmt(row.residual),
                   row.matrix_n, row.matrix_nnz, _fmt(row.nnz_per_row),
                   _fmt(row.symmetry_fraction)]
            wr.writerow(rec)
    if timings_path is not None:
        with _open_out(timings_path) as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(_TIMING_COLUMNS)
            for row in report.rows:
                wr.writerow([row.case, row.max_level, _fmt(row.eta),
                             row.n_leaves, _fmt(row.adapt_time),
                             _fmt(row.assembly_time), _fmt(row.solve_time)])
            if report.assembly_slope is not None:
                fh.write(f"# assembly_time_vs_n_leaves_slope,"
                         f"{_fmt(report.assembly_slope)}\n")


def export_matrix(path: str, matrix: SparseMatrix) -> None:
    with _open_out(path) as fh:
        matrix.write_matrix_market(fh)


def export_sp3_csv(fields_path: str, report_path: str,
                   demo: Sp3DemoReport) -> None:
    cols: dict[str, Sequence[float]] = {"source": demo.source}
    for l, psi in enumerate(demo.result.psi):
        cols[f"psi{l + 1}"] = psi
    cols["s_ph"] = demo.result.rate
    export_field_csv(fields_path, demo.forest, cols)
    with _open_out(report_path) as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["group", "coupling_iterations", "final_update",
                     "neumann_check_max_rel_err"])
        for l, grp in enumerate(demo.result.groups):
            nm = demo.neumann_errors[2 * l:2 * l + 2]
            wr.writerow([l + 1, grp.coupling_iterations,
                         _fmt(grp.coupling_updates[-1]
                              if grp.coupling_updates else 0.0),
                         _fmt(max(nm) if nm else None)])


def render_default_config() -> str:
    return DEFAULT_CONFIG_TOML

"""Config parsing, analytic case runners, CSV exports, and the CLI."""

import numpy as np
import pytest

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from mrfv import assembly, cli, harness
from mrfv.cells import Grid
from mrfv.errors import ConfigError
from mrfv.forest import Forest
from mrfv.harness import (CaseResult, GaussianParams, RunConfig, StudyReport,
                          config_from_mapping, load_config)


# -- configuration ---------------------------------------------------------

def test_empty_mapping_gives_defaults():
    assert config_from_mapping({}) == RunConfig()


def test_documented_defaults_parse_to_defaults():
    data = tomllib.loads(harness.render_default_config())
    assert config_from_mapping(data) == RunConfig()


def test_case_default_boxes():
    c1 = config_from_mapping({"case": "gaussian1d"})
    assert (c1.lo, c1.hi, c1.roots) == ((-0.5,), (0.5,), (1,))
    assert c1.bc == (("dirichlet", "dirichlet"),)
    c2 = config_from_mapping({"case": "gaussian2d"})
    assert (c2.lo, c2.hi, c2.roots) == ((0.0, 0.0), (0.5, 0.5), (1, 1))
    c3 = config_from_mapping({"case": "sp3demo"})
    assert (c3.lo, c3.hi, c3.roots) == ((-0.1, -0.1), (0.1, 0.1), (1, 1))


def test_overrides_apply():
    cfg = config_from_mapping({
        "grid": {"max_level": 3, "roots": [2, 1], "lo": [0.0, -1.0],
                 "hi": [2.0, 1.0]},
        "mra": {"eta": 1e-6},
        "solver": {"method": "direct", "rel_tol": 1e-9, "max_iter": 10},
        "gaussian": {"sigma": 0.2, "center": [0.5, 0.0]},
        "bc": {"x": ["neumann", "dirichlet"]},
        "study": {"levels": [2, 3], "etas": [1e-3, 1e-5]},
        "output": {"dir": "elsewhere"},
    })
    assert cfg.max_level == 3 and cfg.roots == (2, 1)
    assert cfg.lo == (0.0, -1.0) and cfg.hi == (2.0, 1.0)
    assert cfg.eta == 1e-6
    assert cfg.solver_method == "direct" and cfg.rel_tol == 1e-9
    assert cfg.max_iter == 10
    assert cfg.gaussian.sigma == 0.2 and cfg.gaussian.center == (0.5, 0.0)
    assert cfg.bc == (("neumann", "dirichlet"), ("symmetry", "dirichlet"))
    assert cfg.study_levels == (2, 3) and cfg.study_etas == (1e-3, 1e-5)
    assert cfg.out_dir == "elsewhere"


def test_solver_tolerance_default():
    cfg = config_from_mapping({"mra": {"eta": 1e-4}})
    assert cfg.rel_tol is None
    assert cfg.solver_config().rel_tol == pytest.approx(1e-7)
    # the floor keeps the default tolerance away from machine epsilon
    tiny = config_from_mapping({"mra": {"eta": 1e-12}})
    assert tiny.solver_config().rel_tol == 1e-12
    fixed = config_from_mapping({"solver": {"rel_tol": 1e-5}})
    assert fixed.solver_config().rel_tol == 1e-5


@pytest.mark.parametrize("data", [
    {"nosuchsection": {}},
    {"grid": {"nosuchkey": 1}},
    {"case": "vortex"},
    {"case": "gaussian1d", "grid": {"roots": [1, 1]}},
    {"grid": {"roots": [1]}},                      # 2d case, 1 root count
    {"grid": {"lo": [0.0]}},                       # length mismatch
    {"grid": {"max_level": -1}},
    {"grid": {"max_level": 2.5}},
    {"grid": {"roots": [1.5, 1]}},
    {"mra": {"eta": -1.0}},
    {"solver": {"method": "gmres"}},
    {"solver": {"max_iter": 0}},
    {"gaussian": {"sigma": 0.0}},
    {"gaussian": {"center": [0.0]}},
    {"bc": {"x": ["dirichlet"]}},
    {"bc": {"x": ["dirichlet", "periodic"]}},
    {"bc": {"z": ["dirichlet", "dirichlet"]}},     # no third axis in 2d
    {"study": {"levels": []}},
    {"study": {"levels": [-1, 2]}},
    {"threads": 0},
    {"threads": True},
])
def test_config_rejections(data):
    with pytest.raises(ConfigError):
        config_from_mapping(data)


def test_load_config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('case = "gaussian1d"\n[grid]\nmax_level = 3\n')
    cfg = load_config(str(path))
    assert cfg.case == "gaussian1d" and cfg.max_level == 3
    # default_case only fills in when the file stays silent
    assert load_config(str(path), default_case="sp3demo").case == "gaussian1d"
    silent = tmp_path / "silent.toml"
    silent.write_text("[grid]\nmax_level = 2\n")
    assert load_config(str(silent), default_case="sp3demo").case == "sp3demo"
    assert load_config(None) == RunConfig()


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.toml"))
    bad = tmp_path / "bad.toml"
    bad.write_text("case = [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))


# -- analytic profiles -----------------------------------------------------

def test_exact_source_is_laplacian():
    p = GaussianParams(amplitude=3.0, offset=1.0, sigma=0.7, center=(0.1, -0.2))
    pts = np.array([[0.0, 0.0], [0.3, 0.1], [-0.4, 0.5]])
    h = 1e-3
    lap = np.zeros(len(pts))
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        lap += (harness.exact_solution(pts + e, p)
                - 2.0 * harness.exact_solution(pts, p)
                + harness.exact_solution(pts - e, p)) / (h * h)
    src = harness.exact_source(pts, p, 2)
    assert np.allclose(src, lap, rtol=1e-4, atol=1e-4)


def test_exact_field_is_negative_gradient():
    p = GaussianParams(amplitude=3.0, offset=1.0, sigma=0.7, center=(0.1, -0.2))
    pts = np.array([[0.0, 0.0], [0.3, 0.1], [-0.4, 0.5]])
    h = 1e-4
    field = harness.exact_field(pts, p)
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        grad = (harness.exact_solution(pts + e, p)
                - harness.exact_solution(pts - e, p)) / (2.0 * h)
        assert np.allclose(field[:, axis], -grad, rtol=1e-6, atol=1e-8)


def test_case_bc_kinds():
    cfg = config_from_mapping({"bc": {"x": ["neumann", "dirichlet"],
                                      "y": ["symmetry", "neumann"]}})
    bc = harness.case_bc(cfg)
    assert isinstance(bc.face(0, -1), assembly.Neumann)
    assert isinstance(bc.face(0, +1), assembly.Dirichlet)
    assert isinstance(bc.face(1, -1), assembly.Symmetry)
    assert isinstance(bc.face(1, +1), assembly.Neumann)
    # the Dirichlet callback returns the analytic boundary trace
    d = bc.face(0, +1)
    p = cfg.gaussian
    val = d.value(np.array([0.5, 0.25]))
    assert val == pytest.approx(
        float(harness.exact_solution(np.array([[0.5, 0.25]]), p)[0]))


# -- case runner -----------------------------------------------------------

def test_run_gaussian_case_frozen():
    cfg = config_from_mapping({})
    res = harness.run_gaussian_case(cfg, max_level=4)
    assert res.n_uniform == 256
    assert res.n_leaves == 115
    assert res.dx == 0.03125
    # frozen solved error against the analytic solution
    assert res.err_phi == pytest.approx(0.049124634170784609, rel=1e-9)
    assert len(res.err_field) == 2
    assert res.err_field[0] == pytest.approx(res.err_field[1], rel=1e-10)
    assert res.solver_method == "bicgstab"
    assert res.forest is None and res.phi is None and res.matrix is None


def test_run_gaussian_case_repeatable_and_kept():
    cfg = config_from_mapping({})
    a = harness.run_gaussian_case(cfg, max_level=4)
    b = harness.run_gaussian_case(cfg, max_level=4, keep_fields=True)
    assert a.err_phi == b.err_phi
    assert b.forest is not None
    assert b.phi.shape == (b.n_leaves,)
    assert b.matrix.n == b.n_leaves


def test_run_gaussian_case_rejects_other_cases():
    cfg = config_from_mapping({"case": "sp3demo"})
    with pytest.raises(ConfigError):
        harness.run_gaussian_case(cfg)
    with pytest.raises(ConfigError):
        harness.run_sp3_demo(config_from_mapping({}))


def fake_row(dx: float, err: float, eta: float = 0.5) -> CaseResult:
    return CaseResult(case="gaussian2d", max_level=3, eta=eta, dx=dx,
                      n_leaves=10, n_uniform=64, compression_pct=50.0,
                      err_phi=err, err_field=(2.0 * err, 0.25 * err),
                      solver_method="bicgstab", iterations=7,
                      residual=0.001953125, matrix_n=10, matrix_nnz=30,
                      nnz_per_row=3.0, symmetry_fraction=1.0,
                      adapt_time=0.5, assembly_time=0.25, solve_time=0.125)


def test_study_report_orders_synthetic():
    rep = StudyReport(rows=[fake_row(0.25, 1.6e-1), fake_row(0.125, 4e-2),
                            fake_row(0.0625, 1e-2)])
    assert rep.observed_order_phi() == pytest.approx(2.0, abs=1e-12)
    assert rep.observed_order_field(0) == pytest.approx(2.0, abs=1e-12)
    assert rep.observed_order_field(1) == pytest.approx(2.0, abs=1e-12)
    # eta filter keeps only matching rows
    rep.rows.append(fake_row(0.03125, 1e-2, eta=0.25))
    assert rep.observed_order_phi(0.5) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        rep.observed_order_phi(0.125)


def test_run_convergence_study_small():
    cfg = config_from_mapping({"case": "gaussian1d",
                               "study": {"levels": [5, 6], "etas": [1e-6]}})
    rep = harness.run_convergence_study(cfg)
    assert [r.max_level for r in rep.rows] == [5, 6]
    assert [r.n_leaves for r in rep.rows] == [26, 44]
    assert rep.orders_phi[0] is None
    assert rep.orders_phi[1] == pytest.approx(2.1153121526867, rel=1e-6)
    assert rep.orders_field[1][0] == pytest.approx(2.0, abs=0.5)
    # two sizes only: no complexity fit
    assert rep.assembly_slope is None
    assert rep.observed_order_phi(1e-6) == pytest.approx(rep.orders_phi[1],
                                                         rel=1e-12)


def test_run_sp3_demo_smoke():
    cfg = config_from_mapping({"case": "sp3demo",
                               "grid": {"max_level": 3},
                               "sp3": {"neumann_check": False}})
    demo = harness.run_sp3_demo(cfg)
    assert demo.neumann_errors == []
    assert len(demo.result.psi) == 3
    assert demo.source.shape == (demo.forest.leaf_count,)
    assert all(1 <= it <= 3 for it in demo.iterations)
    assert all(u >= 0.0 for u in demo.final_updates)


# -- exports ---------------------------------------------------------------

def test_fmt_frozen():
    f = harness._fmt
    assert f(0.1) == "0.10000000000000001"
    assert f(1.0) == "1"
    assert f(0.25) == "0.25"
    assert f(3) == "3"
    assert f(np.int64(3)) == "3"
    assert f(True) == "1"
    assert f(False) == "0"
    assert f(None) == ""
    assert f("abc") == "abc"
    assert f(np.float64(0.5)) == "0.5"


def field_forest():
    grid = Grid(dims=1, n_roots=(1,), lo=(0.0,), hi=(1.0,), max_level=1)
    forest = Forest.uniform(grid, 1)
    forest.finalize()
    return forest


def test_export_field_csv_golden(tmp_path):
    path = tmp_path / "fields.csv"
    harness.export_field_csv(str(path), field_forest(),
                             {"phi": [1.5, 0.25]})
    assert path.read_text().splitlines() == [
        "level,k0,x0,phi",
        "1,0,0.25,1.5",
        "1,1,0.75,0.25",
    ]


def test_export_field_csv_length_check(tmp_path):
    with pytest.raises(ValueError):
        harness.export_field_csv(str(tmp_path / "x.csv"), field_forest(),
                                 {"phi": [1.0]})


def test_export_study_csv_golden(tmp_path):
    rep = StudyReport(rows=[fake_row(0.125, 0.25)],
                      orders_phi=[2.0], orders_field=[(2.0, 1.5)],
                      assembly_slope=1.0)
    study = tmp_path / "study.csv"
    timings = tmp_path / "timings.csv"
    harness.export_study_csv(str(study), rep, str(timings))
    assert study.read_text().splitlines() == [
        "case,max_level,eta,dx,n_leaves,n_uniform,compression_pct,err_phi,"
        "err_e0,err_e1,order_phi,order_e0,order_e1,solver,iterations,"
        "residual,matrix_n,matrix_nnz,nnz_per_row,symmetry_fraction",
        "gaussian2d,3,0.5,0.125,10,64,50,0.25,0.5,0.0625,2,2,1.5,"
        "bicgstab,7,0.001953125,10,30,3,1",
    ]
    assert timings.read_text().splitlines() == [
        "case,max_level,eta,n_leaves,adapt_s,assembly_s,solve_s",
        "gaussian2d,3,0.5,10,0.5,0.25,0.125",
        "# assembly_time_vs_n_leaves_slope,1",
    ]


def test_export_study_csv_first_row_blanks(tmp_path):
    rep = StudyReport(rows=[fake_row(0.125, 0.25)],
                      orders_phi=[None], orders_field=[None])
    study = tmp_path / "study.csv"
    harness.export_study_csv(str(study), rep)
    row = study.read_text().splitlines()[1].split(",")
    assert row[10:13] == ["", "", ""]


def test_export_sp3_csv(tmp_path):
    cfg = config_from_mapping({"case": "sp3demo",
                               "grid": {"max_level": 3},
                               "sp3": {"neumann_check": False}})
    demo = harness.run_sp3_demo(cfg)
    fields = tmp_path / "sp3_fields.csv"
    rep = tmp_path / "sp3_report.csv"
    harness.export_sp3_csv(str(fields), str(rep), demo)
    lines = fields.read_text().splitlines()
    assert lines[0] == "level,k0,k1,x0,x1,source,psi1,psi2,psi3,s_ph"
    assert len(lines) == demo.forest.leaf_count + 1
    rlines = rep.read_text().splitlines()
    assert rlines[0] == ("group,coupling_iterations,final_update,"
                         "neumann_check_max_rel_err")
    assert len(rlines) == 4
    # no sanity-check column content when the check is off
    assert all(line.endswith(",") for line in rlines[1:])


# -- command line ----------------------------------------------------------

def test_cli_run_and_export(tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["run", "--max-level", "4", "--out", str(out)])
    assert rc == 0
    header = (out / "fields.csv").read_text().splitlines()[0]
    assert header == "level,k0,k1,x0,x1,phi,phi_exact,err,source,e0,e1"


def test_cli_study(tmp_path):
    out = tmp_path / "out"
    conf = tmp_path / "study.toml"
    conf.write_text('case = "gaussian1d"\n[study]\nlevels = [3, 4]\n'
                    "etas = [1e-6]\n")
    rc = cli.main(["study", "--config", str(conf), "--out", str(out)])
    assert rc == 0
    assert (out / "study.csv").exists()
    assert (out / "study_timings.csv").exists()


def test_cli_sp3(tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["sp3", "--max-level", "3", "--out", str(out)])
    assert rc == 0
    assert (out / "sp3_fields.csv").exists()
    assert (out / "sp3_report.csv").exists()


def test_cli_export_matrix(tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["export-matrix", "--max-level", "3", "--out", str(out)])
    assert rc == 0
    first = (out / "matrix.mtx").read_text().splitlines()[0]
    assert first == "%%MatrixMarket matrix coordinate real general"


def test_cli_config_error_exit(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "absent.toml")]) == 2
    assert cli.main(["run", "--eta", "-1", "--out", str(tmp_path / "o")]) == 2


def test_cli_solver_error_exit(tmp_path):
    # cg refuses the nonsymmetric adapted system
    rc = cli.main(["run", "--max-level", "4", "--solver", "cg",
                   "--out", str(tmp_path / "o")])
    assert rc == 3


def test_cli_io_error_exit(tmp_path):
    blocked = tmp_path / "blocked"
    blocked.write_text("")
    rc = cli.main(["run", "--max-level", "3", "--out", str(blocked)])
    assert rc == 4

import csv
import io
import os

import pytest

from dechodge.cli import hodge_table, main
from dechodge.settings import ENV_PREFIX


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
  for key in list(os.environ):
    if key.startswith(ENV_PREFIX):
      monkeypatch.delenv(key)


def _rows(text):
  return list(csv.DictReader(io.StringIO(text)))


def test_mesh_gen_and_stats(tmp_path, capsys):
  path = tmp_path / "right3.mesh"
  assert main(["--out", str(path), "mesh", "gen", "--kind", "right", "--n", "3"]) == 0
  assert path.read_text(encoding="utf-8").startswith("9 16 8\n")
  assert main(["mesh", "stats", "--in", str(path)]) == 0
  stats = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
  assert stats["n_vertices"] == "9"
  assert stats["n_triangles"] == "8"
  assert float(stats["max_angle"]) == pytest.approx(90.0)
  assert float(stats["non_delaunay_ratio"]) == 0.0


def test_mesh_commands_report_errors(tmp_path):
  assert main(["mesh", "gen", "--kind", "acute", "--n", "5"]) == 1
  path = tmp_path / "u.mesh"
  assert main(["--out", str(path), "mesh", "gen", "--kind", "unstructured", "--n", "5"]) == 0
  assert main(["--out", str(tmp_path / "p.mesh"), "mesh", "perturb", "--in", str(path), "--ratio", "1.5"]) == 1


def test_hodge_check(tmp_path, capsys):
  export = tmp_path / "ops"
  assert main(["--strategy", "incentric", "hodge", "check", "--n", "4", "--export", str(export)]) == 0
  rows = _rows(capsys.readouterr().out)
  assert len(rows) == 8
  assert {r["mesh"] for r in rows} == {"unit-triangle", "right-4"}
  assert all(float(r["error"]) > 0 for r in rows)
  for name in ("H0", "H1", "H2", "H1_inv"):
    assert (export / f"{name}.mtx").is_file()


def test_hodge_table_mesh_errors_are_smaller():
  rows = hodge_table(n=8)
  unit = {(r["strategy"], r["form"]): r["error"] for r in rows if r["mesh"] == "unit-triangle"}
  mesh = {(r["strategy"], r["form"]): r["error"] for r in rows if r["mesh"] == "right-8"}
  assert unit.keys() == mesh.keys()
  for key in unit:
    assert mesh[key] < unit[key]


def test_solve_poisson(tmp_path, capsys):
  field = tmp_path / "u.csv"
  assert main(["solve", "poisson", "--kind", "right", "--n", "9", "--field", str(field)]) == 0
  rows = _rows(capsys.readouterr().out)
  assert len(rows) == 1
  assert rows[0]["problem"] == "poisson-quadratic"
  assert float(rows[0]["err_psi"]) < 0.1
  lines = field.read_text(encoding="utf-8").splitlines()
  assert lines[0] == "id,x,y,value"
  assert len(lines) == 1 + 2 * 8 * 8


def test_solve_rejects_a_problem_of_another_kind():
  assert main(["solve", "ns", "--problem", "poisson-quadratic", "--n", "5"]) == 1


def test_converge_custom_sweep(tmp_path):
  out = tmp_path / "sweep.csv"
  argv = [
    "--out", str(out), "--workers", "2", "converge",
    "--problem", "poisson-quadratic", "--ns", "5,9", "--strategies", "barycentric,incentric",
  ]
  assert main(argv) == 0
  rows = _rows(out.read_text(encoding="utf-8"))
  assert [(r["strategy"], r["n"]) for r in rows] == [
    ("barycentric", "5"), ("barycentric", "9"), ("incentric", "5"), ("incentric", "9"),
  ]
  assert rows[0]["rate_psi"] == ""
  assert float(rows[1]["rate_psi"]) > 1.0


@pytest.mark.parametrize("argv", [
  ["converge", "--problem", "poisson-quadratic"],
  ["converge", "--problem", "poisson-quadratic", "--ns", "5", "--strategies", "voronoi"],
  ])
def test_converge_argument_errors(argv):
  assert main(argv) == 1


def test_bad_config_file_is_reported(tmp_path):
  cfg = tmp_path / "run.cfg"
  cfg.write_text("inverse_mode=cholesky\n", encoding="utf-8")
  assert main(["--config", str(cfg), "hodge", "check", "--n", "3"]) == 1


def test_config_fluid_constants_reach_the_solver(tmp_path, capsys):
  base = tmp_path / "base.cfg"
  base.write_text("max_steps=3\n", encoding="utf-8")
  slower = tmp_path / "slower.cfg"
  slower.write_text("max_steps=3\nnu=0.5\n", encoding="utf-8")
  assert main(["--config", str(base), "solve", "ns", "--n", "5"]) == 0
  plain = _rows(capsys.readouterr().out)[0]
  assert main(["--config", str(slower), "solve", "ns", "--n", "5"]) == 0
  viscous = _rows(capsys.readouterr().out)[0]
  assert plain["steps"] == viscous["steps"] == "3"
  assert plain["converged"] == viscous["converged"] == "false"
  assert float(plain["err_psi"]) != float(viscous["err_psi"])


def test_invalid_fluid_constant_is_reported(tmp_path):
  cfg = tmp_path / "run.cfg"
  cfg.write_text("kappa=-1\n", encoding="utf-8")
  assert main(["--config", str(cfg), "solve", "ns", "--n", "5"]) == 1


def test_compressed_mesh_gen(tmp_path, capsys):
  path = tmp_path / "c.mesh"
  assert main(["--out", str(path), "mesh", "gen", "--kind", "compressed", "--n", "13"]) == 0
  assert main(["mesh", "stats", "--in", str(path)]) == 0
  stats = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
  assert abs(float(stats["non_delaunay_ratio"]) - 0.4) <= 0.05

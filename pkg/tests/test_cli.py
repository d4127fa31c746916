import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sturmdist.boundary import CanonicalBC, LinearBC
from sturmdist.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main, run
from sturmdist.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

FREE = """
interval = [0.0, 3.141592653589793]
dim = 1

[coefficients]
p_inv = "identity"
Q = "zero"

[boundary.canonical]
K = "identity"
"""


def write(tmp_path, text, name="problem.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def base(**over):
    d = {
        "interval": [0.0, 1.0],
        "dim": 1,
        "coefficients": {"p_inv": "identity", "Q": "zero"},
        "boundary": {"preset": "dirichlet"},
    }
    d.update(over)
    return d


def test_minimal_config_with_sugar(tmp_path):
    cfg = load_config(write(tmp_path, FREE))
    assert isinstance(cfg.boundary, CanonicalBC)
    assert np.array_equal(cfg.boundary.K, np.eye(2))
    assert cfg.boundary.variant.value == "LK"


def test_two_boundary_specs_rejected():
    bad = base(boundary={"canonical": {"K": "identity"}, "linear": {"alpha": "identity", "beta": "zero"}})
    with pytest.raises(ConfigError, match="exactly one boundary spec"):
        parse_config(bad)
    with pytest.raises(ConfigError, match="exactly one boundary spec"):
        parse_config(base(boundary={}))


def test_dimension_error_names_field():
    bad = base(dim=2, boundary={"canonical": {"K": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}})
    with pytest.raises(ConfigError, match=r"boundary\.canonical\.K.*4x4"):
        parse_config(bad)
    bad = base(dim=2, coefficients={"p_inv": "identity", "Q": [[1, 2, 3], [4, 5, 6]]})
    with pytest.raises(ConfigError, match=r"coefficients\.Q"):
        parse_config(bad)


def test_toml_syntax_error_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        load_config(write(tmp_path, "interval = [0.0, 1.0\ndim = 1\n"))


@pytest.mark.parametrize(
    "patch, where",
    [
        ({"interval": [1.0, 0.0]}, "interval"),
        ({"dim": 0}, "dim"),
        ({"tasks": [{"kind": "bogus"}]}, r"tasks\[0\]\.kind"),
        ({"tasks": [{"kind": "eig"}]}, r"tasks\[0\]"),
        ({"tasks": [{"kind": "check", "suites": ["nope"]}]}, r"tasks\[0\]\.suites"),
        ({"boundary": {"preset": "robin"}}, "boundary.preset"),
        ({"boundary": {"canonical": {"K": "identity", "variant": "LX"}}}, "variant"),
        ({"hermitian": True, "coefficients": {"p_inv": "identity", "Q": [[0, 1]]}}, "hermitian"),
    ],
)
def test_schema_errors(patch, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(base(**patch))


def test_matrix_forms():
    rows = base(dim=2, boundary={"linear": {"alpha": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]], "beta": "zero"}})
    assert isinstance(parse_config(rows).boundary, LinearBC)
    flat = base(dim=2, coefficients={"p_inv": [[1, 0], [0, 0], [0, 0], [2, 0.5]], "Q": "zero"})
    cfg = parse_config(flat)
    assert cfg.p_inv(0.3)[1, 1] == 2 + 0.5j
    nested = base(dim=2, coefficients={"p_inv": [[1, 0], [0, 2]], "Q": "zero"})
    assert parse_config(nested).p_inv(0.3)[1, 1] == 2


def test_separated_spec():
    cfg = parse_config(base(dim=1, boundary={"separated": {"K_a": 0.5, "K_b": [[0.0, 0.3]], "variant": "LUpperK"}}))
    assert np.allclose(cfg.boundary.K, np.diag([0.5, 0.3j]))


def test_piecewise_coefficients():
    Q = {"breakpoints": [0.0, 0.5, 1.0], "pieces": [{"degree": 0, "coeffs": [[[0, 0]]]}, {"degree": 1, "coeffs": [[[1, 0]], [[2, 0]]]}]}
    cfg = parse_config(base(coefficients={"p_inv": "identity", "Q": Q}))
    assert cfg.Q(0.75)[0, 0] == pytest.approx(1.5)
    Q["breakpoints"] = [0.0, 0.5, 2.0]
    with pytest.raises(ConfigError, match="breakpoints"):
        parse_config(base(coefficients={"p_inv": "identity", "Q": Q}))


def test_eig_task_writes_squares(tmp_path):
    text = FREE + '\n[[tasks]]\nkind = "eig"\nwindow = [0.5, 20.0]\n'
    cfg = load_config(write(tmp_path, text))
    assert run(cfg, tmp_path / "out", log=lambda m: None) == EXIT_OK
    lines = (tmp_path / "out" / "00_eig.csv").read_text().splitlines()
    assert lines[0] == "index,re,im,multiplicity,residual"
    vals = [float(l.split(",")[1]) for l in lines[1:]]
    assert np.allclose(vals, [1, 4, 9, 16], rtol=1e-8)


def test_classify_prints_class(tmp_path, capsys):
    text = FREE.replace('K = "identity"', 'K = "zero"\nvariant = "LK"')
    code = main(["classify", str(write(tmp_path, text)), "--out", str(tmp_path / "o")])
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip() == "MaximalDissipative, norm_K=0"


def test_green_csv_layout(tmp_path):
    text = FREE + '\n[[tasks]]\nkind = "green"\nmu = -1.0\ngrid_n = 5\n'
    assert main(["run", str(write(tmp_path, text)), "--out", str(tmp_path / "o")]) == EXIT_OK
    lines = (tmp_path / "o" / "00_green.csv").read_text().splitlines()
    assert lines[0] == "t,tau,g00_re,g00_im"
    assert len(lines) == 26


def test_manifest_round_trip(tmp_path):
    src = CONFIGS / "dirichlet_free.toml"
    cfg = load_config(src)
    run(cfg, tmp_path / "o", log=lambda m: None)
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    for key in ("config", "versions", "tolerances", "tasks", "wall_time_s"):
        assert key in manifest
    again = parse_config(manifest["config"])
    assert again.to_dict() == cfg.to_dict()
    assert load_config(tmp_path / "o" / "manifest.json").to_dict() == cfg.to_dict()


def test_partial_results_kept_on_failure(tmp_path):
    text = FREE + (
        '\n[[tasks]]\nkind = "eig"\nwindow = [0.5, 5.0]\n'
        '\n[[tasks]]\nkind = "green"\nmu = 4.0\n'
    )
    code = main(["run", str(write(tmp_path, text)), "--out", str(tmp_path / "o")])
    assert code == EXIT_NUMERICAL
    assert (tmp_path / "o" / "00_eig.csv").exists()
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["tasks"][1]["status"] == "numerical_error"
    assert "resolvent set" in manifest["tasks"][1]["message"]
    assert not list((tmp_path / "o").glob(".*tmp"))


def test_exit_codes(tmp_path):
    assert main(["run", str(write(tmp_path, "dim = 1\n")), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.toml")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", str(write(tmp_path, FREE)), "--out", str(blocker / "sub")]) == EXIT_IO


def test_overrides(tmp_path):
    text = FREE + '\n[[tasks]]\nkind = "green"\n'
    p = write(tmp_path, text)
    assert main(["green", str(p), "--grid-n", "4", "--mu", "-2", "--mesh-max-step", "0.1", "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["mesh"] == {"max_step": 0.1, "grid_n": 4}
    assert manifest["config"]["tasks"][0]["mu"] == -2.0
    assert main(["eig", str(p), "--out", str(tmp_path / "o2")]) == EXIT_CONFIG
    assert main(["eig", str(p), "--window", "0.5", "5", "--out", str(tmp_path / "o3")]) == EXIT_OK


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "sturmdist", "classify", str(CONFIGS / "dirichlet_free.toml"), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    assert out.stdout.strip() == "SelfAdjoint, norm_K=1"

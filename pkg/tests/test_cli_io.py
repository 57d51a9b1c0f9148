import json
import os

import numpy as np
import pytest

from khbench import cli_io
from khbench.cli_io import ConfigError, MisalignedError, compare, execute, load_config, main, make_config


def write(path, text):
    path.write_text(text)
    return str(path)


TINY = """
Re = 100
n = 4
k = 2
dt_tbar = 0.01
t_end = 1.0
qoi_every = 5
snapshot_times = [0.0, 1.0]
snapshot_resolution = 16
delta_lines = 64
spectrum_samples = 32
"""


@pytest.fixture
def tiny(tmp_path):
    return write(tmp_path / "tiny.toml", TINY)


def read_rows(path):
    lines = open(path).read().splitlines()
    return lines[0], lines[1], [ln.split(",") for ln in lines[2:]]


def test_run_outputs(tmp_path, tiny):
    out = tmp_path / "out"
    assert main(["run", "--config", tiny, "--override", f"output_dir={out}"]) == 0
    schema, header, rows = read_rows(out / "qoi.csv")
    assert schema.startswith("# schema=khbench-qoi/1 config_hash=")
    assert header.split(",") == list(cli_io.QOI_COLUMNS)
    assert len(rows) == 21
    K = np.array([float(r[3]) for r in rows])
    assert np.all(np.diff(K) <= 1e-10 * K[0])
    assert float(rows[-1][2]) == 1.0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config_hash"] in schema
    assert set(os.listdir(out / "spectra")) == {"spectrum_t0000.00.csv", "spectrum_t0001.00.csv"}
    vtk = (out / "fields" / "field_t0001.00.vtk").read_text().splitlines()
    assert vtk[0] == "# vtk DataFile Version 3.0"
    assert "DIMENSIONS 17 17 1" in vtk
    # the written config reproduces the hash
    again = load_config(str(out / "config.toml"))
    assert again.content_hash() == meta["config_hash"]


def test_bitwise_determinism(tmp_path, tiny):
    for name in ("a", "b"):
        cfg = load_config(tiny, [f"output_dir={tmp_path / name}"])
        execute(cfg)
    a = (tmp_path / "a" / "qoi.csv").read_bytes()
    b = (tmp_path / "b" / "qoi.csv").read_bytes()
    assert a == b


@pytest.mark.parametrize("engine", ["fem", "oracle"])
def test_restart_bitwise(tmp_path, tiny, engine):
    ov = [f"engine={engine}", "oracle_N=16", "oracle_M=16"]
    full = load_config(tiny, ov + [f"output_dir={tmp_path / 'full'}"])
    execute(full)
    part = load_config(tiny, ov + [f"output_dir={tmp_path / 'part'}", "checkpoint_every=40"])
    execute(part)
    ck = tmp_path / "part" / "checkpoint.npz"
    assert ck.exists()
    rest = load_config(tiny, ov + [f"output_dir={tmp_path / 'rest'}", f"restart={ck}"])
    execute(rest)
    assert (tmp_path / "full" / "qoi.csv").read_bytes() == (tmp_path / "rest" / "qoi.csv").read_bytes()


def test_restart_wrong_config(tmp_path, tiny):
    part = load_config(tiny, [f"output_dir={tmp_path / 'p'}", "checkpoint_every=40"])
    execute(part)
    other = load_config(tiny, ["Re=200", f"restart={tmp_path / 'p' / 'checkpoint.npz'}"])
    with pytest.raises(ValueError, match="checkpoint"):
        execute(other)


def test_invalid_config_lists_all_errors(tmp_path, capsys):
    out = tmp_path / "never"
    path = write(tmp_path / "bad.toml", f'Re = 0\nk = 12\nbogus = 1\noutput_dir = "{out}"\n')
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert len(exc.value.errors) == 1  # unknown keys are reported before values
    path = write(tmp_path / "bad2.toml", f'Re = 0\nk = 12\noutput_dir = "{out}"\n')
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert len(exc.value.errors) == 2
    assert main(["run", "--config", path]) == 2
    assert "Re must be a positive" in capsys.readouterr().err
    assert not out.exists()


def test_override_parsing():
    cfg = make_config({}, ["Re=1e4", "with_20pi=false", "snapshot_times=[1,2]", "perturbation=solver_rtol(1e-6)"])
    assert cfg.Re == 1e4 and cfg.with_20pi is False and cfg.snapshot_times == [1.0, 2.0]
    assert cfg.perturbation_spec().params == (1e-6,)
    with pytest.raises(ConfigError):
        make_config({}, ["n=2.5"])
    with pytest.raises(ConfigError):
        make_config({}, ["perturbation=regularized_direct_solve"])


def test_hash_ignores_output_location():
    a = make_config({"output_dir": "x"})
    b = make_config({"output_dir": "y"})
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != make_config({"Re": 101}).content_hash()


@pytest.fixture
def qoi_pair(tmp_path, tiny):
    execute(load_config(tiny, [f"output_dir={tmp_path / 'a'}"]))
    return str(tmp_path / "a" / "qoi.csv")


def test_compare_self(qoi_pair, capsys):
    rep = compare(qoi_pair, qoi_pair, 1.0, {"K": 0.0, "E": 0.0, "P": 0.0})
    assert rep["pass"] and all(rep[q]["max_rel_dev"] == 0.0 for q in "KEP")
    assert main(["compare", "--a", qoi_pair, "--b", qoi_pair, "--tmax", "1"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_compare_misaligned(qoi_pair):
    with pytest.raises(MisalignedError):
        compare(qoi_pair, qoi_pair, 2.0, {"K": 0.01})
    assert main(["compare", "--a", qoi_pair, "--b", qoi_pair, "--tmax", "5"]) == 2


def test_compare_external_mapping(tmp_path, qoi_pair):
    d = cli_io.read_qoi_csv(qoi_pair)
    ext = tmp_path / "ref.csv"
    with open(ext, "w") as f:
        f.write("time,kinetic,enstrophy,palinstrophy\n")
        for row in zip(d["t_over_tbar"] * 2, d["K"] * 1.001, d["E"], d["P"]):
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")
    with pytest.raises(ValueError, match="schema"):
        compare(qoi_pair, str(ext), 1.0, {"K": 0.01})
    mapping = {"t_over_tbar": "time", "K": "kinetic", "E": "enstrophy", "P": "palinstrophy", "time_scale": 0.5}
    (tmp_path / "ref.csv.columns.json").write_text(json.dumps(mapping))
    rep = compare(qoi_pair, str(ext), 1.0, {"K": 0.01, "E": 1e-12})
    assert rep["pass"] and rep["K"]["max_rel_dev"] == pytest.approx(1e-3, rel=1e-6)
    rep = compare(qoi_pair, str(ext), 1.0, {"K": 1e-4})
    assert not rep["pass"]


def test_unknown_schema(tmp_path, qoi_pair):
    text = open(qoi_pair).read().replace("khbench-qoi/1", "khbench-qoi/9")
    bad = write(tmp_path / "bad.csv", text)
    with pytest.raises(ValueError, match="unsupported schema"):
        compare(qoi_pair, bad, 1.0, {"K": 0.1})


def test_run_failure_has_partial(tiny):
    cfg = load_config(tiny, ["dt_tbar=5", "t_end=50", "Re=1e9"])
    with pytest.raises(cli_io.RunFailed) as exc:
        execute(cfg)
    assert exc.value.partial is not None and len(exc.value.partial.rows) >= 1

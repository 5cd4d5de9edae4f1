import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lambdapulse import cli
from lambdapulse import io as lpio
from lambdapulse.core import (
    BECEstimate,
    ColdLinear,
    CustomTable,
    LaserCooledEstimate,
    PhysicalParams,
    ZeroDecay,
    make_config,
    zero_state,
)
from lambdapulse.hierarchy import simulate

DEFAULT_FILE = """\
# defaults with a cold gas
decay.a = 0.01
l0 = 5
ell = 30
total_time = 100
"""

TINY = """\
decay.model = zero
l0 = 1
ell = 1
z_max = 4
dz = 0.1
cfl = 1
total_time = 0.5
snapshot_dt = 0.1
"""


def test_default_file():
    cfg = lpio.parse_config(DEFAULT_FILE)
    assert cfg.params.c == 138.0
    assert cfg.decay == ColdLinear(0.01)
    assert cfg.grid.dz == pytest.approx(0.05)
    assert cfg.grid.courant(cfg.params.c) == pytest.approx(0.5)
    assert cfg.grid.z_max >= 3 * cfg.L0


def test_missing_decay_rate_is_an_error():
    with pytest.raises(lpio.ConfigParseError, match="decay.a"):
        lpio.parse_config("l0 = 5\nell = 3\ntotal_time = 10\n")


def test_cfl_rejected_at_parse_time():
    with pytest.raises(lpio.ConfigParseError, match="cfl"):
        lpio.parse_config(DEFAULT_FILE + "cfl = 1.5\n")


def test_diagnostics_carry_line_numbers():
    text = "decay.a = 0.1\nfoo = 1\nl0 = abc\nell = inf\n"
    with pytest.raises(lpio.ConfigParseError) as err:
        lpio.parse_config(text)
    msgs = err.value.problems
    assert any(m.startswith("line 2") and "foo" in m for m in msgs)
    assert any(m.startswith("line 3") for m in msgs)
    assert any(m.startswith("line 4") for m in msgs)
    assert any("missing required keys: l0, ell, total_time" in m for m in msgs)


def test_malformed_and_duplicate_lines():
    with pytest.raises(lpio.ConfigParseError) as err:
        lpio.parse_config(DEFAULT_FILE + "just text\nl0 = 6\n")
    assert len(err.value.problems) == 2


DECAYS = st.one_of(
    st.just(ZeroDecay()),
    st.builds(ColdLinear, st.floats(0, 1)),
    st.builds(LaserCooledEstimate, st.floats(0.1, 10), st.floats(0, 1)),
    st.builds(BECEstimate, st.floats(0.1, 10), st.floats(0, 1), st.floats(0.1, 100)),
    st.builds(lambda r: CustomTable((0.0,) + tuple(r)), st.lists(st.floats(0, 2), max_size=6)),
)


@settings(max_examples=60, deadline=None)
@given(decay=DECAYS, L0=st.floats(0.5, 50), ell=st.integers(0, 100),
       omega=st.floats(0.1, 3), g2n=st.floats(1, 500), dz=st.floats(0.01, 0.2),
       cfl=st.floats(0.05, 1.0), T=st.floats(0, 200), stride=st.integers(1, 1000),
       closure=st.sampled_from(["spin", "optical"]))
def test_config_round_trip(decay, L0, ell, omega, g2n, dz, cfl, T, stride, closure):
    params = PhysicalParams(Omega_c=omega, g2N=g2n)
    cfg = make_config(L0=L0, ell=ell, decay=decay, params=params, total_time=T, dz=dz,
                      cfl=cfl, z_max=3 * L0 + 1, closure=closure)
    cfg = type(cfg)(**{**cfg.__dict__, "grid": type(cfg.grid)(cfg.grid.z_max, cfg.grid.n_z,
                                                                 cfg.grid.dt, stride)})
    text = lpio.render_config(cfg, output_dir="res")
    settings_ = lpio.parse_settings(text)
    assert settings_.config == cfg
    assert settings_.output_dir == "res"


def tiny_trajectory():
    return simulate(lpio.parse_config(TINY), keep_final=False)


def test_zero_trajectory_output(tmp_path):
    cfg = lpio.parse_config(TINY)
    traj = simulate(cfg, initial=zero_state(cfg))
    lpio.write_trajectory(traj, tmp_path / "z")
    lines = (tmp_path / "z" / "strength.csv").read_text().splitlines()
    assert lines[0] == "t,I"
    assert all(line.split(",")[1] == "0" for line in lines[1:])
    assert lpio.read_pnm(tmp_path / "z" / "intensity.pgm").max() == 0


def test_outputs_are_byte_identical(tmp_path):
    a = lpio.write_trajectory(tiny_trajectory(), tmp_path / "a")
    b = lpio.write_trajectory(tiny_trajectory(), tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_output_layout(tmp_path):
    traj = tiny_trajectory()
    lpio.write_trajectory(traj, tmp_path)
    rows = (tmp_path / "intensity.csv").read_text().splitlines()
    assert rows[0] == "t,z,value"
    assert len(rows) == 1 + traj.intensity_maps.size
    # time-major ordering
    assert rows[1].split(",")[0] == rows[len(traj.z)].split(",")[0] == "0"
    img = lpio.read_pnm(tmp_path / "intensity.pgm")
    assert img.shape == (len(traj.z), len(traj.times))
    assert img.max() == 255
    rgb = lpio.read_pnm(tmp_path / "intensity.ppm")
    assert rgb.shape == img.shape + (3,)
    peaks = (tmp_path / "peaks.csv").read_text().splitlines()
    assert peaks[0] == "t,z_forward,z_backward"


def test_nine_significant_digits():
    assert lpio.fmt(math.pi) == "3.14159265"
    assert lpio.fmt(1e-20 / 3) == "3.33333333e-21"
    assert lpio.fmt(math.nan) == "nan"
    assert lpio.fmt(7) == "7"


def test_color_ramp_is_monotone_in_red_and_ends_red():
    rgb = lpio.colorize(np.arange(256, dtype=np.uint8)[None, :])[0].astype(int)
    assert tuple(rgb[-1]) == (255, 0, 0)
    assert rgb[0, 2] > rgb[0, 0]  # background blue
    assert np.all(np.diff(rgb[:, 0]) >= 0)


def test_heatmap_ridges(tmp_path):
    """Split pulses give two ridges, a trapped pulse one central ridge."""
    from lambdapulse.hierarchy import Trajectory, peak_positions

    z = np.linspace(-20, 20, 401)
    t = np.linspace(0, 10, 11)

    def traj(speed):
        maps = np.array([np.exp(-(z - 2 - speed * ti) ** 2) + np.exp(-(z + 2 + speed * ti) ** 2) for ti in t])
        f, b = zip(*(peak_positions(z, r) for r in maps))
        return Trajectory(z, t, maps, maps.sum(axis=1), np.array(f), np.array(b),
                          lpio.parse_config(TINY))

    split = lpio.heatmap_levels(traj(1.5))
    last = split[:, -1]
    bright = np.nonzero(last > 128)[0]
    assert bright.min() < 200 - 100 and bright.max() > 200 + 100
    still = lpio.heatmap_levels(traj(0.0))
    assert np.all(np.abs(np.nonzero(still[:, -1] > 128)[0] - 200) < 40)


# --- command line -----------------------------------------------------------

def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_analytic_command(capsys):
    assert cli.main(["analytic", "--ell-max", "3"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "ell,c0_exact,c0_slowlight"
    assert len(out) == 4
    assert float(out[1].split(",")[1]) == pytest.approx(1.72, abs=0.005)


def test_simulate_command(tmp_path, capsys):
    cfg = write(tmp_path, TINY + f"output_dir = {tmp_path / 'out'}\n")
    assert cli.main(["simulate", cfg]) == 0
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert {"strength.csv", "peaks.csv", "intensity.csv", "intensity.pgm", "intensity.ppm",
            "intensity.png", "summary.csv", "config.txt"} <= names
    assert "behavior," in capsys.readouterr().out


def test_cfl_violation_leaves_no_output(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = write(tmp_path, TINY.replace("cfl = 1", "cfl = 1.5") + f"output_dir = {out}\n")
    assert cli.main(["simulate", cfg]) != 0
    assert "cfl" in capsys.readouterr().err
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [tmp_path / "run.cfg"]


def test_failed_run_writes_nothing(tmp_path, monkeypatch):
    out = tmp_path / "out"
    cfg = write(tmp_path, TINY + f"output_dir = {out}\n")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(lpio, "write_csv", boom)
    assert cli.main(["simulate", cfg, "--no-figures"]) != 0
    assert not out.exists() or not any(out.iterdir())
    assert [p.name for p in tmp_path.iterdir()] == ["run.cfg"]


def test_unknown_subcommand_and_flag(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["frobnicate"])
    assert e.value.code != 0
    with pytest.raises(SystemExit) as e:
        cli.main(["analytic", "--ell-max", "2", "--bogus"])
    assert e.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_dispersion_command(tmp_path, capsys):
    cfg = write(tmp_path, DEFAULT_FILE)
    out = tmp_path / "d"
    assert cli.main(["dispersion", cfg, "--omega-min", "-2", "--omega-max", "2", "--points", "9",
                     "--out", str(out), "--no-figures"]) == 0
    rows = (out / "dispersion.csv").read_text().splitlines()
    assert rows[0] == "omega,re_k_plus,im_k_plus,re_k_minus,im_k_minus"
    assert len(rows) == 10


def test_sweep_and_vgroup_commands(tmp_path, capsys):
    cfg = write(tmp_path, TINY)
    out = tmp_path / "s"
    assert cli.main(["sweep", cfg, "--vary", "a=0,0.5", "--out", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "param,value,behavior,separation,onset_time,I_final"
    assert len(rows) == 3
    assert (out / "sweep_strength.png").exists()
    assert cli.main(["sweep", cfg, "--vary", "b=1"]) != 0
    out = tmp_path / "v"
    assert cli.main(["vgroup", cfg, "--ell-max", "2", "--out", str(out), "--no-figures"]) == 0
    assert len((out / "vgroup.csv").read_text().splitlines()) == 3

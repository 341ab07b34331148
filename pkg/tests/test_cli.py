import os

import numpy as np
import pytest

from gentomo.cli import main
from gentomo.formats import read_field, read_tomogram

GAUSS_CFG = "type=gaussian\nmean=0,0\ncov=1,0,0,1\ngrid=-6,6,128;-6,6,128\n"


@pytest.fixture
def gauss_config(tmp_path):
    p = tmp_path / "gauss.cfg"
    p.write_text(GAUSS_CFG)
    return p


@pytest.fixture
def gauss_field(tmp_path, gauss_config):
    out = tmp_path / "gauss.gtm"
    assert main(["phantom", str(gauss_config), "--out", str(out)]) == 0
    return out


def _forward_args(field, out, family="hyperplane", extra=()):
    return ["forward", str(field), "--family", family,
            "--mu-box=-3,3;-3,3", "--mu-count", "9;9",
            "--x-range=-8,8", "--x-count", "161",
            "--out", str(out), *extra]


class TestPhantomCommand:
    def test_writes_field_and_prints_mass(self, tmp_path, gauss_config, capsys):
        out = tmp_path / "f.gtm"
        assert main(["phantom", str(gauss_config), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "total mass" in printed
        assert abs(float(printed.split()[-1]) - 1.0) < 1e-6
        field = read_field(out)
        assert field.grid.shape == (128, 128)

    def test_bad_grid_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("type=gaussian\nmean=0,0\ncov=1,0,0,1\ngrid=-6,6,1\n")
        assert main(["phantom", str(cfg), "--out", str(tmp_path / "x.gtm")]) == 2

    def test_missing_config_exits_4(self, tmp_path):
        assert main(["phantom", str(tmp_path / "none.cfg"),
                     "--out", str(tmp_path / "x.gtm")]) == 4


class TestForwardCommand:
    def test_field_input(self, tmp_path, gauss_field, capsys):
        out = tmp_path / "t.gtmt"
        assert main(_forward_args(gauss_field, out)) == 0
        printed = capsys.readouterr().out
        assert "normalization" in printed and "overflow" in printed
        t = read_tomogram(out)
        assert t.family_tag == "hyperplane"
        assert t.values.shape == (81, 161)

    def test_phantom_config_input(self, tmp_path, gauss_config, capsys):
        out = tmp_path / "t.gtmt"
        args = _forward_args(gauss_config, out,
                             extra=["--q-box=-6,6;-6,6",
                                    "--q-count", "128;128"])
        assert main(args) == 0

    def test_quadric_requires_B(self, tmp_path, gauss_field):
        out = tmp_path / "t.gtmt"
        assert main(_forward_args(gauss_field, out, family="quadric")) == 2

    def test_quadric_with_B(self, tmp_path, gauss_field):
        out = tmp_path / "t.gtmt"
        args = ["forward", str(gauss_field), "--family", "quadric",
                "--B", "1,0,0,1", "--mu-box=-3,3;-3,3",
                "--mu-count", "9;9", "--x-range=-5,80", "--x-count", "171",
                "--out", str(out)]
        assert main(args) == 0
        assert read_tomogram(out).family_tag == "quadric"

    def test_degenerate_circle_direction_warns(self, tmp_path, gauss_field,
                                               capsys):
        out = tmp_path / "t.gtmt"
        args = ["forward", str(gauss_field), "--family", "circle",
                "--mu-box=-1,1;-1,1", "--mu-count", "3;3",
                "--x-range=-8,8", "--x-count", "101", "--out", str(out)]
        assert main(args) == 0
        assert "degenerate" in capsys.readouterr().err


class TestInvertCommand:
    def test_round_trip_through_files(self, tmp_path, gauss_field, capsys):
        tomo = tmp_path / "t.gtmt"
        args = ["forward", str(gauss_field), "--family", "hyperplane",
                "--mu-box=-5,5;-5,5", "--mu-count", "48;48",
                "--x-range=-8,8", "--x-count", "241", "--out", str(tomo)]
        assert main(args) == 0
        recon = tmp_path / "r.gtm"
        args = ["invert", str(tomo), "--family", "hyperplane",
                "--q-box=-4,4;-4,4", "--q-count", "33;33",
                "--out", str(recon)]
        assert main(args) == 0
        printed = capsys.readouterr().out
        assert "imaginary residual ratio" in printed
        field = read_field(recon)
        assert field.values.max() == pytest.approx(1 / (2 * np.pi), rel=0.05)

    def test_tag_mismatch_exits_3(self, tmp_path, gauss_field):
        tomo = tmp_path / "t.gtmt"
        assert main(_forward_args(gauss_field, tomo)) == 0
        assert main(["invert", str(tomo), "--family", "circle",
                     "--q-box=-4,4;-4,4", "--q-count", "17;17",
                     "--out", str(tmp_path / "r.gtm")]) == 3

    def test_zero_tomogram_gives_zero_field(self, tmp_path, gauss_field):
        from gentomo.core import TomogramFamily, make_grid
        from gentomo.formats import write_tomogram
        tomo = tmp_path / "z.gtmt"
        xg = make_grid(1, [(-3, 3, 11)])
        pg = make_grid(2, [(-2, 2, 5), (-2, 2, 5)])
        write_tomogram(tomo, TomogramFamily(
            x_grid=xg, param_grid=pg, values=np.zeros((25, 11)),
            family_tag="hyperplane"))
        recon = tmp_path / "r.gtm"
        assert main(["invert", str(tomo), "--family", "hyperplane",
                     "--q-box=-1,1;-1,1", "--q-count", "5;5",
                     "--out", str(recon)]) == 0
        assert np.all(read_field(recon).values == 0.0)


class TestExportCommand:
    def test_field_csv(self, tmp_path, gauss_field):
        out = tmp_path / "f.csv"
        assert main(["export", str(gauss_field), "--format", "csv",
                     "--out", str(out)]) == 0
        assert out.read_text().startswith("q1,q2,value\n")

    def test_field_pgm_peak(self, tmp_path, gauss_field, capsys):
        out = tmp_path / "f.pgm"
        assert main(["export", str(gauss_field), "--format", "pgm",
                     "--out", str(out)]) == 0
        assert "scaling" in capsys.readouterr().out
        raw = out.read_bytes()
        pix = np.frombuffer(raw.split(b"255\n", 1)[1], dtype=np.uint8)
        peak = np.argmax(read_field(gauss_field).values)
        assert np.argmax(pix) == peak

    def test_tomogram_csv(self, tmp_path, gauss_field):
        tomo = tmp_path / "t.gtmt"
        assert main(_forward_args(gauss_field, tomo)) == 0
        out = tmp_path / "t.csv"
        assert main(["export", str(tomo), "--format", "csv",
                     "--out", str(out)]) == 0
        assert out.read_text().startswith("param1,param2,X,omega\n")

    def test_3d_field_to_pgm_rejected(self, tmp_path):
        from gentomo.core import ScalarField, make_grid
        from gentomo.formats import write_field
        g = make_grid(3, [(-1, 1, 4)] * 3)
        path = tmp_path / "f3.gtm"
        write_field(path, ScalarField(g, np.zeros(g.size)))
        assert main(["export", str(path), "--format", "pgm",
                     "--out", str(tmp_path / "x.pgm")]) == 2

    def test_garbage_input_rejected(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"JUNKJUNKJUNK")
        assert main(["export", str(p), "--format", "csv",
                     "--out", str(tmp_path / "x.csv")]) == 2


class TestDeterminism:
    def test_thread_env_does_not_change_bytes(self, tmp_path, gauss_config,
                                              monkeypatch):
        outs = []
        for threads, name in (("1", "a"), ("0", "b")):
            monkeypatch.setenv("GENTOMO_THREADS", threads)
            field = tmp_path / f"{name}.gtm"
            tomo = tmp_path / f"{name}.gtmt"
            recon = tmp_path / f"{name}r.gtm"
            assert main(["phantom", str(gauss_config), "--out", str(field)]) == 0
            assert main(_forward_args(field, tomo)) == 0
            assert main(["invert", str(tomo), "--family", "hyperplane",
                         "--q-box=-2,2;-2,2", "--q-count", "9;9",
                         "--out", str(recon)]) == 0
            outs.append((field.read_bytes(), tomo.read_bytes(),
                         recon.read_bytes()))
        assert outs[0] == outs[1]

    def test_invalid_thread_env_exits_2(self, gauss_config, tmp_path,
                                        monkeypatch):
        monkeypatch.setenv("GENTOMO_THREADS", "many")
        assert main(["phantom", str(gauss_config),
                     "--out", str(tmp_path / "x.gtm")]) == 2


class TestCheckCommand:
    def test_quadric_support_suite(self, capsys):
        assert main(["check", "quadric-support", "--seed", "1"]) == 0
        printed = capsys.readouterr().out
        assert "PASS" in printed and "FAIL" not in printed

    def test_unknown_suite_rejected(self):
        # argparse rejects unknown choices with exit code 2
        with pytest.raises(SystemExit) as err:
            main(["check", "nonsense"])
        assert err.value.code == 2

    def test_oracle_agreement_deterministic(self, capsys):
        assert main(["check", "oracle-agreement", "--seed", "7",
                     "--samples", "50000"]) == 0
        first = capsys.readouterr().out
        assert main(["check", "oracle-agreement", "--seed", "7",
                     "--samples", "50000"]) == 0
        assert capsys.readouterr().out == first

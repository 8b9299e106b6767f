import re
import subprocess
import sys

import pytest

from polydeg.cli import main, num, parse_component_file, InputError

KEY_LINE = re.compile(r"^[A-Z][A-Z_]* ?")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_examples_exit_zero(capsys):
    for name in ("beerquiche", "gw", "fig1"):
        code, out, _ = run(capsys, "examples", name)
        assert code == 0, out
        assert "mismatch" not in out


def test_human_report_sections(capsys):
    code, out, _ = run(capsys, "examples", "beerquiche")
    assert code == 0
    for sec in ("GAME", "POLYTOPES", "COMPONENTS", "DEGREES", "CERTIFICATES"):
        assert f"== {sec} ==" in out
    assert "DEGREE gw pooling-beer +1" in out.splitlines()
    assert "DEGREE gw pooling-quiche 0" in out.splitlines()


def test_machine_mode_only_key_lines(capsys):
    code, out, _ = run(capsys, "examples", "gw", "--machine")
    assert code == 0
    lines = out.splitlines()
    assert lines and all(KEY_LINE.match(l) for l in lines)
    assert "DEGREE gw BL +1" in lines and "DEGREE gw T 0" in lines


def test_byte_identical_runs(capsys):
    _, a, _ = run(capsys, "check-plus-one", "fig1", "--method", "gw", "--machine")
    _, b, _ = run(capsys, "check-plus-one", "fig1", "--method", "gw", "--machine")
    assert a == b
    assert "-0 " not in a and not re.search(r"\s-0(\s|$)", a)


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("POLYDEG_SEED", "3")
    _, env3, _ = run(capsys, "check-plus-one", "gy1", "--machine")
    _, flag3, _ = run(capsys, "check-plus-one", "gy1", "--machine", "--seed", "3")
    monkeypatch.delenv("POLYDEG_SEED")
    _, zero, _ = run(capsys, "check-plus-one", "gy1", "--machine")
    assert env3 == flag3
    assert env3 != zero
    assert "CHECK plus-one ok" in env3 and "CHECK plus-one ok" in zero


def test_degree_command_with_component_file(tmp_path, capsys):
    comp = tmp_path / "beer.comp"
    comp.write_text("# pooling on beer\ncomponent pooling-beer\npoint 1 0 1 0 0 1 0.75 0.25\nradius 0.05\n")
    for method in ("pf", "km", "gw"):
        code, out, _ = run(capsys, "degree", "beerquiche", "--component", str(comp), "--method", method, "--machine")
        assert code == 0
        lines = out.splitlines()
        assert f"DEGREE {method} pooling-beer +1" in lines
        assert any(l.startswith("CERT det_min=") for l in lines)
        assert any(l.startswith("SOLUTION ") and l.endswith("sign=+1") for l in lines)
        if method == "gw":
            assert any(l.startswith("EPS 0 ") for l in lines)


def test_degree_command_mixed_coordinates(tmp_path, capsys):
    comp = tmp_path / "mixed.comp"
    comp.write_text("component beer\ncoords mixed\npoint 1 0 0 0 0 0 0.75 0.25\n")
    code, out, _ = run(capsys, "degree", "beerquiche", "--component", str(comp), "--method", "km", "--machine")
    assert code == 0 and "DEGREE km beer +1" in out.splitlines()


def test_equilibria_command(capsys):
    code, out, _ = run(capsys, "equilibria", "beerquiche", "--form", "enabling", "--machine")
    assert code == 0
    comps = [l for l in out.splitlines() if l.startswith("COMPONENT ")]
    assert comps == ["COMPONENT pooling-quiche 2 continuum", "COMPONENT pooling-beer 2 continuum"]
    assert "EQ pooling-beer 1 0 1 0 0 1 0.5 0.5" in out.splitlines()
    for form in ("normal", "reduced"):
        code, out, _ = run(capsys, "equilibria", "fig1", "--form", form, "--machine")
        assert code == 0 and out.count("COMPONENT ") == 4


def test_parse_and_enabling_commands(capsys):
    code, out, _ = run(capsys, "parse", "fig1", "--machine")
    assert code == 0 and "STRATEGIES 1 4" in out and "PERFECT_RECALL yes" in out
    code, out, _ = run(capsys, "enabling", "fig1", "--machine")
    assert code == 0
    assert "LAST 1 L L1 R1" in out and "LAST 2 l1 r1 l r" in out and "DIM 2 2" in out


def test_input_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.game"
    bad.write_text("players 2\nroot a\nnode a player 1 infoset i\n  action X -> b\n")
    code, out, err = run(capsys, "parse", str(bad))
    assert code == 1 and out == ""
    assert err.strip().startswith("ERROR dangling-reference:")
    code, _, err = run(capsys, "parse", str(tmp_path / "missing.game"))
    assert code == 1 and err.startswith("ERROR io:")
    comp = tmp_path / "far.comp"
    comp.write_text("component far\npoint 0.5 0.5 0.5 0.5 0.5 0.5 0.5 0.5\n")
    code, _, err = run(capsys, "degree", "beerquiche", "--component", str(comp))
    assert code == 1 and err.startswith("ERROR neighborhood:")
    comp.write_text("component short\npoint 1 0\n")
    code, _, err = run(capsys, "degree", "beerquiche", "--component", str(comp))
    assert code == 1 and err.startswith("ERROR component:")


def test_inconclusive_exit_two(tmp_path, capsys, monkeypatch):
    from polydeg import degree
    monkeypatch.setattr(degree, "DET_MIN", 1e9)
    code, _, err = run(capsys, "check-plus-one", "gy3")
    assert code == 2 and err.startswith("INCONCLUSIVE")


def test_mismatch_exit_three(capsys, monkeypatch):
    from polydeg import catalog
    monkeypatch.setitem(catalog._EXPECTED, "gy3", {"BL": -1})
    code, out, _ = run(capsys, "examples", "gw", "--machine")
    assert code == 3 and "CHECK gy3 BL mismatch" in out


def test_component_file_parser():
    ident, pts, radius, coords = parse_component_file("component x\npoint 1 2\npoint 3 4\nradius 0.1\n")
    assert ident == "x" and pts.shape == (2, 2) and radius == 0.1 and coords is None
    for text in ("point 1 2\n", "component x\n", "component x\npoint 1 a\n", "component x\npoint 1\nradius -1\n",
                 "component x\npoint 1\npoint 1 2\n"):
        with pytest.raises(InputError):
            parse_component_file(text)


def test_number_format():
    assert num(-0.0) == "0" and num(-1e-15) == "0"
    assert num(0.5) == "0.5" and num(1 / 3) == "0.333333"


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "polydeg.cli", "examples", "gw", "--machine"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "DEGREE gw BL +1" in res.stdout

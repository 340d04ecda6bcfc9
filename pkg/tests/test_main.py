from main import build_parser, main

from conftest import FIXTURES


def test_info_command(capsys):
    assert main(["info", str(FIXTURES / "mixed_prism_pyramid.msh")]) == 0
    out = capsys.readouterr().out
    assert "pyramid 6" in out


def test_solver_errors_become_exit_codes(tmp_path):
    assert main(["run", str(tmp_path / "missing.ini")]) == 1
    assert main(["info", str(FIXTURES / "tet10.msh")]) == 1


def test_parser_defaults():
    args = build_parser().parse_args(["accuracy", "--style", "tet"])
    assert args.levels == 2
    assert args.path is None
    args = build_parser().parse_args(["bench-recon", "cases/accuracy_hex.ini"])
    assert args.repetitions == 3 and args.steps == 1

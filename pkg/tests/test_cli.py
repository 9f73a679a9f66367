import json

import pytest

from sigma2lab.cli import main, parse_text, render_text
from sigma2lab.order import chain, diamond
from sigma2lab.textio import dump_structure, parse_pair_document, parse_structure

TWO = "usl two\nelements: 0 1\n0 < 1\nend\n"
THREE = "usl three\nelements: 0 a 1\n0 < a\na < 1\nend\n"
BELOW = "usl below\nelements: 0 m a 1\n0 < m\nm < a\na < 1\nend\n"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.mark.parametrize(
    "sentence,code",
    [
        ("exists x . x = x", 0),
        ("exists x . !(x = 1) & forall y . y <= x", 1),
        ("exists x . forall y . exists z . z = z", 4),
        ("exists x . x + ", 2),
        ("forall x . x <= 1", 0),
        ("exists a b c d . a = b", 3),
    ],
)
def test_decide_exit_codes(capsys, sentence, code):
    assert run(capsys, "decide", sentence)[0] == code


def test_decide_prints_verdict(capsys):
    _, out, _ = run(capsys, "decide", "exists x . x = x")
    assert parse_text(out)["result"] == "TRUE"


def test_caps_flags_are_honoured(capsys):
    assert run(capsys, "decide", "exists a b . a = b", "--max-exists", "1")[0] == 3
    assert run(capsys, "decide", "exists a b . a = b", "--max-exists", "0")[0] == 2


def test_text_and_json_carry_the_same_payload(capsys):
    _, text_out, _ = run(capsys, "decide", "exists x y . x + y = 1 & !(x = 1) & !(y = 1)", "--cert")
    _, json_out, _ = run(capsys, "decide", "exists x y . x + y = 1 & !(x = 1) & !(y = 1)", "--cert", "--format", "json")
    assert parse_text(text_out) == json.loads(json_out)


def test_render_round_trip():
    payload = {"a": 1, "b": "word", "c": "two\nlines\n", "d": [{"k": 1}, {"k": 2}], "e": [1, 2], "f": None}
    assert parse_text(render_text(payload)) == payload


def test_check_aee_exit_codes(capsys, tmp_path):
    good = write(tmp_path, "good.txt", TWO + THREE)
    assert run(capsys, "check-aee", good)[0] == 0
    bad = write(tmp_path, "bad.txt", THREE + BELOW)
    assert run(capsys, "check-aee", bad)[0] == 1
    broken = write(tmp_path, "broken.txt", "usl two\nelements: 0 1\n0 < 1\n")
    assert run(capsys, "check-aee", broken)[0] == 2
    assert run(capsys, "check-aee", str(tmp_path / "missing.txt"))[0] == 2


def test_enum_usl_counts(capsys):
    code, out, _ = run(capsys, "enum-usl", "4")
    assert code == 0
    data = parse_text(out)
    assert data["count"] == 5
    assert data["by_size"] == {"1": 1, "2": 1, "3": 1, "4": 2}


def test_free_ext_gives_three_chain(capsys, tmp_path):
    path = write(tmp_path, "two.txt", TWO)
    code, out, _ = run(capsys, "free-ext", path, "--format", "doc")
    assert code == 0
    w = parse_pair_document(out)
    assert w.big.size == 3 and w.big.leq.sum() == 6
    assert run(capsys, "check-aee", write(tmp_path, "ext.txt", out))[0] == 0


def test_decompose_and_verify_bundle(capsys, tmp_path):
    path = write(tmp_path, "pair.txt", TWO + THREE)
    code, bundle, _ = run(capsys, "decompose", path, "--format", "doc")
    assert code == 0
    again = write(tmp_path, "bundle.txt", bundle)
    assert run(capsys, "verify-bundle", again)[0] == 0
    bad = write(tmp_path, "bad.txt", THREE + BELOW)
    code, out, _ = run(capsys, "decompose", bad)
    assert code == 1 and parse_text(out)["decomposed"] is False


def test_table_and_rep_commands(capsys, tmp_path):
    lattice = write(tmp_path, "diamond.txt", dump_structure(diamond()))
    code, table, _ = run(capsys, "table", "build", lattice, "--format", "doc")
    assert code == 0
    assert run(capsys, "table", "verify", write(tmp_path, "t.txt", table))[0] == 0
    code, rep, _ = run(capsys, "rep", "build", lattice, "--coding", "--format", "doc")
    assert code == 0
    rep_path = write(tmp_path, "rep.txt", rep)
    assert run(capsys, "rep", "verify", rep_path)[0] == 0
    chain_path = write(tmp_path, "two.txt", TWO)
    assert run(capsys, "rep", "build", chain_path, "--coding")[0] == 1


def test_tree_commands(capsys, tmp_path):
    lattice = write(tmp_path, "diamond.txt", dump_structure(diamond()))
    _, rep, _ = run(capsys, "rep", "build", lattice, "--coding", "--format", "doc")
    rep_path = write(tmp_path, "rep.txt", rep)
    code, tree, _ = run(capsys, "tree", "identity", rep_path, "--depth", "4", "--format", "doc")
    assert code == 0
    tree_path = write(tmp_path, "tree.txt", tree)
    assert run(capsys, "tree", "check", tree_path)[0] == 0
    code, out, _ = run(capsys, "tree", "apply", tree_path, "--string", "0 3")
    assert code == 0 and parse_text(out)["image"] == [0, 3]
    code, out, _ = run(capsys, "tree", "encode", tree_path, "--pair", "a,b", "--bits", "101")
    assert code == 0
    path = parse_text(out)["path"]
    code, out, _ = run(capsys, "tree", "decode", rep_path, "--pair", "a,b", "--string", " ".join(map(str, path)))
    assert code == 0 and parse_text(out)["bits"] == [1, 0, 1]
    assert run(capsys, "tree", "encode", tree_path, "--pair", "a,1", "--bits", "1")[0] == 1


def test_unknown_command_is_bad_input(capsys):
    assert run(capsys, "no-such-command")[0] == 2


def test_structure_documents_round_trip():
    for U in (chain(4), diamond()):
        again = parse_structure(dump_structure(U))
        assert (again.leq == U.leq).all() and again.names == U.names

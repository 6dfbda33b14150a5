import csv
import hashlib
import json
import subprocess
import sys

import pytest

from bpve.cli import canonical_json, main, run
from conftest import RARE_JUMP, FALLING_ASLEEP

BIN = '{"mode":"rule","entries":[{"family":"binary","p":"1/2"}]}'
BIN08 = '{"mode":"rule","entries":[{"family":"binary","p":"0.8"}]}'
DIRAC1 = '{"mode":"rule","entries":[{"family":"finite","atoms":[[1, 1]]}]}'
POIS2 = '{"mode":"rule","entries":[{"family":"poisson","lambda":"2"}]}'
LF = '{"mode":"rule","entries":[{"family":"linear_fractional","p":"0.3","s1":"0.8"}]}'


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def invoke(spec_file, tmp_path, *args, text=BIN):
    spec = spec_file(text)
    out_csv = tmp_path / "out.csv"
    code, report = run([args[0], str(spec), *args[1:], "--csv", str(out_csv)])
    return code, report, out_csv


def test_moments(spec_file, tmp_path):
    code, rep, path = invoke(spec_file, tmp_path, "moments", "--n", "5")
    head, rows = read_csv(path)
    assert code == 0 and head == ["n", "mu", "nu", "rho", "S_nu", "S_rho", "J", "L"]
    assert [float(r[1]) for r in rows] == [1.0] * 5
    assert [float(r[4]) for r in rows] == [1, 2, 3, 4, 5]
    code, rep, path = invoke(spec_file, tmp_path, "moments", "--n", "3", text=DIRAC1)
    _, rows = read_csv(path)
    assert all(float(r[2]) == 0 and float(r[3]) == 0 for r in rows)
    code, rep, path = invoke(spec_file, tmp_path, "moments", "--n", "2", text=RARE_JUMP)
    _, rows = read_csv(path)
    assert [float(r[1]) for r in rows] == [3.0, 6.0]


def test_survival(spec_file, tmp_path):
    code, rep, path = invoke(spec_file, tmp_path, "survival", "--n", "2", "--pmf", "4")
    assert code == 0 and rep["result"]["survival"] == 0.375
    assert rep["result"]["pmf"].tolist() == [0.625, 0, 0.25, 0, 0.125]
    code, rep, path = invoke(spec_file, tmp_path, "survival", "--n", "10", text=DIRAC1)
    _, rows = read_csv(path)
    assert all(float(r[1]) == 1.0 for r in rows)
    code, rep, path = invoke(spec_file, tmp_path, "survival", "--n", "100", text=FALLING_ASLEEP)
    _, rows = read_csv(path)
    p = [float(r[1]) for r in rows]
    assert all(b <= a for a, b in zip(p, p[1:])) and p[-1] > 0.46
    assert p[-2] - p[-1] < 1e-4
    assert rep["result"]["max_representation_residual"] < 1e-9


@pytest.mark.parametrize("text,verdict", [(BIN08, "supercritical"), (FALLING_ASLEEP, "asymptotically_degenerate"),
                                          (BIN, "critical")])
def test_classify(spec_file, tmp_path, text, verdict):
    code, rep, _ = invoke(spec_file, tmp_path, "classify", "--horizon", "10000", text=text)
    assert code == 0 and rep["result"]["verdict"] == verdict


def test_classify_undetermined_exit_code(spec_file, tmp_path):
    text = '{"mode":"rule","entries":[{"family":"binary","p":"0.5"}]}'
    # an absurdly tight ratio makes the critical proxy fail
    code, rep, _ = invoke(spec_file, tmp_path, "classify", "--horizon", "1000", "--ratio", "1e-9", text=text)
    assert code == 3 and rep["result"]["verdict"] == "undetermined"


def test_yaglom_exact_and_guard(spec_file, tmp_path):
    code, rep, path = invoke(spec_file, tmp_path, "yaglom", "--n", "200", "--pmf", "3000")
    assert code == 0 and rep["result"]["ks"] < 0.05
    assert rep["result"]["a_n"] == pytest.approx(100)
    head, rows = read_csv(path)
    assert head == ["x", "empirical", "exponential"]
    xs = [float(r[0]) for r in rows]
    assert xs == sorted(xs)
    code, rep, _ = invoke(spec_file, tmp_path, "yaglom", "--n", "10", "--pmf", "10", text=DIRAC1)
    assert code == 5 and rep is None


def test_yaglom_mc_deterministic(spec_file, tmp_path, capsys):
    spec = spec_file(BIN)
    outs = []
    for w in ("1", "4"):
        out = tmp_path / f"r{w}.json"
        assert main(["yaglom", str(spec), "--n", "100", "--mc", "50000", "--seed", "42",
                     "--workers", w, "--block-size", "4096", "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        rep.pop("timing")
        outs.append(canonical_json(rep))
    assert outs[0] == outs[1]


def test_no_survivors_exit_code(spec_file, tmp_path):
    text = '{"mode":"explicit","entries":[{"family":"binary","p":"0.5"},{"family":"binary","p":"0.5"},' \
           '{"family":"finite","atoms":[[0,"0.999999"],[1000000,"0.000001"]]}]}'
    code, rep, _ = invoke(spec_file, tmp_path, "yaglom", "--n", "3", "--mc", "10", "--seed", "1", text=text)
    assert code == 4


def test_conditions(spec_file, tmp_path):
    code, rep, path = invoke(spec_file, tmp_path, "conditions", "--horizon", "20", text=POIS2)
    assert code == 0 and rep["result"]["C"]["sup"] <= 1
    code, rep, _ = invoke(spec_file, tmp_path, "conditions", "--horizon", "20", text=LF)
    assert rep["result"]["A"]["sup"] <= 4
    code, rep, path = invoke(spec_file, tmp_path, "conditions", "--horizon", "5", text=DIRAC1)
    _, rows = read_csv(path)
    assert all(float(x) == 0 for r in rows for x in r[1:])
    assert rep["result"]["dominance_A_ok"] and rep["result"]["dominance_B_ok"]


def test_shape(spec_file, tmp_path):
    code, rep, path = invoke(spec_file, tmp_path, "shape", "--points", "11")
    assert code == 0 and rep["result"]["certificate_holds"]
    _, rows = read_csv(path)
    assert len(rows) == 11 and float(rows[5][1]) == pytest.approx(2 / 3)


def test_spec_error_exit_code(spec_file, tmp_path, capsys):
    code, rep, _ = invoke(spec_file, tmp_path, "moments", "--n", "3",
                          text='{"mode":"rule","entries":[{"family":"binary","p":"1/(2"}]}')
    assert code == 2
    assert "column" in capsys.readouterr().err
    assert main(["moments", str(tmp_path / "missing.json"), "--n", "2"]) == 2


def test_digest_round_trip_and_canonical_output(spec_file, tmp_path):
    spec = spec_file(RARE_JUMP)
    texts = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        main(["moments", str(spec), "--n", "50", "--out", str(out)])
        texts.append(out.read_text())
    reps = [json.loads(t) for t in texts]
    assert reps[0]["spec_digest"] == hashlib.sha256(spec.read_bytes()).hexdigest()
    for r in reps:
        r.pop("timing")
    assert canonical_json(reps[0]) == canonical_json(reps[1])
    # the report digest covers everything except timing and itself
    r = reps[0]
    d = r.pop("report_digest")
    assert hashlib.sha256(canonical_json(r).encode()).hexdigest() == d


def test_canonical_json_formatting():
    assert canonical_json({"b": 1.0 / 3, "a": [float("inf"), float("nan"), True, None, 2]}) == \
        '{"a":["inf","nan",true,null,2],"b":0.333333333333}'


def test_module_entry_point(spec_file):
    spec = spec_file(BIN)
    res = subprocess.run([sys.executable, "-m", "bpve", "survival", str(spec), "--n", "2"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["result"]["survival"] == 0.375

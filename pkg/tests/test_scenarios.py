import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from darbouxlvn.errors import ScenarioParseError, ScenarioValidationError
from darbouxlvn.evolution import u_linear_of_t
from darbouxlvn.scenarios import (
    RunOutput,
    TimeGrid,
    atomic_write,
    builtin_scenarios,
    dump_scenario,
    equally_spaced_scenario,
    get_builtin,
    load_scenario,
    loads,
    oscillator_scenario,
    resolve_scenario,
    run,
    to_csv,
    to_json,
    write_output,
)

R2, R5, R7, R15 = (math.sqrt(x) for x in (2, 5, 7, 15))


def small(name, steps=20, **kw):
    sp = get_builtin(name)
    return sp.with_overrides(grid=TimeGrid(sp.grid.start, sp.grid.end, steps), **kw)


def test_builtin_names():
    assert [s.name for s in builtin_scenarios()] == ["ex51", "ex52", "ex53", "ex54", "ex55", "ex56"]
    with pytest.raises(KeyError):
        get_builtin("ex99")


def test_builtin_matrices():
    sp = get_builtin("ex51")
    assert np.array_equal(sp.H, np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1 / R2]]))
    assert sp.a == 1.0 and sp.mu == 1j
    sp = get_builtin("ex56")
    assert np.array_equal(sp.U0, np.diag([5 + R7, 5 - R7, 5 + R15, 5 - R15]) / 2)
    assert sp.a == 5.0 and sp.dims == (2, 2)
    sp = get_builtin("ex53")
    assert np.trace(sp.U0).real == pytest.approx((15 + R5) / 2, abs=1e-14)
    assert sp.H.shape == (6, 6)
    assert get_builtin("ex54").epsilon == 0.1 and get_builtin("ex54").mu == 10j
    assert get_builtin("ex55").variant == "homogeneous"


def test_family_spectrum():
    sp = get_builtin("ex52")
    k, m = sp.family["k"], sp.family["m"]
    assert np.allclose(np.linalg.eigvalsh(sp.H), [k, k + m, k + 2 * m], atol=1e-14)


def test_every_builtin_validates():
    for sp in builtin_scenarios():
        sp.validate()


@pytest.mark.parametrize("name", ["ex51", "ex52", "ex53", "ex54", "ex55", "ex56"])
def test_round_trip(name, tmp_path):
    sp = get_builtin(name).with_overrides(gauge_lambda=0.25 if name != "ex55" else None,
                                          iterations=1, iteration_mu=(3j,))
    assert loads(sp.dumps()) == sp
    p = tmp_path / f"{name}.json"
    dump_scenario(sp, p)
    back = load_scenario(p)
    assert back == sp and back.digest() == sp.digest()
    assert np.array_equal(back.H, sp.H) and np.array_equal(back.U0, sp.U0)


@settings(max_examples=25)
@given(st.floats(0.1, 3), st.floats(-0.5, 0.5), st.floats(0.6, 1.4))
def test_round_trip_is_lossless(k, lam, m):
    sp = equally_spaced_scenario(k=k, m=m).with_overrides(gauge_lambda=lam)
    assert loads(sp.dumps()) == sp


def test_family_only_file_builds_matrices():
    d = get_builtin("ex52").to_dict()
    del d["H"], d["U0"]
    sp = loads(json.dumps(d))
    assert np.array_equal(sp.H, get_builtin("ex52").H)


def test_b_zero_rejected():
    d = get_builtin("ex52").to_dict()
    del d["H"], d["U0"]
    d["family"]["b"] = 0.0
    with pytest.raises(ScenarioValidationError) as exc:
        loads(json.dumps(d))
    assert "b != 0" in exc.value.failures


def test_failures_are_all_named():
    d = get_builtin("ex52").to_dict()
    del d["H"], d["U0"]
    d["family"].update(a=-1.0, c=-2.0)
    with pytest.raises(ScenarioValidationError) as exc:
        loads(json.dumps(d, indent=1))
    assert {"a > 0", "c >= 0"} <= set(exc.value.failures)


def test_malformed_complex_reports_line():
    text = get_builtin("ex51").dumps()
    lines = text.splitlines()
    idx = next(i for i, l in enumerate(lines) if l.strip().startswith('"mu"'))
    text = text.replace('"mu": [\n  0.0,\n  1.0\n ]', '"mu": [0.0, "one"]')
    with pytest.raises(ScenarioParseError) as exc:
        loads(text)
    assert exc.value.line == idx + 1
    assert "mu" in str(exc.value)


def test_malformed_matrix_entry_position():
    d = get_builtin("ex51").to_dict()
    d["U0"][2][1] = [0.0]
    text = json.dumps(d)
    with pytest.raises(ScenarioParseError) as exc:
        loads(text)
    assert exc.value.line == 1
    assert text[exc.value.column - 1] == "["
    assert text[exc.value.column - 1:].startswith("[0.0]")


def test_invalid_json_and_missing_fields():
    with pytest.raises(ScenarioParseError) as exc:
        loads('{"name": "x",\n "a": }')
    assert exc.value.line == 2
    with pytest.raises(ScenarioParseError, match="missing field 'mu'"):
        loads('{"name": "x", "a": 1.0, "H": [[1]], "U0": [[1]]}')
    d = get_builtin("ex51").to_dict()
    d["variant"]["kind"] = "cubic"
    with pytest.raises(ScenarioParseError, match="unknown variant"):
        loads(json.dumps(d))


def test_validation_rules():
    sp = get_builtin("ex51")
    cases = [
        (dict(mu=2.0), "Im(mu) != 0"),
        (dict(a=0.3), "[U0^2 - a U0, H] = 0"),
        (dict(A=1.0), "|A|^2 + |B|^2 = 1"),
        (dict(grid=TimeGrid(1.0, 0.0, 10)), "grid has end > start and steps >= 2"),
        (dict(iterations=2, iteration_mu=(2j,)), "one iteration_mu per iteration"),
    ]
    for kw, rule in cases:
        with pytest.raises(ScenarioValidationError) as exc:
            sp.with_overrides(**kw).validate()
        assert any(f.startswith(rule) for f in exc.value.failures), (rule, exc.value.failures)
    with pytest.raises(ScenarioValidationError, match="H = H1 x 1"):
        get_builtin("ex56").with_overrides(H2=np.eye(2)).validate()


def test_resolve(tmp_path):
    assert resolve_scenario("ex51") == get_builtin("ex51")
    p = tmp_path / "s.json"
    dump_scenario(get_builtin("ex56"), p)
    assert resolve_scenario(str(p)).name == "ex56"
    with pytest.raises(FileNotFoundError):
        resolve_scenario(str(tmp_path / "missing.json"))


def test_iteration_mus_default():
    sp = get_builtin("ex51").with_overrides(iterations=2)
    assert sp.iteration_mus() == (2j, 3j)
    assert sp.with_overrides(iteration_mu=(5j, 7j)).iteration_mus() == (5j, 7j)


def test_oscillator_truncation_check():
    with pytest.raises(ValueError):
        oscillator_scenario(levels=3, l=1)


@pytest.mark.parametrize("name", ["ex51", "ex52", "ex53", "ex54", "ex55", "ex56"])
def test_verify_every_builtin_on_default_grid(name):
    out = run(get_builtin(name), "verify")
    assert out.residuals.max_ode_residual < 1e-5
    assert out.max_rk4_deviation < 1e-6
    assert out.passed


def test_verify_ex51_on_positive_half():
    out = run(get_builtin("ex51").with_overrides(grid=TimeGrid(0.0, 5.0, 5000)), "verify")
    assert out.residuals.max_ode_residual < 1e-5


def test_evolve_mode_has_no_checks():
    out = run(small("ex51"), "evolve")
    assert out.residuals is None and out.subsystem is None and out.passed is None
    assert len(out.series) == 21


def test_subsystem_mode():
    out = run(small("ex56", 40), "subsystem")
    t = out.series.times
    p1 = 0.5 + (R15 - R7) / 20 * np.tanh(2 * t)
    p2 = 0.5 + np.sqrt(26 + 2 * math.sqrt(105)) / (40 * np.cosh(2 * t))
    assert np.abs(out.subsystem.normalized_spectra[1].max(axis=1) - p2).max() < 1e-10
    # p_+(1) - p_-(1) changes sign at t = 0 so compare as sorted pairs
    pair = np.sort(np.stack([p1, 1 - p1], axis=1), axis=1)
    assert np.abs(out.subsystem.normalized_spectra[2] - pair).max() < 1e-10
    with pytest.raises(ScenarioValidationError):
        run(small("ex51"), "subsystem")
    with pytest.raises(ValueError):
        run(small("ex51"), "sideways")


def test_late_time_tends_to_linear():
    sp = get_builtin("ex51").with_overrides(grid=TimeGrid(10.0, 30.0, 4))
    out = run(sp, "evolve")
    ctx = sp.context()
    devs = [np.linalg.norm(M - u_linear_of_t(ctx, t)) for t, M in zip(out.series.times, out.series.matrices)]
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 1e-5


def test_outputs_deterministic(tmp_path):
    sp = small("ex56", 10)
    paths = []
    for i in range(2):
        for fmt in ("csv", "json"):
            p = tmp_path / f"{i}.{fmt}"
            write_output(run(sp, "subsystem"), p, fmt)
            paths.append(p)
    assert paths[0].read_bytes() == paths[2].read_bytes()
    assert paths[1].read_bytes() == paths[3].read_bytes()


def test_provenance_identifies_inputs():
    a = run(small("ex51"), "evolve").provenance
    b = run(small("ex51", 21), "evolve").provenance
    c = run(small("ex51"), "verify").provenance
    assert a["scenario_sha256"] != b["scenario_sha256"]
    assert len({a["run_sha256"], b["run_sha256"], c["run_sha256"]}) == 3


def test_csv_layout():
    out = run(small("ex51", 4), "verify")
    lines = to_csv(out).splitlines()
    header = lines[0].split(",")
    assert header[:3] == ["t", "re_0_0", "im_0_0"]
    assert "eig_2" in header and header[-1] == "rk4_deviation"
    assert len(lines) == 6
    row = dict(zip(header, map(float, lines[1].split(","))))
    assert row["t"] == -5.0
    assert row["re_0_0"] == out.series.matrices[0][0, 0].real


def test_json_report():
    out = run(small("ex56", 10), "subsystem")
    doc = json.loads(to_json(out))
    assert doc["summary"]["points"] == 11
    assert doc["summary"]["max_abs_energy"] < 1e-9
    assert doc["scenario"]["name"] == "ex56"
    assert len(doc["rows"][0]) == len(doc["columns"])
    with pytest.raises(ValueError):
        write_output(out, "x.txt", "xml")


def test_atomic_write_replaces_and_cleans(tmp_path):
    p = tmp_path / "out.csv"
    p.write_text("old")
    atomic_write(p, "new")
    assert p.read_text() == "new"
    assert os.listdir(tmp_path) == ["out.csv"]
    with pytest.raises(FileNotFoundError):
        atomic_write(tmp_path / "nope" / "x", "y")


def test_run_output_verdict_thresholds():
    out = run(small("ex51", 4), "verify", fd_step=0.5)
    assert isinstance(out, RunOutput)
    assert out.passed is False

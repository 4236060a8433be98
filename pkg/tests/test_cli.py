import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from harper_tknn import KGrid, track_irrational, validate_model, verify_all
from harper_tknn.butterfly import ButterflyDataset, ResultCache, render_svg, row_is_symmetric, sweep
from harper_tknn.cli import main, read_config
from harper_tknn.serialize import (
    chart_from_dict,
    record_from_dict,
    record_to_dict,
    spectrum_to_dict,
    trace_from_dict,
    trace_to_dict,
)
from harper_tknn.spectral import band_structure, gap_chart

DATA = Path(__file__).parent / "data"
SVG_NS = "{http://www.w3.org/2000/svg}"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def model_flags(q, r, M, N):
    return ["--q", q, "--r", r, "--M", M, "--N", N]


def test_spectrum_json(capsys):
    code, out, _ = run(capsys, "spectrum", *model_flags(1, 0, 1, 3), "--grid", "32x32", "--json")
    assert code == 0
    obj = json.loads(out)
    assert len(obj["bands"]) == 3
    assert [g["status"] for g in obj["gaps"]] == ["open"] * 4
    assert {k: obj[k] for k in ("q", "r", "M", "N", "M0", "grid")} == {"q": 1, "r": 0, "M": 1, "N": 3, "M0": 1, "grid": [32, 32]}
    chart = chart_from_dict(obj)
    assert chart.open_labels == [0, 1, 2, 3]
    assert chart.gaps[0].e_lo == -math.inf


def test_spectrum_invalid_names_pair(capsys):
    code, _, err = run(capsys, "spectrum", *model_flags(2, 1, 1, 4))
    assert code == 2
    assert "gcd(q,N) != 1" in err


def test_spectrum_csv_half_flux(capsys):
    code, out, _ = run(capsys, "spectrum", *model_flags(1, 0, 1, 2), "--csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("q,r,M,N,M0,grid,kind")
    gaps = [ln.split(",") for ln in lines[1:] if ",gap," in ln]
    assert [(g[7], g[9]) for g in gaps] == [("0", "open"), ("1", "closed"), ("2", "open")]


def test_spectrum_text(capsys):
    code, out, _ = run(capsys, "spectrum", *model_flags(1, 0, 1, 3), "--rep", "canonical")
    assert code == 0 and "rep=canonical" in out


def test_verify_table(capsys):
    code, out, _ = run(capsys, "verify", *model_flags(1, 0, 1, 3))
    assert code == 0
    body = [ln.split() for ln in out.splitlines()[2:6]]
    assert [tuple(map(int, row[:4])) for row in body] == [(0, 0, 0, 0), (1, 1, 0, 1), (2, 2, 1, -1), (3, 3, 1, 0)]


def test_verify_generalized_json_round_trip(capsys, gen213):
    code, out, _ = run(capsys, "verify", *model_flags(2, 1, 1, 3), "--json")
    assert code == 0
    obj = json.loads(out)
    assert obj["all_match"] and obj["M0"] == -1
    recs = [record_from_dict(g) for g in obj["gaps"]]
    assert recs == verify_all(gen213)
    for rec in recs:
        assert isinstance(rec.t_num, int) and 3 * rec.t_num - rec.s_num == 2 * rec.d
    assert (recs[-1].t_num, recs[-1].s_num) == (2, 0)


def test_verify_csv(capsys):
    code, out, _ = run(capsys, "verify", *model_flags(1, 0, 1, 4), "--csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "q,r,M,N,M0,grid,g,d,status,e_lo,e_hi,t_num,s_num,t_dio,s_dio,match"
    assert len(lines) == 5


def test_verify_canonical_flag(capsys):
    code, out, _ = run(capsys, "verify", *model_flags(2, 1, 1, 3), "--canonical", "--json")
    assert code == 0
    assert [g["c_ext"] for g in json.loads(out)["gaps"]] == [0, 1, -1, 0]


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", *model_flags(1, 0, 1, 9999)],
        ["verify", "--q", 1, "--r", 0, "--M", 1],
        ["verify", *model_flags(1, 1, 1, 3)],
        ["verify", *model_flags(1, 0, 1, 3), "--grid", "32"],
        ["track", "--q", 1, "--theta", "1.5", "--ids", 0.3],
        ["butterfly", "--q", 2, "--r", 0, "--nmax", 4],
    ],
)
def test_invalid_input_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_numerical_failure_exit_3(capsys, monkeypatch):
    import harper_tknn.tknn as tknn_mod

    def coarse(*a, **k):
        from harper_tknn.errors import GridTooCoarse

        raise GridTooCoarse(3.0, None)

    monkeypatch.setattr(tknn_mod, "reference_chern", coarse)
    assert run(capsys, "verify", *model_flags(1, 0, 1, 3))[0] == 3


def test_verification_failure_exit_1(capsys, monkeypatch):
    import harper_tknn.tknn as tknn_mod
    from harper_tknn.numtheory import DiophantineSolution

    monkeypatch.setattr(tknn_mod, "tknn_solve", lambda model, d: DiophantineSolution(99, 99, d))
    assert run(capsys, "verify", *model_flags(1, 0, 1, 3))[0] == 1


def test_chern_command(capsys):
    code, out, _ = run(capsys, "chern", *model_flags(2, 1, 1, 3), "--gap", 1, "--json")
    assert code == 0
    obj = json.loads(out)
    assert (obj["d"], obj["t"], obj["s"]) == (1, 1, 1)
    assert obj["reference"]["c"] == -1 and obj["canonical_extended"]["c"] == 1 and obj["duality"]
    assert obj["canonical_extended"]["span2"] == 3
    assert obj["reference"]["max_plaquette"] < math.pi
    code, out, _ = run(capsys, "chern", *model_flags(1, 0, 1, 3), "--d", 3)
    assert code == 0 and "duality holds" in out


def test_chern_closed_gap_exit_1(capsys):
    code, _, err = run(capsys, "chern", *model_flags(1, 0, 1, 2), "--d", 1)
    assert code == 1 and "not spectrally isolated" in err


def test_chern_requires_gap(capsys):
    assert run(capsys, "chern", *model_flags(1, 0, 1, 3))[0] == 2


def test_out_directory(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", *model_flags(1, 0, 1, 3), "--json", "--out", tmp_path)
    assert code == 0 and out == ""
    obj = json.loads((tmp_path / "verify_q1_r0_M1_N3.json").read_text())
    assert obj["all_match"]


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# hofstadter\nq = 1\nr = 0\nM = 1\nN = 3\ngrid = 16x16\njson = true\n")
    code, out, _ = run(capsys, "--config", cfg, "verify")
    assert code == 0 and json.loads(out)["grid"] == [16, 16]
    code, out, _ = run(capsys, "--config", cfg, "verify", "--M", 2, "--grid", "8x8")
    obj = json.loads(out)
    assert code == 0 and obj["M"] == 2 and obj["grid"] == [8, 8]
    assert read_config(cfg)["json"] is True


def test_bad_config(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("q 1\n")
    assert run(capsys, "--config", cfg, "verify")[0] == 2
    assert run(capsys, "--config", tmp_path / "missing.cfg", "verify")[0] == 2


def test_track_command(capsys):
    code, out, _ = run(capsys, "track", "--q", 1, "--r", 0, "--theta", "0.6180339887", "--depth", 5, "--ids", 0.382)
    assert code == 0
    obj = json.loads(out)
    assert obj["stable"] and obj["label"] == {"m": 1, "c1bar": 1}
    trace = trace_from_dict(obj)
    assert trace_to_dict(trace) == obj
    ok = [(e.M, e.N, e.record.s_num) for e in trace.hits]
    assert ok == [(2, 3, -1), (3, 5, -1), (5, 8, -1), (8, 13, -1)]


def test_track_fraction_theta(capsys):
    code, out, _ = run(capsys, "track", "--q", 1, "--theta", "1/3", "--ids", 0.3333)
    assert code == 0 and len(json.loads(out)["convergents"]) == 1


def test_track_instability_exit_1(capsys, monkeypatch):
    import harper_tknn.cli as cli_mod

    real = cli_mod.track_irrational

    def flipped(*a, **k):
        trace = real(*a, **k)
        trace.entries[-1].record.s_num += 1
        return trace

    monkeypatch.setattr(cli_mod, "track_irrational", flipped)
    code, out, _ = run(capsys, "track", "--q", 1, "--theta", "0.6180339887", "--depth", 5, "--ids", 0.382)
    assert code == 1 and json.loads(out)["stable"] is False


def test_record_round_trip_exact_ints(hof3):
    for rec in verify_all(hof3, with_canonical=True):
        back = record_from_dict(json.loads(json.dumps(record_to_dict(rec))))
        assert back == rec
        assert all(type(getattr(back, f)) is int for f in ("d", "t_num", "s_num", "t_dio", "s_dio", "c_ext"))


def test_spectrum_round_trip(hof3):
    chart = gap_chart(band_structure(hof3, KGrid(16, 16)))
    back = chart_from_dict(json.loads(json.dumps(spectrum_to_dict(hof3, KGrid(16, 16), chart, "reference"))))
    assert back.gaps == chart.gaps
    assert (back.band_edges == chart.band_edges).all()


def test_trace_round_trip():
    trace = track_irrational((5**0.5 - 1) / 2, 2, 1, 6, 0.382)
    back = trace_from_dict(json.loads(json.dumps(trace_to_dict(trace))))
    assert back.entries == trace.entries and back.label == trace.label and back.stable == trace.stable


def test_butterfly_small(capsys, tmp_path):
    svg = tmp_path / "b.svg"
    code, out, _ = run(capsys, "butterfly", "--q", 1, "--r", 0, "--nmax", 2, "--svg", svg)
    assert code == 0
    ds = ButterflyDataset.from_dict(json.loads(out))
    assert [(row.M, row.N) for row in ds.rows] == [(1, 2)]
    root = ET.parse(svg).getroot()
    assert root.tag == SVG_NS + "svg"
    groups = root.findall(SVG_NS + "g")
    assert [g.get("data-flux") for g in groups] == ["1/2"]


def test_butterfly_rows_verify(capsys):
    code, out, _ = run(capsys, "butterfly", "--q", 1, "--r", 0, "--nmax", 6)
    ds = ButterflyDataset.from_dict(json.loads(out))
    assert code == 0 and ds.verified
    assert sorted({row.N for row in ds.rows}) == [2, 3, 4, 5, 6]
    assert [row.theta for row in ds.rows] == sorted(row.theta for row in ds.rows)
    for row in ds.rows:
        model = validate_model(1, 0, row.M, row.N)
        assert all(model.N * g["t"] + model.M0 * g["s"] == g["d"] for g in row.gaps)
        assert row_is_symmetric(row)


def test_butterfly_generalized_skips_even(capsys):
    code, out, _ = run(capsys, "butterfly", "--q", 2, "--r", 1, "--nmax", 6)
    assert code == 0
    assert all(row["N"] % 2 for row in json.loads(out)["rows"])


def test_cache_byte_identical(capsys, tmp_path):
    argv = ["butterfly", "--q", 1, "--r", 0, "--nmax", 5, "--grid", "16x16"]
    code, fresh, _ = run(capsys, *argv, "--no-cache")
    assert code == 0
    assert not any((tmp_path / "cache").glob("*.json")) if (tmp_path / "cache").exists() else True
    _, first, _ = run(capsys, *argv)
    cached = list((tmp_path / "cache").glob("*.json"))
    assert len(cached) == 9
    _, second, _ = run(capsys, *argv)
    assert fresh == first == second
    assert not list((tmp_path / "cache").glob("*.tmp"))


def test_cache_key_changes_with_inputs(tmp_path):
    k = ResultCache.key(1, 0, 1, 3, KGrid(32, 32), 1e-6)
    assert k != ResultCache.key(1, 0, 1, 3, KGrid(16, 32), 1e-6)
    assert k != ResultCache.key(1, 0, 1, 3, KGrid(32, 32), 1e-7)
    cache = ResultCache(tmp_path)
    cache.put(k, {"x": 1})
    assert cache.get(k) == {"x": 1}
    assert cache.get(ResultCache.key(2, 1, 1, 3, KGrid(32, 32), 1e-6)) is None


def test_sweep_parallel_matches_serial():
    a = sweep(1, 0, 5, KGrid(16, 16), jobs=1)
    b = sweep(1, 0, 5, KGrid(16, 16), jobs=4)
    assert a.to_dict() == b.to_dict()


def test_svg_deterministic_and_golden():
    ds = sweep(1, 0, 3, KGrid(8, 8))
    svg = render_svg(ds, "t")
    assert svg == render_svg(sweep(1, 0, 3, KGrid(8, 8)), "t")
    assert svg == (DATA / "butterfly_q1_r0_n3_8x8.svg").read_text()
    root = ET.fromstring(svg)
    rects = [g.findall(SVG_NS + "rect") for g in root.findall(SVG_NS + "g")]
    # one black rect per band, plus coloured internal gaps
    assert [sum(r.get("fill") == "black" for r in rs) for rs in rects] == [3, 2, 3]
    plain = render_svg(ds, "none")
    assert all(r.get("fill") == "black" for g in ET.fromstring(plain).findall(SVG_NS + "g") for r in g)
    with pytest.raises(ValueError):
        render_svg(ds, "x")

"""JSON / CSV encodings of charts, TKNN records and gap traces.

Field names are part of the public surface; change them only together with
``SCHEMA_VERSION``.  Infinite gap edges (inf-gap, sup-gap) are written as null.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .numtheory import HarperModel
from .spectral import Gap, GapChart, KGrid
from .tknn import GapTrace, TknnRecord, TraceEntry

SCHEMA_VERSION = 1

RECORD_FIELDS = ("g", "d", "status", "e_lo", "e_hi", "t_num", "s_num", "t_dio", "s_dio", "match")


def edge_value(x):
    return None if x is None or math.isinf(x) else float(x)


def _unedge(x, default):
    return default if x is None else float(x)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def model_header(model: HarperModel, grid: KGrid) -> dict:
    return {
        "q": model.q,
        "r": model.r,
        "M": model.M,
        "N": model.N,
        "M0": model.M0,
        "grid": [grid.n1, grid.n2],
    }


def gap_to_dict(gap: Gap) -> dict:
    return {"g": gap.g, "d": gap.d, "status": gap.status, "e_lo": edge_value(gap.e_lo), "e_hi": edge_value(gap.e_hi)}


def gap_from_dict(obj) -> Gap:
    return Gap(
        d=int(obj["d"]),
        status=obj["status"],
        e_lo=_unedge(obj["e_lo"], -math.inf),
        e_hi=_unedge(obj["e_hi"], math.inf),
        g=None if obj["g"] is None else int(obj["g"]),
    )


def spectrum_to_dict(model, grid, chart: GapChart, rep) -> dict:
    out = model_header(model, grid)
    out["rep"] = rep
    out["bands"] = [
        {"band": j + 1, "e_min": float(lo), "e_max": float(hi)} for j, (lo, hi) in enumerate(chart.band_edges)
    ]
    out["gaps"] = [gap_to_dict(gap) for gap in chart.gaps]
    return out


def chart_from_dict(obj) -> GapChart:
    edges = np.array([[b["e_min"], b["e_max"]] for b in obj["bands"]])
    return GapChart([gap_from_dict(g) for g in obj["gaps"]], edges)


def record_to_dict(rec: TknnRecord) -> dict:
    out = {
        "g": rec.g,
        "d": rec.d,
        "status": rec.status,
        "e_lo": edge_value(rec.e_lo),
        "e_hi": edge_value(rec.e_hi),
        "t_num": rec.t_num,
        "s_num": rec.s_num,
        "t_dio": rec.t_dio,
        "s_dio": rec.s_dio,
        "match": rec.match,
    }
    if rec.ids_value is not None:
        out["ids"] = rec.ids_value
    if rec.c_ext is not None:
        out["c_ext"] = rec.c_ext
    return out


def record_from_dict(obj) -> TknnRecord:
    def opt_int(key):
        v = obj.get(key)
        return None if v is None else int(v)

    return TknnRecord(
        g=opt_int("g"),
        d=int(obj["d"]),
        status=obj["status"],
        e_lo=_unedge(obj["e_lo"], -math.inf),
        e_hi=_unedge(obj["e_hi"], math.inf),
        t_num=opt_int("t_num"),
        s_num=opt_int("s_num"),
        t_dio=opt_int("t_dio"),
        s_dio=opt_int("s_dio"),
        ids_value=obj.get("ids"),
        c_ext=opt_int("c_ext"),
        match=bool(obj["match"]),
    )


def verify_to_dict(model, grid, records) -> dict:
    out = model_header(model, grid)
    out["gaps"] = [record_to_dict(r) for r in records]
    out["all_match"] = all(r.match for r in records if r.status == "open")
    return out


def trace_to_dict(trace: GapTrace) -> dict:
    return {
        "theta": trace.theta,
        "q": trace.q,
        "r": trace.r,
        "target_ids": trace.target_ids,
        "window": trace.window,
        "label": None if trace.label is None else {"m": trace.label[0], "c1bar": trace.label[1]},
        "stable": trace.stable,
        "identities_hold": trace.identities_hold,
        "convergents": [
            {
                "M": e.M,
                "N": e.N,
                "status": e.status,
                "identity": e.identity,
                "note": e.note,
                "record": None if e.record is None else record_to_dict(e.record),
            }
            for e in trace.entries
        ],
    }


def trace_from_dict(obj) -> GapTrace:
    label = obj["label"]
    trace = GapTrace(
        theta=obj["theta"],
        q=int(obj["q"]),
        r=int(obj["r"]),
        target_ids=obj["target_ids"],
        window=obj["window"],
        label=None if label is None else (int(label["m"]), int(label["c1bar"])),
    )
    for e in obj["convergents"]:
        rec = None if e["record"] is None else record_from_dict(e["record"])
        trace.entries.append(TraceEntry(int(e["M"]), int(e["N"]), e["status"], rec, e["identity"], e["note"]))
    return trace


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return ""
    return x


def spectrum_to_csv(model, grid, chart: GapChart) -> str:
    head = [model.q, model.r, model.M, model.N, model.M0, f"{grid.n1}x{grid.n2}"]
    rows = [head + ["band", j + 1, "", "", float(lo), float(hi)] for j, (lo, hi) in enumerate(chart.band_edges)]
    rows += [head + ["gap", gap.d, _cell(gap.g), gap.status, _cell(gap.e_lo), _cell(gap.e_hi)] for gap in chart.gaps]
    return _csv(["q", "r", "M", "N", "M0", "grid", "kind", "index", "g", "status", "e_lo", "e_hi"], rows)


def verify_to_csv(model, grid, records) -> str:
    head = [model.q, model.r, model.M, model.N, model.M0, f"{grid.n1}x{grid.n2}"]
    rows = [head + [_cell(getattr(rec, f)) for f in RECORD_FIELDS] for rec in records]
    return _csv(["q", "r", "M", "N", "M0", "grid", *RECORD_FIELDS], rows)

"""File formats: band-plan YAML, session JSON documents, CSV exports."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import yaml

from . import __version__
from .errors import ConfigError, SchemaVersionError
from .model import (
    Band,
    BandPlan,
    Direction,
    Duplex,
    ExposureSeries,
    Generation,
    NoiseFloorRow,
    NoiseFloorTable,
    Session,
    SessionNote,
    Source,
)
from .units import Frequency, Unit

SESSION_SCHEMA_VERSION = 1


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the same directory, then rename over `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _mhz_value(hz: int) -> int | float:
    return hz // 1_000_000 if hz % 1_000_000 == 0 else hz / 1e6


def _require(d: dict, key: str, where: str) -> Any:
    if key not in d:
        raise ConfigError(f"{where}: missing field {key!r}")
    return d[key]


# --- band plan ------------------------------------------------------------


def plan_from_dict(data: dict) -> BandPlan:
    if not isinstance(data, dict):
        raise ConfigError("band plan: top level must be a mapping")
    operator = str(_require(data, "operator", "band plan"))
    bands, rows = [], []
    for i, raw in enumerate(_require(data, "bands", "band plan") or []):
        where = f"band plan: bands[{i}]"
        try:
            bid = str(_require(raw, "id", where))
            floor = _require(raw, "noise_floor", where)
            if not (isinstance(floor, (list, tuple)) and len(floor) == 2):
                raise ConfigError(f"{where}: noise_floor must be [preamp_off, preamp_on]")
            bands.append(
                Band(
                    id=bid,
                    label=str(raw.get("label", bid)),
                    f_start=Frequency.from_mhz(float(_require(raw, "f_start_mhz", where))),
                    f_stop=Frequency.from_mhz(float(_require(raw, "f_stop_mhz", where))),
                    duplex=Duplex(_require(raw, "duplex", where)),
                    generation=Generation(_require(raw, "generation", where)),
                    paired_band=raw.get("paired_band"),
                )
            )
            rows.append(NoiseFloorRow(bid, float(floor[0]), float(floor[1])))
        except ConfigError:
            raise
        except (ValueError, TypeError, AttributeError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    return BandPlan(operator, tuple(bands), NoiseFloorTable(tuple(rows)))


def plan_to_dict(plan: BandPlan) -> dict:
    out = []
    for b in plan.bands:
        row = plan.noise_floor.row(b.id)
        entry = {
            "id": b.id,
            "label": b.label,
            "f_start_mhz": _mhz_value(b.f_start.hertz),
            "f_stop_mhz": _mhz_value(b.f_stop.hertz),
            "duplex": b.duplex.value,
            "generation": b.generation.value,
        }
        if b.paired_band is not None:
            entry["paired_band"] = b.paired_band
        entry["noise_floor"] = [row.level_preamp_off, row.level_preamp_on]
        out.append(entry)
    return {"operator": plan.operator, "bands": out}


def parse_plan(text: str) -> BandPlan:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"band plan: {exc}") from exc
    return plan_from_dict(data)


def serialize_plan(plan: BandPlan) -> str:
    return yaml.safe_dump(plan_to_dict(plan), sort_keys=False, default_flow_style=None)


def load_plan(path: str | os.PathLike | None = None) -> BandPlan:
    """Load a band plan; with no path, the bundled W3 plan."""
    if path is None:
        text = resources.files("emf_exposure.data").joinpath("w3_plan.yaml").read_text()
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read band plan {path}: {exc}") from exc
    return parse_plan(text)


def default_plan() -> BandPlan:
    return load_plan(None)


# --- sessions ---------------------------------------------------------------


def _series_to_dict(s: ExposureSeries) -> dict:
    return {
        "band_id": s.band_id,
        "unit": s.unit.value,
        "source": s.source.value,
        "samples": [[t, v] for t, v in s.samples],
    }


def _series_from_dict(d: dict) -> ExposureSeries:
    return ExposureSeries(
        band_id=d["band_id"],
        unit=Unit(d["unit"]),
        source=Source(d["source"]),
        samples=tuple((float(t), float(v)) for t, v in d["samples"]),
    )


def session_to_dict(session: Session) -> dict:
    return {
        "schema_version": SESSION_SCHEMA_VERSION,
        "tool_version": __version__,
        "location_label": session.location_label,
        "los": session.los,
        "distance_to_rbs_m": session.distance_to_rbs_m,
        "direction": session.direction.value,
        "phase1": [_series_to_dict(s) for s in session.phase1],
        "selected_bands": list(session.selected_bands),
        "phase2": [_series_to_dict(s) for s in session.phase2],
        "phase3": [_series_to_dict(s) for s in session.phase3],
        "throughput_log": [[t, r] for t, r in session.throughput_log],
        "errors": [
            {"phase": e.phase, "band_id": e.band_id, "message": e.message} for e in session.errors
        ],
    }


def session_from_dict(d: dict) -> Session:
    if not isinstance(d, dict):
        raise ConfigError("session document must be a JSON object")
    version = d.get("schema_version")
    if version != SESSION_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unsupported session schema_version {version!r} (expected {SESSION_SCHEMA_VERSION})"
        )
    try:
        return Session(
            location_label=d["location_label"],
            los=bool(d["los"]),
            distance_to_rbs_m=float(d["distance_to_rbs_m"]),
            direction=Direction(d["direction"]),
            phase1=tuple(_series_from_dict(s) for s in d["phase1"]),
            selected_bands=tuple(d["selected_bands"]),
            phase2=tuple(_series_from_dict(s) for s in d["phase2"]),
            phase3=tuple(_series_from_dict(s) for s in d["phase3"]),
            throughput_log=tuple((float(t), float(r)) for t, r in d["throughput_log"]),
            errors=tuple(SessionNote(e["phase"], e.get("band_id"), e["message"]) for e in d.get("errors", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"corrupt session document: {exc!r}") from exc


def dump_session(session: Session) -> str:
    return json.dumps(session_to_dict(session), indent=2, sort_keys=True) + "\n"


def save_session(session: Session, path: str | os.PathLike) -> None:
    atomic_write_text(path, dump_session(session))


def load_session(path: str | os.PathLike) -> Session:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: unreadable session file: {exc}") from exc
    return session_from_dict(data)


# --- CSV --------------------------------------------------------------------

SERIES_CSV_COLUMNS = ("timestamp_s", "band_id", "unit", "value", "source")


def series_to_csv(series: Iterable[ExposureSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_CSV_COLUMNS)
    for s in series:
        for t, v in s.samples:
            w.writerow([repr(float(t)), s.band_id, s.unit.value, repr(float(v)), s.source.value])
    return buf.getvalue()


def series_from_csv(text: str) -> list[ExposureSeries]:
    groups: dict[tuple[str, str, str], list[tuple[float, float]]] = {}
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SERIES_CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV header {reader.fieldnames}")
    for row in reader:
        key = (row["band_id"], row["unit"], row["source"])
        groups.setdefault(key, []).append((float(row["timestamp_s"]), float(row["value"])))
    return [
        ExposureSeries(band_id=b, unit=Unit(u), source=Source(src), samples=tuple(samples))
        for (b, u, src), samples in groups.items()
    ]

import json

import pytest

from emf_exposure.errors import ConfigError, SchemaVersionError
from emf_exposure.model import Direction, ExposureSeries, Session, SessionNote, Source
from emf_exposure.storage import (
    atomic_write_text,
    dump_session,
    load_plan,
    load_session,
    parse_plan,
    save_session,
    serialize_plan,
    series_from_csv,
    series_to_csv,
)
from emf_exposure.units import Unit


def _session():
    return Session(
        "via-roma", False, 140.0, Direction.UL,
        phase1=(ExposureSeries("B3-DL", Unit.DBM_M2, ((0.0, -60.0), (0.5, -60.5)), Source.RBS_ENV),),
        selected_bands=("B3-UL", "B3-DL"),
        phase2=(ExposureSeries("B3-UL", Unit.VPM, ((10.0, 0.3), (10.5, 0.31)), Source.UE_ACTIVE),),
        phase3=(ExposureSeries("B3-DL", Unit.VPM, ((20.0, 0.05),), Source.RBS_ACTIVE),),
        throughput_log=((1.0, 12.5), (2.0, 13.0)),
        errors=(SessionNote("P3", "B3-DL", "partial"),),
    )


def test_plan_roundtrip(plan):
    assert parse_plan(serialize_plan(plan)) == plan


def test_plan_unknown_duplex_is_reported():
    text = "operator: X\nbands:\n- {id: A, label: A, f_start_mhz: 800, f_stop_mhz: 810, duplex: HALF, generation: NR, noise_floor: [-90, -100]}\n"
    with pytest.raises(ConfigError):
        parse_plan(text)


def test_session_roundtrip(tmp_path):
    s = _session()
    path = tmp_path / "s.json"
    save_session(s, path)
    assert load_session(path) == s
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == 1


def test_session_document_is_canonical():
    assert dump_session(_session()) == dump_session(_session())


def test_schema_version_mismatch_is_hard_error(tmp_path):
    doc = json.loads(dump_session(_session()))
    doc["schema_version"] = 2
    path = tmp_path / "v2.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaVersionError):
        load_session(path)


def test_corrupt_session_is_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema_version": 1, "phase1": ')
    with pytest.raises(ConfigError):
        load_session(path)


def test_series_csv_roundtrip():
    s = _session()
    series = [*s.phase1, *s.phase2]
    assert series_from_csv(series_to_csv(series)) == series


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "out" / "a.txt"
    atomic_write_text(target, "one")
    atomic_write_text(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in target.parent.iterdir()] == ["a.txt"]


def test_load_plan_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_plan(tmp_path / "nope.yaml")

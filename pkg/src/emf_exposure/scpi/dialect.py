"""The instrument command dialect, kept in one table.

Wire grammar: UTF-8 lines terminated by ``\\n``. Set commands are
``HEADER value`` and answer ``OK``; queries end in ``?`` and answer a bare
number (or a comma-separated list of numbers for the trace). Any failure is
answered ``ERR <code>``. Every set header also accepts the ``HEADER?`` form,
which returns the current value.

A real-instrument backend only needs a different HEADERS table.
"""

from __future__ import annotations

import enum
import math
import re


class TraceDetector(str, enum.Enum):
    RMS = "RMS"


class TypeDetector(str, enum.Enum):
    ROLLING_MAX = "RMAX"
    ROLLING_AVERAGE = "RAVG"
    MAX = "MAX"


# settings field -> set header (also the fixed emission order of apply_settings)
SET_HEADERS: dict[str, str] = {
    "unit": "UNIT:POW",
    "f_start": "SENS:FREQ:STAR",
    "f_stop": "SENS:FREQ:STOP",
    "attenuation": "INP:ATT",
    "resolution_bw": "SENS:BAND:RES",
    "video_bw": "SENS:BAND:VID",
    "sweep_points": "SENS:SWE:POIN",
    "trace_detector": "SENS:DET:TRAC",
    "type_detector": "SENS:DET:TYPE",
    "avg_samples": "SENS:AVER:COUN",
    "ref_level": "DISP:TRAC:RLEV",
    "scale_div": "DISP:TRAC:PDIV",
    "preamp": "INP:GAIN:STAT",
}

IDN = "*IDN?"
QUERY_MAX_LEVEL = "CALC:MAX?"  # args: f_min_hz f_max_hz
QUERY_CHANNEL_POWER = "MEAS:CHP?"  # args: f_min_hz f_max_hz
QUERY_TRACE = "TRAC:DATA?"
RESET_TRACE = "TRAC:RES"

FIELD_BY_HEADER = {v: k for k, v in SET_HEADERS.items()}

OK = "OK"

# error codes
ERR_MALFORMED = 100
ERR_BAD_VALUE = 101
ERR_BAD_SPAN = 102
ERR_OVER_RANGE = 103
ERR_DETECTOR = 104
ERR_BUSY = 110

ERROR_TEXT = {
    ERR_MALFORMED: "malformed or unknown command",
    ERR_BAD_VALUE: "value out of range",
    ERR_BAD_SPAN: "invalid frequency span",
    ERR_OVER_RANGE: "ADC over-range",
    ERR_DETECTOR: "query not allowed with the current detector",
    ERR_BUSY: "instrument already has a client",
}

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_ERR = re.compile(r"^ERR (\d+)$")


def format_number(x) -> str:
    """Shortest exact text for a number: integers bare, floats via repr."""
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers on the wire")
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot encode non-finite number {x}")
    return repr(x)


def parse_number(text: str) -> float:
    """Decimal with optional exponent; anything else raises ValueError."""
    text = text.strip()
    if not _NUMBER.match(text):
        raise ValueError(f"not a number frame: {text!r}")
    return float(text)


def parse_error(line: str) -> int | None:
    m = _ERR.match(line.strip())
    return int(m.group(1)) if m else None


def error_frame(code: int) -> str:
    return f"ERR {code}"

"""Shared test doubles."""

from __future__ import annotations

from dataclasses import replace

from emf_exposure.clock import SimulatedClock
from emf_exposure.errors import OverRange, PreampRejected, QueryFailed
from emf_exposure.model import BandPlan, NoiseFloorTable, SpectrumTrace
from emf_exposure.units import FieldStrength, Frequency


def sub_plan(plan: BandPlan, ids) -> BandPlan:
    ids = set(ids)
    return BandPlan(
        plan.operator,
        tuple(b for b in plan.bands if b.id in ids),
        NoiseFloorTable(tuple(r for r in plan.noise_floor.rows if r.band_id in ids)),
    )


def make_trace(freqs, values) -> SpectrumTrace:
    return SpectrumTrace(
        Frequency(freqs[0]), Frequency(freqs[-1]),
        tuple((Frequency(f), FieldStrength(v)) for f, v in zip(freqs, values)),
    )


class FakeInstrument:
    """Scripted instrument: max-level polls pop from `max_levels`, everything is logged."""

    def __init__(self, max_levels=(), channel_power=-60.0, clock=None, fail_after=None,
                 preamp_rejects=False, over_range_with_preamp=False):
        self.max_levels = list(max_levels)
        self.channel_power = channel_power
        self.clock = clock or SimulatedClock()
        self.fail_after = fail_after
        self.preamp_rejects = preamp_rejects
        self.over_range_with_preamp = over_range_with_preamp
        self.calls: list[tuple] = []
        self.preamp = False
        self.ref_level = None
        self.scale_div = None
        self._chp = 0

    def apply_settings(self, settings):
        self.calls.append(("apply", settings))
        if settings.ref_level is not None:
            self.ref_level = settings.ref_level
        if settings.scale_div is not None:
            self.scale_div = settings.scale_div
        if settings.preamp is not None:
            self.preamp = settings.preamp
        return len(settings.encode())

    def reset_trace(self):
        self.calls.append(("reset",))

    def query_max_level(self, lo, hi):
        self.calls.append(("max", lo, hi))
        if self.preamp and self.over_range_with_preamp:
            raise OverRange(103, "CALC:MAX?")
        return self.max_levels.pop(0) if len(self.max_levels) > 1 else self.max_levels[0]

    def query_channel_power(self, lo, hi):
        self.calls.append(("chp", lo, hi))
        self._chp += 1
        if self.fail_after is not None and self._chp > self.fail_after:
            raise QueryFailed(103, "MEAS:CHP?")
        return self.channel_power

    def set_ref_level(self, v):
        self.calls.append(("ref", v))
        self.ref_level = v

    def set_scale_div(self, v):
        self.calls.append(("scale", v))
        self.scale_div = v

    def set_preamp(self, on):
        self.calls.append(("preamp", on))
        if on and self.preamp_rejects:
            self.preamp = True
            raise PreampRejected(103, "INP:GAIN:STAT ON")
        self.preamp = on

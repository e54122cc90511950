"""Room acoustics simulation, time-delay estimation and SRP-PHAT localization."""
from .bench import localization_bench
from .beamform import delay_and_sum, plane_wave, steering_delays
from .geometry import (
    SPEED_OF_SOUND,
    ArrayGeometry,
    GeometryError,
    GridSpec,
    LinearArray,
    default_geometry,
    load_geometry,
    save_geometry,
)
from .signals import (
    AudioFrame,
    SignalTooShort,
    SourceOutsideRoom,
    SourceSpec,
    fractional_delay,
    frame_stream,
    read_wav,
    simulate_propagation,
    write_wav,
)
from .srp import DegenerateSignal, SrpLocalizer, SrpMap, gcc_phat, pair_lags, srp_phat

__all__ = [
    "localization_bench",
    "delay_and_sum", "plane_wave", "steering_delays", "SPEED_OF_SOUND", "ArrayGeometry",
    "GeometryError", "GridSpec", "LinearArray", "default_geometry", "load_geometry",
    "save_geometry", "AudioFrame", "SignalTooShort", "SourceOutsideRoom", "SourceSpec",
    "fractional_delay", "frame_stream", "read_wav", "simulate_propagation", "write_wav",
    "DegenerateSignal", "SrpLocalizer", "SrpMap", "gcc_phat", "pair_lags", "srp_phat",
]

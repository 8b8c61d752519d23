from .scene import (
    Emitter,
    Location,
    Role,
    Scene,
    SceneConfig,
    dump_scene,
    load_scene,
    parse_scene,
    scene_reading,
)
from .server import SimulatedAnalyzer, SimulatorServer, handle_control, serve

__all__ = [
    "Emitter",
    "Location",
    "Role",
    "Scene",
    "SceneConfig",
    "SimulatedAnalyzer",
    "SimulatorServer",
    "dump_scene",
    "handle_control",
    "load_scene",
    "parse_scene",
    "scene_reading",
    "serve",
]

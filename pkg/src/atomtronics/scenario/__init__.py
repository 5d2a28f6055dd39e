from .config import ConfigInvalid, ScenarioConfig, load_config, validate_config
from .geometry import Outline, build_outline, dumbbell_outline, kiwi_outline, open_plane, ring_outline
from .presets import PRESETS, preset_config
from .runner import analyze_run, run_scenario

__all__ = [
    "ConfigInvalid", "ScenarioConfig", "load_config", "validate_config", "Outline", "build_outline",
    "dumbbell_outline", "kiwi_outline", "open_plane", "ring_outline", "PRESETS", "preset_config",
    "analyze_run", "run_scenario",
]

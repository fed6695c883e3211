from .app import app, create_app, preset_text, PRESETS

__all__ = ["app", "create_app", "preset_text", "PRESETS"]

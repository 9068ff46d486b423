"""Figure rendering for ptchaos experiment artifacts.

This package reads the runner's CSV/JSON files only; reference overlays are
recomputed here from the documented closed forms, never copied from the
primary outputs, so unit or serialization drift shows up as a visible
mismatch.
"""

__version__ = "0.1.0"

try:
    from ._dcflex import (
        flexibility_level,
        ideal_split,
        oracle_suite,
        preset_text,
        run_config,
        run_preset,
    )
except ImportError:  # extension built outside the package (ctest runs)
    from _dcflex import (
        flexibility_level,
        ideal_split,
        oracle_suite,
        preset_text,
        run_config,
        run_preset,
    )

__all__ = [
    "flexibility_level",
    "ideal_split",
    "oracle_suite",
    "preset_text",
    "run_config",
    "run_preset",
]

"""Loss-aware zonal market clearing and remedial-action cost comparison."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled data file, e.g. ``data_path("prices.json")``."""
    return Path(str(resources.files(__name__).joinpath("data", name)))


from .kernel import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__", "data_path"]

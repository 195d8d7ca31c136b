"""Shipped system case files."""

from importlib import resources


def case_path(name: str):
    """Filesystem path of a shipped case, e.g. ``case_path("singlebus")``."""
    fname = name if name.endswith(".json") else f"{name}.json"
    return resources.files(__package__) / fname

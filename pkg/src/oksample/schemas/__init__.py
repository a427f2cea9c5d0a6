"""JSON schemas for the files written by the command line."""
import json
from importlib import resources

NAMES = ("metadata", "report", "summary", "cluster")


def load(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(name)
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())

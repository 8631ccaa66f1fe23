"""Module entry: python -m antsel."""

from .cli import entrypoint

entrypoint()

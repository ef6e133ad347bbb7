"""Radial solver for the clamped fourth-order MEMS equation."""

from .model import DomainError, ModelParams, g, g_prime, g_second
from .radial import assemble_A, build_grid

__all__ = ["DomainError", "ModelParams", "assemble_A", "build_grid", "g", "g_prime", "g_second"]

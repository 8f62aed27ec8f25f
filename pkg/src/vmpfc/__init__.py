"""Energy-stable Fourier pseudospectral solvers for a phase field crystal
model with a vacancy potential, plus adaptive time stepping and a CLI."""

__version__ = "0.1.0"

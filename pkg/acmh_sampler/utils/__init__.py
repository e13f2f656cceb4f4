"""Run-directory file helpers."""

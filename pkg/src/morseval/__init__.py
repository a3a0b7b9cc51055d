"""Executable Morse-theory constructions on explicit smooth functions."""

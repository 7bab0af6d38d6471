"""Operational semantics: component, collective, and system transition
derivation over weighted functions."""

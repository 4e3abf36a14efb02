"""Incidence geometry of delta-atoms and delta-tubes."""

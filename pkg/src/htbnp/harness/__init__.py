"""Experiment registry, configuration, artifacts and command line."""

"""Simulation scenarios, accuracy metrics and the replication runner."""

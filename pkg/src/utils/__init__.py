"""Configuration, CSV ingestion and report writers for the command scripts."""

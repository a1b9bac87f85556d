"""Shared logging, CLI callbacks and environment checks for the roughsk workspace."""

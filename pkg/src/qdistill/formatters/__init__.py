"""Formatter modules."""

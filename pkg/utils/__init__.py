"""Utility functions for report formatting."""

"""Readers and writers for tabular survival data sources."""

"""Desk-scale certification of strong metric subregularity and isolated calmness."""

__version__ = "0.1.0"

REPORT_SCHEMA = 1

"""Verification-and-repair engine for machine-generated optimization code,
plus the deterministic perishable-retail benchmark suite it is tested on."""

__version__ = "0.1.0"

"""Plugins bundled with AMTL that need no trained network."""

"""Bundled experiment configs (INI); see ``pinto configs``."""

"""Bundled desk-scale corpora shipped with the package."""

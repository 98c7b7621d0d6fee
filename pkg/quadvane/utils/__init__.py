"""Utility modules for the quadvane package."""

# Export logging functions for easier imports
from .log_setup import setup_logging

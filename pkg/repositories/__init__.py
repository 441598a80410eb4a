"""
Repository layer for the Kou engine
File-backed storage for reference solutions and study results
"""

__version__ = "1.0.0"

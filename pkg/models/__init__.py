"""
Domain models for the two-asset Kou American option engine
Parameter sets, method variants and result records
"""

__version__ = "1.0.0"

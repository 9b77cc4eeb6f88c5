"""
OMRA Lab - motion resolution adaptation for hierarchical B-frame coding.
"""

__version__ = "0.1.0"

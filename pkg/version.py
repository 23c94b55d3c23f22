"""
Version information for XYSqueeze.
This file contains the current version number and related metadata.
"""

# Version information
VERSION = "0.1.0"  # Current version based on CHANGELOG.md
VERSION_DATE = "2026-10-19"  # Release date from CHANGELOG.md
PROJECT_NAME = "XYSqueeze"


def get_version_string(include_date=False):
    """Return a formatted version string.

    Args:
        include_date (bool, optional): Whether to include the release date. Defaults to False.

    Returns:
        str: Formatted version string
    """
    if include_date:
        return f"{PROJECT_NAME} v{VERSION} ({VERSION_DATE})"
    return f"{PROJECT_NAME} v{VERSION}"
